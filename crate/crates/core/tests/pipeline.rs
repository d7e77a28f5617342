mod common;

use twistlab::graph::{homotopy_commutes, GraphMorphism};
use twistlab::normalize::{analyze, check_good, good_representative, Options};

#[test]
fn corpus_normalizes() {
    let mut failures = Vec::new();
    for s in common::deep_corpus().into_iter().chain(common::corpus()) {
        let an = match analyze(&s.map, 64) {
            Ok(a) => a,
            Err(e) => {
                failures.push(format!("{}: analyze {e}", s.name));
                continue;
            }
        };
        assert!(an.report.rank <= an.report.n, "{}", s.name);
        if !an.report.maximal {
            failures.push(format!("{}: not maximal {:?}", s.name, an.report));
            continue;
        }
        match good_representative(&s.map, Options::default()) {
            Ok(out) => {
                if let Err(e) = check_good(&out.map) {
                    failures.push(format!("{}: {e}", s.name));
                }
                if out.map.graph().vertex_count() != an.report.s {
                    failures.push(format!("{}: {} vertices, s = {}", s.name, out.map.graph().vertex_count(), an.report.s));
                }
                let id = GraphMorphism::identity(&out.map);
                assert!(homotopy_commutes(&out.map, &out.map, &id).is_ok());
            }
            Err(e) => failures.push(format!("{}: normalize {e}", s.name)),
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
