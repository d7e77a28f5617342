//! Line-oriented text formats: `aut`, `graphmap`, and the analysis report.
//! `#` starts a comment line; `end` closes a block.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, GraphMap};
use crate::nielsen::Analysis;
use crate::word::{parse_tokens, Basis, Endo, Word};

/// A parsed input file.
#[derive(Debug, Clone)]
pub enum Input {
    Aut(Endo),
    Map(GraphMap),
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-comment, non-blank lines with their 1-based numbers.
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Detects the format from the header line.
pub fn parse_input(text: &str) -> Result<Input> {
    let lines = content_lines(text);
    let Some(&(n, first)) = lines.first() else {
        return Err(parse_err(0, "empty input"));
    };
    match first.split_whitespace().next() {
        Some("aut") => parse_aut(text).map(Input::Aut),
        Some("graphmap") => parse_graphmap(text).map(Input::Map),
        _ => Err(parse_err(n, format!("unknown header `{first}`"))),
    }
}

pub fn parse_aut(text: &str) -> Result<Endo> {
    let lines = content_lines(text);
    let Some(&(hn, header)) = lines.first() else {
        return Err(parse_err(0, "empty input"));
    };
    let mut words = header.split_whitespace();
    if words.next() != Some("aut") {
        return Err(parse_err(hn, "expected `aut` header"));
    }
    let mut rank: Option<usize> = None;
    let mut names: Option<Vec<String>> = None;
    for kv in words {
        match kv.split_once('=') {
            Some(("rank", v)) => rank = Some(v.parse().map_err(|_| parse_err(hn, format!("bad rank `{v}`")))?),
            Some(("names", v)) => names = Some(v.split(',').map(str::to_string).collect()),
            _ => return Err(parse_err(hn, format!("unknown header field `{kv}`"))),
        }
    }
    let basis = match (rank, names) {
        (_, Some(ns)) => {
            if rank.is_some_and(|r| r != ns.len()) {
                return Err(parse_err(hn, "rank does not match the number of names"));
            }
            Basis::new(ns).map_err(|e| parse_err(hn, e.to_string()))?
        }
        (Some(r), None) if r >= 1 => Basis::standard(r),
        _ => return Err(parse_err(hn, "header needs rank= or names=")),
    };
    let mut images: Vec<Option<Word>> = vec![None; basis.rank()];
    let mut ended = false;
    for &(n, line) in &lines[1..] {
        if ended {
            return Err(parse_err(n, "content after `end`"));
        }
        if line == "end" {
            ended = true;
            continue;
        }
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| parse_err(n, "expected `x -> word`"))?;
        let lhs = lhs.trim();
        let i = basis.index_of(lhs).ok_or_else(|| parse_err(n, format!("unknown generator `{lhs}`")))?;
        if images[i].is_some() {
            return Err(parse_err(n, format!("generator `{lhs}` mapped twice")));
        }
        images[i] = Some(basis.parse_word(rhs).map_err(|e| parse_err(n, e.to_string()))?);
    }
    if !ended {
        return Err(parse_err(lines.last().map_or(0, |l| l.0), "missing `end`"));
    }
    let images: Vec<Word> = images
        .into_iter()
        .enumerate()
        .map(|(i, w)| w.ok_or_else(|| parse_err(hn, format!("generator `{}` has no image", basis.name(i)))))
        .collect::<Result<_>>()?;
    Endo::new(basis, images)
}

pub fn format_aut(aut: &Endo) -> String {
    let b = aut.basis();
    let mut s = format!("aut rank={} names={}\n", b.rank(), b.names().join(","));
    for i in 0..b.rank() {
        let _ = writeln!(s, "{} -> {}", b.name(i), b.format_word(aut.image(i)));
    }
    s.push_str("end\n");
    s
}

pub fn parse_graphmap(text: &str) -> Result<GraphMap> {
    let lines = content_lines(text);
    let Some(&(hn, header)) = lines.first() else {
        return Err(parse_err(0, "empty input"));
    };
    if header != "graphmap" {
        return Err(parse_err(hn, "expected `graphmap` header"));
    }
    let mut vertices: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String, String, usize)> = Vec::new();
    let mut maps: Vec<(usize, String, String)> = Vec::new();
    let mut ended = false;
    for &(n, line) in &lines[1..] {
        if ended {
            return Err(parse_err(n, "content after `end`"));
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("end") => ended = true,
            Some("vertex") => {
                let v: Vec<&str> = toks.collect();
                if v.len() != 1 {
                    return Err(parse_err(n, "expected `vertex <name>`"));
                }
                vertices.push(v[0].to_string());
            }
            Some("edge") => {
                let v: Vec<&str> = toks.collect();
                if v.len() != 3 {
                    return Err(parse_err(n, "expected `edge <name> <from> <to>`"));
                }
                edges.push((v[0].to_string(), v[1].to_string(), v[2].to_string(), n));
            }
            Some("map") => {
                let name = toks.next().ok_or_else(|| parse_err(n, "expected `map <name> ...`"))?;
                let rest: Vec<&str> = toks.collect();
                maps.push((n, name.to_string(), rest.join(" ")));
            }
            _ => return Err(parse_err(n, format!("unrecognized line `{line}`"))),
        }
    }
    if !ended {
        return Err(parse_err(lines.last().map_or(0, |l| l.0), "missing `end`"));
    }
    let vindex = |name: &str, n: usize| {
        vertices.iter().position(|v| v == name).ok_or_else(|| parse_err(n, format!("unknown vertex `{name}`")))
    };
    let mut es = Vec::new();
    for (name, a, b, n) in &edges {
        es.push(Edge { name: name.clone(), init: vindex(a, *n)?, term: vindex(b, *n)? });
    }
    let graph = Graph::new(vertices.clone(), es).map_err(|e| parse_err(hn, e.to_string()))?;
    let mut vmap: Vec<Option<usize>> = vec![None; graph.vertex_count()];
    let mut images: Vec<Option<Vec<i32>>> = vec![None; graph.edge_count()];
    for (n, name, rhs) in &maps {
        if let Some(e) = graph.edge_index(name) {
            if images[e].is_some() {
                return Err(parse_err(*n, format!("edge `{name}` mapped twice")));
            }
            let letters = parse_tokens(rhs, |x| graph.edge_index(x)).map_err(|e| parse_err(*n, e.to_string()))?;
            images[e] = Some(letters);
        } else if let Some(v) = graph.vertex_index(name) {
            if vmap[v].is_some() {
                return Err(parse_err(*n, format!("vertex `{name}` mapped twice")));
            }
            vmap[v] = Some(vindex(rhs.trim(), *n)?);
        } else {
            return Err(parse_err(*n, format!("unknown name `{name}`")));
        }
    }
    let images: Vec<Vec<i32>> = images
        .into_iter()
        .enumerate()
        .map(|(e, i)| i.ok_or_else(|| parse_err(hn, format!("edge `{}` has no image", graph.edge(e).name))))
        .collect::<Result<_>>()?;
    // unmapped vertices inherit the endpoint of an incident edge image
    for v in 0..graph.vertex_count() {
        if vmap[v].is_some() {
            continue;
        }
        for (e, img) in images.iter().enumerate() {
            let ed = graph.edge(e);
            if img.is_empty() {
                continue;
            }
            if ed.init == v {
                vmap[v] = Some(graph.origin(img[0]));
            } else if ed.term == v {
                vmap[v] = Some(graph.terminus(*img.last().expect("nonempty")));
            }
            if vmap[v].is_some() {
                break;
            }
        }
    }
    let vmap: Vec<usize> = vmap
        .into_iter()
        .enumerate()
        .map(|(v, x)| x.ok_or_else(|| parse_err(hn, format!("vertex `{}` has no image", graph.vertex_name(v)))))
        .collect::<Result<_>>()?;
    GraphMap::new(graph, vmap, images)
}

pub fn format_graphmap(m: &GraphMap) -> String {
    let g = m.graph();
    let mut s = String::from("graphmap\n");
    for v in g.vertices() {
        let _ = writeln!(s, "vertex {v}");
    }
    for e in g.edges() {
        let _ = writeln!(s, "edge {} {} {}", e.name, g.vertex_name(e.init), g.vertex_name(e.term));
    }
    for v in 0..g.vertex_count() {
        let _ = writeln!(s, "map {} {}", g.vertex_name(v), g.vertex_name(m.vertex_image(v)));
    }
    for e in 0..g.edge_count() {
        let _ = writeln!(s, "map {} {}", g.edge(e).name, g.format_path(m.image(e)));
    }
    s.push_str("end\n");
    s
}

pub fn format_report(an: &Analysis) -> String {
    let m = &an.map;
    let g = m.graph();
    let r = &an.report;
    let mut s = String::from("analysis\n");
    let _ = writeln!(s, "n {}", r.n);
    for (i, st) in m.strata().iter().enumerate() {
        let names: Vec<&str> = st.edges.iter().map(|&e| g.edge(e).name.as_str()).collect();
        let _ = writeln!(s, "stratum {} {} {}", i + 1, st.kind, names.join(" "));
    }
    for inp in &an.sigma.inps {
        let _ = writeln!(s, "inp {} {} {}", inp.height + 1, inp.shape, g.format_path(&inp.path));
    }
    for &(v, rank) in &r.components {
        let _ = writeln!(s, "component {} rank {}", g.vertex_name(v), rank);
    }
    let _ = writeln!(s, "rank {}", r.rank);
    let _ = writeln!(s, "s {}", r.s);
    let _ = writeln!(s, "maximal {}", r.maximal);
    s.push_str("end\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nielsen::analyze_map;

    const RANK2: &str = "# twist\naut rank=2 names=a,b\na -> a\nb -> b a\nend\n";

    #[test]
    fn aut_round_trip() {
        let aut = parse_aut(RANK2).unwrap();
        assert_eq!(aut.to_string(), "{a->a, b->b a}");
        assert_eq!(parse_aut(&format_aut(&aut)).unwrap(), aut);
        let short = parse_aut("aut rank=3\na -> a\nb -> b\nc -> c a\nend").unwrap();
        assert_eq!(short.basis().names(), ["a", "b", "c"]);
    }

    #[test]
    fn aut_errors_carry_lines() {
        let err = parse_aut("aut rank=2 names=a,b\na -> a\nb -> b q\nend\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(parse_aut("aut rank=2 names=a,b\na -> a\nend\n").is_err());
        assert!(parse_aut("aut rank=2 names=a,b\na -> a\nb -> b\n").is_err());
        assert!(matches!(parse_input("nonsense\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn graphmap_round_trip() {
        let text = "graphmap\nvertex v0\nedge a v0 v0\nedge b v0 v0\nmap v0 v0\nmap a a\nmap b b a\nend\n";
        let m = parse_graphmap(text).unwrap();
        assert_eq!(format_graphmap(&m), text);
        let Input::Map(m2) = parse_input(text).unwrap() else { panic!() };
        assert_eq!(m2, m);
    }

    #[test]
    fn vertex_images_are_inferred() {
        let text = "graphmap\nvertex v\nvertex w\nedge a v v\nedge e v w\nedge b w w\nmap a a\nmap e a e\nmap b b\nend\n";
        let m = parse_graphmap(text).unwrap();
        assert_eq!(m.vmap(), &[0, 1]);
    }

    #[test]
    fn report_lines() {
        let aut = parse_aut(RANK2).unwrap();
        let (m, _) = crate::graph::rose_of(&aut).unwrap();
        let an = analyze_map(&m.compute_filtration(), 64).unwrap();
        let rep = format_report(&an);
        assert!(rep.contains("inp 2 e-beta-ebar b a b'\n"), "{rep}");
        assert!(rep.contains("rank 2\ns 1\nmaximal true\n"));
    }
}
