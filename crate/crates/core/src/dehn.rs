//! Graphs of groups built from good representatives, words in the path
//! group, and the Dehn twist they carry.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{EdgePath, GraphMap};
use crate::normalize::check_good;
use crate::word::{letter, letter_index, root_letters, shortlex, Letter, Word};

/// A syllable of a path-group word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Syllable {
    /// Element of the vertex group at the given vertex, over global
    /// generator indices.
    Vertex(usize, Word),
    /// Stable letter of an edge of the underlying graph (signed).
    Stable(Letter),
}

/// `r_0 t_1 r_1 … t_q r_q` with empty vertex elements omitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathGroupWord {
    pub start: usize,
    pub end: usize,
    pub syllables: Vec<Syllable>,
}

impl PathGroupWord {
    pub fn trivial(v: usize) -> Self {
        PathGroupWord { start: v, end: v, syllables: Vec::new() }
    }

    pub fn is_loop(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexGenerator {
    pub vertex: usize,
    pub name: String,
    /// The Nielsen loop in the good representative it stands for.
    pub path: EdgePath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GogEdge {
    /// Edge index in the good representative (oriented so it twists forwards).
    pub edge: usize,
    pub init: usize,
    pub term: usize,
    /// `m_e(a_e)` in the group of the terminal vertex.
    pub mono: Word,
    /// `m_ē(a_e)` in the group of the initial vertex.
    pub comono: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphOfGroups {
    /// The good representative, with twist edges oriented forwards.
    pub map: GraphMap,
    pub generators: Vec<VertexGenerator>,
    pub edges: Vec<GogEdge>,
    /// Position in `edges` of each edge of the representative, if any.
    edge_slot: Vec<Option<usize>>,
    /// Generator index of each fixed loop of the representative.
    loop_generator: Vec<Option<usize>>,
}

/// Twistor exponents `r_e`, one per edge of the graph of groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DehnTwist {
    pub exponents: Vec<i64>,
}

impl DehnTwist {
    pub fn inverse(&self) -> DehnTwist {
        DehnTwist { exponents: self.exponents.iter().map(|k| -k).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.exponents.iter().all(|&k| k == 0)
    }
}

/// `f(E) = E β^k` in the forward orientation: `(β, k)` with `β` canonical.
fn twist_form(m: &GraphMap, e: usize) -> Option<(EdgePath, i64)> {
    let g = m.graph();
    let img = m.image(e);
    let l = letter(e, false);
    if img.letters().first() != Some(&l) || img.len() < 2 {
        return None;
    }
    let w = &img.letters()[1..];
    let (root, k) = root_letters(w);
    let inv: Vec<Letter> = root.iter().rev().map(|x| -x).collect();
    let (beta, sign) = if shortlex(&inv, &root).is_lt() { (inv, -1) } else { (root, 1) };
    let beta = EdgePath::new(g, g.edge(e).term, beta).ok()?;
    Some((beta, sign * k as i64))
}

fn concat_name(m: &GraphMap, p: &EdgePath) -> String {
    format!("g_{}", m.graph().format_path(p).replace(' ', ""))
}

/// Builds the graph of groups and Dehn twist of a good representative.
pub fn build_graph_of_groups(good: &GraphMap) -> Result<(GraphOfGroups, DehnTwist)> {
    let single_loop = good.graph().edge_count() == 1 && good.image(0).letters() == [1];
    if !single_loop {
        check_good(good)?;
    }
    let mut m = good.clone();
    let ne = m.graph().edge_count();
    for e in 0..ne {
        let fixed = m.image(e).letters() == [letter(e, false)];
        if !fixed && twist_form(&m, e).is_none() {
            m = m.reverse_edge(e);
        }
    }
    let m = m.compute_filtration();
    let g = m.graph();
    let heights = m.heights();
    let mut order: Vec<usize> = (0..ne).collect();
    order.sort_by_key(|&e| (heights[e], e));
    let mut generators = Vec::new();
    let mut loop_generator = vec![None; ne];
    let mut twists: Vec<(usize, EdgePath, i64, usize)> = Vec::new();
    for &e in &order {
        let ed = g.edge(e);
        if m.image(e).letters() == [letter(e, false)] {
            if !g.is_loop(e) {
                return Err(Error::NotGoodRepresentative(format!("fixed edge `{}` is not a loop", ed.name)));
            }
            loop_generator[e] = Some(generators.len());
            let path = m.image(e).clone();
            generators.push(VertexGenerator { vertex: ed.init, name: concat_name(&m, &path), path });
            continue;
        }
        let (beta, k) = twist_form(&m, e)
            .ok_or_else(|| Error::NotGoodRepresentative(format!("edge `{}` does not twist", ed.name)))?;
        let e_path = EdgePath::from_letter(g, letter(e, false));
        let path = e_path.then(&beta).then(&e_path.inverse());
        twists.push((e, beta, k, generators.len()));
        generators.push(VertexGenerator { vertex: ed.init, name: concat_name(&m, &path), path });
    }
    let mut gg = GraphOfGroups { map: m.clone(), generators, edges: Vec::new(), edge_slot: vec![None; ne], loop_generator };
    let mut exponents = Vec::new();
    // edges in height order, so every β reduces through lower edges only
    for (e, beta, k, gen) in twists {
        let ed = g.edge(e).clone();
        let reduced = gg.reduce(&gg.sigma(&beta)?)?;
        let mono = match reduced.syllables.as_slice() {
            [Syllable::Vertex(v, w)] if *v == ed.term => w.clone(),
            _ => {
                return Err(Error::NotGoodRepresentative(format!(
                    "twisting loop of `{}` is not a vertex group element",
                    ed.name
                )))
            }
        };
        gg.edge_slot[e] = Some(gg.edges.len());
        gg.edges.push(GogEdge { edge: e, init: ed.init, term: ed.term, mono, comono: Word::generator(gen) });
        exponents.push(k);
    }
    Ok((gg, DehnTwist { exponents }))
}

impl GraphOfGroups {
    pub fn vertex_count(&self) -> usize {
        self.map.graph().vertex_count()
    }

    pub fn generators_at(&self, v: usize) -> Vec<usize> {
        (0..self.generators.len()).filter(|&i| self.generators[i].vertex == v).collect()
    }

    pub fn format_vertex_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        w.letters()
            .iter()
            .map(|&l| {
                let n = &self.generators[letter_index(l)].name;
                if l < 0 {
                    format!("{n}'")
                } else {
                    n.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn stable_name(&self, l: Letter) -> String {
        let ge = &self.edges[letter_index(l)];
        let n = format!("t_{}", self.map.graph().edge(ge.edge).name);
        if l < 0 {
            format!("{n}'")
        } else {
            n
        }
    }

    pub fn format_word(&self, w: &PathGroupWord) -> String {
        if w.syllables.is_empty() {
            return "1".into();
        }
        w.syllables
            .iter()
            .map(|s| match s {
                Syllable::Vertex(_, x) => self.format_vertex_word(x),
                Syllable::Stable(l) => self.stable_name(*l),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn stable_ends(&self, l: Letter) -> (usize, usize) {
        let ge = &self.edges[letter_index(l)];
        if l > 0 {
            (ge.init, ge.term)
        } else {
            (ge.term, ge.init)
        }
    }

    /// Checks incidences and vertex-group membership.
    pub fn validate(&self, w: &PathGroupWord) -> Result<()> {
        let mut cur = w.start;
        for s in &w.syllables {
            match s {
                Syllable::Vertex(v, x) => {
                    if *v != cur || x.letters().iter().any(|&l| self.generators.get(letter_index(l)).is_none_or(|g| g.vertex != cur)) {
                        return Err(Error::MalformedIncidence(format!("vertex element off its vertex: {}", self.format_vertex_word(x))));
                    }
                }
                Syllable::Stable(l) => {
                    if letter_index(*l) >= self.edges.len() {
                        return Err(Error::MalformedIncidence("unknown stable letter".into()));
                    }
                    let (a, b) = self.stable_ends(*l);
                    if a != cur {
                        return Err(Error::MalformedIncidence(format!("{} does not start at the current vertex", self.stable_name(*l))));
                    }
                    cur = b;
                }
            }
        }
        if cur != w.end {
            return Err(Error::MalformedIncidence("word does not end where declared".into()));
        }
        Ok(())
    }

    /// Britton-style reduction: removes every pinch `t_e m_e(a)^k t_e⁻¹`
    /// and `t_e⁻¹ m_ē(a)^k t_e`, merging adjacent vertex elements.
    pub fn reduce(&self, w: &PathGroupWord) -> Result<PathGroupWord> {
        self.validate(w)?;
        let mut out: Vec<Syllable> = Vec::new();
        for s in &w.syllables {
            match s {
                Syllable::Vertex(v, x) => push_vertex(&mut out, *v, x),
                Syllable::Stable(l) => {
                    let l = *l;
                    let pinch = match out.as_slice() {
                        [.., Syllable::Stable(p)] if *p == -l => Some(Word::identity()),
                        [.., Syllable::Stable(p), Syllable::Vertex(_, x)] if *p == -l => {
                            let ge = &self.edges[letter_index(l)];
                            // t_e x t_e⁻¹ needs x in <m_e>; t_e⁻¹ x t_e needs x in <m_ē>
                            let (inside, other) = if *p > 0 { (&ge.mono, &ge.comono) } else { (&ge.comono, &ge.mono) };
                            x.power_of(inside).map(|k| other.pow(k))
                        }
                        _ => None,
                    };
                    match pinch {
                        Some(rep) => {
                            if matches!(out.last(), Some(Syllable::Vertex(..))) {
                                out.pop();
                            }
                            out.pop();
                            let (_, v) = self.stable_ends(l);
                            push_vertex(&mut out, v, &rep);
                        }
                        None => out.push(Syllable::Stable(l)),
                    }
                }
            }
        }
        Ok(PathGroupWord { start: w.start, end: w.end, syllables: out })
    }

    /// `σ`: fixed loops to vertex generators, twist edges to stable letters.
    pub fn sigma(&self, p: &EdgePath) -> Result<PathGroupWord> {
        let g = self.map.graph();
        let mut syl = Vec::new();
        for &l in p.letters() {
            let e = letter_index(l);
            if let Some(i) = self.loop_generator[e] {
                let w = Word::generator(i);
                syl.push(Syllable::Vertex(g.edge(e).init, if l > 0 { w } else { w.inverse() }));
            } else if let Some(slot) = self.edge_slot[e] {
                syl.push(Syllable::Stable(letter(slot, l < 0)));
            } else {
                return Err(Error::PreconditionFailed(format!("edge `{}` has no image under sigma yet", g.edge(e).name)));
            }
        }
        let mut out: Vec<Syllable> = Vec::new();
        for s in syl {
            match s {
                Syllable::Vertex(v, x) => push_vertex(&mut out, v, &x),
                st => out.push(st),
            }
        }
        Ok(PathGroupWord { start: p.start(), end: p.end(), syllables: out })
    }

    /// `σ′`: stable letters back to edges, generators to their Nielsen loops.
    pub fn sigma_inv(&self, w: &PathGroupWord) -> Result<EdgePath> {
        self.validate(w)?;
        let g = self.map.graph();
        let mut p = EdgePath::trivial(w.start);
        for s in &w.syllables {
            match s {
                Syllable::Vertex(_, x) => {
                    for &l in x.letters() {
                        let loop_ = &self.generators[letter_index(l)].path;
                        p = p.then(&if l > 0 { loop_.clone() } else { loop_.inverse() });
                    }
                }
                Syllable::Stable(l) => {
                    let e = self.edges[letter_index(*l)].edge;
                    p = p.then(&EdgePath::from_letter(g, letter(e, *l < 0)));
                }
            }
        }
        Ok(p)
    }

    fn apply_unreduced(&self, d: &DehnTwist, w: &PathGroupWord) -> PathGroupWord {
        let mut out: Vec<Syllable> = Vec::new();
        for s in &w.syllables {
            match s {
                Syllable::Vertex(v, x) => push_vertex(&mut out, *v, x),
                Syllable::Stable(l) => {
                    let i = letter_index(*l);
                    let ge = &self.edges[i];
                    let z = ge.mono.pow(d.exponents[i]);
                    if *l > 0 {
                        out.push(Syllable::Stable(*l));
                        push_vertex(&mut out, ge.term, &z);
                    } else {
                        push_vertex(&mut out, ge.term, &z.inverse());
                        out.push(Syllable::Stable(*l));
                    }
                }
            }
        }
        PathGroupWord { start: w.start, end: w.end, syllables: out }
    }

    /// `D(t_e) = t_e m_e(z_e)`, identity on vertex groups, then reduced.
    pub fn apply(&self, d: &DehnTwist, w: &PathGroupWord) -> Result<PathGroupWord> {
        self.reduce(&self.apply_unreduced(d, w))
    }

    /// The twist restricted to loops at a vertex.
    pub fn twist_apply(&self, d: &DehnTwist, w: &PathGroupWord) -> Result<PathGroupWord> {
        if !w.is_loop() {
            return Err(Error::NotALoop(self.format_word(w)));
        }
        self.apply(d, w)
    }

    /// Conjugates a loop at `v` by a path `p` from `u` to `v`: `p w p⁻¹`.
    pub fn rebase(&self, w: &PathGroupWord, p: &PathGroupWord) -> Result<PathGroupWord> {
        if !w.is_loop() {
            return Err(Error::NotALoop(self.format_word(w)));
        }
        if p.end != w.start {
            return Err(Error::MalformedIncidence("connecting word does not end at the loop's base".into()));
        }
        let mut syl = p.syllables.clone();
        syl.extend(w.syllables.iter().cloned());
        syl.extend(invert_syllables(&p.syllables));
        self.reduce(&PathGroupWord { start: p.start, end: p.start, syllables: syl })
    }

    /// Checks `[σ(f(e))] = [D(σ(e))]` on every edge; returns the first
    /// failing edge name.
    pub fn verify_twist(&self, d: &DehnTwist) -> std::result::Result<(), String> {
        let g = self.map.graph();
        for e in 0..g.edge_count() {
            let name = || g.edge(e).name.clone();
            let lhs = self.sigma(self.map.image(e)).and_then(|w| self.reduce(&w)).map_err(|_| name())?;
            let se = self.sigma(&EdgePath::from_letter(g, letter(e, false))).map_err(|_| name())?;
            let rhs = self.apply(d, &se).map_err(|_| name())?;
            if lhs != rhs {
                return Err(name());
            }
        }
        Ok(())
    }

    /// `D` respects `t_e m_e(a) t_e⁻¹ = m_ē(a)` on every edge.
    pub fn relations_preserved(&self, d: &DehnTwist) -> bool {
        self.edges.iter().enumerate().all(|(i, ge)| {
            let w = PathGroupWord {
                start: ge.init,
                end: ge.init,
                syllables: vec![
                    Syllable::Stable(letter(i, false)),
                    Syllable::Vertex(ge.term, ge.mono.clone()),
                    Syllable::Stable(letter(i, true)),
                ],
            };
            self.apply(d, &w).is_ok_and(|r| r.syllables == vec![Syllable::Vertex(ge.init, ge.comono.clone())])
        })
    }

    pub fn to_text(&self, d: &DehnTwist) -> String {
        let g = self.map.graph();
        let mut s = String::from("gog\n");
        for v in 0..g.vertex_count() {
            let names: Vec<&str> = self.generators_at(v).into_iter().map(|i| self.generators[i].name.as_str()).collect();
            let _ = writeln!(s, "vertex {} group {}", g.vertex_name(v), names.join(" "));
        }
        for (i, ge) in self.edges.iter().enumerate() {
            let _ = writeln!(
                s,
                "edge {} {} {} mono {} comono {} twist {}",
                g.edge(ge.edge).name,
                g.vertex_name(ge.init),
                g.vertex_name(ge.term),
                self.format_vertex_word(&ge.mono),
                self.format_vertex_word(&ge.comono),
                d.exponents[i]
            );
        }
        s.push_str("end\n");
        s
    }
}

impl fmt::Display for PathGroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.syllables)
    }
}

fn push_vertex(out: &mut Vec<Syllable>, v: usize, x: &Word) {
    if x.is_empty() {
        return;
    }
    if let Some(Syllable::Vertex(_, prev)) = out.last_mut() {
        *prev = prev.mul(x);
        if prev.is_empty() {
            out.pop();
        }
        return;
    }
    out.push(Syllable::Vertex(v, x.clone()));
}

fn invert_syllables(s: &[Syllable]) -> Vec<Syllable> {
    s.iter()
        .rev()
        .map(|x| match x {
            Syllable::Vertex(v, w) => Syllable::Vertex(*v, w.inverse()),
            Syllable::Stable(l) => Syllable::Stable(-l),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::rose_of;
    use crate::normalize::{good_representative, Options};
    use crate::word::{Basis, Endo};

    fn good(images: &[&str]) -> GraphMap {
        let b = Basis::standard(images.len());
        let ws: Vec<Word> = images.iter().map(|s| b.parse_word(s).unwrap()).collect();
        let (m, _) = rose_of(&Endo::new(b, ws).unwrap()).unwrap();
        good_representative(&m, Options::default()).unwrap().map
    }

    #[test]
    fn rose_twist() {
        let m = good(&["a", "b a"]);
        let (gg, d) = build_graph_of_groups(&m).unwrap();
        assert_eq!(
            gg.to_text(&d),
            "gog\nvertex v0 group g_a g_bab'\nedge b v0 v0 mono g_a comono g_bab' twist 1\nend\n"
        );
        assert!(gg.verify_twist(&d).is_ok());
        assert!(gg.relations_preserved(&d));
        let g = gg.map.graph();
        // σ(b a b') reduces to the vertex generator
        let bab = g.parse_path(None, "b a b'").unwrap();
        let r = gg.reduce(&gg.sigma(&bab).unwrap()).unwrap();
        assert_eq!(gg.format_word(&r), "g_bab'");
        let sq = g.parse_path(None, "b a a b'").unwrap();
        assert_eq!(gg.format_word(&gg.reduce(&gg.sigma(&sq).unwrap()).unwrap()), "g_bab' g_bab'");
        // D(t_b) = t_b g_a and D(t_b⁻¹) = g_a⁻¹ t_b⁻¹
        let tb = gg.sigma(&g.parse_path(None, "b").unwrap()).unwrap();
        assert_eq!(gg.format_word(&gg.twist_apply(&d, &tb).unwrap()), "t_b g_a");
        let tbi = gg.sigma(&g.parse_path(None, "b'").unwrap()).unwrap();
        assert_eq!(gg.format_word(&gg.twist_apply(&d, &tbi).unwrap()), "g_a' t_b'");
        let ga = gg.sigma(&g.parse_path(None, "a").unwrap()).unwrap();
        assert_eq!(gg.twist_apply(&d, &ga).unwrap(), ga);
    }

    #[test]
    fn identity_has_no_edges() {
        for n in 1..5 {
            let names: Vec<String> = Basis::standard(n).names().to_vec();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let (gg, d) = build_graph_of_groups(&good(&refs)).unwrap();
            assert!(gg.edges.is_empty() && d.is_identity());
            assert_eq!(gg.generators.len(), n);
            assert!(gg.verify_twist(&d).is_ok());
        }
    }

    #[test]
    fn fault_injection_is_caught() {
        let m = good(&["a", "b a", "c b a b'"]);
        let (gg, d) = build_graph_of_groups(&m).unwrap();
        assert!(gg.verify_twist(&d).is_ok());
        for i in 0..d.exponents.len() {
            let mut bad = d.clone();
            bad.exponents[i] += 1;
            let witness = gg.verify_twist(&bad).unwrap_err();
            assert_eq!(witness, gg.map.graph().edge(gg.edges[i].edge).name);
        }
    }

    #[test]
    fn negative_and_reversed_twists() {
        for (imgs, r) in [(&["a", "b a' a'"][..], -2), (&["a", "a b"], -1), (&["a", "a' b"], 1)] {
            let (gg, d) = build_graph_of_groups(&good(imgs)).unwrap();
            assert_eq!(d.exponents.len(), 1);
            assert!(gg.verify_twist(&d).is_ok());
            assert_eq!(d.exponents[0], r, "{imgs:?}");
        }
    }

    #[test]
    fn sigma_round_trip_and_inverse_twist() {
        let m = good(&["a", "b a", "c b a b'"]);
        let (gg, d) = build_graph_of_groups(&m).unwrap();
        let g = gg.map.graph();
        for e in 0..g.edge_count() {
            let p = EdgePath::from_letter(g, letter(e, false));
            assert_eq!(gg.sigma_inv(&gg.sigma(&p).unwrap()).unwrap(), p);
        }
        for gen in &gg.generators {
            let w = PathGroupWord { start: gen.vertex, end: gen.vertex, syllables: vec![Syllable::Vertex(gen.vertex, Word::generator(gg.generators.iter().position(|x| x == gen).unwrap()))] };
            let back = gg.reduce(&gg.sigma(&gg.sigma_inv(&w).unwrap()).unwrap()).unwrap();
            assert_eq!(back, w);
        }
        let p = g.parse_path(None, "c b a' c'").unwrap();
        let w = gg.sigma(&p).unwrap();
        let there = gg.twist_apply(&d, &w).unwrap();
        let back = gg.twist_apply(&d.inverse(), &there).unwrap();
        assert_eq!(back, gg.reduce(&w).unwrap());
    }

    #[test]
    fn separated_vertices() {
        use crate::graph::{Edge, Graph};
        // two rank-2 vertices joined by a twist edge
        let g = Graph::new(
            vec!["v".into(), "w".into()],
            vec![
                Edge { name: "a".into(), init: 0, term: 0 },
                Edge { name: "b".into(), init: 0, term: 0 },
                Edge { name: "c".into(), init: 1, term: 1 },
                Edge { name: "d".into(), init: 1, term: 1 },
                Edge { name: "e".into(), init: 0, term: 1 },
            ],
        )
        .unwrap();
        let m = GraphMap::new(g, vec![0, 1], vec![vec![1], vec![2], vec![3], vec![4], vec![5, 3, 4]]).unwrap();
        let out = good_representative(&m, Options::default()).unwrap();
        let (gg, d) = build_graph_of_groups(&out.map).unwrap();
        assert_eq!(gg.vertex_count(), 2);
        assert_eq!(gg.edges.len(), 1);
        assert!(gg.generators_at(0).len() >= 2 && gg.generators_at(1).len() >= 2);
        assert!(gg.verify_twist(&d).is_ok());
    }

    #[test]
    fn malformed_words_rejected() {
        let (gg, _) = build_graph_of_groups(&good(&["a", "b a"])).unwrap();
        let w = PathGroupWord { start: 0, end: 0, syllables: vec![Syllable::Stable(5)] };
        assert!(matches!(gg.reduce(&w), Err(Error::MalformedIncidence(_))));
        let open = PathGroupWord { start: 0, end: 1, syllables: vec![] };
        assert!(gg.twist_apply(&DehnTwist { exponents: vec![1] }, &open).is_err());
    }
}
