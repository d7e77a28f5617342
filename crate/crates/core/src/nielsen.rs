//! Indivisible Nielsen paths, the Nielsen graph Σ and rank computations.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{EdgePath, GraphMap, Marking, StratumKind};
use crate::stallings::subgroup_rank;
use crate::word::{letter_index, root_letters, shortlex, invert_letters, Letter, Word};

/// Default search bound for the Nielsen path search.
pub const DEFAULT_BOUND: usize = 64;

/// Paths examined per unit of bound before a search gives up.
const CANDIDATES_PER_STEP: usize = 2000;

/// Extra breadth-first levels scanned for an `E β` certificate once an
/// `E β Ē` certificate has turned up.
const SLACK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InpShape {
    FixedLoop,
    EBeta,
    EBetaEbar,
}

impl fmt::Display for InpShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InpShape::FixedLoop => "fixed-loop",
            InpShape::EBeta => "e-beta",
            InpShape::EBetaEbar => "e-beta-ebar",
        })
    }
}

/// Data for an `E β Ē` path: `f(E γ) = E γ ρ^k` with `ρ` an indivisible
/// Nielsen loop at the fixed vertex `x` ending `γ`; `β = [γ ρ γ̄]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TwistData {
    pub gamma: EdgePath,
    pub rho: EdgePath,
    pub exponent: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Inp {
    /// Stratum index (0-based).
    pub height: usize,
    /// Oriented level edge `E` with `f(E) = E u`.
    pub edge: Letter,
    pub shape: InpShape,
    pub path: EdgePath,
    pub beta: EdgePath,
    pub twist: Option<TwistData>,
}

/// Oriented form `f(E) = E u` of a single-edge level stratum, if any.
pub fn oriented_level_edge(m: &GraphMap, e: usize) -> Option<(Letter, EdgePath)> {
    let img = m.image(e);
    let pos: Vec<usize> = img.letters().iter().enumerate().filter(|(_, &l)| letter_index(l) == e).map(|(i, _)| i).collect();
    if pos.len() != 1 {
        return None;
    }
    let l = img.letters()[pos[0]];
    if l < 0 {
        return None;
    }
    let e_pos = l;
    if pos[0] == 0 {
        let rest = img.letters()[1..].to_vec();
        let g = m.graph();
        let start = g.terminus(e_pos);
        return Some((e_pos, path_from(m, start, rest)));
    }
    if pos[0] + 1 == img.len() {
        let u = invert_letters(&img.letters()[..pos[0]]);
        let g = m.graph();
        let start = g.terminus(-e_pos);
        return Some((-e_pos, path_from(m, start, u)));
    }
    None
}

fn path_from(m: &GraphMap, start: usize, letters: Vec<Letter>) -> EdgePath {
    EdgePath::new(m.graph(), start, letters).expect("image subpath is composable")
}

/// A closed path's root as a based loop, canonically oriented, and the
/// exponent with `δ = ρ^k`.
fn based_root(m: &GraphMap, delta: &EdgePath) -> (EdgePath, i64) {
    let (root, k) = root_letters(delta.letters());
    let inv = invert_letters(&root);
    let (root, sign) = if shortlex(&inv, &root).is_lt() { (inv, -1) } else { (root, 1) };
    (path_from(m, delta.start(), root), sign * k as i64)
}

fn is_nielsen(m: &GraphMap, p: &EdgePath) -> bool {
    m.is_fixed_vertex(p.start()) && m.is_fixed_vertex(p.end()) && m.apply_path(p) == *p
}

/// Searches for the indivisible Nielsen path of height `r`.
pub fn find_inp(m: &GraphMap, r: usize, bound: usize) -> Result<Option<Inp>> {
    let stratum = &m.strata()[r];
    match stratum.kind {
        StratumKind::Zero => return Ok(None),
        StratumKind::Exponential => {
            return Err(Error::PreconditionFailed("Nielsen path search in an exponential stratum".into()))
        }
        StratumKind::Level => {}
    }
    // a permuted cycle of edges cannot carry a Nielsen path
    if stratum.edges.len() != 1 {
        return Ok(None);
    }
    let e = stratum.edges[0];
    let g = m.graph();
    let Some((edge, u)) = oriented_level_edge(m, e) else {
        let img = m.image(e);
        let positive_inside = img
            .letters()
            .iter()
            .enumerate()
            .any(|(i, &l)| l > 0 && letter_index(l) == e && i > 0 && i + 1 < img.len());
        if positive_inside {
            return Err(Error::PreconditionFailed(format!(
                "edge `{}` has an interior fixed point; subdivide first",
                g.edge(e).name
            )));
        }
        return Ok(None);
    };
    let e_path = EdgePath::from_letter(g, edge);
    if u.is_empty() {
        let shape = if g.is_loop(e) { InpShape::FixedLoop } else { InpShape::EBeta };
        let path = if edge > 0 { e_path } else { e_path.inverse() };
        let beta = EdgePath::trivial(path.end());
        return Ok(Some(Inp { height: r, edge: path.letters()[0], shape, path, beta, twist: None }));
    }
    search_level(m, r, edge, &u, bound)
}

/// Iterates `[u f(u) … f^{k-1}(u)]` whose prefixes are tried as `γ`.
const ITERATES: usize = 8;

/// Longest iterate worth scanning.
const ITERATE_LEN: usize = 4096;

struct Node {
    gamma: EdgePath,
    image: EdgePath,
}

#[derive(Default)]
struct Found {
    betas: Vec<EdgePath>,
    twisted: Option<TwistData>,
}

impl Found {
    fn offer(&mut self, m: &GraphMap, u: &EdgePath, node: &Node) {
        if !m.is_fixed_vertex(node.gamma.end()) {
            return;
        }
        let delta = node.gamma.inverse().then(u).then(&node.image);
        if delta.is_empty() {
            if !self.betas.contains(&node.gamma) {
                self.betas.push(node.gamma.clone());
            }
            return;
        }
        let shorter = self.twisted.as_ref().is_none_or(|t| node.gamma.len() < t.gamma.len());
        if shorter {
            let (rho, k) = based_root(m, &delta);
            if m.apply_path(&rho) == rho {
                self.twisted = Some(TwistData { gamma: node.gamma.clone(), rho, exponent: k });
            }
        }
    }
}

/// Offers every prefix of the iterates of `u` under `γ ↦ [u f(γ)]`.
fn scan_iterates(m: &GraphMap, u: &EdgePath, found: &mut Found) {
    let g = m.graph();
    let mut p = u.clone();
    for _ in 0..ITERATES {
        if p.len() > ITERATE_LEN {
            break;
        }
        let mut node = Node { gamma: EdgePath::trivial(p.start()), image: EdgePath::trivial(m.vertex_image(p.start())) };
        found.offer(m, u, &node);
        for &l in p.letters() {
            node.gamma = node.gamma.then(&EdgePath::from_letter(g, l));
            node.image = node.image.then(&m.image_of(l));
            found.offer(m, u, &node);
        }
        let next = u.then(&m.apply_path(&p));
        if next == p {
            break;
        }
        p = next;
    }
}

fn search_level(m: &GraphMap, r: usize, edge: Letter, u: &EdgePath, bound: usize) -> Result<Option<Inp>> {
    let g = m.graph();
    let lower = m.lower_mask(r);
    let w = g.terminus(edge);
    let cap = bound.saturating_mul(CANDIDATES_PER_STEP).max(1);
    let mut found = Found::default();
    scan_iterates(m, u, &mut found);
    let mut twisted_depth = found.twisted.as_ref().map(|_| 0);
    let mut level = vec![Node { gamma: EdgePath::trivial(w), image: EdgePath::trivial(m.vertex_image(w)) }];
    let mut examined = 0usize;
    let mut exhaustive = false;
    for depth in 0..=bound {
        for node in &level {
            found.offer(m, u, node);
        }
        if found.twisted.is_some() && twisted_depth.is_none() {
            twisted_depth = Some(depth);
        }
        if !found.betas.is_empty() || twisted_depth.is_some_and(|d| depth >= d + SLACK) || depth == bound {
            break;
        }
        let mut next = Vec::new();
        for node in &level {
            let last = node.gamma.letters().last().copied();
            for l in g.letters_at(node.gamma.end()) {
                if !lower[letter_index(l)] || Some(-l) == last {
                    continue;
                }
                let step = EdgePath::from_letter(g, l);
                next.push(Node { gamma: node.gamma.then(&step), image: node.image.then(&m.image_of(l)) });
            }
        }
        examined += next.len();
        if next.is_empty() {
            // every tight path in the lower graph has been examined
            exhaustive = true;
            break;
        }
        if examined > cap {
            break;
        }
        level = next;
    }
    if !found.betas.is_empty() {
        found.betas.sort_by(|a, b| shortlex(a.letters(), b.letters()));
        let first = &found.betas[0];
        for other in &found.betas[1..] {
            let sigma = first.inverse().then(other);
            if !is_nielsen(m, &sigma) {
                return Err(Error::DuplicateInp { height: r + 1 });
            }
        }
        let path = EdgePath::from_letter(g, edge).then(first);
        return Ok(Some(Inp { height: r, edge, shape: InpShape::EBeta, path, beta: first.clone(), twist: None }));
    }
    match found.twisted {
        Some(t) => Ok(Some(twisted_inp(m, r, edge, t))),
        None if exhaustive => Ok(None),
        None => Err(Error::BoundExhausted { height: r + 1, bound }),
    }
}

fn twisted_inp(m: &GraphMap, r: usize, edge: Letter, t: TwistData) -> Inp {
    let g = m.graph();
    let beta = t.gamma.then(&t.rho).then(&t.gamma.inverse());
    let e = EdgePath::from_letter(g, edge);
    let path = e.then(&beta).then(&e.inverse());
    Inp { height: r, edge, shape: InpShape::EBetaEbar, path, beta, twist: Some(t) }
}

/// The graph Σ: fixed vertices joined by one edge per indivisible Nielsen path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NielsenGraph {
    pub vertices: Vec<usize>,
    pub inps: Vec<Inp>,
}

impl NielsenGraph {
    /// Components of Σ restricted to INPs of height below `k`, as
    /// `(vertices, inp indices)`, each keyed by its least vertex.
    pub fn components_below(&self, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let idx = |v: usize| self.vertices.iter().position(|&x| x == v).expect("fixed vertex");
        let mut uf = crate::graph::UnionFind::new(self.vertices.len());
        for inp in self.inps.iter().filter(|i| i.height < k) {
            uf.union(idx(inp.path.start()), idx(inp.path.end()));
        }
        let mut comps: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
        for (i, &v) in self.vertices.iter().enumerate() {
            let r = uf.find(i);
            match comps.iter_mut().find(|c| c.0 == r) {
                Some(c) => c.1.push(v),
                None => comps.push((r, vec![v], Vec::new())),
            }
        }
        for (j, inp) in self.inps.iter().enumerate().filter(|(_, i)| i.height < k) {
            let r = uf.find(idx(inp.path.start()));
            comps.iter_mut().find(|c| c.0 == r).expect("component").2.push(j);
        }
        comps.into_iter().map(|(_, vs, es)| (vs, es)).collect()
    }

    pub fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.components_below(usize::MAX)
    }

    /// Rank of the component Σ^v.
    pub fn rank_at(&self, v: usize) -> Option<usize> {
        self.components()
            .into_iter()
            .find(|(vs, _)| vs.contains(&v))
            .map(|(vs, es)| (es.len() + 1).saturating_sub(vs.len()))
    }

    /// Reduced rank of Σ_k.
    pub fn reduced_rank_below(&self, k: usize) -> usize {
        1 + self
            .components_below(k)
            .iter()
            .map(|(vs, es)| (es.len() + 1).saturating_sub(vs.len()).saturating_sub(1))
            .sum::<usize>()
    }

    pub fn inp_at_height(&self, r: usize) -> Option<&Inp> {
        self.inps.iter().find(|i| i.height == r)
    }
}

/// Searches every height and assembles Σ.
pub fn build_sigma(m: &GraphMap, bound: usize) -> Result<NielsenGraph> {
    let vertices: Vec<usize> = (0..m.graph().vertex_count()).filter(|&v| m.is_fixed_vertex(v)).collect();
    let mut inps = Vec::new();
    for r in 0..m.strata().len() {
        if let Some(inp) = find_inp(m, r, bound)? {
            debug_assert!(is_nielsen(m, &inp.path));
            inps.push(inp);
        }
    }
    Ok(NielsenGraph { vertices, inps })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankReport {
    /// `(least vertex, rank)` for each component of Σ.
    pub components: Vec<(usize, usize)>,
    /// `r̃(Σ_k)` for `k = 1..=strata`.
    pub sigma_reduced: Vec<usize>,
    /// `r̃(G_k)` for `k = 1..=strata`.
    pub graph_reduced: Vec<usize>,
    pub rank: usize,
    pub s: usize,
    pub n: usize,
    pub maximal: bool,
}

pub fn rank_report(sg: &NielsenGraph, m: &GraphMap) -> RankReport {
    let components: Vec<(usize, usize)> = sg
        .components()
        .into_iter()
        .map(|(vs, es)| (vs[0], (es.len() + 1).saturating_sub(vs.len())))
        .collect();
    let k = m.strata().len();
    let sigma_reduced = (1..=k).map(|i| sg.reduced_rank_below(i)).collect();
    let graph_reduced = (1..=k).map(|i| m.graph().reduced_rank(&m.lower_mask(i))).collect();
    let rank = 1 + components.iter().map(|&(_, r)| r.saturating_sub(1)).sum::<usize>();
    let rank = if components.is_empty() { 0 } else { rank };
    let n = m.graph().rank();
    let mut s = components.iter().filter(|&&(_, r)| r >= 2).count();
    // a circle fixed pointwise counts as the one vertex of its representative
    if n == 1 && s == 0 && components.iter().any(|&(_, r)| r == 1) {
        s = 1;
    }
    RankReport { components, sigma_reduced, graph_reduced, rank, s, n, maximal: rank == n }
}

/// Closed paths at `v` in Σ^v, one per edge outside a spanning tree, mapped
/// into the graph by `p`.
pub fn fixed_subgroup_loops(sg: &NielsenGraph, v: usize) -> Result<Vec<EdgePath>> {
    let (vs, es) = sg
        .components()
        .into_iter()
        .find(|(vs, _)| vs.contains(&v))
        .ok_or_else(|| Error::VertexAbsent(v.to_string()))?;
    let mut to: Vec<Option<EdgePath>> = vec![None; vs.len()];
    let pos = |x: usize| vs.iter().position(|&y| y == x).expect("vertex in component");
    to[pos(v)] = Some(EdgePath::trivial(v));
    let mut tree = vec![false; es.len()];
    let mut queue = VecDeque::from([v]);
    while let Some(x) = queue.pop_front() {
        let here = to[pos(x)].clone().expect("visited");
        for (j, &i) in es.iter().enumerate() {
            let p = &sg.inps[i].path;
            let (step, y) = if p.start() == x {
                (p.clone(), p.end())
            } else if p.end() == x {
                (p.inverse(), p.start())
            } else {
                continue;
            };
            if to[pos(y)].is_none() {
                to[pos(y)] = Some(here.then(&step));
                tree[j] = true;
                queue.push_back(y);
            }
        }
    }
    Ok(es
        .iter()
        .enumerate()
        .filter(|(j, _)| !tree[*j])
        .map(|(_, &i)| {
            let p = &sg.inps[i].path;
            let a = to[pos(p.start())].clone().expect("reached");
            let b = to[pos(p.end())].clone().expect("reached");
            a.then(p).then(&b.inverse())
        })
        .collect())
}

/// Generators of `Fix` of the automorphism induced at `v`, as words in the
/// marking basis. The marking must be based at `v`.
pub fn fixed_subgroup_generators(sg: &NielsenGraph, v: usize, marking: &Marking) -> Result<Vec<Word>> {
    if marking.base() != v {
        return Err(Error::PreconditionFailed("marking is not based at the requested vertex".into()));
    }
    let loops = fixed_subgroup_loops(sg, v)?;
    let words: Vec<Word> = loops.iter().map(|p| marking.word_of(p)).collect::<Result<_>>()?;
    debug_assert_eq!(subgroup_rank(&words), words.len());
    Ok(words)
}

/// Full analysis: filtration, Nielsen graph and ranks.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub map: GraphMap,
    pub sigma: NielsenGraph,
    pub report: RankReport,
}

pub fn analyze_map(m: &GraphMap, bound: usize) -> Result<Analysis> {
    let sigma = build_sigma(m, bound)?;
    let report = rank_report(&sigma, m);
    Ok(Analysis { map: m.clone(), sigma, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{induced_automorphism, rose_of};
    use crate::stallings::subgroup_contains;
    use crate::word::{Basis, Endo};

    fn rose(images: &[&str]) -> (GraphMap, Marking) {
        let b = Basis::standard(images.len());
        let ws: Vec<Word> = images.iter().map(|s| b.parse_word(s).unwrap()).collect();
        let (m, mk) = rose_of(&Endo::new(b, ws).unwrap()).unwrap();
        (m.compute_filtration().subdivide_at_fixed_points().0, mk)
    }

    #[test]
    fn rose_twist_inp() {
        let (m, mk) = rose(&["a", "b a"]);
        let a = find_inp(&m, 0, DEFAULT_BOUND).unwrap().unwrap();
        assert_eq!(a.shape, InpShape::FixedLoop);
        let b = find_inp(&m, 1, DEFAULT_BOUND).unwrap().unwrap();
        assert_eq!(b.shape, InpShape::EBetaEbar);
        assert_eq!(m.graph().format_path(&b.path), "b a b'");
        assert_eq!(m.graph().format_path(&b.beta), "a");
        assert_eq!(b.twist.as_ref().unwrap().exponent, 1);
        let sg = build_sigma(&m, DEFAULT_BOUND).unwrap();
        assert_eq!(sg.vertices, vec![0]);
        assert_eq!(sg.inps.len(), 2);
        let rep = rank_report(&sg, &m);
        assert_eq!((rep.rank, rep.s, rep.maximal), (2, 1, true));
        assert_eq!(rep.sigma_reduced, rep.graph_reduced);
        let gens = fixed_subgroup_generators(&sg, 0, &mk).unwrap();
        let b2 = Basis::standard(2);
        let shown: Vec<String> = gens.iter().map(|w| b2.format_word(w)).collect();
        assert_eq!(shown, vec!["a", "b a b'"]);
    }

    #[test]
    fn identity_is_its_own_sigma() {
        for n in 1..4 {
            let imgs: Vec<String> = Basis::standard(n).names().to_vec();
            let refs: Vec<&str> = imgs.iter().map(String::as_str).collect();
            let (m, mk) = rose(&refs);
            let sg = build_sigma(&m, DEFAULT_BOUND).unwrap();
            assert!(sg.inps.iter().all(|i| i.shape == InpShape::FixedLoop));
            let rep = rank_report(&sg, &m);
            assert_eq!((rep.rank, rep.maximal), (n, true));
            assert_eq!(fixed_subgroup_generators(&sg, 0, &mk).unwrap().len(), n);
        }
    }

    #[test]
    fn negative_twist_exponent() {
        let (m, _) = rose(&["a", "b a' a'"]);
        let b = find_inp(&m, 1, DEFAULT_BOUND).unwrap().unwrap();
        assert_eq!(m.graph().format_path(&b.path), "b a b'");
        assert_eq!(b.twist.unwrap().exponent, -2);
    }

    #[test]
    fn left_multiplication_reverses_edge() {
        // f(b) = a b: the twist runs along b' instead
        let (m, _) = rose(&["a", "a b"]);
        let b = find_inp(&m, 1, DEFAULT_BOUND).unwrap().unwrap();
        assert_eq!(b.edge, -2);
        assert_eq!(m.graph().format_path(&b.path), "b' a b");
    }

    #[test]
    fn subdivided_edge_prefers_open_path() {
        let (m, _) = rose(&["a", "a b a'"]);
        assert_eq!(m.graph().vertex_count(), 2);
        let sg = build_sigma(&m, DEFAULT_BOUND).unwrap();
        let shapes: Vec<InpShape> = sg.inps.iter().map(|i| i.shape).collect();
        assert_eq!(shapes, vec![InpShape::FixedLoop, InpShape::EBetaEbar, InpShape::EBeta]);
        let top = &sg.inps[2];
        assert_eq!(m.graph().format_path(&top.path), "b#2 b#1");
        let rep = rank_report(&sg, &m);
        assert_eq!(rep.rank, 2);
        assert!(rep.maximal);
    }

    #[test]
    fn zero_stratum_has_no_inp() {
        use crate::graph::{Edge, Graph};
        let g = Graph::new(
            vec!["v".into(), "w".into()],
            vec![
                Edge { name: "a".into(), init: 0, term: 0 },
                Edge { name: "e".into(), init: 0, term: 1 },
                Edge { name: "f".into(), init: 0, term: 1 },
            ],
        )
        .unwrap();
        let z = GraphMap::new(g, vec![0, 0], vec![vec![1], vec![1], vec![]]).unwrap().compute_filtration();
        assert!(find_inp(&z, 1, DEFAULT_BOUND).unwrap().is_none());
    }

    #[test]
    fn no_fixed_vertex_gives_empty_sigma() {
        use crate::graph::{Edge, Graph};
        let g = Graph::new(
            vec!["v".into(), "w".into()],
            vec![Edge { name: "x".into(), init: 0, term: 1 }, Edge { name: "y".into(), init: 1, term: 0 }],
        )
        .unwrap();
        let m = GraphMap::new(g, vec![1, 0], vec![vec![2], vec![1]]).unwrap().compute_filtration();
        let sg = build_sigma(&m, DEFAULT_BOUND).unwrap();
        assert!(sg.vertices.is_empty() && sg.inps.is_empty());
        assert_eq!(rank_report(&sg, &m).rank, 0);
    }

    #[test]
    fn generators_are_fixed_and_complete() {
        for imgs in [&["a", "b a", "c a"][..], &["a", "b a", "c b a b'"], &["a", "a b", "c"]] {
            let (m, mk) = rose(imgs);
            let aut = induced_automorphism(&m, &mk, None).unwrap();
            let sg = build_sigma(&m, DEFAULT_BOUND).unwrap();
            let gens = fixed_subgroup_generators(&sg, 0, &mk).unwrap();
            for g in &gens {
                assert_eq!(aut.apply(g).unwrap(), *g);
            }
            assert_eq!(subgroup_rank(&gens), sg.rank_at(0).unwrap());
            // spot-check: short fixed words are members
            let b = mk.basis();
            for w in ["a", "b a b'", "a b a' b'"] {
                let w = b.parse_word(w).unwrap();
                if aut.apply(&w).unwrap() == w {
                    assert!(subgroup_contains(&gens, &w));
                }
            }
        }
    }

    #[test]
    fn bound_exhaustion_is_reported() {
        // f(b) = b c with c a nonfixed loop: no certificate and infinite search space
        let (m, _) = rose(&["a", "b c", "c a"]);
        match find_inp(&m, 2, 2) {
            Err(e @ Error::BoundExhausted { .. }) => assert_eq!(e.exit_code(), 2),
            other => panic!("{other:?}"),
        }
    }
}
