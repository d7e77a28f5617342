//! Normalization of maximal rank representatives into good representatives:
//! every vertex fixed with a fixed subgroup of rank at least two, and every
//! edge mapping as `E ↦ E β^k` for a closed Nielsen path `β` below `E`.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{
    homotopy_commutes, homotopy_commutes_with_tracks, rose_of, EdgePath, Graph, GraphMap, GraphMorphism, Marking,
    UnionFind,
};
use crate::nielsen::{analyze_map, oriented_level_edge, Analysis, InpShape, NielsenGraph, DEFAULT_BOUND};
use crate::stallings::subgroup_rank;
use crate::word::{conjugator_letters, letter, letter_index, root_letters, Endo, Letter, Word};

/// Default number of moves the pipeline may apply.
pub const DEFAULT_BUDGET: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    pub bound: usize,
    pub budget: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { bound: DEFAULT_BOUND, budget: DEFAULT_BUDGET }
    }
}

/// One step of the pipeline, named by edges of the graph it acted on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    RemoveIsolated { vertices: Vec<String> },
    CollapseFixed { edges: Vec<String> },
    Slide { edge: String, path: String },
    CollapseLeaf { edge: String, vertex: String },
    Untwist { edge: String },
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::RemoveIsolated { vertices } => write!(f, "remove-isolated {}", vertices.join(" ")),
            Move::CollapseFixed { edges } => write!(f, "collapse-fixed {}", edges.join(" ")),
            Move::Slide { edge, path } => write!(f, "slide {edge} along {path}"),
            Move::CollapseLeaf { edge, vertex } => write!(f, "collapse-leaf {edge} at {vertex}"),
            Move::Untwist { edge } => write!(f, "untwist {edge}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub map: GraphMap,
    pub moves: Vec<Move>,
    pub analysis: Analysis,
}

/// Tightens, validates and filters an input map, then subdivides at
/// interior fixed points.
pub fn prepare(m: &GraphMap) -> Result<GraphMap> {
    let t = m.tighten()?;
    t.validate_homotopy_equivalence()?;
    let g = t.graph();
    if let Some(v) = (0..g.vertex_count()).find(|&v| g.valence(v) <= 1) {
        return Err(Error::InvalidGraph(format!("vertex `{}` has valence {}", g.vertex_name(v), g.valence(v))));
    }
    let f = t.compute_filtration();
    f.reject_exponential()?;
    Ok(f.subdivide_at_fixed_points().0)
}

/// Prepares and analyzes a map.
pub fn analyze(m: &GraphMap, bound: usize) -> Result<Analysis> {
    analyze_map(&prepare(m)?, bound)
}

/// Independent check of the three defining properties of a good
/// representative.
pub fn check_good(m: &GraphMap) -> Result<()> {
    let bad = |msg: String| Err(Error::NotGoodRepresentative(msg));
    let g = m.graph();
    if let Some(v) = (0..g.vertex_count()).find(|&v| !m.is_fixed_vertex(v)) {
        return bad(format!("vertex `{}` is not fixed", g.vertex_name(v)));
    }
    let f = m.compute_filtration();
    let heights = f.heights();
    // Nielsen loops certified at each vertex
    let mut loops: Vec<Vec<EdgePath>> = vec![Vec::new(); g.vertex_count()];
    for e in 0..g.edge_count() {
        let name = &g.edge(e).name;
        let img = m.image(e);
        if img.letters() == [letter(e, false)] {
            if g.is_loop(e) {
                loops[g.edge(e).init].push(img.clone());
            }
            continue;
        }
        let mut certified = false;
        for l in [letter(e, false), letter(e, true)] {
            let img = m.image_of(l);
            if img.letters().first() != Some(&l) || img.len() < 2 {
                continue;
            }
            let w = &img.letters()[1..];
            if w.iter().any(|&x| letter_index(x) == e) {
                continue;
            }
            let (root, _) = root_letters(w);
            let Ok(beta) = EdgePath::new(g, g.terminus(l), root) else { continue };
            if !beta.is_closed() || !beta.is_tight() {
                continue;
            }
            if beta.letters().iter().any(|&x| heights[letter_index(x)] >= heights[e]) {
                continue;
            }
            if m.apply_path(&beta) != beta {
                continue;
            }
            let e_path = EdgePath::from_letter(g, l);
            loops[g.origin(l)].push(e_path.then(&beta).then(&e_path.inverse()));
            certified = true;
            break;
        }
        if !certified {
            return bad(format!("edge `{name}` does not map as E β^k"));
        }
    }
    for (v, ls) in loops.iter().enumerate() {
        for p in ls {
            if m.apply_path(p) != *p {
                return bad(format!("loop {} at `{}` is not a Nielsen path", g.format_path(p), g.vertex_name(v)));
            }
        }
        let mk = Marking::new(g, v)?;
        let words: Vec<Word> = ls.iter().map(|p| mk.word_of(p)).collect::<Result<_>>()?;
        let r = subgroup_rank(&words);
        if r < 2 {
            return bad(format!("fixed subgroup at `{}` has rank {r}", g.vertex_name(v)));
        }
    }
    Ok(())
}

/// Breadth-first search for `η` inside `mask`, starting at the base of the
/// closed path `alpha`, such that `[η̄ α η]` is a Nielsen loop at a vertex
/// whose Nielsen component has rank at least two.
fn conjugate_search(m: &GraphMap, alpha: &EdgePath, mask: &[bool], sigma: &NielsenGraph, bound: usize) -> Option<EdgePath> {
    let g = m.graph();
    let cap = bound.saturating_mul(2000).max(1);
    let mut queue = VecDeque::from([EdgePath::trivial(alpha.start())]);
    let mut examined = 0usize;
    while let Some(eta) = queue.pop_front() {
        let y = eta.end();
        if m.is_fixed_vertex(y) && sigma.rank_at(y).unwrap_or(0) >= 2 {
            let c = eta.inverse().then(alpha).then(&eta);
            if m.apply_path(&c) == c {
                return Some(eta);
            }
        }
        if eta.len() >= bound {
            continue;
        }
        let last = eta.letters().last().copied();
        for l in g.letters_at(y) {
            if mask[letter_index(l)] && Some(-l) != last {
                examined += 1;
                if examined > cap {
                    return None;
                }
                queue.push_back(eta.then(&EdgePath::from_letter(g, l)));
            }
        }
    }
    None
}

/// Finds `η` with `[η̄ α η]` a closed Nielsen path at a vertex with fixed
/// subgroup of rank at least two. `m` must carry a filtration.
pub fn find_nielsen_conjugate(m: &GraphMap, alpha: &EdgePath, bound: usize) -> Result<EdgePath> {
    if !alpha.is_closed() || alpha.is_empty() {
        return Err(Error::PreconditionFailed("path is not a nontrivial closed path".into()));
    }
    let alpha = alpha.tighten();
    let image = m.apply_path(&alpha);
    if conjugator_letters(alpha.letters(), image.letters()).is_none() {
        return Err(Error::PreconditionFailed("free homotopy class is not invariant".into()));
    }
    let an = analyze_map(m, bound)?;
    let mask = vec![true; m.graph().edge_count()];
    conjugate_search(m, &alpha, &mask, &an.sigma, bound).ok_or(Error::BoundExhausted { height: 0, bound })
}

fn stuck(msg: &str) -> Error {
    Error::NormalizationStuck(msg.to_string())
}

fn names(g: &Graph, edges: &[usize]) -> Vec<String> {
    edges.iter().map(|&e| g.edge(e).name.clone()).collect()
}

fn checked_slide(m: &GraphMap, edge: Letter, alpha: &EdgePath) -> Result<(GraphMap, Move)> {
    let (next, p) = m.slide(edge, alpha)?;
    if homotopy_commutes(m, &next, &p).is_err() {
        return Err(stuck("slide failed its commuting check"));
    }
    let g = m.graph();
    let mv = Move::Slide { edge: g.format_letters(&[edge]), path: g.format_path(alpha) };
    Ok((next, mv))
}

fn checked_collapse(m: &GraphMap, forest: &[usize]) -> Result<GraphMap> {
    let (next, p, tracks) = m.collapse_forest(forest)?;
    if homotopy_commutes_with_tracks(m, &next, &p, &tracks).is_err() {
        return Err(stuck("collapse failed its commuting check"));
    }
    Ok(next)
}

/// Fixed non-loop edges forming a forest, greedily by edge index.
fn fixed_forest(m: &GraphMap) -> Vec<usize> {
    let g = m.graph();
    let mut uf = UnionFind::new(g.vertex_count());
    (0..g.edge_count())
        .filter(|&e| {
            let ed = g.edge(e);
            !g.is_loop(e) && m.image(e).letters() == [letter(e, false)] && uf.union(ed.init, ed.term)
        })
        .collect()
}

/// Moves that never hurt: drop isolated vertices, collapse fixed forests.
fn cleanup_move(m: &GraphMap) -> Result<Option<(GraphMap, Move)>> {
    let g = m.graph();
    if let Some(next) = m.remove_isolated_vertices() {
        let gone: Vec<String> = g
            .vertices()
            .iter()
            .filter(|v| next.graph().vertex_index(v).is_none())
            .cloned()
            .collect();
        return Ok(Some((next, Move::RemoveIsolated { vertices: gone })));
    }
    let forest = fixed_forest(m);
    if !forest.is_empty() {
        let (next, p) = m.collapse_invariant_forest(&forest)?;
        if homotopy_commutes(m, &next, &p).is_err() {
            return Err(stuck("fixed forest collapse failed its commuting check"));
        }
        return Ok(Some((next, Move::CollapseFixed { edges: names(g, &forest) })));
    }
    Ok(None)
}

/// Is the oriented edge separating, with the far side a single vertex
/// carrying one loop which equals `rho` up to orientation?
fn untwistable(m: &GraphMap, edge: Letter, rho: &EdgePath) -> bool {
    let g = m.graph();
    let e = letter_index(edge);
    let w = g.terminus(edge);
    if g.is_loop(e) {
        return false;
    }
    let mut mask = vec![true; g.edge_count()];
    mask[e] = false;
    let comps = g.components_of(&mask);
    let Some((vs, es)) = comps.iter().find(|(vs, _)| vs.contains(&w)) else { return false };
    if vs.contains(&g.origin(edge)) || vs.len() != 1 || es.len() != 1 || !g.is_loop(es[0]) {
        return false;
    }
    let c = letter(es[0], false);
    rho.letters() == [c] || rho.letters() == [-c]
}

fn structural_move(m: &GraphMap, an: &Analysis, bound: usize) -> Result<Option<(GraphMap, Move)>> {
    let g = m.graph();
    let sigma = &an.sigma;
    let mut inps: Vec<_> = sigma.inps.iter().collect();
    inps.sort_by_key(|i| std::cmp::Reverse(i.height));
    // open Nielsen paths E γ: slide E along γ so that E becomes fixed
    for inp in &inps {
        if inp.shape == InpShape::EBeta && !inp.beta.is_empty() {
            return checked_slide(m, inp.edge, &inp.beta).map(Some);
        }
    }
    // leaves
    if let Some(v) = (0..g.vertex_count()).find(|&v| g.valence(v) == 1) {
        let e = (0..g.edge_count()).find(|&e| g.edge(e).init == v || g.edge(e).term == v).expect("incident edge");
        let next = checked_collapse(m, &[e])?;
        return Ok(Some((next, Move::CollapseLeaf { edge: g.edge(e).name.clone(), vertex: g.vertex_name(v).to_string() })));
    }
    // twisted edges, top-down
    for inp in &inps {
        let Some(t) = &inp.twist else { continue };
        let w = g.terminus(inp.edge);
        let x = t.gamma.end();
        let rank_w = sigma.rank_at(w).unwrap_or(0);
        if t.gamma.is_empty() && rank_w >= 2 {
            continue;
        }
        if !t.gamma.is_empty() && sigma.rank_at(x).unwrap_or(0) >= 2 {
            return checked_slide(m, inp.edge, &t.gamma).map(Some);
        }
        let lower = m.lower_mask(inp.height);
        if let Some(eta) = conjugate_search(m, &t.rho, &lower, sigma, bound) {
            let alpha = t.gamma.then(&eta);
            if !alpha.is_empty() {
                return checked_slide(m, inp.edge, &alpha).map(Some);
            }
        }
        if t.gamma.is_empty() && untwistable(m, inp.edge, &t.rho) {
            let e = letter_index(inp.edge);
            let fixed = EdgePath::from_letter(g, letter(e, false));
            let next = m.with_image(e, fixed);
            let mut tracks: Vec<EdgePath> = (0..g.vertex_count()).map(EdgePath::trivial).collect();
            tracks[w] = t.rho.pow(-t.exponent);
            if homotopy_commutes_with_tracks(m, &next, &GraphMorphism::identity(m), &tracks).is_err() {
                return Err(stuck("untwist failed its commuting check"));
            }
            return Ok(Some((next, Move::Untwist { edge: g.edge(e).name.clone() })));
        }
    }
    Ok(None)
}

/// Good, and no Nielsen path joins two distinct vertices.
fn is_settled(m: &GraphMap, an: &Analysis) -> bool {
    an.sigma.components().len() == m.graph().vertex_count() && check_good(m).is_ok()
}

fn settle(m: GraphMap) -> GraphMap {
    let f = if m.has_filtration() { m } else { m.compute_filtration() };
    f.subdivide_at_fixed_points().0
}

/// Runs the normalization pipeline on a maximal rank map.
pub fn good_representative(m: &GraphMap, opts: Options) -> Result<Normalized> {
    let mut cur = prepare(m)?;
    let mut an = analyze_map(&cur, opts.bound)?;
    let report = &an.report;
    if !report.maximal {
        return Err(Error::NotMaximalRank { rank: report.rank, n: report.n });
    }
    let mut moves = Vec::new();
    if report.n == 1 {
        return single_loop(&cur, opts.bound);
    }
    for _ in 0..opts.budget {
        let step = match cleanup_move(&cur)? {
            Some(s) => Some(s),
            None if is_settled(&cur, &an) => return Ok(Normalized { map: cur, moves, analysis: an }),
            None => structural_move(&cur, &an, opts.bound)?,
        };
        let Some((next, mv)) = step else {
            let why = check_good(&cur).err().map(|e| e.to_string()).unwrap_or_default();
            return Err(Error::NormalizationStuck(format!("no move applies; {why}")));
        };
        moves.push(mv);
        cur = settle(next);
        an = analyze_map(&cur, opts.bound)?;
        if !an.report.maximal {
            return Err(stuck("a move lost maximal rank"));
        }
    }
    Err(Error::NormalizationStuck(format!("move budget of {} exhausted", opts.budget)))
}

/// Rank one: the only good form is a single fixed loop.
fn single_loop(m: &GraphMap, bound: usize) -> Result<Normalized> {
    let mk = Marking::new(m.graph(), 0)?;
    let mu = mk.tree_path(m.vertex_image(0)).inverse();
    let aut = crate::graph::induced_automorphism(m, &mk, Some(&mu))?;
    if !aut.is_identity() {
        return Err(Error::PreconditionFailed("orientation-reversing rank-one map has no good representative".into()));
    }
    let g = Graph::rose(&[m.graph().edge(0).name.clone()])?;
    let map = GraphMap::new(g, vec![0], vec![vec![1]])?.compute_filtration();
    let analysis = analyze_map(&map, bound)?;
    Ok(Normalized { map, moves: Vec::new(), analysis })
}

/// The canonical rank-two form `a ↦ a`, `b ↦ b a^r`; returns the map and `r`.
pub fn rank2_canonical(aut: &Endo) -> Result<(GraphMap, i64)> {
    if aut.rank() != 2 {
        return Err(Error::PreconditionFailed("rank-two automorphism expected".into()));
    }
    let (rose, _) = rose_of(aut)?;
    let good = good_representative(&rose, Options::default())?.map;
    let g = good.graph();
    if g.vertex_count() != 1 || g.edge_count() != 2 {
        return Err(stuck("good representative of rank two is not a rose"));
    }
    let fixed: Vec<usize> = (0..2).filter(|&e| good.image(e).letters() == [letter(e, false)]).collect();
    let r = match fixed.as_slice() {
        [_, _] => 0,
        [fa] => {
            let eb = 1 - fa;
            let (edge, u) = oriented_level_edge(&good, eb).ok_or_else(|| stuck("twist edge has no level form"))?;
            if u.letters().iter().any(|&l| letter_index(l) != *fa) {
                return Err(stuck("twist edge is not a power of the fixed loop"));
            }
            // f(b') = b' a^k is f(b) = a^-k b, which is b a^-k up to conjugation
            let k: i64 = u.letters().iter().map(|&l| i64::from(l.signum())).sum();
            if edge > 0 {
                k
            } else {
                -k
            }
        }
        _ => return Err(stuck("no fixed loop in rank-two good representative")),
    };
    let g2 = Graph::rose(&["a".to_string(), "b".to_string()])?;
    let mut img_b = vec![2];
    img_b.extend(std::iter::repeat_n(if r < 0 { -1 } else { 1 }, r.unsigned_abs() as usize));
    let canon = GraphMap::new(g2, vec![0], vec![vec![1], img_b])?.compute_filtration();
    Ok((canon, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{induced_automorphism, Edge};
    use crate::word::Basis;

    fn rose(images: &[&str]) -> GraphMap {
        let b = Basis::standard(images.len());
        let ws: Vec<Word> = images.iter().map(|s| b.parse_word(s).unwrap()).collect();
        rose_of(&Endo::new(b, ws).unwrap()).unwrap().0
    }

    fn endo(images: &[&str]) -> Endo {
        let b = Basis::standard(images.len());
        Endo::new(b.clone(), images.iter().map(|s| b.parse_word(s).unwrap()).collect()).unwrap()
    }

    #[test]
    fn already_good_inputs() {
        for imgs in [&["a", "b a"][..], &["a", "b"], &["a", "b a", "c b a b'"]] {
            let m = prepare(&rose(imgs)).unwrap();
            assert!(check_good(&m).is_ok(), "{imgs:?}");
            let out = good_representative(&rose(imgs), Options::default()).unwrap();
            assert!(out.moves.is_empty());
            assert_eq!(out.map.graph().vertex_count(), out.analysis.report.s);
        }
    }

    #[test]
    fn conjugated_twist_normalizes() {
        let out = good_representative(&rose(&["a", "a' b a a"]), Options::default()).unwrap();
        assert!(check_good(&out.map).is_ok());
        assert_eq!(out.map.graph().vertex_count(), 1);
        assert!(!out.moves.is_empty());
    }

    #[test]
    fn rank2_examples() {
        assert_eq!(rank2_canonical(&endo(&["a", "b a"])).unwrap().1, 1);
        assert_eq!(rank2_canonical(&endo(&["a", "b"])).unwrap().1, 0);
        let (m, r) = rank2_canonical(&endo(&["a", "a' b a a"])).unwrap();
        assert_eq!(r, 1);
        assert_eq!(m.graph().format_path(m.image(1)), "b a");
        for r in -3i64..=3 {
            let mut img = "b".to_string();
            for _ in 0..r.abs() {
                img.push_str(if r < 0 { " a'" } else { " a" });
            }
            assert_eq!(rank2_canonical(&endo(&["a", &img])).unwrap().1, r);
        }
    }

    #[test]
    fn not_maximal_is_reported() {
        // the swap has trivial fixed subgroup
        let err = good_representative(&rose(&["b", "a"]), Options::default()).unwrap_err();
        assert!(matches!(err, Error::NotMaximalRank { rank: 1, n: 2 }), "{err:?}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn slide_along_open_path_then_collapse() {
        // theta-shaped map whose Nielsen paths are open: v --e--> w with loops
        let g = Graph::new(
            vec!["v".into(), "w".into()],
            vec![
                Edge { name: "a".into(), init: 0, term: 0 },
                Edge { name: "e".into(), init: 0, term: 1 },
                Edge { name: "b".into(), init: 1, term: 1 },
                Edge { name: "c".into(), init: 0, term: 1 },
            ],
        )
        .unwrap();
        // f(c) = c b: c is a twist edge into w; f(e) = a e: Nielsen path e' a e at w
        let m = GraphMap::new(g, vec![0, 1], vec![vec![1], vec![1, 2], vec![3], vec![4, 3]]).unwrap();
        let out = good_representative(&m, Options::default()).unwrap();
        assert!(check_good(&out.map).is_ok());
        assert_eq!(out.map.graph().vertex_count(), out.analysis.report.s);
        let before = induced_automorphism(&prepare(&m).unwrap(), &Marking::new(m.graph(), 0).unwrap(), None).unwrap();
        assert_eq!(before.rank(), 3);
    }

    #[test]
    fn checker_rejects() {
        let m = prepare(&rose(&["a", "a b"])).unwrap();
        // b' is the twisting orientation; still good
        assert!(check_good(&m).is_ok());
        let bad = GraphMap::new(Graph::rose(&["a".into(), "b".into()]).unwrap(), vec![0], vec![vec![1], vec![2, 2, -1, -2]]);
        if let Ok(bad) = bad {
            assert!(check_good(&bad).is_err());
        }
        // a vertex with only one fixed loop
        let single = prepare(&rose(&["a"])).unwrap();
        assert!(matches!(check_good(&single), Err(Error::NotGoodRepresentative(_))));
    }

    #[test]
    fn nielsen_conjugates() {
        let m = prepare(&rose(&["a", "b a"])).unwrap();
        let g = m.graph();
        let a = g.parse_path(None, "a").unwrap();
        assert!(find_nielsen_conjugate(&m, &a, 16).unwrap().is_empty());
        let bab = g.parse_path(None, "b a b'").unwrap();
        assert!(find_nielsen_conjugate(&m, &bab, 16).unwrap().is_empty());
        let conj = g.parse_path(None, "b' a b").unwrap();
        let eta = find_nielsen_conjugate(&m, &conj, 16).unwrap();
        assert_eq!(g.format_path(&eta), "b'");
        let moving = g.parse_path(None, "b").unwrap();
        assert!(matches!(find_nielsen_conjugate(&m, &moving, 16), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn rank_one_shortcut() {
        let out = good_representative(&rose(&["a"]), Options::default()).unwrap();
        assert_eq!(out.map.graph().edge_count(), 1);
        assert!(good_representative(&rose(&["a'"]), Options::default()).is_err());
    }

    #[test]
    fn valence_one_rejected_at_entry() {
        let g = Graph::new(
            vec!["v".into(), "w".into()],
            vec![Edge { name: "a".into(), init: 0, term: 0 }, Edge { name: "e".into(), init: 0, term: 1 }],
        )
        .unwrap();
        let m = GraphMap::new(g, vec![0, 1], vec![vec![1], vec![2]]).unwrap();
        assert!(matches!(prepare(&m), Err(Error::InvalidGraph(_))));
    }
}
