//! Finite graphs, edge paths and topological representatives.
//!
//! Edges are referenced through signed [`Letter`]s: `+(e + 1)` traverses
//! edge `e` forwards, `-(e + 1)` backwards.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::word::{
    format_letters, invert_letters, letter, letter_index, parse_tokens, reduce_letters, valid_name,
    Basis, Endo, Letter, Word,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub name: String,
    pub init: usize,
    pub term: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(vertices: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidGraph("no vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !valid_name(v) || vertices[..i].contains(v) {
                return Err(Error::InvalidGraph(format!("bad or duplicate vertex name `{v}`")));
            }
        }
        for (i, e) in edges.iter().enumerate() {
            if !valid_name(&e.name) || edges[..i].iter().any(|f| f.name == e.name) {
                return Err(Error::InvalidGraph(format!("bad or duplicate edge name `{}`", e.name)));
            }
            if e.init >= vertices.len() || e.term >= vertices.len() {
                return Err(Error::InvalidGraph(format!("edge `{}` has a missing endpoint", e.name)));
            }
        }
        Ok(Graph { vertices, edges })
    }

    /// One vertex and one loop per name.
    pub fn rose(names: &[String]) -> Result<Self> {
        let edges = names
            .iter()
            .map(|n| Edge { name: n.clone(), init: 0, term: 0 })
            .collect();
        Graph::new(vec!["v0".to_string()], edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn edge_index(&self, name: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.name == name)
    }

    pub fn origin(&self, l: Letter) -> usize {
        let e = &self.edges[letter_index(l)];
        if l > 0 {
            e.init
        } else {
            e.term
        }
    }

    pub fn terminus(&self, l: Letter) -> usize {
        let e = &self.edges[letter_index(l)];
        if l > 0 {
            e.term
        } else {
            e.init
        }
    }

    pub fn valence(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.init == v) + usize::from(e.term == v))
            .sum()
    }

    pub fn is_loop(&self, e: usize) -> bool {
        self.edges[e].init == self.edges[e].term
    }

    /// Oriented letters leaving `v`, in edge order (forward before backward).
    pub fn letters_at(&self, v: usize) -> Vec<Letter> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.init == v {
                out.push(letter(i, false));
            }
            if e.term == v {
                out.push(letter(i, true));
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components_of(&vec![true; self.edges.len()]).len() == 1
    }

    /// Rank of the fundamental group of a connected graph.
    pub fn rank(&self) -> usize {
        (self.edges.len() + 1).saturating_sub(self.vertices.len())
    }

    /// Components of the subgraph spanned by `mask` edges, including isolated
    /// vertices. Each entry lists `(vertices, edges)` in index order.
    pub fn components_of(&self, mask: &[bool]) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut uf = UnionFind::new(self.vertices.len());
        for (i, e) in self.edges.iter().enumerate() {
            if mask[i] {
                uf.union(e.init, e.term);
            }
        }
        let mut roots: Vec<usize> = Vec::new();
        let mut comps: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for v in 0..self.vertices.len() {
            let r = uf.find(v);
            match roots.iter().position(|&x| x == r) {
                Some(k) => comps[k].0.push(v),
                None => {
                    roots.push(r);
                    comps.push((vec![v], Vec::new()));
                }
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            if mask[i] {
                let r = uf.find(e.init);
                let k = roots.iter().position(|&x| x == r).expect("root present");
                comps[k].1.push(i);
            }
        }
        comps
    }

    /// Reduced rank `1 + Σ max(0, r(C) - 1)` of the subgraph spanned by `mask`.
    pub fn reduced_rank(&self, mask: &[bool]) -> usize {
        1 + self
            .components_of(mask)
            .iter()
            .map(|(vs, es)| (es.len() + 1).saturating_sub(vs.len()).saturating_sub(1))
            .sum::<usize>()
    }

    pub fn parse_path(&self, start: Option<usize>, text: &str) -> Result<EdgePath> {
        let letters = parse_tokens(text, |n| self.edge_index(n))?;
        match (start, letters.first()) {
            (_, Some(&l)) => EdgePath::new(self, self.origin(l), letters),
            (Some(v), None) => Ok(EdgePath::trivial(v)),
            (None, None) => Err(Error::Parse { line: 0, msg: "trivial path needs a base vertex".into() }),
        }
    }

    pub fn format_path(&self, p: &EdgePath) -> String {
        format_letters(&p.letters, |i| self.edges[i].name.as_str())
    }

    pub fn format_letters(&self, letters: &[Letter]) -> String {
        format_letters(letters, |i| self.edges[i].name.as_str())
    }
}

/// An edge path with explicit endpoints, so trivial paths keep their vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgePath {
    start: usize,
    end: usize,
    letters: Vec<Letter>,
}

impl EdgePath {
    pub fn trivial(v: usize) -> Self {
        EdgePath { start: v, end: v, letters: Vec::new() }
    }

    /// Checks composability; does not tighten.
    pub fn new(g: &Graph, start: usize, letters: Vec<Letter>) -> Result<Self> {
        let mut cur = start;
        for &l in &letters {
            if l == 0 || letter_index(l) >= g.edge_count() {
                return Err(Error::InvalidMap("edge index out of range".into()));
            }
            if g.origin(l) != cur {
                return Err(Error::InvalidMap(format!(
                    "path not composable at `{}`",
                    g.edges[letter_index(l)].name
                )));
            }
            cur = g.terminus(l);
        }
        Ok(EdgePath { start, end: cur, letters })
    }

    pub fn from_letter(g: &Graph, l: Letter) -> Self {
        EdgePath { start: g.origin(l), end: g.terminus(l), letters: vec![l] }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.start == self.end
    }

    pub fn is_tight(&self) -> bool {
        self.letters.windows(2).all(|p| p[0] != -p[1])
    }

    pub fn tighten(&self) -> Self {
        EdgePath { start: self.start, end: self.end, letters: reduce_letters(self.letters.iter().copied()) }
    }

    pub fn inverse(&self) -> Self {
        EdgePath { start: self.end, end: self.start, letters: invert_letters(&self.letters) }
    }

    /// Concatenation followed by tightening. Panics on mismatched endpoints.
    pub fn then(&self, other: &EdgePath) -> Self {
        assert_eq!(self.end, other.start, "paths not composable");
        EdgePath {
            start: self.start,
            end: other.end,
            letters: reduce_letters(self.letters.iter().chain(other.letters.iter()).copied()),
        }
    }

    pub fn pow(&self, k: i64) -> Self {
        assert!(self.is_closed());
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = EdgePath::trivial(self.start);
        for _ in 0..k.unsigned_abs() {
            out = out.then(&base);
        }
        out
    }

    pub fn uses_only(&self, allowed: &[bool]) -> bool {
        self.letters.iter().all(|&l| allowed[letter_index(l)])
    }

    pub fn crosses(&self, e: usize) -> bool {
        self.letters.iter().any(|&l| letter_index(l) == e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StratumKind {
    Zero,
    Level,
    Exponential,
}

impl fmt::Display for StratumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StratumKind::Zero => "zero",
            StratumKind::Level => "level",
            StratumKind::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stratum {
    pub edges: Vec<usize>,
    pub kind: StratumKind,
}

/// Entry `(i, j)` counts crossings of edge `j` by the image of edge `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    pub edges: Vec<usize>,
    pub entries: Vec<Vec<u32>>,
}

impl TransitionMatrix {
    pub fn kind(&self) -> StratumKind {
        let n = self.edges.len();
        if self.entries.iter().flatten().all(|&x| x == 0) {
            return StratumKind::Zero;
        }
        let rows_ok = self.entries.iter().all(|r| r.iter().sum::<u32>() == 1 && r.iter().all(|&x| x <= 1));
        let cols_ok = (0..n).all(|j| self.entries.iter().map(|r| r[j]).sum::<u32>() == 1);
        if rows_ok && cols_ok {
            StratumKind::Level
        } else {
            StratumKind::Exponential
        }
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .entries
            .iter()
            .map(|r| format!("[{}]", r.iter().map(u32::to_string).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "[{}]", rows.join(","))
    }
}

/// A self-map of a graph sending vertices to vertices and edges to edge
/// paths, with an optional installed filtration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphMap {
    graph: Graph,
    vmap: Vec<usize>,
    images: Vec<EdgePath>,
    strata: Vec<Stratum>,
}

impl GraphMap {
    /// Builds a map from raw letter images; checks endpoint consistency.
    pub fn new(graph: Graph, vmap: Vec<usize>, images: Vec<Vec<Letter>>) -> Result<Self> {
        if vmap.len() != graph.vertex_count() || images.len() != graph.edge_count() {
            return Err(Error::InvalidMap("vertex or edge map incomplete".into()));
        }
        if vmap.iter().any(|&v| v >= graph.vertex_count()) {
            return Err(Error::InvalidMap("vertex image out of range".into()));
        }
        let mut paths = Vec::with_capacity(images.len());
        for (i, img) in images.into_iter().enumerate() {
            let e = graph.edge(i);
            let (s, t) = (vmap[e.init], vmap[e.term]);
            if img.is_empty() {
                if s != t {
                    return Err(Error::EdgeImageCollapses { edge: e.name.clone() });
                }
                paths.push(EdgePath::trivial(s));
                continue;
            }
            let p = EdgePath::new(&graph, graph.origin(img[0]), img)?;
            if p.start != s || p.end != t {
                return Err(Error::InvalidMap(format!(
                    "image of `{}` does not join the images of its endpoints",
                    e.name
                )));
            }
            paths.push(p);
        }
        Ok(GraphMap { graph, vmap, images: paths, strata: Vec::new() })
    }

    pub(crate) fn from_paths(graph: Graph, vmap: Vec<usize>, images: Vec<EdgePath>) -> Self {
        GraphMap { graph, vmap, images, strata: Vec::new() }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn vmap(&self) -> &[usize] {
        &self.vmap
    }

    pub fn vertex_image(&self, v: usize) -> usize {
        self.vmap[v]
    }

    pub fn is_fixed_vertex(&self, v: usize) -> bool {
        self.vmap[v] == v
    }

    pub fn images(&self) -> &[EdgePath] {
        &self.images
    }

    pub fn image(&self, e: usize) -> &EdgePath {
        &self.images[e]
    }

    /// Image of an oriented edge.
    pub fn image_of(&self, l: Letter) -> EdgePath {
        let p = &self.images[letter_index(l)];
        if l > 0 {
            p.clone()
        } else {
            p.inverse()
        }
    }

    /// Tightened image of a path.
    pub fn apply_path(&self, p: &EdgePath) -> EdgePath {
        let mut letters: Vec<Letter> = Vec::new();
        for &l in &p.letters {
            let img = &self.images[letter_index(l)].letters;
            if l > 0 {
                push_tight(&mut letters, img.iter().copied());
            } else {
                push_tight(&mut letters, img.iter().rev().map(|x| -x));
            }
        }
        EdgePath { start: self.vmap[p.start], end: self.vmap[p.end], letters }
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn has_filtration(&self) -> bool {
        !self.strata.is_empty() || self.graph.edge_count() == 0
    }

    /// Stratum index of every edge (requires a filtration).
    pub fn heights(&self) -> Vec<usize> {
        let mut h = vec![usize::MAX; self.graph.edge_count()];
        for (i, s) in self.strata.iter().enumerate() {
            for &e in &s.edges {
                h[e] = i;
            }
        }
        h
    }

    /// Edge mask of `G_{r-1}`, the strata strictly below `r`.
    pub fn lower_mask(&self, r: usize) -> Vec<bool> {
        let mut m = vec![false; self.graph.edge_count()];
        for s in &self.strata[..r] {
            for &e in &s.edges {
                m[e] = true;
            }
        }
        m
    }

    pub fn is_tight(&self) -> bool {
        self.images.iter().all(EdgePath::is_tight)
    }

    pub fn tighten(&self) -> Result<GraphMap> {
        let images: Vec<EdgePath> = self.images.iter().map(EdgePath::tighten).collect();
        for (i, p) in images.iter().enumerate() {
            let e = self.graph.edge(i);
            if p.is_empty() && self.vmap[e.init] != self.vmap[e.term] {
                return Err(Error::EdgeImageCollapses { edge: e.name.clone() });
            }
        }
        let mut out = self.clone();
        if out.images != images {
            out.images = images;
            out.strata.clear();
        }
        Ok(out)
    }

    /// Edges whose tightened image is a trivial path.
    pub fn collapsed_edges(&self) -> Vec<usize> {
        (0..self.graph.edge_count()).filter(|&e| self.images[e].is_empty()).collect()
    }

    pub fn transition_matrix_of(&self, edges: &[usize]) -> TransitionMatrix {
        let entries = edges
            .iter()
            .map(|&ei| {
                edges
                    .iter()
                    .map(|&ej| self.images[ei].letters.iter().filter(|&&l| letter_index(l) == ej).count() as u32)
                    .collect()
            })
            .collect();
        TransitionMatrix { edges: edges.to_vec(), entries }
    }

    pub fn transition_matrix(&self, stratum: usize) -> (TransitionMatrix, StratumKind) {
        let m = self.transition_matrix_of(&self.strata[stratum].edges);
        let k = m.kind();
        (m, k)
    }

    /// Installs the maximal filtration given by the strongly connected
    /// components of the edge dependency digraph.
    pub fn compute_filtration(&self) -> GraphMap {
        let n = self.graph.edge_count();
        let deps: Vec<BTreeSet<usize>> = (0..n)
            .map(|e| self.images[e].letters.iter().map(|&l| letter_index(l)).collect())
            .collect();
        let comps = tarjan(&deps);
        let mut comp_of = vec![0; n];
        for (ci, c) in comps.iter().enumerate() {
            for &e in c {
                comp_of[e] = ci;
            }
        }
        let nc = comps.len();
        let mut needs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nc];
        for e in 0..n {
            for &d in &deps[e] {
                if comp_of[d] != comp_of[e] {
                    needs[comp_of[e]].insert(comp_of[d]);
                }
            }
        }
        let min_edge: Vec<usize> = comps.iter().map(|c| *c.iter().min().expect("nonempty")).collect();
        let is_zero_single = |ci: usize| comps[ci].len() == 1 && !deps[comps[ci][0]].contains(&comps[ci][0]);
        let mut done = vec![false; nc];
        let mut strata = Vec::new();
        let mut remaining = nc;
        while remaining > 0 {
            let mut ready: Vec<usize> = (0..nc)
                .filter(|&c| !done[c] && needs[c].iter().all(|&d| done[d]))
                .collect();
            ready.sort_by_key(|&c| min_edge[c]);
            let first = ready[0];
            let chosen: Vec<usize> = if is_zero_single(first) {
                ready.into_iter().filter(|&c| is_zero_single(c)).collect()
            } else {
                vec![first]
            };
            let mut edges: Vec<usize> = chosen.iter().flat_map(|&c| comps[c].iter().copied()).collect();
            edges.sort_unstable();
            for c in chosen {
                done[c] = true;
                remaining -= 1;
            }
            let kind = self.transition_matrix_of(&edges).kind();
            strata.push(Stratum { edges, kind });
        }
        let mut out = self.clone();
        out.strata = strata;
        out
    }

    /// Scope check: no exponential strata.
    pub fn reject_exponential(&self) -> Result<()> {
        for i in 0..self.strata.len() {
            let (m, kind) = self.transition_matrix(i);
            if kind == StratumKind::Exponential {
                let names: Vec<&str> = m.edges.iter().map(|&e| self.graph.edge(e).name.as_str()).collect();
                return Err(Error::ExponentialStratum {
                    index: i + 1,
                    edges: names.join(", "),
                    matrix: m.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Edges crossed by `f(e)`, with the positions where `f(e)` crosses `e` itself.
    fn self_crossings(&self, e: usize) -> Vec<(usize, Letter)> {
        self.images[e]
            .letters
            .iter()
            .enumerate()
            .filter(|(_, &l)| letter_index(l) == e)
            .map(|(i, &l)| (i, l))
            .collect()
    }

    /// Subdivides every level edge whose image crosses it positively away
    /// from both ends (`f(E) = u E w` with `u`, `w` nonempty), placing a new
    /// fixed vertex at the interior fixed point.
    pub fn subdivide_at_fixed_points(&self) -> (GraphMap, GraphMorphism) {
        let mut cur = self.clone();
        let mut p = GraphMorphism::identity(self);
        loop {
            let target = (0..cur.graph.edge_count()).find(|&e| {
                let cr = cur.self_crossings(e);
                let len = cur.images[e].len();
                cr.len() == 1 && cr[0].1 > 0 && cr[0].0 > 0 && cr[0].0 + 1 < len
            });
            let Some(e) = target else { break };
            let (next, step) = cur.subdivide_edge(e);
            p = p.then(&step);
            cur = next;
        }
        let out = if cur == *self { cur } else { cur.compute_filtration() };
        (out, p)
    }

    fn subdivide_edge(&self, e: usize) -> (GraphMap, GraphMorphism) {
        let old = self.graph.edge(e).clone();
        let mut k = 1;
        let vname = loop {
            let cand = format!("v#{}#{}", old.name, k);
            if self.graph.vertex_index(&cand).is_none() {
                break cand;
            }
            k += 1;
        };
        let fresh_edge = |suffix: u32| {
            let mut j = suffix;
            loop {
                let cand = format!("{}#{}", old.name, j);
                if self.graph.edge_index(&cand).is_none() {
                    return cand;
                }
                j += 2;
            }
        };
        let x = self.graph.vertex_count();
        let e2 = self.graph.edge_count();
        let mut vertices = self.graph.vertices.clone();
        vertices.push(vname);
        let mut edges = self.graph.edges.clone();
        edges[e] = Edge { name: fresh_edge(1), init: old.init, term: x };
        edges.push(Edge { name: fresh_edge(2), init: x, term: old.term });
        let graph = Graph { vertices, edges };
        let (l1, l2) = (letter(e, false), letter(e2, false));
        let subst = |letters: &[Letter]| -> Vec<Letter> {
            let mut out = Vec::new();
            for &l in letters {
                if letter_index(l) == e {
                    if l > 0 {
                        out.extend([l1, l2]);
                    } else {
                        out.extend([-l2, -l1]);
                    }
                } else {
                    out.push(l);
                }
            }
            out
        };
        let img = &self.images[e].letters;
        let pos = img.iter().position(|&l| letter_index(l) == e).expect("self crossing");
        let mut vmap = self.vmap.clone();
        vmap.push(x);
        let mut images: Vec<EdgePath> = Vec::new();
        for i in 0..self.graph.edge_count() {
            let ed = graph.edge(i);
            let letters = if i == e {
                let mut u = subst(&img[..pos]);
                u.push(l1);
                u
            } else {
                subst(&self.images[i].letters)
            };
            images.push(EdgePath { start: vmap[ed.init], end: vmap[ed.term], letters });
        }
        let mut last = vec![l2];
        last.extend(subst(&img[pos + 1..]));
        images.push(EdgePath { start: x, end: vmap[old.term], letters: last });
        let emap = (0..self.graph.edge_count())
            .map(|i| {
                let ed = self.graph.edge(i);
                if i == e {
                    EdgePath { start: ed.init, end: ed.term, letters: vec![l1, l2] }
                } else {
                    EdgePath { start: ed.init, end: ed.term, letters: vec![letter(i, false)] }
                }
            })
            .collect();
        let p = GraphMorphism { vmap: (0..self.graph.vertex_count()).collect(), emap };
        (GraphMap::from_paths(graph, vmap, images), p)
    }

    /// Reverses the stored orientation of edge `e`.
    pub fn reverse_edge(&self, e: usize) -> GraphMap {
        let mut graph = self.graph.clone();
        let ed = &mut graph.edges[e];
        std::mem::swap(&mut ed.init, &mut ed.term);
        let flip = |p: &EdgePath| EdgePath {
            start: p.start,
            end: p.end,
            letters: p.letters.iter().map(|&l| if letter_index(l) == e { -l } else { l }).collect(),
        };
        let mut images: Vec<EdgePath> = self.images.iter().map(flip).collect();
        images[e] = images[e].inverse();
        GraphMap { graph, vmap: self.vmap.clone(), images, strata: self.strata.clone() }
    }

    /// Slides the oriented level edge `edge` (with `f(E) = E u`) along `alpha`,
    /// a path in lower strata starting at the terminal vertex of `E`.
    pub fn slide(&self, edge: Letter, alpha: &EdgePath) -> Result<(GraphMap, GraphMorphism)> {
        if !self.has_filtration() {
            return Err(Error::PreconditionFailed("slide needs an installed filtration".into()));
        }
        let e = letter_index(edge);
        let heights = self.heights();
        let h = heights[e];
        if self.strata[h].kind != StratumKind::Level || self.strata[h].edges.len() != 1 {
            return Err(Error::PreconditionFailed(format!(
                "edge `{}` is not a level edge",
                self.graph.edge(e).name
            )));
        }
        let img = self.image_of(edge);
        let lower = self.lower_mask(h);
        if img.letters.first() != Some(&edge) || !img.letters[1..].iter().all(|&l| lower[letter_index(l)]) {
            return Err(Error::PreconditionFailed(format!(
                "image of `{}` is not of the form E u with u below E",
                self.graph.edge(e).name
            )));
        }
        if !alpha.uses_only(&lower) {
            return Err(Error::PreconditionFailed("slide path leaves the lower strata".into()));
        }
        if alpha.start != self.graph.terminus(edge) {
            return Err(Error::PreconditionFailed("slide path does not start at the end of the edge".into()));
        }
        if alpha.is_empty() {
            return Ok((self.clone(), GraphMorphism::identity(self)));
        }
        let mut graph = self.graph.clone();
        if edge > 0 {
            graph.edges[e].term = alpha.end;
        } else {
            graph.edges[e].init = alpha.end;
        }
        // p(E) = E' ᾱ, identity elsewhere
        let mut emap: Vec<EdgePath> = (0..graph.edge_count())
            .map(|i| {
                let ed = self.graph.edge(i);
                EdgePath { start: ed.init, end: ed.term, letters: vec![letter(i, false)] }
            })
            .collect();
        let mut pe = vec![edge];
        pe.extend(alpha.inverse().letters);
        let pe = EdgePath { start: self.graph.origin(edge), end: self.graph.terminus(edge), letters: pe };
        emap[e] = if edge > 0 { pe } else { pe.inverse() };
        let p = GraphMorphism { vmap: (0..graph.vertex_count()).collect(), emap };
        let u = EdgePath { start: alpha.start, end: img.end, letters: img.letters[1..].to_vec() };
        let new_e = EdgePath { start: graph.origin(edge), end: alpha.end, letters: vec![edge] }
            .then(&alpha.inverse().then(&u).then(&self.apply_path(alpha)));
        let mut images: Vec<EdgePath> = Vec::with_capacity(graph.edge_count());
        for i in 0..graph.edge_count() {
            if i == e {
                images.push(if edge > 0 { new_e.clone() } else { new_e.inverse() });
            } else {
                images.push(p.apply_path(&self.images[i]));
            }
        }
        let out = GraphMap::from_paths(graph, self.vmap.clone(), images).compute_filtration();
        Ok((out, p))
    }

    /// Collapses a forest (no loops, no cycles). The forest need not be
    /// invariant: the quotient map is `p ∘ f ∘ s` for the section `s` that
    /// routes through each tree's root, and the returned vertex tracks make
    /// `p ∘ f` and `f' ∘ p` homotopic.
    pub fn collapse_forest(&self, forest: &[usize]) -> Result<(GraphMap, GraphMorphism, Vec<EdgePath>)> {
        let nv = self.graph.vertex_count();
        let mut in_forest = vec![false; self.graph.edge_count()];
        let mut uf = UnionFind::new(nv);
        for &e in forest {
            let ed = self.graph.edge(e);
            if ed.init == ed.term || !uf.union(ed.init, ed.term) {
                return Err(Error::PreconditionFailed("edge set is not a forest".into()));
            }
            in_forest[e] = true;
        }
        // class root = least vertex of each tree; new vertex order follows roots
        let roots: Vec<usize> = (0..nv).filter(|&v| (0..v).all(|u| uf.find(u) != uf.find(v))).collect();
        let class_of: Vec<usize> = (0..nv)
            .map(|v| roots.iter().position(|&r| uf.find(r) == uf.find(v)).expect("root"))
            .collect();
        // path inside the forest from each vertex to its root
        let mut to_root: Vec<Option<Vec<Letter>>> = vec![None; nv];
        for &r in &roots {
            to_root[r] = Some(Vec::new());
            let mut queue = VecDeque::from([r]);
            while let Some(v) = queue.pop_front() {
                for l in self.graph.letters_at(v) {
                    if !in_forest[letter_index(l)] {
                        continue;
                    }
                    let w = self.graph.terminus(l);
                    if to_root[w].is_none() {
                        let mut path = vec![-l];
                        path.extend(to_root[v].as_ref().expect("visited").iter().copied());
                        to_root[w] = Some(path);
                        queue.push_back(w);
                    }
                }
            }
        }
        let to_root: Vec<EdgePath> = (0..nv)
            .map(|v| EdgePath { start: v, end: roots[class_of[v]], letters: to_root[v].clone().expect("reached") })
            .collect();
        let kept: Vec<usize> = (0..self.graph.edge_count()).filter(|&e| !in_forest[e]).collect();
        let new_index: Vec<Option<usize>> = {
            let mut v = vec![None; self.graph.edge_count()];
            for (i, &e) in kept.iter().enumerate() {
                v[e] = Some(i);
            }
            v
        };
        let vertices: Vec<String> = roots.iter().map(|&r| self.graph.vertices[r].clone()).collect();
        let edges: Vec<Edge> = kept
            .iter()
            .map(|&e| {
                let ed = self.graph.edge(e);
                Edge { name: ed.name.clone(), init: class_of[ed.init], term: class_of[ed.term] }
            })
            .collect();
        let graph = Graph { vertices, edges };
        let emap: Vec<EdgePath> = (0..self.graph.edge_count())
            .map(|e| {
                let ed = self.graph.edge(e);
                let letters = match new_index[e] {
                    Some(i) => vec![letter(i, false)],
                    None => Vec::new(),
                };
                EdgePath { start: class_of[ed.init], end: class_of[ed.term], letters }
            })
            .collect();
        let p = GraphMorphism { vmap: class_of.clone(), emap };
        let vmap: Vec<usize> = roots.iter().map(|&r| class_of[self.vmap[r]]).collect();
        let images: Vec<EdgePath> = kept
            .iter()
            .map(|&e| {
                let ed = self.graph.edge(e);
                let section = to_root[ed.init]
                    .inverse()
                    .then(&EdgePath::from_letter(&self.graph, letter(e, false)))
                    .then(&to_root[ed.term]);
                p.apply_path(&self.apply_path(&section))
            })
            .collect();
        let tracks: Vec<EdgePath> = (0..nv).map(|v| p.apply_path(&self.apply_path(&to_root[v]))).collect();
        let out = GraphMap::from_paths(graph, vmap, images);
        let out = if self.has_filtration() { out.compute_filtration() } else { out };
        Ok((out, p, tracks))
    }

    /// Collapses an invariant forest: every forest edge maps into the forest
    /// and each tree maps into itself.
    pub fn collapse_invariant_forest(&self, forest: &[usize]) -> Result<(GraphMap, GraphMorphism)> {
        let mask: Vec<bool> = (0..self.graph.edge_count()).map(|e| forest.contains(&e)).collect();
        let comps = self.graph.components_of(&mask);
        let comp_of = |v: usize| comps.iter().position(|(vs, _)| vs.contains(&v)).expect("vertex");
        for &e in forest {
            if !self.images[e].uses_only(&mask) {
                return Err(Error::PreconditionFailed(format!(
                    "forest is not invariant at `{}`",
                    self.graph.edge(e).name
                )));
            }
        }
        for (vs, es) in &comps {
            if es.is_empty() {
                continue;
            }
            if vs.iter().any(|&v| comp_of(self.vmap[v]) != comp_of(vs[0])) {
                return Err(Error::PreconditionFailed("a tree is not mapped into itself".into()));
            }
        }
        let (out, p, _) = self.collapse_forest(forest)?;
        Ok((out, p))
    }

    /// Drops vertices with no incident edges that are not the image of
    /// another vertex. Returns `None` when nothing changes.
    pub fn remove_isolated_vertices(&self) -> Option<GraphMap> {
        let nv = self.graph.vertex_count();
        if nv <= 1 {
            return None;
        }
        let drop: Vec<bool> = (0..nv)
            .map(|v| self.graph.valence(v) == 0 && (0..nv).all(|u| u == v || self.vmap[u] != v))
            .collect();
        if !drop.iter().any(|&d| d) {
            return None;
        }
        let keep: Vec<usize> = (0..nv).filter(|&v| !drop[v]).collect();
        let idx = |v: usize| keep.iter().position(|&k| k == v).expect("kept");
        let vertices = keep.iter().map(|&v| self.graph.vertices[v].clone()).collect();
        let edges = self
            .graph
            .edges
            .iter()
            .map(|e| Edge { name: e.name.clone(), init: idx(e.init), term: idx(e.term) })
            .collect();
        let vmap = keep.iter().map(|&v| idx(self.vmap[v])).collect();
        let images = self
            .images
            .iter()
            .map(|p| EdgePath { start: idx(p.start), end: idx(p.end), letters: p.letters.clone() })
            .collect();
        let out = GraphMap::from_paths(Graph { vertices, edges }, vmap, images);
        Some(if self.has_filtration() { out.compute_filtration() } else { out })
    }

    /// Replaces one edge image (used by homotopies of the map itself).
    pub(crate) fn with_image(&self, e: usize, img: EdgePath) -> GraphMap {
        let mut out = self.clone();
        out.images[e] = img;
        out.compute_filtration()
    }

    /// Validates that the map is a homotopy equivalence: the induced map on
    /// the fundamental group must be invertible.
    pub fn validate_homotopy_equivalence(&self) -> Result<()> {
        if !self.graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        if self.graph.rank() == 0 {
            return Err(Error::InvalidGraph("graph is a tree".into()));
        }
        let marking = Marking::new(&self.graph, 0)?;
        let mu = marking.tree_path(self.vmap[0]).inverse();
        let aut = induced_automorphism(self, &marking, Some(&mu))?;
        aut.invert().map(|_| ())
    }
}

fn push_tight(out: &mut Vec<Letter>, it: impl Iterator<Item = Letter>) {
    for l in it {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
}

/// A cellular map between two graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphMorphism {
    pub vmap: Vec<usize>,
    pub emap: Vec<EdgePath>,
}

impl GraphMorphism {
    pub fn identity(m: &GraphMap) -> Self {
        let g = m.graph();
        GraphMorphism {
            vmap: (0..g.vertex_count()).collect(),
            emap: (0..g.edge_count()).map(|e| EdgePath::from_letter(g, letter(e, false))).collect(),
        }
    }

    pub fn apply_path(&self, p: &EdgePath) -> EdgePath {
        let mut letters = Vec::new();
        for &l in &p.letters {
            let img = &self.emap[letter_index(l)].letters;
            if l > 0 {
                push_tight(&mut letters, img.iter().copied());
            } else {
                push_tight(&mut letters, img.iter().rev().map(|x| -x));
            }
        }
        EdgePath { start: self.vmap[p.start], end: self.vmap[p.end], letters }
    }

    /// `self` first, then `next`.
    pub fn then(&self, next: &GraphMorphism) -> GraphMorphism {
        GraphMorphism {
            vmap: self.vmap.iter().map(|&v| next.vmap[v]).collect(),
            emap: self.emap.iter().map(|p| next.apply_path(p)).collect(),
        }
    }
}

/// Whether `[p(f1(e))] = [f2(p(e))]` for every edge; on failure returns the
/// first offending edge of the source graph.
pub fn homotopy_commutes(m1: &GraphMap, m2: &GraphMap, p: &GraphMorphism) -> std::result::Result<(), usize> {
    let tracks: Vec<EdgePath> = (0..m1.graph().vertex_count())
        .map(|v| EdgePath::trivial(p.vmap[m1.vmap[v]]))
        .collect();
    homotopy_commutes_with_tracks(m1, m2, p, &tracks)
}

/// As [`homotopy_commutes`], with a vertex track `h_x` from `p(f1(x))` to
/// `f2(p(x))` for each source vertex: checks `[p(f1(e)) h_y] = [h_x f2(p(e))]`.
pub fn homotopy_commutes_with_tracks(
    m1: &GraphMap,
    m2: &GraphMap,
    p: &GraphMorphism,
    tracks: &[EdgePath],
) -> std::result::Result<(), usize> {
    let g1 = m1.graph();
    for (v, h) in tracks.iter().enumerate() {
        if h.start != p.vmap[m1.vmap[v]] || h.end != m2.vmap[p.vmap[v]] {
            return Err(g1.edges.iter().position(|e| e.init == v || e.term == v).unwrap_or(0));
        }
    }
    for e in 0..g1.edge_count() {
        let ed = g1.edge(e);
        let lhs = p.apply_path(m1.image(e)).then(&tracks[ed.term]);
        let rhs = tracks[ed.init].then(&m2.apply_path(&p.emap[e]));
        if lhs != rhs {
            return Err(e);
        }
    }
    Ok(())
}

/// Identification of `π1(G, base)` with a free group: a spanning tree plus
/// one basis generator per non-tree edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marking {
    base: usize,
    in_tree: Vec<bool>,
    from_base: Vec<Vec<Letter>>,
    generator_of: Vec<Option<usize>>,
    basis: Basis,
}

impl Marking {
    /// Breadth-first spanning tree from `base`, edges in index order.
    pub fn new(g: &Graph, base: usize) -> Result<Self> {
        if base >= g.vertex_count() {
            return Err(Error::VertexAbsent(base.to_string()));
        }
        let nv = g.vertex_count();
        let mut from_base: Vec<Option<Vec<Letter>>> = vec![None; nv];
        let mut in_tree = vec![false; g.edge_count()];
        from_base[base] = Some(Vec::new());
        let mut queue = VecDeque::from([base]);
        while let Some(v) = queue.pop_front() {
            for l in g.letters_at(v) {
                let w = g.terminus(l);
                if from_base[w].is_none() {
                    let mut p = from_base[v].clone().expect("visited");
                    p.push(l);
                    from_base[w] = Some(p);
                    in_tree[letter_index(l)] = true;
                    queue.push_back(w);
                }
            }
        }
        if from_base.iter().any(Option::is_none) {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        let mut generator_of = vec![None; g.edge_count()];
        let mut names = Vec::new();
        for e in 0..g.edge_count() {
            if !in_tree[e] {
                generator_of[e] = Some(names.len());
                names.push(g.edge(e).name.clone());
            }
        }
        let basis = if names.is_empty() {
            Basis::standard(0)
        } else {
            Basis::new(names)?
        };
        Ok(Marking {
            base,
            in_tree,
            from_base: from_base.into_iter().map(|p| p.expect("reached")).collect(),
            generator_of,
            basis,
        })
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn is_tree_edge(&self, e: usize) -> bool {
        self.in_tree[e]
    }

    /// Tree path from the base to `v`.
    pub fn tree_path(&self, v: usize) -> EdgePath {
        EdgePath { start: self.base, end: v, letters: self.from_base[v].clone() }
    }

    /// Reads a path closed at the base as a word in the marking basis.
    pub fn word_of(&self, p: &EdgePath) -> Result<Word> {
        if p.start != self.base || p.end != self.base {
            return Err(Error::PreconditionFailed("path is not closed at the marking base".into()));
        }
        Ok(Word::from_letters(p.letters.iter().filter_map(|&l| {
            self.generator_of[letter_index(l)].map(|i| letter(i, l < 0))
        })))
    }

    /// Closed path at the base representing basis generator `i`.
    pub fn generator_loop(&self, g: &Graph, i: usize) -> EdgePath {
        let e = self.generator_of.iter().position(|&x| x == Some(i)).expect("generator");
        let ed = g.edge(e);
        self.tree_path(ed.init)
            .then(&EdgePath::from_letter(g, letter(e, false)))
            .then(&self.tree_path(ed.term).inverse())
    }

    /// Closed path at the base spelling `w`.
    pub fn path_of(&self, g: &Graph, w: &Word) -> EdgePath {
        let mut p = EdgePath::trivial(self.base);
        for &l in w.letters() {
            let gl = self.generator_loop(g, letter_index(l));
            p = p.then(&if l > 0 { gl } else { gl.inverse() });
        }
        p
    }
}

/// The automorphism of the marking basis induced by `α ↦ μ̄ f(α) μ`, where
/// `μ` runs from `f(base)` to `base` (trivial when the base is fixed).
pub fn induced_automorphism(m: &GraphMap, marking: &Marking, mu: Option<&EdgePath>) -> Result<Endo> {
    let g = m.graph();
    let base = marking.base();
    let mu = match mu {
        Some(mu) => {
            if mu.start != m.vmap[base] || mu.end != base {
                return Err(Error::PreconditionFailed("connecting path has wrong endpoints".into()));
            }
            mu.clone()
        }
        None if m.is_fixed_vertex(base) => EdgePath::trivial(base),
        None => {
            return Err(Error::PreconditionFailed(format!(
                "vertex `{}` is not fixed and no connecting path was given",
                g.vertex_name(base)
            )))
        }
    };
    let rank = marking.basis().rank();
    let mut images = Vec::with_capacity(rank);
    for i in 0..rank {
        let alpha = marking.generator_loop(g, i);
        let img = mu.inverse().then(&m.apply_path(&alpha)).then(&mu);
        images.push(marking.word_of(&img)?);
    }
    Endo::new(marking.basis().clone(), images)
}

/// Rose with one edge per generator and the identity marking.
pub fn rose_of(aut: &Endo) -> Result<(GraphMap, Marking)> {
    aut.invert()?;
    let graph = Graph::rose(aut.basis().names())?;
    let images = aut.images().iter().map(|w| w.letters().to_vec()).collect();
    let m = GraphMap::new(graph, vec![0], images)?;
    let marking = Marking::new(m.graph(), 0)?;
    Ok((m, marking))
}

fn tarjan(deps: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    struct St<'a> {
        deps: &'a [BTreeSet<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut St<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on[v] = true;
        let ws: Vec<usize> = s.deps[v].iter().copied().collect();
        for w in ws {
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().expect("stack");
                s.on[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }
    let n = deps.len();
    let mut s = St { deps, index: vec![None; n], low: vec![0; n], on: vec![false; n], stack: Vec::new(), next: 0, out: Vec::new() };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns false when already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}
