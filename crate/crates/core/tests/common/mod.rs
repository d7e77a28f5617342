//! Seeded corpus of polynomially growing maximal rank maps.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twistlab::graph::{Edge, EdgePath, Graph, GraphMap};
use twistlab::nielsen::oriented_level_edge;
use twistlab::word::{letter, letter_index, Basis, Endo, Letter, Word};

pub struct Sample {
    pub name: String,
    pub map: GraphMap,
}

struct Builder {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    images: Vec<Vec<Letter>>,
    /// closed Nielsen loops known at each vertex
    loops: Vec<Vec<Vec<Letter>>>,
}

impl Builder {
    fn new() -> Self {
        Builder { vertices: vec!["v0".into()], edges: Vec::new(), images: Vec::new(), loops: vec![Vec::new()] }
    }

    fn rank(&self) -> usize {
        self.edges.len() + 1 - self.vertices.len()
    }

    fn edge_name(&self) -> String {
        let i = self.edges.len();
        if i < 26 {
            ((b'a' + i as u8) as char).to_string()
        } else {
            format!("e{i}")
        }
    }

    fn fixed_loop(&mut self, v: usize) {
        let e = self.edges.len();
        self.edges.push(Edge { name: self.edge_name(), init: v, term: v });
        self.images.push(vec![letter(e, false)]);
        self.loops[v].push(vec![letter(e, false)]);
    }

    fn twist_edge(&mut self, v: usize, w: usize, beta: Vec<Letter>, k: i64) {
        let e = self.edges.len();
        self.edges.push(Edge { name: self.edge_name(), init: v, term: w });
        let mut img = vec![letter(e, false)];
        for _ in 0..k.unsigned_abs() {
            if k > 0 {
                img.extend(beta.iter().copied());
            } else {
                img.extend(beta.iter().rev().map(|l| -l));
            }
        }
        self.images.push(img);
        let mut inp = vec![letter(e, false)];
        inp.extend(beta.iter().copied());
        inp.push(letter(e, true));
        self.loops[v].push(inp);
        if v == w {
            // the twisting loop itself is not a Nielsen path, nothing else to record
        }
    }

    fn vertex(&mut self) -> usize {
        self.vertices.push(format!("v{}", self.vertices.len()));
        self.loops.push(Vec::new());
        self.vertices.len() - 1
    }

    fn finish(self) -> GraphMap {
        let n = self.vertices.len();
        let g = Graph::new(self.vertices, self.edges).unwrap();
        GraphMap::new(g, (0..n).collect(), self.images).unwrap()
    }
}

fn nonzero(rng: &mut ChaCha8Rng, max: i64) -> i64 {
    let k = rng.gen_range(1..=max);
    if rng.gen_bool(0.5) {
        k
    } else {
        -k
    }
}

/// A good-ish representative of the given rank: fixed loops, twist edges
/// along known Nielsen loops, and pendant vertices with a single loop.
pub fn random_good(rng: &mut ChaCha8Rng, rank: usize) -> GraphMap {
    let mut b = Builder::new();
    b.fixed_loop(0);
    while b.rank() < rank {
        let nv = b.vertices.len();
        match rng.gen_range(0..10) {
            0..=2 => {
                let v = rng.gen_range(0..nv);
                b.fixed_loop(v);
            }
            3..=7 => {
                let v = rng.gen_range(0..nv);
                let w = rng.gen_range(0..nv);
                let beta = b.loops[w].choose(rng).unwrap().clone();
                let k = nonzero(rng, 3);
                b.twist_edge(v, w, beta, k);
            }
            _ => {
                if b.rank() + 1 > rank {
                    continue;
                }
                let v = rng.gen_range(0..nv);
                let w = b.vertex();
                b.fixed_loop(w);
                let beta = b.loops[w][0].clone();
                let k = nonzero(rng, 2);
                b.twist_edge(v, w, beta, k);
            }
        }
    }
    b.finish().compute_filtration()
}

fn random_lower_path(rng: &mut ChaCha8Rng, m: &GraphMap, start: usize, mask: &[bool], len: usize) -> EdgePath {
    let g = m.graph();
    let mut p = EdgePath::trivial(start);
    for _ in 0..len {
        let last = p.letters().last().copied();
        let options: Vec<Letter> = g
            .letters_at(p.end())
            .into_iter()
            .filter(|&l| mask[letter_index(l)] && Some(-l) != last)
            .collect();
        let Some(&l) = options.choose(rng) else { break };
        p = p.then(&EdgePath::from_letter(g, l));
    }
    p
}

/// Scrambles a representative with random slides.
pub fn scramble(rng: &mut ChaCha8Rng, mut m: GraphMap, slides: usize, max_len: usize) -> GraphMap {
    for _ in 0..slides {
        let heights = m.heights();
        let candidates: Vec<(Letter, usize)> = (0..m.graph().edge_count())
            .filter_map(|e| oriented_level_edge(&m, e).map(|(l, _)| (l, heights[e])))
            .filter(|&(_, h)| h > 0)
            .collect();
        let Some(&(edge, h)) = candidates.choose(rng) else { break };
        let mask = m.lower_mask(h);
        let len = rng.gen_range(1..=max_len);
        let alpha = random_lower_path(rng, &m, m.graph().terminus(edge), &mask, len);
        if alpha.is_empty() {
            continue;
        }
        if let Ok((next, _)) = m.slide(edge, &alpha) {
            m = next;
        }
    }
    m
}

/// The seeded corpus: ranks 2 to 4, several shapes per rank, scrambled
/// lightly enough that fixed subgroups stay visible to enumeration.
pub fn corpus() -> Vec<Sample> {
    corpus_with(0x0715_71ab, SLIDES, SLIDE_LEN)
}

/// Heavier scrambling, for pipeline robustness.
pub fn deep_corpus() -> Vec<Sample> {
    corpus_with(0x0715_71ab, 6, 3)
}

pub const SLIDES: usize = 4;
pub const SLIDE_LEN: usize = 1;

pub fn corpus_with(seed: u64, max_slides: usize, max_len: usize) -> Vec<Sample> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..60 {
        let rank = 2 + i % 3;
        let good = random_good(&mut rng, rank);
        let slides = rng.gen_range(1..=max_slides);
        let map = scramble(&mut rng, good, slides, max_len);
        out.push(Sample { name: format!("gen{i:02}-rank{rank}"), map });
    }
    out
}

/// Rose maps of named automorphisms with short fixed subgroup generators.
pub fn named_roses() -> Vec<(String, Endo)> {
    let table: &[&[&str]] = &[
        &["a", "b a"],
        &["a", "b a'"],
        &["a", "b a a a"],
        &["a", "a b"],
        &["a", "b a", "c a"],
        &["a", "b a", "c b a b'"],
        &["a", "b", "c a b"],
        &["a", "a b", "c"],
        &["a", "b a", "c a'", "d"],
        &["a", "b", "c", "d a"],
        &["a", "b a", "c b a b'", "d a"],
    ];
    table
        .iter()
        .map(|imgs| {
            let b = Basis::standard(imgs.len());
            let ws: Vec<Word> = imgs.iter().map(|s| b.parse_word(s).unwrap()).collect();
            let name = imgs.join(",");
            (name, Endo::new(b, ws).unwrap())
        })
        .collect()
}

/// Seeded unipotent rose maps `x_i ↦ x_i w_i` with `w_i` a random word in
/// earlier generators: polynomially growing, usually not maximal rank.
pub fn unipotent_roses(count: usize) -> Vec<(String, Endo)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0517_1207);
    (0..count)
        .map(|i| {
            let rank = 2 + i % 3;
            let b = Basis::standard(rank);
            let mut images = vec![Word::generator(0)];
            for j in 1..rank {
                let len = rng.gen_range(0..=3);
                let w: Vec<Letter> = (0..len).map(|_| letter(rng.gen_range(0..j), rng.gen_bool(0.5))).collect();
                let side = Word::from_letters(w);
                images.push(if rng.gen_bool(0.5) { Word::generator(j).mul(&side) } else { side.mul(&Word::generator(j)) });
            }
            let aut = Endo::new(b.clone(), images).unwrap();
            (format!("unipotent{i:02}-rank{rank}"), aut)
        })
        .collect()
}
