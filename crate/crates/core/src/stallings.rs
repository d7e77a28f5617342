//! Stallings foldings: the folded core graph of a finitely generated
//! subgroup, used for rank and membership.

use std::collections::BTreeMap;

use crate::word::{Letter, Word};

/// Folded labelled graph with a base vertex. Edges are stored as half-edges:
/// `out[v][l] = u` for a directed edge `v --l--> u`, and `out[u][-l] = v`.
#[derive(Debug, Clone)]
pub struct SubgroupGraph {
    base: usize,
    parent: Vec<usize>,
    out: Vec<BTreeMap<Letter, usize>>,
    alive: Vec<bool>,
    pending: Vec<(usize, usize)>,
}

impl Default for SubgroupGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl SubgroupGraph {
    pub fn new() -> Self {
        SubgroupGraph {
            base: 0,
            parent: vec![0],
            out: vec![BTreeMap::new()],
            alive: vec![true],
            pending: Vec::new(),
        }
    }

    pub fn from_generators<'a>(gens: impl IntoIterator<Item = &'a Word>) -> Self {
        let mut g = Self::new();
        for w in gens {
            g.add_generator(w);
        }
        g.prune();
        g
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            let p = self.parent[v];
            self.parent[v] = self.parent[p];
            v = p;
        }
        v
    }

    fn fresh(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id);
        self.out.push(BTreeMap::new());
        self.alive.push(true);
        id
    }

    fn insert_half(&mut self, u: usize, l: Letter, v: usize) {
        match self.out[u].get(&l).copied() {
            Some(t) => {
                let t = self.find(t);
                if t != v {
                    self.pending.push((t, v));
                }
            }
            None => {
                self.out[u].insert(l, v);
            }
        }
    }

    fn add_edge(&mut self, u: usize, l: Letter, v: usize) {
        let u = self.find(u);
        let v = self.find(v);
        self.insert_half(u, l, v);
        let (u, v) = (self.find(u), self.find(v));
        self.insert_half(v, -l, u);
        self.fold();
    }

    fn fold(&mut self) {
        while let Some((a, b)) = self.pending.pop() {
            let a = self.find(a);
            let b = self.find(b);
            if a == b {
                continue;
            }
            let (keep, gone) = if a < b { (a, b) } else { (b, a) };
            self.parent[gone] = keep;
            self.alive[gone] = false;
            let moved = std::mem::take(&mut self.out[gone]);
            for (l, t) in moved {
                let t = self.find(t);
                let keep = self.find(keep);
                self.insert_half(keep, l, t);
            }
        }
    }

    /// Adds a petal reading `w` from the base, folding as it goes.
    pub fn add_generator(&mut self, w: &Word) {
        let letters = w.letters();
        if letters.is_empty() {
            return;
        }
        let mut cur = self.base;
        for (i, &l) in letters.iter().enumerate() {
            let last = i + 1 == letters.len();
            let c = self.find(cur);
            let existing = self.out[c].get(&l).copied().map(|t| self.find(t));
            let next = match (existing, last) {
                (Some(t), false) => {
                    cur = t;
                    continue;
                }
                (_, true) => self.base,
                (None, false) => self.fresh(),
            };
            self.add_edge(c, l, next);
            cur = next;
        }
    }

    /// Removes valence-one vertices other than the base.
    pub fn prune(&mut self) {
        self.normalize();
        loop {
            let mut changed = false;
            for v in 0..self.out.len() {
                if !self.alive[v] || v == self.base || self.out[v].len() != 1 {
                    continue;
                }
                let (&l, &t) = self.out[v].iter().next().expect("one half-edge");
                self.out[t].remove(&-l);
                self.out[v].clear();
                self.alive[v] = false;
                changed = true;
            }
            if !changed {
                break;
            }
        }
    }

    fn normalize(&mut self) {
        for v in 0..self.out.len() {
            if !self.alive[v] {
                continue;
            }
            let entries: Vec<(Letter, usize)> = self.out[v].iter().map(|(&l, &t)| (l, t)).collect();
            for (l, t) in entries {
                let t = self.find(t);
                self.out[v].insert(l, t);
            }
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.out.len())
            .filter(|&v| self.alive[v])
            .map(|v| self.out[v].keys().filter(|&&l| l > 0).count())
            .sum()
    }

    pub fn rank(&self) -> usize {
        self.edge_count() + 1 - self.vertex_count()
    }

    /// Whether `w` labels a closed path at the base.
    pub fn contains(&self, w: &Word) -> bool {
        let mut cur = self.base;
        for l in w.letters() {
            match self.out[cur].get(l) {
                Some(&t) => cur = self.resolve(t),
                None => return false,
            }
        }
        cur == self.base
    }

    fn resolve(&self, mut v: usize) -> usize {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    /// Folded and core invariants, for tests.
    pub fn is_folded_core(&self) -> bool {
        (0..self.out.len()).filter(|&v| self.alive[v]).all(|v| {
            let ok_core = v == self.base || self.out[v].len() >= 2;
            let ok_targets = self.out[v]
                .iter()
                .all(|(&l, &t)| self.alive[t] && self.out[t].get(&-l) == Some(&v));
            ok_core && ok_targets
        })
    }
}

pub fn subgroup_rank(gens: &[Word]) -> usize {
    SubgroupGraph::from_generators(gens).rank()
}

pub fn subgroup_contains(gens: &[Word], w: &Word) -> bool {
    SubgroupGraph::from_generators(gens).contains(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::Basis;
    use proptest::prelude::*;

    fn ws(b: &Basis, xs: &[&str]) -> Vec<Word> {
        xs.iter().map(|s| b.parse_word(s).unwrap()).collect()
    }

    #[test]
    fn rank_examples() {
        let b = Basis::new(["a", "b"]).unwrap();
        assert_eq!(subgroup_rank(&ws(&b, &["a", "b a b'"])), 2);
        assert_eq!(subgroup_rank(&ws(&b, &["a a", "a a a"])), 1);
        assert_eq!(subgroup_rank(&[]), 0);
        assert_eq!(subgroup_rank(&ws(&b, &["a", "b"])), 2);
        assert_eq!(subgroup_rank(&ws(&b, &["a b", "b a", "a"])), 2);
    }

    #[test]
    fn membership_examples() {
        let b = Basis::new(["a", "b"]).unwrap();
        let g = ws(&b, &["a", "b a b'"]);
        assert!(subgroup_contains(&g, &b.parse_word("b a b'").unwrap()));
        assert!(!subgroup_contains(&ws(&b, &["a"]), &b.parse_word("b").unwrap()));
        assert!(subgroup_contains(&ws(&b, &["a a", "a a a"]), &b.parse_word("a").unwrap()));
        assert!(subgroup_contains(&g, &b.parse_word("b a' a' b' a").unwrap()));
        assert!(!subgroup_contains(&g, &b.parse_word("b a").unwrap()));
    }

    fn word_strategy(rank: usize) -> impl Strategy<Value = Word> {
        prop::collection::vec((0..rank, any::<bool>()), 1..8).prop_map(|v| {
            Word::from_letters(v.into_iter().map(|(i, inv)| crate::word::letter(i, inv)))
        })
    }

    proptest! {
        #[test]
        fn single_generator_has_rank_one(w in word_strategy(3)) {
            prop_assume!(!w.is_empty());
            prop_assert_eq!(subgroup_rank(&[w]), 1);
        }

        #[test]
        fn products_are_members(ws in prop::collection::vec(word_strategy(3), 1..4),
                                picks in prop::collection::vec((0usize..4, any::<bool>()), 0..6)) {
            let g = SubgroupGraph::from_generators(&ws);
            prop_assert!(g.is_folded_core());
            let mut prod = Word::identity();
            for (i, inv) in picks {
                let x = &ws[i % ws.len()];
                prod = prod.mul(&if inv { x.inverse() } else { x.clone() });
            }
            prop_assert!(g.contains(&prod));
        }
    }

    #[test]
    fn full_basis_has_full_rank() {
        for n in 1..5 {
            let gens: Vec<Word> = (0..n).map(Word::generator).collect();
            assert_eq!(subgroup_rank(&gens), n);
        }
    }
}
