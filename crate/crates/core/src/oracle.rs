//! Brute-force verifiers: fixed and periodic words, bounded similarity,
//! the finite extension construction, and conjugacy-class fixing.
//!
//! Everything here is exhaustive up to an explicit bound and re-checks each
//! answer before returning it, so bounds only limit completeness.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stallings::{subgroup_rank, SubgroupGraph};
use crate::word::{letter_key, shortlex, Basis, Endo, Letter, Word};

/// All reduced words of length ≤ `len` over `rank` generators, shortlex.
pub fn words_up_to(rank: usize, len: usize) -> Vec<Word> {
    let mut alphabet: Vec<Letter> = (1..=rank as Letter).flat_map(|i| [i, -i]).collect();
    alphabet.sort_by_key(|&l| letter_key(l));
    let mut out = vec![Word::identity()];
    let mut level = vec![Word::identity()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &level {
            let last = w.letters().last().copied();
            for &l in &alphabet {
                if last == Some(-l) {
                    continue;
                }
                let mut v = w.letters().to_vec();
                v.push(l);
                next.push(Word::from_letters(v));
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

fn sort_shortlex(ws: &mut [Word]) {
    ws.sort_by(|a, b| shortlex(a.letters(), b.letters()));
}

/// Reduced words `w` with `|w| ≤ len` and `aut(w) = w`, shortlex.
///
/// Meet in the middle: `w = p s` with `|p| = ⌈|w|/2⌉` is fixed exactly when
/// `p⁻¹ aut(p) = s aut(s)⁻¹`, so only halves are enumerated.
pub fn fixed_words(aut: &Endo, len: usize) -> Vec<Word> {
    let halves = words_up_to(aut.rank(), len.div_ceil(2));
    let keys: Vec<(Word, Word)> = halves
        .par_iter()
        .map(|p| {
            let img = aut.apply_unchecked(p.letters());
            (p.inverse().mul(&img), p.mul(&img.inverse()))
        })
        .collect();
    let mut right: HashMap<&Word, Vec<usize>> = HashMap::new();
    for (i, s) in halves.iter().enumerate() {
        if s.len() <= len / 2 {
            right.entry(&keys[i].1).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    for (i, p) in halves.iter().enumerate() {
        let Some(cands) = right.get(&keys[i].0) else { continue };
        for &j in cands {
            let s = &halves[j];
            if s.len() + 1 < p.len() || s.len() > p.len() || p.len() + s.len() > len {
                continue;
            }
            if let (Some(&x), Some(&y)) = (p.letters().last(), s.letters().first()) {
                if x == -y {
                    continue;
                }
            }
            let w = p.mul(s);
            debug_assert_eq!(aut.apply_unchecked(w.letters()), w);
            out.push(w);
        }
    }
    sort_shortlex(&mut out);
    out
}

/// Generators of the subgroup generated by `fixed_words(aut, len)`.
///
/// Fixed words `p s` whose halves share the key `p⁻¹ aut(p) = s aut(s)⁻¹`
/// satisfy `p s = (p s₀)(p₀ s₀)⁻¹(p₀ s)` for any fixed `p₀, s₀` of that key,
/// and every factor is again a fixed element of length ≤ `len`. So one word
/// per prefix plus one per suffix generate the same subgroup as the whole
/// enumeration, without listing it.
pub fn fixed_subgroup(aut: &Endo, len: usize) -> Vec<Word> {
    let long = words_up_to(aut.rank(), len.div_ceil(2));
    let short_len = len / 2;
    let keys: Vec<(Word, Word)> = long
        .par_iter()
        .map(|p| {
            let img = aut.apply_unchecked(p.letters());
            (p.inverse().mul(&img), p.mul(&img.inverse()))
        })
        .collect();
    // first suffix and first prefix seen for each key
    let mut suffix: HashMap<&Word, usize> = HashMap::new();
    for (i, s) in long.iter().enumerate() {
        if s.len() <= short_len {
            suffix.entry(&keys[i].1).or_insert(i);
        }
    }
    let mut prefix: HashMap<&Word, usize> = HashMap::new();
    let mut gens = Vec::new();
    for (i, p) in long.iter().enumerate() {
        if let Some(&j) = suffix.get(&keys[i].0) {
            prefix.entry(&keys[i].0).or_insert(i);
            gens.push(p.mul(&long[j]));
        }
    }
    for (i, s) in long.iter().enumerate() {
        if s.len() > short_len {
            continue;
        }
        if let Some(&j) = prefix.get(&keys[i].1) {
            gens.push(long[j].mul(s));
        }
    }
    let mut sg = SubgroupGraph::new();
    let mut basis = Vec::new();
    for w in gens {
        debug_assert_eq!(aut.apply_unchecked(w.letters()), w);
        if !w.is_empty() && !sg.contains(&w) {
            sg.add_generator(&w);
            basis.push(w);
        }
    }
    basis
}

/// `subgroup_rank(fixed_words(aut, len))`, computed via `fixed_subgroup`.
pub fn fixed_rank(aut: &Endo, len: usize) -> usize {
    subgroup_rank(&fixed_subgroup(aut, len))
}

/// `(w, m)` for words of length ≤ `len` fixed by `aut^m`, `m ≤ max_period`
/// minimal, shortlex by word.
pub fn periodic_words(aut: &Endo, len: usize, max_period: usize) -> Vec<(Word, usize)> {
    let per_power: Vec<Vec<Word>> = (1..=max_period)
        .into_par_iter()
        .map(|m| fixed_words(&aut.power(m), len))
        .collect();
    let mut best: HashMap<Word, usize> = HashMap::new();
    for (i, ws) in per_power.into_iter().enumerate() {
        for w in ws {
            best.entry(w).or_insert(i + 1);
        }
    }
    let mut out: Vec<(Word, usize)> = best.into_iter().collect();
    out.sort_by(|a, b| shortlex(a.0.letters(), b.0.letters()));
    out
}

/// A word of length ≤ `len` fixed by `aut^m` (`2 ≤ m ≤ max_period`) but not
/// by `aut`, if any. `None` means `periodic_words(aut, len, max_period)` has
/// only period-one entries: the generators of each `⟨Fix(aut^m) ∩ B_len⟩`
/// are fixed by `aut` exactly when the whole subgroup is.
pub fn proper_periodic(aut: &Endo, len: usize, max_period: usize) -> Option<(Word, usize)> {
    let found: Vec<Option<(Word, usize)>> = (2..=max_period)
        .into_par_iter()
        .map(|m| {
            fixed_subgroup(&aut.power(m), len)
                .into_iter()
                .find(|w| aut.apply_unchecked(w.letters()) != *w)
                .map(|w| (w, m))
        })
        .collect();
    found.into_iter().flatten().next()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Similarity {
    /// `φ = γ_g ψ γ_{g⁻¹}` with this `g`.
    Witness(Word),
    /// Same outer class, but no `g` with `|g| ≤ bound`.
    NoWitness(usize),
    DifferentOuterClass,
}

/// `γ_g ψ γ_{g⁻¹}` in the right-action order (`γ_g` applied first).
pub fn conjugate_by(psi: &Endo, g: &Word) -> Endo {
    let b = psi.basis().clone();
    Endo::conjugation(b.clone(), g)
        .compose(psi)
        .and_then(|x| x.compose(&Endo::conjugation(b, &g.inverse())))
        .expect("same basis")
}

pub fn similar_bounded(phi: &Endo, psi: &Endo, bound: usize) -> Result<Similarity> {
    if phi.basis() != psi.basis() {
        return Err(Error::BasisMismatch("similarity over different bases".into()));
    }
    if phi.compose(&psi.invert()?)?.inner_conjugator().is_none() {
        return Ok(Similarity::DifferentOuterClass);
    }
    // φ = γ_g ψ γ_{g⁻¹} means φ(x) = h⁻¹ ψ(x) h with h = ψ(g) g⁻¹; one
    // generator is a cheap filter before the full comparison
    let filter = psi.rank() >= 2;
    for g in words_up_to(psi.rank(), bound) {
        if filter {
            let h = psi.apply_unchecked(g.letters()).mul(&g.inverse());
            let phi_x0 = h.inverse().mul(psi.image(0)).mul(&h);
            if phi_x0 != *phi.image(0) {
                continue;
            }
        }
        if conjugate_by(psi, &g) == *phi {
            return Ok(Similarity::Witness(g));
        }
    }
    Ok(Similarity::NoWitness(bound))
}

fn extended_basis(b: &Basis, extra: usize) -> Result<Basis> {
    let n = b.rank();
    if *b == Basis::standard(n) {
        return Ok(Basis::standard(n + extra));
    }
    let mut names: Vec<String> = b.names().to_vec();
    let mut i = 1;
    while names.len() < n + extra {
        let cand = format!("x{i}");
        if !names.contains(&cand) {
            names.push(cand);
        }
        i += 1;
    }
    Basis::new(names)
}

/// The automorphism of `F_{n+k-1}` restricting to `φ_1` on `F_n` and sending
/// each new generator `x_j` to `x_j g_j`; requires `φ_j γ_{g_j} = φ_1`.
pub fn extend_by_conjugators(reps: &[Endo], conjugators: &[Word]) -> Result<Endo> {
    let Some(first) = reps.first() else {
        return Err(Error::PreconditionFailed("no representatives".into()));
    };
    if conjugators.len() + 1 != reps.len() {
        return Err(Error::PreconditionFailed(format!(
            "{} representatives need {} conjugators, got {}",
            reps.len(),
            reps.len() - 1,
            conjugators.len()
        )));
    }
    let n = first.rank();
    for (j, (phi, g)) in reps[1..].iter().zip(conjugators).enumerate() {
        if phi.basis() != first.basis() {
            return Err(Error::BasisMismatch(format!("representative {} has a different basis", j + 2)));
        }
        if g.max_index().is_some_and(|i| i >= n) {
            return Err(Error::IndexOutOfRange { index: g.max_index().unwrap_or(0), rank: n });
        }
        if phi.compose(&Endo::conjugation(first.basis().clone(), g))? != *first {
            return Err(Error::PreconditionFailed(format!(
                "representative {} composed with conjugation by {} is not the first",
                j + 2,
                first.basis().format_word(g)
            )));
        }
    }
    let basis = extended_basis(first.basis(), reps.len() - 1)?;
    let mut images: Vec<Word> = first.images().to_vec();
    for (j, g) in conjugators.iter().enumerate() {
        images.push(Word::generator(n + j).mul(g));
    }
    Endo::new(basis, images)
}

#[derive(Debug, Clone)]
pub struct ExtensionReport {
    pub extension: Endo,
    pub fixed: Vec<Word>,
    /// Generators of `Fix φ_1 ∗ x_j Fix φ_j x_j⁻¹ ∗ …` found up to the bound.
    pub factors: Vec<Word>,
    pub all_inside: bool,
    pub fixed_rank: usize,
}

/// Builds the extension and checks that its fixed words up to `len` lie in
/// the free product of the factor fixed subgroups.
pub fn check_extension(reps: &[Endo], conjugators: &[Word], len: usize) -> Result<ExtensionReport> {
    let extension = extend_by_conjugators(reps, conjugators)?;
    let n = reps[0].rank();
    let mut factors = fixed_words(&reps[0], len);
    for (j, phi) in reps[1..].iter().enumerate() {
        let x = Word::generator(n + j);
        factors.extend(fixed_words(phi, len).iter().map(|w| x.mul(w).mul(&x.inverse())));
    }
    factors.retain(|w| !w.is_empty());
    let fixed = fixed_words(&extension, len);
    let sg = SubgroupGraph::from_generators(&factors);
    let all_inside = fixed.iter().all(|w| sg.contains(w));
    let fixed_rank = subgroup_rank(&fixed);
    Ok(ExtensionReport { extension, fixed, factors, all_inside, fixed_rank })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFix {
    /// `u = g⁻¹ w g`.
    pub conjugator: Word,
    pub word: Word,
    /// A representative of the outer class fixing `u`.
    pub representative: Endo,
    pub fixed_rank: usize,
}

fn class_invariant(aut: &Endo, w: &Word) -> Option<Word> {
    w.conjugator_to(&aut.apply_unchecked(w.letters()))
}

/// Finds a conjugate of `w` fixed by a representative of the outer class
/// whose fixed words up to `len` have rank ≥ 2. At most `bound` candidate
/// representatives are tried.
pub fn fixes_conjugacy_class(aut: &Endo, w: &Word, bound: usize, len: usize) -> Result<ClassFix> {
    if w.max_index().is_some_and(|i| i >= aut.rank()) {
        return Err(Error::BasisMismatch("word uses generators beyond the rank".into()));
    }
    if w.is_empty() {
        return Err(Error::EmptyWord);
    }
    class_invariant(aut, w).ok_or(Error::ClassNotInvariant)?;
    let basis = aut.basis().clone();
    // powers of the root commute with u, so γ_{ρ^k} keeps it fixed
    let ks = |t: i64| if t == 0 { vec![0] } else { vec![t, -t] };
    let mut tried = 0;
    for cost in 0..=bound as i64 {
        for g in words_up_to(aut.rank(), cost as usize).iter() {
            let u = g.inverse().mul(w).mul(g);
            let h = class_invariant(aut, &u).expect("class is invariant");
            let psi = aut.compose(&Endo::conjugation(basis.clone(), &h.inverse()))?;
            let (rho, _) = u.proper_power_root()?;
            for k in ks(cost - g.len() as i64) {
                tried += 1;
                if tried > bound {
                    return Err(Error::BoundExhausted { height: 0, bound });
                }
                let rep = psi.compose(&Endo::conjugation(basis.clone(), &rho.pow(k)))?;
                debug_assert_eq!(rep.apply_unchecked(u.letters()), u);
                let fixed = fixed_words(&rep, len);
                let fixed_rank = subgroup_rank(&fixed);
                if fixed_rank >= 2 {
                    return Ok(ClassFix { conjugator: g.clone(), word: u, representative: rep, fixed_rank });
                }
            }
        }
    }
    Err(Error::BoundExhausted { height: 0, bound })
}

/// Shortlex comparison helper for callers sorting mixed outputs.
pub fn shortlex_cmp(a: &Word, b: &Word) -> Ordering {
    shortlex(a.letters(), b.letters())
}
