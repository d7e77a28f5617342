//! Reduced words in a free group, endomorphisms given by basis images, and
//! the elementary machinery built on them (cyclic reduction, roots,
//! conjugators, Nielsen-reduction inversion).
//!
//! Automorphisms act on the left as ordinary functions, and
//! `compose(e1, e2)` means "apply `e1`, then `e2`". An identity written for
//! right actions as `x φ ψ` therefore reads `compose(φ, ψ)` here.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A signed generator: `+(i + 1)` is generator `i`, `-(i + 1)` its inverse.
///
/// Edge paths reuse the same encoding over edge indices.
pub type Letter = i32;

pub fn letter(index: usize, inverse: bool) -> Letter {
    let l = index as Letter + 1;
    if inverse {
        -l
    } else {
        l
    }
}

pub fn letter_index(l: Letter) -> usize {
    (l.unsigned_abs() - 1) as usize
}

/// Sort key: generator order first, positive before inverse.
pub fn letter_key(l: Letter) -> u32 {
    let base = (l.unsigned_abs() - 1) * 2;
    if l < 0 {
        base + 1
    } else {
        base
    }
}

pub fn reduce_letters<I: IntoIterator<Item = Letter>>(raw: I) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::new();
    for l in raw {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn invert_letters(w: &[Letter]) -> Vec<Letter> {
    w.iter().rev().map(|l| -l).collect()
}

/// Number of letters stripped from each end to reach the cyclic core of a
/// reduced sequence.
pub fn cyclic_strip(w: &[Letter]) -> usize {
    let mut k = 0;
    while w.len() >= 2 * k + 2 && w[k] == -w[w.len() - 1 - k] {
        k += 1;
    }
    k
}

/// Smallest period `p` of a cyclically reduced sequence with `p | len`.
pub fn primitive_period(core: &[Letter]) -> usize {
    let n = core.len();
    (1..=n)
        .find(|&p| n.is_multiple_of(p) && (p..n).all(|i| core[i] == core[i - p]))
        .unwrap_or(n)
}

/// Shortlex comparison of two letter sequences.
pub fn shortlex(a: &[Letter], b: &[Letter]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .map(|&l| letter_key(l))
            .cmp(b.iter().map(|&l| letter_key(l)))
    })
}

/// Root and exponent of a nonempty reduced sequence: `w = root^k`, `k` maximal.
pub fn root_letters(w: &[Letter]) -> (Vec<Letter>, usize) {
    let k = cyclic_strip(w);
    let core = &w[k..w.len() - k];
    let p = primitive_period(core);
    let mut root = w[..k].to_vec();
    root.extend_from_slice(&core[..p]);
    root.extend_from_slice(&w[w.len() - k..]);
    (root, core.len() / p)
}

/// Finds `x` with `x⁻¹ a x = b`, for reduced `a`, `b`.
pub fn conjugator_letters(a: &[Letter], b: &[Letter]) -> Option<Vec<Letter>> {
    let ka = cyclic_strip(a);
    let kb = cyclic_strip(b);
    let core_a = &a[ka..a.len() - ka];
    let core_b = &b[kb..b.len() - kb];
    if core_a.len() != core_b.len() {
        return None;
    }
    let n = core_a.len();
    let shift = if n == 0 {
        0
    } else {
        (0..n).find(|&s| (0..n).all(|i| core_a[(i + s) % n] == core_b[i]))?
    };
    // core_b = P⁻¹ core_a P with P = core_a[..shift]
    let ca = &a[a.len() - ka..];
    let cb = &b[b.len() - kb..];
    let raw = invert_letters(ca)
        .into_iter()
        .chain(core_a[..shift].iter().copied())
        .chain(cb.iter().copied());
    Some(reduce_letters(raw))
}

/// Ordered list of distinct generator names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Basis {
    names: Vec<String>,
}

impl Basis {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidGraph("basis must have rank at least 1".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if !valid_name(n) {
                return Err(Error::Parse { line: 0, msg: format!("invalid generator name `{n}`") });
            }
            if names[..i].contains(n) {
                return Err(Error::Parse { line: 0, msg: format!("duplicate generator `{n}`") });
            }
        }
        Ok(Basis { names })
    }

    /// Basis `a, b, c, ...` (then `x5, x6, ...`) of the given rank.
    pub fn standard(rank: usize) -> Self {
        let names = (0..rank)
            .map(|i| {
                if i < 26 {
                    ((b'a' + i as u8) as char).to_string()
                } else {
                    format!("x{i}")
                }
            })
            .collect();
        Basis { names }
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let letters = parse_tokens(text, |name| self.index_of(name))?;
        Ok(Word::from_reduced(reduce_letters(letters)))
    }

    pub fn format_word(&self, w: &Word) -> String {
        format_letters(w.letters(), |i| self.name(i))
    }
}

pub(crate) fn valid_name(n: &str) -> bool {
    !n.is_empty()
        && n != "1"
        && !n.ends_with('\'')
        && !n.starts_with('#')
        && !n.chars().any(|c| c.is_whitespace() || c == ',')
}

/// Parses the shared surface syntax: whitespace-separated names with an
/// optional trailing apostrophe; `1` is the identity.
pub(crate) fn parse_tokens(
    text: &str,
    lookup: impl Fn(&str) -> Option<usize>,
) -> Result<Vec<Letter>> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        if tok == "1" {
            continue;
        }
        let (name, inverse) = match tok.strip_suffix('\'') {
            Some(n) => (n, true),
            None => (tok, false),
        };
        let index = lookup(name)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown generator `{name}`") })?;
        out.push(letter(index, inverse));
    }
    Ok(out)
}

pub(crate) fn format_letters<'a>(letters: &[Letter], name: impl Fn(usize) -> &'a str) -> String {
    if letters.is_empty() {
        return "1".to_string();
    }
    let toks: Vec<String> = letters
        .iter()
        .map(|&l| {
            let n = name(letter_index(l));
            if l < 0 {
                format!("{n}'")
            } else {
                n.to_string()
            }
        })
        .collect();
    toks.join(" ")
}

/// A freely reduced word. The basis is carried by the surrounding context
/// (an [`Endo`], a subgroup graph, a vertex group).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity() -> Self {
        Word::default()
    }

    /// Reduces a raw signed-index sequence, checking indices against `basis`.
    pub fn reduce(raw: &[Letter], basis: &Basis) -> Result<Self> {
        for &l in raw {
            if l == 0 || letter_index(l) >= basis.rank() {
                return Err(Error::IndexOutOfRange {
                    index: if l == 0 { 0 } else { letter_index(l) },
                    rank: basis.rank(),
                });
            }
        }
        Ok(Word { letters: reduce_letters(raw.iter().copied()) })
    }

    pub fn from_letters(raw: impl IntoIterator<Item = Letter>) -> Self {
        Word { letters: reduce_letters(raw) }
    }

    pub(crate) fn from_reduced(letters: Vec<Letter>) -> Self {
        debug_assert!(letters.windows(2).all(|p| p[0] != -p[1]));
        Word { letters }
    }

    pub fn generator(index: usize) -> Self {
        Word { letters: vec![letter(index, false)] }
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

    pub fn max_index(&self) -> Option<usize> {
        self.letters.iter().map(|&l| letter_index(l)).max()
    }

    pub fn inverse(&self) -> Self {
        Word { letters: invert_letters(&self.letters) }
    }

    pub fn mul(&self, other: &Word) -> Self {
        Word::from_letters(self.letters.iter().chain(other.letters.iter()).copied())
    }

    pub fn pow(&self, k: i64) -> Self {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.letters.len() < 2 || self.letters[0] != -self.letters[self.letters.len() - 1]
    }

    /// Returns `(core, conjugator)` with `self = conjugator⁻¹ · core · conjugator`.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let k = cyclic_strip(&self.letters);
        let n = self.letters.len();
        (
            Word { letters: self.letters[k..n - k].to_vec() },
            Word { letters: self.letters[n - k..].to_vec() },
        )
    }

    /// `(root, exponent)` with `self = root^exponent` and the exponent maximal.
    pub fn proper_power_root(&self) -> Result<(Word, usize)> {
        if self.is_empty() {
            return Err(Error::EmptyWord);
        }
        let (root, k) = root_letters(&self.letters);
        Ok((Word { letters: root }, k))
    }

    /// Some `x` with `x⁻¹ · self · x = other`.
    pub fn conjugator_to(&self, other: &Word) -> Option<Word> {
        conjugator_letters(&self.letters, &other.letters).map(|letters| Word { letters })
    }

    /// If `self = base^k` for some integer `k`, returns `k`.
    pub fn power_of(&self, base: &Word) -> Option<i64> {
        if self.is_empty() {
            return Some(0);
        }
        if base.is_empty() {
            return None;
        }
        let (root, m) = base.proper_power_root().ok()?;
        let (r2, k) = self.proper_power_root().ok()?;
        let sign = if r2 == root {
            1
        } else if r2 == root.inverse() {
            -1
        } else {
            return None;
        };
        let k = k as i64 * sign;
        (k % m as i64 == 0).then(|| k / m as i64)
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        shortlex(&self.letters, &other.letters)
    }
}

/// An endomorphism of a free group, given by the images of the basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Endo {
    basis: Basis,
    images: Vec<Word>,
}

impl fmt::Display for Endo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.basis.rank())
            .map(|i| format!("{}->{}", self.basis.name(i), self.basis.format_word(&self.images[i])))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Endo {
    pub fn new(basis: Basis, images: Vec<Word>) -> Result<Self> {
        if images.len() != basis.rank() {
            return Err(Error::BasisMismatch(format!(
                "{} images for rank {}",
                images.len(),
                basis.rank()
            )));
        }
        for w in &images {
            if let Some(i) = w.max_index() {
                if i >= basis.rank() {
                    return Err(Error::IndexOutOfRange { index: i, rank: basis.rank() });
                }
            }
        }
        Ok(Endo { basis, images })
    }

    pub fn identity(basis: Basis) -> Self {
        let images = (0..basis.rank()).map(Word::generator).collect();
        Endo { basis, images }
    }

    /// `w ↦ g⁻¹ w g`.
    pub fn conjugation(basis: Basis, g: &Word) -> Self {
        let gi = g.inverse();
        let images = (0..basis.rank()).map(|i| gi.mul(&Word::generator(i)).mul(g)).collect();
        Endo { basis, images }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &Word {
        &self.images[i]
    }

    pub fn apply(&self, w: &Word) -> Result<Word> {
        if let Some(i) = w.max_index() {
            if i >= self.rank() {
                return Err(Error::BasisMismatch(format!(
                    "word uses generator {} beyond rank {}",
                    i,
                    self.rank()
                )));
            }
        }
        Ok(self.apply_unchecked(w.letters()))
    }

    pub fn apply_unchecked(&self, letters: &[Letter]) -> Word {
        let mut out: Vec<Letter> = Vec::new();
        for &l in letters {
            let img = self.images[letter_index(l)].letters();
            if l > 0 {
                push_reduced(&mut out, img.iter().copied());
            } else {
                push_reduced(&mut out, img.iter().rev().map(|x| -x));
            }
        }
        Word { letters: out }
    }

    /// `self` first, then `other`.
    pub fn compose(&self, other: &Endo) -> Result<Endo> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch("compose over different bases".into()));
        }
        let images = self.images.iter().map(|w| other.apply_unchecked(w.letters())).collect();
        Ok(Endo { basis: self.basis.clone(), images })
    }

    pub fn power(&self, m: usize) -> Endo {
        let mut out = Endo::identity(self.basis.clone());
        for _ in 0..m {
            out = out.compose(self).expect("same basis");
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, w)| *w == Word::generator(i))
    }

    /// The `h` with `self(x) = h⁻¹ x h` for every generator, if `self` is inner.
    pub fn inner_conjugator(&self) -> Option<Word> {
        if self.rank() == 1 {
            return (self.images[0] == Word::generator(0)).then(Word::identity);
        }
        // image of a single letter x is h⁻¹ x h, so h = x^j c for the
        // conjugator c from cyclic reduction
        let mut cands: Vec<(usize, Word)> = Vec::new();
        for i in 0..2 {
            let (core, c) = self.images[i].cyclic_reduce();
            if core != Word::generator(i) {
                return None;
            }
            cands.push((i, c));
        }
        let x0 = Word::generator(cands[0].0);
        // x0^j c0 = x1^k c1  <=>  c0 c1⁻¹ = x0^-j x1^k
        let d = cands[0].1.mul(&cands[1].1.inverse());
        let l = d.letters();
        let split = l.iter().take_while(|&&t| letter_index(t) == cands[0].0).count();
        if !l[split..].iter().all(|&t| letter_index(t) == cands[1].0) {
            return None;
        }
        let j = -(Word::from_letters(l[..split].iter().copied()).power_of(&x0)?);
        let h = x0.pow(j).mul(&cands[0].1);
        let hi = h.inverse();
        (0..self.rank())
            .all(|i| hi.mul(&Word::generator(i)).mul(&h) == self.images[i])
            .then_some(h)
    }

    /// Inverse by Nielsen reduction of the image tuple.
    pub fn invert(&self) -> Result<Endo> {
        let n = self.rank();
        let mut tuple: Vec<Word> = self.images.clone();
        // track[i] expresses tuple[i] as a word in the original images
        let mut track: Vec<Word> = (0..n).map(Word::generator).collect();
        loop {
            let key = nielsen_key(&tuple);
            let mut best: Option<((usize, Vec<Word>), (usize, usize, bool, i64))> = None;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for &left in &[false, true] {
                        for &e in &[1i64, -1] {
                            let tj = tuple[j].pow(e);
                            let cand = if left { tj.mul(&tuple[i]) } else { tuple[i].mul(&tj) };
                            let mut t2 = tuple.clone();
                            t2[i] = cand;
                            let k2 = nielsen_key(&t2);
                            if nielsen_less(&k2, &key)
                                && best.as_ref().is_none_or(|(bk, _)| nielsen_less(&k2, bk))
                            {
                                best = Some((k2, (i, j, left, e)));
                            }
                        }
                    }
                }
            }
            let Some((_, (i, j, left, e))) = best else { break };
            let tj = tuple[j].pow(e);
            let sj = track[j].pow(e);
            if left {
                tuple[i] = tj.mul(&tuple[i]);
                track[i] = sj.mul(&track[i]);
            } else {
                tuple[i] = tuple[i].mul(&tj);
                track[i] = track[i].mul(&sj);
            }
        }
        let mut inverse: Vec<Option<Word>> = vec![None; n];
        for (k, t) in tuple.iter().enumerate() {
            if t.len() != 1 {
                return Err(Error::NotAnAutomorphism(format!(
                    "Nielsen-reduced tuple is not a basis: {}",
                    self.basis.format_word(t)
                )));
            }
            let l = t.letters()[0];
            let idx = letter_index(l);
            if inverse[idx].is_some() {
                return Err(Error::NotAnAutomorphism("repeated generator after reduction".into()));
            }
            inverse[idx] = Some(if l > 0 { track[k].clone() } else { track[k].inverse() });
        }
        Ok(Endo {
            basis: self.basis.clone(),
            images: inverse.into_iter().map(|w| w.expect("all filled")).collect(),
        })
    }
}

fn push_reduced(out: &mut Vec<Letter>, it: impl Iterator<Item = Letter>) {
    for l in it {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
}

fn nielsen_key(t: &[Word]) -> (usize, Vec<Word>) {
    (t.iter().map(Word::len).sum(), t.to_vec())
}

fn nielsen_less(a: &(usize, Vec<Word>), b: &(usize, Vec<Word>)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Basis {
        Basis::new(["a", "b"]).unwrap()
    }

    fn w(b: &Basis, s: &str) -> Word {
        b.parse_word(s).unwrap()
    }

    fn endo(b: &Basis, imgs: &[&str]) -> Endo {
        Endo::new(b.clone(), imgs.iter().map(|s| w(b, s)).collect()).unwrap()
    }

    #[test]
    fn reduce_examples() {
        let b = ab();
        let (a, bb) = (letter(0, false), letter(1, false));
        assert!(Word::reduce(&[a, -a], &b).unwrap().is_empty());
        assert_eq!(Word::reduce(&[bb, -a, a], &b).unwrap(), w(&b, "b"));
        assert_eq!(Word::reduce(&[a, bb, -bb, a], &b).unwrap(), w(&b, "a a"));
        assert!(matches!(Word::reduce(&[letter(2, false)], &b), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn cyclic_reduce_examples() {
        let b = ab();
        assert_eq!(w(&b, "a' b a").cyclic_reduce(), (w(&b, "b"), w(&b, "a")));
        assert_eq!(w(&b, "a b").cyclic_reduce(), (w(&b, "a b"), Word::identity()));
        assert_eq!(w(&b, "b' a' b").cyclic_reduce(), (w(&b, "a'"), w(&b, "b")));
    }

    #[test]
    fn apply_and_compose() {
        let b = ab();
        let e = endo(&b, &["a", "b a"]);
        assert_eq!(e.apply(&w(&b, "b a b'")).unwrap(), w(&b, "b a b'"));
        assert_eq!(e.apply(&w(&b, "b")).unwrap(), w(&b, "b a"));
        let id = Endo::identity(b.clone());
        assert_eq!(id.apply(&w(&b, "a b' a")).unwrap(), w(&b, "a b' a"));
        assert_eq!(id.compose(&e).unwrap(), e);
        assert_eq!(e.compose(&e).unwrap(), endo(&b, &["a", "b a a"]));
    }

    #[test]
    fn conjugation_examples() {
        let b = ab();
        assert!(Endo::conjugation(b.clone(), &Word::identity()).is_identity());
        let g = Endo::conjugation(b.clone(), &w(&b, "a"));
        assert_eq!(g.apply(&w(&b, "b")).unwrap(), w(&b, "a' b a"));
        assert_eq!(g.apply(&w(&b, "a")).unwrap(), w(&b, "a"));
        // γ_g then γ_h is γ_{gh}
        let gh = Endo::conjugation(b.clone(), &w(&b, "a"))
            .compose(&Endo::conjugation(b.clone(), &w(&b, "b")))
            .unwrap();
        assert_eq!(gh, Endo::conjugation(b.clone(), &w(&b, "a b")));
    }

    #[test]
    fn invert_examples() {
        let b = ab();
        let e = endo(&b, &["a", "b a"]);
        let inv = e.invert().unwrap();
        assert_eq!(inv, endo(&b, &["a", "b a'"]));
        assert!(e.compose(&inv).unwrap().is_identity());
        assert!(Endo::identity(b.clone()).invert().unwrap().is_identity());
        assert!(matches!(endo(&b, &["a", "a"]).invert(), Err(Error::NotAnAutomorphism(_))));
    }

    #[test]
    fn roots() {
        let b = ab();
        assert_eq!(w(&b, "a a").proper_power_root().unwrap(), (w(&b, "a"), 2));
        assert_eq!(w(&b, "a b").proper_power_root().unwrap(), (w(&b, "a b"), 1));
        assert_eq!(w(&b, "a b a b").proper_power_root().unwrap(), (w(&b, "a b"), 2));
        assert_eq!(w(&b, "b' a a b").proper_power_root().unwrap(), (w(&b, "b' a b"), 2));
        assert_eq!(Word::identity().proper_power_root(), Err(Error::EmptyWord));
    }

    #[test]
    fn power_of_and_conjugator() {
        let b = ab();
        let beta = w(&b, "b a b'");
        assert_eq!(w(&b, "b a a a b'").power_of(&beta), Some(3));
        assert_eq!(w(&b, "b a' b'").power_of(&beta), Some(-1));
        assert_eq!(w(&b, "a").power_of(&beta), None);
        let x = w(&b, "a b").conjugator_to(&w(&b, "b a")).unwrap();
        assert_eq!(x.inverse().mul(&w(&b, "a b")).mul(&x), w(&b, "b a"));
        assert!(w(&b, "a").conjugator_to(&w(&b, "b")).is_none());
    }

    #[test]
    fn inner_detection() {
        let b = ab();
        let g = w(&b, "a b' a");
        assert_eq!(Endo::conjugation(b.clone(), &g).inner_conjugator(), Some(g));
        assert_eq!(endo(&b, &["a", "b a"]).inner_conjugator(), None);
        let h = w(&b, "a a b");
        assert_eq!(Endo::conjugation(b.clone(), &h).inner_conjugator(), Some(h));
    }

    #[test]
    fn surface_syntax() {
        let b = ab();
        assert_eq!(b.format_word(&w(&b, "b a b'")), "b a b'");
        assert_eq!(b.format_word(&w(&b, "1")), "1");
        assert!(b.parse_word("c").is_err());
    }
}
