//! One-dimensional self-similar iterated function systems.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::number::{common_mode, max_abs, Approx, Exact, Literal, NumberMode, Real};

/// Default cap on the number of words enumerated at one level.
pub const DEFAULT_WORD_BUDGET: u128 = 1 << 22;

/// `x -> ratio * x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap<T> {
    ratio: T,
    offset: T,
}

impl<T: Real> AffineMap<T> {
    pub fn new(ratio: T, offset: T) -> Result<Self> {
        let abs = ratio.abs();
        if abs.is_zero() || abs >= T::one() {
            return Err(Error::InvalidMap(format!(
                "ratio {} must satisfy 0 < |r| < 1",
                ratio.render()
            )));
        }
        Ok(Self { ratio, offset })
    }

    /// The empty-word map. It is not a contraction and is rejected by
    /// [`Ifs::new`].
    pub fn identity() -> Self {
        Self { ratio: T::one(), offset: T::zero() }
    }

    pub fn ratio(&self) -> &T {
        &self.ratio
    }

    pub fn offset(&self) -> &T {
        &self.offset
    }

    pub fn is_contraction(&self) -> bool {
        let abs = self.ratio.abs();
        !abs.is_zero() && abs < T::one()
    }

    pub fn apply(&self, x: &T) -> T {
        self.ratio.clone() * x.clone() + self.offset.clone()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        Self {
            ratio: self.ratio.clone() * inner.ratio.clone(),
            offset: self.ratio.clone() * inner.offset.clone() + self.offset.clone(),
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.ratio.as_f64(), self.offset.as_f64())
    }
}

/// `x -> g1(g2(x))`.
pub fn compose<T: Real>(g1: &AffineMap<T>, g2: &AffineMap<T>) -> AffineMap<T> {
    g1.compose(g2)
}

/// A finite word over the symbol alphabet `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self(symbols)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Index of this word in the lexicographic enumeration of `Λ^len`.
    pub fn rank(&self, alphabet: usize) -> usize {
        self.0.iter().fold(0, |acc, &s| acc * alphabet + s)
    }

    /// Inverse of [`Word::rank`].
    pub fn unrank(mut index: usize, alphabet: usize, len: usize) -> Word {
        let mut v = vec![0; len];
        for slot in v.iter_mut().rev() {
            *slot = index % alphabet;
            index /= alphabet;
        }
        Word(v)
    }
}

impl Deref for Word {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

impl<const N: usize> From<[usize; N]> for Word {
    fn from(v: [usize; N]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

/// Number of words of length `len` over `alphabet` symbols, checked against `budget`.
pub fn word_count(alphabet: usize, len: usize, budget: u128) -> Result<usize> {
    let needed = (alphabet as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::Budget { needed, budget });
    }
    Ok(needed as usize)
}

/// All words of length `len`, in lexicographic order.
pub fn words(alphabet: usize, len: usize, budget: u128) -> Result<impl Iterator<Item = Word>> {
    let count = word_count(alphabet, len, budget)?;
    Ok((0..count).map(move |i| Word::unrank(i, alphabet, len)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interval<T = f64> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidParameter("interval with lo > hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn diam(&self) -> T {
        self.hi.clone() - self.lo.clone()
    }

    pub fn contains(&self, x: &T) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn to_f64(&self) -> Interval<f64> {
        Interval { lo: self.lo.as_f64(), hi: self.hi.as_f64() }
    }
}

/// A self-similar IFS `{x -> r_λ x + a_λ}` indexed by `0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ifs<T> {
    maps: Vec<AffineMap<T>>,
}

impl<T: Real> Ifs<T> {
    pub fn new(maps: Vec<AffineMap<T>>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidMap("an IFS needs at least one map".into()));
        }
        if let Some(i) = maps.iter().position(|m| !m.is_contraction()) {
            return Err(Error::InvalidMap(format!("map {i} is not a contraction")));
        }
        Ok(Self { maps })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let maps = pairs
            .into_iter()
            .map(|(r, a)| AffineMap::new(r, a))
            .collect::<Result<Vec<_>>>()?;
        Self::new(maps)
    }

    pub fn mode(&self) -> NumberMode {
        T::MODE
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[AffineMap<T>] {
        &self.maps
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        match w.iter().position(|&s| s >= self.len()) {
            Some(position) => Err(Error::InvalidWord {
                symbol: w[position],
                position,
                alphabet: self.len(),
            }),
            None => Ok(()),
        }
    }

    /// `φ_{w_1} ∘ … ∘ φ_{w_n}`; the empty word yields the identity sentinel.
    pub fn word_map(&self, w: &Word) -> Result<AffineMap<T>> {
        self.check_word(w)?;
        Ok(w.iter().rev().fold(AffineMap::identity(), |acc, &s| self.maps[s].compose(&acc)))
    }

    pub fn max_ratio(&self) -> T {
        max_abs(self.maps.iter().map(|m| m.ratio.clone()))
    }

    /// `[-R, R]` with `R = max|a| / (1 - max|r|)`; forward-invariant, so it contains the attractor.
    pub fn attractor_bound(&self) -> Interval<T> {
        let radius = max_abs(self.maps.iter().map(|m| m.offset.clone())) / (T::one() - self.max_ratio());
        Interval { lo: -radius.clone(), hi: radius }
    }

    /// `φ_prefix(0)` and a bound on its distance to `Πω` for every `ω` extending `prefix`.
    pub fn code_point(&self, prefix: &Word) -> Result<(T, T)> {
        if prefix.is_empty() {
            return Err(Error::EmptyWord);
        }
        let g = self.word_map(prefix)?;
        let bound = self.attractor_bound();
        let radius = bound.hi.clone();
        let mut err = radius + bound.diam();
        for _ in 0..prefix.len() {
            err = err * self.max_ratio();
        }
        Ok((g.offset, err))
    }

    /// The IFS `{φ_w : w ∈ Λ^m}` over the lexicographically ordered block alphabet.
    pub fn block(&self, m: usize, budget: u128) -> Result<Ifs<T>> {
        if m == 0 {
            return Err(Error::InvalidParameter("block length must be at least 1".into()));
        }
        let maps = self.level_maps(m, budget)?;
        Ok(Ifs { maps })
    }

    /// `word_map` of every length-`n` word, in lexicographic order.
    pub fn level_maps(&self, n: usize, budget: u128) -> Result<Vec<AffineMap<T>>> {
        word_count(self.len(), n, budget)?;
        let mut level = vec![AffineMap::identity()];
        // Build by appending on the right: φ_{w·λ} = φ_w ∘ φ_λ keeps lexicographic order.
        for _ in 0..n {
            let mut next = Vec::with_capacity(level.len() * self.len());
            for g in &level {
                for m in &self.maps {
                    next.push(g.compose(m));
                }
            }
            level = next;
        }
        Ok(level)
    }

    pub fn ratios_f64(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.ratio.as_f64()).collect()
    }

    pub fn to_f64_maps(&self) -> Vec<(f64, f64)> {
        self.maps.iter().map(AffineMap::to_f64).collect()
    }
}

impl Ifs<Exact> {
    pub fn exact(pairs: &[(Exact, Exact)]) -> Result<Self> {
        Self::from_pairs(pairs.iter().cloned())
    }
}

/// An IFS in whichever number mode its inputs selected.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyIfs {
    Exact(Ifs<Exact>),
    Approx(Ifs<Approx>),
}

impl AnyIfs {
    /// Builds from `(ratio, offset)` literals; all literals must share one mode.
    pub fn from_literals(pairs: &[(Literal, Literal)]) -> Result<Self> {
        let mode = common_mode(pairs.iter().flat_map(|(r, a)| [r, a]))?;
        match mode {
            NumberMode::Exact => Ok(AnyIfs::Exact(Ifs::from_pairs(
                pairs.iter().map(|(r, a)| (r.value().clone(), a.value().clone())),
            )?)),
            NumberMode::Approx => Ok(AnyIfs::Approx(Ifs::from_pairs(
                pairs.iter().map(|(r, a)| (Approx::from_rational(r.value()), Approx::from_rational(a.value()))),
            )?)),
        }
    }

    /// Convenience constructor from `"p/q"` or decimal strings.
    pub fn parse<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let lits = pairs
            .iter()
            .map(|(r, a)| Ok((r.as_ref().parse()?, a.as_ref().parse()?)))
            .collect::<Result<Vec<(Literal, Literal)>>>()?;
        Self::from_literals(&lits)
    }

    pub fn mode(&self) -> NumberMode {
        match self {
            AnyIfs::Exact(_) => NumberMode::Exact,
            AnyIfs::Approx(_) => NumberMode::Approx,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyIfs::Exact(s) => s.len(),
            AnyIfs::Approx(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64_maps(&self) -> Vec<(f64, f64)> {
        match self {
            AnyIfs::Exact(s) => s.to_f64_maps(),
            AnyIfs::Approx(s) => s.to_f64_maps(),
        }
    }

    pub fn ratios_f64(&self) -> Vec<f64> {
        self.to_f64_maps().into_iter().map(|(r, _)| r).collect()
    }

    pub fn attractor_bound(&self) -> Interval<f64> {
        match self {
            AnyIfs::Exact(s) => s.attractor_bound().to_f64(),
            AnyIfs::Approx(s) => s.attractor_bound().to_f64(),
        }
    }

    pub fn max_ratio(&self) -> f64 {
        match self {
            AnyIfs::Exact(s) => s.max_ratio().as_f64(),
            AnyIfs::Approx(s) => s.max_ratio().as_f64(),
        }
    }

    /// Shared contraction ratio, if every map has the same one.
    pub fn homogeneous_ratio(&self) -> Option<f64> {
        let rs = self.ratios_f64();
        let first = rs[0];
        rs.iter().all(|&r| r == first).then_some(first)
    }
}

impl From<Ifs<Exact>> for AnyIfs {
    fn from(s: Ifs<Exact>) -> Self {
        AnyIfs::Exact(s)
    }
}

impl From<Ifs<Approx>> for AnyIfs {
    fn from(s: Ifs<Approx>) -> Self {
        AnyIfs::Approx(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational as q;

    fn cantor() -> Ifs<Exact> {
        Ifs::exact(&[(q(1, 3), q(0, 1)), (q(1, 3), q(2, 3))]).unwrap()
    }

    fn map(r: Exact, a: Exact) -> AffineMap<Exact> {
        AffineMap::new(r, a).unwrap()
    }

    #[test]
    fn compose_examples() {
        let g = compose(&map(q(1, 3), q(0, 1)), &map(q(1, 3), q(2, 3)));
        assert_eq!(g, map(q(1, 9), q(2, 9)));
        let g = compose(&map(q(1, 2), q(0, 1)), &map(q(1, 2), q(0, 1)));
        assert_eq!(g, map(q(1, 4), q(0, 1)));
        let g = compose(&map(q(-1, 2), q(1, 1)), &map(q(1, 3), q(3, 1)));
        assert_eq!(g, map(q(-1, 6), q(-1, 2)));
    }

    #[test]
    fn word_map_examples() {
        let c = cantor();
        assert_eq!(c.word_map(&Word::from([1, 0])).unwrap(), map(q(1, 9), q(2, 3)));
        assert_eq!(c.word_map(&Word::from([0, 1])).unwrap(), map(q(1, 9), q(2, 9)));
        let id = c.word_map(&Word::empty()).unwrap();
        assert_eq!((id.ratio().clone(), id.offset().clone()), (q(1, 1), q(0, 1)));
        assert!(!id.is_contraction());
        assert!(matches!(
            c.word_map(&Word::from([0, 2])),
            Err(Error::InvalidWord { symbol: 2, position: 1, alphabet: 2 })
        ));
    }

    #[test]
    fn attractor_bound_examples() {
        let b = cantor().attractor_bound();
        assert_eq!((b.lo, b.hi), (q(-1, 1), q(1, 1)));
        let b = Ifs::exact(&[(q(1, 2), q(0, 1))]).unwrap().attractor_bound();
        assert_eq!((b.lo, b.hi), (q(0, 1), q(0, 1)));
        let b = Ifs::exact(&[(q(1, 2), q(1, 1)), (q(1, 2), q(-1, 1))]).unwrap().attractor_bound();
        assert_eq!((b.lo, b.hi), (q(-2, 1), q(2, 1)));
    }

    #[test]
    fn code_point_examples() {
        let c = cantor();
        let (v, _) = c.code_point(&Word::from([1, 1])).unwrap();
        assert_eq!(v, q(8, 9));
        for n in 1..6 {
            let (v, _) = c.code_point(&Word::new(vec![0; n])).unwrap();
            assert_eq!(v, q(0, 1));
        }
        let (_, err) = c.code_point(&Word::new(vec![1; 5])).unwrap();
        assert_eq!(err, q(1, 81));
        assert_eq!(c.code_point(&Word::empty()), Err(Error::EmptyWord));
    }

    #[test]
    fn block_examples() {
        let b = cantor().block(2, DEFAULT_WORD_BUDGET).unwrap();
        let offsets: Vec<_> = b.maps().iter().map(|m| m.offset().clone()).collect();
        assert_eq!(offsets, vec![q(0, 1), q(2, 9), q(2, 3), q(8, 9)]);
        assert!(b.maps().iter().all(|m| *m.ratio() == q(1, 9)));
        assert_eq!(cantor().block(1, DEFAULT_WORD_BUDGET).unwrap(), cantor());
        let halves = Ifs::exact(&[(q(1, 2), q(0, 1)), (q(1, 2), q(1, 1))]).unwrap();
        let b = halves.block(2, DEFAULT_WORD_BUDGET).unwrap();
        let offsets: Vec<_> = b.maps().iter().map(|m| m.offset().clone()).collect();
        assert_eq!(offsets, vec![q(0, 1), q(1, 2), q(1, 1), q(3, 2)]);
        assert!(matches!(cantor().block(30, 1000), Err(Error::Budget { .. })));
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(AffineMap::new(q(1, 1), q(0, 1)).is_err());
        assert!(AffineMap::new(q(0, 1), q(0, 1)).is_err());
        assert!(AffineMap::new(q(-3, 2), q(0, 1)).is_err());
        assert!(Ifs::<Exact>::new(vec![]).is_err());
        assert!(Ifs::new(vec![AffineMap::<Exact>::identity()]).is_err());
    }

    #[test]
    fn parse_selects_mode() {
        let s = AnyIfs::parse(&[("1/3", "0"), ("1/3", "2/3")]).unwrap();
        assert_eq!(s.mode(), NumberMode::Exact);
        let s = AnyIfs::parse(&[("0.5", "0.0"), ("0.25", "1.0")]).unwrap();
        assert_eq!(s.mode(), NumberMode::Approx);
        assert!(matches!(AnyIfs::parse(&[("1/3", "0.5")]), Err(Error::MixedMode(_))));
    }

    #[test]
    fn word_rank_roundtrip() {
        for i in 0..27 {
            assert_eq!(Word::unrank(i, 3, 3).rank(3), i);
        }
    }
}
