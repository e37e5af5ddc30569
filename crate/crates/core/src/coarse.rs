//! Blocked Bernoulli coarse-graining of a symbolic measure.
//!
//! Length-`m` words whose mass (and, in the full variant, contraction) is
//! typical for `μ` keep their mass; every other word gets the tiny weight
//! `2^{-m/ε}`. After normalizing, the weights define a Bernoulli measure on
//! the blocked alphabet `Λ^m`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{word_count, AnyIfs, Word};
use crate::lq::compensated_sum;
use crate::measure::SymbolicMeasure;

/// Slack applied toward inclusion when testing the log-domain bounds.
const MEMBERSHIP_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Mass and contraction conditions.
    Full,
    /// Mass condition only.
    Homogeneous,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "homogeneous" => Ok(Variant::Homogeneous),
            other => Err(Error::Parse(format!("unknown variant '{other}' (expected full or homogeneous)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Homogeneous => "homogeneous",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoarseGraining {
    pub m: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub variant: Variant,
    pub alphabet: usize,
    pub entropy_bits: f64,
    pub lyapunov_bits: f64,
    /// Membership in the good set, indexed by word rank.
    pub good: Vec<bool>,
    /// `p_w`, indexed by word rank.
    pub weights: Vec<f64>,
    /// `|r_w|`, indexed by word rank.
    pub block_ratios: Vec<f64>,
    /// `c`, chosen so the weights sum to one.
    pub normalizer: f64,
    /// `μ` of the union of good cylinders.
    pub good_mass: f64,
}

impl CoarseGraining {
    pub fn good_count(&self) -> usize {
        self.good.iter().filter(|&&g| g).count()
    }

    pub fn good_words(&self) -> Vec<Word> {
        self.good
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(i, _)| Word::unrank(i, self.alphabet, self.m))
            .collect()
    }

    pub fn is_good(&self, w: &Word) -> bool {
        w.len() == self.m && w.iter().all(|&s| s < self.alphabet) && self.good[w.rank(self.alphabet)]
    }

    pub fn weight(&self, w: &Word) -> Option<f64> {
        (w.len() == self.m && w.iter().all(|&s| s < self.alphabet)).then(|| self.weights[w.rank(self.alphabet)])
    }

    pub fn weight_sum(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// `good_mass > 1 - δ`.
    pub fn good_mass_ok(&self) -> bool {
        self.good_mass > 1.0 - self.delta
    }

    /// `1/ε > log2 |Λ|`.
    pub fn epsilon_ok(&self) -> bool {
        1.0 / self.epsilon > (self.alphabet as f64).log2()
    }

    /// Both conditions under which the normalizer is known to lie in `[1/2, 2]`.
    pub fn hypotheses_hold(&self) -> bool {
        self.good_mass_ok() && self.epsilon_ok()
    }

    pub fn c_in_bounds(&self) -> bool {
        (0.5..=2.0).contains(&self.normalizer)
    }

    /// The reweighted vector as a Bernoulli measure on the blocked alphabet.
    pub fn blocked_measure(&self) -> Result<SymbolicMeasure> {
        blocked_measure(self)
    }
}

struct Classified {
    log_mass: Vec<f64>,
    log_ratio: Vec<f64>,
    good: Vec<bool>,
    entropy_bits: f64,
    lyapunov_bits: f64,
}

fn classify(
    mu: &SymbolicMeasure,
    ifs: &AnyIfs,
    m: usize,
    delta: f64,
    variant: Variant,
    budget: u128,
) -> Result<Classified> {
    if m == 0 {
        return Err(Error::InvalidParameter("block length m must be at least 1".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let k = mu.len();
    if k != ifs.len() {
        return Err(Error::AlphabetMismatch { measure: k, system: ifs.len() });
    }
    let count = word_count(k, m, budget)?;
    let log_r: Vec<f64> = ifs.ratios_f64().iter().map(|r| r.abs().log2()).collect();
    let h = mu.entropy();
    let chi = mu.lyapunov(&ifs.ratios_f64())?;
    let mf = m as f64;
    let (lo, hi) = (-mf * (h + delta) - MEMBERSHIP_SLACK, -mf * (h - delta) + MEMBERSHIP_SLACK);
    let ratio_floor = mf * (chi - delta) - MEMBERSHIP_SLACK;

    let rows: Vec<(f64, f64, bool)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let w = Word::unrank(i, k, m);
            let lm = mu.log2_cylinder_mass(&w).expect("word symbols are in range");
            let lr: f64 = w.iter().map(|&s| log_r[s]).sum();
            let mass_ok = lm >= lo && lm <= hi;
            let ratio_ok = variant == Variant::Homogeneous || lr >= ratio_floor;
            (lm, lr, mass_ok && ratio_ok)
        })
        .collect();

    let mut out = Classified {
        log_mass: Vec::with_capacity(count),
        log_ratio: Vec::with_capacity(count),
        good: Vec::with_capacity(count),
        entropy_bits: h,
        lyapunov_bits: chi,
    };
    for (lm, lr, g) in rows {
        out.log_mass.push(lm);
        out.log_ratio.push(lr);
        out.good.push(g);
    }
    Ok(out)
}

/// The good set: words with `2^{-m(h+δ)} ≤ μ[w] ≤ 2^{-m(h-δ)}` and, for the
/// full variant, `|r_w| ≥ 2^{m(χ-δ)}`. Lexicographic order.
pub fn good_words(
    mu: &SymbolicMeasure,
    ifs: &AnyIfs,
    m: usize,
    delta: f64,
    variant: Variant,
    budget: u128,
) -> Result<Vec<Word>> {
    let c = classify(mu, ifs, m, delta, variant, budget)?;
    let k = mu.len();
    Ok(c.good
        .iter()
        .enumerate()
        .filter(|(_, &g)| g)
        .map(|(i, _)| Word::unrank(i, k, m))
        .collect())
}

/// Builds the reweighted block vector and its normalizer.
///
/// When `good_mass > 1 - δ`, `1/ε > log2|Λ|` and `δ ≤ 1/2`, the normalizer
/// must lie in `[1/2, 2]`; a violation is reported as a cross-check error.
pub fn coarse_bernoulli(
    mu: &SymbolicMeasure,
    ifs: &AnyIfs,
    m: usize,
    delta: f64,
    epsilon: f64,
    variant: Variant,
    budget: u128,
) -> Result<CoarseGraining> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let c = classify(mu, ifs, m, delta, variant, budget)?;
    let log_bad = -(m as f64) / epsilon;
    let good_mass = compensated_sum(c.log_mass.iter().zip(&c.good).filter(|(_, &g)| g).map(|(lm, _)| lm.exp2()));
    let bad_count = c.good.iter().filter(|&&g| !g).count();
    let bad_mass = bad_count as f64 * log_bad.exp2();
    let total = good_mass + bad_mass;
    if !(total > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "no good words and 2^(-m/epsilon) underflows (m = {m}, epsilon = {epsilon})"
        )));
    }
    let normalizer = 1.0 / total;
    let weights = c
        .log_mass
        .iter()
        .zip(&c.good)
        .map(|(lm, &g)| if g { lm.exp2() * normalizer } else { log_bad.exp2() * normalizer })
        .collect();
    let block_ratios = c.log_ratio.iter().map(|lr| lr.exp2()).collect();

    let cg = CoarseGraining {
        m,
        delta,
        epsilon,
        variant,
        alphabet: mu.len(),
        entropy_bits: c.entropy_bits,
        lyapunov_bits: c.lyapunov_bits,
        good: c.good,
        weights,
        block_ratios,
        normalizer,
        good_mass,
    };
    if cg.hypotheses_hold() && delta <= 0.5 && !cg.c_in_bounds() {
        return Err(Error::CrossCheck(format!(
            "normalizer c = {normalizer} outside [1/2, 2] although good_mass = {good_mass} > 1 - delta and 1/epsilon > log2|alphabet|"
        )));
    }
    Ok(cg)
}

/// Bernoulli measure on `Λ^m` with the coarse-grained weights; pair it with
/// `Ifs::block(m)`.
pub fn blocked_measure(cg: &CoarseGraining) -> Result<SymbolicMeasure> {
    SymbolicMeasure::bernoulli(cg.weights.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::DEFAULT_WORD_BUDGET;

    fn cantor() -> AnyIfs {
        AnyIfs::parse(&[("1/3", "0"), ("1/3", "2/3")]).unwrap()
    }

    fn bern(p: &[f64]) -> SymbolicMeasure {
        SymbolicMeasure::bernoulli(p.to_vec()).unwrap()
    }

    #[test]
    fn uniform_cantor_keeps_every_word() {
        for m in 1..=6 {
            let w = good_words(&bern(&[0.5, 0.5]), &cantor(), m, 0.1, Variant::Full, DEFAULT_WORD_BUDGET).unwrap();
            assert_eq!(w.len(), 1 << m);
        }
        let cg = coarse_bernoulli(&bern(&[0.5, 0.5]), &cantor(), 4, 0.1, 0.1, Variant::Full, DEFAULT_WORD_BUDGET)
            .unwrap();
        assert_eq!(cg.normalizer, 1.0);
        assert!(cg.weights.iter().all(|&p| p == 1.0 / 16.0));
        assert_eq!(cg.good_mass, 1.0);
    }

    #[test]
    fn skewed_measure_drops_all_zeros_word() {
        let mu = bern(&[0.9, 0.1]);
        let good = good_words(&mu, &cantor(), 10, 0.05, Variant::Full, DEFAULT_WORD_BUDGET).unwrap();
        assert!(!good.contains(&Word::new(vec![0; 10])));
        // Brute force over all 1024 words.
        let h = mu.entropy();
        assert!((h - 0.468_995_593_589_281).abs() < 1e-12);
        let chi = mu.lyapunov(&[1.0 / 3.0; 2]).unwrap();
        let expected: Vec<Word> = (0..1024)
            .map(|i| Word::unrank(i, 2, 10))
            .filter(|w| {
                let mass = mu.cylinder_mass(w).unwrap();
                let r = (1.0f64 / 3.0).powi(10);
                (-10.0 * (h + 0.05)).exp2() <= mass && mass <= (-10.0 * (h - 0.05)).exp2() && r >= (10.0 * (chi - 0.05)).exp2()
            })
            .collect();
        assert_eq!(good, expected);
        assert!(good.iter().all(|w| w.iter().filter(|&&s| s == 1).count() == 1));
    }

    #[test]
    fn skewed_measure_normalizes() {
        let cg = coarse_bernoulli(&bern(&[0.9, 0.1]), &cantor(), 10, 0.05, 0.1, Variant::Full, DEFAULT_WORD_BUDGET)
            .unwrap();
        assert!((cg.weight_sum() - 1.0).abs() <= 1e-12);
        // Only the ten words with a single 1 are typical at this block length.
        assert_eq!(cg.good_count(), 10);
        assert!(!cg.good_mass_ok());
        assert!(cg.epsilon_ok());
    }

    #[test]
    fn weights_follow_the_two_case_formula() {
        let mu = bern(&[0.7, 0.3]);
        let cg = coarse_bernoulli(&mu, &cantor(), 8, 0.1, 0.1, Variant::Full, DEFAULT_WORD_BUDGET).unwrap();
        for (i, (&p, &g)) in cg.weights.iter().zip(&cg.good).enumerate() {
            let w = Word::unrank(i, 2, 8);
            let expect = if g { mu.cylinder_mass(&w).unwrap() } else { (-80.0f64).exp2() };
            assert!((p / cg.normalizer - expect).abs() <= 1e-15 * expect.max(1e-300), "{w}");
        }
    }

    #[test]
    fn large_epsilon_only_clears_the_flag() {
        let cg = coarse_bernoulli(&bern(&[0.5, 0.5]), &cantor(), 4, 0.1, 2.0, Variant::Full, DEFAULT_WORD_BUDGET)
            .unwrap();
        assert!(!cg.epsilon_ok());
        assert!(!cg.hypotheses_hold());
    }

    #[test]
    fn degenerate_measure_keeps_only_constant_word() {
        let good = good_words(&bern(&[1.0, 0.0]), &cantor(), 5, 0.2, Variant::Full, DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(good, vec![Word::new(vec![0; 5])]);
    }

    #[test]
    fn homogeneous_variant_ignores_contraction() {
        let ifs = AnyIfs::parse(&[("1/2", "0"), ("1/8", "1/2")]).unwrap();
        let mu = bern(&[0.5, 0.5]);
        let full = good_words(&mu, &ifs, 6, 0.1, Variant::Full, DEFAULT_WORD_BUDGET).unwrap();
        let homo = good_words(&mu, &ifs, 6, 0.1, Variant::Homogeneous, DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(homo.len(), 64);
        assert!(full.len() < homo.len());
    }

    #[test]
    fn blocked_measure_is_product_of_weights() {
        let cg = coarse_bernoulli(&bern(&[0.5, 0.5]), &cantor(), 2, 0.1, 0.1, Variant::Full, DEFAULT_WORD_BUDGET)
            .unwrap();
        let nu = cg.blocked_measure().unwrap();
        assert_eq!(nu.marginals(), &[0.25; 4]);
        let cg = coarse_bernoulli(&bern(&[0.7, 0.3]), &cantor(), 3, 0.2, 0.1, Variant::Full, DEFAULT_WORD_BUDGET)
            .unwrap();
        let nu = blocked_measure(&cg).unwrap();
        for b in 0..8 {
            let mass = nu.cylinder_mass(&Word::new(vec![b, b])).unwrap();
            assert!((mass - cg.weights[b] * cg.weights[b]).abs() < 1e-16);
        }
        assert!(nu.entropy() / 3.0 <= cg.entropy_bits + 0.2 + 1e-9);
    }

    #[test]
    fn invalid_parameters() {
        let mu = bern(&[0.5, 0.5]);
        assert!(coarse_bernoulli(&mu, &cantor(), 4, 0.1, 0.0, Variant::Full, DEFAULT_WORD_BUDGET).is_err());
        assert!(coarse_bernoulli(&mu, &cantor(), 4, 0.0, 0.1, Variant::Full, DEFAULT_WORD_BUDGET).is_err());
        assert!(matches!(
            coarse_bernoulli(&mu, &cantor(), 30, 0.1, 0.1, Variant::Full, 1 << 20),
            Err(Error::Budget { .. })
        ));
        assert!(matches!(
            coarse_bernoulli(&bern(&[0.5, 0.25, 0.25]), &cantor(), 3, 0.1, 0.1, Variant::Full, DEFAULT_WORD_BUDGET),
            Err(Error::AlphabetMismatch { .. })
        ));
    }
}
