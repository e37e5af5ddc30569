//! Shift-invariant measures on the symbol space: Bernoulli and stationary Markov.
//!
//! Entropy and Lyapunov exponents are in bits (base-2 logarithms).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::ifs::Word;
use crate::rng::{self, StreamRng};

const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum SymbolicMeasure {
    Bernoulli { p: Vec<f64> },
    Markov { transition: Vec<Vec<f64>>, stationary: Vec<f64> },
}

/// Entropy and Lyapunov exponent of a measure relative to an IFS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureStats {
    pub entropy_bits: f64,
    pub lyapunov_bits: f64,
}

impl SymbolicMeasure {
    pub fn bernoulli(p: Vec<f64>) -> Result<Self> {
        check_probability_vector(&p, "Bernoulli weights")?;
        Ok(SymbolicMeasure::Bernoulli { p })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMeasure("empty alphabet".into()));
        }
        Self::bernoulli(vec![1.0 / n as f64; n])
    }

    /// Markov measure started from the stationary vector of `transition`.
    pub fn markov(transition: Vec<Vec<f64>>) -> Result<Self> {
        let stationary = stationary_distribution(&transition)?;
        Ok(SymbolicMeasure::Markov { transition, stationary })
    }

    pub fn len(&self) -> usize {
        match self {
            SymbolicMeasure::Bernoulli { p } => p.len(),
            SymbolicMeasure::Markov { stationary, .. } => stationary.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One-symbol cylinder masses `μ[λ]`.
    pub fn marginals(&self) -> &[f64] {
        match self {
            SymbolicMeasure::Bernoulli { p } => p,
            SymbolicMeasure::Markov { stationary, .. } => stationary,
        }
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        match w.iter().position(|&s| s >= self.len()) {
            Some(position) => Err(Error::InvalidWord { symbol: w[position], position, alphabet: self.len() }),
            None => Ok(()),
        }
    }

    pub fn cylinder_mass(&self, w: &Word) -> Result<f64> {
        self.check_word(w)?;
        Ok(match self {
            SymbolicMeasure::Bernoulli { p } => w.iter().map(|&s| p[s]).product(),
            SymbolicMeasure::Markov { transition, stationary } => match w.first() {
                None => 1.0,
                Some(&first) => {
                    stationary[first] * w.windows(2).map(|e| transition[e[0]][e[1]]).product::<f64>()
                }
            },
        })
    }

    /// `log2 μ[w]`, accurate where the mass itself would underflow.
    pub fn log2_cylinder_mass(&self, w: &Word) -> Result<f64> {
        self.check_word(w)?;
        Ok(match self {
            SymbolicMeasure::Bernoulli { p } => w.iter().map(|&s| p[s].log2()).sum(),
            SymbolicMeasure::Markov { transition, stationary } => match w.first() {
                None => 0.0,
                Some(&first) => {
                    stationary[first].log2() + w.windows(2).map(|e| transition[e[0]][e[1]].log2()).sum::<f64>()
                }
            },
        })
    }

    pub fn entropy(&self) -> f64 {
        match self {
            SymbolicMeasure::Bernoulli { p } => shannon_bits(p),
            SymbolicMeasure::Markov { transition, stationary } => stationary
                .iter()
                .zip(transition)
                .map(|(pi, row)| pi * shannon_bits(row))
                .sum(),
        }
    }

    /// `Σ μ[λ] log2 |r_λ|`.
    pub fn lyapunov(&self, ratios: &[f64]) -> Result<f64> {
        if ratios.len() != self.len() {
            return Err(Error::AlphabetMismatch { measure: self.len(), system: ratios.len() });
        }
        Ok(self
            .marginals()
            .iter()
            .zip(ratios)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, r)| w * r.abs().log2())
            .sum())
    }

    pub fn stats(&self, ratios: &[f64]) -> Result<MeasureStats> {
        Ok(MeasureStats { entropy_bits: self.entropy(), lyapunov_bits: self.lyapunov(ratios)? })
    }

    pub fn sampler(&self) -> Sampler {
        match self {
            SymbolicMeasure::Bernoulli { p } => Sampler { initial: Cumulative::new(p), rows: None },
            SymbolicMeasure::Markov { transition, stationary } => Sampler {
                initial: Cumulative::new(stationary),
                rows: Some(transition.iter().map(|r| Cumulative::new(r)).collect()),
            },
        }
    }

    /// Deterministic word of the given length drawn from stream 0 of `seed`.
    pub fn sample_word(&self, length: usize, seed: u64) -> Word {
        let mut buf = vec![0; length];
        self.sampler().fill(&mut rng::stream(seed, 0), &mut buf);
        Word::new(buf)
    }
}

/// Inverse-CDF tables for drawing symbols.
#[derive(Clone, Debug)]
pub struct Sampler {
    initial: Cumulative,
    rows: Option<Vec<Cumulative>>,
}

impl Sampler {
    pub fn fill(&self, rng: &mut StreamRng, out: &mut [usize]) {
        let mut prev = None;
        for slot in out.iter_mut() {
            let table = match (&self.rows, prev) {
                (Some(rows), Some(p)) => &rows[p],
                _ => &self.initial,
            };
            let s = table.draw(rng);
            *slot = s;
            prev = Some(s);
        }
    }
}

#[derive(Clone, Debug)]
struct Cumulative {
    cum: Vec<f64>,
    last_positive: usize,
}

impl Cumulative {
    fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cum = p
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = p.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Self { cum, last_positive }
    }

    fn draw(&self, rng: &mut StreamRng) -> usize {
        let u: f64 = rng.random();
        self.cum.partition_point(|&c| c <= u).min(self.last_positive)
    }
}

fn shannon_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&w| w > 0.0).map(|w| w * w.log2()).sum::<f64>()
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidMeasure(format!("{what}: empty vector")));
    }
    if p.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidMeasure(format!("{what}: entries must be finite and nonnegative")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidMeasure(format!("{what}: entries sum to {sum}, not 1")));
    }
    Ok(())
}

fn is_irreducible(transition: &[Vec<f64>]) -> bool {
    let n = transition.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { transition[i][j] } else { transition[j][i] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary vector of an irreducible row-stochastic matrix.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    if n == 0 || transition.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidMeasure("transition matrix must be square and nonempty".into()));
    }
    for (i, row) in transition.iter().enumerate() {
        check_probability_vector(row, &format!("transition row {i}"))?;
    }
    if !is_irreducible(transition) {
        return Err(Error::InvalidMeasure("transition matrix is reducible (chain not ergodic)".into()));
    }

    // (Pᵀ - I) π = 0 with the last equation replaced by Σπ = 1.
    let mut a = DMatrix::from_fn(n, n, |i, j| transition[j][i] - if i == j { 1.0 } else { 0.0 });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu
        .solve(&b)
        .ok_or_else(|| Error::InvalidMeasure("singular stationary system".into()))?;
    // One step of iterative refinement.
    if let Some(delta) = lu.solve(&(&b - &a * &pi)) {
        pi += delta;
    }
    let mut pi: Vec<f64> = pi.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);

    let residual = (0..n)
        .map(|j| ((0..n).map(|i| pi[i] * transition[i][j]).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    if residual > SUM_TOL {
        return Err(Error::InvalidMeasure(format!("stationary residual {residual:e} exceeds 1e-12")));
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::words;

    fn markov_example() -> SymbolicMeasure {
        SymbolicMeasure::markov(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn cylinder_mass_examples() {
        let b = SymbolicMeasure::bernoulli(vec![0.7, 0.3]).unwrap();
        assert!((b.cylinder_mass(&Word::from([0, 1])).unwrap() - 0.21).abs() < 1e-15);
        let m = markov_example();
        assert!((m.cylinder_mass(&Word::from([1, 0])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.cylinder_mass(&Word::empty()).unwrap(), 1.0);
        assert_eq!(m.cylinder_mass(&Word::empty()).unwrap(), 1.0);
        assert!(b.cylinder_mass(&Word::from([2])).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((SymbolicMeasure::uniform(2).unwrap().entropy() - 1.0).abs() < 1e-15);
        let b = SymbolicMeasure::bernoulli(vec![0.7, 0.3]).unwrap();
        let direct = -(0.7f64 * 0.7f64.log2() + 0.3 * 0.3f64.log2());
        assert!((b.entropy() - direct).abs() < 1e-15);
        assert!((b.entropy() - 0.881_290_9).abs() < 1e-6);
        let m = SymbolicMeasure::markov(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((m.entropy() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_examples() {
        let u = SymbolicMeasure::uniform(2).unwrap();
        let third = [1.0 / 3.0, 1.0 / 3.0];
        assert!((u.lyapunov(&third).unwrap() + 3f64.log2()).abs() < 1e-15);
        let b = SymbolicMeasure::bernoulli(vec![0.7, 0.3]).unwrap();
        assert!((b.lyapunov(&[0.5, 0.25]).unwrap() + 1.3).abs() < 1e-15);
        assert!((markov_example().lyapunov(&third).unwrap() + 3f64.log2()).abs() < 1e-15);
        assert!(matches!(b.lyapunov(&[0.5]), Err(Error::AlphabetMismatch { .. })));
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_distribution(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-15 && (pi[1] - 1.0 / 3.0).abs() < 1e-15);
        let ds = vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.2, 0.3], vec![0.3, 0.5, 0.2]];
        for x in stationary_distribution(&ds).unwrap() {
            assert!((x - 1.0 / 3.0).abs() < 1e-14);
        }
        assert!(stationary_distribution(&[vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        // Periodic chains are irreducible, hence accepted.
        let pi = stationary_distribution(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_measures() {
        assert!(SymbolicMeasure::bernoulli(vec![0.5, 0.4]).is_err());
        assert!(SymbolicMeasure::bernoulli(vec![1.5, -0.5]).is_err());
        assert!(SymbolicMeasure::bernoulli(vec![]).is_err());
        assert!(SymbolicMeasure::markov(vec![vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn sampling_examples() {
        let point = SymbolicMeasure::bernoulli(vec![1.0, 0.0]).unwrap();
        assert!(point.sample_word(1000, 99).iter().all(|&s| s == 0));
        let b = SymbolicMeasure::bernoulli(vec![0.7, 0.3]).unwrap();
        assert_eq!(b.sample_word(500, 5), b.sample_word(500, 5));
        let w = b.sample_word(100_000, 11);
        let freq = w.iter().filter(|&&s| s == 0).count() as f64 / 1e5;
        assert!((freq - 0.7).abs() < 0.01, "{freq}");
        // Markov: state 1 is always followed by 0.
        let w = markov_example().sample_word(10_000, 3);
        assert!(w.windows(2).all(|e| e[0] == 0 || e[1] == 0));
    }

    #[test]
    fn shift_invariance_and_total_mass() {
        let measures = [
            SymbolicMeasure::bernoulli(vec![0.6, 0.3, 0.1]).unwrap(),
            SymbolicMeasure::markov(vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.0, 0.5], vec![0.2, 0.2, 0.6]]).unwrap(),
        ];
        for mu in &measures {
            for len in 0..=4 {
                for w in words(3, len, 1 << 20).unwrap() {
                    let base = mu.cylinder_mass(&w).unwrap();
                    let right: f64 = (0..3).map(|l| mu.cylinder_mass(&w.concat(&Word::from([l]))).unwrap()).sum();
                    let left: f64 = (0..3).map(|l| mu.cylinder_mass(&Word::from([l]).concat(&w)).unwrap()).sum();
                    assert!((right - base).abs() < 1e-14 && (left - base).abs() < 1e-14);
                }
            }
            for m in 1..=6 {
                let total: f64 = words(3, m, 1 << 20).unwrap().map(|w| mu.cylinder_mass(&w).unwrap()).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empirical_information_matches_entropy() {
        let mu = SymbolicMeasure::bernoulli(vec![0.7, 0.3]).unwrap();
        let n = 200;
        let mean: f64 = (0..10_000u64)
            .map(|seed| -mu.log2_cylinder_mass(&mu.sample_word(n, seed)).unwrap() / n as f64)
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - mu.entropy()).abs() < 0.02, "{mean}");
    }
}
