//! The moment equation `Σ p_w^q |r_w|^{-τ} = 1` and the L^q dimensions it
//! yields for self-similar measures with exponential separation.

use crate::coarse::{CoarseGraining, Variant};
use crate::error::{Error, Result};
use crate::ifs::AnyIfs;

/// Bracket width at which bisection hands over to a Newton polish.
const BRACKET_WIDTH: f64 = 1e-13;
pub(crate) const ALPHA_TOL: f64 = 1e-6;
/// Large moments used to extrapolate `lim_{q→∞} D(q)`.
pub const ALPHA_MIN_QS: [f64; 3] = [64.0, 128.0, 256.0];

#[derive(Clone, Debug, PartialEq)]
pub struct LqPoint {
    pub q: f64,
    pub tau: f64,
    /// `min{1, τ/(q-1)}`.
    pub lq_dim: f64,
    /// `Σ p^q |r|^{-τ} - 1` at the returned `τ`.
    pub residual: f64,
    /// `‖p‖_q^q`.
    pub norm_q: f64,
    /// `‖p‖_∞`.
    pub norm_inf: f64,
    /// Zero-weight symbols removed before solving.
    pub dropped: usize,
}

/// Weights with their log2 ratios, zero weights removed.
struct Terms {
    log_p: Vec<f64>,
    log_r: Vec<f64>,
    dropped: usize,
}

impl Terms {
    fn new(p: &[f64], ratios: &[f64]) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if p.len() != ratios.len() {
            return Err(Error::AlphabetMismatch { measure: p.len(), system: ratios.len() });
        }
        let mut log_p = Vec::with_capacity(p.len());
        let mut log_r = Vec::with_capacity(p.len());
        for (&w, &r) in p.iter().zip(ratios) {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("invalid weight {w}")));
            }
            let r = r.abs();
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidParameter(format!("ratio {r} outside (0, 1)")));
            }
            if w > 0.0 {
                log_p.push(w.log2());
                log_r.push(r.log2());
            }
        }
        if log_p.is_empty() {
            return Err(Error::InvalidParameter("all weights are zero".into()));
        }
        let dropped = p.len() - log_p.len();
        Ok(Self { log_p, log_r, dropped })
    }

    fn exponents(&self, q: f64, tau: f64) -> impl Iterator<Item = f64> + '_ {
        self.log_p.iter().zip(&self.log_r).map(move |(lp, lr)| q * lp - tau * lr)
    }

    /// `log2 F(τ)` via log-sum-exp.
    fn log2_f(&self, q: f64, tau: f64) -> f64 {
        let max = self.exponents(q, tau).fold(f64::NEG_INFINITY, f64::max);
        max + self.exponents(q, tau).map(|t| (t - max).exp2()).sum::<f64>().log2()
    }

    /// `F(τ) - 1` and `F'(τ)`, summed with compensation.
    fn residual_and_slope(&self, q: f64, tau: f64) -> (f64, f64) {
        let mut sum = Neumaier::default();
        sum.add(-1.0);
        let mut slope = 0.0;
        for (t, lr) in self.exponents(q, tau).zip(&self.log_r) {
            let term = t.exp2();
            sum.add(term);
            slope -= term * lr * std::f64::consts::LN_2;
        }
        (sum.value(), slope)
    }
}

#[derive(Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    values.into_iter().for_each(|v| acc.add(v));
    acc.value()
}

/// Solves `Σ p_w^q |r_w|^{-τ} = 1` for `τ ≥ 0`.
///
/// `F` is strictly increasing with `F(0) = ‖p‖_q^q ≤ 1`, and
/// `F(log2‖p‖_q^q / log2 max|r|) ≥ 1`, which brackets the root.
pub fn solve_tau(p: &[f64], ratios: &[f64], q: f64) -> Result<LqPoint> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q = {q} must exceed 1")));
    }
    let terms = Terms::new(p, ratios)?;
    let log_norm_q = terms.log2_f(q, 0.0);
    let norm_inf = terms.log_p.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).exp2();
    let max_log_r = terms.log_r.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));

    let mut lo = 0.0;
    let mut hi = (log_norm_q / max_log_r).max(0.0);
    let mut tau = if log_norm_q >= 0.0 {
        0.0
    } else {
        for _ in 0..400 {
            if hi - lo <= BRACKET_WIDTH {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if terms.log2_f(q, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let (mut residual, slope) = terms.residual_and_slope(q, tau);
    if tau > 0.0 && slope > 0.0 {
        let polished = (tau - residual / slope).max(0.0);
        let (r2, _) = terms.residual_and_slope(q, polished);
        if r2.abs() <= residual.abs() {
            tau = polished;
            residual = r2;
        }
    }

    Ok(LqPoint {
        q,
        tau,
        lq_dim: (tau / (q - 1.0)).min(1.0),
        residual,
        norm_q: log_norm_q.exp2(),
        norm_inf,
        dropped: terms.dropped,
    })
}

/// `min{1, τ(q)/(q-1)}`.
pub fn lq_dimension(p: &[f64], ratios: &[f64], q: f64) -> Result<f64> {
    solve_tau(p, ratios, q).map(|pt| pt.lq_dim)
}

/// Closed form for a shared ratio: `min{1, log2‖p‖_q^q / ((q-1) log2 r)}`.
pub fn lq_dimension_homogeneous(p: &[f64], ratio: f64, q: f64) -> Result<f64> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q = {q} must exceed 1")));
    }
    let terms = Terms::new(p, &vec![ratio; p.len()])?;
    let log_norm_q = terms.log2_f(q, 0.0);
    Ok((log_norm_q / ((q - 1.0) * ratio.abs().log2())).min(1.0))
}

/// Checks that all ratios coincide and returns the common one.
pub fn common_ratio(ratios: &[f64]) -> Result<f64> {
    let first = ratios.first().ok_or_else(|| Error::InvalidParameter("no ratios".into()))?.abs();
    if ratios.iter().any(|r| r.abs() != first) {
        return Err(Error::InvalidParameter("ratios are not all equal".into()));
    }
    Ok(first)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaMin {
    /// `min{1, lim_q τ(q)/(q-1)}` from the large-`q` extrapolation.
    pub value: f64,
    /// `min{1, min_λ log2 p_λ / log2 |r_λ|}`.
    pub candidate: f64,
    /// `D(q)` at [`ALPHA_MIN_QS`].
    pub large_q_dims: [f64; 3],
    /// Successive slopes of `τ(q)`; their gap indicates convergence.
    pub slopes: [f64; 2],
}

/// `lim_{q→∞} D(q)`, extrapolated from `τ` at large `q` and cross-checked
/// against the minimal-local-dimension candidate.
///
/// `τ(q)` becomes affine in `q` up to exponentially small terms, so its
/// slope between the two largest moments is the limit.
pub fn alpha_min(p: &[f64], ratios: &[f64]) -> Result<AlphaMin> {
    let pts = ALPHA_MIN_QS
        .iter()
        .map(|&q| solve_tau(p, ratios, q))
        .collect::<Result<Vec<_>>>()?;
    let slopes = [
        (pts[1].tau - pts[0].tau) / (pts[1].q - pts[0].q),
        (pts[2].tau - pts[1].tau) / (pts[2].q - pts[1].q),
    ];
    let value = slopes[1].min(1.0);
    let candidate = p
        .iter()
        .zip(ratios)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, r)| w.log2() / r.abs().log2())
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    if (value - candidate).abs() > ALPHA_TOL {
        return Err(Error::CrossCheck(format!(
            "alpha_min extrapolation {value} disagrees with candidate {candidate} beyond {ALPHA_TOL:e}"
        )));
    }
    Ok(AlphaMin {
        value,
        candidate,
        large_q_dims: [pts[0].lq_dim, pts[1].lq_dim, pts[2].lq_dim],
        slopes,
    })
}

/// Both sides of `τ/(q-1) ≥ (h-δ)/(δ-χ) - δ` for a coarse graining, with `q = 1/δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TauLowerBound {
    pub q: f64,
    pub tau: f64,
    /// `τ/(q-1)`.
    pub lhs: f64,
    /// `(h-δ)/(δ-χ) - δ`.
    pub rhs: f64,
    pub holds: bool,
    pub good_mass_ok: bool,
    pub epsilon_ok: bool,
    /// `m log2|Λ| + q(1 - m/ε + 2mh log ρ1/log ρ2) < -1`.
    pub epsilon_small: bool,
    pub delta_below_h: bool,
    /// `m ≥ q / ((q-1) δ (δ-χ))`, enough for the final estimate on `‖p‖_q^q`.
    pub m_large: bool,
}

impl TauLowerBound {
    pub fn side_conditions_met(&self) -> bool {
        self.good_mass_ok && self.epsilon_ok && self.epsilon_small && self.delta_below_h && self.m_large
    }
}

/// Solves `τ` for the blocked vector `(p_w, |r_w|)` at `q = 1/δ` and compares
/// it with the lower bound. When every side condition holds the bound is
/// proven, so a failure is returned as a cross-check error.
pub fn tau_lower_bound_check(cg: &CoarseGraining, ifs: &AnyIfs) -> Result<TauLowerBound> {
    if cg.variant != Variant::Full {
        return Err(Error::InvalidParameter("the lower-bound check needs the full variant".into()));
    }
    if ifs.len() != cg.alphabet {
        return Err(Error::AlphabetMismatch { measure: cg.alphabet, system: ifs.len() });
    }
    let q = 1.0 / cg.delta;
    if q <= 1.0 {
        return Err(Error::InvalidParameter(format!("q = 1/delta = {q} must exceed 1")));
    }
    let pt = solve_tau(&cg.weights, &cg.block_ratios, q)?;
    let (h, chi, delta) = (cg.entropy_bits, cg.lyapunov_bits, cg.delta);
    let lhs = pt.tau / (q - 1.0);
    let rhs = (h - delta) / (delta - chi) - delta;

    let ratios = ifs.ratios_f64();
    let log_rho1 = ratios.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min).log2();
    let log_rho2 = ratios.iter().map(|r| r.abs()).fold(0.0, f64::max).log2();
    let m = cg.m as f64;
    let eps_condition = m * (cg.alphabet as f64).log2() + q * (1.0 - m / cg.epsilon + 2.0 * m * h * log_rho1 / log_rho2);

    let record = TauLowerBound {
        q,
        tau: pt.tau,
        lhs,
        rhs,
        holds: lhs >= rhs,
        good_mass_ok: cg.good_mass_ok(),
        epsilon_ok: cg.epsilon_ok(),
        epsilon_small: eps_condition < -1.0,
        delta_below_h: delta < h,
        m_large: m >= q / ((q - 1.0) * delta * (delta - chi)),
    };
    if record.side_conditions_met() && !record.holds {
        return Err(Error::CrossCheck(format!(
            "tau/(q-1) = {lhs} below (h-delta)/(delta-chi) - delta = {rhs} although every side condition holds"
        )));
    }
    Ok(record)
}
