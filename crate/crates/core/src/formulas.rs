//! Closed-form dimension predictions and the hypothesis flags that go with them.
//!
//! Every formula consumes precomputed entropies and exponents in bits.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};

use crate::error::{Error, Result};
use crate::ifs::AnyIfs;
use crate::lq::{compensated_sum, ALPHA_TOL};
use crate::number::Literal;

/// Largest exponent searched by [`multiplicative_dependence`].
pub const DEPENDENCE_BOUND: u32 = 64;

const AGREEMENT_TOL: f64 = 1e-12;

/// A hypothesis is only ever `True` when it was checked or asserted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    True,
    False,
    Unknown,
}

impl Flag {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Flag::True
        } else {
            Flag::False
        }
    }

    /// User assertions: absent means unknown.
    pub fn from_assertion(b: Option<bool>) -> Self {
        b.map_or(Flag::Unknown, Flag::from_bool)
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::True => "true",
            Flag::False => "false",
            Flag::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionReport {
    pub name: String,
    pub predicted: f64,
    pub inputs: Vec<(String, f64)>,
    pub flags: Vec<(String, Flag)>,
    pub warnings: Vec<String>,
}

impl DimensionReport {
    pub fn new(name: impl Into<String>, predicted: f64) -> Self {
        DimensionReport { name: name.into(), predicted, inputs: Vec::new(), flags: Vec::new(), warnings: Vec::new() }
    }

    pub fn input(mut self, key: impl Into<String>, value: f64) -> Self {
        self.inputs.push((key.into(), value));
        self
    }

    /// Adds a hypothesis flag; anything but `True` also adds a warning.
    pub fn flag(mut self, key: impl Into<String>, value: Flag) -> Self {
        let key = key.into();
        if value != Flag::True {
            self.warnings.push(format!("hypothesis '{key}' is {value}; the prediction is not guaranteed"));
        }
        self.flags.push((key, value));
        self
    }

    pub fn warn(mut self, message: impl Into<String>) -> Self {
        self.warnings.push(message.into());
        self
    }

    pub fn flag_value(&self, key: &str) -> Option<Flag> {
        self.flags.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn all_hypotheses_hold(&self) -> bool {
        self.flags.iter().all(|(_, v)| *v == Flag::True)
    }
}

fn check_entropy(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("entropy must be finite and nonnegative, got {h}")))
    }
}

fn check_unit_ratio(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("ratio must lie in (0, 1), got {r}")))
    }
}

/// `min{1, h/(-χ)}`.
pub fn projection_dimension(h: f64, chi: f64) -> Result<f64> {
    check_entropy(h)?;
    if !(chi < 0.0 && chi.is_finite()) {
        return Err(Error::InvalidParameter(format!("Lyapunov exponent must be negative, got {chi}")));
    }
    Ok((h / -chi).min(1.0))
}

/// `min{1, h/(-log2 r)}`: the projection formula with `χ = log2 r`.
pub fn orthogonal_projection_dimension(h: f64, r: f64) -> Result<f64> {
    check_unit_ratio(r)?;
    projection_dimension(h, r.log2())
}

/// Solves `Σ |r_λ|^s = 1` by bisection.
pub fn similarity_dimension_ratios(ratios: &[f64]) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::InvalidParameter("no ratios".into()));
    }
    let abs: Vec<f64> = ratios.iter().map(|r| r.abs()).collect();
    if let Some(bad) = abs.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::InvalidMap(format!("|ratio| = {bad} is not in (0, 1)")));
    }
    let f = |s: f64| compensated_sum(abs.iter().map(|r| r.powf(s))) - 1.0;
    let max_r = abs.iter().copied().fold(0.0, f64::max);
    // The closed-form bound is attained for equal ratios; widen it past rounding.
    let (mut lo, mut hi) = (0.0, (abs.len() as f64).log2() / -max_r.log2() * (1.0 + 1e-9) + 1e-12);
    if f(hi) > 0.0 {
        return Err(Error::CrossCheck("similarity dimension bracket does not contain the root".into()));
    }
    while hi - lo > f64::EPSILON * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let residual = f(s);
    if residual.abs() > 1e-12 {
        return Err(Error::CrossCheck(format!("similarity dimension residual {residual:e} exceeds 1e-12")));
    }
    Ok(s)
}

pub fn similarity_dimension(ifs: &AnyIfs) -> Result<f64> {
    similarity_dimension_ratios(&ifs.ratios_f64())
}

/// Outcome of the bounded search for `r1^a = r2^b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dependence {
    /// Minimal positive exponents with `r1^a = r2^b`.
    Dependent { a: u32, b: u32 },
    /// No relation with `a, b ≤ bound`.
    IndependentWithin { bound: u32 },
    /// Inputs are not exact rationals; nothing is claimed.
    Unknown { reason: String },
}

impl Dependence {
    /// Flag for the hypothesis "log r1 / log r2 is irrational".
    pub fn independence_flag(&self) -> Flag {
        match self {
            Dependence::Dependent { .. } => Flag::False,
            Dependence::IndependentWithin { .. } => Flag::True,
            Dependence::Unknown { .. } => Flag::Unknown,
        }
    }
}

impl fmt::Display for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dependence::Dependent { a, b } => write!(f, "dependent (r1^{a} = r2^{b})"),
            Dependence::IndependentWithin { bound } => write!(f, "independent (no r1^a = r2^b with a, b <= {bound})"),
            Dependence::Unknown { reason } => write!(f, "unknown ({reason})"),
        }
    }
}

/// Exact search for `r1^a = r2^b` with `1 ≤ a, b ≤ DEPENDENCE_BOUND`.
///
/// Only exact-rational literals are decided; float-mode inputs give `Unknown`.
pub fn multiplicative_dependence(r1: &Literal, r2: &Literal) -> Result<Dependence> {
    let (Literal::Exact(x), Literal::Exact(y)) = (r1, r2) else {
        return Ok(Dependence::Unknown { reason: "ratios are not exact rationals".into() });
    };
    for r in [x, y] {
        if !(r.is_positive() && *r < BigRational::one()) {
            return Err(Error::InvalidParameter(format!("ratio must lie in (0, 1), got {r}")));
        }
    }
    Ok(dependence_exact(x, y, DEPENDENCE_BOUND))
}

fn dependence_exact(x: &BigRational, y: &BigRational, bound: u32) -> Dependence {
    let lx = ln_rational(x);
    let ly = ln_rational(y);
    // The smallest a with an integer partner gives coprime (a, b).
    for a in 1..=bound {
        let b = (a as f64 * lx / ly).round();
        if !(1.0..=bound as f64).contains(&b) {
            continue;
        }
        let b = b as u32;
        if Pow::pow(x, a) == Pow::pow(y, b) {
            return Dependence::Dependent { a, b };
        }
    }
    Dependence::IndependentWithin { bound }
}

/// Natural log of a positive rational, safe for huge numerators and denominators.
fn ln_rational(r: &BigRational) -> f64 {
    fn ln_int(n: &num_bigint::BigInt) -> f64 {
        let bits = n.bits();
        let shift = bits.saturating_sub(60);
        let top: num_bigint::BigInt = n >> shift;
        let top = num_traits::ToPrimitive::to_f64(&top).unwrap_or(f64::MAX);
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
    debug_assert!(!r.is_zero());
    ln_int(r.numer()) - ln_int(r.denom())
}

/// `min{1, h1/(-log2 r1) + h2/(-log2 r2)}` with the independence flag attached.
pub fn convolution_dimension(h1: f64, r1: &Literal, h2: f64, r2: &Literal) -> Result<DimensionReport> {
    check_entropy(h1)?;
    check_entropy(h2)?;
    let (f1, f2) = (r1.to_f64(), r2.to_f64());
    check_unit_ratio(f1)?;
    check_unit_ratio(f2)?;
    let value = convolution_formula(h1, f1, h2, f2);
    let dep = multiplicative_dependence(r1, r2)?;
    let mut report = DimensionReport::new("convolution", value)
        .input("h1", h1)
        .input("r1", f1)
        .input("h2", h2)
        .input("r2", f2)
        .flag("multiplicative independence", dep.independence_flag());
    if let Dependence::Dependent { a, b } = dep {
        report = report.warn(format!("r1^{a} = r2^{b}: log r1 / log r2 is rational"));
    }
    Ok(report)
}

fn convolution_formula(h1: f64, r1: f64, h2: f64, r2: f64) -> f64 {
    (h1 / -r1.log2() + h2 / -r2.log2()).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagonalBranch {
    /// `h ≤ χ1`: the value is `h/χ1`.
    EntropyAtMostChi1,
    /// `h > χ1`: the value is `1 + (h-χ1)/χ2`.
    EntropyAboveChi1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalDimension {
    /// `min{h/χ1, 1 + (h-χ1)/χ2}`, capped at 2.
    pub value: f64,
    pub branch: DiagonalBranch,
    /// `h_π/χ1 + (h - h_π)/χ2` with `h_π = min{h, χ1}`.
    pub feng_hu: f64,
    pub capped: bool,
}

/// Lyapunov dimension of a diagonal self-affine measure, with exponents
/// `0 < χ1 ≤ χ2` given as positive bits.
pub fn lyapunov_dimension_diagonal(h: f64, chi1: f64, chi2: f64) -> Result<DiagonalDimension> {
    check_entropy(h)?;
    if !(chi1 > 0.0 && chi1 <= chi2 && chi2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "exponents must satisfy 0 < chi1 <= chi2, got chi1 = {chi1}, chi2 = {chi2}"
        )));
    }
    let raw = (h / chi1).min(1.0 + (h - chi1) / chi2);
    let branch = if h <= chi1 { DiagonalBranch::EntropyAtMostChi1 } else { DiagonalBranch::EntropyAboveChi1 };
    let h_pi = h.min(chi1);
    let feng_hu = h_pi / chi1 + (h - h_pi) / chi2;
    if (raw - feng_hu).abs() > AGREEMENT_TOL * raw.abs().max(1.0) {
        return Err(Error::CrossCheck(format!("Lyapunov dimension {raw} disagrees with Feng-Hu form {feng_hu}")));
    }
    Ok(DiagonalDimension { value: raw.min(2.0), branch, feng_hu, capped: raw > 2.0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBound {
    /// `h/(-χ) - (s - α_min)`, clamped at 0.
    pub bound: f64,
    /// `min{1, h/(-χ)}`.
    pub upper: f64,
}

/// Lower bound from the similarity dimension and `α_min`.
///
/// `α_min` is itself an extrapolation, so `s` may fall below it by the
/// extrapolation tolerance before the inputs count as inconsistent.
pub fn lq_lower_bound(h: f64, chi: f64, s: f64, alpha_min: f64) -> Result<LowerBound> {
    let upper = projection_dimension(h, chi)?;
    if s < alpha_min - ALPHA_TOL {
        return Err(Error::InvalidParameter(format!(
            "similarity dimension {s} is below alpha_min {alpha_min}"
        )));
    }
    let gap = (s - alpha_min).max(0.0);
    Ok(LowerBound { bound: (h / -chi - gap).max(0.0), upper })
}
