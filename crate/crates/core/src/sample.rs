//! Monte Carlo draws from projected measures.
//!
//! Sample `i` uses its own random stream `(seed, i)`, so a sample set is
//! bit-identical however the work is split across threads.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::AnyIfs;
use crate::measure::{Sampler, SymbolicMeasure};
use crate::rng::{derive_seed, stream};

/// Stream label for the second factor of a convolution.
const SECOND_FACTOR: u64 = 1;
/// Depth search stops here when reporting a required depth.
const MAX_DEPTH: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum Points {
    Line(Vec<f64>),
    Plane(Vec<[f64; 2]>),
}

impl Points {
    pub fn len(&self) -> usize {
        match self {
            Points::Line(v) => v.len(),
            Points::Plane(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Points::Line(_) => 1,
            Points::Plane(_) => 2,
        }
    }
}

/// `Σ c·ρ^depth`: a bound on the distance from a truncated sample to the
/// exact projected point.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationBound {
    pub terms: Vec<(f64, f64)>,
}

impl TruncationBound {
    pub fn single(constant: f64, contraction: f64) -> Self {
        TruncationBound { terms: vec![(constant, contraction)] }
    }

    pub fn exact() -> Self {
        TruncationBound { terms: Vec::new() }
    }

    pub fn at(&self, depth: usize) -> f64 {
        self.terms.iter().map(|(c, r)| c * r.powi(depth as i32)).sum()
    }

    /// Smallest depth whose bound is at most `finest / 4`.
    pub fn required_depth(&self, finest: f64) -> Option<usize> {
        (0..=MAX_DEPTH).find(|&d| 4.0 * self.at(d) <= finest)
    }

    pub fn combine(mut self, other: TruncationBound, weight: f64) -> Self {
        self.terms.extend(other.terms.into_iter().map(|(c, r)| (c * weight.abs(), r)));
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Points,
    pub depth: usize,
    /// Bound on every sample's truncation error at `depth`.
    pub error_bound: f64,
    pub bound: TruncationBound,
    pub seed: u64,
    /// Lower-left corner of the dyadic grid used for binning.
    pub anchor: Vec<f64>,
    /// Free-form description of how the samples were drawn.
    pub description: String,
}

impl SampleSet {
    fn new(points: Points, depth: usize, bound: TruncationBound, seed: u64, anchor: Vec<f64>, description: String) -> Self {
        SampleSet { error_bound: bound.at(depth), points, depth, bound, seed, anchor, description }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rejects scales finer than four times the truncation error.
    pub fn check_resolution(&self, finest: f64) -> Result<()> {
        check_resolution(&self.bound, self.depth, finest)
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        match &self.points {
            Points::Line(v) => vec![v.iter().sum::<f64>() / n],
            Points::Plane(v) => {
                let (sx, sy) = v.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
                vec![sx / n, sy / n]
            }
        }
    }

    /// CSV: `#` comment lines with the parameters, a header, one sample per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# {}", self.description)?;
        writeln!(out, "# seed={} depth={} count={} error_bound={:e}", self.seed, self.depth, self.len(), self.error_bound)?;
        let mut w = csv::Writer::from_writer(out);
        match &self.points {
            Points::Line(v) => {
                w.write_record(["x"])?;
                for x in v {
                    w.write_record([format!("{x:e}")])?;
                }
            }
            Points::Plane(v) => {
                w.write_record(["x", "y"])?;
                for p in v {
                    w.write_record([format!("{:e}", p[0]), format!("{:e}", p[1])])?;
                }
            }
        }
        w.flush()
    }
}

pub fn check_resolution(bound: &TruncationBound, depth: usize, finest: f64) -> Result<()> {
    let err = bound.at(depth);
    if finest >= 4.0 * err {
        Ok(())
    } else {
        Err(Error::Guard { finest, bound: err, required_depth: bound.required_depth(finest) })
    }
}

fn check_counts(mu: &SymbolicMeasure, alphabet: usize, depth: usize, count: usize) -> Result<()> {
    if mu.len() != alphabet {
        return Err(Error::AlphabetMismatch { measure: mu.len(), system: alphabet });
    }
    if depth == 0 || count == 0 {
        return Err(Error::InvalidParameter("depth and count must be positive".into()));
    }
    Ok(())
}

/// Truncation bound of a line IFS: `(R + diam) · ρ^depth` with `R = sup |x|` over the attractor hull.
pub fn line_bound(ifs: &AnyIfs) -> TruncationBound {
    let b = ifs.attractor_bound();
    TruncationBound::single(b.lo.abs().max(b.hi.abs()) + (b.hi - b.lo), ifs.max_ratio())
}

fn draw_words<T: Send>(sampler: &Sampler, depth: usize, count: usize, seed: u64, eval: impl Fn(&[usize]) -> T + Sync) -> Vec<T> {
    (0..count)
        .into_par_iter()
        .map_init(
            || vec![0usize; depth],
            |buf, i| {
                let mut rng = stream(seed, i as u64);
                sampler.fill(&mut rng, buf);
                eval(buf)
            },
        )
        .collect()
}

/// `φ_{ω|depth}(0)` for `ω` drawn from `maps` weights in `word` order.
fn line_point(maps: &[(f64, f64)], word: &[usize]) -> f64 {
    let (mut x, mut scale) = (0.0, 1.0);
    for &s in word {
        let (r, a) = maps[s];
        x += scale * a;
        scale *= r;
    }
    x
}

/// Draws of `Πμ` truncated at `depth`.
pub fn push_samples(mu: &SymbolicMeasure, ifs: &AnyIfs, depth: usize, count: usize, seed: u64) -> Result<SampleSet> {
    check_counts(mu, ifs.len(), depth, count)?;
    let maps = ifs.to_f64_maps();
    let points = draw_words(&mu.sampler(), depth, count, seed, |w| line_point(&maps, w));
    Ok(SampleSet::new(
        Points::Line(points),
        depth,
        line_bound(ifs),
        seed,
        vec![ifs.attractor_bound().lo],
        format!("projected measure, {} maps, {} mode", ifs.len(), ifs.mode()),
    ))
}

/// Draws of `X + t·Y` with `X ~ Π₁μ₁`, `Y ~ Π₂μ₂` on independent streams.
#[allow(clippy::too_many_arguments)]
pub fn convolution_samples(
    mu1: &SymbolicMeasure,
    ifs1: &AnyIfs,
    mu2: &SymbolicMeasure,
    ifs2: &AnyIfs,
    t: f64,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("scale factor t must be finite, got {t}")));
    }
    let x = push_samples(mu1, ifs1, depth, count, seed)?;
    let y = push_samples(mu2, ifs2, depth, count, derive_seed(seed, SECOND_FACTOR))?;
    let (Points::Line(xs), Points::Line(ys)) = (x.points, y.points) else { unreachable!("line samples") };
    let points = xs.iter().zip(&ys).map(|(a, b)| a + t * b).collect();
    let b2 = ifs2.attractor_bound();
    let anchor = x.anchor[0] + if t >= 0.0 { t * b2.lo } else { t * b2.hi };
    Ok(SampleSet::new(
        Points::Line(points),
        depth,
        x.bound.combine(y.bound, t),
        seed,
        vec![anchor],
        format!("convolution X + t*Y with t = {t}"),
    ))
}

/// Lebesgue measure on `[0, 1)^dim` straight from the random streams.
pub fn uniform_samples(dim: usize, count: usize, seed: u64) -> Result<SampleSet> {
    let points = match dim {
        1 => Points::Line(
            (0..count).into_par_iter().map(|i| stream(seed, i as u64).random::<f64>()).collect(),
        ),
        2 => Points::Plane(
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(seed, i as u64);
                    [rng.random::<f64>(), rng.random::<f64>()]
                })
                .collect(),
        ),
        _ => return Err(Error::InvalidParameter(format!("calibration dimension must be 1 or 2, got {dim}"))),
    };
    Ok(SampleSet::new(points, 0, TruncationBound::exact(), seed, vec![0.0; dim], format!("uniform calibration on [0,1)^{dim}")))
}

/// `{r U x + a_λ}` in the plane with `U` a rotation, optionally preceded by
/// the reflection `(x, y) ↦ (x, -y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarIfs {
    pub ratio: f64,
    pub angle: f64,
    pub reflect: bool,
    pub translations: Vec<[f64; 2]>,
    /// User assertion that `U^n ≠ Id` for every `n ≥ 1`; not checkable here.
    pub irrational_rotation: Option<bool>,
}

impl PlanarIfs {
    pub fn new(ratio: f64, angle: f64, reflect: bool, translations: Vec<[f64; 2]>) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidMap(format!("planar ratio must lie in (0, 1), got {ratio}")));
        }
        if !angle.is_finite() || translations.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMap("non-finite planar parameter".into()));
        }
        if translations.is_empty() {
            return Err(Error::InvalidMap("planar system has no maps".into()));
        }
        Ok(PlanarIfs { ratio, angle, reflect, translations, irrational_rotation: None })
    }

    pub fn len(&self) -> usize {
        self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }

    /// `U` as a row-major 2×2 matrix.
    pub fn orthogonal_part(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        if self.reflect {
            [[c, s], [s, -c]]
        } else {
            [[c, -s], [s, c]]
        }
    }

    /// `R = max‖a_λ‖ / (1 - r)`.
    pub fn radius(&self) -> f64 {
        self.translations.iter().map(|a| a[0].hypot(a[1])).fold(0.0, f64::max) / (1.0 - self.ratio)
    }

    /// `2R · r^depth`; the projection is 1-Lipschitz, so it also bounds projected samples.
    pub fn truncation_bound(&self) -> TruncationBound {
        TruncationBound::single(2.0 * self.radius(), self.ratio)
    }

    fn point(&self, word: &[usize]) -> [f64; 2] {
        let u = self.orthogonal_part();
        let ru = [[self.ratio * u[0][0], self.ratio * u[0][1]], [self.ratio * u[1][0], self.ratio * u[1][1]]];
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        let mut x = [0.0, 0.0];
        for &s in word {
            let a = self.translations[s];
            x[0] += m[0][0] * a[0] + m[0][1] * a[1];
            x[1] += m[1][0] * a[0] + m[1][1] * a[1];
            m = [
                [m[0][0] * ru[0][0] + m[0][1] * ru[1][0], m[0][0] * ru[0][1] + m[0][1] * ru[1][1]],
                [m[1][0] * ru[0][0] + m[1][1] * ru[1][0], m[1][0] * ru[0][1] + m[1][1] * ru[1][1]],
            ];
        }
        x
    }
}

/// Draws of `⟨z, Πω⟩` with `z = (cos z_angle, sin z_angle)`.
pub fn planar_projection_samples(
    mu: &SymbolicMeasure,
    pifs: &PlanarIfs,
    z_angle: f64,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    check_counts(mu, pifs.len(), depth, count)?;
    let (zs, zc) = z_angle.sin_cos();
    let points = draw_words(&mu.sampler(), depth, count, seed, |w| {
        let p = pifs.point(w);
        zc * p[0] + zs * p[1]
    });
    Ok(SampleSet::new(
        Points::Line(points),
        depth,
        pifs.truncation_bound(),
        seed,
        vec![-pifs.radius()],
        format!("planar projection, r = {}, angle = {}, reflect = {}, z_angle = {z_angle}", pifs.ratio, pifs.angle, pifs.reflect),
    ))
}

/// One map `(x, y) ↦ (a x + s, b y + t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalMap {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalAffineIfs {
    pub maps: Vec<DiagonalMap>,
}

/// Lyapunov exponents of a diagonal system as positive bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalExponents {
    pub chi_x: f64,
    pub chi_y: f64,
}

impl DiagonalExponents {
    /// `(χ1, χ2)` with `χ1 ≤ χ2`.
    pub fn ordered(&self) -> (f64, f64) {
        (self.chi_x.min(self.chi_y), self.chi_x.max(self.chi_y))
    }
}

impl DiagonalAffineIfs {
    pub fn new(maps: Vec<DiagonalMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidMap("diagonal system has no maps".into()));
        }
        for (i, m) in maps.iter().enumerate() {
            for (name, r) in [("a", m.a), ("b", m.b)] {
                if !(r.abs() > 0.0 && r.abs() < 1.0) {
                    return Err(Error::InvalidMap(format!("map {i}: |{name}| = {} is not in (0, 1)", r.abs())));
                }
            }
            if !(m.s.is_finite() && m.t.is_finite()) {
                return Err(Error::InvalidMap(format!("map {i}: non-finite translation")));
            }
        }
        Ok(DiagonalAffineIfs { maps })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    fn axis(&self, f: impl Fn(&DiagonalMap) -> (f64, f64)) -> AxisBound {
        let rho = self.maps.iter().map(|m| f(m).0.abs()).fold(0.0, f64::max);
        let radius = self.maps.iter().map(|m| f(m).1.abs()).fold(0.0, f64::max) / (1.0 - rho);
        AxisBound { rho, radius }
    }

    pub fn exponents(&self, mu: &SymbolicMeasure) -> Result<DiagonalExponents> {
        let a: Vec<f64> = self.maps.iter().map(|m| m.a).collect();
        let b: Vec<f64> = self.maps.iter().map(|m| m.b).collect();
        Ok(DiagonalExponents { chi_x: -mu.lyapunov(&a)?, chi_y: -mu.lyapunov(&b)? })
    }

    /// Per-axis line bounds added together; the sum dominates the sup-norm error.
    pub fn truncation_bound(&self) -> TruncationBound {
        let x = self.axis(|m| (m.a, m.s));
        let y = self.axis(|m| (m.b, m.t));
        TruncationBound { terms: vec![(3.0 * x.radius, x.rho), (3.0 * y.radius, y.rho)] }
    }
}

struct AxisBound {
    rho: f64,
    radius: f64,
}

pub fn diagonal_affine_samples(
    mu: &SymbolicMeasure,
    difs: &DiagonalAffineIfs,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    check_counts(mu, difs.len(), depth, count)?;
    let points = draw_words(&mu.sampler(), depth, count, seed, |w| {
        let (mut x, mut y, mut sx, mut sy) = (0.0, 0.0, 1.0, 1.0);
        for &s in w {
            let m = difs.maps[s];
            x += sx * m.s;
            y += sy * m.t;
            sx *= m.a;
            sy *= m.b;
        }
        [x, y]
    });
    let anchor = vec![-difs.axis(|m| (m.a, m.s)).radius, -difs.axis(|m| (m.b, m.t)).radius];
    Ok(SampleSet::new(
        Points::Plane(points),
        depth,
        difs.truncation_bound(),
        seed,
        anchor,
        format!("diagonal self-affine, {} maps", difs.len()),
    ))
}
