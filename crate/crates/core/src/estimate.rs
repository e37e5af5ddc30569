//! Dimension estimates from sample sets: dyadic bin entropy, local ball
//! masses around fixed centers, and pair correlation.
//!
//! All slopes are ordinary least squares over the caller's scales.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sample::{Points, SampleSet};

/// Number of leading samples used as centers by [`local_dimension_stats`].
pub const LOCAL_CENTERS: usize = 512;
/// Minimum sample count for [`local_dimension_stats`].
pub const LOCAL_MIN_SAMPLES: usize = 10_000;
/// Planar pair counting uses at most this many leading samples.
pub const PLANAR_PAIR_POINTS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    CoarseEntropy,
    LocalDimension,
    Correlation,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::CoarseEntropy => "coarse-entropy",
            Method::LocalDimension => "local-dimension",
            Method::Correlation => "correlation",
        })
    }
}

/// One scale of an estimate. `value` is the bin entropy (bits), the median
/// `log2` ball mass, or `log2` of the pair fraction, depending on the method.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleStat {
    pub scale: f64,
    pub value: f64,
    /// Occupied bins, centers with a nonempty ball, or close pairs.
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionEstimate {
    pub method: Method,
    pub estimate: f64,
    pub standard_error: f64,
    pub finest: f64,
    pub coarsest: f64,
    pub per_scale: Vec<ScaleStat>,
    pub anchor: Vec<f64>,
    /// Interquartile range of per-center slopes (local dimension only).
    pub iqr: Option<f64>,
    pub dropped_centers: usize,
    pub samples_used: usize,
}

/// `2^{-k}` for each exponent.
pub fn dyadic_scales(exponents: impl IntoIterator<Item = i32>) -> Vec<f64> {
    exponents.into_iter().map(|k| (-k as f64).exp2()).collect()
}

fn check_scales(samples: &SampleSet, scales: &[f64]) -> Result<(f64, f64)> {
    if scales.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 scales, got {}", scales.len())));
    }
    if let Some(bad) = scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter(format!("scales must be positive, got {bad}")));
    }
    let finest = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let coarsest = scales.iter().copied().fold(0.0, f64::max);
    if finest == coarsest {
        return Err(Error::InvalidParameter("scales must not all be equal".into()));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    samples.check_resolution(finest)?;
    Ok((finest, coarsest))
}

/// Slope and its standard error.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se)
}

fn shannon_of_sorted<K: PartialEq>(keys: &[K]) -> (f64, u64) {
    let n = keys.len() as f64;
    let (mut h, mut bins, mut run) = (0.0, 0u64, 0usize);
    for i in 0..keys.len() {
        run += 1;
        if i + 1 == keys.len() || keys[i + 1] != keys[i] {
            let p = run as f64 / n;
            h -= p * p.log2();
            bins += 1;
            run = 0;
        }
    }
    (h, bins)
}

fn bin_entropy(samples: &SampleSet, scale: f64) -> (f64, u64) {
    match &samples.points {
        Points::Line(v) => {
            let a = samples.anchor[0];
            let mut keys: Vec<i64> = v.iter().map(|x| ((x - a) / scale).floor() as i64).collect();
            keys.par_sort_unstable();
            shannon_of_sorted(&keys)
        }
        Points::Plane(v) => {
            let (ax, ay) = (samples.anchor[0], samples.anchor[1]);
            let mut keys: Vec<(i64, i64)> = v
                .iter()
                .map(|p| (((p[0] - ax) / scale).floor() as i64, ((p[1] - ay) / scale).floor() as i64))
                .collect();
            keys.par_sort_unstable();
            shannon_of_sorted(&keys)
        }
    }
}

/// Slope of the empirical dyadic-bin entropy against `-log2 δ`.
pub fn coarse_entropy_dimension(samples: &SampleSet, scales: &[f64]) -> Result<DimensionEstimate> {
    let (finest, coarsest) = check_scales(samples, scales)?;
    let per_scale: Vec<ScaleStat> = scales
        .iter()
        .map(|&scale| {
            let (value, count) = bin_entropy(samples, scale);
            ScaleStat { scale, value, count }
        })
        .collect();
    let x: Vec<f64> = scales.iter().map(|s| -s.log2()).collect();
    let y: Vec<f64> = per_scale.iter().map(|s| s.value).collect();
    let (estimate, standard_error) = ols(&x, &y);
    Ok(DimensionEstimate {
        method: Method::CoarseEntropy,
        estimate,
        standard_error,
        finest,
        coarsest,
        per_scale,
        anchor: samples.anchor.clone(),
        iqr: None,
        dropped_centers: 0,
        samples_used: samples.len(),
    })
}

/// Samples sorted by first coordinate, for strip scans.
struct Sorted {
    points: Vec<[f64; 2]>,
    planar: bool,
}

impl Sorted {
    fn new(points: &Points) -> Self {
        let (mut pts, planar): (Vec<[f64; 2]>, bool) = match points {
            Points::Line(v) => (v.iter().map(|&x| [x, 0.0]).collect(), false),
            Points::Plane(v) => (v.clone(), true),
        };
        pts.par_sort_unstable_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        Sorted { points: pts, planar }
    }

    /// Points within sup-distance `r` of `c`, the center included.
    fn ball_count(&self, c: [f64; 2], r: f64) -> usize {
        let lo = self.points.partition_point(|p| p[0] < c[0] - r);
        let hi = self.points.partition_point(|p| p[0] <= c[0] + r);
        if self.planar {
            self.points[lo..hi].iter().filter(|p| (p[1] - c[1]).abs() <= r).count()
        } else {
            hi - lo
        }
    }
}

fn as_pairs(points: &Points) -> Vec<[f64; 2]> {
    match points {
        Points::Line(v) => v.iter().map(|&x| [x, 0.0]).collect(),
        Points::Plane(v) => v.clone(),
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Per-center slopes of `log2 θ̂(B(x, δ))` against `log2 δ`, summarized by
/// their median and interquartile range. Centers are the first
/// [`LOCAL_CENTERS`] samples; a center whose finest ball holds no other
/// sample is dropped.
pub fn local_dimension_stats(samples: &SampleSet, radii: &[f64]) -> Result<DimensionEstimate> {
    let (finest, coarsest) = check_scales(samples, radii)?;
    if samples.len() < LOCAL_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "local dimension needs at least {LOCAL_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let sorted = Sorted::new(&samples.points);
    let centers: Vec<[f64; 2]> = as_pairs(&samples.points).into_iter().take(LOCAL_CENTERS).collect();
    let others = (samples.len() - 1) as f64;
    let x: Vec<f64> = radii.iter().map(|r| r.log2()).collect();

    // Per center: log2 of the ball fraction at each radius, excluding the center itself.
    let logs: Vec<Option<Vec<f64>>> = centers
        .par_iter()
        .map(|&c| {
            let fractions: Vec<f64> = radii.iter().map(|&r| (sorted.ball_count(c, r) - 1) as f64 / others).collect();
            fractions.iter().all(|&f| f > 0.0).then(|| fractions.iter().map(|f| f.log2()).collect())
        })
        .collect();

    let kept: Vec<&Vec<f64>> = logs.iter().flatten().collect();
    let dropped_centers = centers.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::InvalidParameter("every center has an empty ball at the finest radius".into()));
    }
    let mut slopes: Vec<f64> = kept.iter().map(|y| ols(&x, y).0).collect();
    slopes.sort_by(f64::total_cmp);
    let median = quantile(&slopes, 0.5);
    let iqr = quantile(&slopes, 0.75) - quantile(&slopes, 0.25);
    // Normal-approximation standard error of a median, with σ from the IQR.
    let standard_error = 1.2533 * (iqr / 1.349) / (slopes.len() as f64).sqrt();

    let per_scale = radii
        .iter()
        .enumerate()
        .map(|(j, &scale)| {
            let mut col: Vec<f64> = kept.iter().map(|y| y[j]).collect();
            col.sort_by(f64::total_cmp);
            ScaleStat { scale, value: quantile(&col, 0.5), count: kept.len() as u64 }
        })
        .collect();

    Ok(DimensionEstimate {
        method: Method::LocalDimension,
        estimate: median,
        standard_error,
        finest,
        coarsest,
        per_scale,
        anchor: samples.anchor.clone(),
        iqr: Some(iqr),
        dropped_centers,
        samples_used: samples.len(),
    })
}

/// Unordered pairs at sup-distance at most `r`.
fn close_pairs(sorted: &Sorted, r: f64) -> u64 {
    let pts = &sorted.points;
    if !sorted.planar {
        let mut count = 0u64;
        let mut j = 0;
        for i in 0..pts.len() {
            if j < i + 1 {
                j = i + 1;
            }
            while j < pts.len() && pts[j][0] - pts[i][0] <= r {
                j += 1;
            }
            count += (j - i - 1) as u64;
        }
        return count;
    }
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut c = 0u64;
            for q in &pts[i + 1..] {
                if q[0] - pts[i][0] > r {
                    break;
                }
                if (q[1] - pts[i][1]).abs() <= r {
                    c += 1;
                }
            }
            c
        })
        .sum()
}

/// Slope of `log2` of the close-pair fraction against `log2 δ`.
///
/// Line samples are counted exactly over all pairs; planar samples use the
/// first [`PLANAR_PAIR_POINTS`] samples.
pub fn correlation_dimension(samples: &SampleSet, radii: &[f64]) -> Result<DimensionEstimate> {
    let (finest, coarsest) = check_scales(samples, radii)?;
    let used = match &samples.points {
        Points::Line(_) => samples.points.clone(),
        Points::Plane(v) => Points::Plane(v.iter().take(PLANAR_PAIR_POINTS).copied().collect()),
    };
    let n = used.len() as f64;
    let total = n * (n - 1.0) / 2.0;
    let sorted = Sorted::new(&used);
    let mut per_scale = Vec::with_capacity(radii.len());
    for &scale in radii {
        let pairs = close_pairs(&sorted, scale);
        if pairs == 0 {
            return Err(Error::InvalidParameter(format!("no sample pairs within radius {scale:e}")));
        }
        per_scale.push(ScaleStat { scale, value: (pairs as f64 / total).log2(), count: pairs });
    }
    let x: Vec<f64> = radii.iter().map(|r| r.log2()).collect();
    let y: Vec<f64> = per_scale.iter().map(|s| s.value).collect();
    let (estimate, standard_error) = ols(&x, &y);
    Ok(DimensionEstimate {
        method: Method::Correlation,
        estimate,
        standard_error,
        finest,
        coarsest,
        per_scale,
        anchor: samples.anchor.clone(),
        iqr: None,
        dropped_centers: 0,
        samples_used: used.len(),
    })
}
