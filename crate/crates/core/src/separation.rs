//! The affine-map distance and per-level separation scans.
//!
//! A finite scan can only ever be evidence of exponential separation; reports
//! say so explicitly.

use std::cmp::Ordering;

use crate::error::Result;
use crate::ifs::{AffineMap, AnyIfs, Ifs, Word};
use crate::number::{NumberMode, Real};

/// `d(g1, g2)`: offset difference for equal ratios, `None` (infinite) otherwise.
///
/// Ratio equality is exact in both modes (bit equality for double-double).
pub fn affine_distance<T: Real>(g1: &AffineMap<T>, g2: &AffineMap<T>) -> Option<T> {
    (g1.ratio() == g2.ratio()).then(|| (g1.offset().clone() - g2.offset().clone()).abs())
}

/// Smallest distance between two distinct level-`n` compositions.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelGap<T> {
    pub level: usize,
    /// `None` when every pair has distinct ratios.
    pub min_gap: Option<T>,
    /// Lexicographically least pair attaining the minimum.
    pub witness: Option<(Word, Word)>,
}

/// Minimum of `affine_distance` over unordered distinct pairs in `Λ^n`.
///
/// Words are bucketed by exact ratio and sorted by offset, so only adjacent
/// entries of a bucket need comparing.
pub fn min_level_gap<T: Real>(ifs: &Ifs<T>, n: usize, budget: u128) -> Result<LevelGap<T>> {
    let maps = ifs.level_maps(n, budget)?;
    let mut order: Vec<usize> = (0..maps.len()).collect();
    order.sort_by(|&i, &j| {
        maps[i]
            .ratio()
            .total_cmp(maps[j].ratio())
            .then_with(|| maps[i].offset().total_cmp(maps[j].offset()))
            .then(i.cmp(&j))
    });

    let mut best: Option<(T, (usize, usize))> = None;
    for pair in order.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let Some(gap) = affine_distance(&maps[i], &maps[j]) else {
            continue;
        };
        let key = (i.min(j), i.max(j));
        let better = match &best {
            None => true,
            Some((g, k)) => match gap.total_cmp(g) {
                Ordering::Less => true,
                Ordering::Equal => key < *k,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((gap, key));
        }
    }

    let alphabet = ifs.len();
    Ok(match best {
        Some((gap, (i, j))) => LevelGap {
            level: n,
            min_gap: Some(gap),
            witness: Some((Word::unrank(i, alphabet, n), Word::unrank(j, alphabet, n))),
        },
        None => LevelGap { level: n, min_gap: None, witness: None },
    })
}

/// One row of a [`SeparationReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    /// `f64::INFINITY` when no two words share a ratio.
    pub min_gap: f64,
    /// Exact rendering of the gap in the system's number mode.
    pub min_gap_text: String,
    pub witness: Option<(Word, Word)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub mode: NumberMode,
    pub per_level: Vec<LevelRecord>,
    /// `min_n gap(n)^{1/n}` over levels with a finite positive gap.
    pub c_estimate: Option<f64>,
    pub exact_overlap: Option<(usize, Word, Word)>,
    pub notes: Vec<String>,
}

impl SeparationReport {
    pub fn has_exact_overlap(&self) -> bool {
        self.exact_overlap.is_some()
    }

    /// Positive evidence of separation: no overlap and a positive constant.
    pub fn separated_evidence(&self) -> bool {
        !self.has_exact_overlap() && self.c_estimate.is_some_and(|c| c > 0.0)
    }
}

pub fn separation_report<T: Real>(ifs: &Ifs<T>, max_level: usize, budget: u128) -> Result<SeparationReport> {
    let mut per_level = Vec::with_capacity(max_level);
    let mut c_estimate: Option<f64> = None;
    let mut exact_overlap = None;
    for n in 1..=max_level {
        let gap = min_level_gap(ifs, n, budget)?;
        let (value, text) = match &gap.min_gap {
            Some(g) => (g.as_f64(), g.render()),
            None => (f64::INFINITY, "inf".to_string()),
        };
        if let Some(g) = &gap.min_gap {
            if g.is_zero() {
                if exact_overlap.is_none() {
                    let (a, b) = gap.witness.clone().expect("finite gap has a witness");
                    exact_overlap = Some((n, a, b));
                }
            } else {
                let c = value.powf(1.0 / n as f64);
                c_estimate = Some(c_estimate.map_or(c, |cur: f64| cur.min(c)));
            }
        }
        per_level.push(LevelRecord { level: n, min_gap: value, min_gap_text: text, witness: gap.witness });
    }

    let mut notes = vec![format!(
        "separation constant estimated from levels 1..={max_level}; a positive value is evidence, not proof"
    )];
    if T::MODE == NumberMode::Approx {
        notes.push("float mode: ratios compared bitwise, near-equal ratios may be misclassified".into());
    }
    if exact_overlap.is_some() {
        notes.push("exact overlap found: the system does not have exponential separation".into());
    }
    Ok(SeparationReport { mode: T::MODE, per_level, c_estimate, exact_overlap, notes })
}

pub fn separation_report_any(ifs: &AnyIfs, max_level: usize, budget: u128) -> Result<SeparationReport> {
    match ifs {
        AnyIfs::Exact(s) => separation_report(s, max_level, budget),
        AnyIfs::Approx(s) => separation_report(s, max_level, budget),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSeparation {
    pub first: SeparationReport,
    pub second: SeparationReport,
    pub c_estimate: Option<f64>,
}

impl JointSeparation {
    pub fn separated_evidence(&self) -> bool {
        self.first.separated_evidence() && self.second.separated_evidence()
    }
}

/// Both systems scanned over the same levels; the joint constant is the smaller one.
pub fn joint_separation_report(ifs1: &AnyIfs, ifs2: &AnyIfs, max_level: usize, budget: u128) -> Result<JointSeparation> {
    let first = separation_report_any(ifs1, max_level, budget)?;
    let second = separation_report_any(ifs2, max_level, budget)?;
    let c_estimate = match (first.c_estimate, second.c_estimate) {
        (Some(a), Some(b)) => Some(a.min(b)),
        _ => None,
    };
    Ok(JointSeparation { first, second, c_estimate })
}
