//! Config ingestion and experiment orchestration for the `fracdim` binary.
//!
//! One TOML file describes one experiment. Every run writes `report.txt`
//! (human-readable, embedding the resolved config) and `resolved_config.toml`
//! (the same config with all defaults filled in, so rerunning it reproduces
//! the CSVs bit for bit) next to the experiment's CSV tables.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error as ThisError;

use crate::coarse::{coarse_bernoulli, Variant};
use crate::estimate::{
    coarse_entropy_dimension, correlation_dimension, dyadic_scales, local_dimension_stats, DimensionEstimate, Method,
};
use crate::formulas::{
    convolution_dimension, lq_lower_bound, lyapunov_dimension_diagonal, orthogonal_projection_dimension,
    projection_dimension, similarity_dimension, DimensionReport, Flag,
};
use crate::ifs::DEFAULT_WORD_BUDGET;
use crate::lq::{alpha_min, solve_tau, tau_lower_bound_check};
use crate::sample::{
    convolution_samples, diagonal_affine_samples, planar_projection_samples, push_samples, uniform_samples,
    DiagonalAffineIfs, DiagonalMap, PlanarIfs, SampleSet,
};
use crate::separation::{joint_separation_report, separation_report_any, SeparationReport};
use crate::{AnyIfs, Error, Literal, SymbolicMeasure};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_GUARD: i32 = 5;
pub const EXIT_INVALID: i32 = 6;
pub const EXIT_CROSS_CHECK: i32 = 7;
pub const EXIT_IO: i32 = 8;

pub const DEFAULT_OUT_DIR: &str = "fracdim-out";

/// Help text listing every output file and its columns.
pub const CSV_SCHEMAS: &str = "\
Outputs (written to --out, else `output` from the config, else ./fracdim-out):
  report.txt            plain-text report: resolved config, results, every
                        dimension prediction with its hypothesis flags
  resolved_config.toml  the config with all defaults filled in

CSV tables (UTF-8, comma separated, one header row):
  separation.csv  (separation, dims)
      level,min_gap,min_gap_exact,witness_a,witness_b
  dims.csv        (dims)
      quantity,value
  tau.csv         (tau)
      q,tau,lq_dim,residual,norm_q,norm_inf,dropped
  coarse.csv      (coarse)
      word,good,weight,block_ratio
  samples.csv     (sample; two leading `#` lines carry description and seed)
      x            for line samples
      x,y          for planar samples
  estimates.csv   (estimate, convolve, project, affine)
      target,method,estimate,standard_error,finest,coarsest,iqr,dropped_centers,samples_used
  scales.csv      (estimate, convolve, project, affine)
      target,method,scale,value,count

Exit codes: 0 ok, 2 usage, 3 config parse, 4 resource budget, 5 resolution
guard, 6 invalid input, 7 internal cross-check, 8 I/O. On failure a JSON
error record is printed to stderr.";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Separation,
    Dims,
    Tau,
    Coarse,
    Sample,
    Estimate,
    Convolve,
    Project,
    Affine,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Separation,
        Kind::Dims,
        Kind::Tau,
        Kind::Coarse,
        Kind::Sample,
        Kind::Estimate,
        Kind::Convolve,
        Kind::Project,
        Kind::Affine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Separation => "separation",
            Kind::Dims => "dims",
            Kind::Tau => "tau",
            Kind::Coarse => "coarse",
            Kind::Sample => "sample",
            Kind::Estimate => "estimate",
            Kind::Convolve => "convolve",
            Kind::Project => "project",
            Kind::Affine => "affine",
        }
    }

    fn needs_seed(self) -> bool {
        matches!(self, Kind::Sample | Kind::Estimate | Kind::Convolve | Kind::Project | Kind::Affine)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{message}")]
    Config {
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },
    #[error(transparent)]
    Library(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError::Config { message: message.into(), line: None, column: None }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_PARSE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Library(e) => match e {
                Error::Parse(_) => EXIT_PARSE,
                Error::Budget { .. } => EXIT_BUDGET,
                Error::Guard { .. } => EXIT_GUARD,
                Error::CrossCheck(_) => EXIT_CROSS_CHECK,
                _ => EXIT_INVALID,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_PARSE => "parse",
            EXIT_BUDGET => "budget",
            EXIT_GUARD => "guard",
            EXIT_CROSS_CHECK => "cross_check",
            EXIT_IO => "io",
            _ => "invalid_input",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        let mut rec = serde_json::Map::new();
        rec.insert("status".into(), "error".into());
        rec.insert("kind".into(), self.kind().into());
        rec.insert("exit_code".into(), self.exit_code().into());
        rec.insert("message".into(), self.to_string().into());
        match self {
            CliError::Config { line, column, .. } => {
                if let (Some(l), Some(c)) = (line, column) {
                    rec.insert("line".into(), (*l).into());
                    rec.insert("column".into(), (*c).into());
                }
            }
            CliError::Library(Error::Budget { needed, budget }) => {
                rec.insert("needed".into(), needed.to_string().into());
                rec.insert("budget".into(), budget.to_string().into());
            }
            CliError::Library(Error::Guard { finest, bound, required_depth }) => {
                rec.insert("finest".into(), (*finest).into());
                rec.insert("bound".into(), (*bound).into());
                if let Some(d) = required_depth {
                    rec.insert("required_depth".into(), (*d).into());
                }
            }
            _ => {}
        }
        serde_json::Value::Object(rec).to_string()
    }
}

/// A number written as `"p/q"`, an integer, or a decimal.
///
/// The original text is kept so the resolved config reproduces the same
/// literal (and hence the same number mode).
#[derive(Clone, Debug, PartialEq)]
pub struct Num {
    pub text: String,
    pub value: Literal,
}

impl Num {
    pub fn parse(text: &str) -> Result<Self, Error> {
        Ok(Num { text: text.to_string(), value: text.parse()? })
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a string such as \"1/3\" or \"0.25\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                Num::parse(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                self.visit_str(&v.to_string())
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                self.visit_str(&v.to_string())
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                if !v.is_finite() {
                    return Err(E::custom(format!("non-finite number {v}")));
                }
                self.visit_str(&format!("{v:?}"))
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ifs: Option<LineIfsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<SeparationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coarse: Option<CoarseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convolve: Option<ConvolveConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planar: Option<PlanarConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub project: Option<ProjectConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineConfig>,
}

/// 1-D system as `[ratio, offset]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineIfsConfig {
    pub maps: Vec<[Num; 2]>,
}

/// Exactly one of `bernoulli` or `markov`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bernoulli: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub markov: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationConfig {
    pub max_level: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseConfig {
    pub m: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub variant: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    pub q: Option<Vec<f64>>,
    pub alpha_min: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub depth: Option<usize>,
    pub count: Option<usize>,
}

/// Scales run over `2^-coarsest ..= 2^-finest`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub coarsest: Option<i32>,
    pub finest: Option<i32>,
    pub methods: Option<Vec<String>>,
    /// 0 estimates the configured measure; 1 or 2 estimates Lebesgue measure
    /// on the unit interval or square instead.
    pub calibration: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolveConfig {
    pub t: Option<f64>,
    pub ifs: LineIfsConfig,
    pub measure: MeasureConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarConfig {
    pub ratio: Num,
    /// Rotation angle in radians.
    pub angle: f64,
    pub reflect: Option<bool>,
    pub translations: Vec<[Num; 2]>,
    /// User claim that `U^n ≠ Id` for every `n ≥ 1`; absent means unknown.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irrational_rotation: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub z_angles: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalMapConfig {
    pub a: Num,
    pub b: Num,
    pub s: Num,
    pub t: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    pub maps: Vec<DiagonalMapConfig>,
    /// User claim that the coding map is finite-to-one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_to_one: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub open_set_condition: Option<bool>,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses a config document; errors carry 1-based line and column.
pub fn parse_config(src: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(src).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = line_col(src, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        let at = line.map(|l| format!(" at line {l}, column {}", column.unwrap_or(1))).unwrap_or_default();
        CliError::Config { message: format!("config{at}: {}", e.message().trim()), line, column }
    })
}

const ALL_METHODS: [&str; 3] = ["coarse-entropy", "local-dimension", "correlation"];

fn parse_method(name: &str) -> Result<Method, CliError> {
    match name {
        "coarse-entropy" => Ok(Method::CoarseEntropy),
        "local-dimension" => Ok(Method::LocalDimension),
        "correlation" => Ok(Method::Correlation),
        _ => Err(CliError::config(format!("unknown estimator '{name}', expected one of {}", ALL_METHODS.join(", ")))),
    }
}

fn required<'a, T>(section: &'a Option<T>, name: &str, kind: Kind) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| CliError::config(format!("`{kind}` needs a [{name}] section")))
}

/// Fills every default the experiment uses and rejects sections it ignores.
pub fn resolve(mut cfg: ExperimentConfig, kind: Kind) -> Result<ExperimentConfig, CliError> {
    if let Some(k) = &cfg.kind {
        if k != kind.name() {
            return Err(CliError::config(format!("config is for `{k}` but the subcommand is `{kind}`")));
        }
    }
    cfg.kind = Some(kind.name().to_string());
    if kind.needs_seed() && cfg.seed.is_none() {
        return Err(CliError::config(format!("`{kind}` draws random samples and needs an explicit `seed`")));
    }
    cfg.budget.get_or_insert(DEFAULT_WORD_BUDGET as u64);

    let calibration = cfg.estimate.as_ref().and_then(|e| e.calibration).unwrap_or(0);
    let uses = |section: &str| -> bool {
        match section {
            "ifs" | "measure" => match kind {
                Kind::Project | Kind::Affine => section == "measure",
                Kind::Separation => section == "ifs",
                Kind::Estimate => calibration == 0,
                _ => true,
            },
            "separation" => matches!(kind, Kind::Separation | Kind::Dims | Kind::Convolve),
            "coarse" => kind == Kind::Coarse,
            "tau" => kind == Kind::Tau,
            "sampling" => kind.needs_seed() && !(kind == Kind::Estimate && calibration != 0),
            "estimate" => matches!(kind, Kind::Estimate | Kind::Convolve | Kind::Project | Kind::Affine),
            "convolve" => kind == Kind::Convolve,
            "planar" | "project" => kind == Kind::Project,
            "affine" => kind == Kind::Affine,
            _ => false,
        }
    };
    let present = [
        ("ifs", cfg.ifs.is_some()),
        ("measure", cfg.measure.is_some()),
        ("separation", cfg.separation.is_some()),
        ("coarse", cfg.coarse.is_some()),
        ("tau", cfg.tau.is_some()),
        ("sampling", cfg.sampling.is_some()),
        ("estimate", cfg.estimate.is_some()),
        ("convolve", cfg.convolve.is_some()),
        ("planar", cfg.planar.is_some()),
        ("project", cfg.project.is_some()),
        ("affine", cfg.affine.is_some()),
    ];
    for (name, is_present) in present {
        if is_present && !uses(name) {
            return Err(CliError::config(format!("section [{name}] is not used by `{kind}`")));
        }
    }
    if kind == Kind::Sample && cfg.sampling.is_none() {
        cfg.sampling = Some(SamplingConfig::default());
    }

    for name in ["ifs", "measure"] {
        if uses(name) {
            let missing = if name == "ifs" { cfg.ifs.is_none() } else { cfg.measure.is_none() };
            if missing {
                return Err(CliError::config(format!("`{kind}` needs a [{name}] section")));
            }
        }
    }
    if uses("separation") {
        let s = cfg.separation.get_or_insert_with(Default::default);
        s.max_level.get_or_insert(8);
    }
    if let Some(c) = cfg.coarse.as_mut() {
        let v = c.variant.get_or_insert_with(|| "full".into());
        v.parse::<Variant>()?;
    } else if kind == Kind::Coarse {
        required(&cfg.coarse, "coarse", kind)?;
    }
    if uses("tau") {
        let t = cfg.tau.get_or_insert_with(Default::default);
        t.q.get_or_insert_with(|| vec![1.5, 2.0, 3.0, 5.0, 10.0, 50.0]);
        t.alpha_min.get_or_insert(true);
    }
    if uses("sampling") {
        let s = cfg.sampling.get_or_insert_with(Default::default);
        s.depth.get_or_insert(25);
        s.count.get_or_insert(100_000);
    }
    if uses("estimate") {
        let e = cfg.estimate.get_or_insert_with(Default::default);
        e.coarsest.get_or_insert(6);
        e.finest.get_or_insert(12);
        e.calibration.get_or_insert(0);
        let methods = e.methods.get_or_insert_with(|| ALL_METHODS.iter().map(|m| m.to_string()).collect());
        if methods.is_empty() {
            return Err(CliError::config("[estimate] methods is empty"));
        }
        for m in methods.iter() {
            parse_method(m)?;
        }
        if e.finest <= e.coarsest {
            return Err(CliError::config("[estimate] finest must exceed coarsest"));
        }
        if calibration > 2 || (calibration != 0 && kind != Kind::Estimate) {
            return Err(CliError::config("[estimate] calibration must be 0, or 1 or 2 for `estimate`"));
        }
    }
    if kind == Kind::Convolve {
        required(&cfg.convolve, "convolve", kind)?;
        cfg.convolve.as_mut().expect("checked").t.get_or_insert(1.0);
    }
    if kind == Kind::Project {
        let p = required(&cfg.planar, "planar", kind)?;
        let _ = p;
        cfg.planar.as_mut().expect("checked").reflect.get_or_insert(false);
        let pr = cfg.project.get_or_insert_with(Default::default);
        pr.z_angles.get_or_insert_with(|| vec![0.0, 0.4, 1.1, 2.0]);
    }
    if kind == Kind::Affine {
        required(&cfg.affine, "affine", kind)?;
    }
    Ok(cfg)
}

/// Text of the resolved config, as written to `resolved_config.toml`.
pub fn render_config(cfg: &ExperimentConfig) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::config(format!("cannot render config: {e}")))
}

fn build_ifs(c: &LineIfsConfig) -> Result<AnyIfs, Error> {
    let pairs: Vec<(Literal, Literal)> = c.maps.iter().map(|[r, a]| (r.value.clone(), a.value.clone())).collect();
    AnyIfs::from_literals(&pairs)
}

fn build_measure(c: &MeasureConfig, alphabet: Option<usize>) -> Result<SymbolicMeasure, CliError> {
    let mu = match (&c.bernoulli, &c.markov) {
        (Some(p), None) => SymbolicMeasure::bernoulli(p.clone())?,
        (None, Some(t)) => SymbolicMeasure::markov(t.clone())?,
        _ => return Err(CliError::config("[measure] needs exactly one of `bernoulli` or `markov`")),
    };
    if let Some(n) = alphabet {
        if mu.len() != n {
            return Err(Error::AlphabetMismatch { measure: mu.len(), system: n }.into());
        }
    }
    Ok(mu)
}

fn bernoulli_weights(mu: &SymbolicMeasure, what: &str) -> Result<Vec<f64>, CliError> {
    match mu {
        SymbolicMeasure::Bernoulli { p } => Ok(p.clone()),
        SymbolicMeasure::Markov { .. } => Err(Error::Unsupported(format!("{what} needs a Bernoulli measure")).into()),
    }
}

/// Common ratio literal of a homogeneous system.
fn common_ratio_literal(c: &LineIfsConfig) -> Result<Literal, CliError> {
    let first = &c.maps[0][0].value;
    if c.maps.iter().any(|[r, _]| r.value.value() != first.value()) {
        return Err(Error::Unsupported("the convolution formula needs homogeneous systems".into()).into());
    }
    Ok(first.clone())
}

fn separation_flag(sep: &SeparationReport) -> Flag {
    if sep.has_exact_overlap() {
        Flag::False
    } else {
        Flag::from_bool(sep.separated_evidence())
    }
}

/// Output of one run, before it is written to disk.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub report: String,
    /// `(file name, contents)`.
    pub tables: Vec<(String, String)>,
}

struct Table {
    name: &'static str,
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_error)?;
        Ok(Table { name, w })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(csv_error)
    }

    fn finish(self) -> Result<(String, String), CliError> {
        let bytes = self.w.into_inner().map_err(|e| csv_error(e.into_error().into()))?;
        Ok((self.name.to_string(), String::from_utf8(bytes).expect("csv of UTF-8 fields")))
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io { path: "<csv buffer>".into(), source: std::io::Error::other(e) }
}

fn fmt_report(out: &mut String, r: &DimensionReport) {
    let _ = writeln!(out, "[{}] predicted = {:.6}", r.name, r.predicted);
    for (k, v) in &r.inputs {
        let _ = writeln!(out, "  input {k} = {v}");
    }
    for (k, v) in &r.flags {
        let _ = writeln!(out, "  flag {k}: {v}");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "  warning: {w}");
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

struct Estimates {
    summary: Table,
    scales: Table,
    results: Vec<(String, DimensionEstimate)>,
}

impl Estimates {
    fn new() -> Result<Self, CliError> {
        Ok(Estimates {
            summary: Table::new(
                "estimates.csv",
                &[
                    "target",
                    "method",
                    "estimate",
                    "standard_error",
                    "finest",
                    "coarsest",
                    "iqr",
                    "dropped_centers",
                    "samples_used",
                ],
            )?,
            scales: Table::new("scales.csv", &["target", "method", "scale", "value", "count"])?,
            results: Vec::new(),
        })
    }

    fn run(&mut self, target: &str, samples: &SampleSet, cfg: &EstimateConfig) -> Result<(), CliError> {
        let radii = dyadic_scales(cfg.coarsest.expect("resolved")..=cfg.finest.expect("resolved"));
        for name in cfg.methods.as_ref().expect("resolved") {
            let est = match parse_method(name)? {
                Method::CoarseEntropy => coarse_entropy_dimension(samples, &radii)?,
                Method::LocalDimension => local_dimension_stats(samples, &radii)?,
                Method::Correlation => correlation_dimension(samples, &radii)?,
            };
            self.summary.row([
                target.to_string(),
                est.method.to_string(),
                est.estimate.to_string(),
                est.standard_error.to_string(),
                est.finest.to_string(),
                est.coarsest.to_string(),
                opt(est.iqr),
                est.dropped_centers.to_string(),
                est.samples_used.to_string(),
            ])?;
            for s in &est.per_scale {
                self.scales.row([
                    target.to_string(),
                    est.method.to_string(),
                    s.scale.to_string(),
                    s.value.to_string(),
                    s.count.to_string(),
                ])?;
            }
            self.results.push((target.to_string(), est));
        }
        Ok(())
    }

    fn write_summary(&self, out: &mut String) {
        let _ = writeln!(out, "estimates:");
        for (target, e) in &self.results {
            let _ = writeln!(
                out,
                "  {target:<12} {:<16} {:.4} (se {:.4}, scales {:e}..{:e}, {} samples)",
                e.method.to_string(),
                e.estimate,
                e.standard_error,
                e.coarsest,
                e.finest,
                e.samples_used
            );
        }
    }

    fn finish(self, tables: &mut Vec<(String, String)>) -> Result<(), CliError> {
        tables.push(self.summary.finish()?);
        tables.push(self.scales.finish()?);
        Ok(())
    }
}

fn separation_table(sep: &SeparationReport) -> Result<(String, String), CliError> {
    let mut t = Table::new("separation.csv", &["level", "min_gap", "min_gap_exact", "witness_a", "witness_b"])?;
    for rec in &sep.per_level {
        let (a, b) = rec.witness.as_ref().map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        t.row([rec.level.to_string(), rec.min_gap.to_string(), rec.min_gap_text.clone(), a, b])?;
    }
    t.finish()
}

fn write_separation(out: &mut String, title: &str, sep: &SeparationReport) {
    let _ = writeln!(out, "{title} ({} mode):", sep.mode);
    for rec in &sep.per_level {
        let w = rec.witness.as_ref().map(|(a, b)| format!(" witness {a} / {b}")).unwrap_or_default();
        let _ = writeln!(out, "  level {:>2}: min gap {}{w}", rec.level, rec.min_gap_text);
    }
    match &sep.exact_overlap {
        Some((n, a, b)) => {
            let _ = writeln!(out, "  finding: exact overlap at level {n}, words {a} and {b} induce the same map");
        }
        None => {
            let _ = writeln!(out, "  finding: no exact overlap up to level {}", sep.per_level.len());
        }
    }
    match sep.c_estimate {
        Some(c) => {
            let _ = writeln!(out, "  separation constant estimate c = {c}");
        }
        None => {
            let _ = writeln!(out, "  separation constant estimate: none");
        }
    }
    for n in &sep.notes {
        let _ = writeln!(out, "  note: {n}");
    }
}

/// Runs a resolved config and returns the report and tables.
pub fn execute(cfg: &ExperimentConfig, kind: Kind) -> Result<Artifacts, CliError> {
    let budget = cfg.budget.expect("resolved") as u128;
    let mut out = String::new();
    let mut tables = Vec::new();
    let mut reports: Vec<DimensionReport> = Vec::new();

    let ifs = cfg.ifs.as_ref().map(build_ifs).transpose()?;
    let mu = match &cfg.measure {
        Some(m) => Some(build_measure(m, ifs.as_ref().map(AnyIfs::len))?),
        None => None,
    };

    match kind {
        Kind::Separation => {
            let ifs = ifs.expect("resolved");
            let max_level = cfg.separation.as_ref().and_then(|s| s.max_level).expect("resolved");
            let sep = separation_report_any(&ifs, max_level, budget)?;
            write_separation(&mut out, "separation scan", &sep);
            tables.push(separation_table(&sep)?);
        }
        Kind::Dims => {
            let (ifs, mu) = (ifs.expect("resolved"), mu.expect("resolved"));
            let ratios = ifs.ratios_f64();
            let stats = mu.stats(&ratios)?;
            let (h, chi) = (stats.entropy_bits, stats.lyapunov_bits);
            let s = similarity_dimension(&ifs)?;
            let max_level = cfg.separation.as_ref().and_then(|s| s.max_level).expect("resolved");
            let sep = separation_report_any(&ifs, max_level, budget)?;
            let sep_flag = separation_flag(&sep);

            let predicted = projection_dimension(h, chi)?;
            reports.push(
                DimensionReport::new("projection", predicted)
                    .input("h", h)
                    .input("chi", chi)
                    .input("s", s)
                    .flag("exponential separation evidence", sep_flag),
            );
            // Reference self-similar measure with weights |r|^s.
            let reference: Vec<f64> = ratios.iter().map(|r| r.abs().powf(s)).collect();
            let am = alpha_min(&reference, &ratios)?;
            let lb = lq_lower_bound(h, chi, s, am.value)?;
            reports.push(
                DimensionReport::new("lq lower bound", lb.bound)
                    .input("h", h)
                    .input("chi", chi)
                    .input("s", s)
                    .input("alpha_min", am.value)
                    .flag("exponential separation evidence", sep_flag),
            );

            let _ = writeln!(out, "entropy h = {h:.6} bits");
            let _ = writeln!(out, "Lyapunov exponent chi = {chi:.6} bits");
            let _ = writeln!(out, "similarity dimension s = {s:.5}");
            let _ = writeln!(out, "predicted dim = {predicted:.5}");
            let _ = writeln!(out, "alpha_min of reference measure = {:.6}", am.value);
            let _ = writeln!(out, "lower bound h/(-chi) - (s - alpha_min) = {:.6}", lb.bound);
            write_separation(&mut out, "separation scan", &sep);

            let mut t = Table::new("dims.csv", &["quantity", "value"])?;
            for (k, v) in [
                ("entropy_bits", h),
                ("lyapunov_bits", chi),
                ("similarity_dimension", s),
                ("projection_dimension", predicted),
                ("alpha_min_reference", am.value),
                ("lq_lower_bound", lb.bound),
            ] {
                t.row([k.to_string(), v.to_string()])?;
            }
            tables.push(t.finish()?);
            tables.push(separation_table(&sep)?);
        }
        Kind::Tau => {
            let (ifs, mu) = (ifs.expect("resolved"), mu.expect("resolved"));
            let p = bernoulli_weights(&mu, "the moment equation")?;
            let ratios = ifs.ratios_f64();
            let tc = cfg.tau.as_ref().expect("resolved");
            let mut t = Table::new("tau.csv", &["q", "tau", "lq_dim", "residual", "norm_q", "norm_inf", "dropped"])?;
            let _ = writeln!(out, "moment equation sum p^q |r|^(-tau) = 1:");
            for &q in tc.q.as_ref().expect("resolved") {
                let pt = solve_tau(&p, &ratios, q)?;
                let _ = writeln!(out, "  q = {q}: tau = {:.10}, D(q) = {:.10}, residual {:e}", pt.tau, pt.lq_dim, pt.residual);
                t.row([
                    q.to_string(),
                    pt.tau.to_string(),
                    pt.lq_dim.to_string(),
                    pt.residual.to_string(),
                    pt.norm_q.to_string(),
                    pt.norm_inf.to_string(),
                    pt.dropped.to_string(),
                ])?;
            }
            tables.push(t.finish()?);
            if tc.alpha_min == Some(true) {
                let am = alpha_min(&p, &ratios)?;
                let _ = writeln!(
                    out,
                    "alpha_min = {:.8} (candidate {:.8}, slopes {:.8} / {:.8})",
                    am.value, am.candidate, am.slopes[0], am.slopes[1]
                );
            }
        }
        Kind::Coarse => {
            let (ifs, mu) = (ifs.expect("resolved"), mu.expect("resolved"));
            let cc = cfg.coarse.as_ref().expect("resolved");
            let variant: Variant = cc.variant.as_deref().expect("resolved").parse()?;
            let cg = coarse_bernoulli(&mu, &ifs, cc.m, cc.delta, cc.epsilon, variant, budget)?;
            let _ = writeln!(out, "coarse graining m = {}, delta = {}, epsilon = {}, variant {}", cg.m, cg.delta, cg.epsilon, cg.variant);
            let _ = writeln!(out, "good words: {} of {}", cg.good_count(), cg.weights.len());
            let _ = writeln!(out, "good mass = {}", cg.good_mass);
            let _ = writeln!(out, "normalizer c = {}", cg.normalizer);
            let _ = writeln!(out, "sum of weights = {}", cg.weight_sum());
            let _ = writeln!(out, "flag good_mass > 1 - delta: {}", cg.good_mass_ok());
            let _ = writeln!(out, "flag 1/epsilon > log2|alphabet|: {}", cg.epsilon_ok());
            let _ = writeln!(out, "flag c in [1/2, 2]: {}", cg.c_in_bounds());
            if !cg.hypotheses_hold() {
                let _ = writeln!(out, "warning: hypotheses do not hold; the c bound is not asserted");
            }
            if variant == Variant::Full && cg.delta > 0.0 && cg.delta < 1.0 {
                let tb = tau_lower_bound_check(&cg, &ifs)?;
                let _ = writeln!(out, "tau lower bound at q = 1/delta = {}:", tb.q);
                let _ = writeln!(out, "  tau/(q-1) = {} vs (h-delta)/(delta-chi) - delta = {}: holds {}", tb.lhs, tb.rhs, tb.holds);
                let _ = writeln!(
                    out,
                    "  side conditions: good mass {}, epsilon {}, epsilon small {}, delta < h {}, m large {}",
                    tb.good_mass_ok, tb.epsilon_ok, tb.epsilon_small, tb.delta_below_h, tb.m_large
                );
                if !tb.side_conditions_met() {
                    let _ = writeln!(out, "  warning: side conditions fail; the inequality is reported, not asserted");
                }
            }
            let mut t = Table::new("coarse.csv", &["word", "good", "weight", "block_ratio"])?;
            let words = crate::ifs::words(mu.len(), cc.m, budget)?;
            for (i, w) in words.enumerate() {
                t.row([w.to_string(), cg.good[i].to_string(), cg.weights[i].to_string(), cg.block_ratios[i].to_string()])?;
            }
            tables.push(t.finish()?);
        }
        Kind::Sample => {
            let (ifs, mu) = (ifs.expect("resolved"), mu.expect("resolved"));
            let sc = cfg.sampling.as_ref().expect("resolved");
            let samples = push_samples(&mu, &ifs, sc.depth.expect("resolved"), sc.count.expect("resolved"), cfg.seed.expect("resolved"))?;
            let _ = writeln!(out, "{} samples, depth {}, truncation error <= {:e}", samples.len(), samples.depth, samples.error_bound);
            let _ = writeln!(out, "sample mean = {:?}", samples.mean());
            let mut buf = Vec::new();
            samples.write_csv(&mut buf).map_err(|e| CliError::io(Path::new("samples.csv"), e))?;
            tables.push(("samples.csv".into(), String::from_utf8(buf).expect("UTF-8 samples")));
        }
        Kind::Estimate => {
            let ec = cfg.estimate.as_ref().expect("resolved");
            let seed = cfg.seed.expect("resolved");
            let mut est = Estimates::new()?;
            let calibration = ec.calibration.expect("resolved");
            if calibration != 0 {
                let count = cfg.sampling.as_ref().and_then(|s| s.count).unwrap_or(100_000);
                let samples = uniform_samples(calibration, count, seed)?;
                est.run("lebesgue", &samples, ec)?;
                reports.push(DimensionReport::new("lebesgue calibration", calibration as f64));
            } else {
                let (ifs, mu) = (ifs.expect("resolved"), mu.expect("resolved"));
                let sc = cfg.sampling.as_ref().expect("resolved");
                let stats = mu.stats(&ifs.ratios_f64())?;
                let predicted = projection_dimension(stats.entropy_bits, stats.lyapunov_bits)?;
                let sep = separation_report_any(&ifs, 8, budget)?;
                reports.push(
                    DimensionReport::new("projection", predicted)
                        .input("h", stats.entropy_bits)
                        .input("chi", stats.lyapunov_bits)
                        .flag("exponential separation evidence", separation_flag(&sep)),
                );
                let samples = push_samples(&mu, &ifs, sc.depth.expect("resolved"), sc.count.expect("resolved"), seed)?;
                est.run("measure", &samples, ec)?;
            }
            est.write_summary(&mut out);
            est.finish(&mut tables)?;
        }
        Kind::Convolve => {
            let (ifs, mu) = (ifs.expect("resolved"), mu.expect("resolved"));
            let cc = cfg.convolve.as_ref().expect("resolved");
            let ifs2 = build_ifs(&cc.ifs)?;
            let mu2 = build_measure(&cc.measure, Some(ifs2.len()))?;
            let t = cc.t.expect("resolved");
            let r1 = common_ratio_literal(cfg.ifs.as_ref().expect("resolved"))?;
            let r2 = common_ratio_literal(&cc.ifs)?;
            let h1 = mu.entropy();
            let h2 = mu2.entropy();
            let max_level = cfg.separation.as_ref().and_then(|s| s.max_level).expect("resolved");
            let joint = joint_separation_report(&ifs, &ifs2, max_level, budget)?;
            let flag = if joint.first.has_exact_overlap() || joint.second.has_exact_overlap() {
                Flag::False
            } else {
                Flag::from_bool(joint.separated_evidence())
            };
            let mut report = convolution_dimension(h1, &r1, h2, &r2)?.flag("exponential separation evidence", flag);
            if t == 0.0 {
                report = report.warn("t = 0 reduces the convolution to the first factor");
            }
            let _ = writeln!(out, "convolution X + t*Y with t = {t}");
            write_separation(&mut out, "first system", &joint.first);
            write_separation(&mut out, "second system", &joint.second);
            reports.push(report);

            let sc = cfg.sampling.as_ref().expect("resolved");
            let samples = convolution_samples(
                &mu,
                &ifs,
                &mu2,
                &ifs2,
                t,
                sc.depth.expect("resolved"),
                sc.count.expect("resolved"),
                cfg.seed.expect("resolved"),
            )?;
            let mut est = Estimates::new()?;
            est.run("convolution", &samples, cfg.estimate.as_ref().expect("resolved"))?;
            est.write_summary(&mut out);
            est.finish(&mut tables)?;
        }
        Kind::Project => {
            let pc = cfg.planar.as_ref().expect("resolved");
            let translations = pc.translations.iter().map(|[x, y]| [x.to_f64(), y.to_f64()]).collect();
            let mut pifs = PlanarIfs::new(pc.ratio.to_f64(), pc.angle, pc.reflect.expect("resolved"), translations)?;
            pifs.irrational_rotation = pc.irrational_rotation;
            let mu = build_measure(cfg.measure.as_ref().expect("resolved"), Some(pifs.len()))?;
            let h = mu.entropy();
            let predicted = orthogonal_projection_dimension(h, pifs.ratio)?;
            reports.push(
                DimensionReport::new("orthogonal projection", predicted)
                    .input("h", h)
                    .input("r", pifs.ratio)
                    .flag("U^n != Id claim", Flag::from_assertion(pc.irrational_rotation)),
            );
            let sc = cfg.sampling.as_ref().expect("resolved");
            let ec = cfg.estimate.as_ref().expect("resolved");
            let mut est = Estimates::new()?;
            for (i, &z) in cfg.project.as_ref().and_then(|p| p.z_angles.as_ref()).expect("resolved").iter().enumerate() {
                let seed = crate::rng::derive_seed(cfg.seed.expect("resolved"), i as u64);
                let samples = planar_projection_samples(&mu, &pifs, z, sc.depth.expect("resolved"), sc.count.expect("resolved"), seed)?;
                est.run(&format!("z={z}"), &samples, ec)?;
            }
            est.write_summary(&mut out);
            for name in ec.methods.as_ref().expect("resolved") {
                let vals: Vec<f64> =
                    est.results.iter().filter(|(_, e)| e.method.to_string() == *name).map(|(_, e)| e.estimate).collect();
                let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let _ = writeln!(out, "spread across z ({name}) = {spread:.4}");
            }
            est.finish(&mut tables)?;
        }
        Kind::Affine => {
            let ac = cfg.affine.as_ref().expect("resolved");
            let maps = ac
                .maps
                .iter()
                .map(|m| DiagonalMap { a: m.a.to_f64(), b: m.b.to_f64(), s: m.s.to_f64(), t: m.t.to_f64() })
                .collect();
            let difs = DiagonalAffineIfs::new(maps)?;
            let mu = build_measure(cfg.measure.as_ref().expect("resolved"), Some(difs.len()))?;
            let h = mu.entropy();
            let (chi1, chi2) = difs.exponents(&mu)?.ordered();
            let dd = lyapunov_dimension_diagonal(h, chi1, chi2)?;
            let mut report = DimensionReport::new("lyapunov dimension (diagonal)", dd.value)
                .input("h", h)
                .input("chi1", chi1)
                .input("chi2", chi2)
                .flag("finite-to-one coding claim", Flag::from_assertion(ac.finite_to_one))
                .flag("open set condition claim", Flag::from_assertion(ac.open_set_condition));
            if dd.capped {
                report = report.warn("formula exceeds 2; capped at the ambient dimension");
            }
            let _ = writeln!(out, "branch: {:?}", dd.branch);
            reports.push(report);
            let sc = cfg.sampling.as_ref().expect("resolved");
            let samples = diagonal_affine_samples(&mu, &difs, sc.depth.expect("resolved"), sc.count.expect("resolved"), cfg.seed.expect("resolved"))?;
            let mut est = Estimates::new()?;
            est.run("measure", &samples, cfg.estimate.as_ref().expect("resolved"))?;
            est.write_summary(&mut out);
            est.finish(&mut tables)?;
        }
    }

    let mut report = String::new();
    let _ = writeln!(report, "fracdim {kind}");
    let _ = writeln!(report, "version {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(report, "\n== resolved config ==");
    report.push_str(&render_config(cfg)?);
    let _ = writeln!(report, "\n== results ==");
    report.push_str(&out);
    if !reports.is_empty() {
        let _ = writeln!(report, "\n== dimension reports ==");
        for r in &reports {
            fmt_report(&mut report, r);
        }
    }
    Ok(Artifacts { report, tables })
}

/// Reads, resolves and runs a config file, writing every artifact into the
/// output directory. Returns that directory.
pub fn run(kind: Kind, config_path: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let src = fs::read_to_string(config_path).map_err(|e| CliError::io(config_path, e))?;
    let cfg = resolve(parse_config(&src)?, kind)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let artifacts = execute(&cfg, kind)?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    };
    write("resolved_config.toml", &render_config(&cfg)?)?;
    write("report.txt", &artifacts.report)?;
    for (name, text) in &artifacts.tables {
        write(name, text)?;
    }
    Ok(dir)
}
