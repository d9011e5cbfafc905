//! Parameter sweeps, log-log slope fits, log-factor detection and report
//! emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::bracket;
use crate::inequality::CheckResult;
use crate::lp::{spectral_norm_bracket, IterationConfig, NormBracket};
use crate::manifolds::{sphere_lambda, Model, ModelSpec, SphereModel};
use crate::spectral::{im_resolvent, project, resolvent_sq, ResolventQuery, SpectralWindow};

pub const SCHEMA_VERSION: u32 = 1;

/// `ε(λ)` / `μ(λ)` schedules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// `c λ^ρ`.
    Power {
        rho: f64,
        #[serde(default = "unit")]
        coefficient: f64,
    },
    /// `1 / ln<λ>`.
    InvLog,
}

fn unit() -> f64 {
    1.0
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Constant { value: 1.0 }
    }
}

impl Schedule {
    pub fn eval(&self, lambda: f64) -> Result<f64> {
        let v = match *self {
            Schedule::Constant { value } => value,
            Schedule::Power { rho, coefficient } => coefficient * lambda.powf(rho),
            Schedule::InvLog => 1.0 / bracket(lambda).ln(),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("schedule value {v} at λ={lambda} is not positive")));
        }
        Ok(v)
    }
}

/// λ grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LambdaGrid {
    /// `λ = 2^j`, `j = from..=to`, optionally with `per_octave` points.
    Dyadic {
        from: i32,
        to: i32,
        #[serde(default = "one_usize")]
        per_octave: usize,
    },
    Values {
        values: Vec<f64>,
    },
    /// Sphere eigenvalues `sqrt(l(l+1))`.
    Degrees {
        degrees: Vec<usize>,
    },
}

fn one_usize() -> usize {
    1
}

impl LambdaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LambdaGrid::Dyadic { from, to, per_octave } => {
                let k = (*per_octave).max(1);
                let steps = ((to - from).max(-1) + 1) as usize;
                let count = if steps == 0 { 0 } else { (steps - 1) * k + 1 };
                (0..count)
                    .map(|i| 2f64.powf(*from as f64 + i as f64 / k as f64))
                    .collect()
            }
            LambdaGrid::Values { values } => values.clone(),
            LambdaGrid::Degrees { degrees } => degrees.iter().map(|l| sphere_lambda(*l)).collect(),
        }
    }
}

/// Swept norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    /// `||Π_{[λ, λ+ε]}||_{2->q}`.
    #[serde(rename = "cluster-2q")]
    Cluster2q,
    /// `||(A² - (λ+iμ)²)^{-1}||_{q'->q}`.
    #[serde(rename = "resolvent-q'q")]
    ResolventDual,
    /// `||(A² - (λ+iμ)²)^{-1}||_{2->q}`.
    #[serde(rename = "resolvent-2q")]
    Resolvent2q,
    /// `||Im (A² - (λ+iμ)²)^{-1}||_{q'->q}`.
    #[serde(rename = "im-resolvent")]
    ImResolvent,
}

impl Quantity {
    pub fn id(&self) -> &'static str {
        match self {
            Quantity::Cluster2q => "cluster-2q",
            Quantity::ResolventDual => "resolvent-q'q",
            Quantity::Resolvent2q => "resolvent-2q",
            Quantity::ImResolvent => "im-resolvent",
        }
    }
}

/// Iteration knobs exposed in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationSettings {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

fn default_restarts() -> usize {
    IterationConfig::default().restarts
}

fn default_iters() -> usize {
    IterationConfig::default().max_iters
}

fn default_tol() -> f64 {
    IterationConfig::default().tolerance
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            max_iters: default_iters(),
            tolerance: default_tol(),
        }
    }
}

/// A sweep declared in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelSpec,
    pub quantity: Quantity,
    #[serde(with = "crate::serde_float::vec")]
    pub q: Vec<f64>,
    pub lambda: LambdaGrid,
    #[serde(default)]
    pub eps: Schedule,
    /// Defaults to the `ε` schedule.
    #[serde(default)]
    pub mu: Option<Schedule>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Allow `λ` beyond the model's trusted range.
    #[serde(default)]
    pub allow_untrusted: bool,
    #[serde(default)]
    pub iteration: IterationSettings,
}

fn default_seed() -> u64 {
    IterationConfig::default().seed
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() {
            return Err(Error::Config("empty q list".into()));
        }
        if let Some(q) = self.q.iter().find(|q| !(**q >= 2.0)) {
            return Err(Error::Config(format!("q = {q} < 2")));
        }
        if !self.allow_untrusted {
            let cut = self.model.regime_cutoff();
            if let Some(l) = self.lambda.values().iter().find(|l| **l > cut * (1.0 + 1e-12)) {
                return Err(Error::Config(format!(
                    "λ = {l} exceeds the trusted range {cut} of {}",
                    self.model.label()
                )));
            }
        }
        self.iteration_config().validate()
    }

    pub fn iteration_config(&self) -> IterationConfig {
        IterationConfig {
            restarts: self.iteration.restarts,
            max_iters: self.iteration.max_iters,
            tolerance: self.iteration.tolerance,
            seed: self.seed,
        }
    }
}

/// One measured point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub model: String,
    pub quantity: Quantity,
    #[serde(with = "crate::serde_float")]
    pub q: f64,
    pub lambda: f64,
    pub eps: f64,
    pub mu: f64,
    pub bracket: NormBracket,
    pub seconds: f64,
}

/// Nearest sphere degree to `λ`.
pub fn snap_degree(lambda: f64) -> usize {
    // l(l+1) = λ²  =>  l = (sqrt(1 + 4λ²) - 1)/2
    (((1.0 + 4.0 * lambda * lambda).sqrt() - 1.0) / 2.0).round().max(0.0) as usize
}

/// Single-degree band with quadrature exact for sextic products of
/// degree-`l` harmonics.
pub fn sphere_band_model(l: usize) -> SphereModel {
    SphereModel {
        l_min: l,
        l_max: l,
        n_theta: 3 * l + 1,
        n_phi: 6 * l + 1,
    }
}

fn measure(model: &Model, quantity: Quantity, q: f64, lambda: f64, eps: f64, mu: f64, cfg: &IterationConfig) -> Result<NormBracket> {
    let op = &model.op;
    let qd = if q.is_infinite() { 1.0 } else { q / (q - 1.0) };
    match quantity {
        Quantity::Cluster2q => {
            let p = project(op, &SpectralWindow::new(lambda, lambda + eps)?);
            spectral_norm_bracket(&p, 2.0, q, cfg)
        }
        Quantity::Resolvent2q => {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, mu)?)?;
            spectral_norm_bracket(&r, 2.0, q, cfg)
        }
        Quantity::ResolventDual | Quantity::ImResolvent => {
            if q.is_infinite() {
                return Err(Error::UnsupportedSpaces("q' -> q quantities need q < inf".into()));
            }
            let query = ResolventQuery::new(lambda, mu)?;
            let m = if quantity == Quantity::ImResolvent {
                im_resolvent(op, &query)?
            } else {
                resolvent_sq(op, &query)?
            };
            spectral_norm_bracket(&m, qd, q, cfg)
        }
    }
}

/// Evaluate all `(λ, q)` pairs. Points run in parallel; each uses a seed
/// derived from the config seed and its index, so results are deterministic.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let lambdas = config.lambda.values();
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let base = config.iteration_config();
    let mu_sched = config.mu.clone().unwrap_or_else(|| config.eps.clone());
    let sphere = matches!(config.model, ModelSpec::Sphere(_));
    let shared = if sphere { None } else { Some(config.model.build()?) };
    let label = config.model.label();
    let mut jobs = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        for (j, &q) in config.q.iter().enumerate() {
            jobs.push((i, lambda, j, q));
        }
    }
    jobs.par_iter()
        .map(|&(i, lambda, j, q)| {
            let (model, lambda) = match &shared {
                Some(m) => (std::borrow::Cow::Borrowed(m), lambda),
                None => {
                    let l = snap_degree(lambda);
                    let m = ModelSpec::Sphere(sphere_band_model(l)).build()?;
                    (std::borrow::Cow::Owned(m), sphere_lambda(l))
                }
            };
            let eps = config.eps.eval(lambda)?;
            let mu = mu_sched.eval(lambda)?;
            let cfg = base.with_seed(base.seed.wrapping_add(((i as u64) << 20) ^ j as u64));
            let start = Instant::now();
            let bracket = measure(&model, config.quantity, q, lambda, eps, mu, &cfg)?;
            Ok(SweepRecord {
                model: label.clone(),
                quantity: config.quantity,
                q,
                lambda,
                eps,
                mu,
                bracket,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Which side of the bracket is regressed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Lower,
    #[default]
    Midpoint,
    Upper,
}

impl Statistic {
    pub fn of(&self, b: &NormBracket) -> f64 {
        match self {
            Statistic::Lower => b.lower,
            Statistic::Midpoint => b.midpoint(),
            Statistic::Upper => b.upper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Max `|fit - data|` in log space over all points used.
    pub max_residual: f64,
    /// Detected log power, when enough points were available.
    pub log_power: Option<u32>,
    pub points: usize,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::param(format!("slope fit needs >= 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::param(format!("slope fit needs positive finite data, got {p:?}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::param("degenerate slope fit: all abscissae equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (intercept + slope * x - y).abs())
        .fold(0.0, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        max_residual,
        log_power: None,
        points: points.len(),
    })
}

/// Best `ν ∈ {0,1,2,3}` with `y λ^{-slope} ≈ C (ln λ)^ν`, by max log
/// residual; ties go to the smaller `ν`.
pub fn detect_log(points: &[(f64, f64)], assumed_slope: f64) -> Result<u32> {
    if points.len() < 4 {
        return Err(Error::param(format!("log detection needs >= 4 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !(*x > 1.0 && *y > 0.0)) {
        return Err(Error::param("log detection needs λ > 1 and positive values"));
    }
    let z: Vec<f64> = points.iter().map(|(x, y)| y.ln() - assumed_slope * x.ln()).collect();
    let ll: Vec<f64> = points.iter().map(|(x, _)| x.ln().ln()).collect();
    let mut best: Option<(u32, f64)> = None;
    for nu in 0..=3u32 {
        let d: Vec<f64> = z.iter().zip(&ll).map(|(a, b)| a - nu as f64 * b).collect();
        // minimax constant: midrange
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let resid = 0.5 * (hi - lo);
        match best {
            Some((_, r)) if resid >= r - 1e-9 * r.max(1e-12) => {}
            _ => best = Some((nu, resid)),
        }
    }
    Ok(best.map_or(0, |b| b.0))
}

/// Group key of a series.
pub type SeriesKey = (String, Quantity, String);

fn q_label(q: f64) -> String {
    if q.is_infinite() {
        "inf".into()
    } else {
        format!("{q}")
    }
}

/// Records grouped by `(model, quantity, q)`, in first-appearance order
/// within a sorted map.
pub fn series(records: &[SweepRecord]) -> BTreeMap<SeriesKey, Vec<&SweepRecord>> {
    let mut out: BTreeMap<SeriesKey, Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        out.entry((r.model.clone(), r.quantity, q_label(r.q))).or_default().push(r);
    }
    out
}

/// A fit attached to one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub model: String,
    pub quantity: Quantity,
    pub q: String,
    pub statistic: Statistic,
    pub fit: FitResult,
}

/// Fit every series with at least three points.
pub fn fit_series(records: &[SweepRecord], statistic: Statistic) -> Vec<SeriesFit> {
    series(records)
        .into_iter()
        .filter_map(|((model, quantity, q), recs)| {
            let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.lambda, statistic.of(&r.bracket))).collect();
            let mut fit = fit_slope(&pts).ok()?;
            fit.log_power = detect_log(&pts, fit.slope).ok();
            Some(SeriesFit {
                model,
                quantity,
                q,
                statistic,
                fit,
            })
        })
        .collect()
}

/// Change in slope when the largest-λ point is dropped.
pub fn slope_stability(points: &[(f64, f64)]) -> Result<f64> {
    let full = fit_slope(points)?;
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.pop();
    Ok((fit_slope(&pts)?.slope - full.slope).abs())
}

/// Schema-versioned report document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    #[serde(default)]
    pub config: Option<SweepConfig>,
    pub records: Vec<SweepRecord>,
    #[serde(default)]
    pub fits: Vec<SeriesFit>,
    #[serde(default)]
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn new(config: Option<SweepConfig>, records: Vec<SweepRecord>, fits: Vec<SeriesFit>, checks: Vec<CheckResult>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            records,
            fits,
            checks,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "report schema {} is not the supported version {SCHEMA_VERSION}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub const CSV_HEADER: &str = "model,quantity,q,lambda,eps,mu,lower,upper,method,seconds";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.model),
            csv_field(r.quantity.id()),
            q_label(r.q),
            r.lambda,
            r.eps,
            r.mu,
            r.bracket.lower,
            r.bracket.upper,
            csv_field(&r.bracket.method),
            r.seconds
        );
    }
    out
}

/// One `(file name, contents)` pair per series: `λ value` lines.
pub fn to_plotdata(records: &[SweepRecord], statistic: Statistic) -> Vec<(String, String)> {
    series(records)
        .into_iter()
        .map(|((model, quantity, q), recs)| {
            let name: String = format!("{model}_{}_q{q}.dat", quantity.id())
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
                .collect();
            let mut body = format!("# {model} {} q={q} ({statistic:?})\n", quantity.id());
            for r in recs {
                let _ = writeln!(body, "{} {}", r.lambda, statistic.of(&r.bracket));
            }
            (name, body)
        })
        .collect()
}

/// Output formats of [`emit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "plotdata" => Ok(Format::Plotdata),
            other => Err(Error::param(format!("unknown format `{other}`"))),
        }
    }
}

/// Write a report under `dir`; returns the files written.
pub fn emit(report: &Report, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Csv => {
            let p = dir.join("report.csv");
            std::fs::write(&p, to_csv(&report.records))?;
            Ok(vec![p])
        }
        Format::Json => {
            let p = dir.join("report.json");
            std::fs::write(&p, report.to_json()?)?;
            Ok(vec![p])
        }
        Format::Plotdata => to_plotdata(&report.records, Statistic::Midpoint)
            .into_iter()
            .map(|(name, body)| {
                let p = dir.join(name);
                std::fs::write(&p, body)?;
                Ok(p)
            })
            .collect(),
    }
}
