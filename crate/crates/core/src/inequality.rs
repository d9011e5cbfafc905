//! Instantiation of the abstract multiplier, cluster/resolvent and quasimode
//! estimates on concrete operators.
//!
//! Every check pairs the *lower* estimate of its left-hand side with the
//! *upper* estimate of its right-hand side, so a reported pass is
//! conservative. Window norms `||Π_k||_{q'->2}` use the certified kernel
//! bound as their upper side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::bracket;
use crate::linalg::C64;
use crate::lp::{certified_upper, op_norm_power, spectral_norm_bracket, IterationConfig, NormBracket};
use crate::quadrature;
use crate::spectral::{
    im_resolvent, multiplier, project, resolvent_sq, ResolventQuery, SpectralMap, SpectralOperator,
    SpectralWindow,
};

/// Uniform partition `τ_k = εk`, `k = 0..=N+1`, `N = ⌈2λ/ε⌉`, covering
/// `J = [0, (N+1)ε] ⊇ [0, 2λ]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub lambda: f64,
    pub epsilon: f64,
    pub n: usize,
}

impl Partition {
    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && lambda > 0.0) {
            return Err(Error::param(format!(
                "partition needs lambda, eps > 0, got ({lambda}, {epsilon})"
            )));
        }
        let n = (2.0 * lambda / epsilon).ceil() as usize;
        Ok(Self {
            lambda,
            epsilon,
            n,
        })
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.epsilon * k as f64
    }

    /// Number of windows, `N + 1`.
    pub fn windows(&self) -> usize {
        self.n + 1
    }

    pub fn interval(&self) -> SpectralWindow {
        SpectralWindow {
            a: 0.0,
            b: self.tau(self.n + 1),
        }
    }

    /// Eigenvalue indices of window `k`: `[τ_k, τ_{k+1})`, closed for the last.
    pub fn window_indices(&self, op: &SpectralOperator, k: usize) -> std::ops::Range<usize> {
        let ev = op.eigenvalues();
        let lo = ev.partition_point(|t| *t < self.tau(k));
        let hi = if k == self.n {
            ev.partition_point(|t| *t <= self.tau(k + 1))
        } else {
            ev.partition_point(|t| *t < self.tau(k + 1))
        };
        lo..hi.max(lo)
    }
}

fn indicator_map(op: &SpectralOperator, range: std::ops::Range<usize>) -> SpectralMap {
    let vals = (0..op.rank())
        .map(|i| C64::new(if range.contains(&i) { 1.0 } else { 0.0 }, 0.0))
        .collect();
    SpectralMap::diagonal(op, vals).expect("rank-sized")
}

/// Per-window `||Π_k||_{q'->2}` brackets (power-iteration lower, kernel upper).
pub fn window_norm_profile(
    op: &SpectralOperator,
    partition: &Partition,
    q: f64,
    cfg: &IterationConfig,
) -> Result<Vec<NormBracket>> {
    (0..partition.windows())
        .map(|k| window_norm(op, partition.window_indices(op, k), q, cfg))
        .collect()
}

/// `||Π||_{q'->2} = ||Π||_{2->q}` for the projector onto the given indices.
pub fn window_norm(
    op: &SpectralOperator,
    range: std::ops::Range<usize>,
    q: f64,
    cfg: &IterationConfig,
) -> Result<NormBracket> {
    if range.is_empty() {
        return Ok(NormBracket::exact(0.0, "empty-window"));
    }
    let pi = indicator_map(op, range);
    spectral_norm_bracket(&pi, 2.0, q, cfg)
}

/// A scalar spectral multiplier with exact window extrema where cheap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarMultiplier {
    Constant { re: f64, im: f64 },
    Indicator { a: f64, b: f64 },
    /// `(τ² - (λ + iμ)²)^{-α}`.
    Resolvent { lambda: f64, mu: f64, alpha: f64 },
}

impl ScalarMultiplier {
    pub fn one() -> Self {
        ScalarMultiplier::Constant { re: 1.0, im: 0.0 }
    }

    pub fn resolvent(lambda: f64, mu: f64, alpha: f64) -> Self {
        ScalarMultiplier::Resolvent { lambda, mu, alpha }
    }

    pub fn eval(&self, tau: f64) -> C64 {
        match *self {
            ScalarMultiplier::Constant { re, im } => C64::new(re, im),
            ScalarMultiplier::Indicator { a, b } => {
                C64::new(if a <= tau && tau <= b { 1.0 } else { 0.0 }, 0.0)
            }
            ScalarMultiplier::Resolvent { lambda, mu, alpha } => {
                let base = C64::new(tau * tau, 0.0) - C64::new(lambda, mu).powi(2);
                if alpha == 1.0 {
                    base.inv()
                } else {
                    base.powf(-alpha)
                }
            }
        }
    }

    pub fn abs_sq(&self, tau: f64) -> f64 {
        match *self {
            ScalarMultiplier::Resolvent { lambda, mu, alpha } => {
                let d = tau * tau - lambda * lambda + mu * mu;
                (d * d + 4.0 * lambda * lambda * mu * mu).powf(-alpha)
            }
            _ => self.eval(tau).norm_sqr(),
        }
    }

    /// Maximizer of `|m|²` for the resolvent multiplier: `|m|²` is unimodal
    /// with peak at `τ* = sqrt(max(λ² - μ², 0))`.
    pub fn peak(&self) -> Option<f64> {
        match *self {
            ScalarMultiplier::Resolvent { lambda, mu, .. } => Some((lambda * lambda - mu * mu).max(0.0).sqrt()),
            _ => None,
        }
    }

    /// `(inf, sup)` of `|m|²` over `[a, b]`. Exact for the built-in kinds.
    pub fn window_extrema(&self, a: f64, b: f64) -> (f64, f64) {
        match *self {
            ScalarMultiplier::Constant { .. } => {
                let v = self.abs_sq(a);
                (v, v)
            }
            ScalarMultiplier::Indicator { a: c, b: d } => {
                let meets = a <= d && c <= b;
                let covers = c <= a && b <= d;
                (if covers { 1.0 } else { 0.0 }, if meets { 1.0 } else { 0.0 })
            }
            ScalarMultiplier::Resolvent { .. } => {
                let fa = self.abs_sq(a);
                let fb = self.abs_sq(b);
                let peak = self.peak().expect("resolvent");
                let sup = if a <= peak && peak <= b {
                    self.abs_sq(peak)
                } else {
                    fa.max(fb)
                };
                (fa.min(fb), sup)
            }
        }
    }

    /// Window sup of `|m|²` by sampling (64 interior samples plus endpoints,
    /// plus the analytic peak); used as a cross-check of `window_extrema`.
    pub fn sampled_sup(&self, a: f64, b: f64) -> f64 {
        let mut best = self.abs_sq(a).max(self.abs_sq(b));
        for i in 1..=64 {
            let t = a + (b - a) * i as f64 / 65.0;
            best = best.max(self.abs_sq(t));
        }
        if let Some(p) = self.peak() {
            if a <= p && p <= b {
                best = best.max(self.abs_sq(p));
            }
        }
        best
    }

    pub fn map(&self, op: &SpectralOperator) -> Result<SpectralMap> {
        multiplier(op, |t| self.eval(t))
    }
}

/// `M_1, M_2` of the multiplier lemma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierPair {
    pub m1: ScalarMultiplier,
    pub m2: ScalarMultiplier,
    #[serde(rename = "M1")]
    pub big_m1: f64,
    #[serde(rename = "M2")]
    pub big_m2: f64,
}

fn big_m(m: &ScalarMultiplier, partition: &Partition, windows: &[NormBracket]) -> Result<f64> {
    let mut s = 0.0;
    for (k, w) in windows.iter().enumerate() {
        let (_, sup) = m.window_extrema(partition.tau(k), partition.tau(k + 1));
        if !sup.is_finite() {
            return Err(Error::NonFiniteMultiplier(partition.tau(k)));
        }
        s += sup * w.upper * w.upper;
    }
    Ok(s.sqrt())
}

/// `M_j² = Σ_k sup_{[τ_k, τ_{k+1}]} |m_j|² ||Π_k||²_{q'->2}` with upper
/// window norms.
pub fn multiplier_constants(
    op: &SpectralOperator,
    partition: &Partition,
    q: f64,
    m1: &ScalarMultiplier,
    m2: &ScalarMultiplier,
    cfg: &IterationConfig,
) -> Result<MultiplierPair> {
    let windows = window_norm_profile(op, partition, q, cfg)?;
    multiplier_constants_with(partition, m1, m2, &windows)
}

pub fn multiplier_constants_with(
    partition: &Partition,
    m1: &ScalarMultiplier,
    m2: &ScalarMultiplier,
    windows: &[NormBracket],
) -> Result<MultiplierPair> {
    Ok(MultiplierPair {
        m1: m1.clone(),
        m2: m2.clone(),
        big_m1: big_m(m1, partition, windows)?,
        big_m2: big_m(m2, partition, windows)?,
    })
}

/// Parameters recorded with every check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckContext {
    pub lambda: f64,
    pub eps: f64,
    pub mu: f64,
    pub beta: f64,
    #[serde(with = "crate::serde_float")]
    pub q: f64,
    pub operator: String,
}

/// One verified inequality instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub estimate_id: String,
    pub lhs: NormBracket,
    #[serde(with = "crate::serde_float")]
    pub rhs: f64,
    #[serde(with = "crate::serde_float")]
    pub ratio: f64,
    pub threshold: f64,
    pub pass: bool,
    pub context: CheckContext,
}

impl CheckResult {
    fn new(id: &str, lhs: NormBracket, rhs: f64, threshold: f64, context: CheckContext) -> Self {
        let ratio = if lhs.lower == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs.lower / rhs
        };
        Self {
            estimate_id: id.to_string(),
            lhs,
            rhs,
            ratio,
            threshold,
            pass: ratio <= threshold,
            context,
        }
    }
}

/// Lemma threshold: the constant is exactly one.
pub const MULTIPLIER_LEMMA_THRESHOLD: f64 = 1.0 + 1e-9;

/// `||1_J(A) m_1 m_2(A)||_{q'->q} <= M_1 M_2`.
pub fn check_multiplier_lemma(
    op: &SpectralOperator,
    partition: &Partition,
    q: f64,
    m1: &ScalarMultiplier,
    m2: &ScalarMultiplier,
    cfg: &IterationConfig,
) -> Result<CheckResult> {
    let windows = window_norm_profile(op, partition, q, cfg)?;
    let pair = multiplier_constants_with(partition, m1, m2, &windows)?;
    let j = partition.interval();
    let map = multiplier(op, |t| {
        if j.contains(t) {
            m1.eval(t) * m2.eval(t)
        } else {
            C64::new(0.0, 0.0)
        }
    })?;
    let lhs = op_norm_power(&map, q / (q - 1.0), q, cfg)?;
    Ok(CheckResult::new(
        "L3.1",
        lhs,
        pair.big_m1 * pair.big_m2,
        MULTIPLIER_LEMMA_THRESHOLD,
        CheckContext {
            lambda: partition.lambda,
            eps: partition.epsilon,
            q,
            operator: op.label().to_string(),
            ..Default::default()
        },
    ))
}

/// Items of the cluster/resolvent proposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prop32Item {
    #[serde(rename = "3.3")]
    ClusterFromImL2,
    #[serde(rename = "3.4")]
    ResolventL2FromCluster,
    #[serde(rename = "3.5")]
    ClusterFromImLq,
    #[serde(rename = "3.6")]
    ResolventLqFromCluster,
    #[serde(rename = "3.7")]
    ResolventLqShifted,
    #[serde(rename = "3.8")]
    ResolventPower,
}

impl Prop32Item {
    pub const ALL: [Prop32Item; 6] = [
        Prop32Item::ClusterFromImL2,
        Prop32Item::ResolventL2FromCluster,
        Prop32Item::ClusterFromImLq,
        Prop32Item::ResolventLqFromCluster,
        Prop32Item::ResolventLqShifted,
        Prop32Item::ResolventPower,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Prop32Item::ClusterFromImL2 => "3.3",
            Prop32Item::ResolventL2FromCluster => "3.4",
            Prop32Item::ClusterFromImLq => "3.5",
            Prop32Item::ResolventLqFromCluster => "3.6",
            Prop32Item::ResolventLqShifted => "3.7",
            Prop32Item::ResolventPower => "3.8",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|i| i.id() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown estimate `{s}`")))
    }

    /// Regression thresholds. (3.3) and (3.5) follow from the scalar bound
    /// `(ελ) Im(τ² - (λ+iε)²)^{-1} >= 1/10` on `[λ, λ+ε]`; the others were
    /// frozen from the seeded random-model corpus (`corpus_prop32`) with a
    /// 25% margin over the observed maxima.
    pub fn threshold(&self) -> f64 {
        match self {
            Prop32Item::ClusterFromImL2 => 10.0,
            Prop32Item::ClusterFromImLq => 10.0,
            Prop32Item::ResolventL2FromCluster => FROZEN_3_4,
            Prop32Item::ResolventLqFromCluster => FROZEN_3_6,
            Prop32Item::ResolventLqShifted => FROZEN_3_7,
            Prop32Item::ResolventPower => FROZEN_3_8,
        }
    }
}

// Frozen regression constants (see `Prop32Item::threshold`): observed corpus
// maxima 0.505, 0.238, 0.559, 0.768 for (3.4), (3.6), (3.7), (3.8) with
// `prop32_corpus(96, 0xc0ffee)`, times 1.25, rounded up.
pub const FROZEN_3_4: f64 = 0.64;
pub const FROZEN_3_6: f64 = 0.30;
pub const FROZEN_3_7: f64 = 0.70;
pub const FROZEN_3_8: f64 = 0.96;

/// Parameters of a proposition check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop32Params {
    pub lambda: f64,
    pub eps: f64,
    pub mu: f64,
    pub beta: f64,
    pub q: f64,
    /// Multiplies the right-hand side; `< 1` is used to confirm that checks
    /// can fail.
    pub rhs_scale: f64,
}

impl Prop32Params {
    pub fn new(lambda: f64, eps: f64, q: f64) -> Self {
        Self {
            lambda,
            eps,
            mu: eps,
            beta: 2.0,
            q,
            rhs_scale: 1.0,
        }
    }
}

/// Evaluate one item of the proposition.
pub fn check_prop32(
    op: &SpectralOperator,
    item: Prop32Item,
    params: &Prop32Params,
    cfg: &IterationConfig,
) -> Result<CheckResult> {
    let Prop32Params {
        lambda,
        eps,
        mu,
        beta,
        q,
        rhs_scale,
    } = *params;
    if !(eps > 0.0 && eps <= lambda) {
        return Err(Error::param(format!("need 0 < eps <= lambda, got eps={eps}, lambda={lambda}")));
    }
    if !(q > 2.0 && q.is_finite()) {
        return Err(Error::param(format!("need 2 < q < inf, got {q}")));
    }
    if matches!(item, Prop32Item::ResolventLqShifted | Prop32Item::ResolventPower) && mu < eps {
        return Err(Error::param(format!("need mu >= eps, got mu={mu}, eps={eps}")));
    }
    if item == Prop32Item::ResolventPower && !(beta > 1.0) {
        return Err(Error::param(format!("need beta > 1, got {beta}")));
    }
    let qd = q / (q - 1.0);
    let el = eps * lambda;
    let partition = Partition::new(lambda, eps)?;
    let sup_window = || -> Result<f64> {
        let w = window_norm_profile(op, &partition, q, cfg)?;
        Ok(w.iter().map(|b| b.upper).fold(0.0, f64::max))
    };
    let cluster = || -> Result<NormBracket> {
        let w = SpectralWindow::new(lambda, lambda + eps)?;
        window_norm(op, op.window_indices(&w), q, cfg)
    };
    let ctx = CheckContext {
        lambda,
        eps,
        mu: if matches!(item, Prop32Item::ResolventLqShifted | Prop32Item::ResolventPower) {
            mu
        } else {
            eps
        },
        beta: if item == Prop32Item::ResolventPower { beta } else { 1.0 },
        q,
        operator: op.label().to_string(),
    };
    let (lhs, rhs) = match item {
        Prop32Item::ClusterFromImL2 => {
            let im = im_resolvent(op, &ResolventQuery::new(lambda, eps)?.localized())?;
            let r = spectral_norm_bracket(&im, qd, 2.0, cfg)?;
            (cluster()?, el * r.upper)
        }
        Prop32Item::ClusterFromImLq => {
            let im = im_resolvent(op, &ResolventQuery::new(lambda, eps)?.localized())?;
            let r = spectral_norm_bracket(&im, qd, q, cfg)?;
            let c = cluster()?;
            let sq = NormBracket::new(c.lower * c.lower, c.upper * c.upper, c.method)?;
            (sq, el * r.upper)
        }
        Prop32Item::ResolventL2FromCluster => {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, eps)?.localized())?;
            let lhs = spectral_norm_bracket(&r, qd, 2.0, cfg)?;
            (lhs, sup_window()? / el)
        }
        Prop32Item::ResolventLqFromCluster => {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, eps)?.localized())?;
            let lhs = op_norm_power(&r, qd, q, cfg)?;
            let s = sup_window()?;
            (lhs, bracket(lambda / eps).ln() * s * s / el)
        }
        Prop32Item::ResolventLqShifted => {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, mu)?.localized())?;
            let lhs = op_norm_power(&r, qd, q, cfg)?;
            let s = sup_window()?;
            let f = bracket(lambda / mu).ln() / (el * bracket(mu / lambda));
            (lhs, f * s * s)
        }
        Prop32Item::ResolventPower => {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, mu)?.with_beta(beta)?.localized())?;
            let lhs = op_norm_power(&r, qd, q, cfg)?;
            let s = sup_window()?;
            let f = el.powf(-beta) * (eps / mu).powf(beta - 1.0) * bracket(mu / lambda).powf(-beta);
            (lhs, f * s * s)
        }
    };
    Ok(CheckResult::new(item.id(), lhs, rhs * rhs_scale, item.threshold(), ctx))
}

/// One instance of the seeded proposition corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusInstance {
    pub dim: usize,
    pub seed: u64,
    pub params: Prop32Params,
}

/// Seeded random-model corpus: `λ ∈ {4, 8, 16}`, spectra uniform in
/// `[0, 2λ]`, `ε ∈ {1, 1/2}`, `μ = 2ε`, `q ∈ {4, 6}`, dimensions 20..=40.
pub fn prop32_corpus(count: usize, seed: u64) -> Vec<CorpusInstance> {
    (0..count)
        .map(|i| {
            let lambda = [4.0, 8.0, 16.0][i % 3];
            let eps = [1.0, 0.5][(i / 3) % 2];
            let q = [4.0, 6.0][(i / 6) % 2];
            let mut params = Prop32Params::new(lambda, eps, q);
            params.mu = 2.0 * eps;
            CorpusInstance {
                dim: 20 + (i * 7) % 21,
                seed: seed.wrapping_add(i as u64),
                params,
            }
        })
        .collect()
}

/// Run every item on every corpus instance. Instances fan out across
/// threads; results come back in corpus order.
pub fn run_prop32_corpus(
    corpus: &[CorpusInstance],
    items: &[Prop32Item],
    rhs_scale: f64,
    cfg: &IterationConfig,
) -> Result<Vec<CheckResult>> {
    use rayon::prelude::*;
    let chunks: Vec<Vec<CheckResult>> = corpus
        .par_iter()
        .map(|inst| {
            let op = crate::manifolds::random_operator(inst.dim, inst.seed, 2.0 * inst.params.lambda)?;
            let params = Prop32Params {
                rhs_scale,
                ..inst.params
            };
            let cfg = cfg.with_seed(cfg.seed ^ inst.seed);
            items.iter().map(|&it| check_prop32(&op, it, &params, &cfg)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Implications of the cluster/quasimode corollary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cor34Variant {
    #[serde(rename = "a<->b")]
    ClusterResolvent,
    #[serde(rename = "b->c")]
    ResolventQuasimode,
    #[serde(rename = "c->a")]
    QuasimodeCluster,
    #[serde(rename = "3.10")]
    LongWindow,
    #[serde(rename = "3.11")]
    LogLoss,
}

impl Cor34Variant {
    pub const ALL: [Cor34Variant; 5] = [
        Cor34Variant::ClusterResolvent,
        Cor34Variant::ResolventQuasimode,
        Cor34Variant::QuasimodeCluster,
        Cor34Variant::LongWindow,
        Cor34Variant::LogLoss,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Cor34Variant::ClusterResolvent => "a<->b",
            Cor34Variant::ResolventQuasimode => "b->c",
            Cor34Variant::QuasimodeCluster => "c->a",
            Cor34Variant::LongWindow => "3.10",
            Cor34Variant::LogLoss => "3.11",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.id() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown corollary variant `{s}`")))
    }
}

// Frozen from the same corpus (μ = 2ε, 4 quasimode samples): observed
// maxima 2.090 (a<->b) and 0.600 (log-loss form), times 1.25, rounded up.
pub const FROZEN_COR_AB: f64 = 2.62;
pub const FROZEN_COR_LOG: f64 = 0.75;
/// `|τ² - λ²| <= ε(2λ + ε) <= 3ελ` on `[λ, λ+ε]` when `ε <= λ`.
pub const QUASIMODE_CONSTANT: f64 = 3.0;

/// Parameters of a corollary check (`δ` enters only through the measured
/// cluster norm, which plays the role of `δ<λ>^γ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cor34Params {
    pub lambda: f64,
    pub eps: f64,
    pub mu: f64,
    pub q: f64,
    /// Random spectrally localized test functions for (b -> c).
    pub samples: usize,
    pub seed: u64,
}

/// Evaluate one corollary variant. Ratios are `lhs.lower / rhs`.
pub fn check_cor34(
    op: &SpectralOperator,
    variant: Cor34Variant,
    params: &Cor34Params,
    cfg: &IterationConfig,
) -> Result<CheckResult> {
    let Cor34Params {
        lambda,
        eps,
        mu,
        q,
        samples,
        seed,
    } = *params;
    if !(eps > 0.0 && eps <= lambda) {
        return Err(Error::param("need 0 < eps <= lambda"));
    }
    if matches!(variant, Cor34Variant::LongWindow | Cor34Variant::LogLoss) && mu < eps {
        return Err(Error::param("need mu >= eps"));
    }
    let el = eps * lambda;
    let qd = q / (q - 1.0);
    let ctx = CheckContext {
        lambda,
        eps,
        mu,
        beta: 1.0,
        q,
        operator: op.label().to_string(),
    };
    let partition = Partition::new(lambda, eps)?;
    match variant {
        Cor34Variant::ClusterResolvent => {
            let qa = window_norm(op, op.window_indices(&SpectralWindow::new(lambda, lambda + eps)?), q, cfg)?;
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, eps)?.localized())?;
            let qb = spectral_norm_bracket(&r, 2.0, q, cfg)?;
            let sup = window_norm_profile(op, &partition, q, cfg)?
                .iter()
                .map(|b| b.upper)
                .fold(0.0, f64::max);
            // (a) => (b): Qb <~ (ελ)^{-1} sup_k ||Π_k||;  (b) => (a): Qa <~ ελ Qb
            let r1 = if sup > 0.0 { qb.lower * el / sup } else { 0.0 };
            let r2 = if qb.upper > 0.0 { qa.lower / (el * qb.upper) } else { 0.0 };
            let (lhs, rhs) = if r1 >= r2 {
                (qb, sup / el)
            } else {
                (qa, el * qb.upper)
            };
            Ok(CheckResult::new(variant.id(), lhs, rhs, FROZEN_COR_AB, ctx))
        }
        Cor34Variant::ResolventQuasimode => {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, eps)?.localized())?;
            let qb = spectral_norm_bracket(&r, 2.0, q, cfg)?;
            let w = op.space().weights();
            let local = op.window_indices(&SpectralWindow::new(0.0, 2.0 * lambda)?);
            let mut worst: Option<(f64, f64)> = None;
            let mut tests: Vec<Vec<C64>> = Vec::new();
            for i in local.clone() {
                tests.push(op.basis().column(i));
            }
            for s in 0..samples {
                let mut c = crate::lp::random_start(op.rank(), seed, s as u64);
                for (i, v) in c.iter_mut().enumerate() {
                    if !local.contains(&i) {
                        *v = C64::new(0.0, 0.0);
                    }
                }
                tests.push(op.basis().synthesize(&c));
            }
            for u in tests {
                let c = op.basis().analyze(w, &u);
                let shifted: Vec<C64> = c
                    .iter()
                    .zip(op.eigenvalues())
                    .map(|(a, t)| a * (t * t - lambda * lambda))
                    .collect();
                let l2 = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let lhs = crate::lp::lp_norm(&u, w, q);
                let rhs = qb.upper * (l2(&shifted) + eps * (4.0 * lambda * lambda + eps * eps).sqrt() * l2(&c));
                let better = match worst {
                    None => true,
                    Some((l0, r0)) => lhs * r0 > l0 * rhs,
                };
                if better {
                    worst = Some((lhs, rhs));
                }
            }
            let worst = worst.unwrap_or((0.0, 0.0));
            let lhs = NormBracket::exact(worst.0, "direct");
            Ok(CheckResult::new(variant.id(), lhs, worst.1, 1.0 + 1e-9, ctx))
        }
        Cor34Variant::QuasimodeCluster => {
            let idx = op.window_indices(&SpectralWindow::new(lambda, lambda + eps)?);
            let lhs = op.eigenvalues()[idx]
                .iter()
                .map(|t| (t * t - lambda * lambda).abs())
                .fold(0.0, f64::max);
            Ok(CheckResult::new(
                variant.id(),
                NormBracket::exact(lhs, "spectral"),
                QUASIMODE_CONSTANT * el,
                1.0 + 1e-12,
                ctx,
            ))
        }
        Cor34Variant::LongWindow => {
            let big = window_norm(op, op.window_indices(&SpectralWindow::new(lambda, lambda + mu)?), q, cfg)?;
            let pieces = (mu / eps - 1e-12).ceil().max(1.0) as usize;
            let ev = op.eigenvalues();
            let mut sup = 0.0f64;
            for j in 0..pieces {
                let a = lambda + eps * j as f64;
                let b = (lambda + eps * (j + 1) as f64).min(lambda + mu);
                let lo = ev.partition_point(|t| *t < a);
                let hi = if j + 1 == pieces {
                    ev.partition_point(|t| *t <= b)
                } else {
                    ev.partition_point(|t| *t < b)
                };
                sup = sup.max(window_norm(op, lo..hi.max(lo), q, cfg)?.upper);
            }
            let rhs = (mu / eps).sqrt() * sup;
            let threshold = (pieces as f64 * eps / mu).sqrt() * (1.0 + 1e-9);
            Ok(CheckResult::new(variant.id(), big, rhs, threshold, ctx))
        }
        Cor34Variant::LogLoss => {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, mu)?.localized())?;
            let lhs = op_norm_power(&r, qd, q, cfg)?;
            let sup = window_norm_profile(op, &partition, q, cfg)?
                .iter()
                .map(|b| b.upper)
                .fold(0.0, f64::max);
            let rhs = bracket(lambda / mu).ln() / (eps * bracket(mu / lambda)) * sup * sup / lambda;
            Ok(CheckResult::new(variant.id(), lhs, rhs, FROZEN_COR_LOG, ctx))
        }
    }
}

/// Product of the three directional ratios (a)->(b)->(c)->(a): bounds the
/// round-trip distortion of the equivalence.
pub fn cor34_loop(op: &SpectralOperator, params: &Cor34Params, cfg: &IterationConfig) -> Result<f64> {
    let mut prod = 1.0;
    for v in [
        Cor34Variant::ClusterResolvent,
        Cor34Variant::ResolventQuasimode,
        Cor34Variant::QuasimodeCluster,
    ] {
        prod *= check_cor34(op, v, params, cfg)?.ratio;
    }
    Ok(prod)
}

/// Lower/upper Darboux sums of `|m|²` on the partition, with the quadrature
/// value they bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarbouxSums {
    pub lower: f64,
    pub upper: f64,
    pub integral: f64,
}

pub fn darboux(m: &ScalarMultiplier, partition: &Partition) -> Result<DarbouxSums> {
    let eps = partition.epsilon;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for k in 0..partition.windows() {
        let (inf, sup) = m.window_extrema(partition.tau(k), partition.tau(k + 1));
        lower += eps * inf;
        upper += eps * sup;
    }
    let end = partition.tau(partition.n + 1);
    let integral = match m {
        ScalarMultiplier::Indicator { a, b } => (b.min(end) - a.max(0.0)).max(0.0),
        _ => {
            let mut cuts = vec![0.0, end];
            if let Some(p) = m.peak() {
                if p > 0.0 && p < end {
                    cuts.insert(1, p);
                }
            }
            let mut total = 0.0;
            for w in cuts.windows(2) {
                total += quadrature::adaptive(|t| m.abs_sq(t), w[0], w[1], 1e-13)?;
            }
            total
        }
    };
    let slack = 1e-10 * upper.abs().max(1e-300);
    if !(lower <= integral + slack && integral <= upper + slack) {
        return Err(Error::Numerical(format!(
            "Darboux bracketing violated: {lower} <= {integral} <= {upper}"
        )));
    }
    Ok(DarbouxSums {
        lower,
        upper,
        integral,
    })
}

/// Closed-form majorant of `∫_0^{4λ} |τ² - (λ+iμ)²|^{-2α} dτ` with its
/// quadrature value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralMajorant {
    pub majorant: f64,
    pub integral: f64,
    pub ratio: f64,
}

/// `(λ+μ)^{-2α} μ^{1-2α} ln^ν<λ/μ>`, `ν = 1` iff `α = 1/2`.
pub fn integral_majorant(lambda: f64, mu: f64, alpha: f64) -> Result<IntegralMajorant> {
    if !(mu > 0.0) {
        return Err(Error::param("integral majorant needs mu > 0"));
    }
    if !(alpha >= 0.5) {
        return Err(Error::param(format!("integral majorant needs alpha >= 1/2, got {alpha}")));
    }
    let nu = if alpha == 0.5 { 1.0 } else { 0.0 };
    let majorant =
        (lambda + mu).powf(-2.0 * alpha) * mu.powf(1.0 - 2.0 * alpha) * bracket(lambda / mu).ln().powf(nu);
    let m = ScalarMultiplier::resolvent(lambda, mu, alpha);
    let end = 4.0 * lambda;
    let peak = m.peak().unwrap_or(0.0);
    let mut integral = 0.0;
    let mut cuts = vec![0.0];
    if peak > 0.0 && peak < end {
        cuts.push(peak);
    }
    cuts.push(end);
    for w in cuts.windows(2) {
        integral += quadrature::adaptive(|t| m.abs_sq(t), w[0], w[1], 1e-12)?;
    }
    Ok(IntegralMajorant {
        majorant,
        integral,
        ratio: integral / majorant,
    })
}

/// `min_{τ ∈ [λ, λ+ε]} (ελ) Im(τ² - (λ+iε)²)^{-1}` on a grid of `density`
/// interior points plus endpoints.
pub fn scalar_im_scan(lambda: f64, eps: f64, density: usize) -> Result<f64> {
    if !(eps > 0.0 && eps <= lambda) {
        return Err(Error::param(format!("need 0 < eps <= lambda, got ({lambda}, {eps})")));
    }
    let q = ResolventQuery {
        lambda,
        mu: eps,
        beta: 1.0,
        cutoff: None,
    };
    let f = |t: f64| eps * lambda * q.symbol(t).im;
    let mut best = f(lambda).min(f(lambda + eps));
    for i in 1..=density {
        best = best.min(f(lambda + eps * i as f64 / (density + 1) as f64));
    }
    Ok(best)
}

/// Certified window constant used by (3.3)/(3.5): the scan minimum is never
/// below this.
pub const IM_SCALAR_CONSTANT: f64 = 0.1;

/// Direct spectral `||Π||_{2->q}` for a closed window (exact at `q = inf`).
pub fn cluster_norm(
    op: &SpectralOperator,
    window: &SpectralWindow,
    q: f64,
    cfg: &IterationConfig,
) -> Result<NormBracket> {
    let p = project(op, window);
    spectral_norm_bracket(&p, 2.0, q, cfg)
}

/// Upper side only, without iteration.
pub fn cluster_norm_upper(op: &SpectralOperator, window: &SpectralWindow, q: f64) -> Option<f64> {
    certified_upper(&project(op, window), 2.0, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[ignore]
    fn derive_frozen_constants() {
        let corpus = prop32_corpus(96, 0xc0ffee);
        let res = run_prop32_corpus(&corpus, &Prop32Item::ALL, 1.0, &IterationConfig::default()).unwrap();
        for it in Prop32Item::ALL {
            let m = res.iter().filter(|r| r.estimate_id == it.id()).map(|r| r.ratio).fold(0.0, f64::max);
            println!("{} max ratio {m:.6}", it.id());
        }
        let mut ab: f64 = 0.0;
        let mut lg: f64 = 0.0;
        for inst in &corpus {
            let op = crate::manifolds::random_operator(inst.dim, inst.seed, 2.0 * inst.params.lambda).unwrap();
            let p = Cor34Params {
                lambda: inst.params.lambda,
                eps: inst.params.eps,
                mu: inst.params.mu,
                q: inst.params.q,
                samples: 4,
                seed: inst.seed,
            };
            let cfg = IterationConfig::default();
            ab = ab.max(check_cor34(&op, Cor34Variant::ClusterResolvent, &p, &cfg).unwrap().ratio);
            lg = lg.max(check_cor34(&op, Cor34Variant::LogLoss, &p, &cfg).unwrap().ratio);
        }
        println!("a<->b max ratio {ab:.6}, 3.11 max ratio {lg:.6}");
    }
    use crate::linalg::FiniteMeasureSpace;
    use nalgebra::DMatrix;

    fn diag_op(vals: &[f64], w: f64) -> SpectralOperator {
        let n = vals.len();
        let space = FiniteMeasureSpace::uniform(n, w).unwrap();
        SpectralOperator::from_real_eigenpairs(space, vals.to_vec(), DMatrix::identity(n, n) / w.sqrt(), "diag")
            .unwrap()
    }

    #[test]
    fn partition_covers_interval() {
        let p = Partition::new(10.0, 3.0).unwrap();
        assert_eq!(p.n, 7);
        assert!(p.tau(p.n + 1) >= 20.0);
        let op = diag_op(&[0.0, 3.0, 3.0, 6.0, 21.0, 24.0], 1.0);
        let counts: Vec<usize> = (0..p.windows()).map(|k| p.window_indices(&op, k).len()).collect();
        // 3.0 belongs to window 1 only; 24.0 = τ_8 closes the last window
        assert_eq!(counts, vec![1, 2, 1, 0, 0, 0, 0, 2]);
    }

    #[test]
    fn window_profile_examples() {
        let op = diag_op(&[1.0, 5.0], 1.0);
        let p = Partition::new(2.0, 1.0).unwrap();
        let prof = window_norm_profile(&op, &p, 4.0, &IterationConfig::default()).unwrap();
        assert_eq!(prof[0].upper, 0.0);
        // rank one with unit point mass: ||e||_4 = 1
        assert!((prof[1].lower - 1.0).abs() < 1e-9 && (prof[1].upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiplier_constants_trivial_cases() {
        let op = diag_op(&[0.5, 1.5, 2.5], 1.0);
        let p = Partition::new(1.0, 1.0).unwrap();
        let cfg = IterationConfig::default();
        let prof = window_norm_profile(&op, &p, 4.0, &cfg).unwrap();
        let pair = multiplier_constants(&op, &p, 4.0, &ScalarMultiplier::one(), &ScalarMultiplier::one(), &cfg)
            .unwrap();
        let s: f64 = prof.iter().map(|b| b.upper * b.upper).sum();
        assert!((pair.big_m1.powi(2) - s).abs() < 1e-12);
        let ind = ScalarMultiplier::Indicator { a: 1.2, b: 1.8 };
        let pair = multiplier_constants(&op, &p, 4.0, &ind, &ScalarMultiplier::one(), &cfg).unwrap();
        assert!((pair.big_m1 - prof[1].upper).abs() < 1e-12);
    }

    #[test]
    fn multiplier_lemma_zero_and_rank_one() {
        let op = diag_op(&[1.0], 1.0);
        let p = Partition::new(1.0, 1.0).unwrap();
        let cfg = IterationConfig::default();
        let zero = ScalarMultiplier::Constant { re: 0.0, im: 0.0 };
        let r = check_multiplier_lemma(&op, &p, 4.0, &zero, &ScalarMultiplier::one(), &cfg).unwrap();
        assert_eq!(r.lhs.lower, 0.0);
        assert!(r.pass);
        let r = check_multiplier_lemma(&op, &p, 4.0, &ScalarMultiplier::one(), &ScalarMultiplier::one(), &cfg)
            .unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-9, "ratio {}", r.ratio);
    }

    #[test]
    fn scalar_scan_examples() {
        let q = ResolventQuery::new(10.0, 1.0).unwrap();
        let v = 10.0 * q.symbol(10.5).im;
        // oracle: d = τ² - λ² + ε² = 11.25, Im = 2λε / (d² + 4λ²ε²)
        let d: f64 = 10.5 * 10.5 - 100.0 + 1.0;
        let oracle = 10.0 * 20.0 / (d * d + 400.0);
        assert!((v - oracle).abs() < 1e-14);
        assert!((oracle - 0.3799).abs() < 1e-4);
        for &(l, e) in &[(2.0f64, 0.5f64), (10.0, 1.0), (100.0, 0.01), (5.0, 5.0)] {
            let at_lambda = e * l * 2.0 * e * l / (e.powi(4) + 4.0 * e * e * l * l);
            assert!(at_lambda >= 0.4 - 1e-12);
            assert!(scalar_im_scan(l, e, 200).unwrap() >= IM_SCALAR_CONSTANT);
        }
        assert!(scalar_im_scan(1.0, 2.0, 10).is_err());
    }

    #[test]
    fn darboux_examples() {
        let p = Partition::new(5.0, 1.0).unwrap();
        let one = darboux(&ScalarMultiplier::one(), &p).unwrap();
        let len = p.tau(p.n + 1);
        assert!((one.lower - len).abs() < 1e-12 && (one.upper - len).abs() < 1e-12);
        let m = ScalarMultiplier::resolvent(10.0, 1.0, 0.5);
        let p = Partition::new(10.0, 1.0).unwrap();
        let d = darboux(&m, &p).unwrap();
        assert!(d.lower <= d.integral && d.integral <= d.upper);
        // sampled sup never exceeds the analytic one
        for k in 0..p.windows() {
            let (_, sup) = m.window_extrema(p.tau(k), p.tau(k + 1));
            assert!(m.sampled_sup(p.tau(k), p.tau(k + 1)) <= sup * (1.0 + 1e-12));
        }
    }

    #[test]
    fn majorant_examples() {
        let a = integral_majorant(10.0, 1.0, 0.5).unwrap();
        assert!((a.majorant - 12f64.ln() / 11.0).abs() < 1e-14);
        assert!(a.ratio <= 4.0, "ratio {}", a.ratio);
        let b = integral_majorant(10.0, 1.0, 1.0).unwrap();
        assert!((b.majorant - 1.0 / 121.0).abs() < 1e-15);
        let c = integral_majorant(7.0, 7.0, 0.5).unwrap();
        assert!((c.majorant - 3f64.ln() / 14.0).abs() < 1e-14);
        assert!(integral_majorant(1.0, 1.0, 0.4).is_err());
    }

    #[test]
    fn quasimode_constant_endpoint() {
        let (l, e) = (7.0, 2.0);
        let op = diag_op(&[l + e], 1.0);
        let p = Cor34Params {
            lambda: l,
            eps: e,
            mu: e,
            q: 4.0,
            samples: 0,
            seed: 0,
        };
        let r = check_cor34(&op, Cor34Variant::QuasimodeCluster, &p, &IterationConfig::default()).unwrap();
        assert!((r.lhs.lower - (2.0 * e * l + e * e)).abs() < 1e-12);
        assert!(r.pass);
    }
}
