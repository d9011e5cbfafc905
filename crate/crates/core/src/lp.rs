//! Weighted `L^p` norms and `L^p -> L^q` operator-norm estimation.
//!
//! The duality-map power iteration produces achieved Rayleigh quotients, so
//! its values are genuine lower bounds. Upper bounds come either from the
//! cross-restart spread (heuristic) or, for functions of a self-adjoint
//! operator, from the Cauchy–Schwarz kernel bounds in [`certified_upper`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, FiniteMeasureSpace, LinearMap, C64};
use crate::spectral::{flattened_sobolev, SpectralMap, SpectralOperator};

/// `(sum_i w_i |v_i|^p)^{1/p}`, or `max_i |v_i|` for `p = inf`.
pub fn lp_norm(v: &[C64], w: &[f64], p: f64) -> f64 {
    let m = max_abs(v);
    if m == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return m;
    }
    // scale by the max entry so that large p cannot overflow
    let s: f64 = v
        .iter()
        .zip(w)
        .map(|(x, w)| w * (x.norm() / m).powf(p))
        .sum();
    m * s.powf(1.0 / p)
}

pub fn lp_norm_real(v: &[f64], w: &[f64], p: f64) -> f64 {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return m;
    }
    let s: f64 = v.iter().zip(w).map(|(x, w)| w * (x.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// `u_i = |v_i|^{p-2} v_i`, so that `sum_i w_i u_i conj(v_i) = ||v||_p^p`.
pub fn duality_map(v: &[C64], p: f64) -> Result<Vec<C64>> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param(format!("duality map needs 1 < p < inf, got {p}")));
    }
    if max_abs(v) == 0.0 {
        return Err(Error::param("duality map of the zero vector"));
    }
    Ok(v.iter()
        .map(|x| {
            let a = x.norm();
            if a == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                x * a.powf(p - 2.0)
            }
        })
        .collect())
}

/// Duality map of `v / max|v|`: same direction, no overflow.
fn scaled_duality(v: &[C64], p: f64) -> Vec<C64> {
    let m = max_abs(v);
    v.iter()
        .map(|x| {
            let y = x / m;
            let a = y.norm();
            if a == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                y * a.powf(p - 2.0)
            }
        })
        .collect()
}

/// Lower and upper estimates of a norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBracket {
    pub lower: f64,
    #[serde(with = "crate::serde_float")]
    pub upper: f64,
    pub method: String,
}

impl NormBracket {
    pub fn new(lower: f64, upper: f64, method: impl Into<String>) -> Result<Self> {
        if !(lower >= 0.0) || !(upper >= lower * (1.0 - 1e-12)) {
            return Err(Error::Numerical(format!(
                "invalid bracket [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper: upper.max(lower),
            method: method.into(),
        })
    }

    pub fn exact(value: f64, method: impl Into<String>) -> Self {
        Self {
            lower: value,
            upper: value,
            method: method.into(),
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            lower: self.lower * c,
            upper: self.upper * c,
            method: self.method.clone(),
        }
    }

    pub fn relative_gap(&self) -> f64 {
        if self.upper == 0.0 {
            0.0
        } else {
            (self.upper - self.lower) / self.upper
        }
    }
}

/// Controls for the multistart power iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative stagnation threshold.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 400,
            tolerance: 1e-12,
            seed: 0x5eed,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::param("at least one restart required"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Result of a multistart run, with the best maximizer.
#[derive(Clone, Debug)]
pub struct PowerOutcome {
    pub bracket: NormBracket,
    pub maximizer: Vec<C64>,
    /// Final value of each restart, in start order.
    pub restart_values: Vec<f64>,
    pub iterations: usize,
}

/// Deterministic random start on `n` points.
pub fn random_start(n: usize, seed: u64, index: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

// Coordinate starts are scored on domains up to this size; p < 2 maximizers
// are often nearly sparse and random starts miss them.
const COORD_SCAN_MAX: usize = 64;
const COORD_STARTS: usize = 4;

fn coordinate_starts(t: &dyn LinearMap, p: f64, q: f64) -> Vec<Vec<C64>> {
    let n = t.domain().len();
    if n > COORD_SCAN_MAX {
        return Vec::new();
    }
    let (wd, wc) = (t.domain().weights(), t.codomain().weights());
    let mut scored = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let r = lp_norm(&t.apply(&e), wc, q) / lp_norm(&e, wd, p);
        scored.push((r, e));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().take(COORD_STARTS).map(|(_, e)| e).collect()
}

struct Trace {
    value: f64,
    x: Vec<C64>,
    iterations: usize,
}

// Relative slack allowed in the monotonicity assertion (rounding only).
const MONOTONE_SLACK: f64 = 1e-9;

fn iterate_one(
    t: &dyn LinearMap,
    p: f64,
    q: f64,
    cfg: &IterationConfig,
    start: &[C64],
    assert_monotone: bool,
) -> Result<Trace> {
    let wd = t.domain().weights();
    let wc = t.codomain().weights();
    let p_dual = p / (p - 1.0);
    let norm_x = lp_norm(start, wd, p);
    if norm_x == 0.0 {
        return Ok(Trace {
            value: 0.0,
            x: start.to_vec(),
            iterations: 0,
        });
    }
    let mut x: Vec<C64> = start.iter().map(|v| v / norm_x).collect();
    let mut y = t.apply(&x);
    let mut value = lp_norm(&y, wc, q);
    let mut quiet = 0;
    let mut it = 0;
    while it < cfg.max_iters {
        it += 1;
        if value == 0.0 {
            break;
        }
        let j = scaled_duality(&y, q);
        let z = t.apply_adjoint(&j);
        if max_abs(&z) == 0.0 {
            break;
        }
        let xn = scaled_duality(&z, p_dual);
        let nx = lp_norm(&xn, wd, p);
        let xn: Vec<C64> = xn.iter().map(|v| v / nx).collect();
        let yn = t.apply(&xn);
        let vn = lp_norm(&yn, wc, q);
        if !vn.is_finite() {
            return Err(Error::Numerical("power iteration produced a non-finite value".into()));
        }
        if vn < value * (1.0 - MONOTONE_SLACK) {
            if assert_monotone {
                return Err(Error::NonMonotone {
                    previous: value,
                    current: vn,
                });
            }
            break;
        }
        let gain = (vn - value) / vn.max(f64::MIN_POSITIVE);
        if vn >= value {
            x = xn;
            y = yn;
            value = vn;
        }
        if gain <= cfg.tolerance {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(Trace {
        value,
        x,
        iterations: it,
    })
}

fn multistart(
    t: &dyn LinearMap,
    p: f64,
    q: f64,
    cfg: &IterationConfig,
    extra_starts: &[Vec<C64>],
    assert_monotone: bool,
    method: &str,
) -> Result<PowerOutcome> {
    cfg.validate()?;
    let n = t.domain().len();
    for s in extra_starts {
        t.domain().check_vec(s)?;
    }
    let starts: Vec<Vec<C64>> = extra_starts
        .iter()
        .cloned()
        .chain(coordinate_starts(t, p, q))
        .chain((0..cfg.restarts as u64).map(|i| random_start(n, cfg.seed, i)))
        .collect();
    let traces = starts
        .par_iter()
        .map(|s| iterate_one(t, p, q, cfg, s, assert_monotone))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0usize;
    for (i, tr) in traces.iter().enumerate() {
        if tr.value > traces[best].value {
            best = i;
        }
    }
    let values: Vec<f64> = traces.iter().map(|t| t.value).collect();
    let lower = traces[best].value;
    let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if lower > 0.0 { (lower - worst) / lower } else { 0.0 };
    Ok(PowerOutcome {
        bracket: NormBracket::new(lower, lower * (1.0 + spread), method)?,
        maximizer: traces[best].x.clone(),
        restart_values: values,
        iterations: traces.iter().map(|t| t.iterations).sum(),
    })
}

fn check_regime(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0 && q >= 2.0 && q.is_finite()) {
        return Err(Error::UnsupportedSpaces(format!(
            "power iteration requires 1 < p <= 2 <= q < inf, got p={p}, q={q}"
        )));
    }
    Ok(())
}

/// Multistart duality-map iteration for `||T||_{p -> q}`, `1 < p <= 2 <= q < inf`.
/// Upper = lower · (1 + cross-restart spread).
pub fn op_norm_power(t: &dyn LinearMap, p: f64, q: f64, cfg: &IterationConfig) -> Result<NormBracket> {
    Ok(op_norm_power_seeded(t, p, q, cfg, &[])?.bracket)
}

/// As [`op_norm_power`], with additional explicit starting vectors that are
/// iterated before the random restarts.
pub fn op_norm_power_seeded(
    t: &dyn LinearMap,
    p: f64,
    q: f64,
    cfg: &IterationConfig,
    starts: &[Vec<C64>],
) -> Result<PowerOutcome> {
    check_regime(p, q)?;
    multistart(t, p, q, cfg, starts, true, "power")
}

/// The same iteration outside the monotone regime; only the achieved value
/// (a lower bound) is meaningful.
pub fn op_norm_power_general(
    t: &dyn LinearMap,
    p: f64,
    q: f64,
    cfg: &IterationConfig,
) -> Result<PowerOutcome> {
    if !(p > 1.0 && p.is_finite() && q > 1.0 && q.is_finite()) {
        return Err(Error::UnsupportedSpaces(format!("p={p}, q={q}")));
    }
    multistart(t, p, q, cfg, &[], false, "power-general")
}

/// Certified upper bounds for a diagonal spectral map `m(A)` from the
/// pointwise kernel bound `|K(x,y)| <= g(x) g(y)`:
///
/// * `2 -> q`: `|| (sum |m_i|^2 |e_i|^2)^{1/2} ||_q` (exact for `q = inf`),
/// * `q' -> 2`: the same, by duality,
/// * `q' -> q`: `|| sum |m_i| |e_i|^2 ||_{q/2}`,
/// * `2 -> 2`: `max |m_i|` (exact).
///
/// Returns `None` for other exponent pairs or non-diagonal maps.
pub fn certified_upper(map: &SpectralMap, p: f64, q: f64) -> Option<f64> {
    let d = map.diagonal_values()?;
    let op = map.operator();
    let w = op.space().weights();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0) || (a.is_infinite() && b.is_infinite());
    if close(p, 2.0) && close(q, 2.0) {
        return Some(d.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    if close(p, 2.0) || close(q, 2.0) {
        let r = if close(p, 2.0) { q } else { p / (p - 1.0) };
        if r < 2.0 {
            return None;
        }
        let dens = op.basis().density(&d.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
        let g: Vec<f64> = dens.iter().map(|v| v.sqrt()).collect();
        return Some(crate::lp::lp_norm_real(&g, w, r));
    }
    let q_dual = q / (q - 1.0);
    if close(p, q_dual) && q >= 2.0 {
        let dens = op.basis().density(&d.iter().map(|v| v.norm()).collect::<Vec<_>>());
        return Some(lp_norm_real(&dens, w, q / 2.0));
    }
    None
}

/// Bracket for a diagonal spectral map: power-iteration lower bound,
/// certified kernel upper bound when available. `q = inf` with `p = 2` is
/// evaluated exactly.
pub fn spectral_norm_bracket(map: &SpectralMap, p: f64, q: f64, cfg: &IterationConfig) -> Result<NormBracket> {
    if (p - 2.0).abs() < 1e-12 && q.is_infinite() {
        let v = certified_upper(map, p, q).ok_or_else(|| Error::UnsupportedSpaces("2 -> inf needs a diagonal map".into()))?;
        return Ok(NormBracket::exact(v, "kernel-exact"));
    }
    let lower = op_norm_power(map, p, q, cfg)?;
    match certified_upper(map, p, q) {
        Some(u) => NormBracket::new(lower.lower, u.max(lower.lower), "power+kernel"),
        None => Ok(lower),
    }
}

/// Certified error report of the brute-force oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteforceResult {
    pub value: f64,
    /// The true norm lies in `[value, value + error]`.
    pub error: f64,
    pub evaluations: usize,
}

/// Resolution controls for [`op_norm_bruteforce`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteforceConfig {
    /// Initial cells per angular coordinate.
    pub grid: usize,
    /// Target certified gap, relative to the best value.
    pub tol: f64,
    pub max_evaluations: usize,
}

impl Default for BruteforceConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            tol: 1e-5,
            max_evaluations: 4_000_000,
        }
    }
}

/// Branch-and-bound maximization of `||Tx||_q / ||x||_p` over real
/// directions (domain dimension <= 3). The initial angular grid is refined
/// wherever the Lipschitz bound of the quotient could still beat the best
/// value; the reported error is the remaining certified gap.
///
/// Real directions suffice for real matrices when `p <= q`.
pub fn op_norm_bruteforce(t: &dyn LinearMap, p: f64, q: f64, cfg: &BruteforceConfig) -> Result<BruteforceResult> {
    let d = t.domain().len();
    if d > 3 {
        return Err(Error::UnsupportedSpaces(format!(
            "brute force limited to dimension <= 3, got {d}"
        )));
    }
    let wd = t.domain().weights().to_vec();
    let wc = t.codomain().weights();
    let cols: Vec<Vec<C64>> = (0..d)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); d];
            e[j] = C64::new(1.0, 0.0);
            t.apply(&e)
        })
        .collect();
    let eval = |u: &[f64]| -> f64 {
        let m = cols[0].len();
        let y: Vec<C64> = (0..m)
            .map(|i| (0..d).map(|j| cols[j][i] * u[j]).sum())
            .collect();
        let x: Vec<C64> = u.iter().map(|v| C64::new(*v, 0.0)).collect();
        lp_norm(&y, wc, q) / lp_norm(&x, &wd, p)
    };
    if d == 1 {
        let v = eval(&[1.0]);
        return Ok(BruteforceResult {
            value: v,
            error: 0.0,
            evaluations: 1,
        });
    }
    // Lipschitz constant of the quotient w.r.t. chord distance on S^{d-1}
    let ln: f64 = cols.iter().map(|c| lp_norm(c, wc, q).powi(2)).sum::<f64>().sqrt();
    let (wmin, wmax) = wd.iter().fold((f64::INFINITY, 0.0f64), |(a, b), w| (a.min(*w), b.max(*w)));
    let df = d as f64;
    let (dmin, ld) = if p <= 2.0 {
        (wmin.powf(1.0 / p), wmax.powf(1.0 / p) * df.powf(1.0 / p - 0.5))
    } else {
        (wmin.powf(1.0 / p) * df.powf(1.0 / p - 0.5), wmax.powf(1.0 / p))
    };
    let gmax = ln / dmin;
    let lip = (ln + gmax * ld) / dmin;

    #[derive(Clone, Copy)]
    struct Cell {
        lo: [f64; 2],
        hi: [f64; 2],
        value: f64,
        bound: f64,
    }
    let point = |a: f64, b: f64| -> Vec<f64> {
        if d == 2 {
            vec![a.cos(), a.sin()]
        } else {
            vec![a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]
        }
    };
    let make = |lo: [f64; 2], hi: [f64; 2]| -> Cell {
        let c0 = 0.5 * (lo[0] + hi[0]);
        let c1 = 0.5 * (lo[1] + hi[1]);
        let v = eval(&point(c0, c1));
        let r0 = 0.5 * (hi[0] - lo[0]);
        let r1 = if d == 2 { 0.0 } else { 0.5 * (hi[1] - lo[1]) };
        let radius = (r0 * r0 + r1 * r1).sqrt();
        Cell {
            lo,
            hi,
            value: v,
            bound: v + lip * radius,
        }
    };
    let pi = std::f64::consts::PI;
    let g = cfg.grid.max(2);
    let mut cells = Vec::new();
    if d == 2 {
        for i in 0..g {
            let a = pi * i as f64 / g as f64;
            cells.push(make([a, 0.0], [a + pi / g as f64, 0.0]));
        }
    } else {
        for i in 0..g {
            for j in 0..g {
                let a = pi * i as f64 / g as f64;
                let b = pi * j as f64 / g as f64;
                cells.push(make([a, b], [a + pi / g as f64, b + pi / g as f64]));
            }
        }
    }
    let mut evals = cells.len();
    let mut best = cells.iter().map(|c| c.value).fold(0.0, f64::max);
    let mut heap: std::collections::BinaryHeap<(OrdF64, usize)> = std::collections::BinaryHeap::new();
    let mut store: Vec<Cell> = Vec::new();
    for c in cells {
        heap.push((OrdF64(c.bound), store.len()));
        store.push(c);
    }
    let error = loop {
        let Some((OrdF64(bound), idx)) = heap.pop() else {
            break 0.0;
        };
        if bound <= best * (1.0 + cfg.tol) || evals >= cfg.max_evaluations {
            break (bound - best).max(0.0);
        }
        let c = store[idx];
        let m0 = 0.5 * (c.lo[0] + c.hi[0]);
        let kids: Vec<Cell> = if d == 2 {
            vec![make([c.lo[0], 0.0], [m0, 0.0]), make([m0, 0.0], [c.hi[0], 0.0])]
        } else {
            let m1 = 0.5 * (c.lo[1] + c.hi[1]);
            vec![
                make([c.lo[0], c.lo[1]], [m0, m1]),
                make([m0, c.lo[1]], [c.hi[0], m1]),
                make([c.lo[0], m1], [m0, c.hi[1]]),
                make([m0, m1], [c.hi[0], c.hi[1]]),
            ]
        };
        evals += kids.len();
        for k in kids {
            best = best.max(k.value);
            heap.push((OrdF64(k.bound), store.len()));
            store.push(k);
        }
    };
    Ok(BruteforceResult {
        value: best,
        error,
        evaluations: evals,
    })
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Function spaces on a weighted grid.
#[derive(Clone, Debug)]
pub enum SpaceSpec {
    Lebesgue(f64),
    /// `W^{s,p}_λ`, normed by `||(λ² + A²)^{s/2} u||_p`.
    Flattened {
        s: f64,
        p: f64,
        lambda: f64,
        op: SpectralOperator,
    },
    /// Intersection with the sum-of-norms convention.
    Intersection(Vec<SpaceSpec>),
    /// Sum with the infimal-decomposition norm.
    Sum(Vec<SpaceSpec>),
}

impl SpaceSpec {
    fn validate(&self) -> Result<()> {
        match self {
            SpaceSpec::Lebesgue(p) | SpaceSpec::Flattened { p, .. } if !(*p >= 1.0) => {
                Err(Error::param(format!("exponent {p} < 1")))
            }
            SpaceSpec::Flattened { lambda, .. } if !(*lambda >= 1.0) => {
                Err(Error::param("flattened space needs lambda >= 1"))
            }
            SpaceSpec::Intersection(v) | SpaceSpec::Sum(v) if v.is_empty() => {
                Err(Error::param("empty intersection/sum"))
            }
            _ => Ok(()),
        }
    }

    /// `X(λ) = W^{1/2,2}_λ ∩ W^{s,q}_λ`.
    pub fn x_lambda(op: &SpectralOperator, lambda: f64, s: f64, q: f64) -> SpaceSpec {
        SpaceSpec::Intersection(vec![
            SpaceSpec::Flattened {
                s: 0.5,
                p: 2.0,
                lambda,
                op: op.clone(),
            },
            SpaceSpec::Flattened {
                s,
                p: q,
                lambda,
                op: op.clone(),
            },
        ])
    }

    /// `X'(λ) = W^{-1/2,2}_λ + W^{-s,q'}_λ`.
    pub fn x_dual_lambda(op: &SpectralOperator, lambda: f64, s: f64, q: f64) -> SpaceSpec {
        SpaceSpec::Sum(vec![
            SpaceSpec::Flattened {
                s: -0.5,
                p: 2.0,
                lambda,
                op: op.clone(),
            },
            SpaceSpec::Flattened {
                s: -s,
                p: q / (q - 1.0),
                lambda,
                op: op.clone(),
            },
        ])
    }
}

/// A simple space: exponent plus optional flattening `(s, λ, op)`.
#[derive(Clone)]
struct Simple {
    p: f64,
    flat: Option<(f64, f64, SpectralOperator)>,
}

fn simples(spec: &SpaceSpec, allow: fn(&SpaceSpec) -> bool) -> Result<Vec<Simple>> {
    spec.validate()?;
    match spec {
        SpaceSpec::Lebesgue(p) => Ok(vec![Simple { p: *p, flat: None }]),
        SpaceSpec::Flattened { s, p, lambda, op } => Ok(vec![Simple {
            p: *p,
            flat: Some((*s, *lambda, op.clone())),
        }]),
        other if allow(other) => {
            let (SpaceSpec::Intersection(v) | SpaceSpec::Sum(v)) = other else {
                unreachable!()
            };
            v.iter()
                .map(|s| match s {
                    SpaceSpec::Lebesgue(_) | SpaceSpec::Flattened { .. } => {
                        Ok(simples(s, allow)?.remove(0))
                    }
                    _ => Err(Error::UnsupportedSpaces("nested composite spaces".into())),
                })
                .collect()
        }
        _ => Err(Error::UnsupportedSpaces(
            "source must be a sum or simple space, target an intersection or simple space".into(),
        )),
    }
}

/// Either a spectral map (enabling exact reductions) or a general map.
#[derive(Clone)]
pub enum Operand {
    Spectral(SpectralMap),
    General(Arc<dyn LinearMap>),
}

impl Operand {
    fn component(&self, pre: &Simple, post: &Simple) -> Result<Operand> {
        let flat = |s: &Simple, sign: f64| -> Result<Option<SpectralMap>> {
            match &s.flat {
                Some((sv, lambda, op)) if *sv != 0.0 => Ok(Some(flattened_sobolev(op, *lambda, sign * sv)?)),
                _ => Ok(None),
            }
        };
        let before = flat(pre, -1.0)?;
        let after = flat(post, 1.0)?;
        match self {
            Operand::Spectral(m) => {
                let same = |f: &Option<SpectralMap>| match f {
                    Some(f) => same_basis(f.operator(), m.operator()),
                    None => true,
                };
                if same(&before) && same(&after) {
                    let mut out = m.clone();
                    if let Some(b) = &before {
                        out = out.compose(b)?;
                    }
                    if let Some(a) = &after {
                        out = a.compose(&out)?;
                    }
                    return Ok(Operand::Spectral(out));
                }
                Operand::General(Arc::new(m.clone())).component(pre, post)
            }
            Operand::General(g) => {
                let mut maps: Vec<Arc<dyn LinearMap>> = Vec::new();
                if let Some(b) = before {
                    maps.push(Arc::new(b));
                }
                maps.push(g.clone());
                if let Some(a) = after {
                    maps.push(Arc::new(a));
                }
                if maps.len() == 1 {
                    return Ok(Operand::General(g.clone()));
                }
                Ok(Operand::General(Arc::new(crate::linalg::Chain::new(maps)?)))
            }
        }
    }

    fn as_map(&self) -> &dyn LinearMap {
        match self {
            Operand::Spectral(m) => m,
            Operand::General(g) => g.as_ref(),
        }
    }

    pub fn domain(&self) -> &FiniteMeasureSpace {
        self.as_map().domain()
    }
}

fn same_basis(a: &SpectralOperator, b: &SpectralOperator) -> bool {
    Arc::ptr_eq(&a.basis_arc(), &b.basis_arc())
}

/// Norm bracket of one simple→simple component.
pub fn component_bracket(t: &Operand, p: f64, q: f64, cfg: &IterationConfig) -> Result<NormBracket> {
    match t {
        Operand::Spectral(m) if m.diagonal_values().is_some() => spectral_norm_bracket(m, p, q, cfg),
        Operand::Spectral(m) if (p - 2.0).abs() < 1e-12 && (q - 2.0).abs() < 1e-12 => {
            Ok(NormBracket::exact(m.l2_norm(), "svd"))
        }
        _ => {
            if p > 1.0 && p <= 2.0 && q >= 2.0 && q.is_finite() {
                op_norm_power(t.as_map(), p, q, cfg)
            } else {
                let o = op_norm_power_general(t.as_map(), p, q, cfg)?;
                Ok(NormBracket {
                    lower: o.bracket.lower,
                    upper: f64::INFINITY,
                    method: "power-general".into(),
                })
            }
        }
    }
}

/// Per-component brackets, indexed `[source][target]`.
pub fn composite_components(
    t: &Operand,
    from: &SpaceSpec,
    to: &SpaceSpec,
    cfg: &IterationConfig,
) -> Result<Vec<Vec<NormBracket>>> {
    let src = simples(from, |s| matches!(s, SpaceSpec::Sum(_)))?;
    let dst = simples(to, |s| matches!(s, SpaceSpec::Intersection(_)))?;
    src.iter()
        .map(|a| {
            dst.iter()
                .map(|b| {
                    let c = t.component(a, b)?;
                    component_bracket(&c, a.p, b.p, cfg)
                })
                .collect()
        })
        .collect()
}

/// `||T||_{from -> to}` for a sum (or simple) source and an intersection (or
/// simple) target: exact max over sum components; `[max, sum]` over
/// intersection components.
pub fn op_norm_composite(t: &Operand, from: &SpaceSpec, to: &SpaceSpec, cfg: &IterationConfig) -> Result<NormBracket> {
    let comps = composite_components(t, from, to, cfg)?;
    let mut lower = 0.0f64;
    let mut upper = 0.0f64;
    for row in &comps {
        lower = lower.max(row.iter().map(|b| b.lower).fold(0.0, f64::max));
        upper = upper.max(row.iter().map(|b| b.upper).sum());
    }
    let method = if comps.len() == 1 && comps[0].len() == 1 {
        comps[0][0].method.clone()
    } else {
        "composite".to_string()
    };
    NormBracket::new(lower, upper, method)
}

/// `||T||²_{2->q}` and `||T T*||_{q'->q}` with cross-seeded starts: the
/// maximizer of one problem seeds the other.
pub fn tt_star_pair(t: &dyn LinearMap, q: f64, cfg: &IterationConfig) -> Result<(PowerOutcome, PowerOutcome)> {
    let qd = q / (q - 1.0);
    let gram = crate::linalg::Gram(ArcMap(t));
    let first = op_norm_power_seeded(t, 2.0, q, cfg, &[])?;
    let y0 = scaled_duality(&t.apply(&first.maximizer), q);
    let second = op_norm_power_seeded(&gram, qd, q, cfg, &[y0])?;
    let x0 = t.apply_adjoint(&second.maximizer);
    let first = op_norm_power_seeded(t, 2.0, q, cfg, &[first.maximizer.clone(), x0])?;
    let y1 = scaled_duality(&t.apply(&first.maximizer), q);
    let second = op_norm_power_seeded(&gram, qd, q, cfg, &[second.maximizer.clone(), y1])?;
    Ok((first, second))
}

struct ArcMap<'a>(&'a dyn LinearMap);

impl LinearMap for ArcMap<'_> {
    fn domain(&self) -> &FiniteMeasureSpace {
        self.0.domain()
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        self.0.codomain()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.0.apply(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.0.apply_adjoint(y)
    }
}

/// Exact `||Π||_{2->inf}`-type quantity for the rows of a diagonal map.
pub fn sup_density(map: &SpectralMap) -> Option<f64> {
    let d = map.diagonal_values()?;
    let dens = map
        .operator()
        .basis()
        .density(&d.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
    Some(dens.iter().fold(0.0f64, |a, v| a.max(*v)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMap;
    use nalgebra::DMatrix;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn lp_examples() {
        assert!((lp_norm(&[c(1.0), c(1.0)], &[1.0, 1.0], 2.0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&[c(3.0), c(-4.0)], &[1.0, 1.0], f64::INFINITY), 4.0);
        assert!((lp_norm(&[c(1.0), c(1.0)], &[2.0, 2.0], 1.0) - 4.0).abs() < 1e-15);
        // homogeneity at large p
        let v = vec![c(1e3), c(-2e3), C64::new(0.0, 5e2)];
        let w = [0.3, 1.0, 2.0];
        let a = lp_norm(&v, &w, 100.0);
        let b = lp_norm(&v.iter().map(|x| x * 7.0).collect::<Vec<_>>(), &w, 100.0);
        assert!((b / a - 7.0).abs() < 1e-12);
    }

    #[test]
    fn duality_examples() {
        assert_eq!(duality_map(&[c(1.0), c(-1.0)], 2.0).unwrap(), vec![c(1.0), c(-1.0)]);
        assert_eq!(duality_map(&[c(2.0), c(0.0)], 4.0).unwrap(), vec![c(8.0), c(0.0)]);
        assert!(duality_map(&[c(1.0)], 1.0).is_err());
        assert!(duality_map(&[c(1.0)], f64::INFINITY).is_err());
        let space = FiniteMeasureSpace::new(vec![0.5, 1.5, 2.0]).unwrap();
        let v = random_start(3, 9, 0);
        let u = duality_map(&v, 3.0).unwrap();
        let pairing = space.inner(&u, &v);
        let np = lp_norm(&v, space.weights(), 3.0).powi(3);
        assert!((pairing.re - np).abs() < 1e-12 && pairing.im.abs() < 1e-12);
    }

    #[test]
    fn power_examples() {
        let s = FiniteMeasureSpace::uniform(2, 1.0).unwrap();
        let id = DenseMap::square(s.clone(), DMatrix::identity(2, 2)).unwrap();
        let b = op_norm_power(&id, 2.0, 2.0, &IterationConfig::default()).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12);

        let r1 = DenseMap::rank_one(s.clone(), s.clone(), &[c(1.0), c(0.0)], &[c(1.0), c(1.0)]).unwrap();
        let b = op_norm_power(&r1, 4.0 / 3.0, 4.0, &IterationConfig::default()).unwrap();
        assert!((b.lower - 2f64.powf(0.25)).abs() < 1e-9);

        let d = DenseMap::square(s, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(2.0)]))).unwrap();
        let b = op_norm_power(&d, 2.0, 2.0, &IterationConfig::default()).unwrap();
        assert!((b.lower - 2.0).abs() < 1e-9);
        assert!(op_norm_power(&d, 3.0, 4.0, &IterationConfig::default()).is_err());
    }

    #[test]
    fn bruteforce_examples() {
        let s = FiniteMeasureSpace::uniform(2, 1.0).unwrap();
        let id = DenseMap::square(s.clone(), DMatrix::identity(2, 2)).unwrap();
        let r = op_norm_bruteforce(&id, 3.0, 3.0, &BruteforceConfig::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3 && r.value <= 1.0 + 1e-12);
        let r1 = DenseMap::rank_one(s.clone(), s, &[c(1.0), c(0.0)], &[c(1.0), c(1.0)]).unwrap();
        let r = op_norm_bruteforce(&r1, 4.0 / 3.0, 4.0, &BruteforceConfig::default()).unwrap();
        let exact = 2f64.powf(0.25);
        assert!(r.value <= exact + 1e-12 && exact <= r.value + r.error + 1e-12);
        assert!(r.error < 1e-4);
    }
}
