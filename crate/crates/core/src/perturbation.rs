//! Stability of resolvent bounds under potentials `V`.
//!
//! Conventions: `Δ = -A²`, `z = (λ+i)²`, `R = (Δ + z)^{-1}` and
//! `R_V = (Δ + V + z)^{-1}`, so `R_V = R - R V R_V`. Potentials act through
//! their Galerkin matrix `⟨e_i, V e_j⟩` in the operator's retained basis,
//! which is exact for complete bases.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::Eigenbasis;
use crate::error::{Error, Result};
use crate::exponents::{sigma, Exponent};
use crate::inequality::{check_prop32, CheckResult, Prop32Item, Prop32Params};
use crate::linalg::C64;
use crate::lp::{op_norm_composite, IterationConfig, NormBracket, Operand, SpaceSpec};
use crate::manifolds::{build_potential, ModelSpec, Potential, PotentialKind};
use crate::spectral::{resolvent_sq, ResolventQuery, SpectralMap, SpectralOperator};

/// `s(q) = 1 - n(1/2 - 1/q)`, the regularity index of `X(λ)`.
pub fn regularity_index(n: usize, q: f64) -> f64 {
    1.0 - n as f64 * (0.5 - 1.0 / q)
}

/// Galerkin matrix `V_ij = ⟨e_i, V e_j⟩_w`.
pub fn galerkin(op: &SpectralOperator, values: &[f64]) -> Result<DMatrix<C64>> {
    let w = op.space().weights();
    if values.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("potential has non-finite values"));
    }
    let r = op.rank();
    let cols: Vec<Vec<C64>> = (0..r)
        .into_par_iter()
        .map(|j| {
            let e: Vec<C64> = op
                .basis()
                .column(j)
                .iter()
                .zip(values)
                .map(|(x, v)| x * *v)
                .collect();
            op.basis().analyze(w, &e)
        })
        .collect();
    let mut m = DMatrix::from_fn(r, r, |i, j| cols[j][i]);
    // enforce exact Hermitian symmetry
    let mt = m.adjoint();
    m = (m + mt) * C64::new(0.5, 0.0);
    Ok(m)
}

fn flat_weights(op: &SpectralOperator, lambda: f64, s: f64) -> Vec<f64> {
    op.eigenvalues()
        .iter()
        .map(|t| (lambda * lambda + t * t).powf(s / 2.0))
        .collect()
}

/// `||D_a M D_b||_{2->2}` with diagonal scalings, by SVD.
fn scaled_norm(m: &DMatrix<C64>, left: &[f64], right: &[f64]) -> f64 {
    let s = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * left[i] * right[j]);
    s.singular_values().iter().fold(0.0f64, |a, v| a.max(*v))
}

/// `M(λ)` for one `λ`: a certified upper bound from the `W^{1/2,2} ->
/// W^{-1/2,2}` component (exact for the Galerkin matrix), the cruder
/// `λ^{-1}||V||_∞`, and the Hölder surrogate `λ^{2σ(q)-1}||V||_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MBound {
    pub lambda: f64,
    pub upper: f64,
    pub sup_bound: f64,
    pub surrogate: f64,
}

pub fn m_of_lambda(v: &Potential, op: &SpectralOperator, n: usize, lambda: f64, q: f64) -> Result<MBound> {
    let g = galerkin(op, &v.values)?;
    m_of_lambda_with(&g, v, op, n, lambda, q)
}

fn m_of_lambda_with(
    g: &DMatrix<C64>,
    v: &Potential,
    op: &SpectralOperator,
    n: usize,
    lambda: f64,
    q: f64,
) -> Result<MBound> {
    if !(lambda >= 1.0) {
        return Err(Error::param("M(λ) needs λ >= 1"));
    }
    let f = flat_weights(op, lambda, -0.5);
    let upper = scaled_norm(g, &f, &f);
    Ok(MBound {
        lambda,
        upper,
        sup_bound: v.sup() / lambda,
        surrogate: lambda.powf(2.0 * sigma(n as u32, Exponent::from_f64(q)?)? - 1.0) * v.norm,
    })
}

/// `((C₀ ||V||) / c)^{1/(1-2σ)}`, at least 1.
pub fn lambda0(c0: f64, c: f64, v_norm: f64, sigma_q: f64) -> Result<f64> {
    if !(2.0 * sigma_q < 1.0) {
        return Err(Error::param(format!(
            "2σ(q) = {} >= 1: use the potential splitting path",
            2.0 * sigma_q
        )));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::param(format!("contraction c must lie in (0,1), got {c}")));
    }
    if v_norm == 0.0 {
        return Ok(1.0);
    }
    Ok((c0 * v_norm / c).powf(1.0 / (1.0 - 2.0 * sigma_q)).max(1.0))
}

/// `V = V_big + V_small` with `V_big = V 1_{|V| > α₀}`.
pub fn potential_split(v: &Potential, alpha0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(alpha0 > 0.0) {
        return Err(Error::param("split level must be positive"));
    }
    let big: Vec<f64> = v.values.iter().map(|x| if x.abs() > alpha0 { *x } else { 0.0 }).collect();
    let small = v.values.iter().zip(&big).map(|(x, b)| x - b).collect();
    Ok((big, small))
}

/// Smallest `α₀` (to relative `1e-10`) with `||V_{>α₀}||_p <= target`.
pub fn critical_split(v: &Potential, weights: &[f64], p: f64, target: f64) -> Result<f64> {
    let norm_big = |a: f64| -> Result<f64> {
        let (big, _) = potential_split(v, a)?;
        Ok(crate::lp::lp_norm_real(&big, weights, p))
    };
    let mut hi = v.sup().max(f64::MIN_POSITIVE);
    if norm_big(hi)? > target {
        return Err(Error::Numerical("split target unreachable".into()));
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 || (hi - lo) <= 1e-10 * hi {
            break;
        }
        if norm_big(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `C₀ = max_λ ||R||_{X'(λ) -> X(λ)}` using certified upper brackets.
pub fn c0_estimate(op: &SpectralOperator, n: usize, q: f64, grid: &[f64], cfg: &IterationConfig) -> Result<f64> {
    c0_profile(op, n, q, grid, cfg).map(|v| v.into_iter().map(|b| b.upper).fold(0.0, f64::max))
}

/// Per-grid-point brackets of `||R||_{X'(λ) -> X(λ)}`.
pub fn c0_profile(
    op: &SpectralOperator,
    n: usize,
    q: f64,
    grid: &[f64],
    cfg: &IterationConfig,
) -> Result<Vec<NormBracket>> {
    if grid.is_empty() {
        return Err(Error::param("empty λ grid"));
    }
    let s = regularity_index(n, q);
    grid.iter()
        .map(|&lambda| {
            let r = resolvent_sq(op, &ResolventQuery::new(lambda, 1.0)?)?;
            op_norm_composite(
                &Operand::Spectral(r),
                &SpaceSpec::x_dual_lambda(op, lambda, s, q),
                &SpaceSpec::x_lambda(op, lambda, s, q),
                cfg,
            )
        })
        .collect()
}

/// How the perturbed resolvent is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolventMethod {
    Direct,
    Neumann(usize),
}

/// Convergence record of the Neumann series, in the `W^{-1/2,2}_λ ->
/// W^{1/2,2}_λ` norm where `C` and `M` are exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannDiagnostics {
    /// `||R||` and `||V||` in the flattened L² pair.
    pub c: f64,
    pub m: f64,
    pub mc: f64,
    pub convergent: bool,
    /// `||R_V - R_V^{(k)}||` for `k = 0..=K`.
    pub errors: Vec<f64>,
    /// `(MC)^{k+1} C / (1 - MC)`, infinite when divergent.
    pub bounds: Vec<f64>,
    /// `exp` of the least-squares slope of `ln error` vs `k`.
    pub observed_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct PerturbedResolvent {
    pub lambda: f64,
    /// `R_V` as a coefficient matrix in the operator's basis.
    pub matrix: DMatrix<C64>,
    pub method: ResolventMethod,
    /// `||R_V - R + R V R_V|| / ||R_V||` (entrywise max).
    pub identity_residual: f64,
    pub neumann: Option<NeumannDiagnostics>,
}

impl PerturbedResolvent {
    pub fn map(&self, op: &SpectralOperator) -> Result<SpectralMap> {
        SpectralMap::dense(op, self.matrix.clone())
    }
}

fn direct_solve(shift: &[C64], g: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let r = shift.len();
    let mut m = g.clone();
    for i in 0..r {
        m[(i, i)] += shift[i];
    }
    let lu = m.lu();
    lu.try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular("perturbed resolvent system".into()))
}

fn fit_ratio(errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 1e-13 * errors[0].max(1e-300))
        .map(|(k, e)| (k as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

/// `R_V` at `λ` (shift `z = (λ+i)²`). `Neumann(k)` also returns the direct
/// solution's diagnostics; a divergent series is flagged, not fatal, and the
/// direct result is returned in that case.
pub fn perturbed_resolvent(
    op: &SpectralOperator,
    v: &[f64],
    lambda: f64,
    method: ResolventMethod,
) -> Result<PerturbedResolvent> {
    let g = galerkin(op, v)?;
    perturbed_resolvent_with(op, &g, lambda, method)
}

pub fn perturbed_resolvent_with(
    op: &SpectralOperator,
    g: &DMatrix<C64>,
    lambda: f64,
    method: ResolventMethod,
) -> Result<PerturbedResolvent> {
    if !(lambda >= 1.0) {
        return Err(Error::param("perturbed resolvent needs λ >= 1"));
    }
    let z = C64::new(lambda, 1.0).powi(2);
    let shift: Vec<C64> = op.eigenvalues().iter().map(|t| z - t * t).collect();
    let rdiag: Vec<C64> = shift.iter().map(|s| s.inv()).collect();
    let direct = direct_solve(&shift, g)?;
    // residual of R_V = R - R V R_V
    let vr = g * &direct;
    let mut resid = 0.0f64;
    for i in 0..direct.nrows() {
        for j in 0..direct.ncols() {
            let r_ij = if i == j { rdiag[i] } else { C64::new(0.0, 0.0) };
            resid = resid.max((direct[(i, j)] - r_ij + rdiag[i] * vr[(i, j)]).norm());
        }
    }
    let identity_residual = resid / direct.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
    let (matrix, neumann) = match method {
        ResolventMethod::Direct => (direct, None),
        ResolventMethod::Neumann(k) => {
            let plus = flat_weights(op, lambda, 0.5);
            let minus = flat_weights(op, lambda, -0.5);
            let c = rdiag
                .iter()
                .zip(&plus)
                .map(|(r, p)| r.norm() * p * p)
                .fold(0.0, f64::max);
            let m = scaled_norm(g, &minus, &minus);
            let mc = m * c;
            let convergent = mc < 1.0;
            let mut term = DMatrix::from_diagonal(&DVector::from_vec(rdiag.clone()));
            let mut partial = term.clone();
            let mut errors = Vec::with_capacity(k + 1);
            let mut bounds = Vec::with_capacity(k + 1);
            for j in 0..=k {
                errors.push(scaled_norm(&(&direct - &partial), &plus, &plus));
                bounds.push(if convergent {
                    mc.powi(j as i32 + 1) * c / (1.0 - mc)
                } else {
                    f64::INFINITY
                });
                if j < k {
                    // term_{j+1} = -R V term_j
                    let vt = g * &term;
                    term = DMatrix::from_fn(vt.nrows(), vt.ncols(), |a, b| -rdiag[a] * vt[(a, b)]);
                    partial += &term;
                }
            }
            let diag = NeumannDiagnostics {
                c,
                m,
                mc,
                convergent,
                observed_ratio: fit_ratio(&errors),
                errors,
                bounds,
            };
            (if convergent { partial } else { direct }, Some(diag))
        }
    };
    Ok(PerturbedResolvent {
        lambda,
        matrix,
        method,
        identity_residual,
        neumann,
    })
}

/// The perturbed operator `A_V = (A² - V)_+^{1/2}` on the retained basis,
/// for cluster checks. Negative parts of `A² - V` are clipped to zero.
pub fn perturbed_operator(op: &SpectralOperator, g: &DMatrix<C64>) -> Result<SpectralOperator> {
    let r = op.rank();
    let mut h = -g.clone();
    for (i, t) in op.eigenvalues().iter().enumerate() {
        h[(i, i)] += C64::new(t * t, 0.0);
    }
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..r).collect();
    idx.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let u = DMatrix::from_fn(r, r, |a, b| eig.eigenvectors[(a, idx[b])]);
    let base: Arc<Eigenbasis> = op.basis_arc();
    SpectralOperator::from_parts(
        op.space().clone(),
        vals,
        Eigenbasis::Rotated { base, u },
        format!("{}+V", op.label()),
    )
}

/// Per-λ entry of a stability report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub lambda: f64,
    pub perturbed: NormBracket,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    #[serde(rename = "C0")]
    pub c0: f64,
    pub c: f64,
    #[serde(rename = "M_of_Lambda")]
    pub m_of_lambda: Vec<MBound>,
    #[serde(rename = "Lambda0")]
    pub lambda0: f64,
    pub neumann_bound: f64,
    pub points: Vec<StabilityPoint>,
    /// Cluster bound for the perturbed operator re-derived through the
    /// imaginary part of its resolvent.
    pub cluster: Option<CheckResult>,
    pub verified: bool,
}

/// Options of [`stability_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub c: f64,
    pub tolerance: f64,
    pub cluster_check: bool,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            c: 0.5,
            tolerance: 1e-9,
            cluster_check: true,
        }
    }
}

/// Verify `||R_V||_{X'(λ) -> X(λ)} <= C₀/(1-c)` for grid `λ >= Λ₀`, where
/// `Λ₀` is the first grid point from which `M(λ) <= c/C₀` holds throughout.
pub fn stability_check(
    op: &SpectralOperator,
    n: usize,
    v: &Potential,
    q: f64,
    grid: &[f64],
    opts: &StabilityOptions,
    cfg: &IterationConfig,
) -> Result<StabilityReport> {
    stability_check_with(op, n, v, q, grid, None, opts, cfg)
}

/// [`stability_check`] with an optional precomputed `C₀`.
#[allow(clippy::too_many_arguments)]
pub fn stability_check_with(
    op: &SpectralOperator,
    n: usize,
    v: &Potential,
    q: f64,
    grid: &[f64],
    c0: Option<f64>,
    opts: &StabilityOptions,
    cfg: &IterationConfig,
) -> Result<StabilityReport> {
    if !(opts.c > 0.0 && opts.c < 1.0) && !(opts.c == 0.0 && v.sup() == 0.0) {
        return Err(Error::param(format!("contraction c must lie in (0,1), got {}", opts.c)));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let c0 = match c0 {
        Some(c) => c,
        None => c0_estimate(op, n, q, &grid, cfg)?,
    };
    let g = galerkin(op, &v.values)?;
    let ms = grid
        .iter()
        .map(|&l| m_of_lambda_with(&g, v, op, n, l, q))
        .collect::<Result<Vec<_>>>()?;
    // first grid index from which M(λ) <= c/C₀ for all larger grid λ
    let mut start = grid.len();
    for i in (0..grid.len()).rev() {
        if ms[i].upper * c0 <= opts.c * (1.0 + 1e-12) {
            start = i;
        } else {
            break;
        }
    }
    let lambda0 = grid.get(start).copied().unwrap_or(f64::INFINITY);
    let bound = c0 / (1.0 - opts.c);
    let s = regularity_index(n, q);
    let points = grid[start..]
        .par_iter()
        .map(|&lambda| {
            let pr = perturbed_resolvent_with(op, &g, lambda, ResolventMethod::Direct)?;
            let map = pr.map(op)?;
            let b = op_norm_composite(
                &Operand::Spectral(map),
                &SpaceSpec::x_dual_lambda(op, lambda, s, q),
                &SpaceSpec::x_lambda(op, lambda, s, q),
                cfg,
            )?;
            let pass = b.lower <= bound * (1.0 + opts.tolerance);
            Ok(StabilityPoint {
                lambda,
                perturbed: b,
                bound,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cluster = if opts.cluster_check && start < grid.len() {
        let lambda = grid[grid.len() - 1];
        let pop = perturbed_operator(op, &g)?;
        Some(check_prop32(
            &pop,
            Prop32Item::ClusterFromImL2,
            &Prop32Params::new(lambda, 1.0, q),
            cfg,
        )?)
    } else {
        None
    };
    let verified = start < grid.len()
        && points.iter().all(|p| p.pass)
        && cluster.as_ref().map_or(true, |c| c.pass);
    Ok(StabilityReport {
        c0,
        c: opts.c,
        m_of_lambda: ms,
        lambda0,
        neumann_bound: bound,
        points,
        cluster,
        verified,
    })
}

/// `||((A^α) + V - (λ+i)^α)^{-1}||_{q'->q}` (power-iteration bracket).
pub fn fractional_resolvent_norm(
    op: &SpectralOperator,
    v: &[f64],
    alpha: f64,
    lambda: f64,
    q: f64,
    cfg: &IterationConfig,
) -> Result<NormBracket> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::param(format!("fractional order must lie in (0, 2], got {alpha}")));
    }
    let g = galerkin(op, v)?;
    let z = C64::new(lambda, 1.0).powf(alpha);
    let shift: Vec<C64> = op.eigenvalues().iter().map(|t| t.powf(alpha) - z).collect();
    let m = direct_solve(&shift, &g)?;
    let map = SpectralMap::dense(op, m)?;
    crate::lp::op_norm_power(&map, q / (q - 1.0), q, cfg)
}

/// A perturbation experiment declared in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub model: ModelSpec,
    pub potential: PotentialKind,
    /// Lebesgue exponent in which `||V||` is reported.
    #[serde(default = "default_p")]
    pub p: f64,
    pub q: f64,
    pub lambda: Vec<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Rescale `V` so that `M(1) C₀` equals this value when it exceeds it.
    #[serde(default)]
    pub target_mc: Option<f64>,
    #[serde(default = "default_terms")]
    pub neumann_terms: usize,
    #[serde(default = "default_true")]
    pub cluster_check: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_p() -> f64 {
    2.0
}

fn default_c() -> f64 {
    0.5
}

fn default_terms() -> usize {
    12
}

fn default_true() -> bool {
    true
}

fn default_seed() -> u64 {
    IterationConfig::default().seed
}

impl PerturbConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.lambda.is_empty() {
            return Err(Error::Config("empty λ grid".into()));
        }
        if !(cfg.q > 2.0 && cfg.q.is_finite()) {
            return Err(Error::Config(format!("need 2 < q < inf, got {}", cfg.q)));
        }
        Ok(cfg)
    }
}

/// Result of [`run_perturb`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbOutcome {
    /// Factor applied to the configured potential.
    pub scale: f64,
    pub v_norm: f64,
    /// `M(1) C₀` after scaling.
    pub mc0: f64,
    pub stability: StabilityReport,
    /// Neumann convergence at the largest grid `λ`.
    pub neumann: Option<NeumannDiagnostics>,
}

pub fn run_perturb(cfg: &PerturbConfig) -> Result<PerturbOutcome> {
    let model = cfg.model.build()?;
    let n = cfg.model.dimension();
    let op = &model.op;
    let icfg = IterationConfig::default().with_seed(cfg.seed);
    let mut v = build_potential(&cfg.potential, &model, cfg.p)?;
    let mut grid = cfg.lambda.clone();
    grid.sort_by(f64::total_cmp);
    let c0 = c0_estimate(op, n, cfg.q, &grid, &icfg)?;
    let m1 = m_of_lambda(&v, op, n, 1.0, cfg.q)?.upper;
    let mut scale = 1.0;
    if let Some(t) = cfg.target_mc {
        if m1 * c0 > t && m1 > 0.0 {
            scale = t / (m1 * c0);
            v = v.scaled(scale);
        }
    }
    let opts = StabilityOptions {
        c: cfg.c,
        cluster_check: cfg.cluster_check,
        ..Default::default()
    };
    let stability = stability_check_with(op, n, &v, cfg.q, &grid, Some(c0), &opts, &icfg)?;
    let neumann = match grid.last() {
        Some(&l) if cfg.neumann_terms > 0 => {
            perturbed_resolvent(op, &v.values, l, ResolventMethod::Neumann(cfg.neumann_terms))?.neumann
        }
        _ => None,
    };
    Ok(PerturbOutcome {
        scale,
        v_norm: v.norm,
        mc0: m1 * scale * c0,
        stability,
        neumann,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::FiniteMeasureSpace;
    use crate::manifolds::TorusModel;

    fn diag_op(vals: &[f64]) -> SpectralOperator {
        let n = vals.len();
        let space = FiniteMeasureSpace::uniform(n, 1.0).unwrap();
        SpectralOperator::from_real_eigenpairs(space, vals.to_vec(), DMatrix::identity(n, n), "diag").unwrap()
    }

    fn constant(n: usize, v: f64, p: f64) -> Potential {
        Potential {
            kind: PotentialKind::Zero,
            values: vec![v; n],
            p,
            norm: v.abs() * (n as f64).powf(1.0 / p),
        }
    }

    #[test]
    fn lambda0_examples() {
        assert_eq!(lambda0(1.0, 0.5, 1.0, 0.25).unwrap(), 4.0);
        assert_eq!(lambda0(1.0, 0.5, 0.0, 0.25).unwrap(), 1.0);
        let a = lambda0(3.0, 0.5, 1.0, 0.2).unwrap();
        let b = lambda0(3.0, 0.5, 2.0, 0.2).unwrap();
        assert!((b / a - 2f64.powf(1.0 / 0.6)).abs() < 1e-12);
        assert!(lambda0(1.0, 0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn split_examples() {
        let v = Potential {
            kind: PotentialKind::Zero,
            values: vec![3.0, -1.0, 0.5, 4.0],
            p: 2.0,
            norm: 0.0,
        };
        let (big, small) = potential_split(&v, 4.0).unwrap();
        assert!(big.iter().all(|x| *x == 0.0));
        assert_eq!(small, v.values);
        let (big, small) = potential_split(&v, 0.9).unwrap();
        for i in 0..4 {
            assert_eq!(big[i] + small[i], v.values[i]);
            assert!(small[i].abs() <= 0.9);
        }
        let (_, small) = potential_split(&v, 1e-12).unwrap();
        assert!(small.iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn critical_split_bisection() {
        let model = ModelSpec::Torus(TorusModel { n: 2, k: 2, g: 16 }).build().unwrap();
        let v = build_potential(&PotentialKind::InversePower { gamma: 0.5, height: 1.0 }, &model, 1.0).unwrap();
        let w = model.op.space().weights();
        let target = 0.25 * crate::lp::lp_norm_real(&v.values, w, 1.0);
        let a = critical_split(&v, w, 1.0, target).unwrap();
        let norm_at = |a: f64| crate::lp::lp_norm_real(&potential_split(&v, a).unwrap().0, w, 1.0);
        assert!(norm_at(a) <= target);
        // oracle: every distinct value below a by more than the bisection tolerance fails
        let below = v.values.iter().copied().filter(|x| *x < a * (1.0 - 1e-6)).fold(0.0, f64::max);
        assert!(norm_at(below) > target);
    }

    #[test]
    fn zero_and_constant_potentials() {
        let op = diag_op(&[0.5, 2.0, 3.5]);
        let zero = vec![0.0; 3];
        let lam = 2.0;
        let z = C64::new(lam, 1.0).powi(2);
        for method in [ResolventMethod::Direct, ResolventMethod::Neumann(4)] {
            let pr = perturbed_resolvent(&op, &zero, lam, method).unwrap();
            for (i, t) in op.eigenvalues().iter().enumerate() {
                assert!((pr.matrix[(i, i)] - (z - t * t).inv()).norm() < 1e-14);
            }
        }
        // scalar shift oracle: (Δ + v + z)^{-1} has symbol (z - τ² + v)^{-1}
        let v = 0.3;
        let direct = perturbed_resolvent(&op, &[v; 3], lam, ResolventMethod::Direct).unwrap();
        let neu = perturbed_resolvent(&op, &[v; 3], lam, ResolventMethod::Neumann(60)).unwrap();
        assert!(neu.neumann.as_ref().unwrap().convergent);
        for (i, t) in op.eigenvalues().iter().enumerate() {
            let exact = (z - t * t + v).inv();
            assert!((direct.matrix[(i, i)] - exact).norm() < 1e-12);
            assert!((neu.matrix[(i, i)] - exact).norm() < 1e-10);
        }
        assert!(direct.identity_residual < 1e-12);
    }

    #[test]
    fn neumann_errors_respect_bound() {
        let model = ModelSpec::Torus(TorusModel { n: 1, k: 6, g: 32 }).build().unwrap();
        let v = build_potential(&PotentialKind::SingleBump { height: 0.4, fraction: 0.25 }, &model, 2.0).unwrap();
        let pr = perturbed_resolvent(&model.op, &v.values, 3.0, ResolventMethod::Neumann(12)).unwrap();
        let d = pr.neumann.unwrap();
        assert!(d.convergent);
        for (e, b) in d.errors.iter().zip(&d.bounds) {
            assert!(*e <= b * (1.0 + 1e-9) + 1e-14, "{e} > {b}");
        }
        assert!(pr.identity_residual < 1e-9);
    }

    #[test]
    fn m_of_lambda_examples() {
        let model = ModelSpec::Torus(TorusModel { n: 2, k: 2, g: 12 }).build().unwrap();
        let zero = build_potential(&PotentialKind::Zero, &model, 3.0).unwrap();
        assert_eq!(m_of_lambda(&zero, &model.op, 2, 2.0, 6.0).unwrap().upper, 0.0);
        let bump = build_potential(&PotentialKind::SingleBump { height: 1.0, fraction: 0.1 }, &model, 1.5).unwrap();
        let m = m_of_lambda(&bump, &model.op, 2, 2.0, 6.0).unwrap();
        assert!(m.upper <= m.sup_bound * (1.0 + 1e-12));
        // constant V at the Sobolev endpoint: surrogate independent of λ
        let c = constant(4, 0.7, 2.0);
        let op = diag_op(&[0.0, 1.0, 2.0, 3.0]);
        let s1 = m_of_lambda(&c, &op, 3, 1.0, 6.0).unwrap().surrogate;
        let s2 = m_of_lambda(&c, &op, 3, 7.0, 6.0).unwrap().surrogate;
        assert!((s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn c0_rank_one_and_location() {
        // one eigenvalue τ on one point of unit mass: every component is |r|·(λ²+τ²)^{a}
        let tau = 9.0;
        let op = diag_op(&[tau]);
        let cfg = IterationConfig::default();
        let (n, q) = (3, 4.0);
        let s = regularity_index(n, q);
        let c0 = c0_estimate(&op, n, q, &[1.0, 1.5], &cfg).unwrap();
        let oracle = [1.0f64, 1.5]
            .iter()
            .map(|&l| {
                let r = (C64::new(l, 1.0).powi(2) - tau * tau).norm().recip();
                let f = |a: f64| (l * l + tau * tau).powf(a / 2.0);
                let comps = [f(0.5) * f(0.5), f(0.5) * f(s), f(s) * f(0.5), f(s) * f(s)];
                r * (comps[0] + comps[1]).max(comps[2] + comps[3])
            })
            .fold(0.0, f64::max);
        assert!((c0 - oracle).abs() < 1e-12 * oracle, "{c0} vs {oracle}");
        let op = diag_op(&[3.0]);
        let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
        let prof = c0_profile(&op, n, q, &grid, &cfg).unwrap();
        let best = prof.iter().enumerate().max_by(|a, b| a.1.upper.total_cmp(&b.1.upper)).unwrap().0;
        assert_eq!(grid[best], 3.0);
    }
}
