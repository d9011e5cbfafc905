//! Exponent algebra for cluster and resolvent bounds.
//!
//! Lebesgue exponents are exact rationals (with an explicit infinity) so that
//! profile breakpoints such as the critical exponent `2(n+1)/(n-1)` are matched
//! exactly. Profiles are piecewise linear in `1/q` and are only converted to
//! floating point at evaluation time.
//!
//! The Sogge exponent is the pointwise *maximum* of its two linear branches.
//! Only the maximum is consistent with the endpoint values `sigma(2) = 0` and
//! `2 sigma(2n/(n-2)) - 1 = 0`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering as AtomicOrdering};

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static SOBOLEV_STANDIN_N2: AtomicI64 = AtomicI64::new(100);

/// Finite stand-in used for the Sobolev exponent when `n = 2`.
pub fn sobolev_standin() -> i64 {
    SOBOLEV_STANDIN_N2.load(AtomicOrdering::Relaxed)
}

/// Reconfigure the `n = 2` Sobolev stand-in. Every range check reads this value.
pub fn set_sobolev_standin(value: i64) -> Result<()> {
    if value <= 2 {
        return Err(Error::param(format!(
            "sobolev stand-in must exceed 2, got {value}"
        )));
    }
    SOBOLEV_STANDIN_N2.store(value, AtomicOrdering::Relaxed);
    Ok(())
}

/// A Lebesgue exponent `q` in `[1, inf]`, stored exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Exponent {
    Finite(Rational64),
    Infinite,
}

impl Exponent {
    pub fn new(numer: i64, denom: i64) -> Self {
        Exponent::Finite(Rational64::new(numer, denom))
    }

    pub fn int(q: i64) -> Self {
        Exponent::Finite(Rational64::from_integer(q))
    }

    /// `1/q`, zero for `q = inf`.
    pub fn recip(&self) -> Rational64 {
        match self {
            Exponent::Finite(q) => q.recip(),
            Exponent::Infinite => Rational64::zero(),
        }
    }

    pub fn from_recip(r: Rational64) -> Self {
        if r.is_zero() {
            Exponent::Infinite
        } else {
            Exponent::Finite(r.recip())
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Finite(q) => q.to_f64().unwrap_or(f64::NAN),
            Exponent::Infinite => f64::INFINITY,
        }
    }

    /// Hölder dual `q'` with `1/q + 1/q' = 1`.
    pub fn dual(&self) -> Self {
        Exponent::from_recip(Rational64::one() - self.recip())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// Nearest small-denominator rational (denominators up to 10⁶).
    pub fn from_f64(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            return Ok(Exponent::Infinite);
        }
        if !(q.is_finite() && q >= 1.0) {
            return Err(Error::param(format!("exponent {q} outside [1, inf]")));
        }
        let mut best = Rational64::from_integer(q.round() as i64);
        for d in 1..=1_000_000i64 {
            let cand = Rational64::new((q * d as f64).round() as i64, d);
            if (cand.to_f64().unwrap_or(f64::NAN) - q).abs() < (best.to_f64().unwrap_or(f64::NAN) - q).abs() {
                best = cand;
            }
            if (best.to_f64().unwrap_or(f64::NAN) - q).abs() <= 1e-12 * q {
                break;
            }
        }
        Ok(Exponent::Finite(best))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger q <=> smaller 1/q
        other.recip().cmp(&self.recip())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(q) if q.is_integer() => write!(f, "{}", q.numer()),
            Exponent::Finite(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(Exponent::Infinite);
        }
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::param(format!("cannot parse exponent `{s}`")))
        };
        match s.split_once('/') {
            Some((a, b)) => {
                let d = parse(b)?;
                if d == 0 {
                    return Err(Error::param(format!("zero denominator in `{s}`")));
                }
                Ok(Exponent::new(parse(a)?, d))
            }
            None => Ok(Exponent::int(parse(s)?)),
        }
    }
}

impl From<i64> for Exponent {
    fn from(q: i64) -> Self {
        Exponent::int(q)
    }
}

/// Dimension/exponent pair, the basic argument of the exponent catalogs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QExponent {
    pub n: u32,
    pub q: Exponent,
}

impl QExponent {
    pub fn new(n: u32, q: Exponent) -> Result<Self> {
        check_dim(n)?;
        check_q_ge_2(q)?;
        Ok(Self { n, q })
    }

    pub fn dual(&self) -> Exponent {
        self.q.dual()
    }

    pub fn critical(&self) -> Exponent {
        critical_q(self.n).expect("dimension validated")
    }

    pub fn sobolev(&self) -> Exponent {
        sobolev_q(self.n).expect("dimension validated")
    }
}

fn check_dim(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::param(format!("dimension must be >= 2, got {n}")));
    }
    Ok(())
}

fn check_q_ge_2(q: Exponent) -> Result<()> {
    if q.recip() > Rational64::new(1, 2) {
        return Err(Error::ExponentOutOfRange {
            q: q.to_string(),
            range: "[2, inf]".into(),
        });
    }
    Ok(())
}

fn half() -> Rational64 {
    Rational64::new(1, 2)
}

/// Japanese bracket `<x> = 2 + |x|`.
pub fn bracket(x: f64) -> f64 {
    2.0 + x.abs()
}

/// Critical exponent `q_n = 2(n+1)/(n-1)`.
pub fn critical_q(n: u32) -> Result<Exponent> {
    check_dim(n)?;
    let n = n as i64;
    Ok(Exponent::new(2 * (n + 1), n - 1))
}

/// Sobolev exponent `2n/(n-2)`; the configured stand-in for `n = 2`.
pub fn sobolev_q(n: u32) -> Result<Exponent> {
    check_dim(n)?;
    if n == 2 {
        return Ok(Exponent::int(sobolev_standin()));
    }
    let n = n as i64;
    Ok(Exponent::new(2 * n, n - 2))
}

/// Both linear branches of the Sogge exponent, exactly.
fn sigma_branches(n: u32, q: Exponent) -> (Rational64, Rational64) {
    let nr = Rational64::from_integer(n as i64);
    let gap = half() - q.recip();
    let high = nr * gap - half();
    let low = (nr - Rational64::one()) / Rational64::from_integer(2) * gap;
    (high, low)
}

/// Exact rational Sogge exponent.
pub fn sigma_exact(n: u32, q: Exponent) -> Result<Rational64> {
    check_dim(n)?;
    check_q_ge_2(q)?;
    let (high, low) = sigma_branches(n, q);
    Ok(high.max(low))
}

/// Sogge exponent `sigma(q) = max(n(1/2-1/q) - 1/2, (n-1)/2 (1/2-1/q))`.
pub fn sigma(n: u32, q: Exponent) -> Result<f64> {
    Ok(sigma_exact(n, q)?.to_f64().unwrap_or(f64::NAN))
}

/// Flattened Sobolev index `s(q) = 1 - n(1/2 - 1/q)`, defined on `[q_n, 2*]`.
pub fn s_of_q(n: u32, q: Exponent) -> Result<f64> {
    let qn = critical_q(n)?;
    let qs = sobolev_q(n)?;
    if q < qn || q > qs {
        return Err(Error::ExponentOutOfRange {
            q: q.to_string(),
            range: format!("[{qn}, {qs}]"),
        });
    }
    let nr = Rational64::from_integer(n as i64);
    let s = Rational64::one() - nr * (half() - q.recip());
    let cross = half() - sigma_exact(n, q)?;
    if s != cross {
        return Err(Error::Numerical(format!(
            "s(q) = {s} disagrees with 1/2 - sigma(q) = {cross}"
        )));
    }
    Ok(s.to_f64().unwrap_or(f64::NAN))
}

/// Region exponent `rho = (2-s)/(2+s)` for a `C^s` metric.
pub fn rho_of_s(s: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&s) {
        return Err(Error::param(format!("metric regularity s={s} outside [0,2]")));
    }
    Ok((2.0 - s) / (2.0 + s))
}

/// Exponent obtained by interpolating between the trivial `q = 2` resolvent
/// exponent `-1` and a known exponent `e1` at `q1`. Linear in `1/q`.
pub fn interpolate_with_trivial(n: u32, q1: Exponent, e1: f64, q: Exponent) -> Result<f64> {
    check_dim(n)?;
    check_q_ge_2(q1)?;
    if q > q1 || q.recip() > half() {
        return Err(Error::ExponentOutOfRange {
            q: q.to_string(),
            range: format!("[2, {q1}]"),
        });
    }
    if q1 == Exponent::int(2) {
        return Ok(-1.0);
    }
    let t = (half() - q.recip()) / (half() - q1.recip());
    let t = t.to_f64().unwrap_or(f64::NAN);
    Ok(-1.0 + t * (e1 + 1.0))
}

/// Sobolev embedding transfer `e1 + 2n(1/q1 - 1/q2)` from `q1` up to `q2`.
pub fn embed_up(n: u32, q1: Exponent, e1: f64, q2: Exponent) -> Result<f64> {
    let qn = critical_q(n)?;
    let qs = sobolev_q(n)?;
    if !(qn <= q1 && q1 <= q2 && q2 <= qs) {
        return Err(Error::ExponentOutOfRange {
            q: format!("({q1}, {q2})"),
            range: format!("q_n={qn} <= q1 <= q2 <= 2*={qs}"),
        });
    }
    let shift = Rational64::from_integer(2 * n as i64) * (q1.recip() - q2.recip());
    Ok(e1 + shift.to_f64().unwrap_or(f64::NAN))
}

/// Piecewise-linear function of `1/q`, optionally multiplied by `ln^nu <lambda>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentProfile {
    /// `(1/q, value)` pairs, strictly decreasing in `1/q`.
    pub breakpoints: Vec<(Rational64, f64)>,
    pub log_power: f64,
    pub label: String,
    /// Upper end of the exponent range in which the source bound is stated,
    /// when it is narrower than the breakpoint domain.
    #[serde(default)]
    pub q_valid_max: Option<f64>,
    /// Spectral window schedule attached to the profile, if any.
    #[serde(default)]
    pub eps_schedule: Option<String>,
}

impl ExponentProfile {
    pub fn new(breakpoints: Vec<(Rational64, f64)>, log_power: f64, label: &str) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::param("profile needs at least one breakpoint"));
        }
        if breakpoints.windows(2).any(|w| w[0].0 <= w[1].0) {
            return Err(Error::param(
                "profile breakpoints must be strictly decreasing in 1/q",
            ));
        }
        Ok(Self {
            breakpoints,
            log_power,
            label: label.to_string(),
            q_valid_max: None,
            eps_schedule: None,
        })
    }

    pub fn domain(&self) -> (Exponent, Exponent) {
        let first = self.breakpoints.first().expect("non-empty").0;
        let last = self.breakpoints.last().expect("non-empty").0;
        (Exponent::from_recip(first), Exponent::from_recip(last))
    }

    pub fn evaluate(&self, q: Exponent) -> Result<f64> {
        let r = q.recip();
        let bp = &self.breakpoints;
        if let Some((_, v)) = bp.iter().find(|(x, _)| *x == r) {
            return Ok(*v);
        }
        for w in bp.windows(2) {
            let ((x0, v0), (x1, v1)) = (w[0], w[1]);
            if x0 > r && r > x1 {
                let t = ((x0 - r) / (x0 - x1)).to_f64().unwrap_or(f64::NAN);
                return Ok(v0 + t * (v1 - v0));
            }
        }
        let (lo, hi) = self.domain();
        Err(Error::ExponentOutOfRange {
            q: q.to_string(),
            range: format!("[{lo}, {hi}]"),
        })
    }

    /// `<lambda>^{gamma(q)} ln^nu <lambda>`.
    pub fn bound_at(&self, q: Exponent, lambda: f64) -> Result<f64> {
        let g = self.evaluate(q)?;
        let b = bracket(lambda);
        Ok(b.powf(g) * b.ln().powf(self.log_power))
    }
}

/// Sogge profile over `[2, inf]`.
pub fn sigma_profile(n: u32) -> Result<ExponentProfile> {
    let qn = critical_q(n)?;
    let points = [Exponent::int(2), qn, Exponent::Infinite];
    let bp = points
        .iter()
        .map(|q| Ok((q.recip(), sigma(n, *q)?)))
        .collect::<Result<Vec<_>>>()?;
    ExponentProfile::new(bp, 0.0, "sogge-sigma")
}

/// Keys of the exponent catalogs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CatalogKey {
    /// Smooth metric, universal exponent `sigma(q)`.
    Smooth,
    /// `C^s` metric: `sigma(q) + (1/q)(2-s)/(2+s)`.
    Cs { s: f64 },
    /// Manifolds with boundary, Smith–Sogge exponents.
    BoundarySmithSogge,
    /// Logarithmically improved windows `eps(lambda) = 1/ln<lambda>`.
    ImprovedLog,
    /// Strictly concave Dirichlet boundary: perfect exponent with one log.
    BoundaryConcave,
}

impl FromStr for CatalogKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        match key {
            "smooth" => Ok(CatalogKey::Smooth),
            "boundary-smith-sogge" => Ok(CatalogKey::BoundarySmithSogge),
            "improved-log" => Ok(CatalogKey::ImprovedLog),
            "boundary-concave" => Ok(CatalogKey::BoundaryConcave),
            _ => {
                if let Some(rest) = key.strip_prefix("cs:").or_else(|| key.strip_prefix("Cs:")) {
                    let s = rest
                        .parse::<f64>()
                        .map_err(|_| Error::UnknownCatalog(key.to_string()))?;
                    Ok(CatalogKey::Cs { s })
                } else {
                    Err(Error::UnknownCatalog(key.to_string()))
                }
            }
        }
    }
}

/// `gamma(q)` catalogs for the settings with explicitly stated exponents.
pub fn gamma_catalog(key: CatalogKey, n: u32) -> Result<ExponentProfile> {
    let qn = critical_q(n)?;
    let qs = sobolev_q(n)?;
    match key {
        CatalogKey::Smooth => {
            let mut p = sigma_profile(n)?;
            p.label = "smooth".into();
            Ok(p)
        }
        CatalogKey::Cs { s } => {
            let rho = rho_of_s(s)?;
            let points = [Exponent::int(2), qn, Exponent::Infinite];
            let bp = points
                .iter()
                .map(|q| {
                    let r = q.recip().to_f64().unwrap_or(f64::NAN);
                    Ok((q.recip(), sigma(n, *q)? + r * rho))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut p = ExponentProfile::new(bp, 0.0, &format!("cs:{s}"))?;
            p.q_valid_max = Some(if n == 2 {
                f64::INFINITY
            } else {
                let nf = n as f64;
                (2.0 * nf * (s + 2.0) + s - 2.0) / ((nf - 2.0) * (s + 2.0))
            });
            Ok(p)
        }
        CatalogKey::BoundarySmithSogge => boundary_profile(n, qn, qs),
        CatalogKey::ImprovedLog => {
            let mut p = sigma_profile(n)?;
            p.label = "improved-log".into();
            // windows of length eps = 1/ln<lambda> with delta = eps^{1/2}
            p.log_power = -0.5;
            p.eps_schedule = Some("1/ln<lambda>".into());
            Ok(p)
        }
        CatalogKey::BoundaryConcave => {
            let mut p = sigma_profile(n)?;
            p.label = "boundary-concave".into();
            p.log_power = 1.0;
            p.q_valid_max = Some(qs.to_f64());
            Ok(p)
        }
    }
}

/// Smith–Sogge boundary exponents: `(4/3) sigma(q)` on `[2, q_n]`, then
/// `sigma(q) + (1/3)(eps(q) - 1/q)_-` up to the Sobolev exponent, with
/// `eps(q) = (n-1)(1/2-1/q) - 2/q`.
fn boundary_profile(n: u32, qn: Exponent, qs: Exponent) -> Result<ExponentProfile> {
    let nr = Rational64::from_integer(n as i64);
    let value = |q: Exponent| -> Result<Rational64> {
        let sig = sigma_exact(n, q)?;
        if q <= qn {
            return Ok(Rational64::new(4, 3) * sig);
        }
        let r = q.recip();
        let eps = (nr - Rational64::one()) * (half() - r) - Rational64::from_integer(2) * r;
        let neg_part = (r - eps).max(Rational64::zero());
        Ok(sig + neg_part / Rational64::from_integer(3))
    };
    let qb = Exponent::new(2 * (n as i64 + 2), n as i64 - 1);
    let mut points = vec![Exponent::int(2), qn];
    if qb < qs {
        points.push(qb);
    }
    points.push(qs);
    let bp = points
        .iter()
        .map(|q| Ok((q.recip(), value(*q)?.to_f64().unwrap_or(f64::NAN))))
        .collect::<Result<Vec<_>>>()?;
    ExponentProfile::new(bp, 0.0, "boundary-smith-sogge")
}

/// `Omega_rho = { (lambda + i mu)^2 : lambda >= lambda_min, |mu| <= C lambda^rho }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRegion {
    pub rho: f64,
    pub constant: f64,
    pub lambda_min: f64,
}

impl SpectralRegion {
    pub fn new(rho: f64, constant: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::param(format!("region exponent rho={rho} outside [0,1]")));
        }
        if constant <= 0.0 {
            return Err(Error::param("region constant must be positive"));
        }
        Ok(Self {
            rho,
            constant,
            lambda_min: 1.0,
        })
    }

    pub fn contains(&self, lambda: f64, mu: f64) -> bool {
        region_contains(lambda, mu, self)
    }
}

pub fn region_contains(lambda: f64, mu: f64, region: &SpectralRegion) -> bool {
    lambda >= region.lambda_min && mu.abs() <= region.constant * lambda.powf(region.rho)
}
