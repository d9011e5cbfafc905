//! Gauss–Legendre rules: fixed composite panels and a simple adaptive driver.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Nodes and weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(order: usize) -> Result<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Vec<(f64, f64)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&order) {
        return Ok(rule.clone());
    }
    let rule = GaussLegendre::new(order)
        .map_err(|e| Error::param(format!("gauss-legendre order {order}: {e}")))?
        .as_node_weight_pairs()
        .to_vec();
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .insert(order, rule.clone());
    Ok(rule)
}

/// Composite rule on `[a, b]` with `panels` equal panels.
pub fn composite_complex(
    a: f64,
    b: f64,
    panels: usize,
    rule: &[(f64, f64)],
    f: impl Fn(f64) -> C64,
) -> C64 {
    let h = (b - a) / panels as f64;
    let mut total = C64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = C64::new(0.0, 0.0);
        for &(x, w) in rule {
            s += f(mid + 0.5 * h * x) * w;
        }
        total += s * (0.5 * h);
    }
    total
}

fn panel(rule: &[(f64, f64)], a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Adaptive bisection of Gauss–Legendre panels until a panel and its two
/// halves agree to `tol` (relative to the running magnitude).
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let rule = gauss_legendre(10)?;
    let mut stack = vec![(a, b, panel(&rule, a, b, &f), 0u32)];
    let mut total = 0.0;
    let mut scale = 0.0f64;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&rule, lo, mid, &f);
        let right = panel(&rule, mid, hi, &f);
        let refined = left + right;
        scale = scale.max(refined.abs());
        if (refined - whole).abs() <= tol * scale.max(1e-300) || depth >= 48 {
            if depth >= 48 && (refined - whole).abs() > tol * scale.max(1e-300) {
                return Err(Error::Numerical(format!(
                    "adaptive quadrature did not converge on [{lo}, {hi}]"
                )));
            }
            total += refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if !total.is_finite() {
        return Err(Error::Numerical("non-finite quadrature value".into()));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let rule = gauss_legendre(4).unwrap();
        let v: f64 = rule.iter().map(|(x, w)| w * x.powi(6)).sum();
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks() {
        // ∫_0^4 dx / ((x-1)^2 + 1e-4) = 100 (atan(300) + atan(100))
        let v = adaptive(|x| 1.0 / ((x - 1.0).powi(2) + 1e-4), 0.0, 4.0, 1e-12).unwrap();
        let exact = 100.0 * ((300.0f64).atan() + (100.0f64).atan());
        assert!((v - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn composite_oscillatory() {
        let rule = gauss_legendre(8).unwrap();
        let v = composite_complex(0.0, 10.0, 200, &rule, |x| C64::from_polar(1.0, 3.0 * x));
        let exact = (C64::from_polar(1.0, 30.0) - 1.0) / C64::new(0.0, 3.0);
        assert!((v - exact).norm() < 1e-13);
    }
}
