//! Log-concavity and its refinements for mass functions, plus the first-order
//! conditions tying `f`, `g` and `h` together.

use crate::calculus::{LeaveOuts, PathDerivatives};
use crate::error::{Error, Result};
use crate::pmf::{compute_pmf, ParamVector, Pmf};

use super::margin::{MarginReport, Tolerance};

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `f_{k+1}² - f_k f_{k+2}` for `k = 0..=m-2`.
pub fn check_log_concavity(f: &Pmf) -> MarginReport {
    let m = f.max_index() as i64;
    let terms: Vec<_> = (0..=m - 2)
        .map(|k| {
            let k_ = k as isize;
            let sq = f.get(k_ + 1).powi(2);
            let cross = f.get(k_) * f.get(k_ + 2);
            (k, sq - cross, sq.max(cross))
        })
        .collect();
    MarginReport::from_terms("log_concavity", &terms, Tolerance::DEFAULT)
}

/// `D_k = π_k² - π_{k-1}π_{k+1}`.
pub fn log_concavity_defect(f: &Pmf, k: isize) -> f64 {
    f.get(k).powi(2) - f.get(k - 1) * f.get(k + 1)
}

/// The cubic `π_{k-2}π_{k+1}² + π_k³ + π_{k-1}²π_{k+2} - π_{k-2}π_kπ_{k+2} - 2π_{k-1}π_kπ_{k+1}`
/// and the largest absolute monomial in it.
pub fn two_fold_cubic(f: &Pmf, k: isize) -> (f64, f64) {
    let (a, b, c, d, e) = (f.get(k - 2), f.get(k - 1), f.get(k), f.get(k + 1), f.get(k + 2));
    let monos = [a * d * d, c * c * c, b * b * e, a * c * e, 2.0 * b * c * d];
    let value = monos[0] + monos[1] + monos[2] - monos[3] - monos[4];
    (value, max_abs(&monos))
}

/// 2-fold log-concavity: the cubic margin for `k = 0..=m+1`.
pub fn check_two_fold_log_concavity(f: &Pmf) -> MarginReport {
    let m = f.max_index() as i64;
    let terms: Vec<_> = (0..=m + 1)
        .map(|k| {
            let (v, s) = two_fold_cubic(f, k as isize);
            (k, v, s)
        })
        .collect();
    MarginReport::from_terms("two_fold_log_concavity", &terms, Tolerance::DEFAULT)
}

/// `D_k² - D_{k-1}D_{k+1}` for `k = 0..=m+1`.
pub fn two_fold_d_form(f: &Pmf) -> Vec<(i64, f64)> {
    let m = f.max_index() as i64;
    (0..=m + 1)
        .map(|k| {
            let k_ = k as isize;
            let d = |j| log_concavity_defect(f, j);
            (k, d(k_).powi(2) - d(k_ - 1) * d(k_ + 1))
        })
        .collect()
}

/// Agreement of the two forms: `D_k² - D_{k-1}D_{k+1} = π_k · cubic_k`.
///
/// Margins are `-|difference|`; the tolerance is `1e-12` relative to the largest quartic monomial.
pub fn check_two_fold_forms(f: &Pmf) -> MarginReport {
    let tol = Tolerance { abs_floor: 1e-300, rel: 1e-12 };
    let terms: Vec<_> = two_fold_d_form(f)
        .into_iter()
        .map(|(k, d_form)| {
            let k_ = k as isize;
            let (cubic, cubic_scale) = two_fold_cubic(f, k_);
            let pk = f.get(k_);
            let d_scale = [k_ - 1, k_, k_ + 1]
                .iter()
                .map(|&j| f.get(j).powi(2).max(f.get(j - 1) * f.get(j + 1)))
                .fold(0.0, f64::max)
                .powi(2);
            (k, -(d_form - pk * cubic).abs(), d_scale.max(pk * cubic_scale))
        })
        .collect();
    MarginReport::from_terms("two_fold_forms", &terms, tol)
}

fn c1_parts(f: &Pmf, k: isize) -> (f64, f64, f64) {
    // π_{k-1}(π_k² - π_{k-1}π_{k+1}) ≥ (π_{k-1}² - π_{k-2}π_k)π_{k+1}
    let rhs = f.get(k - 1) * log_concavity_defect(f, k);
    let lhs = log_concavity_defect(f, k - 1) * f.get(k + 1);
    let scale = [
        f.get(k - 1) * f.get(k).powi(2),
        f.get(k - 1).powi(2) * f.get(k + 1),
        f.get(k - 2) * f.get(k) * f.get(k + 1),
    ];
    (rhs, lhs, max_abs(&scale))
}

fn c1bar_parts(f: &Pmf, k: isize) -> (f64, f64, f64) {
    // π_{k+1}(π_k² - π_{k-1}π_{k+1}) ≥ (π_{k+1}² - π_kπ_{k+2})π_{k-1}
    let rhs = f.get(k + 1) * log_concavity_defect(f, k);
    let lhs = log_concavity_defect(f, k + 1) * f.get(k - 1);
    let scale = [
        f.get(k + 1) * f.get(k).powi(2),
        f.get(k + 1).powi(2) * f.get(k - 1),
        f.get(k) * f.get(k + 2) * f.get(k - 1),
    ];
    (rhs, lhs, max_abs(&scale))
}

fn support_window(f: &Pmf) -> std::ops::RangeInclusive<i64> {
    -2..=f.max_index() as i64 + 2
}

/// `C_1(k) = π_{k-1}(π_k² - π_{k-1}π_{k+1}) - (π_{k-1}² - π_{k-2}π_k)π_{k+1}`.
pub fn check_c1(f: &Pmf) -> MarginReport {
    let terms: Vec<_> = support_window(f)
        .map(|k| {
            let (r, l, s) = c1_parts(f, k as isize);
            (k, r - l, s)
        })
        .collect();
    MarginReport::from_terms("c1", &terms, Tolerance::DEFAULT)
}

/// Mirror image of [`check_c1`].
pub fn check_c1bar(f: &Pmf) -> MarginReport {
    let terms: Vec<_> = support_window(f)
        .map(|k| {
            let (r, l, s) = c1bar_parts(f, k as isize);
            (k, r - l, s)
        })
        .collect();
    MarginReport::from_terms("c1bar", &terms, Tolerance::DEFAULT)
}

/// Multiplying `C_1` and `C̄_1` side by side:
/// `rhs₁·rhs₂ - lhs₁·lhs₂ = π_{k-1}π_kπ_{k+1} · cubic_k`. Margins are `-|residual|`
/// with tolerance `1e-10` relative to the largest product involved.
pub fn check_c1_product_identity(f: &Pmf) -> MarginReport {
    let tol = Tolerance { abs_floor: 1e-300, rel: 1e-10 };
    let terms: Vec<_> = support_window(f)
        .map(|k| {
            let k_ = k as isize;
            let (r1, l1, s1) = c1_parts(f, k_);
            let (r2, l2, s2) = c1bar_parts(f, k_);
            let (cubic, cs) = two_fold_cubic(f, k_);
            let w = f.get(k_ - 1) * f.get(k_) * f.get(k_ + 1);
            let residual = (r1 * r2 - l1 * l2) - w * cubic;
            (k, -residual.abs(), (s1 * s2).max(w * cs))
        })
        .collect();
    MarginReport::from_terms("c1_product_identity", &terms, tol)
}

/// The Condition-4 gap
/// `Q_k = (2 g_k g_{k+1} f_{k+1} - g_k² f_{k+2} - g_{k+1}² f_k) - h_k (f_{k+1}² - f_k f_{k+2})`
/// together with its largest monomial.
pub fn condition4_gap(f: &Pmf, d: &PathDerivatives, k: isize) -> (f64, f64) {
    let (gk, gk1, hk) = (d.g_at(k), d.g_at(k + 1), d.h_at(k));
    let (f0, f1, f2) = (f.get(k), f.get(k + 1), f.get(k + 2));
    let monos = [
        2.0 * gk * gk1 * f1,
        gk * gk * f2,
        gk1 * gk1 * f0,
        hk * f1 * f1,
        hk * f0 * f2,
    ];
    let value = monos[0] - monos[1] - monos[2] - (monos[3] - monos[4]);
    (value, max_abs(&monos))
}

fn state(params: &ParamVector, slopes: &[f64], what: &'static str) -> Result<(Pmf, PathDerivatives)> {
    let n = params.len();
    if slopes.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: slopes.len() });
    }
    if n < 2 {
        return Err(Error::UnsupportedSize { what, requirement: ">= 2", n });
    }
    Ok((compute_pmf(params), LeaveOuts::new(params).derivatives(slopes)))
}

pub(crate) fn condition4_from(f: &Pmf, d: &PathDerivatives) -> MarginReport {
    let terms: Vec<_> = (0..d.h.len() as i64)
        .map(|k| {
            let (v, s) = condition4_gap(f, d, k as isize);
            (k, v, s)
        })
        .collect();
    MarginReport::from_terms("condition4", &terms, Tolerance::DEFAULT)
}

/// `h_k (f_{k+1}² - f_k f_{k+2}) ≤ 2 g_k g_{k+1} f_{k+1} - g_k² f_{k+2} - g_{k+1}² f_k`, `k = 0..=n-2`.
pub fn check_condition4(params: &ParamVector, slopes: &[f64]) -> Result<MarginReport> {
    let (f, d) = state(params, slopes, "condition 4")?;
    Ok(condition4_from(&f, &d))
}

pub(crate) fn corollary_from(f: &Pmf, d: &PathDerivatives) -> MarginReport {
    // index 2k: g_k² - h_k f_k; index 2k+1: g_{k+1}² - h_k f_{k+2}
    let mut terms = Vec::with_capacity(2 * d.h.len());
    for k in 0..d.h.len() as isize {
        let (gk, gk1, hk) = (d.g_at(k), d.g_at(k + 1), d.h_at(k));
        let (a, b) = (gk * gk, hk * f.get(k));
        terms.push((2 * k as i64, a - b, a.abs().max(b.abs())));
        let (a, b) = (gk1 * gk1, hk * f.get(k + 2));
        terms.push((2 * k as i64 + 1, a - b, a.abs().max(b.abs())));
    }
    MarginReport::from_terms("corollary_fgh", &terms, Tolerance::DEFAULT)
}

/// `h_k f_k ≤ g_k²` and `h_k f_{k+2} ≤ g_{k+1}²`.
///
/// Both families share one report: index `2k` carries the first, `2k + 1` the second.
pub fn check_corollary_fgh(params: &ParamVector, slopes: &[f64]) -> Result<MarginReport> {
    let (f, d) = state(params, slopes, "the f/g/h corollary")?;
    Ok(corollary_from(&f, &d))
}

/// `(2g_kg_{k+1}f_{k+1} - g_k²f_{k+2} - g_{k+1}²f_k) f_k - (f_{k+1}² - f_kf_{k+2}) g_k²
///  = -(f_{k+1}g_k - f_kg_{k+1})²`; margins are `-|residual|` at `1e-10` relative.
pub fn check_corollary_identity(params: &ParamVector, slopes: &[f64]) -> Result<MarginReport> {
    let (f, d) = state(params, slopes, "the corollary identity")?;
    let tol = Tolerance { abs_floor: 1e-300, rel: 1e-10 };
    let terms: Vec<_> = (0..d.h.len() as isize)
        .map(|k| {
            let (gk, gk1) = (d.g_at(k), d.g_at(k + 1));
            let (f0, f1, f2) = (f.get(k), f.get(k + 1), f.get(k + 2));
            let lhs = (2.0 * gk * gk1 * f1 - gk * gk * f2 - gk1 * gk1 * f0) * f0
                - (f1 * f1 - f0 * f2) * gk * gk;
            let rhs = -(f1 * gk - f0 * gk1).powi(2);
            let scale = max_abs(&[gk * gk1 * f1 * f0, gk * gk * f2 * f0, gk1 * gk1 * f0 * f0, f1 * f1 * gk * gk]);
            (k as i64, -(lhs - rhs).abs(), scale)
        })
        .collect();
    Ok(MarginReport::from_terms("corollary_identity", &terms, tol))
}
