//! Affine parameter paths and derivatives of the mass function and entropy along them.
//!
//! Along `p(t) = p0 + t p'` the masses satisfy
//! `f_k' = g_{k-1} - g_k` and `f_k'' = h_k - 2 h_{k-1} + h_{k-2}` where
//! `g_k = Σ_i p_i' f^(i)_k` and `h_k = Σ_{i != j} p_i' p_j' f^(i,j)_k` (ordered pairs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::pmf::{compute_pmf, leave_one_out, leave_two_out, ParamVector, Pmf};

/// Snap window for `p0 + t p'` landing a hair outside `[0, 1]` through rounding.
const ROUNDING_SLACK: f64 = 4.0 * f64::EPSILON;

/// `p(t) = p0 + t · slopes` on a closed domain where every coordinate stays in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePath {
    p0: ParamVector,
    slopes: Vec<f64>,
    t_domain: (f64, f64),
}

impl AffinePath {
    pub fn new(p0: ParamVector, slopes: Vec<f64>, t_domain: (f64, f64)) -> Result<Self> {
        if slopes.len() != p0.len() {
            return Err(Error::DimensionMismatch { expected: p0.len(), got: slopes.len() });
        }
        if slopes.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("path slopes"));
        }
        let (lo, hi) = t_domain;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidPath(format!("empty or non-finite domain [{lo}, {hi}]")));
        }
        // Affine coordinates: checking both endpoints covers the whole interval.
        for t in [lo, hi] {
            for (i, (&p, &s)) in p0.as_slice().iter().zip(&slopes).enumerate() {
                let v = p + t * s;
                if !(-ROUNDING_SLACK..=1.0 + ROUNDING_SLACK).contains(&v) {
                    return Err(Error::InvalidPath(format!(
                        "coordinate {i} reaches {v} at t = {t}"
                    )));
                }
            }
        }
        Ok(Self { p0, slopes, t_domain })
    }

    /// The largest domain keeping every coordinate in `[margin, 1 - margin]`.
    ///
    /// `p0` itself must satisfy the band. With all slopes zero the domain is `[-1, 1]`.
    pub fn maximal(p0: ParamVector, slopes: Vec<f64>, margin: f64) -> Result<Self> {
        if slopes.len() != p0.len() {
            return Err(Error::DimensionMismatch { expected: p0.len(), got: slopes.len() });
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (&p, &s) in p0.as_slice().iter().zip(&slopes) {
            if p < margin || p > 1.0 - margin {
                return Err(Error::InvalidPath(format!("p0 = {p} outside [{margin}, 1 - {margin}]")));
            }
            if s > 0.0 {
                lo = lo.max((margin - p) / s);
                hi = hi.min((1.0 - margin - p) / s);
            } else if s < 0.0 {
                lo = lo.max((1.0 - margin - p) / s);
                hi = hi.min((margin - p) / s);
            }
        }
        if lo == f64::NEG_INFINITY {
            lo = -1.0;
        }
        if hi == f64::INFINITY {
            hi = 1.0;
        }
        Self::new(p0, slopes, (lo.min(0.0), hi.max(0.0)))
    }

    pub fn p0(&self) -> &ParamVector {
        &self.p0
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn t_domain(&self) -> (f64, f64) {
        self.t_domain
    }

    pub fn n(&self) -> usize {
        self.p0.len()
    }

    /// Whether `[t - radius, t + radius]` fits inside the domain.
    pub fn has_room(&self, t: f64, radius: f64) -> bool {
        t - radius >= self.t_domain.0 && t + radius <= self.t_domain.1
    }

    /// `p0 + t · slopes`.
    pub fn at(&self, t: f64) -> Result<ParamVector> {
        let (lo, hi) = self.t_domain;
        if !(t >= lo && t <= hi) {
            return Err(Error::OutsideDomain { t, lo, hi });
        }
        let p = self
            .p0
            .as_slice()
            .iter()
            .zip(&self.slopes)
            .map(|(&p, &s)| {
                let v = p + t * s;
                if (-ROUNDING_SLACK..0.0).contains(&v) {
                    0.0
                } else if v > 1.0 && v <= 1.0 + ROUNDING_SLACK {
                    1.0
                } else {
                    v
                }
            })
            .collect();
        ParamVector::new(p)
    }
}

/// See [`AffinePath::at`].
pub fn path_at(path: &AffinePath, t: f64) -> Result<ParamVector> {
    path.at(t)
}

/// The sequences `g` (length `n`) and `h` (length `n - 1`) at a point of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDerivatives {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl PathDerivatives {
    /// `g_k`, zero outside `0..n`.
    pub fn g_at(&self, k: isize) -> f64 {
        seq_get(&self.g, k)
    }

    /// `h_k`, zero outside `0..n-1`.
    pub fn h_at(&self, k: isize) -> f64 {
        seq_get(&self.h, k)
    }

    /// `f_k' = g_{k-1} - g_k` for `k = 0..=n`.
    pub fn first_pmf_derivative(&self) -> Vec<f64> {
        let n = self.g.len() as isize;
        (0..=n).map(|k| self.g_at(k - 1) - self.g_at(k)).collect()
    }

    /// `f_k'' = h_k - 2 h_{k-1} + h_{k-2}` for `k = 0..=n`.
    pub fn second_pmf_derivative(&self) -> Vec<f64> {
        let n = self.g.len() as isize;
        (0..=n)
            .map(|k| self.h_at(k) - 2.0 * self.h_at(k - 1) + self.h_at(k - 2))
            .collect()
    }
}

#[inline]
pub(crate) fn seq_get(v: &[f64], k: isize) -> f64 {
    if k < 0 {
        0.0
    } else {
        v.get(k as usize).copied().unwrap_or(0.0)
    }
}

/// All leave-one-out and leave-two-out mass functions of a parameter vector.
#[derive(Debug, Clone)]
pub struct LeaveOuts {
    pub one: Vec<Pmf>,
    /// Upper triangle: `two[i][j - i - 1]` holds `f^(i,j)` for `i < j`.
    two: Vec<Vec<Pmf>>,
}

impl LeaveOuts {
    pub fn new(params: &ParamVector) -> Self {
        let n = params.len();
        let one = (0..n).map(|i| leave_one_out(params, i).expect("index in range")).collect();
        let two = (0..n)
            .map(|i| {
                (i + 1..n)
                    .map(|j| leave_two_out(params, i, j).expect("distinct indices"))
                    .collect()
            })
            .collect();
        Self { one, two }
    }

    /// `f^(i,j)` for `i != j`.
    pub fn pair(&self, i: usize, j: usize) -> &Pmf {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        &self.two[a][b - a - 1]
    }

    pub fn derivatives(&self, slopes: &[f64]) -> PathDerivatives {
        let n = self.one.len();
        let mut g = vec![0.0; n];
        for (fi, &s) in self.one.iter().zip(slopes) {
            if s == 0.0 {
                continue;
            }
            for (gk, &f) in g.iter_mut().zip(fi.as_slice()) {
                *gk += s * f;
            }
        }
        let mut h = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            for j in i + 1..n {
                // (i, j) and (j, i) both appear in the ordered sum
                let w = 2.0 * slopes[i] * slopes[j];
                if w == 0.0 {
                    continue;
                }
                for (hk, &f) in h.iter_mut().zip(self.pair(i, j).as_slice()) {
                    *hk += w * f;
                }
            }
        }
        PathDerivatives { g, h }
    }
}

fn check_slopes(params: &ParamVector, slopes: &[f64]) -> Result<()> {
    if slopes.len() != params.len() {
        return Err(Error::DimensionMismatch { expected: params.len(), got: slopes.len() });
    }
    Ok(())
}

/// `g` and `h` together, sharing the leave-out computations.
pub fn compute_path_derivatives(params: &ParamVector, slopes: &[f64]) -> Result<PathDerivatives> {
    check_slopes(params, slopes)?;
    Ok(LeaveOuts::new(params).derivatives(slopes))
}

/// `g_k = Σ_i p_i' f^(i)_k`, length `n`.
pub fn compute_g(params: &ParamVector, slopes: &[f64]) -> Result<Vec<f64>> {
    check_slopes(params, slopes)?;
    let mut g = vec![0.0; params.len()];
    for (i, &s) in slopes.iter().enumerate() {
        let fi = leave_one_out(params, i)?;
        for (gk, &f) in g.iter_mut().zip(fi.as_slice()) {
            *gk += s * f;
        }
    }
    Ok(g)
}

/// `h_k = Σ_{i != j} p_i' p_j' f^(i,j)_k` over ordered pairs, length `n - 1` (empty for `n = 1`).
pub fn compute_h(params: &ParamVector, slopes: &[f64]) -> Result<Vec<f64>> {
    check_slopes(params, slopes)?;
    let n = params.len();
    let mut h = vec![0.0; n.saturating_sub(1)];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let fij = leave_two_out(params, i, j)?;
            let w = slopes[i] * slopes[j];
            for (hk, &f) in h.iter_mut().zip(fij.as_slice()) {
                *hk += w * f;
            }
        }
    }
    Ok(h)
}

/// Mass function, `g` and `h` at `p(t)`.
pub fn path_state(path: &AffinePath, t: f64) -> Result<(Pmf, PathDerivatives)> {
    let p = path.at(t)?;
    let f = compute_pmf(&p);
    let d = LeaveOuts::new(&p).derivatives(path.slopes());
    Ok((f, d))
}

/// `d f_k / dt` for `k = 0..=n`.
pub fn pmf_time_derivative(path: &AffinePath, t: f64) -> Result<Vec<f64>> {
    let (_, d) = path_state(path, t)?;
    Ok(d.first_pmf_derivative())
}

/// `d² f_k / dt²` for `k = 0..=n`.
pub fn pmf_second_time_derivative(path: &AffinePath, t: f64) -> Result<Vec<f64>> {
    let (_, d) = path_state(path, t)?;
    Ok(d.second_pmf_derivative())
}

/// Shannon entropy of `p(t)` in nats.
pub fn path_entropy(path: &AffinePath, t: f64) -> Result<f64> {
    Ok(compute_pmf(&path.at(t)?).shannon_entropy())
}

/// `H''` from mass function derivatives, restricted to the support.
pub(crate) fn shannon_second_from_parts(f: &Pmf, df: &[f64], d2f: &[f64]) -> Result<f64> {
    shannon_second_with_scale(f, df, d2f).map(|r| r.0)
}

/// `H''` and the sum of absolute values of its terms.
pub(crate) fn shannon_second_with_scale(f: &Pmf, df: &[f64], d2f: &[f64]) -> Result<(f64, f64)> {
    let (mut acc, mut scale) = (0.0, 0.0);
    for (k, ((&fk, &d1), &d2)) in f.as_slice().iter().zip(df).zip(d2f).enumerate() {
        if fk > 0.0 {
            // U''(x) = 1/x, U'(x) = ln x + 1
            let (a, b) = (d1 * d1 / fk, (fk.ln() + 1.0) * d2);
            acc += a + b;
            scale += a.abs() + b.abs();
        } else if d1 != 0.0 || d2 != 0.0 {
            return Err(Error::BoundaryDegeneracy { k });
        }
    }
    Ok((-acc, scale))
}

/// `H''(t) = -Σ U''(f_k)(g_{k-1} - g_k)² - Σ U'(f_k)(h_k - 2h_{k-1} + h_{k-2})`, `U = x ln x`.
pub fn entropy_second_derivative_analytic(path: &AffinePath, t: f64) -> Result<f64> {
    let (f, d) = path_state(path, t)?;
    shannon_second_from_parts(&f, &d.first_pmf_derivative(), &d.second_pmf_derivative())
}

/// Hessian of `H` over the parameter cube and its largest eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    /// Row-major `n × n`.
    pub matrix: Vec<Vec<f64>>,
    pub max_eigenvalue: f64,
    pub psd_margin: f64,
}

impl HessianReport {
    /// `sᵀ M s`.
    pub fn quadratic_form(&self, s: &[f64]) -> f64 {
        self.matrix
            .iter()
            .zip(s)
            .map(|(row, &si)| si * row.iter().zip(s).map(|(m, sj)| m * sj).sum::<f64>())
            .sum()
    }
}

/// `∂²H/∂p_i∂p_j` at a strictly interior point.
///
/// Uses `∂f_k/∂p_i = f^(i)_{k-1} - f^(i)_k`, `∂²f_k/∂p_i∂p_j = f^(i,j)_{k-2} - 2f^(i,j)_{k-1} + f^(i,j)_k`
/// for `i != j`, and `∂²f_k/∂p_i² = 0`.
pub fn entropy_hessian(params: &ParamVector) -> Result<HessianReport> {
    params.require_interior(0.0)?;
    let n = params.len();
    let f = compute_pmf(params);
    let lo = LeaveOuts::new(params);
    let u1: Vec<f64> = f.as_slice().iter().map(|&x| x.ln() + 1.0).collect();
    let grads: Vec<Vec<f64>> = lo
        .one
        .iter()
        .map(|fi| (0..=n as isize).map(|k| fi.get(k - 1) - fi.get(k)).collect())
        .collect();

    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..=n {
                acc += grads[i][k] * grads[j][k] / f.as_slice()[k];
            }
            if i != j {
                let fij = lo.pair(i, j);
                for (k, &u) in u1.iter().enumerate() {
                    let k = k as isize;
                    acc += u * (fij.get(k - 2) - 2.0 * fij.get(k - 1) + fij.get(k));
                }
            }
            matrix[i][j] = -acc;
            matrix[j][i] = -acc;
        }
    }
    let max_eigenvalue = *symmetric_eigenvalues(&matrix).last().expect("n >= 1");
    Ok(HessianReport { matrix, max_eigenvalue, psd_margin: -max_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn pv(p: &[f64]) -> ParamVector {
        ParamVector::new(p.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    #[test]
    fn path_evaluation() {
        let path = AffinePath::new(pv(&[0.2, 0.8]), vec![1.0, -1.0], (0.0, 0.2)).unwrap();
        close(path.at(0.1).unwrap().as_slice(), &[0.3, 0.7], 1e-15);
        assert_eq!(path.at(0.0).unwrap(), pv(&[0.2, 0.8]));
        assert!(matches!(path.at(0.25), Err(Error::OutsideDomain { .. })));

        let up = AffinePath::new(pv(&[0.0, 0.0]), vec![1.0, 1.0], (0.0, 1.0)).unwrap();
        assert_eq!(up.at(1.0).unwrap().as_slice(), &[1.0, 1.0]);
        assert!(AffinePath::new(pv(&[0.5]), vec![1.0], (0.0, 0.6)).is_err());
        assert!(AffinePath::new(pv(&[0.5]), vec![1.0, 2.0], (0.0, 0.1)).is_err());
    }

    #[test]
    fn maximal_domain() {
        let path = AffinePath::maximal(pv(&[0.2, 0.6]), vec![1.0, -0.5], 0.0).unwrap();
        let (lo, hi) = path.t_domain();
        assert_relative_eq!(lo, -0.2, epsilon = 1e-15);
        assert_relative_eq!(hi, 0.8, epsilon = 1e-15);
        let flat = AffinePath::maximal(pv(&[0.3]), vec![0.0], 0.1).unwrap();
        assert_eq!(flat.t_domain(), (-1.0, 1.0));
    }

    #[test]
    fn g_examples() {
        close(&compute_g(&pv(&[0.3, 0.5]), &[1.0, 1.0]).unwrap(), &[1.2, 0.8], 1e-15);
        close(&compute_g(&pv(&[0.3, 0.5, 0.9]), &[0.0; 3]).unwrap(), &[0.0; 3], 0.0);
        close(&compute_g(&pv(&[0.5, 0.5]), &[1.0, 1.0]).unwrap(), &[1.0, 1.0], 0.0);
        assert!(compute_g(&pv(&[0.5]), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn h_examples() {
        close(&compute_h(&pv(&[0.3, 0.5]), &[1.0, 1.0]).unwrap(), &[2.0], 0.0);
        close(&compute_h(&pv(&[0.1, 0.7, 0.4]), &[1.0, 0.0, 0.0]).unwrap(), &[0.0, 0.0], 0.0);
        close(&compute_h(&pv(&[0.5, 0.5]), &[1.0, -1.0]).unwrap(), &[-2.0], 0.0);
        assert!(compute_h(&pv(&[0.5]), &[1.0]).unwrap().is_empty());
    }

    #[test]
    fn shared_leave_outs_agree_with_direct_sums() {
        let p = pv(&[0.13, 0.71, 0.42, 0.9]);
        let s = [0.3, -1.0, 0.25, 0.8];
        let d = compute_path_derivatives(&p, &s).unwrap();
        close(&d.g, &compute_g(&p, &s).unwrap(), 1e-15);
        close(&d.h, &compute_h(&p, &s).unwrap(), 1e-15);
    }

    #[test]
    fn pmf_derivative_examples() {
        let path = AffinePath::maximal(pv(&[0.3, 0.5]), vec![1.0, 1.0], 0.0).unwrap();
        let d1 = pmf_time_derivative(&path, 0.0).unwrap();
        // f_0 = (0.7 - t)(0.5 - t): derivative at 0 is -1.2
        assert_abs_diff_eq!(d1[0], -1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d1.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        close(&pmf_second_time_derivative(&path, 0.0).unwrap(), &[2.0, -4.0, 2.0], 0.0);

        let flat = AffinePath::maximal(pv(&[0.3, 0.5]), vec![0.0, 0.0], 0.0).unwrap();
        close(&pmf_time_derivative(&flat, 0.0).unwrap(), &[0.0; 3], 0.0);
        let single = AffinePath::maximal(pv(&[0.3]), vec![1.0], 0.0).unwrap();
        close(&pmf_second_time_derivative(&single, 0.0).unwrap(), &[0.0; 2], 0.0);
    }

    #[test]
    fn entropy_second_derivative_examples() {
        let one = AffinePath::maximal(pv(&[0.5]), vec![1.0], 0.0).unwrap();
        assert_abs_diff_eq!(entropy_second_derivative_analytic(&one, 0.0).unwrap(), -4.0, epsilon = 1e-14);

        let flat = AffinePath::maximal(pv(&[0.2, 0.7]), vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(entropy_second_derivative_analytic(&flat, 0.0).unwrap(), 0.0);

        let binom = AffinePath::new(pv(&[0.0, 0.0]), vec![1.0, 1.0], (0.0, 1.0)).unwrap();
        let analytic = entropy_second_derivative_analytic(&binom, 0.5).unwrap();
        let numeric = fd::central_second(|t| path_entropy(&binom, t).unwrap(), 0.5, fd::SECOND_STEP);
        assert!(analytic < 0.0);
        assert_abs_diff_eq!(analytic, numeric, epsilon = 1e-6);
    }

    #[test]
    fn boundary_degeneracy_is_reported() {
        // p = 0 moving inward: f_2 = 0 but f_2' = 0, f_2'' = 2·p_0'p_1' != 0
        let path = AffinePath::new(pv(&[0.0, 0.0]), vec![1.0, 1.0], (0.0, 1.0)).unwrap();
        assert!(matches!(
            entropy_second_derivative_analytic(&path, 0.0),
            Err(Error::BoundaryDegeneracy { .. })
        ));
        // a frozen deterministic component is fine
        let frozen = AffinePath::new(pv(&[1.0, 0.4]), vec![0.0, 1.0], (-0.4, 0.6)).unwrap();
        let v = entropy_second_derivative_analytic(&frozen, 0.0).unwrap();
        assert_abs_diff_eq!(v, -1.0 / 0.4 - 1.0 / 0.6, epsilon = 1e-13);
    }

    #[test]
    fn hessian_examples() {
        let h = entropy_hessian(&pv(&[0.5])).unwrap();
        assert_abs_diff_eq!(h.matrix[0][0], -4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h.psd_margin, 4.0, epsilon = 1e-14);

        let p = [0.5, 0.5];
        let h = entropy_hessian(&pv(&p)).unwrap();
        assert_eq!(h.matrix[0][1], h.matrix[1][0]);
        assert!(h.max_eigenvalue <= 0.0);
        // finite-difference Hessian of H(p)
        let hh = 1e-4;
        let entropy = |x: f64, y: f64| compute_pmf(&pv(&[x, y])).shannon_entropy();
        let dxx = (entropy(0.5 + hh, 0.5) - 2.0 * entropy(0.5, 0.5) + entropy(0.5 - hh, 0.5)) / (hh * hh);
        let dxy = (entropy(0.5 + hh, 0.5 + hh) - entropy(0.5 + hh, 0.5 - hh) - entropy(0.5 - hh, 0.5 + hh)
            + entropy(0.5 - hh, 0.5 - hh))
            / (4.0 * hh * hh);
        assert_abs_diff_eq!(h.matrix[0][0], dxx, epsilon = 1e-6);
        assert_abs_diff_eq!(h.matrix[0][1], dxy, epsilon = 1e-6);

        assert!(matches!(entropy_hessian(&pv(&[0.5, 1.0])), Err(Error::NotInterior { .. })));
    }

    #[test]
    fn hessian_quadratic_form_is_the_path_second_derivative() {
        let p = pv(&[0.21, 0.66, 0.35]);
        let s = vec![0.4, -1.0, 0.7];
        let hess = entropy_hessian(&p).unwrap();
        let path = AffinePath::maximal(p, s.clone(), 0.0).unwrap();
        let along = entropy_second_derivative_analytic(&path, 0.0).unwrap();
        assert_relative_eq!(hess.quadratic_form(&s), along, max_relative = 1e-12);
    }
}
