//! The per-index quantities `u_k` whose nonnegativity bounds `H''(t)` from above.

use serde::{Deserialize, Serialize};

use crate::calculus::{path_state, AffinePath, LeaveOuts, PathDerivatives};
use crate::error::{Error, Result};
use crate::pmf::{compute_pmf, xlogx, ParamVector, Pmf};

use super::margin::{MarginReport, Tolerance};

/// Which route establishes `u_k >= 0` at an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UkBranch {
    /// `h_k <= 0`: log-concavity and AM-GM suffice.
    HNonpositive,
    /// `h_k > 0` with `g_k, g_{k+1} != 0`: the `A/B/C`, `α/β/γ` substitution applies.
    Transform,
    /// `h_k > 0` but `g_k = 0` or `g_{k+1} = 0`; the substitution divides by zero.
    BranchDegenerate,
}

/// Transform-branch quantities at one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `αU(1-A) - 2βU(1-B) + γU(1-C) + (αA - 2βB + γC)`, a lower bound for `u_k`.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UkEntry {
    pub k: usize,
    pub u: f64,
    pub h: f64,
    pub branch: UkBranch,
    pub transform: Option<TransformTerms>,
    /// Largest absolute term of `u_k`; sets the tolerance scale.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UkDecomposition {
    pub entries: Vec<UkEntry>,
}

impl UkDecomposition {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.u).sum()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.u).collect()
    }

    /// `u_k >= 0`.
    pub fn check_nonnegative(&self) -> MarginReport {
        let terms: Vec<_> = self.entries.iter().map(|e| (e.k as i64, e.u, e.scale)).collect();
        MarginReport::from_terms("uk_nonnegative", &terms, Tolerance::DEFAULT)
    }

    /// `u_k - lower_bound >= 0` on transform indices, at the fixed tolerance `1e-10`.
    pub fn check_transform(&self) -> MarginReport {
        let margins = self
            .entries
            .iter()
            .filter_map(|e| e.transform.map(|t| (e.k as i64, e.u - t.lower_bound)))
            .collect();
        MarginReport::with_tolerance("uk_transform", margins, 1e-10)
    }

    /// `A_k C_k - B_k² >= 0`; `A_k, C_k >= 0` at indices `3k+1`, `3k+2`.
    pub fn check_abc(&self) -> MarginReport {
        let mut terms = Vec::new();
        for e in &self.entries {
            if let Some(t) = e.transform {
                let k = 3 * e.k as i64;
                terms.push((k, t.a * t.c - t.b * t.b, (t.a * t.c).abs().max(t.b * t.b)));
                terms.push((k + 1, t.a, 1.0));
                terms.push((k + 2, t.c, 1.0));
            }
        }
        MarginReport::from_terms("uk_abc", &terms, Tolerance::DEFAULT)
    }

    /// `α_k γ_k - β_k² >= 0`.
    pub fn check_alpha_beta_gamma(&self) -> MarginReport {
        let terms: Vec<_> = self
            .entries
            .iter()
            .filter_map(|e| {
                e.transform.map(|t| {
                    let ag = t.alpha * t.gamma;
                    (e.k as i64, ag - t.beta * t.beta, ag.max(t.beta * t.beta))
                })
            })
            .collect();
        MarginReport::from_terms("uk_alpha_beta_gamma", &terms, Tolerance::DEFAULT)
    }
}

pub(crate) fn uk_from(f: &Pmf, d: &PathDerivatives) -> Result<UkDecomposition> {
    for (k, &fk) in f.as_slice().iter().enumerate() {
        if !(fk > 0.0) {
            return Err(Error::BoundaryDegeneracy { k });
        }
    }
    let entries = (0..d.h.len())
        .map(|k| {
            let ki = k as isize;
            let (f0, f1, f2) = (f.get(ki), f.get(ki + 1), f.get(ki + 2));
            let (g0, g1, h) = (d.g_at(ki), d.g_at(ki + 1), d.h_at(ki));
            let log_ratio = f0.ln() + f2.ln() - 2.0 * f1.ln();
            let quad = [g0 * g0 / f0, 2.0 * g0 * g1 / f1, g1 * g1 / f2];
            let log_term = h * log_ratio;
            let u = log_term + quad[0] - quad[1] + quad[2];
            let scale = [log_term, quad[0], quad[1], quad[2]].iter().fold(0.0f64, |m, x| m.max(x.abs()));

            let (branch, transform) = if h <= 0.0 {
                (UkBranch::HNonpositive, None)
            } else if g0 == 0.0 || g1 == 0.0 {
                (UkBranch::BranchDegenerate, None)
            } else {
                let (g0sq, g1sq, gg) = (g0 * g0, g1 * g1, g0.abs() * g1.abs());
                let a = (g0sq - f0 * h) / g0sq;
                let b = (gg - f1 * h) / gg;
                let c = (g1sq - f2 * h) / g1sq;
                let (alpha, beta, gamma) = (g0sq / f0, gg / f1, g1sq / f2);
                let lower_bound = alpha * xlogx(1.0 - a) - 2.0 * beta * xlogx(1.0 - b)
                    + gamma * xlogx(1.0 - c)
                    + (alpha * a - 2.0 * beta * b + gamma * c);
                (
                    UkBranch::Transform,
                    Some(TransformTerms { a, b, c, alpha, beta, gamma, lower_bound }),
                )
            };
            UkEntry { k, u, h, branch, transform, scale }
        })
        .collect();
    Ok(UkDecomposition { entries })
}

/// `u_k = h_k ln(f_k f_{k+2} / f_{k+1}²) + g_k²/f_k - 2g_kg_{k+1}/f_{k+1} + g_{k+1}²/f_{k+2}`
/// for `k = 0..=n-2`, with the transform-branch quantities where they are defined.
pub fn compute_uk(params: &ParamVector, slopes: &[f64]) -> Result<UkDecomposition> {
    let n = params.len();
    if slopes.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: slopes.len() });
    }
    if n < 2 {
        return Err(Error::UnsupportedSize { what: "u_k", requirement: ">= 2", n });
    }
    let f = compute_pmf(params);
    uk_from(&f, &LeaveOuts::new(params).derivatives(slopes))
}

/// Exact `H''(t)` split into `-Σ u_k` and the two boundary terms dropped by the relabelling:
/// `H'' = -Σ_k u_k - g_{n-1}²/f_{n-1} - g_0²/f_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkBound {
    pub second_derivative: f64,
    pub neg_sum_u: f64,
    pub dropped: f64,
}

pub fn entropy_uk_bound(path: &AffinePath, t: f64) -> Result<UkBound> {
    let (f, d) = path_state(path, t)?;
    let second = crate::calculus::shannon_second_from_parts(
        &f,
        &d.first_pmf_derivative(),
        &d.second_pmf_derivative(),
    )?;
    let n = d.g.len() as isize;
    let u = uk_from(&f, &d)?;
    let dropped = d.g_at(n - 1).powi(2) / f.get(n - 1) + d.g_at(0).powi(2) / f.get(1);
    Ok(UkBound { second_derivative: second, neg_sum_u: -u.sum(), dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pv(p: &[f64]) -> ParamVector {
        ParamVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_monotone_instance() {
        let u = compute_uk(&pv(&[0.5, 0.5]), &[1.0, 1.0]).unwrap();
        let e = &u.entries[0];
        assert_abs_diff_eq!(e.u, 2.0 * 0.25f64.ln() + 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.u, 1.22741, epsilon = 1e-5);
        assert_eq!(e.branch, UkBranch::Transform);
        let t = e.transform.unwrap();
        assert_abs_diff_eq!(t.a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.b, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.c, 0.5, epsilon = 1e-15);
        assert!(t.b * t.b <= t.a * t.c);
        for r in [u.check_nonnegative(), u.check_transform(), u.check_abc(), u.check_alpha_beta_gamma()] {
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn mixed_sign_instance_takes_h_nonpositive_branch() {
        let u = compute_uk(&pv(&[0.5, 0.5]), &[1.0, -1.0]).unwrap();
        let e = &u.entries[0];
        assert_eq!(e.branch, UkBranch::HNonpositive);
        assert_abs_diff_eq!(e.u, -2.0 * 0.25f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.u, 2.7726, epsilon = 1e-4);
        assert!(e.transform.is_none());
    }

    #[test]
    fn zero_g_with_positive_h_is_branch_degenerate() {
        let f = compute_pmf(&pv(&[0.5, 0.5]));
        let d = PathDerivatives { g: vec![0.0, 1.0], h: vec![0.5] };
        let u = uk_from(&f, &d).unwrap();
        assert_eq!(u.entries[0].branch, UkBranch::BranchDegenerate);
        assert!(u.check_transform().margins.is_empty());
    }

    #[test]
    fn boundary_mass_is_rejected() {
        assert!(matches!(compute_uk(&pv(&[0.0, 0.5]), &[1.0, 1.0]), Err(Error::BoundaryDegeneracy { .. })));
        assert!(compute_uk(&pv(&[0.5]), &[1.0]).is_err());
    }

    #[test]
    fn exact_decomposition_of_second_derivative() {
        let path = AffinePath::maximal(pv(&[0.31, 0.62, 0.18, 0.77]), vec![0.5, -1.0, 0.9, 0.2], 0.0).unwrap();
        let b = entropy_uk_bound(&path, 0.0).unwrap();
        assert_abs_diff_eq!(b.second_derivative, b.neg_sum_u - b.dropped, epsilon = 1e-12);
        assert!(b.dropped >= 0.0);
        assert!(b.second_derivative <= b.neg_sum_u);

        let single = AffinePath::maximal(pv(&[0.5]), vec![1.0], 0.0).unwrap();
        let b = entropy_uk_bound(&single, 0.0).unwrap();
        assert_eq!(b.neg_sum_u, 0.0);
        assert_abs_diff_eq!(b.second_derivative, -b.dropped, epsilon = 1e-14);
    }
}
