//! The Condition-4 gap as a quadratic form in the slopes: the cross coefficients
//! `c_{i,j}`, the `n = 2` coefficient extraction, and the same-sign worst case.

use serde::{Deserialize, Serialize};

use crate::calculus::LeaveOuts;
use crate::error::{Error, Result};
use crate::pmf::{compute_pmf, leave_two_out, ParamVector};

use super::ladder::{condition4_gap, two_fold_cubic};
use super::margin::{MarginReport, Tolerance};

/// Largest `n` for which sign patterns are enumerated.
pub const SIGN_ENUMERATION_LIMIT: usize = 12;

/// `c_{i,j} = -(f_k)³ + 2f_{k-1}f_kf_{k+1} - f_{k+1}²f_{k-2} - f_{k-1}²f_{k+2} + f_{k-2}f_kf_{k+2}`
/// with `f = f^(i,j)`; the negated 2-fold margin of the leave-two-out law.
pub fn compute_cij(params: &ParamVector, i: usize, j: usize, k: isize) -> Result<f64> {
    let fij = leave_two_out(params, i, j)?;
    Ok(-two_fold_cubic(&fij, k).0)
}

/// `c_{i,j} <= 0` for every pair `i < j` and `k = 0..=n-2`.
///
/// Margins are `-c_{i,j}`, indexed by `pair · (n - 1) + k` with pairs in lexicographic order.
pub fn check_cij_nonpositive(params: &ParamVector) -> Result<MarginReport> {
    let n = params.len();
    if n < 2 {
        return Err(Error::UnsupportedSize { what: "c_ij", requirement: ">= 2", n });
    }
    let lo = LeaveOuts::new(params);
    let mut terms = Vec::new();
    let mut pair = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let fij = lo.pair(i, j);
            for k in 0..n as i64 - 1 {
                let (cubic, scale) = two_fold_cubic(fij, k as isize);
                terms.push((pair * (n as i64 - 1) + k, cubic, scale));
            }
            pair += 1;
        }
    }
    Ok(MarginReport::from_terms("cij_nonpositive", &terms, Tolerance::DEFAULT))
}

/// Coefficients recovered from the `n = 2` Condition-4 gap by probing slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticDecomposition {
    pub b_01: f64,
    pub b_10: f64,
    pub c_01: f64,
    /// `c_{0,1}` from [`compute_cij`].
    pub c_direct: f64,
    /// `b_{0,1} b_{1,0} - p_0(1-p_0)p_1(1-p_1)c²`.
    pub discriminant_margin: f64,
    /// Index 0: extraction agreement; 1, 2: the `b` lower bounds; 3: discriminant;
    /// 4: discriminant minus `¼c²(p_0 - p_1)²`.
    pub margins: MarginReport,
}

/// For `n = 2`, writes `Q(s) = s_0² p_1(1-p_1) b_{0,1} + s_1² p_0(1-p_0) b_{1,0}
/// + 2 s_0 s_1 p_0(1-p_0)p_1(1-p_1) c_{0,1}` and recovers the coefficients from
/// `Q(1,0)`, `Q(0,1)` and `Q(1,1)`.
pub fn check_quadratic_decomposition_n2(params: &ParamVector, k: usize) -> Result<QuadraticDecomposition> {
    let n = params.len();
    if n != 2 {
        return Err(Error::UnsupportedSize { what: "coefficient extraction", requirement: "= 2", n });
    }
    params.require_interior(0.0)?;
    let p = params.as_slice();
    let (w0, w1) = (p[0] * (1.0 - p[0]), p[1] * (1.0 - p[1]));
    let f = compute_pmf(params);
    let lo = LeaveOuts::new(params);
    let k = k as isize;
    let q = |s: [f64; 2]| condition4_gap(&f, &lo.derivatives(&s), k);
    let ((q10, s10), (q01, s01), (q11, s11)) = (q([1.0, 0.0]), q([0.0, 1.0]), q([1.0, 1.0]));

    let b_01 = q10 / w1;
    let b_10 = q01 / w0;
    let c_01 = (q11 - q10 - q01) / (2.0 * w0 * w1);
    let c_direct = compute_cij(params, 0, 1, k)?;

    let mix = p[0] * (1.0 - p[1]) + p[1] * (1.0 - p[0]);
    let disc = b_01 * b_10 - w0 * w1 * c_01 * c_01;
    let strengthened = 0.25 * c_01 * c_01 * (p[0] - p[1]).powi(2);
    let q_scale = s10.max(s01).max(s11);

    let rel = Tolerance { abs_floor: 1e-300, rel: 1e-10 };
    let agree = -(c_01 - c_direct).abs();
    let agree_tol = rel.for_scale(c_direct.abs().max(q_scale / (w0 * w1)));
    let tol = Tolerance { abs_floor: 1e-12, rel: 1e-10 };
    let b_tol = tol.for_scale(b_01.abs().max(b_10.abs()).max(mix * c_01.abs()));
    let d_tol = tol.for_scale((b_01 * b_10).abs().max(w0 * w1 * c_01 * c_01));
    let entries = [
        (0, agree, agree_tol),
        (1, b_01 + 0.5 * mix * c_01, b_tol),
        (2, b_10 + 0.5 * mix * c_01, b_tol),
        (3, disc, d_tol),
        (4, disc - strengthened, d_tol),
    ];
    let worst_tol = entries.iter().map(|e| e.2).fold(0.0, f64::max);
    let margins = entries.iter().map(|&(i, m, _)| (i, m)).collect();
    Ok(QuadraticDecomposition {
        b_01,
        b_10,
        c_01,
        c_direct,
        discriminant_margin: disc,
        margins: MarginReport::with_tolerance("quadratic_decomposition_n2", margins, worst_tol),
    })
}

/// For fixed `|p_i'|`, the Condition-4 gap is smallest when all slopes share a sign.
///
/// Margin at `k` is `min_σ Q_k(σ·|p'|) - Q_k(|p'|)` over all sign patterns `σ`.
pub fn check_monotone_worst_case(params: &ParamVector, abs_slopes: &[f64]) -> Result<MarginReport> {
    let n = params.len();
    if abs_slopes.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: abs_slopes.len() });
    }
    if n < 2 {
        return Err(Error::UnsupportedSize { what: "sign enumeration", requirement: ">= 2", n });
    }
    if n > SIGN_ENUMERATION_LIMIT {
        return Err(Error::TooLargeToEnumerate { n, limit: SIGN_ENUMERATION_LIMIT });
    }
    if let Some((index, &value)) = abs_slopes.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeMagnitude { index, value });
    }
    let f = compute_pmf(params);
    let lo = LeaveOuts::new(params);
    let kmax = n - 1;
    let base = lo.derivatives(abs_slopes);
    let base_q: Vec<(f64, f64)> = (0..kmax).map(|k| condition4_gap(&f, &base, k as isize)).collect();
    let mut min_q: Vec<f64> = base_q.iter().map(|q| q.0).collect();
    let mut scale: Vec<f64> = base_q.iter().map(|q| q.1).collect();

    // Q(s) = Q(-s): fixing σ_0 = +1 covers every pattern
    let mut slopes = abs_slopes.to_vec();
    for mask in 1u32..(1u32 << (n - 1)) {
        for (i, s) in slopes.iter_mut().enumerate().skip(1) {
            *s = if mask >> (i - 1) & 1 == 1 { -abs_slopes[i] } else { abs_slopes[i] };
        }
        let d = lo.derivatives(&slopes);
        for k in 0..kmax {
            let (v, s) = condition4_gap(&f, &d, k as isize);
            min_q[k] = min_q[k].min(v);
            scale[k] = scale[k].max(s);
        }
    }
    let terms: Vec<_> = (0..kmax)
        .map(|k| (k as i64, min_q[k] - base_q[k].0, scale[k]))
        .collect();
    Ok(MarginReport::from_terms(
        "monotone_worst_case",
        &terms,
        Tolerance { abs_floor: 1e-12, rel: 1e-10 },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pv(p: &[f64]) -> ParamVector {
        ParamVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn cij_examples() {
        assert_eq!(compute_cij(&pv(&[0.3, 0.5]), 0, 1, 0).unwrap(), -1.0);
        assert_eq!(compute_cij(&pv(&[0.3, 0.5, 0.8]), 0, 1, 9).unwrap(), 0.0);
        assert_abs_diff_eq!(compute_cij(&pv(&[0.2, 0.4, 0.9]), 0, 2, 0).unwrap(), -0.216, epsilon = 1e-15);
        assert!(compute_cij(&pv(&[0.2, 0.4]), 1, 1, 0).is_err());
        assert!(check_cij_nonpositive(&pv(&[0.2, 0.4, 0.9, 0.55])).unwrap().holds);
    }

    #[test]
    fn symmetric_extraction() {
        let r = check_quadratic_decomposition_n2(&pv(&[0.5, 0.5]), 0).unwrap();
        assert_abs_diff_eq!(r.c_01, -1.0, epsilon = 1e-12);
        assert_eq!(r.c_direct, -1.0);
        assert_abs_diff_eq!(r.b_01, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(r.b_10, 0.5, epsilon = 1e-14);
        // equal parameters: the strengthened bound coincides with the plain one
        assert_eq!(r.margins.margin_at(3), r.margins.margin_at(4));
        assert!(r.margins.holds, "{r:?}");
    }

    #[test]
    fn asymmetric_extraction() {
        let r = check_quadratic_decomposition_n2(&pv(&[0.3, 0.7]), 0).unwrap();
        assert!(r.discriminant_margin >= 0.25 * r.c_01 * r.c_01 * 0.16 - 1e-12);
        assert!(r.margins.holds, "{r:?}");
        assert!(check_quadratic_decomposition_n2(&pv(&[0.3, 0.7, 0.1]), 0).is_err());
        assert!(check_quadratic_decomposition_n2(&pv(&[0.0, 0.7]), 0).is_err());
    }

    #[test]
    fn worst_case_examples() {
        let r = check_monotone_worst_case(&pv(&[0.5, 0.5]), &[1.0, 1.0]).unwrap();
        // Q(+,+) = 0.125 <= Q(+,-) = 0.375
        assert_eq!(r.margin_at(0), Some(0.0));
        let r = check_monotone_worst_case(&pv(&[0.5, 0.3, 0.8]), &[0.0; 3]).unwrap();
        assert!(r.margins.iter().all(|m| m.1 == 0.0));
        let r = check_monotone_worst_case(&pv(&[0.15, 0.6, 0.85]), &[0.3, 1.0, 0.7]).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(matches!(
            check_monotone_worst_case(&pv(&[0.5, 0.5]), &[1.0, -1.0]),
            Err(Error::NegativeMagnitude { index: 1, .. })
        ));
        assert!(check_monotone_worst_case(&pv(&[0.5; 13]), &[1.0; 13]).is_err());
    }
}
