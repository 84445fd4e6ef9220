//! The functional inequality
//! `αU(1-A) - 2βU(1-B) + γU(1-C) >= -αA + 2βB - γC`
//! for `0 < A, C < 1`, `B² <= AC`, `β² <= αγ`, and generators `U` with `U(1) = 0`,
//! `U'(1) = 1`, `U''' <= 0` and `ln U''` convex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::xlogx;

use super::margin::{MarginReport, Tolerance};

/// A one-dimensional function with its first three derivatives on `(0, ∞)`.
pub trait Generator {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    fn d3(&self, x: f64) -> f64;
}

/// `U(x) = x ln x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct XLogX;

impl Generator for XLogX {
    fn value(&self, x: f64) -> f64 {
        xlogx(x)
    }
    fn d1(&self, x: f64) -> f64 {
        x.ln() + 1.0
    }
    fn d2(&self, x: f64) -> f64 {
        1.0 / x
    }
    fn d3(&self, x: f64) -> f64 {
        -1.0 / (x * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaInputs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaOptions {
    /// Points in `[0, 1]` (endpoints included) at which `ξ''` is sampled.
    pub xi_grid: usize,
    /// Points in `(0, hypothesis_upper]` at which `U'''` and `ln U''` are sampled.
    pub hypothesis_grid: usize,
    pub hypothesis_upper: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        Self { xi_grid: 1001, hypothesis_grid: 2000, hypothesis_upper: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// Single margin (index 0): LHS - RHS of the inequality.
    pub margin: MarginReport,
    /// `min_t ξ''(t)` over the grid.
    pub xi_second_min: f64,
    pub xi_second_argmin: f64,
}

/// Checks (i)-(iv) for a generator on a sampling grid.
pub fn validate_generator<U: Generator + ?Sized>(u: &U, opts: &LemmaOptions) -> Result<()> {
    let fail = |msg: String| Err(Error::LemmaHypothesis(msg));
    if u.value(1.0).abs() > 1e-15 {
        return fail(format!("(i) U(1) = {} != 0", u.value(1.0)));
    }
    if (u.d1(1.0) - 1.0).abs() > 1e-15 {
        return fail(format!("(ii) U'(1) = {} != 1", u.d1(1.0)));
    }
    let m = opts.hypothesis_grid.max(3);
    let step = opts.hypothesis_upper / m as f64;
    let xs: Vec<f64> = (1..=m).map(|j| j as f64 * step).collect();
    for &x in &xs {
        if u.d3(x) > 0.0 {
            return fail(format!("(iii) U'''({x}) = {} > 0", u.d3(x)));
        }
        if !(u.d2(x) > 0.0) {
            return fail(format!("(iv) U''({x}) = {} is not positive, ln U'' undefined", u.d2(x)));
        }
    }
    let logs: Vec<f64> = xs.iter().map(|&x| u.d2(x).ln()).collect();
    for w in 1..logs.len() - 1 {
        let second = logs[w - 1] - 2.0 * logs[w] + logs[w + 1];
        let scale = logs[w - 1].abs().max(logs[w].abs()).max(logs[w + 1].abs());
        if second < -Tolerance::DEFAULT.for_scale(scale) {
            return fail(format!("(iv) ln U'' is not convex near x = {}", xs[w]));
        }
    }
    Ok(())
}

/// Checks the constraints on `(A, B, C, α, β, γ)`.
pub fn validate_inputs(p: &LemmaInputs) -> Result<()> {
    let fail = |msg: String| Err(Error::LemmaHypothesis(msg));
    let LemmaInputs { a, b, c, alpha, beta, gamma } = *p;
    if [a, b, c, alpha, beta, gamma].iter().any(|v| !v.is_finite()) {
        return fail("non-finite input".into());
    }
    if !(a > 0.0 && a < 1.0) {
        return fail(format!("0 < A < 1 fails: A = {a}"));
    }
    if !(c > 0.0 && c < 1.0) {
        return fail(format!("0 < C < 1 fails: C = {c}"));
    }
    if b * b > a * c {
        return fail(format!("B² <= AC fails: {} > {}", b * b, a * c));
    }
    if alpha < 0.0 || gamma < 0.0 {
        return fail(format!("α, γ >= 0 fails: α = {alpha}, γ = {gamma}"));
    }
    if beta * beta > alpha * gamma {
        return fail(format!("β² <= αγ fails: {} > {}", beta * beta, alpha * gamma));
    }
    Ok(())
}

/// `ξ''(t) = αA²U''(1-tA) - 2βB²U''(1-tB) + γC²U''(1-tC)`.
pub fn xi_second<U: Generator + ?Sized>(u: &U, p: &LemmaInputs, t: f64) -> f64 {
    p.alpha * p.a * p.a * u.d2(1.0 - t * p.a) - 2.0 * p.beta * p.b * p.b * u.d2(1.0 - t * p.b)
        + p.gamma * p.c * p.c * u.d2(1.0 - t * p.c)
}

/// Validates the hypotheses, then evaluates the inequality margin and the `ξ''` grid minimum.
/// Inputs that violate a hypothesis are rejected without evaluating anything.
pub fn check_functional_lemma<U: Generator + ?Sized>(
    u: &U,
    inputs: &LemmaInputs,
    opts: &LemmaOptions,
) -> Result<LemmaReport> {
    validate_generator(u, opts)?;
    validate_inputs(inputs)?;
    let LemmaInputs { a, b, c, alpha, beta, gamma } = *inputs;
    let monos = [
        alpha * u.value(1.0 - a),
        2.0 * beta * u.value(1.0 - b),
        gamma * u.value(1.0 - c),
        alpha * a,
        2.0 * beta * b,
        gamma * c,
    ];
    let margin = monos[0] - monos[1] + monos[2] + monos[3] - monos[4] + monos[5];
    let scale = monos.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let report = MarginReport::from_terms("functional_lemma", &[(0, margin, scale)], Tolerance::DEFAULT);

    let m = opts.xi_grid.max(2);
    let (mut xi_min, mut argmin) = (f64::INFINITY, 0.0);
    for j in 0..m {
        let t = j as f64 / (m - 1) as f64;
        let v = xi_second(u, inputs, t);
        if v < xi_min {
            xi_min = v;
            argmin = t;
        }
    }
    Ok(LemmaReport { margin: report, xi_second_min: xi_min, xi_second_argmin: argmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn inputs(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma: f64) -> LemmaInputs {
        LemmaInputs { a, b, c, alpha, beta, gamma }
    }

    #[test]
    fn symmetric_equality_case() {
        let r = check_functional_lemma(&XLogX, &inputs(0.5, 0.5, 0.5, 1.0, 1.0, 1.0), &LemmaOptions::default())
            .unwrap();
        assert_abs_diff_eq!(r.margin.worst.unwrap(), 0.0, epsilon = 1e-15);
        assert!(r.margin.holds);
        assert!(r.xi_second_min >= -1e-12);
    }

    #[test]
    fn beta_zero_case() {
        let r = check_functional_lemma(&XLogX, &inputs(0.5, 0.0, 0.5, 1.0, 0.0, 1.0), &LemmaOptions::default())
            .unwrap();
        assert_abs_diff_eq!(r.margin.worst.unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.margin.worst.unwrap(), 0.30685, epsilon = 1e-5);
    }

    #[test]
    fn hypothesis_violations_are_rejected() {
        let opts = LemmaOptions::default();
        let e = check_functional_lemma(&XLogX, &inputs(0.9, 0.9, 0.5, 1.0, 1.0, 1.0), &opts).unwrap_err();
        assert!(matches!(e, Error::LemmaHypothesis(ref m) if m.contains("B²")), "{e}");
        for bad in [
            inputs(0.0, 0.0, 0.5, 1.0, 0.0, 1.0),
            inputs(0.5, 0.0, 1.0, 1.0, 0.0, 1.0),
            inputs(0.5, 0.1, 0.5, 1.0, 2.0, 1.0),
            inputs(0.5, 0.1, 0.5, -1.0, 0.0, 1.0),
        ] {
            assert!(matches!(check_functional_lemma(&XLogX, &bad, &opts), Err(Error::LemmaHypothesis(_))));
        }
    }

    struct Cubic;
    impl Generator for Cubic {
        fn value(&self, x: f64) -> f64 {
            (x * x * x - 1.0) / 3.0
        }
        fn d1(&self, x: f64) -> f64 {
            x * x
        }
        fn d2(&self, x: f64) -> f64 {
            2.0 * x
        }
        fn d3(&self, _: f64) -> f64 {
            2.0
        }
    }

    struct Shifted;
    impl Generator for Shifted {
        fn value(&self, x: f64) -> f64 {
            xlogx(x) + 0.5
        }
        fn d1(&self, x: f64) -> f64 {
            x.ln() + 1.0
        }
        fn d2(&self, x: f64) -> f64 {
            1.0 / x
        }
        fn d3(&self, x: f64) -> f64 {
            -1.0 / (x * x)
        }
    }

    #[test]
    fn generator_conditions() {
        let opts = LemmaOptions::default();
        assert!(validate_generator(&XLogX, &opts).is_ok());
        let e = validate_generator(&Cubic, &opts).unwrap_err();
        assert!(e.to_string().contains("(iii)"), "{e}");
        let e = validate_generator(&Shifted, &opts).unwrap_err();
        assert!(e.to_string().contains("(i)"), "{e}");
    }

    #[test]
    fn xi_endpoints_match_inequality() {
        // ξ(1) - ξ(0) - ξ'(0) is the margin; check ξ'' is nonnegative along the way
        let p = inputs(0.7, -0.3, 0.4, 2.0, 0.5, 1.5);
        let r = check_functional_lemma(&XLogX, &p, &LemmaOptions::default()).unwrap();
        assert!(r.xi_second_min > 0.0);
        assert!(r.margin.worst.unwrap() > 0.0);
    }
}
