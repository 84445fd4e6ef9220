//! Rényi and Tsallis entropies, their second derivatives along affine paths, and
//! bisection for the order `q` at which concavity breaks.
//!
//! With `T(t) = Σ_k f_k(t)^q`:
//! `H_R = ln T / (1 - q)`, `H_T = (1 - T) / (q - 1)`, and
//! `H_R'' = T'' / ((1 - q) T) - (T' / T)² / (1 - q)`.

use serde::{Deserialize, Serialize};

use crate::calculus::{path_state, AffinePath, PathDerivatives};
use crate::error::{Error, Result};
use crate::fd;
use crate::inequalities::{uk_from, MarginReport, Tolerance};
use crate::pmf::{compute_pmf, ParamVector, Pmf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyKind {
    Shannon,
    Renyi,
    Tsallis,
}

impl EntropyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Shannon => "shannon",
            Self::Renyi => "renyi",
            Self::Tsallis => "tsallis",
        }
    }
}

impl std::str::FromStr for EntropyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "shannon" => Ok(Self::Shannon),
            "renyi" => Ok(Self::Renyi),
            "tsallis" => Ok(Self::Tsallis),
            other => Err(format!("unknown entropy kind `{other}`")),
        }
    }
}

/// An entropy functional. `q` is required for Rényi and Tsallis, with `q >= 0` and `q != 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct EntropySpec {
    kind: EntropyKind,
    q: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    kind: EntropyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
}

impl TryFrom<RawSpec> for EntropySpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        match (raw.kind, raw.q) {
            (EntropyKind::Shannon, _) => Ok(Self::shannon()),
            (kind, Some(q)) => Self::new(kind, q),
            (_, None) => Err(Error::InvalidOrder { q: f64::NAN, reason: "missing q" }),
        }
    }
}

impl From<EntropySpec> for RawSpec {
    fn from(s: EntropySpec) -> Self {
        RawSpec { kind: s.kind, q: (s.kind != EntropyKind::Shannon).then_some(s.q) }
    }
}

impl EntropySpec {
    pub fn shannon() -> Self {
        Self { kind: EntropyKind::Shannon, q: 1.0 }
    }

    pub fn renyi(q: f64) -> Result<Self> {
        Self::new(EntropyKind::Renyi, q)
    }

    pub fn tsallis(q: f64) -> Result<Self> {
        Self::new(EntropyKind::Tsallis, q)
    }

    pub fn new(kind: EntropyKind, q: f64) -> Result<Self> {
        if kind == EntropyKind::Shannon {
            return Ok(Self::shannon());
        }
        check_order(q)?;
        Ok(Self { kind, q })
    }

    pub fn kind(&self) -> EntropyKind {
        self.kind
    }

    /// The order; `1` for Shannon.
    pub fn q(&self) -> f64 {
        self.q
    }
}

fn check_order(q: f64) -> Result<()> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::InvalidOrder { q, reason: "q must be finite and nonnegative" });
    }
    if q == 1.0 {
        return Err(Error::InvalidOrder { q, reason: "q = 1 is the Shannon entropy" });
    }
    Ok(())
}

/// `x^q` with `0^q = 0` for every `q`, including `q = 0`.
#[inline]
fn pow0(x: f64, q: f64) -> f64 {
    if x > 0.0 {
        x.powf(q)
    } else {
        0.0
    }
}

/// `Σ f_k^q` over the support.
pub fn power_sum(f: &Pmf, q: f64) -> f64 {
    f.as_slice().iter().map(|&x| pow0(x, q)).sum()
}

/// Entropy of `f` in nats.
pub fn q_entropy(f: &Pmf, spec: &EntropySpec) -> f64 {
    match spec.kind {
        EntropyKind::Shannon => f.shannon_entropy(),
        EntropyKind::Renyi => power_sum(f, spec.q).ln() / (1.0 - spec.q),
        EntropyKind::Tsallis => (1.0 - power_sum(f, spec.q)) / (spec.q - 1.0),
    }
}

/// Entropy of `p(t)`.
pub fn path_q_entropy(path: &AffinePath, t: f64, spec: &EntropySpec) -> Result<f64> {
    Ok(q_entropy(&compute_pmf(&path.at(t)?), spec))
}

/// `T`, `T'` and `T''` along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSumDerivatives {
    pub value: f64,
    pub first: f64,
    pub second: f64,
    /// Sum of absolute values of the terms of `T''`.
    pub second_scale: f64,
}

fn power_sum_derivatives_from(f: &Pmf, d: &PathDerivatives, q: f64) -> Result<PowerSumDerivatives> {
    let (df, d2f) = (d.first_pmf_derivative(), d.second_pmf_derivative());
    let (mut value, mut first, mut second, mut second_scale) = (0.0, 0.0, 0.0, 0.0);
    for (k, ((&x, &d1), &d2)) in f.as_slice().iter().zip(&df).zip(&d2f).enumerate() {
        if x > 0.0 {
            let xq1 = x.powf(q - 1.0);
            value += xq1 * x;
            first += q * xq1 * d1;
            let (a, b) = (q * (q - 1.0) * x.powf(q - 2.0) * d1 * d1, q * xq1 * d2);
            second += a + b;
            second_scale += a.abs() + b.abs();
        } else if d1 != 0.0 || d2 != 0.0 {
            return Err(Error::BoundaryDegeneracy { k });
        }
    }
    Ok(PowerSumDerivatives { value, first, second, second_scale })
}

/// `T(t) = Σ f_k(t)^q` and its first two derivatives, from `f' = ∇g`, `f'' = ∇²h`.
pub fn power_sum_derivatives(path: &AffinePath, t: f64, q: f64) -> Result<PowerSumDerivatives> {
    check_order(q)?;
    let (f, d) = path_state(path, t)?;
    power_sum_derivatives_from(&f, &d, q)
}

/// `H''` for Rényi or Tsallis together with the magnitude of the terms it is built from.
pub(crate) fn q_second_with_scale(path: &AffinePath, t: f64, spec: &EntropySpec) -> Result<(f64, f64)> {
    let ps = power_sum_derivatives(path, t, spec.q)?;
    let value = second_from_power_sum(spec.kind, spec.q, &ps);
    let one_minus_q = (1.0 - spec.q).abs();
    let scale = match spec.kind {
        EntropyKind::Tsallis => ps.second_scale / one_minus_q,
        _ => ps.second_scale / (one_minus_q * ps.value) + (ps.first / ps.value).powi(2) / one_minus_q,
    };
    Ok((value, scale))
}

fn second_from_power_sum(kind: EntropyKind, q: f64, ps: &PowerSumDerivatives) -> f64 {
    match kind {
        EntropyKind::Tsallis => ps.second / (1.0 - q),
        EntropyKind::Renyi => {
            let ratio = ps.first / ps.value;
            ps.second / ((1.0 - q) * ps.value) - ratio * ratio / (1.0 - q)
        }
        EntropyKind::Shannon => unreachable!("Shannon handled separately"),
    }
}

/// Analytic second derivative of the entropy along a path.
pub fn q_entropy_second_analytic(path: &AffinePath, t: f64, spec: &EntropySpec) -> Result<f64> {
    match spec.kind {
        EntropyKind::Shannon => crate::calculus::entropy_second_derivative_analytic(path, t),
        kind => Ok(second_from_power_sum(kind, spec.q, &power_sum_derivatives(path, t, spec.q)?)),
    }
}

/// Second derivative by the centered difference `(H(t+h) - 2H(t) + H(t-h)) / h²`.
pub fn q_entropy_second_numeric(path: &AffinePath, t: f64, spec: &EntropySpec, step: f64) -> Result<f64> {
    require_room(path, t, step)?;
    let h = |s: f64| path_q_entropy(path, s, spec);
    let (up, mid, down) = (h(t + step)?, h(t)?, h(t - step)?);
    Ok((up - 2.0 * mid + down) / (step * step))
}

fn require_room(path: &AffinePath, t: f64, radius: f64) -> Result<()> {
    if !path.has_room(t, radius) {
        let (lo, hi) = path.t_domain();
        return Err(Error::OutsideDomain { t, lo: lo + radius, hi: hi - radius });
    }
    Ok(())
}

/// Both routes to `H''` at one point, plus the `u_k` bound where one exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivativeCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    /// `-Σ u_k` (Shannon) or `-q Σ u_k^(T)` (Tsallis); `None` for Rényi.
    pub uk_bound: Option<f64>,
    /// `uk_bound - analytic`: the boundary terms dropped by the `u_k` relabelling.
    pub uk_residual: Option<f64>,
}

/// Analytic `H''(t)` for any kind, cross-checked by centered differences with `step`.
///
/// For Tsallis the exact value comes from `T''`; `-q Σ u_k^(T)` is reported beside it.
pub fn q_entropy_second_derivative(
    path: &AffinePath,
    t: f64,
    spec: &EntropySpec,
    step: f64,
) -> Result<SecondDerivativeCheck> {
    let finite_difference = q_entropy_second_numeric(path, t, spec, step)?;
    let (f, d) = path_state(path, t)?;
    let (analytic, uk_bound) = match spec.kind {
        EntropyKind::Shannon => {
            let a = crate::calculus::shannon_second_from_parts(
                &f,
                &d.first_pmf_derivative(),
                &d.second_pmf_derivative(),
            )?;
            (a, Some(-uk_from(&f, &d)?.sum()))
        }
        EntropyKind::Tsallis => {
            let ps = power_sum_derivatives_from(&f, &d, spec.q)?;
            let u = tsallis_uk_from(&f, &d, spec.q)?;
            (second_from_power_sum(EntropyKind::Tsallis, spec.q, &ps), Some(-spec.q * u.iter().sum::<f64>()))
        }
        EntropyKind::Renyi => {
            let ps = power_sum_derivatives_from(&f, &d, spec.q)?;
            (second_from_power_sum(EntropyKind::Renyi, spec.q, &ps), None)
        }
    };
    Ok(SecondDerivativeCheck {
        analytic,
        finite_difference,
        uk_bound,
        uk_residual: uk_bound.map(|b| b - analytic),
    })
}

fn require_positive(f: &Pmf) -> Result<()> {
    match f.as_slice().iter().position(|&x| !(x > 0.0)) {
        Some(k) => Err(Error::BoundaryDegeneracy { k }),
        None => Ok(()),
    }
}

/// `u_k^(T) = -h_k (f_k^{q-1} - 2f_{k+1}^{q-1} + f_{k+2}^{q-1}) / (1 - q)
///  + g_k² f_k^{q-2} - 2 g_k g_{k+1} f_{k+1}^{q-2} + g_{k+1}² f_{k+2}^{q-2}`.
fn tsallis_uk_from(f: &Pmf, d: &PathDerivatives, q: f64) -> Result<Vec<f64>> {
    require_positive(f)?;
    let pw1 = |k: isize| f.get(k).powf(q - 1.0);
    let pw2 = |k: isize| f.get(k).powf(q - 2.0);
    Ok((0..d.h.len() as isize)
        .map(|k| {
            let (g0, g1, h) = (d.g_at(k), d.g_at(k + 1), d.h_at(k));
            -h * (pw1(k) - 2.0 * pw1(k + 1) + pw1(k + 2)) / (1.0 - q)
                + g0 * g0 * pw2(k)
                - 2.0 * g0 * g1 * pw2(k + 1)
                + g1 * g1 * pw2(k + 2)
        })
        .collect())
}

/// `u_k^(T)` for `k = 0..=n-2` at `p(t)`.
pub fn tsallis_uk(path: &AffinePath, t: f64, q: f64) -> Result<Vec<f64>> {
    check_order(q)?;
    let (f, d) = path_state(path, t)?;
    tsallis_uk_from(&f, &d, q)
}

/// `H_T'' = -q Σ u_k^(T) - q (g_{n-1}² f_{n-1}^{q-2} + g_0² f_1^{q-2})`: the exact split.
pub fn tsallis_dropped_terms(path: &AffinePath, t: f64, q: f64) -> Result<f64> {
    check_order(q)?;
    let (f, d) = path_state(path, t)?;
    require_positive(&f)?;
    let n = d.g.len() as isize;
    Ok(q * (d.g_at(n - 1).powi(2) * f.get(n - 1).powf(q - 2.0) + d.g_at(0).powi(2) * f.get(1).powf(q - 2.0)))
}

/// Chain rule between Rényi and Tsallis second derivatives.
///
/// Index 0: `-|H_R'' - (H_T''/T - (T'/T)²/(1-q))|` with tolerance `1e-8` relative, where
/// `H_R''` comes from `T, T', T''` and `H_T''` from the `u_k^(T)` decomposition plus its
/// boundary terms. Index 1: the correction `-(T'/T)²/(1-q)` signed so that `>= 0` confirms
/// its forced sign (`<= 0` for `q < 1`, `>= 0` for `q > 1`).
pub fn chain_rule_check(path: &AffinePath, t: f64, q: f64) -> Result<MarginReport> {
    check_order(q)?;
    let (f, d) = path_state(path, t)?;
    require_positive(&f)?;
    let ps = power_sum_derivatives_from(&f, &d, q)?;
    let renyi = second_from_power_sum(EntropyKind::Renyi, q, &ps);
    let n = d.g.len() as isize;
    let u = tsallis_uk_from(&f, &d, q)?;
    let dropped = q * (d.g_at(n - 1).powi(2) * f.get(n - 1).powf(q - 2.0) + d.g_at(0).powi(2) * f.get(1).powf(q - 2.0));
    let tsallis = -q * u.iter().sum::<f64>() - dropped;
    let ratio = ps.first / ps.value;
    let correction = -ratio * ratio / (1.0 - q);
    let rhs = tsallis / ps.value + correction;

    let scale = renyi.abs().max((tsallis / ps.value).abs()).max(correction.abs()).max(
        u.iter().fold(0.0f64, |m, x| m.max((q * x / ps.value).abs())),
    );
    let identity_tol = Tolerance { abs_floor: 1e-300, rel: 1e-8 }.for_scale(scale);
    let sign_margin = if q < 1.0 { -correction } else { correction };
    let sign_tol = Tolerance::DEFAULT.for_scale(correction.abs());
    let margins = vec![(0, -(renyi - rhs).abs()), (1, sign_margin)];
    let tol = identity_tol.max(sign_tol);
    Ok(MarginReport::with_tolerance("chain_rule", margins, tol))
}

/// `u_k^(T)` beside the rewritten `ũ_k = u_k + ∇_1 v_k`, with
/// `v_k = -((1-q)/(2-q)) g_{k+1}² ∇_1(f_{k+2}^{q-2})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsallisTilde {
    pub u: Vec<f64>,
    pub u_tilde: Vec<f64>,
    pub sum_u: f64,
    pub sum_u_tilde: f64,
    /// `v_{n-2} - v_{-1}`: what `Σ ∇_1 v_k` telescopes to.
    pub telescope_residual: f64,
    /// `Σ ũ - Σ u - telescope_residual`; zero up to rounding.
    pub identity_error: f64,
    pub scale: f64,
}

impl TsallisTilde {
    /// `|Σũ - Σu - residual| <= 1e-10 · scale`.
    pub fn identity_holds(&self) -> bool {
        self.identity_error.abs() <= 1e-10 * self.scale.max(f64::MIN_POSITIVE)
    }

    /// Whether the boundary values of `v` cancel, so that `Σũ = Σu`.
    pub fn sums_agree(&self) -> bool {
        (self.sum_u_tilde - self.sum_u).abs() <= 1e-10 * self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Left discrete derivatives; every index used lies inside `0..=n` for `f` and `0..n` for `g`.
pub fn tsallis_uk_tilde(path: &AffinePath, t: f64, q: f64) -> Result<TsallisTilde> {
    check_order(q)?;
    if q == 2.0 {
        return Err(Error::InvalidOrder { q, reason: "the rewriting divides by 2 - q" });
    }
    let (f, d) = path_state(path, t)?;
    require_positive(&f)?;
    let u = tsallis_uk_from(&f, &d, q)?;
    let pw1 = |k: isize| f.get(k).powf(q - 1.0);
    let pw2 = |k: isize| f.get(k).powf(q - 2.0);
    // w_{k+1} = g_{k+1}² ∇_1(f_{k+2}^{q-2})
    let w = |k: isize| d.g_at(k + 1).powi(2) * (pw2(k + 2) - pw2(k + 1));
    let v = |k: isize| -((1.0 - q) / (2.0 - q)) * w(k);

    let mut scale = 0.0f64;
    let u_tilde: Vec<f64> = (0..d.h.len() as isize)
        .map(|k| {
            let (g0, g1, h) = (d.g_at(k), d.g_at(k + 1), d.h_at(k));
            let a = -h * (pw1(k + 2) - 2.0 * pw1(k + 1) + pw1(k)) / (1.0 - q);
            let b = (g1 - g0).powi(2) * pw2(k + 1);
            let c = (w(k) - w(k - 1)) / (2.0 - q);
            scale = scale.max(a.abs()).max(b.abs()).max(c.abs()).max(w(k).abs()).max(w(k - 1).abs());
            a + b + c
        })
        .collect();
    let n = d.g.len() as isize;
    let telescope_residual = if d.h.is_empty() { 0.0 } else { v(n - 2) - v(-1) };
    let sum_u: f64 = u.iter().sum();
    let sum_u_tilde: f64 = u_tilde.iter().sum();
    for x in &u {
        scale = scale.max(x.abs());
    }
    Ok(TsallisTilde {
        identity_error: sum_u_tilde - sum_u - telescope_residual,
        u,
        u_tilde,
        sum_u,
        sum_u_tilde,
        telescope_residual,
        scale,
    })
}

/// Closed form of the Binomial(2, p) Tsallis second derivative at `p = 1/2`:
/// `2^{3-2q} (2 - 4q + 2^q) q / (q - 1)`.
pub fn binomial2_tsallis_closed_form(q: f64) -> f64 {
    2f64.powf(3.0 - 2.0 * q) * (2.0 - 4.0 * q + 2f64.powf(q)) * q / (q - 1.0)
}

/// `2 - 4q + 2^q`, whose root above 3 is the conjectured Tsallis threshold.
pub fn tsallis_threshold_polynomial(q: f64) -> f64 {
    2.0 - 4.0 * q + 2f64.powf(q)
}

/// How a probe obtains the second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMethod {
    Analytic,
    FiniteDifference,
}

/// Deterministic functions of `q` whose sign change marks a critical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
pub enum CriticalProbe {
    /// `2 - 4q + 2^q`.
    ThresholdPolynomial,
    /// The closed form at `p = 1/2`.
    Binomial2TsallisClosedForm,
    /// `H_T''` along `p_1(t) = p_2(t) = t` at `t = 1/2`.
    Binomial2Tsallis { method: ProbeMethod },
    /// `H_R''` of Bernoulli(`p`) along `p(t) = t`.
    BernoulliRenyi { p: f64, method: ProbeMethod },
}

impl CriticalProbe {
    pub fn family_id(&self) -> String {
        match self {
            Self::ThresholdPolynomial => "threshold_polynomial".into(),
            Self::Binomial2TsallisClosedForm => "binomial2_tsallis_closed_form".into(),
            Self::Binomial2Tsallis { method } => format!("binomial2_tsallis_{}", method_id(*method)),
            Self::BernoulliRenyi { p, method } => format!("bernoulli_renyi_{}@p={p}", method_id(*method)),
        }
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        let second = |path: AffinePath, spec: EntropySpec, method: ProbeMethod| match method {
            ProbeMethod::Analytic => q_entropy_second_analytic(&path, 0.0, &spec),
            ProbeMethod::FiniteDifference => q_entropy_second_numeric(&path, 0.0, &spec, fd::SECOND_STEP),
        };
        match *self {
            Self::ThresholdPolynomial => Ok(tsallis_threshold_polynomial(q)),
            Self::Binomial2TsallisClosedForm => Ok(binomial2_tsallis_closed_form(q)),
            Self::Binomial2Tsallis { method } => {
                let path = AffinePath::maximal(ParamVector::new(vec![0.5, 0.5])?, vec![1.0, 1.0], 0.0)?;
                second(path, EntropySpec::tsallis(q)?, method)
            }
            Self::BernoulliRenyi { p, method } => {
                let path = AffinePath::maximal(ParamVector::new(vec![p])?, vec![1.0], 0.0)?;
                second(path, EntropySpec::renyi(q)?, method)
            }
        }
    }
}

fn method_id(m: ProbeMethod) -> &'static str {
    match m {
        ProbeMethod::Analytic => "analytic",
        ProbeMethod::FiniteDifference => "finite_difference",
    }
}

/// Width at which bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalQResult {
    pub family: String,
    pub initial_bracket: (f64, f64),
    /// Final bracket; the test function has opposite signs at its ends.
    pub bracket: (f64, f64),
    pub root: f64,
    /// Every evaluation in order: `(q, sign)` with sign in `{-1, 0, 1}`.
    pub sign_trace: Vec<(f64, i8)>,
}

fn sign_of(v: f64) -> Result<i8> {
    if v.is_nan() {
        return Err(Error::NonFinite("critical-q probe"));
    }
    Ok(if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    })
}

/// Midpoint bisection on a sign predicate, down to a bracket of width `width`.
pub fn bisect_sign(
    family: impl Into<String>,
    mut sign: impl FnMut(f64) -> Result<i8>,
    bracket: (f64, f64),
    width: f64,
) -> Result<CriticalQResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut trace = Vec::new();
    let s_lo = sign(lo)?;
    trace.push((lo, s_lo));
    let s_hi = sign(hi)?;
    trace.push((hi, s_hi));
    let done = |root: f64, b: (f64, f64), trace| CriticalQResult {
        family: String::new(),
        initial_bracket: bracket,
        bracket: b,
        root,
        sign_trace: trace,
    };
    let mut result = if s_lo == 0 {
        done(lo, (lo, lo), trace)
    } else if s_hi == 0 {
        done(hi, (hi, hi), trace)
    } else if s_lo == s_hi {
        return Err(Error::NoSignChange { lo, hi });
    } else {
        loop {
            if hi - lo <= width {
                break done(0.5 * (lo + hi), (lo, hi), trace);
            }
            let mid = 0.5 * (lo + hi);
            let s = sign(mid)?;
            trace.push((mid, s));
            if s == 0 {
                break done(mid, (mid, mid), trace);
            } else if s == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    };
    result.family = family.into();
    Ok(result)
}

/// Bisection for the sign change of a probe on `bracket`.
pub fn find_critical_q(probe: &CriticalProbe, bracket: (f64, f64)) -> Result<CriticalQResult> {
    bisect_sign(probe.family_id(), |q| sign_of(probe.eval(q)?), bracket, BISECTION_WIDTH)
}
