//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function takes plain numbers or comma-separated lists and returns a
//! JSON string. The same computations are available natively through [`api`].

use wasm_bindgen::prelude::*;

pub mod api {
    use serde::Serialize;

    use shepp_olkin::calculus::{entropy_hessian, entropy_second_derivative_analytic, AffinePath};
    use shepp_olkin::pmf::{compute_pmf, ParamVector};
    use shepp_olkin::qentropy::{
        binomial2_tsallis_closed_form, find_critical_q, q_entropy, q_entropy_second_analytic, CriticalProbe,
        EntropyKind, EntropySpec,
    };

    /// Distance kept from the faces of the cube when sampling a path.
    pub const PATH_MARGIN: f64 = 1e-3;

    pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
        s.split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", x.trim())))
            .collect()
    }

    fn spec(kind: &str, q: f64) -> Result<EntropySpec, String> {
        let kind: EntropyKind = kind.parse()?;
        match kind {
            EntropyKind::Shannon => Ok(EntropySpec::shannon()),
            _ => EntropySpec::new(kind, q).map_err(|e| e.to_string()),
        }
    }

    #[derive(Debug, Serialize)]
    pub struct PmfSummary {
        pub pmf: Vec<f64>,
        pub entropy: f64,
        /// `None` on the boundary of the cube, where the Hessian is undefined.
        pub hessian_max_eigenvalue: Option<f64>,
    }

    pub fn pmf_summary(p: &str) -> Result<PmfSummary, String> {
        let params = ParamVector::new(parse_list(p)?).map_err(|e| e.to_string())?;
        let f = compute_pmf(&params);
        Ok(PmfSummary {
            entropy: f.shannon_entropy(),
            hessian_max_eigenvalue: entropy_hessian(&params).ok().map(|h| h.max_eigenvalue),
            pmf: f.into_vec(),
        })
    }

    #[derive(Debug, Serialize)]
    pub struct EntropyProfile {
        pub kind: EntropyKind,
        pub q: Option<f64>,
        pub t_domain: (f64, f64),
        pub t: Vec<f64>,
        pub entropy: Vec<f64>,
        pub second_derivative: Vec<f64>,
        pub max_second_derivative: f64,
    }

    /// `H` and `H''` along `p + t·slopes` at `points` evenly spaced times, over the largest
    /// interval that keeps every parameter in `[PATH_MARGIN, 1 - PATH_MARGIN]`.
    pub fn entropy_profile(p: &str, slopes: &str, kind: &str, q: f64, points: usize) -> Result<EntropyProfile, String> {
        let spec = spec(kind, q)?;
        let params = ParamVector::new(parse_list(p)?).map_err(|e| e.to_string())?;
        let path = AffinePath::maximal(params, parse_list(slopes)?, PATH_MARGIN).map_err(|e| e.to_string())?;
        let (lo, hi) = path.t_domain();
        let points = points.clamp(2, 2000);
        let (mut t, mut entropy, mut second) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..points {
            let tj = lo + (hi - lo) * j as f64 / (points - 1) as f64;
            let point = path.at(tj).map_err(|e| e.to_string())?;
            let h2 = match spec.kind() {
                EntropyKind::Shannon => entropy_second_derivative_analytic(&path, tj),
                _ => q_entropy_second_analytic(&path, tj, &spec),
            }
            .map_err(|e| e.to_string())?;
            t.push(tj);
            entropy.push(q_entropy(&compute_pmf(&point), &spec));
            second.push(h2);
        }
        Ok(EntropyProfile {
            kind: spec.kind(),
            q: (spec.kind() != EntropyKind::Shannon).then_some(q),
            t_domain: (lo, hi),
            max_second_derivative: second.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t,
            entropy,
            second_derivative: second,
        })
    }

    #[derive(Debug, Serialize)]
    pub struct TsallisCurve {
        pub q: Vec<f64>,
        /// Tsallis `H''` of Binomial(2, t) at `t = 1/2`.
        pub second_derivative: Vec<f64>,
        pub critical_q: f64,
    }

    /// The closed-form curve on `[q_lo, q_hi]` (skipping `q = 1`) and the critical order.
    pub fn tsallis_q_curve(q_lo: f64, q_hi: f64, points: usize) -> Result<TsallisCurve, String> {
        if !(q_lo.is_finite() && q_hi.is_finite() && 0.0 <= q_lo && q_lo < q_hi) {
            return Err(format!("need 0 <= q_lo < q_hi, got [{q_lo}, {q_hi}]"));
        }
        let points = points.clamp(2, 5000);
        let (q, second): (Vec<f64>, Vec<f64>) = (0..points)
            .map(|j| q_lo + (q_hi - q_lo) * j as f64 / (points - 1) as f64)
            .filter(|q| (q - 1.0).abs() > 1e-9)
            .map(|q| (q, binomial2_tsallis_closed_form(q)))
            .unzip();
        let root = find_critical_q(&CriticalProbe::ThresholdPolynomial, (3.0, 4.0)).map_err(|e| e.to_string())?;
        Ok(TsallisCurve { q, second_derivative: second, critical_q: root.root })
    }
}

fn to_js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| serde_json::to_string(&v).expect("serializable")).map_err(|e| JsError::new(&e))
}

/// Mass function, entropy and largest Hessian eigenvalue for comma-separated `p`.
#[wasm_bindgen]
pub fn pmf_summary(p: &str) -> Result<String, JsError> {
    to_js(api::pmf_summary(p))
}

/// Entropy and its second derivative along `p + t·slopes`.
#[wasm_bindgen]
pub fn entropy_profile(p: &str, slopes: &str, kind: &str, q: f64, points: usize) -> Result<String, JsError> {
    to_js(api::entropy_profile(p, slopes, kind, q, points))
}

/// Binomial(2, 1/2) Tsallis second derivative as a function of `q`, with the critical order.
#[wasm_bindgen]
pub fn tsallis_q_curve(q_lo: f64, q_hi: f64, points: usize) -> Result<String, JsError> {
    to_js(api::tsallis_q_curve(q_lo, q_hi, points))
}
