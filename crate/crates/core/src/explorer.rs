//! Seeded scans over parameter instances hunting for inequality violations, and
//! empirical estimation of critical entropy orders.
//!
//! # Random streams
//!
//! Instance `i` of a `random_affine` scan draws from ChaCha20 (`rand_chacha::ChaCha20Rng`)
//! seeded with `seed_from_u64(config.seed)` and switched to stream `i`. Within an instance the
//! draws are, in order: `n` uniform on `n_range` (inclusive), then `p_1..p_n` uniform on
//! `[ε, 1 - ε]`, then the raw slopes. The sampled instance depends only on `(seed, i, config)`.
//!
//! Slopes are drawn per `slope_distribution` and rescaled to max-norm 1:
//! `unit_sphere` uses independent standard normals (a uniform direction),
//! `signed_unit` uniform on `[-1, 1]`, `monotone_unit` uniform on `[0, 1]`.
//!
//! # Families
//!
//! Built-in families ignore the random stream and evaluate at `instance_count` points
//! `t_0 < … < t_{N-1}`, always along `p(t) = t·(1, …, 1)` with unit slopes:
//!
//! * `bernoulli`: `n = 1`, `t_j` log-spaced from `ε` to `1/2` (requires `ε > 0`).
//! * `binomial2`: `n = 2`, `t_j = 1/2 + (1/2 - ε)(2j/(N-1) - 1)`; odd `N` puts `t = 1/2` on the grid.
//! * `binomial_n`: as `binomial2` with `n = n_range.1`.
//! * `random_affine`: the random instances described above, evaluated at `t = 0`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calculus::{entropy_hessian, shannon_second_with_scale, AffinePath, LeaveOuts, PathDerivatives};
use crate::error::{Error, Result};
use crate::inequalities::{
    check_c1, check_c1_product_identity, check_c1bar, check_cij_nonpositive, check_corollary_identity,
    check_log_concavity, check_monotone_worst_case, check_quadratic_decomposition_n2, check_two_fold_forms,
    check_two_fold_log_concavity, condition4_from, corollary_from, uk_from, MarginReport, Tolerance,
    SIGN_ENUMERATION_LIMIT,
};
use crate::pmf::{compute_pmf, ParamVector, Pmf};
use crate::qentropy::{
    bisect_sign, chain_rule_check, q_second_with_scale, CriticalQResult, EntropyKind, EntropySpec,
    BISECTION_WIDTH,
};

/// Version of the JSON scan report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// A certificate is issued when a margin falls below `-CERTIFICATE_FACTOR · tol`.
pub const CERTIFICATE_FACTOR: f64 = 10.0;

/// Largest `n` accepted in `n_range`.
pub const MAX_SCAN_N: usize = 20;

const CRITICAL_Q_CAVEAT: &str = "the predicate only detects violations on the sampled instances; \
violations that are rare above the true critical order make the estimate an overestimate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeDistribution {
    UnitSphere,
    SignedUnit,
    MonotoneUnit,
}

impl std::str::FromStr for SlopeDistribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "unit_sphere" => Ok(Self::UnitSphere),
            "signed_unit" => Ok(Self::SignedUnit),
            "monotone_unit" => Ok(Self::MonotoneUnit),
            other => Err(format!("unknown slope distribution `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFamily {
    RandomAffine,
    Bernoulli,
    Binomial2,
    BinomialN,
}

impl PathFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::RandomAffine => "random_affine",
            Self::Bernoulli => "bernoulli",
            Self::Binomial2 => "binomial2",
            Self::BinomialN => "binomial_n",
        }
    }
}

impl std::str::FromStr for PathFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random_affine" => Ok(Self::RandomAffine),
            "bernoulli" => Ok(Self::Bernoulli),
            "binomial2" => Ok(Self::Binomial2),
            "binomial_n" => Ok(Self::BinomialN),
            other => Err(format!("unknown path family `{other}`")),
        }
    }
}

fn default_n_range() -> (usize, usize) {
    (1, 12)
}
fn default_instance_count() -> usize {
    1000
}
fn default_interior_margin() -> f64 {
    1e-3
}
fn default_inequality_set() -> Vec<String> {
    vec!["shannon".into()]
}
fn default_slopes() -> SlopeDistribution {
    SlopeDistribution::SignedUnit
}
fn default_family() -> PathFamily {
    PathFamily::RandomAffine
}
fn default_max_certificates() -> usize {
    100
}

/// Scan configuration. Only `seed` is required when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub seed: u64,
    #[serde(default = "default_n_range")]
    pub n_range: (usize, usize),
    #[serde(default = "default_instance_count")]
    pub instance_count: usize,
    #[serde(default = "default_interior_margin")]
    pub interior_margin: f64,
    /// Checker ids or suite aliases, see [`CheckerId`] and [`expand_checkers`].
    #[serde(default = "default_inequality_set")]
    pub inequality_set: Vec<String>,
    /// Orders for the Rényi/Tsallis checkers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_grid: Option<Vec<f64>>,
    #[serde(default = "default_slopes")]
    pub slope_distribution: SlopeDistribution,
    #[serde(default = "default_family")]
    pub family: PathFamily,
    /// Certificates beyond this count are tallied but not emitted.
    #[serde(default = "default_max_certificates")]
    pub max_certificates: usize,
}

impl ScanConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            n_range: default_n_range(),
            instance_count: default_instance_count(),
            interior_margin: default_interior_margin(),
            inequality_set: default_inequality_set(),
            q_grid: None,
            slope_distribution: default_slopes(),
            family: default_family(),
            max_certificates: default_max_certificates(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            Self::from_toml_str(&text)
        } else {
            Self::from_json_str(&text)
        }
    }

    /// Reads a config file and lays its keys over `base`: keys present in the file win,
    /// absent keys keep the values of `base`.
    pub fn load_over(path: &Path, base: &ScanConfig) -> Result<Self> {
        let invalid = |e: String| Error::InvalidConfig(format!("{}: {e}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
        let file: serde_json::Value = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).map_err(|e| invalid(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?
        };
        let serde_json::Value::Object(file) = file else {
            return Err(invalid("expected a table of settings".into()));
        };
        let mut merged = serde_json::to_value(base).expect("config serializes");
        let fields = merged.as_object_mut().expect("config is an object");
        for (k, v) in file {
            fields.insert(k, v);
        }
        serde_json::from_value(merged).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.instance_count < 1 {
            return bad("instance_count must be at least 1".into());
        }
        let eps = self.interior_margin;
        if !(0.0..0.5).contains(&eps) {
            return bad(format!("interior_margin must lie in [0, 0.5), got {eps}"));
        }
        let (lo, hi) = self.n_range;
        if lo < 1 || lo > hi || hi > MAX_SCAN_N {
            return bad(format!("n_range must satisfy 1 <= min <= max <= {MAX_SCAN_N}, got ({lo}, {hi})"));
        }
        if self.family == PathFamily::Bernoulli && eps <= 0.0 {
            return bad("the bernoulli family needs interior_margin > 0".into());
        }
        if let Some(grid) = &self.q_grid {
            for &q in grid {
                if !q.is_finite() || q < 0.0 || q == 1.0 {
                    return bad(format!("q_grid entries must be finite, >= 0 and != 1, got {q}"));
                }
            }
        }
        Ok(())
    }

    /// Lowercase hex SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Individual checkers a scan can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckerId {
    EntropyConcavity,
    HessianNsd,
    UkNonnegative,
    UkIdentity,
    UkTransform,
    UkAbc,
    UkAlphaBetaGamma,
    LogConcavity,
    TwoFoldLogConcavity,
    TwoFoldForms,
    C1,
    C1bar,
    C1ProductIdentity,
    Condition4,
    CorollaryFgh,
    CorollaryIdentity,
    CijNonpositive,
    QuadraticDecomposition,
    MonotoneWorstCase,
    RenyiConcavity,
    TsallisConcavity,
    TsallisChainRule,
}

impl CheckerId {
    pub const ALL: [CheckerId; 22] = [
        Self::EntropyConcavity,
        Self::HessianNsd,
        Self::UkNonnegative,
        Self::UkIdentity,
        Self::UkTransform,
        Self::UkAbc,
        Self::UkAlphaBetaGamma,
        Self::LogConcavity,
        Self::TwoFoldLogConcavity,
        Self::TwoFoldForms,
        Self::C1,
        Self::C1bar,
        Self::C1ProductIdentity,
        Self::Condition4,
        Self::CorollaryFgh,
        Self::CorollaryIdentity,
        Self::CijNonpositive,
        Self::QuadraticDecomposition,
        Self::MonotoneWorstCase,
        Self::RenyiConcavity,
        Self::TsallisConcavity,
        Self::TsallisChainRule,
    ];

    /// Members of the `shannon` alias: every Shannon checker except the exponential-cost
    /// `monotone_worst_case`.
    pub const SHANNON_SUITE: [CheckerId; 18] = [
        Self::EntropyConcavity,
        Self::HessianNsd,
        Self::UkNonnegative,
        Self::UkIdentity,
        Self::UkTransform,
        Self::UkAbc,
        Self::UkAlphaBetaGamma,
        Self::LogConcavity,
        Self::TwoFoldLogConcavity,
        Self::TwoFoldForms,
        Self::C1,
        Self::C1bar,
        Self::C1ProductIdentity,
        Self::Condition4,
        Self::CorollaryFgh,
        Self::CorollaryIdentity,
        Self::CijNonpositive,
        Self::QuadraticDecomposition,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::EntropyConcavity => "entropy_concavity",
            Self::HessianNsd => "hessian_nsd",
            Self::UkNonnegative => "uk_nonnegative",
            Self::UkIdentity => "uk_identity",
            Self::UkTransform => "uk_transform",
            Self::UkAbc => "uk_abc",
            Self::UkAlphaBetaGamma => "uk_alpha_beta_gamma",
            Self::LogConcavity => "log_concavity",
            Self::TwoFoldLogConcavity => "two_fold_log_concavity",
            Self::TwoFoldForms => "two_fold_forms",
            Self::C1 => "c1",
            Self::C1bar => "c1bar",
            Self::C1ProductIdentity => "c1_product_identity",
            Self::Condition4 => "condition4",
            Self::CorollaryFgh => "corollary_fgh",
            Self::CorollaryIdentity => "corollary_identity",
            Self::CijNonpositive => "cij_nonpositive",
            Self::QuadraticDecomposition => "quadratic_decomposition_n2",
            Self::MonotoneWorstCase => "monotone_worst_case",
            Self::RenyiConcavity => "renyi_concavity",
            Self::TsallisConcavity => "tsallis_concavity",
            Self::TsallisChainRule => "tsallis_chain_rule",
        }
    }

    /// The entropy order family the checker needs from `q_grid`, if any.
    pub fn q_kind(&self) -> Option<EntropyKind> {
        match self {
            Self::RenyiConcavity => Some(EntropyKind::Renyi),
            Self::TsallisConcavity | Self::TsallisChainRule => Some(EntropyKind::Tsallis),
            _ => None,
        }
    }
}

impl std::str::FromStr for CheckerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownChecker(s.to_string()))
    }
}

/// Resolves checker ids and the aliases `shannon` (see [`CheckerId::SHANNON_SUITE`]),
/// `renyi` and `tsallis`. The result is sorted and free of duplicates.
pub fn expand_checkers(ids: &[String]) -> Result<Vec<CheckerId>> {
    let mut out = Vec::new();
    for id in ids {
        match id.as_str() {
            "shannon" => out.extend(CheckerId::SHANNON_SUITE),
            "renyi" => out.push(CheckerId::RenyiConcavity),
            "tsallis" => out.push(CheckerId::TsallisConcavity),
            other => out.push(other.parse()?),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// One evaluation point: parameters and slopes at the point, with the family's `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanInstance {
    pub id: usize,
    pub p: Vec<f64>,
    pub slopes: Vec<f64>,
    pub t: f64,
}

fn normalize_max(mut s: Vec<f64>) -> Vec<f64> {
    let m = s.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m > 0.0 {
        for x in &mut s {
            *x /= m;
        }
    } else {
        s[0] = 1.0;
    }
    s
}

fn family_grid(family: PathFamily, eps: f64, count: usize) -> Vec<f64> {
    let last = count.saturating_sub(1).max(1) as f64;
    (0..count)
        .map(|j| match family {
            PathFamily::Bernoulli => {
                if count == 1 || j == 0 {
                    eps
                } else if j == count - 1 {
                    0.5
                } else {
                    let (a, b) = (eps.ln(), 0.5f64.ln());
                    (a + (b - a) * j as f64 / last).exp().min(0.5)
                }
            }
            _ => {
                if count == 1 || 2 * j == count - 1 {
                    0.5
                } else if j == 0 {
                    eps
                } else if j == count - 1 {
                    1.0 - eps
                } else {
                    0.5 + (0.5 - eps) * (2.0 * j as f64 / last - 1.0)
                }
            }
        })
        .collect()
}

/// The instances of a scan, in index order.
pub fn generate_instances(config: &ScanConfig) -> Result<Vec<ScanInstance>> {
    config.validate()?;
    let eps = config.interior_margin;
    let n_fixed = match config.family {
        PathFamily::RandomAffine => None,
        PathFamily::Bernoulli => Some(1),
        PathFamily::Binomial2 => Some(2),
        PathFamily::BinomialN => Some(config.n_range.1),
    };
    if let Some(n) = n_fixed {
        return Ok(family_grid(config.family, eps, config.instance_count)
            .into_iter()
            .enumerate()
            .map(|(id, t)| ScanInstance { id, p: vec![t; n], slopes: vec![1.0; n], t })
            .collect());
    }
    let (lo, hi) = config.n_range;
    Ok((0..config.instance_count)
        .map(|id| {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            rng.set_stream(id as u64);
            let n = rng.random_range(lo..=hi);
            let p: Vec<f64> = (0..n).map(|_| eps + (1.0 - 2.0 * eps) * rng.random::<f64>()).collect();
            let raw: Vec<f64> = (0..n)
                .map(|_| match config.slope_distribution {
                    SlopeDistribution::UnitSphere => rng.sample::<f64, _>(StandardNormal),
                    SlopeDistribution::SignedUnit => rng.random_range(-1.0..=1.0),
                    SlopeDistribution::MonotoneUnit => rng.random::<f64>(),
                })
                .collect();
            ScanInstance { id, p, slopes: normalize_max(raw), t: 0.0 }
        })
        .collect())
}

/// Shared per-instance state.
struct Context {
    params: ParamVector,
    slopes: Vec<f64>,
    f: Pmf,
    d: PathDerivatives,
}

impl Context {
    fn new(p: &[f64], slopes: &[f64]) -> Result<Self> {
        let params = ParamVector::new(p.to_vec())?;
        if slopes.len() != params.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), got: slopes.len() });
        }
        let f = compute_pmf(&params);
        let d = LeaveOuts::new(&params).derivatives(slopes);
        Ok(Self { params, slopes: slopes.to_vec(), f, d })
    }

    fn n(&self) -> usize {
        self.params.len()
    }

    fn path(&self) -> Result<AffinePath> {
        AffinePath::maximal(self.params.clone(), self.slopes.clone(), 0.0)
    }
}

fn single(name: &str, margin: f64, scale: f64) -> MarginReport {
    MarginReport::from_terms(name, &[(0, margin, scale)], Tolerance::DEFAULT)
}

/// Runs one checker at `(p, slopes)`. `Ok(None)` means the checker does not apply
/// (for instance an `n ≥ 2` inequality at `n = 1`).
fn evaluate(checker: CheckerId, ctx: &Context, q: Option<f64>) -> Result<Option<MarginReport>> {
    let name = checker.as_str();
    let n = ctx.n();
    let (f, d) = (&ctx.f, &ctx.d);
    let needs_pair = n >= 2;
    let report = match checker {
        CheckerId::EntropyConcavity => {
            let (h2, scale) =
                shannon_second_with_scale(f, &d.first_pmf_derivative(), &d.second_pmf_derivative())?;
            single(name, -h2, scale)
        }
        CheckerId::HessianNsd => {
            let h = entropy_hessian(&ctx.params)?;
            let scale = h.matrix.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            single(name, h.psd_margin, scale)
        }
        CheckerId::UkIdentity if needs_pair => {
            let (h2, scale) =
                shannon_second_with_scale(f, &d.first_pmf_derivative(), &d.second_pmf_derivative())?;
            let u = uk_from(f, d)?;
            let last = n as isize - 1;
            let dropped = d.g_at(last).powi(2) / f.get(last) + d.g_at(0).powi(2) / f.get(1);
            let rhs = -u.sum() - dropped;
            let tol = Tolerance { abs_floor: 1e-12, rel: 1e-9 };
            MarginReport::from_terms(name, &[(0, -(h2 - rhs).abs(), scale.max(dropped))], tol)
        }
        CheckerId::UkNonnegative if needs_pair => uk_from(f, d)?.check_nonnegative(),
        CheckerId::UkTransform if needs_pair => uk_from(f, d)?.check_transform(),
        CheckerId::UkAbc if needs_pair => uk_from(f, d)?.check_abc(),
        CheckerId::UkAlphaBetaGamma if needs_pair => uk_from(f, d)?.check_alpha_beta_gamma(),
        CheckerId::LogConcavity => check_log_concavity(f),
        CheckerId::TwoFoldLogConcavity => check_two_fold_log_concavity(f),
        CheckerId::TwoFoldForms => check_two_fold_forms(f),
        CheckerId::C1 => check_c1(f),
        CheckerId::C1bar => check_c1bar(f),
        CheckerId::C1ProductIdentity => check_c1_product_identity(f),
        CheckerId::Condition4 if needs_pair => condition4_from(f, d),
        CheckerId::CorollaryFgh if needs_pair => corollary_from(f, d),
        CheckerId::CorollaryIdentity if needs_pair => check_corollary_identity(&ctx.params, &ctx.slopes)?,
        CheckerId::CijNonpositive if needs_pair => check_cij_nonpositive(&ctx.params)?,
        CheckerId::QuadraticDecomposition if n == 2 => check_quadratic_decomposition_n2(&ctx.params, 0)?.margins,
        CheckerId::MonotoneWorstCase if needs_pair && n <= SIGN_ENUMERATION_LIMIT => {
            let abs: Vec<f64> = ctx.slopes.iter().map(|s| s.abs()).collect();
            check_monotone_worst_case(&ctx.params, &abs)?
        }
        CheckerId::RenyiConcavity | CheckerId::TsallisConcavity => {
            let q = q.ok_or_else(|| Error::InvalidConfig(format!("{name} needs a q value")))?;
            let kind = checker.q_kind().expect("q checker");
            let (h2, scale) = q_second_with_scale(&ctx.path()?, 0.0, &EntropySpec::new(kind, q)?)?;
            single(name, -h2, scale)
        }
        CheckerId::TsallisChainRule => {
            let q = q.ok_or_else(|| Error::InvalidConfig(format!("{name} needs a q value")))?;
            chain_rule_check(&ctx.path()?, 0.0, q)?
        }
        _ => return Ok(None),
    };
    Ok(Some(report))
}

/// Runs one checker at the point `p` with direction `slopes`. `Ok(None)` means the checker
/// does not apply at this `n`.
pub fn evaluate_checker(checker: CheckerId, p: &[f64], slopes: &[f64], q: Option<f64>) -> Result<Option<MarginReport>> {
    evaluate(checker, &Context::new(p, slopes)?, q)
}

/// A reproducible violation found by a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleCertificate {
    pub config_hash: String,
    pub instance_id: usize,
    pub inequality: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub p: Vec<f64>,
    pub slopes: Vec<f64>,
    pub t: f64,
    /// Index of the worst margin within the checker's report.
    pub k: i64,
    pub margin: f64,
    pub tolerance: f64,
    /// The margin recomputed from the stored tuple alone.
    pub reevaluated_margin: f64,
}

/// Recomputes a certificate's worst margin from `(p, slopes, q, inequality)`.
pub fn reevaluate_certificate(cert: &CounterexampleCertificate) -> Result<f64> {
    let checker: CheckerId = cert.inequality.parse()?;
    let report = evaluate_checker(checker, &cert.p, &cert.slopes, cert.q)?.ok_or_else(|| {
        Error::InvalidConfig(format!("{} does not apply at n = {}", cert.inequality, cert.p.len()))
    })?;
    report
        .margin_at(cert.k)
        .ok_or(Error::IndexOutOfRange { index: cert.k.max(0) as usize, len: report.margins.len() })
}

/// Aggregate over all instances for one checker (and order `q` where relevant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub evaluated: usize,
    /// Instances where the checker does not apply.
    pub skipped: usize,
    /// Instances where evaluation failed, e.g. a degenerate boundary.
    pub errors: usize,
    pub worst_margin: Option<f64>,
    pub worst_instance: Option<usize>,
    pub worst_k: Option<i64>,
    pub tolerance_at_worst: Option<f64>,
    /// Instances with some margin below `-tol`.
    pub failures: usize,
    /// Instances with some margin below `-CERTIFICATE_FACTOR · tol`.
    pub violations: usize,
}

impl CheckSummary {
    fn new() -> Self {
        Self {
            evaluated: 0,
            skipped: 0,
            errors: 0,
            worst_margin: None,
            worst_instance: None,
            worst_k: None,
            tolerance_at_worst: None,
            failures: 0,
            violations: 0,
        }
    }
}

/// One row of the margin dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub instance_id: usize,
    pub inequality: String,
    pub k: i64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: ScanConfig,
    pub generator: String,
    pub instances: usize,
    /// Keyed by checker id, with `@q=<q>` appended for order-dependent checkers.
    pub checks: BTreeMap<String, CheckSummary>,
    pub violation_count: usize,
    /// Sorted by instance index, then key; at most `max_certificates`.
    pub certificates: Vec<CounterexampleCertificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

impl ScanReport {
    /// Compact deterministic JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn worst_margin(&self, key: &str) -> Option<f64> {
        self.checks.get(key).and_then(|c| c.worst_margin)
    }
}

/// Margin dump as CSV with header `instance_id,inequality,k,margin`.
pub fn margins_to_csv(rows: &[MarginRow]) -> String {
    let mut out = String::from("instance_id,inequality,k,margin\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:e}\n", r.instance_id, r.inequality, r.k, r.margin));
    }
    out
}

fn check_key(checker: CheckerId, q: Option<f64>) -> String {
    match q {
        Some(q) => format!("{}@q={q}", checker.as_str()),
        None => checker.as_str().to_string(),
    }
}

pub fn run_scan(config: &ScanConfig) -> Result<ScanReport> {
    run_scan_with(config, |_| {})
}

/// Runs a scan and also returns every margin row.
pub fn run_scan_collect(config: &ScanConfig) -> Result<(ScanReport, Vec<MarginRow>)> {
    let mut rows = Vec::new();
    let report = run_scan_with(config, |r| rows.push(r))?;
    Ok((report, rows))
}

/// Runs a scan, handing every margin to `on_margin` in instance order.
pub fn run_scan_with(config: &ScanConfig, mut on_margin: impl FnMut(MarginRow)) -> Result<ScanReport> {
    let checkers = expand_checkers(&config.inequality_set)?;
    config.validate()?;
    let needs_q = checkers.iter().any(|c| c.q_kind().is_some());
    let q_grid = config.q_grid.clone().unwrap_or_default();
    if needs_q && q_grid.is_empty() {
        return Err(Error::InvalidConfig("renyi/tsallis checkers need a non-empty q_grid".into()));
    }
    let jobs: Vec<(CheckerId, Option<f64>)> = checkers
        .iter()
        .flat_map(|&c| -> Vec<(CheckerId, Option<f64>)> {
            if c.q_kind().is_some() {
                q_grid.iter().map(|&q| (c, Some(q))).collect()
            } else {
                vec![(c, None)]
            }
        })
        .collect();

    let hash = config.hash();
    let instances = generate_instances(config)?;
    let mut checks: BTreeMap<String, CheckSummary> =
        jobs.iter().map(|&(c, q)| (check_key(c, q), CheckSummary::new())).collect();
    let mut certificates = Vec::new();
    let mut violation_count = 0;

    for inst in &instances {
        let ctx = Context::new(&inst.p, &inst.slopes)?;
        for &(checker, q) in &jobs {
            let key = check_key(checker, q);
            let summary = checks.get_mut(&key).expect("key registered");
            let report = match evaluate(checker, &ctx, q) {
                Ok(Some(r)) => r,
                Ok(None) => {
                    summary.skipped += 1;
                    continue;
                }
                Err(_) => {
                    summary.errors += 1;
                    continue;
                }
            };
            summary.evaluated += 1;
            for &(k, margin) in &report.margins {
                on_margin(MarginRow { instance_id: inst.id, inequality: key.clone(), k, margin });
            }
            let Some(&(k, worst)) = report.margins.iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
                continue;
            };
            if summary.worst_margin.is_none_or(|w| worst < w) {
                summary.worst_margin = Some(worst);
                summary.worst_instance = Some(inst.id);
                summary.worst_k = Some(k);
                summary.tolerance_at_worst = Some(report.tolerance);
            }
            if !report.holds {
                summary.failures += 1;
            }
            if worst < -CERTIFICATE_FACTOR * report.tolerance {
                summary.violations += 1;
                violation_count += 1;
                if certificates.len() < config.max_certificates {
                    let mut cert = CounterexampleCertificate {
                        config_hash: hash.clone(),
                        instance_id: inst.id,
                        inequality: checker.as_str().to_string(),
                        q,
                        p: inst.p.clone(),
                        slopes: inst.slopes.clone(),
                        t: inst.t,
                        k,
                        margin: worst,
                        tolerance: report.tolerance,
                        reevaluated_margin: f64::NAN,
                    };
                    cert.reevaluated_margin = reevaluate_certificate(&cert)?;
                    certificates.push(cert);
                }
            }
        }
    }

    Ok(ScanReport {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        config: config.clone(),
        generator: "ChaCha20 (rand_chacha), seed_from_u64(seed), stream = instance index".into(),
        instances: instances.len(),
        checks,
        violation_count,
        certificates,
        caveat: needs_q.then(|| CRITICAL_Q_CAVEAT.to_string()),
    })
}

/// Result of the outer bisection over `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalQEstimate {
    pub schema_version: u32,
    pub family: PathFamily,
    pub kind: EntropyKind,
    pub config_hash: String,
    pub result: CriticalQResult,
    /// Monotonicity of the predicate in `q` is assumed, not enforced.
    pub caveat: String,
}

/// Bisects on "the scan finds a violation" over `bracket`, using `config` with its family,
/// checker set and `q_grid` replaced. Fails with [`Error::NoSignChange`] when the predicate
/// is constant on the bracket, which is always the case for `shannon`.
pub fn estimate_critical_q(
    config: &ScanConfig,
    family: PathFamily,
    kind: EntropyKind,
    bracket: (f64, f64),
) -> Result<CriticalQEstimate> {
    let mut base = config.clone();
    base.family = family;
    base.max_certificates = 0;
    base.inequality_set = vec![match kind {
        EntropyKind::Shannon => CheckerId::EntropyConcavity,
        EntropyKind::Renyi => CheckerId::RenyiConcavity,
        EntropyKind::Tsallis => CheckerId::TsallisConcavity,
    }
    .as_str()
    .to_string()];
    base.q_grid = None;
    base.validate()?;
    let hash = base.hash();
    let predicate = |q: f64| -> Result<i8> {
        let mut c = base.clone();
        if kind != EntropyKind::Shannon {
            c.q_grid = Some(vec![q]);
        }
        Ok(if run_scan(&c)?.violation_count > 0 { 1 } else { -1 })
    };
    let family_id = format!("{}_{}_scan", family.as_str(), kind.as_str());
    let result = bisect_sign(family_id, predicate, bracket, BISECTION_WIDTH)?;
    Ok(CriticalQEstimate {
        schema_version: SCHEMA_VERSION,
        family,
        kind,
        config_hash: hash,
        result,
        caveat: CRITICAL_Q_CAVEAT.to_string(),
    })
}
