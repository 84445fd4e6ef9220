//! Poisson binomial mass functions.
//!
//! The law of `S = X_1 + ... + X_n` with independent `X_i ~ Bernoulli(p_i)` is built by
//! iterative convolution, one component at a time. Leave-one-out and leave-two-out
//! variants (`S^(i)`, `S^(i,j)`) are produced by the same routine with components skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` accepted by [`brute_force_pmf`].
pub const ENUMERATION_LIMIT: usize = 20;

/// Bernoulli parameters `p_1, ..., p_n`, each in `[0, 1]`, with `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyModel);
        }
        for (index, &value) in p.iter().enumerate() {
            // NaN fails the range test as well.
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter { index, value });
            }
        }
        Ok(Self(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Checks that every parameter lies in `[margin, 1 - margin]`.
    pub fn require_interior(&self, margin: f64) -> Result<()> {
        for (index, &value) in self.0.iter().enumerate() {
            let ok = if margin > 0.0 {
                value >= margin && value <= 1.0 - margin
            } else {
                value > 0.0 && value < 1.0
            };
            if !ok {
                return Err(Error::NotInterior { index, value, margin });
            }
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Self {
        p.0
    }
}

/// A finite mass function `f_0, ..., f_m`.
///
/// Indexing through [`Pmf::get`] is total: every index outside `0..=m` reads as zero.
/// Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    /// Wraps raw masses without normalization checks.
    pub fn from_masses(masses: Vec<f64>) -> Self {
        Self(masses)
    }

    /// The point mass at zero (law of an empty sum).
    pub fn point_mass() -> Self {
        Self(vec![1.0])
    }

    /// `f_k`, or `0` when `k` lies outside the support.
    #[inline]
    pub fn get(&self, k: isize) -> f64 {
        if k < 0 {
            return 0.0;
        }
        self.0.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Number of stored masses, `m + 1`.
    pub fn support_size(&self) -> usize {
        self.0.len()
    }

    /// Largest stored index `m`.
    pub fn max_index(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    /// `Σ f_k`. Kept as a diagnostic; masses are never renormalized.
    pub fn total_mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.0.iter().all(|&f| f >= 0.0) && (self.total_mass() - 1.0).abs() <= tol
    }

    /// Shannon entropy `-Σ f_k ln f_k` in nats, with `0 ln 0 = 0`.
    pub fn shannon_entropy(&self) -> f64 {
        -self.0.iter().map(|&f| xlogx(f)).sum::<f64>()
    }
}

/// `U(x) = x ln x` extended by `U(0) = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Convolves the Bernoulli components whose indices are not excluded.
fn convolve_excluding(p: &[f64], skip: impl Fn(usize) -> bool) -> Vec<f64> {
    let active = (0..p.len()).filter(|&i| !skip(i)).count();
    let mut f = vec![0.0; active + 1];
    f[0] = 1.0;
    let mut len = 1;
    for (i, &pi) in p.iter().enumerate() {
        if skip(i) {
            continue;
        }
        let qi = 1.0 - pi;
        // high-to-low so f[k - 1] is still the previous generation
        f[len] = pi * f[len - 1];
        for k in (1..len).rev() {
            f[k] = qi * f[k] + pi * f[k - 1];
        }
        f[0] *= qi;
        len += 1;
    }
    f
}

/// Mass function of `S = Σ X_i`, length `n + 1`.
pub fn compute_pmf(params: &ParamVector) -> Pmf {
    Pmf(convolve_excluding(params.as_slice(), |_| false))
}

/// Mass function of `S^(i) = Σ_{l != i} X_l`, length `n`.
pub fn leave_one_out(params: &ParamVector, i: usize) -> Result<Pmf> {
    params.check_index(i)?;
    Ok(Pmf(convolve_excluding(params.as_slice(), |l| l == i)))
}

/// Mass function of `S^(i,j) = Σ_{l ∉ {i,j}} X_l`, length `n - 1`. Symmetric in `(i, j)`.
pub fn leave_two_out(params: &ParamVector, i: usize, j: usize) -> Result<Pmf> {
    params.check_index(i)?;
    params.check_index(j)?;
    if i == j {
        return Err(Error::InvalidPair(i));
    }
    Ok(Pmf(convolve_excluding(params.as_slice(), |l| l == i || l == j)))
}

/// Enumerates all `2^n` outcomes. Test oracle only; guarded at `n <= 20`.
pub fn brute_force_pmf(params: &ParamVector) -> Result<Pmf> {
    let n = params.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLargeToEnumerate { n, limit: ENUMERATION_LIMIT });
    }
    let p = params.as_slice();
    let mut f = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << n) {
        let mut prob = 1.0;
        for (i, &pi) in p.iter().enumerate() {
            prob *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
        }
        f[mask.count_ones() as usize] += prob;
    }
    Ok(Pmf(f))
}
