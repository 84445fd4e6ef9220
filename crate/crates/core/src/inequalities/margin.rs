use serde::{Deserialize, Serialize};

/// `tol = max(abs_floor, rel · scale)`, where `scale` is the largest absolute monomial
/// entering the inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_floor: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const DEFAULT: Tolerance = Tolerance { abs_floor: 1e-13, rel: 1e-10 };

    pub fn for_scale(&self, scale: f64) -> f64 {
        self.abs_floor.max(self.rel * scale)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Per-index margins of a named inequality, oriented so that `margin >= 0` means it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub name: String,
    pub margins: Vec<(i64, f64)>,
    /// `None` when there are no margins.
    pub worst: Option<f64>,
    pub tolerance: f64,
    pub holds: bool,
}

impl MarginReport {
    /// Builds a report from `(index, margin, scale)` triples.
    pub fn from_terms(name: impl Into<String>, terms: &[(i64, f64, f64)], tol: Tolerance) -> Self {
        let scale = terms.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
        let margins: Vec<(i64, f64)> = terms.iter().map(|&(k, m, _)| (k, m)).collect();
        Self::with_tolerance(name, margins, tol.for_scale(scale))
    }

    pub fn with_tolerance(name: impl Into<String>, margins: Vec<(i64, f64)>, tolerance: f64) -> Self {
        let worst = margins.iter().map(|m| m.1).reduce(f64::min);
        // NaN margins never count as holding
        let holds = match worst {
            None => true,
            Some(w) => w >= -tolerance && margins.iter().all(|m| !m.1.is_nan()),
        };
        Self { name: name.into(), margins, worst, tolerance, holds }
    }

    /// Worst margin, or `+∞` when empty.
    pub fn worst_or_inf(&self) -> f64 {
        self.worst.unwrap_or(f64::INFINITY)
    }

    pub fn margin_at(&self, k: i64) -> Option<f64> {
        self.margins.iter().find(|m| m.0 == k).map(|m| m.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_and_holds() {
        let r = MarginReport::from_terms("x", &[(0, 0.5, 1.0), (1, -1e-12, 1.0)], Tolerance::DEFAULT);
        assert_eq!(r.worst, Some(-1e-12));
        assert_eq!(r.tolerance, 1e-10);
        assert!(r.holds);
        let r = MarginReport::from_terms("x", &[(0, -1e-9, 1.0)], Tolerance::DEFAULT);
        assert!(!r.holds);
        let r = MarginReport::from_terms("x", &[], Tolerance::DEFAULT);
        assert!(r.holds && r.worst.is_none());
        let r = MarginReport::with_tolerance("x", vec![(0, 1.0), (1, f64::NAN)], 0.0);
        assert!(!r.holds);
    }

    #[test]
    fn floor_applies_at_small_scale() {
        assert_eq!(Tolerance::DEFAULT.for_scale(1e-20), 1e-13);
        assert_eq!(Tolerance::DEFAULT.for_scale(10.0), 1e-9);
    }
}
