//! Centered finite differences used as independent oracles for analytic derivatives.

/// Default step for first derivatives.
pub const FIRST_STEP: f64 = 1e-5;
/// Default step for second derivatives.
pub const SECOND_STEP: f64 = 1e-4;

/// `(φ(t+h) - φ(t-h)) / 2h`.
pub fn central_first(phi: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (phi(t + h) - phi(t - h)) / (2.0 * h)
}

/// `(φ(t+h) - 2φ(t) + φ(t-h)) / h²`.
pub fn central_second(phi: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (phi(t + h) - 2.0 * phi(t) + phi(t - h)) / (h * h)
}

/// Fourth-order five-point stencil for the first derivative.
pub fn five_point_first(phi: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (-phi(t + 2.0 * h) + 8.0 * phi(t + h) - 8.0 * phi(t - h) + phi(t - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order five-point stencil for the second derivative.
pub fn five_point_second(phi: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (-phi(t + 2.0 * h) + 16.0 * phi(t + h) - 30.0 * phi(t) + 16.0 * phi(t - h)
        - phi(t - 2.0 * h))
        / (12.0 * h * h)
}

/// Elementwise centered first differences of a vector-valued map.
pub fn central_first_vec(phi: impl Fn(f64) -> Vec<f64>, t: f64, h: f64) -> Vec<f64> {
    let (up, down) = (phi(t + h), phi(t - h));
    up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// Elementwise centered second differences of a vector-valued map.
pub fn central_second_vec(phi: impl Fn(f64) -> Vec<f64>, t: f64, h: f64) -> Vec<f64> {
    let (up, mid, down) = (phi(t + h), phi(t), phi(t - h));
    up.iter()
        .zip(&mid)
        .zip(&down)
        .map(|((a, m), b)| (a - 2.0 * m + b) / (h * h))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact_enough() {
        let cubic = |t: f64| t * t * t - 2.0 * t;
        assert!((central_first(cubic, 1.0, 1e-5) - 1.0).abs() < 1e-8);
        assert!((central_second(cubic, 1.0, 1e-4) - 6.0).abs() < 1e-6);
        assert!((five_point_first(f64::sin, 0.3, 1e-3) - 0.3f64.cos()).abs() < 1e-12);
        assert!((five_point_second(f64::sin, 0.3, 1e-3) + 0.3f64.sin()).abs() < 1e-8);
    }
}
