//! Closed forms the property suites compare against.

use std::f64::consts::PI;

use nonlocal_tv::quadrature::GaussLegendre;

/// Perimeter of an interval of length `len` on the line: `2 len^{1-s} / (s(1-s))`.
pub fn interval_perimeter(len: f64, s: f64) -> f64 {
    2.0 * len.powf(1.0 - s) / (s * (1.0 - s))
}

/// Curvature at an endpoint of an interval of length `len`: the two
/// complementary half-lines at distances 0 and `len` contribute
/// `(len^{-s} + len^{-s}) / s` once the near half cancels.
pub fn interval_endpoint_curvature(len: f64, s: f64) -> f64 {
    2.0 * len.powf(-s) / s
}

/// Curvature of the unit disc in the plane,
/// `(4/s) ∫_0^{π/2} (2 sin φ)^{-s} dφ`. The substitution `φ = v^q`,
/// `q = 1/(1-s)`, removes the endpoint singularity.
pub fn unit_disc_curvature(s: f64) -> f64 {
    let q = 1.0 / (1.0 - s);
    let top = (PI / 2.0).powf(1.0 / q);
    let rule = GaussLegendre::new(64);
    let integral = rule.integrate(0.0, top, |v| {
        let phi = v.powf(q);
        let ratio = if phi < 1e-12 { 1.0 } else { phi / phi.sin() };
        q * ratio.powf(s) * 2f64.powf(-s)
    });
    4.0 / s * integral
}

/// Curvature of a disc of radius `r`.
pub fn disc_curvature(r: f64, s: f64) -> f64 {
    r.powf(-s) * unit_disc_curvature(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((interval_perimeter(1.0, 0.5) - 8.0).abs() < 1e-12);
        assert!((interval_endpoint_curvature(2.0, 0.5) - 2f64.sqrt() * 2.0).abs() < 1e-12);
        // s = 1/2: 2^{5/2} B(1/4, 1/2) / 2 with B(1/4, 1/2) = 5.2441151...
        assert!((unit_disc_curvature(0.5) - 2f64.powf(2.5) * 5.244_115_108_584_24 / 2.0).abs() < 1e-8);
    }
}
