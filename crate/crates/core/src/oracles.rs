//! Closed-form reference values: ball and annulus eigenvalues, the square's
//! Cheeger constant, the symmetrization lower bound and the first-order hole
//! coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Volume `b_n` of the unit ball in ℝⁿ, for `n ≤ 3`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("unit_ball_volume: dimension {n} unsupported"),
    }
}

/// Surface measure `ω_{n-1}` of the unit sphere in ℝⁿ, for `1 ≤ n ≤ 3`.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unit_sphere_area: dimension {n} unsupported"),
    }
}

/// Verifies `ω_{n-1} = n b_n` for the hard-coded constants.
pub fn check_constants() -> bool {
    (1..=3).all(|n| (unit_sphere_area(n) - n as f64 * unit_ball_volume(n)).abs() < 1e-14)
}

pub fn ball_lambda(n: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {r}")));
    }
    Ok(n as f64 / r)
}

/// `n (r^{n-1} + ε^{n-1}) / (r^n - ε^n)` for the concentric annulus `B(r) \ B̄(ε)`.
pub fn annulus_lambda(n: usize, r: f64, eps: f64) -> Result<f64> {
    if !(eps >= 0.0 && eps < r) {
        return Err(Error::Domain(format!("annulus needs 0 <= eps < r, got r={r}, eps={eps}")));
    }
    let k = n as i32;
    Ok(n as f64 * (r.powi(k - 1) + eps.powi(k - 1)) / (r.powi(k) - eps.powi(k)))
}

/// Radius of the corner arcs of the Cheeger set of the unit square, the
/// smaller root of `(4 - π) r² - 4 r + 1 = 0`.
pub fn square_arc_radius() -> f64 {
    (2.0 - PI.sqrt()) / (4.0 - PI)
}

/// Cheeger constant of the square of side `a`.
pub fn square_lambda(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("side must be positive, got {a}")));
    }
    Ok((4.0 - PI) / (2.0 - PI.sqrt()) / a)
}

/// Area of the Cheeger set of the square of side `a` (the square with its
/// corners rounded off by arcs of radius `a·r`).
pub fn square_cheeger_set_area(a: f64) -> f64 {
    let r = square_arc_radius();
    a * a * (1.0 - (4.0 - PI) * r * r)
}

/// Symmetrization lower bound `n (b_n / |Ω|)^{1/n}`, attained by balls.
pub fn lower_bound(n: usize, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::Domain(format!("volume must be positive, got {volume}")));
    }
    Ok(n as f64 * (unit_ball_volume(n) / volume).powf(1.0 / n as f64))
}

/// Position of a hole centre relative to an eigenset `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleRegime {
    /// Centre in the interior of `A`.
    Interior,
    /// Centre in the interior of `Ω \ A`.
    Exterior,
    /// Centre on the reduced boundary of `A`.
    Boundary,
}

impl std::str::FromStr for HoleRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Self::Interior),
            "exterior" => Ok(Self::Exterior),
            "boundary" => Ok(Self::Boundary),
            other => Err(Error::Domain(format!("unknown hole regime {other:?}"))),
        }
    }
}

/// Coefficient of `ε^{n-1}` bounding `λ(Ω \ B̄_x(ε)) - λ(Ω)` for a hole centred in
/// the given regime. Exact (attained) for the interior of a calibrable ball.
pub fn hole_slope(regime: HoleRegime, n: usize, eigenset_volume: f64) -> Result<f64> {
    if !(eigenset_volume > 0.0) {
        return Err(Error::Domain(format!("eigenset volume must be positive, got {eigenset_volume}")));
    }
    Ok(match regime {
        HoleRegime::Interior => unit_sphere_area(n) / eigenset_volume,
        HoleRegime::Exterior => 0.0,
        HoleRegime::Boundary => (unit_sphere_area(n) - 2.0 * unit_ball_volume(n - 1)) / (2.0 * eigenset_volume),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_relation() {
        assert!(check_constants());
    }

    #[test]
    fn ball_values() {
        assert_eq!(ball_lambda(2, 1.0).unwrap(), 2.0);
        assert_eq!(ball_lambda(3, 1.0).unwrap(), 3.0);
        assert_eq!(ball_lambda(2, 2.0).unwrap(), 1.0);
        assert!(ball_lambda(2, 0.0).is_err());
    }

    #[test]
    fn annulus_values() {
        assert_eq!(annulus_lambda(2, 1.0, 0.0).unwrap(), 2.0);
        assert_relative_eq!(annulus_lambda(2, 1.0, 0.2).unwrap(), 2.5, epsilon = 1e-14);
        assert_relative_eq!(annulus_lambda(3, 1.0, 0.1).unwrap(), 3.0 * 1.01 / 0.999, epsilon = 1e-14);
        assert!(annulus_lambda(2, 1.0, 1.0).is_err());
        assert!(annulus_lambda(2, 1.0, -0.1).is_err());
    }

    #[test]
    fn annulus_first_order_coefficient_matches_hole_slope() {
        // d/dε λ(B_r \ B_ε) at ε = 0 equals ω_{n-1}/|B_r| in n = 2.
        for &r in &[0.5, 1.0, 2.0] {
            let e = 1e-6;
            let fd = (annulus_lambda(2, r, e).unwrap() - ball_lambda(2, r).unwrap()) / e;
            let slope = hole_slope(HoleRegime::Interior, 2, PI * r * r).unwrap();
            assert_relative_eq!(fd, slope, max_relative = 1e-4);
            assert_relative_eq!(slope, 2.0 / (r * r), epsilon = 1e-12);
        }
    }

    #[test]
    fn square_root_of_quadratic() {
        let r = square_arc_radius();
        assert!(((4.0 - PI) * r * r - 4.0 * r + 1.0).abs() < 1e-14);
        // The other root exceeds 1/2 and cannot fit in the unit square.
        let other = (2.0 + PI.sqrt()) / (4.0 - PI);
        assert!(other > 0.5 && r < 0.5);
        let lam = square_lambda(1.0).unwrap();
        assert_relative_eq!(lam, 1.0 / r, epsilon = 1e-12);
        assert!((lam - 3.772454).abs() < 1e-6);
        assert_relative_eq!(square_lambda(2.0).unwrap(), lam / 2.0, epsilon = 1e-14);
        // The Cheeger ratio of the rounded square reproduces the constant.
        let perim = 4.0 - 8.0 * r + 2.0 * PI * r;
        assert_relative_eq!(perim / square_cheeger_set_area(1.0), lam, epsilon = 1e-12);
        assert!(lower_bound(2, 1.0).unwrap() <= lam);
    }

    #[test]
    fn lower_bound_values() {
        assert_relative_eq!(lower_bound(2, PI).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(lower_bound(2, 1.0).unwrap(), 2.0 * PI.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(lower_bound(3, 4.0 * PI / 3.0).unwrap(), 3.0, epsilon = 1e-14);
        assert!(lower_bound(2, 1e30).unwrap() < 1e-12);
    }

    #[test]
    fn hole_slopes() {
        assert_relative_eq!(hole_slope(HoleRegime::Interior, 2, PI).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(hole_slope(HoleRegime::Exterior, 2, PI).unwrap(), 0.0);
        let b = hole_slope(HoleRegime::Boundary, 2, PI).unwrap();
        assert_relative_eq!(b, (2.0 * PI - 4.0) / (2.0 * PI), epsilon = 1e-14);
        assert!((b - 0.3634).abs() < 1e-4);
        assert!("sideways".parse::<HoleRegime>().is_err());
    }

    #[test]
    fn oracles_scale_inversely() {
        for &t in &[0.5, 2.0, 3.0] {
            assert_relative_eq!(ball_lambda(2, t).unwrap(), ball_lambda(2, 1.0).unwrap() / t);
            assert_relative_eq!(annulus_lambda(2, t, 0.2 * t).unwrap(), annulus_lambda(2, 1.0, 0.2).unwrap() / t, max_relative = 1e-14);
            assert_relative_eq!(square_lambda(t).unwrap(), square_lambda(1.0).unwrap() / t);
            assert_relative_eq!(lower_bound(2, PI * t * t).unwrap(), lower_bound(2, PI).unwrap() / t, max_relative = 1e-14);
        }
    }
}
