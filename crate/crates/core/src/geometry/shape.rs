use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{unit_ball_volume, unit_sphere_area};

/// Analytic description of a domain, used for rasterization and, when the
/// closed form is known, for exact volume and perimeter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Empty,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `B(center, radius) \ B̄(center, inner)`.
    Annulus {
        center: Vec<f64>,
        radius: f64,
        inner: f64,
    },
    /// Axis-aligned box.
    Rectangle {
        center: Vec<f64>,
        sides: Vec<f64>,
    },
    /// `(x² + y²)² < x³` in coordinates `(p - origin) / scale`.
    Ovoid {
        origin: Vec<f64>,
        scale: f64,
    },
    /// Union of balls with fillets: the sublevel set of a smooth minimum
    /// (log-sum-exp with length scale `smoothing`) of the ball distances.
    SmoothUnion {
        centers: Vec<Vec<f64>>,
        radii: Vec<f64>,
        smoothing: f64,
    },
    Union {
        parts: Vec<Shape>,
    },
}

/// Metadata attached to a rasterized domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticTag {
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, radius: f64, inner: f64 },
    Rectangle { center: Vec<f64>, sides: Vec<f64> },
    Ovoid { origin: Vec<f64>, scale: f64 },
    Generic,
}

impl AnalyticTag {
    pub fn volume(&self, dim: usize) -> Option<f64> {
        let k = dim as i32;
        match self {
            Self::Ball { radius, .. } => Some(unit_ball_volume(dim) * radius.powi(k)),
            Self::Annulus { radius, inner, .. } => Some(unit_ball_volume(dim) * (radius.powi(k) - inner.powi(k))),
            Self::Rectangle { sides, .. } => Some(sides.iter().product()),
            // ½∫ cos⁶θ dθ over (-π/2, π/2) = 5π/32.
            Self::Ovoid { scale, .. } if dim == 2 => Some(5.0 * std::f64::consts::PI / 32.0 * scale * scale),
            _ => None,
        }
    }

    pub fn perimeter(&self, dim: usize) -> Option<f64> {
        let k = dim as i32;
        match self {
            Self::Ball { radius, .. } => Some(unit_sphere_area(dim) * radius.powi(k - 1)),
            Self::Annulus { radius, inner, .. } => Some(unit_sphere_area(dim) * (radius.powi(k - 1) + inner.powi(k - 1))),
            Self::Rectangle { sides, .. } => Some(match dim {
                2 => 2.0 * (sides[0] + sides[1]),
                _ => 2.0 * (sides[0] * sides[1] + sides[1] * sides[2] + sides[2] * sides[0]),
            }),
            _ => None,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn box_sdf(p: &[f64], center: &[f64], sides: &[f64]) -> f64 {
    let mut outside = 0.0;
    let mut inside = f64::NEG_INFINITY;
    for d in 0..p.len() {
        let q = (p[d] - center[d]).abs() - 0.5 * sides[d];
        outside += q.max(0.0).powi(2);
        inside = inside.max(q);
    }
    outside.sqrt() + inside.min(0.0)
}

/// Area of `{0 ≤ s ≤ x, 0 ≤ t ≤ y, s² + t² ≤ r²}` for `x, y ≥ 0`.
fn quarter_area(x: f64, y: f64, r: f64) -> f64 {
    let x = x.min(r);
    let y = y.min(r);
    if x * x + y * y <= r * r {
        return x * y;
    }
    let prim = |s: f64| 0.5 * (s * (r * r - s * s).max(0.0).sqrt() + r * r * (s / r).min(1.0).asin());
    let xs = (r * r - y * y).max(0.0).sqrt();
    y * xs + prim(x) - prim(xs)
}

fn signed_quarter(x: f64, y: f64, r: f64) -> f64 {
    x.signum() * y.signum() * quarter_area(x.abs(), y.abs(), r)
}

/// Exact area of a disk centred at the origin intersected with `[x0,x1]×[y0,y1]`.
pub(crate) fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    signed_quarter(x1, y1, r) - signed_quarter(x0, y1, r) - signed_quarter(x1, y0, r) + signed_quarter(x0, y0, r)
}

/// Fraction of the cell `[lo, lo + h]^n` covered by the ball; exact in 2-D,
/// supersampled in 3-D.
fn ball_coverage(center: &[f64], r: f64, lo: &[f64], h: f64, samples: usize) -> f64 {
    let n = lo.len();
    let (mut near, mut far) = (0.0, 0.0);
    for d in 0..n {
        let a = lo[d] - center[d];
        let b = a + h;
        let nd = if a > 0.0 {
            a
        } else if b < 0.0 {
            b
        } else {
            0.0
        };
        near += nd * nd;
        let fd = a.abs().max(b.abs());
        far += fd * fd;
    }
    if near >= r * r {
        return 0.0;
    }
    if far <= r * r {
        return 1.0;
    }
    if n == 2 {
        let a = disk_rect_area(r, lo[0] - center[0], lo[0] + h - center[0], lo[1] - center[1], lo[1] + h - center[1]);
        return (a / (h * h)).clamp(0.0, 1.0);
    }
    supersample(lo, h, samples, |p| p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>() < r * r)
}

pub(crate) fn supersample(lo: &[f64], h: f64, s: usize, inside: impl Fn(&[f64]) -> bool) -> f64 {
    let n = lo.len();
    let total = s.pow(n as u32);
    let mut p = vec![0.0; n];
    let mut hits = 0usize;
    for k in 0..total {
        let mut rem = k;
        for d in 0..n {
            p[d] = lo[d] + ((rem % s) as f64 + 0.5) / s as f64 * h;
            rem /= s;
        }
        if inside(&p) {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

impl Shape {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Self::Ball { center: center.to_vec(), radius }
    }

    pub fn annulus(center: &[f64], radius: f64, inner: f64) -> Self {
        Self::Annulus { center: center.to_vec(), radius, inner }
    }

    pub fn rectangle(center: &[f64], sides: &[f64]) -> Self {
        Self::Rectangle { center: center.to_vec(), sides: sides.to_vec() }
    }

    /// Checks parameters against the grid dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match self {
            Self::Empty => Ok(()),
            Self::Ball { center, radius } => {
                if center.len() != dim || !(*radius > 0.0) {
                    return bad(format!("ball needs a {dim}-d centre and positive radius"));
                }
                Ok(())
            }
            Self::Annulus { center, radius, inner } => {
                if center.len() != dim || !(*inner >= 0.0 && inner < radius) {
                    return bad(format!("annulus needs a {dim}-d centre and 0 <= inner < radius"));
                }
                Ok(())
            }
            Self::Rectangle { center, sides } => {
                if center.len() != dim || sides.len() != dim || sides.iter().any(|s| !(*s > 0.0)) {
                    return bad(format!("rectangle needs {dim}-d centre and positive sides"));
                }
                Ok(())
            }
            Self::Ovoid { origin, scale } => {
                if dim != 2 || origin.len() != 2 || !(*scale > 0.0) {
                    return bad("the ovoid is planar and needs a positive scale".into());
                }
                Ok(())
            }
            Self::SmoothUnion { centers, radii, smoothing } => {
                if centers.is_empty()
                    || centers.len() != radii.len()
                    || centers.iter().any(|c| c.len() != dim)
                    || radii.iter().any(|r| !(*r > 0.0))
                    || !(*smoothing > 0.0)
                {
                    return bad("smooth union needs matching centres/radii and positive smoothing".into());
                }
                Ok(())
            }
            Self::Union { parts } => parts.iter().try_for_each(|p| p.validate(dim)),
        }
    }

    /// Axis-aligned bounding box, `None` for an empty shape.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Self::Empty => None,
            Self::Ball { center, radius } | Self::Annulus { center, radius, .. } => {
                Some((center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect()))
            }
            Self::Rectangle { center, sides } => Some((
                center.iter().zip(sides).map(|(c, s)| c - 0.5 * s).collect(),
                center.iter().zip(sides).map(|(c, s)| c + 0.5 * s).collect(),
            )),
            // x ∈ [0, 1], |y| ≤ max cos³θ sinθ = 3√3/16.
            Self::Ovoid { origin, scale } => {
                let ymax = 3.0 * 3f64.sqrt() / 16.0 + 1e-9;
                Some((vec![origin[0], origin[1] - ymax * scale], vec![origin[0] + scale, origin[1] + ymax * scale]))
            }
            Self::SmoothUnion { centers, radii, smoothing } => {
                let grow = smoothing * (centers.len() as f64).ln();
                let n = centers[0].len();
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for (c, r) in centers.iter().zip(radii) {
                    for d in 0..n {
                        lo[d] = lo[d].min(c[d] - r - grow);
                        hi[d] = hi[d].max(c[d] + r + grow);
                    }
                }
                Some((lo, hi))
            }
            Self::Union { parts } => {
                let mut acc: Option<(Vec<f64>, Vec<f64>)> = None;
                for (lo, hi) in parts.iter().filter_map(Shape::bounding_box) {
                    acc = Some(match acc {
                        None => (lo, hi),
                        Some((a, b)) => {
                            (a.iter().zip(&lo).map(|(x, y)| x.min(*y)).collect(), b.iter().zip(&hi).map(|(x, y)| x.max(*y)).collect())
                        }
                    });
                }
                acc
            }
        }
    }

    /// 1-Lipschitz signed function, negative inside; `None` when unavailable.
    pub fn signed_distance(&self, p: &[f64]) -> Option<f64> {
        match self {
            Self::Empty => Some(f64::INFINITY),
            Self::Ball { center, radius } => Some(dist(p, center) - radius),
            Self::Annulus { center, radius, inner } => {
                let d = dist(p, center);
                Some((d - radius).max(inner - d))
            }
            Self::Rectangle { center, sides } => Some(box_sdf(p, center, sides)),
            Self::Ovoid { .. } => None,
            Self::SmoothUnion { centers, radii, smoothing } => {
                let ds: Vec<f64> = centers.iter().zip(radii).map(|(c, r)| dist(p, c) - r).collect();
                let m = ds.iter().cloned().fold(f64::INFINITY, f64::min);
                let s: f64 = ds.iter().map(|d| (-(d - m) / smoothing).exp()).sum();
                Some(m - smoothing * s.ln())
            }
            Self::Union { parts } => {
                let mut m = f64::INFINITY;
                for part in parts {
                    m = m.min(part.signed_distance(p)?);
                }
                Some(m)
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Self::Ovoid { origin, scale } => {
                let x = (p[0] - origin[0]) / scale;
                let y = (p[1] - origin[1]) / scale;
                let r2 = x * x + y * y;
                r2 * r2 < x * x * x
            }
            Self::Union { parts } => parts.iter().any(|s| s.contains(p)),
            other => other.signed_distance(p).is_some_and(|d| d < 0.0),
        }
    }

    /// Fraction of the cell `[lo, lo + h]^n` inside the shape.
    pub fn coverage(&self, lo: &[f64], h: f64, samples: usize) -> f64 {
        let n = lo.len();
        match self {
            Self::Empty => 0.0,
            Self::Ball { center, radius } => ball_coverage(center, *radius, lo, h, samples),
            Self::Annulus { center, radius, inner } => {
                let outer = ball_coverage(center, *radius, lo, h, samples);
                if outer == 0.0 {
                    return 0.0;
                }
                (outer - ball_coverage(center, *inner, lo, h, samples)).clamp(0.0, 1.0)
            }
            Self::Rectangle { center, sides } => (0..n)
                .map(|d| {
                    let a = center[d] - 0.5 * sides[d];
                    let b = center[d] + 0.5 * sides[d];
                    ((lo[d] + h).min(b) - lo[d].max(a)).max(0.0) / h
                })
                .product::<f64>()
                .clamp(0.0, 1.0),
            Self::Ovoid { .. } => {
                let (blo, bhi) = self.bounding_box().expect("ovoid has a box");
                if (0..n).any(|d| lo[d] > bhi[d] || lo[d] + h < blo[d]) {
                    return 0.0;
                }
                supersample(lo, h, samples, |p| self.contains(p))
            }
            Self::Union { parts } => {
                let covs: Vec<f64> = parts.iter().map(|s| s.coverage(lo, h, samples)).collect();
                let nonzero = covs.iter().filter(|&&c| c > 0.0).count();
                if covs.iter().any(|&c| c >= 1.0) {
                    1.0
                } else if nonzero <= 1 {
                    covs.iter().cloned().fold(0.0, f64::max)
                } else {
                    supersample(lo, h, samples, |p| self.contains(p))
                }
            }
            Self::SmoothUnion { .. } => {
                let c: Vec<f64> = lo.iter().map(|x| x + 0.5 * h).collect();
                let sd = self.signed_distance(&c).expect("smooth union has a distance");
                let half_diag = 0.5 * h * (n as f64).sqrt();
                if sd <= -half_diag {
                    1.0
                } else if sd >= half_diag {
                    0.0
                } else {
                    supersample(lo, h, samples, |p| self.contains(p))
                }
            }
        }
    }

    pub fn analytic_tag(&self) -> AnalyticTag {
        match self.clone() {
            Self::Ball { center, radius } => AnalyticTag::Ball { center, radius },
            Self::Annulus { center, radius, inner } => AnalyticTag::Annulus { center, radius, inner },
            Self::Rectangle { center, sides } => AnalyticTag::Rectangle { center, sides },
            Self::Ovoid { origin, scale } => AnalyticTag::Ovoid { origin, scale },
            _ => AnalyticTag::Generic,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_rect_area_matches_known_pieces() {
        // Full disk inside a big box.
        assert!((disk_rect_area(1.0, -2.0, 2.0, -2.0, 2.0) - PI).abs() < 1e-14);
        // Quarter disk.
        assert!((disk_rect_area(1.0, 0.0, 2.0, 0.0, 2.0) - PI / 4.0).abs() < 1e-14);
        // Half disk.
        assert!((disk_rect_area(1.0, -2.0, 2.0, 0.0, 2.0) - PI / 2.0).abs() < 1e-14);
        // Circular segment: x > 0.5 cuts area r²acos(d) - d√(1-d²).
        let seg = (0.5f64).acos() - 0.5 * (0.75f64).sqrt();
        assert!((disk_rect_area(1.0, 0.5, 2.0, -2.0, 2.0) - seg).abs() < 1e-14);
    }

    #[test]
    fn exact_and_supersampled_coverage_agree() {
        let ball = Shape::ball(&[0.013, -0.021], 0.37);
        let h = 0.05;
        for i in -10..10 {
            for j in -10..10 {
                let lo = [i as f64 * h, j as f64 * h];
                let exact = ball.coverage(&lo, h, 16);
                // Each sample column of a convex set is off by at most one sample.
                let sampled = supersample(&lo, h, 256, |p| ball.contains(p));
                assert!((exact - sampled).abs() <= 1.0 / 256.0, "{exact} vs {sampled}");
            }
        }
    }

    #[test]
    fn ovoid_contains_and_area() {
        let ov = Shape::Ovoid { origin: vec![0.0, 0.0], scale: 1.0 };
        assert!(ov.contains(&[0.5, 0.0]));
        assert!(!ov.contains(&[-0.1, 0.0]));
        assert!(!ov.contains(&[0.5, 0.4]));
        let area = ov.analytic_tag().volume(2).unwrap();
        assert!((area - 5.0 * PI / 32.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_union_is_superset_of_balls() {
        let s = Shape::SmoothUnion { centers: vec![vec![0.0, 0.0], vec![0.5, 0.0]], radii: vec![0.3, 0.3], smoothing: 0.05 };
        assert!(s.contains(&[0.25, 0.0]));
        assert!(s.contains(&[0.0, 0.29]));
        assert!(!s.contains(&[0.0, 0.5]));
    }
}
