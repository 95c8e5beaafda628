//! 1-capacity of compact sets.
//!
//! `cap₁(K)` is the infimum of `∫|∇v|` over compactly supported `v` with
//! `v ≥ 1` on `K`, which equals the least perimeter of a set enclosing `K`.
//! On the grid this becomes a total-variation program with a pointwise lower
//! bound given by the occupancy of `K` and `v = 0` on the grid frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, LastResiduals, Result};
use crate::geometry::{dilate, rasterize, AnalyticTag, CompactSet, GridDomain, GridSpec, Shape, MARGIN_CELLS};
use crate::oracles::{unit_ball_volume, unit_sphere_area};
use crate::primal_dual::{self, BoxTv, Crop, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityOptions {
    /// Stop once the certified gap is below this fraction of the value.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-6, max_iter: 200_000, check_every: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// Value of the best enclosure found, an upper bound on the discrete optimum.
    pub value: f64,
    /// Certified lower bound on the discrete optimum.
    pub lower: f64,
    pub iterations: usize,
}

/// Minimal total variation of `v ∈ [occ_K, 1]` vanishing on the grid frame.
pub fn cap1_variational(k: &CompactSet, spec: &GridSpec) -> Result<f64> {
    cap1_variational_with(k, spec, &CapacityOptions::default()).map(|c| c.value)
}

pub fn cap1_variational_with(k: &CompactSet, spec: &GridSpec, opts: &CapacityOptions) -> Result<CapacityEstimate> {
    spec.same_grid(&k.spec)?;
    if !(opts.rel_tol > 0.0) || opts.max_iter == 0 || opts.check_every == 0 {
        return Err(Error::Domain("capacity options must be positive".into()));
    }
    if k.touches_frame(MARGIN_CELLS as usize) {
        return Err(Error::Bounds(format!("compact set lies within {MARGIN_CELLS} cells of the grid frame")));
    }
    // Enclosures never leave the bounding box of K, so two extra layers are
    // ample, and the frame stays outside the box.
    let grown = dilate(spec, &dilate(spec, &k.occupancy));
    let crop = match Crop::around(spec, |i| grown[i] > 0.0) {
        Some(c) => c,
        None => return Ok(CapacityEstimate { value: 0.0, lower: 0.0, iterations: 0 }),
    };
    let n = crop.spec.len();
    let lo = crop.gather(&k.occupancy);
    let hi: Vec<f64> = (0..n).map(|i| if crop.is_padding(i) { 0.0 } else { 1.0 }).collect();
    let prob = BoxTv { spec: crop.spec.clone(), ext: None, c: vec![0.0; n], lo: lo.clone(), hi };
    let settings = Settings { tol: 0.0, max_iter: opts.max_iter, check_every: opts.check_every, ..Settings::default() };
    let y0 = vec![0.0; crop.spec.dim * n];
    let rel = opts.rel_tol;
    let mut stop = |s: &primal_dual::Snapshot| s.primal - s.dual <= rel * s.primal.abs();
    let mut enclosures = |x: &[f64]| -> Vec<Vec<f64>> {
        [0.25f64, 0.5, 0.75].iter().map(|t| x.iter().zip(&lo).map(|(v, l)| f64::max((v / t).min(1.0), *l)).collect()).collect()
    };
    let out = primal_dual::run(&prob, &lo, &y0, &settings, &mut enclosures, &mut stop);
    let hv = spec.cell_volume();
    if out.primal - out.dual > rel * out.primal.abs() {
        return Err(Error::Convergence(LastResiduals {
            gap_per_volume: (out.primal - out.dual) * hv,
            primal_value: out.primal * hv,
            iterations: out.iterations,
        }));
    }
    Ok(CapacityEstimate { value: out.primal * hv, lower: out.dual * hv, iterations: out.iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallCapacity {
    pub value: f64,
    /// Index of the largest ball.
    pub dominant: usize,
    /// `ω_{n−1} ε_{i₀}^{n−1}`.
    pub dominant_term: f64,
    /// Set when the balls overlap and the value came from the variational solver.
    pub overlap_fallback: bool,
}

/// Capacity of a union of closed balls.
///
/// For pairwise disjoint balls this is `Σ ω_{n−1} ε_i^{n−1}`. Overlapping
/// balls are rasterized on `spec` and handed to [`cap1_variational`], and
/// the result carries `overlap_fallback = true`.
pub fn cap1_balls(centers: &[Vec<f64>], radii: &[f64], spec: &GridSpec) -> Result<BallCapacity> {
    if centers.len() != radii.len() {
        return Err(Error::Domain(format!("{} centres but {} radii", centers.len(), radii.len())));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::Domain(format!("ball radius must be positive, got {r}")));
    }
    let n = spec.dim;
    if let Some(c) = centers.iter().find(|c| c.len() != n) {
        return Err(Error::Domain(format!("centre {c:?} does not have {n} coordinates")));
    }
    let omega = unit_sphere_area(n);
    let dominant = (0..radii.len()).max_by(|&a, &b| radii[a].total_cmp(&radii[b])).unwrap_or(0);
    let dominant_term = radii.get(dominant).map_or(0.0, |r| omega * r.powi(n as i32 - 1));
    let overlap = (0..radii.len()).any(|i| {
        (i + 1..radii.len()).any(|j| {
            let d2: f64 = centers[i].iter().zip(&centers[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() <= radii[i] + radii[j]
        })
    });
    if overlap {
        log::warn!("balls overlap; falling back to the variational capacity");
        let mut occupancy = vec![0.0; spec.len()];
        for (c, &r) in centers.iter().zip(radii) {
            let ball = rasterize(&Shape::ball(c, r), spec)?;
            for (o, b) in occupancy.iter_mut().zip(&ball.occupancy) {
                *o = f64::max(*o, *b);
            }
        }
        let k = CompactSet(GridDomain { spec: spec.clone(), occupancy, analytic: AnalyticTag::Generic });
        let value = cap1_variational(&k, spec)?;
        return Ok(BallCapacity { value, dominant, dominant_term, overlap_fallback: true });
    }
    let value = radii.iter().map(|r| omega * r.powi(n as i32 - 1)).sum();
    Ok(BallCapacity { value, dominant, dominant_term, overlap_fallback: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricCheck {
    /// `|K|^{(n−1)/n}`.
    pub lhs: f64,
    /// `C · cap₁(K)` with `C = b_n^{(n−1)/n} / ω_{n−1}`, the value attained by balls.
    pub rhs: f64,
}

/// Both sides of `|K|^{(n−1)/n} ≤ C cap₁(K)` with the ball-sharp constant.
pub fn isoperimetric_bound(k: &CompactSet) -> Result<IsoperimetricCheck> {
    let n = k.spec.dim as f64;
    let volume = k.volume();
    if volume == 0.0 {
        return Ok(IsoperimetricCheck { lhs: 0.0, rhs: 0.0 });
    }
    let cap = cap1_variational(k, &k.spec)?;
    let c = unit_ball_volume(k.spec.dim).powf((n - 1.0) / n) / unit_sphere_area(k.spec.dim);
    Ok(IsoperimetricCheck { lhs: volume.powf((n - 1.0) / n), rhs: c * cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::cube(2, n, -0.5, 0.5).unwrap()
    }

    fn ball(spec: &GridSpec, c: [f64; 2], r: f64) -> CompactSet {
        CompactSet::from_shape(&Shape::ball(&c, r), spec).unwrap()
    }

    #[test]
    fn single_ball_matches_circumference() {
        let g = grid(128);
        let cap = cap1_variational(&ball(&g, [0.0, 0.0], 0.3), &g).unwrap();
        assert!((cap / (2.0 * PI * 0.3) - 1.0).abs() < 0.03, "{cap}");
    }

    #[test]
    fn empty_set_has_zero_capacity() {
        let g = grid(32);
        assert_eq!(cap1_variational(&CompactSet::empty(&g), &g).unwrap(), 0.0);
        assert_eq!(isoperimetric_bound(&CompactSet::empty(&g)).unwrap(), IsoperimetricCheck { lhs: 0.0, rhs: 0.0 });
    }

    #[test]
    fn nearby_balls_are_enclosed_together() {
        // Two discs of radius 0.1 whose gap is much smaller than their
        // radius: the convex hull beats two separate circles.
        let g = grid(128);
        let mut k = ball(&g, [-0.105, 0.0], 0.1);
        let other = ball(&g, [0.105, 0.0], 0.1);
        for (a, b) in k.0.occupancy.iter_mut().zip(&other.occupancy) {
            *a = f64::max(*a, *b);
        }
        let cap = cap1_variational(&k, &g).unwrap();
        let hull = 2.0 * PI * 0.1 + 4.0 * 0.105;
        assert!(cap < 0.99 * 4.0 * PI * 0.1, "{cap}");
        assert!((cap / hull - 1.0).abs() < 0.03, "{cap} vs {hull}");
    }

    #[test]
    fn frame_contact_is_rejected() {
        let g = grid(32);
        let mut k = CompactSet::empty(&g);
        k.0.occupancy[g.flatten([2, 16, 0])] = 1.0;
        assert!(matches!(cap1_variational(&k, &g), Err(Error::Bounds(_))));
    }

    #[test]
    fn ball_formula() {
        let g2 = grid(32);
        let g3 = GridSpec::cube(3, 16, -0.5, 0.5).unwrap();
        let one = cap1_balls(&[vec![0.0, 0.0]], &[0.2], &g2).unwrap();
        assert!((one.value - 2.0 * PI * 0.2).abs() < 1e-15);
        assert!(!one.overlap_fallback);
        let three = cap1_balls(&[vec![0.0; 3]], &[0.2], &g3).unwrap();
        assert!((three.value - 4.0 * PI * 0.04).abs() < 1e-15);
        let two = cap1_balls(&[vec![-0.2, 0.0], vec![0.2, 0.0]], &[0.1, 0.01], &g2).unwrap();
        assert_eq!(two.dominant, 0);
        assert!((two.dominant_term - 2.0 * PI * 0.1).abs() < 1e-15);
        assert!((two.value - 2.0 * PI * 0.11).abs() < 1e-15);
        let tiny = cap1_balls(&[vec![0.0, 0.0]], &[1e-12], &g2).unwrap();
        assert!(tiny.value < 1e-11);
    }

    #[test]
    fn overlapping_balls_fall_back() {
        let g = grid(64);
        let c = cap1_balls(&[vec![-0.05, 0.0], vec![0.05, 0.0]], &[0.1, 0.1], &g).unwrap();
        assert!(c.overlap_fallback);
        assert!(c.value < 4.0 * PI * 0.1 && c.value > 2.0 * PI * 0.1, "{}", c.value);
    }

    #[test]
    fn isoperimetric_sides() {
        let g = grid(128);
        let b = isoperimetric_bound(&ball(&g, [0.0, 0.0], 0.3)).unwrap();
        assert!((b.lhs / b.rhs - 1.0).abs() < 0.03, "{b:?}");
        let sq = CompactSet::from_shape(&Shape::rectangle(&[0.0, 0.0], &[0.5, 0.5]), &g).unwrap();
        let s = isoperimetric_bound(&sq).unwrap();
        assert!(s.lhs < s.rhs, "{s:?}");
    }
}
