use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::shape::{AnalyticTag, Shape};
use crate::error::{Error, Result};
use crate::tv_core;

/// Fractional occupancy of a bounded domain on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    pub spec: GridSpec,
    pub occupancy: Vec<f64>,
    pub analytic: AnalyticTag,
}

/// A compact set `K` (holes, symmetric-difference hulls) in the same representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSet(pub GridDomain);

impl Deref for CompactSet {
    type Target = GridDomain;
    fn deref(&self) -> &GridDomain {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub volume: f64,
    pub perimeter: f64,
}

fn samples_per_axis(dim: usize) -> usize {
    if dim == 2 {
        16
    } else {
        8
    }
}

/// Rasterizes `shape` with exact (2-D discs, annuli, boxes) or supersampled
/// cell coverage. Cells away from the boundary get exactly 0 or 1.
pub fn rasterize(shape: &Shape, spec: &GridSpec) -> Result<GridDomain> {
    spec.validate()?;
    shape.validate(spec.dim)?;
    let mut occupancy = vec![0.0; spec.len()];
    if let Some((lo, hi)) = shape.bounding_box() {
        spec.check_fits(&lo, &hi)?;
        let h = spec.spacing;
        let s = spec.shape3();
        let mut range = [(0usize, 1usize); 3];
        for d in 0..spec.dim {
            let a = ((lo[d] - spec.origin[d]) / h).floor().max(0.0) as usize;
            let b = (((hi[d] - spec.origin[d]) / h).ceil() as usize + 1).min(s[d]);
            range[d] = (a, b);
        }
        let samples = samples_per_axis(spec.dim);
        for k in range[2].0..range[2].1 {
            for j in range[1].0..range[1].1 {
                for i in range[0].0..range[0].1 {
                    let ijk = [i, j, k];
                    let cell_lo = spec.cell_lower(ijk);
                    occupancy[spec.flatten(ijk)] = shape.coverage(&cell_lo, h, samples);
                }
            }
        }
    }
    Ok(GridDomain { spec: spec.clone(), occupancy, analytic: shape.analytic_tag() })
}

impl GridDomain {
    pub fn empty(spec: &GridSpec) -> Self {
        Self { spec: spec.clone(), occupancy: vec![0.0; spec.len()], analytic: AnalyticTag::Generic }
    }

    /// Imports a generic occupancy field.
    pub fn from_occupancy(spec: GridSpec, occupancy: Vec<f64>, analytic: AnalyticTag) -> Result<Self> {
        spec.validate()?;
        if occupancy.len() != spec.len() {
            return Err(Error::Spec(format!("occupancy has {} cells, grid has {}", occupancy.len(), spec.len())));
        }
        if let Some(v) = occupancy.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("occupancy value {v} outside [0, 1]")));
        }
        if (0..spec.len()).any(|i| spec.is_frame(i) && occupancy[i] != 0.0) {
            return Err(Error::Bounds("domain touches the outermost cell layer".into()));
        }
        Ok(Self { spec, occupancy, analytic })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn volume(&self) -> f64 {
        self.occupancy.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn measure(&self) -> Measure {
        measure(self)
    }

    /// Relative deviation of the measured volume from the analytic one, if known.
    pub fn analytic_volume_error(&self) -> Option<f64> {
        let exact = self.analytic.volume(self.dim())?;
        Some((self.volume() - exact).abs() / exact)
    }

    /// Cellwise `min(self, other)`.
    pub fn intersect(&self, other: &GridDomain) -> Result<GridDomain> {
        self.spec.same_grid(&other.spec)?;
        let occupancy = self.occupancy.iter().zip(&other.occupancy).map(|(a, b)| a.min(*b)).collect();
        Ok(GridDomain { spec: self.spec.clone(), occupancy, analytic: AnalyticTag::Generic })
    }
}

impl CompactSet {
    pub fn from_shape(shape: &Shape, spec: &GridSpec) -> Result<Self> {
        rasterize(shape, spec).map(CompactSet)
    }

    pub fn empty(spec: &GridSpec) -> Self {
        CompactSet(GridDomain::empty(spec))
    }

    /// Whether some occupied cell lies within `margin_cells` of the grid frame.
    pub fn touches_frame(&self, margin_cells: usize) -> bool {
        let s = self.spec.shape3();
        let dim = self.spec.dim;
        self.occupancy.iter().enumerate().any(|(idx, &v)| {
            v > 0.0 && {
                let ijk = self.spec.unflatten(idx);
                (0..dim).any(|d| ijk[d] < margin_cells || ijk[d] + margin_cells >= s[d])
            }
        })
    }
}

/// `Ω \ K` cellwise: `max(0, occ_Ω - occ_K)`.
pub fn subtract(domain: &GridDomain, holes: &CompactSet) -> Result<GridDomain> {
    domain.spec.same_grid(&holes.spec)?;
    let occupancy: Vec<f64> = domain.occupancy.iter().zip(&holes.occupancy).map(|(a, b)| (a - b).max(0.0)).collect();
    let holes_empty = holes.occupancy.iter().all(|&v| v == 0.0);
    let analytic = match (&domain.analytic, &holes.analytic) {
        _ if holes_empty => domain.analytic.clone(),
        (AnalyticTag::Ball { center, radius }, AnalyticTag::Ball { center: c2, radius: r2 }) if center == c2 && r2 < radius => {
            AnalyticTag::Annulus { center: center.clone(), radius: *radius, inner: *r2 }
        }
        _ => AnalyticTag::Generic,
    };
    Ok(GridDomain { spec: domain.spec.clone(), occupancy, analytic })
}

/// Grayscale dilation by the face-neighbour cross (radius `h`).
pub fn dilate(spec: &GridSpec, values: &[f64]) -> Vec<f64> {
    let strides = spec.strides();
    let s = spec.shape3();
    let mut out = values.to_vec();
    for (idx, o) in out.iter_mut().enumerate() {
        let ijk = spec.unflatten(idx);
        for d in 0..spec.dim {
            if ijk[d] > 0 {
                *o = o.max(values[idx - strides[d]]);
            }
            if ijk[d] + 1 < s[d] {
                *o = o.max(values[idx + strides[d]]);
            }
        }
    }
    out
}

/// `|occ_a - occ_b|` followed by one dilation step, the grid analogue of the
/// closure of `A Δ B`.
pub fn symmetric_difference_hull(a: &GridDomain, b: &GridDomain) -> Result<CompactSet> {
    a.spec.same_grid(&b.spec)?;
    let diff: Vec<f64> = a.occupancy.iter().zip(&b.occupancy).map(|(x, y)| (x - y).abs()).collect();
    let occupancy = dilate(&a.spec, &diff);
    Ok(CompactSet(GridDomain { spec: a.spec.clone(), occupancy, analytic: AnalyticTag::Generic }))
}

/// Volume `Σ occ hⁿ` and perimeter as the isotropic total variation of the occupancy.
pub fn measure(domain: &GridDomain) -> Measure {
    Measure { volume: domain.volume(), perimeter: tv_core::tv_of(&domain.spec, &domain.occupancy) }
}
