//! Vertex-centred gradient, its negative adjoint (divergence), isotropic
//! total variation and the pointwise projection onto the unit ball.
//!
//! Values outside the grid are taken to be zero, so the total variation of a
//! field includes the jump across its support boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridSpec;

/// Grid function extended by zero outside `support_mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub support_mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>, support_mask: Vec<bool>) -> Result<Self> {
        if values.len() != spec.len() || support_mask.len() != spec.len() {
            return Err(Error::Spec("field length does not match the grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field has non-finite values".into()));
        }
        if values.iter().zip(&support_mask).any(|(v, m)| !m && *v != 0.0) {
            return Err(Error::Domain("field is nonzero outside its support mask".into()));
        }
        Ok(Self { spec, values, support_mask })
    }

    /// Field supported on the whole grid.
    pub fn full(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; spec.len()];
        Self::new(spec, values, mask)
    }

    pub fn zeros(spec: &GridSpec) -> Self {
        Self { spec: spec.clone(), values: vec![0.0; spec.len()], support_mask: vec![true; spec.len()] }
    }

    /// `Σ values · hⁿ`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }
}

/// Cellwise vectors stored component-major: component `d` of cell `i` is
/// `components[d * n + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub spec: GridSpec,
    pub components: Vec<f64>,
}

impl VectorField {
    pub fn zeros(spec: &GridSpec) -> Self {
        Self { spec: spec.clone(), components: vec![0.0; spec.dim * spec.len()] }
    }

    pub fn norm_at(&self, i: usize) -> f64 {
        let n = self.spec.len();
        (0..self.spec.dim).map(|d| self.components[d * n + i].powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.spec.len()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    /// `Σ_cells p·q hⁿ`.
    pub fn dot(&self, other: &VectorField) -> f64 {
        self.components.iter().zip(&other.components).map(|(a, b)| a * b).sum::<f64>() * self.spec.cell_volume()
    }
}

/// Squared operator-norm bound `‖∇‖² ≤ 4 / h²` for the vertex stencil.
///
/// The symbol of the stencil is `4 Σ_d sin²(ξ_d/2) Π_{e≠d} cos²(ξ_e/2) / h²`,
/// which never exceeds `4 / h²` in any dimension.
pub fn operator_norm_sq_bound(spec: &GridSpec) -> f64 {
    4.0 / (spec.spacing * spec.spacing)
}

/// Offsets and per-axis bits of the `2^dim` corners of the cell block whose
/// lowest corner is a given cell.
fn corners(spec: &GridSpec) -> Vec<(usize, [bool; 3])> {
    let strides = spec.strides();
    (0..1usize << spec.dim)
        .map(|c| {
            let mut bits = [false; 3];
            let mut off = 0;
            for (d, bit) in bits.iter_mut().enumerate().take(spec.dim) {
                if c >> d & 1 == 1 {
                    *bit = true;
                    off += strides[d];
                }
            }
            (off, bits)
        })
        .collect()
}

/// Gradient of the multilinear interpolant at the upper corner of every cell,
/// written into `p` (component-major, length `dim · n`). Component `d` at
/// cell `i` averages the `2^(dim-1)` differences along axis `d` inside the
/// block of cells `i + {0,1}^dim`; cells beyond the grid count as zero.
pub fn grad_into(spec: &GridSpec, u: &[f64], p: &mut [f64]) {
    if spec.dim == 2 {
        return grad2(spec, u, p);
    }
    let n = u.len();
    let k = 1.0 / ((1usize << (spec.dim - 1)) as f64 * spec.spacing);
    let corners = corners(spec);
    p.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let idx = spec.unflatten(i);
        for &(off, bits) in &corners {
            let inside = (0..spec.dim).all(|d| !bits[d] || idx[d] + 1 < spec.cells_per_axis[d]);
            if !inside {
                continue;
            }
            let v = u[i + off] * k;
            for d in 0..spec.dim {
                if bits[d] {
                    p[d * n + i] += v;
                } else {
                    p[d * n + i] -= v;
                }
            }
        }
    }
}

fn grad2(spec: &GridSpec, u: &[f64], p: &mut [f64]) {
    let (nx, ny) = (spec.cells_per_axis[0], spec.cells_per_axis[1]);
    let n = nx * ny;
    let k = 0.5 / spec.spacing;
    let (px, py) = p.split_at_mut(n);
    for y in 0..ny {
        let row = y * nx;
        for x in 0..nx {
            let i = row + x;
            let a = u[i];
            let b = if x + 1 < nx { u[i + 1] } else { 0.0 };
            let (c, d) = if y + 1 < ny { (u[i + nx], if x + 1 < nx { u[i + nx + 1] } else { 0.0 }) } else { (0.0, 0.0) };
            px[i] = (b - a + d - c) * k;
            py[i] = (c - a + d - b) * k;
        }
    }
}

/// Discrete divergence, the negative adjoint of [`grad_into`].
pub fn div_into(spec: &GridSpec, p: &[f64], out: &mut [f64]) {
    if spec.dim == 2 {
        return div2(spec, p, out);
    }
    let n = out.len();
    let k = 1.0 / ((1usize << (spec.dim - 1)) as f64 * spec.spacing);
    let corners = corners(spec);
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let idx = spec.unflatten(i);
        for &(off, bits) in &corners {
            let inside = (0..spec.dim).all(|d| !bits[d] || idx[d] + 1 < spec.cells_per_axis[d]);
            if !inside {
                continue;
            }
            let mut s = 0.0;
            for d in 0..spec.dim {
                if bits[d] {
                    s += p[d * n + i];
                } else {
                    s -= p[d * n + i];
                }
            }
            out[i + off] -= s * k;
        }
    }
}

fn div2(spec: &GridSpec, p: &[f64], out: &mut [f64]) {
    let (nx, ny) = (spec.cells_per_axis[0], spec.cells_per_axis[1]);
    let n = nx * ny;
    let k = 0.5 / spec.spacing;
    let (px, py) = p.split_at(n);
    // Each cell collects from the (up to) four vertices whose block holds it.
    for y in 0..ny {
        let row = y * nx;
        for x in 0..nx {
            let i = row + x;
            let mut s = -px[i] - py[i];
            if x > 0 {
                s += px[i - 1] - py[i - 1];
            }
            if y > 0 {
                s += py[i - nx] - px[i - nx];
                if x > 0 {
                    s += px[i - nx - 1] + py[i - nx - 1];
                }
            }
            out[i] = -s * k;
        }
    }
}

/// Euclidean norm of the gradient at each cell, written into `out`.
pub fn grad_norms_into(spec: &GridSpec, u: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    grad_into(spec, u, scratch);
    let n = u.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for d in 0..spec.dim {
            s += scratch[d * n + i] * scratch[d * n + i];
        }
        *o = s.sqrt();
    }
}

/// `Σ ‖∇u‖ hⁿ` for a raw value slice.
pub fn tv_of(spec: &GridSpec, u: &[f64]) -> f64 {
    let n = u.len();
    let mut p = vec![0.0; spec.dim * n];
    grad_into(spec, u, &mut p);
    let mut total = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for d in 0..spec.dim {
            s += p[d * n + i] * p[d * n + i];
        }
        total += s.sqrt();
    }
    total * spec.cell_volume()
}

/// Replaces each cell vector `v` by `v / max(1, ‖v‖)`.
pub fn project_unit_ball_in_place(dim: usize, p: &mut [f64]) {
    let n = p.len() / dim;
    for i in 0..n {
        let mut s = 0.0;
        for d in 0..dim {
            s += p[d * n + i] * p[d * n + i];
        }
        if s > 1.0 {
            let inv = 1.0 / s.sqrt();
            for d in 0..dim {
                p[d * n + i] *= inv;
            }
        }
    }
}

pub fn grad(u: &ScalarField) -> VectorField {
    let mut out = VectorField::zeros(&u.spec);
    grad_into(&u.spec, &u.values, &mut out.components);
    out
}

pub fn div(p: &VectorField) -> ScalarField {
    let mut values = vec![0.0; p.spec.len()];
    div_into(&p.spec, &p.components, &mut values);
    ScalarField { spec: p.spec.clone(), values, support_mask: vec![true; p.spec.len()] }
}

pub fn tv(u: &ScalarField) -> f64 {
    tv_of(&u.spec, &u.values)
}

pub fn project_unit_ball(p: &VectorField) -> VectorField {
    let mut out = p.clone();
    project_unit_ball_in_place(p.spec.dim, &mut out.components);
    out
}
