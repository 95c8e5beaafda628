//! Restarted primal-dual iteration for box-constrained total-variation
//! programs of the form
//!
//! ```text
//!     min  Σ_v |∇(A x)_v| + ⟨c, x⟩    subject to  lo ≤ x ≤ hi,
//! ```
//!
//! where `A` is either the identity or the occupancy extension map (see
//! [`Extension`]). Objective values are per unit cell volume; callers
//! multiply by `hⁿ`.
//!
//! The dual variable `y` lives at the cell corners with `|y_v| ≤ 1`. For any
//! such `y` the dual value `Σ_i min(g_i lo_i, g_i hi_i)`, `g = Aᵀ(−div y) + c`,
//! is a certified lower bound on the optimum.

use crate::geometry::GridSpec;
use crate::tv_core::{div_into, grad_into, operator_norm_sq_bound, project_unit_ball_in_place};

/// Occupancy at or above this value marks a cell as fully inside.
pub(crate) const FULL: f64 = 1.0 - 1e-12;

/// Axis-aligned sub-box of a grid together with index maps.
#[derive(Debug, Clone)]
pub(crate) struct Crop {
    pub full: GridSpec,
    pub spec: GridSpec,
    lo: [usize; 3],
}

impl Crop {
    /// Smallest box holding every cell where `active` is true, grown by one
    /// layer on the low side so that the corner values below the first
    /// active cell exist. Returns `None` when nothing is active.
    pub fn around(full: &GridSpec, active: impl Fn(usize) -> bool) -> Option<Self> {
        let dim = full.dim;
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for i in 0..full.len() {
            if active(i) {
                any = true;
                let ijk = full.unflatten(i);
                for d in 0..dim {
                    lo[d] = lo[d].min(ijk[d]);
                    hi[d] = hi[d].max(ijk[d]);
                }
            }
        }
        if !any {
            return None;
        }
        let mut cells = Vec::with_capacity(dim);
        let mut origin = Vec::with_capacity(dim);
        for d in 0..dim {
            lo[d] = lo[d].saturating_sub(1);
            cells.push(hi[d] - lo[d] + 1);
            origin.push(full.origin[d] + lo[d] as f64 * full.spacing);
        }
        for l in lo.iter_mut().skip(dim) {
            *l = 0;
        }
        let spec = GridSpec { dim, cells_per_axis: cells, origin, spacing: full.spacing };
        Some(Self { full: full.clone(), spec, lo })
    }

    fn full_index(&self, i: usize) -> usize {
        let ijk = self.spec.unflatten(i);
        self.full.flatten([ijk[0] + self.lo[0], ijk[1] + self.lo[1], ijk[2] + self.lo[2]])
    }

    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        (0..self.spec.len()).map(|i| values[self.full_index(i)]).collect()
    }

    /// Writes `values` into a zero field on the full grid.
    pub fn scatter(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full.len()];
        for (i, v) in values.iter().enumerate() {
            out[self.full_index(i)] = *v;
        }
        out
    }

    /// Scatters a component-major vector field.
    pub fn scatter_vector(&self, values: &[f64]) -> Vec<f64> {
        let n = self.spec.len();
        let nf = self.full.len();
        let mut out = vec![0.0; self.full.dim * nf];
        for d in 0..self.spec.dim {
            for i in 0..n {
                out[d * nf + self.full_index(i)] = values[d * n + i];
            }
        }
        out
    }

    /// Whether the cell lies on the low-side padding layer of the box. Such
    /// cells must stay zero, since the corners below them are not represented.
    pub fn is_padding(&self, i: usize) -> bool {
        let ijk = self.spec.unflatten(i);
        ijk[..self.spec.dim].contains(&0)
    }
}

/// Linear map from values on fully covered cells to an anti-aliased field.
///
/// Fully covered cells keep their value. A partially covered cell takes its
/// occupancy times the mean of its fully covered neighbours (the `3ⁿ − 1`
/// cells sharing a face, edge or corner). Partial cells without such a
/// neighbour stay empty. The constant function 1 on the full cells therefore
/// maps back to the occupancy itself.
#[derive(Debug, Clone)]
pub(crate) struct Extension {
    pub free: Vec<bool>,
    cells: Vec<usize>,
    coef: Vec<f64>,
    start: Vec<usize>,
    nbrs: Vec<usize>,
    /// Column sums `Aᵀ1`, i.e. the mass carried by each free cell.
    pub weights: Vec<f64>,
}

impl Extension {
    pub fn new(spec: &GridSpec, occupancy: &[f64]) -> Self {
        let n = spec.len();
        let free: Vec<bool> = occupancy.iter().map(|&v| v >= FULL).collect();
        let s = spec.shape3();
        let dim = spec.dim;
        let offsets: Vec<[isize; 3]> = (0..3usize.pow(dim as u32))
            .map(|c| {
                let mut o = [0isize; 3];
                let mut r = c;
                for od in o.iter_mut().take(dim) {
                    *od = (r % 3) as isize - 1;
                    r /= 3;
                }
                o
            })
            .filter(|o| o.iter().any(|&v| v != 0))
            .collect();
        let (mut cells, mut coef, mut start, mut nbrs) = (Vec::new(), Vec::new(), vec![0], Vec::new());
        let mut weights: Vec<f64> = free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        for i in 0..n {
            let occ = occupancy[i];
            if occ <= 0.0 || free[i] {
                continue;
            }
            let ijk = spec.unflatten(i);
            let first = nbrs.len();
            for o in &offsets {
                let mut q = [0usize; 3];
                let mut ok = true;
                for d in 0..3 {
                    let v = ijk[d] as isize + o[d];
                    if v < 0 || v >= s[d] as isize {
                        ok = false;
                        break;
                    }
                    q[d] = v as usize;
                }
                if ok {
                    let j = spec.flatten(q);
                    if free[j] {
                        nbrs.push(j);
                    }
                }
            }
            let count = nbrs.len() - first;
            if count == 0 {
                continue;
            }
            let c = occ / count as f64;
            for &j in &nbrs[first..] {
                weights[j] += c;
            }
            cells.push(i);
            coef.push(c);
            start.push(nbrs.len());
        }
        Self { free, cells, coef, start, nbrs, weights }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &v), &f) in out.iter_mut().zip(x).zip(&self.free) {
            *o = if f { v } else { 0.0 };
        }
        for (k, &i) in self.cells.iter().enumerate() {
            let s: f64 = self.nbrs[self.start[k]..self.start[k + 1]].iter().map(|&j| x[j]).sum();
            out[i] = self.coef[k] * s;
        }
    }

    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        for ((o, &v), &f) in out.iter_mut().zip(y).zip(&self.free) {
            *o = if f { v } else { 0.0 };
        }
        for (k, &i) in self.cells.iter().enumerate() {
            let c = self.coef[k] * y[i];
            for &j in &self.nbrs[self.start[k]..self.start[k + 1]] {
                out[j] += c;
            }
        }
    }

    /// [`Extension::apply`] for a vector that already vanishes off the free
    /// cells: only the partially covered cells are written.
    fn apply_in_place(&self, x: &mut [f64]) {
        for (k, &i) in self.cells.iter().enumerate() {
            let s: f64 = self.nbrs[self.start[k]..self.start[k + 1]].iter().map(|&j| x[j]).sum();
            x[i] = self.coef[k] * s;
        }
    }

    /// [`Extension::apply_transpose`] restricted to the free cells; other
    /// entries are left unspecified.
    fn transpose_in_place(&self, y: &mut [f64]) {
        for (k, &i) in self.cells.iter().enumerate() {
            let c = self.coef[k] * y[i];
            for &j in &self.nbrs[self.start[k]..self.start[k + 1]] {
                y[j] += c;
            }
        }
    }

    /// Upper bound on the spectral norm: `‖A‖² ≤ ‖A‖₁‖A‖_∞` with unit row sums.
    pub fn norm_bound(&self) -> f64 {
        self.weights.iter().cloned().fold(1.0, f64::max).sqrt()
    }
}

/// A box-constrained total-variation program on a (cropped) grid.
#[derive(Debug, Clone)]
pub(crate) struct BoxTv {
    pub spec: GridSpec,
    pub ext: Option<Extension>,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Scratch buffers reused across evaluations.
pub(crate) struct Work {
    lifted: Vec<f64>,
    field: Vec<f64>,
    cell: Vec<f64>,
    g: Vec<f64>,
}

impl Work {
    pub fn new(spec: &GridSpec) -> Self {
        let n = spec.len();
        Self { lifted: vec![0.0; n], field: vec![0.0; spec.dim * n], cell: vec![0.0; n], g: vec![0.0; n] }
    }
}

impl BoxTv {
    pub fn len(&self) -> usize {
        self.spec.len()
    }

    /// Upper bound on `‖∇A‖`.
    pub fn lipschitz(&self) -> f64 {
        let a = self.ext.as_ref().map_or(1.0, Extension::norm_bound);
        operator_norm_sq_bound(&self.spec).sqrt() * a
    }

    pub fn lift(&self, x: &[f64], out: &mut [f64]) {
        match &self.ext {
            Some(e) => e.apply(x, out),
            None => out.copy_from_slice(x),
        }
    }

    /// `g = Aᵀ(−div y)`.
    fn adjoint(&self, y: &[f64], cell: &mut [f64], g: &mut [f64]) {
        div_into(&self.spec, y, cell);
        cell.iter_mut().for_each(|v| *v = -*v);
        match &self.ext {
            Some(e) => e.apply_transpose(cell, g),
            None => g.copy_from_slice(cell),
        }
    }

    /// `Σ_v |∇(A x)_v|`.
    pub fn tv(&self, x: &[f64], w: &mut Work) -> f64 {
        self.lift(x, &mut w.lifted);
        field_tv(&self.spec, &w.lifted, &mut w.field)
    }

    pub fn primal(&self, x: &[f64], w: &mut Work) -> f64 {
        self.tv(x, w) + self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>()
    }

    pub fn dual(&self, y: &[f64], w: &mut Work) -> f64 {
        self.adjoint(y, &mut w.cell, &mut w.g);
        let mut total = 0.0;
        for i in 0..self.len() {
            let g = w.g[i] + self.c[i];
            total += (g * self.lo[i]).min(g * self.hi[i]);
        }
        total
    }

    /// `Aᵀ(−div y)` into a fresh vector.
    pub fn dual_slack(&self, y: &[f64]) -> Vec<f64> {
        let mut cell = vec![0.0; self.len()];
        let mut g = vec![0.0; self.len()];
        self.adjoint(y, &mut cell, &mut g);
        g
    }
}

/// `Σ_v |∇u_v|` for a cell field, using `field` as scratch.
pub(crate) fn field_tv(spec: &GridSpec, u: &[f64], field: &mut [f64]) -> f64 {
    grad_into(spec, u, field);
    let n = u.len();
    let mut total = 0.0;
    if spec.dim == 2 {
        let (a, b) = field.split_at(n);
        for i in 0..n {
            total += (a[i] * a[i] + b[i] * b[i]).sqrt();
        }
    } else {
        for i in 0..n {
            let mut s = 0.0;
            for d in 0..spec.dim {
                s += field[d * n + i] * field[d * n + i];
            }
            total += s.sqrt();
        }
    }
    total
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    /// Absolute gap target (per unit cell volume).
    pub tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
    /// Restart when the gap has dropped by this factor since the last restart.
    pub restart_factor: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 50_000, check_every: 64, restart_factor: 0.2 }
    }
}

/// Progress report handed to the caller at every gap evaluation.
pub(crate) struct Snapshot {
    pub primal: f64,
    pub dual: f64,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Best primal value found (attained by `x`).
    pub primal: f64,
    /// Best certified dual value found (attained by `y`).
    pub dual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last iterate, for warm starts.
    pub x_last: Vec<f64>,
    pub y_last: Vec<f64>,
}

/// Runs the restarted iteration from `(x0, y0)`.
///
/// `extra` may propose additional feasible primal points at each gap
/// evaluation; `stop` ends the run early when it returns true.
pub(crate) fn run(
    prob: &BoxTv,
    x0: &[f64],
    y0: &[f64],
    settings: &Settings,
    extra: &mut dyn FnMut(&[f64]) -> Vec<Vec<f64>>,
    stop: &mut dyn FnMut(&Snapshot) -> bool,
) -> Outcome {
    let n = prob.len();
    let dim = prob.spec.dim;
    let lip = prob.lipschitz();
    let mut weight = 1.0f64;
    let (mut tau, mut sigma) = (1.0 / (weight * lip), weight / lip);
    let mut w = Work::new(&prob.spec);

    let mut x: Vec<f64> = x0.iter().zip(prob.lo.iter().zip(&prob.hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect();
    let mut y = y0.to_vec();
    project_unit_ball_in_place(dim, &mut y);
    let mut xbar = x.clone();
    let (mut xs, mut ys) = (vec![0.0; n], vec![0.0; dim * n]);
    let mut count = 0usize;

    let mut best_x = prob.lo.clone();
    let mut best_p = prob.primal(&best_x, &mut w);
    let mut best_y = y.clone();
    let mut best_d = prob.dual(&y, &mut w);
    let p0 = prob.primal(&x, &mut w);
    if p0 < best_p {
        best_p = p0;
        best_x.copy_from_slice(&x);
    }
    let mut restart_gap = p0 - best_d;
    let (mut rx, mut ry) = (x.clone(), y.clone());
    let mut since_restart = 0usize;

    let mut field = vec![0.0; dim * n];
    let mut cell = vec![0.0; n];
    let mut avg_x = vec![0.0; n];
    let mut avg_y = vec![0.0; dim * n];

    let mut k = 0;
    while k < settings.max_iter {
        if best_p - best_d <= settings.tol {
            break;
        }
        // Dual ascent and projection.
        if let Some(e) = &prob.ext {
            e.apply_in_place(&mut xbar);
        }
        dual_step(&prob.spec, &xbar, &mut y, sigma, &mut field);
        // Primal descent with clamping, then over-relaxation with θ = 1.
        neg_div(&prob.spec, &y, &mut cell);
        if let Some(e) = &prob.ext {
            e.transpose_in_place(&mut cell);
        }
        for i in 0..n {
            let old = x[i];
            let new = (old - tau * (cell[i] + prob.c[i])).clamp(prob.lo[i], prob.hi[i]);
            x[i] = new;
            xbar[i] = 2.0 * new - old;
        }
        for (s, v) in xs.iter_mut().zip(&x) {
            *s += v;
        }
        for (s, v) in ys.iter_mut().zip(&y) {
            *s += v;
        }
        count += 1;
        k += 1;
        since_restart += 1;

        if k % settings.check_every != 0 {
            continue;
        }
        let inv = 1.0 / count as f64;
        for (a, s) in avg_x.iter_mut().zip(&xs) {
            *a = s * inv;
        }
        for (a, s) in avg_y.iter_mut().zip(&ys) {
            *a = s * inv;
        }
        let pc = prob.primal(&x, &mut w);
        let dc = prob.dual(&y, &mut w);
        let pa = prob.primal(&avg_x, &mut w);
        let da = prob.dual(&avg_y, &mut w);
        if pc < best_p {
            best_p = pc;
            best_x.copy_from_slice(&x);
        }
        if pa < best_p {
            best_p = pa;
            best_x.copy_from_slice(&avg_x);
        }
        for cand in extra(&x) {
            let pv = prob.primal(&cand, &mut w);
            if pv < best_p {
                best_p = pv;
                best_x = cand;
            }
        }
        if dc > best_d {
            best_d = dc;
            best_y.copy_from_slice(&y);
        }
        if da > best_d {
            best_d = da;
            best_y.copy_from_slice(&avg_y);
        }
        let snap = Snapshot { primal: best_p, dual: best_d };
        if stop(&snap) {
            break;
        }

        let (gc, ga) = (pc - dc, pa - da);
        let candidate = gc.min(ga);
        if candidate <= settings.restart_factor * restart_gap || since_restart * 3 >= k {
            if ga < gc {
                x.copy_from_slice(&avg_x);
                y.copy_from_slice(&avg_y);
            }
            // Rebalance primal and dual step sizes from the distance travelled.
            let dx = dist(&x, &rx);
            let dy = dist(&y, &ry);
            if dx > 1e-12 && dy > 1e-12 {
                weight = (0.5 * (dy / dx).ln() + 0.5 * weight.ln()).exp().clamp(1e-3, 1e3);
                tau = 1.0 / (weight * lip);
                sigma = weight / lip;
            }
            rx.copy_from_slice(&x);
            ry.copy_from_slice(&y);
            xbar.copy_from_slice(&x);
            xs.iter_mut().for_each(|v| *v = 0.0);
            ys.iter_mut().for_each(|v| *v = 0.0);
            count = 0;
            since_restart = 0;
            restart_gap = candidate;
        }
    }
    log::debug!("primal-dual: {k} iterations, primal {best_p:.6e}, dual {best_d:.6e}");
    Outcome {
        converged: best_p - best_d <= settings.tol,
        x: best_x,
        y: best_y,
        primal: best_p,
        dual: best_d,
        iterations: k,
        x_last: x,
        y_last: y,
    }
}

/// `y ← proj(y + σ ∇u)`, fused into one sweep in two dimensions.
fn dual_step(spec: &GridSpec, u: &[f64], y: &mut [f64], sigma: f64, field: &mut [f64]) {
    if spec.dim != 2 {
        grad_into(spec, u, field);
        for (yv, f) in y.iter_mut().zip(field.iter()) {
            *yv += sigma * f;
        }
        project_unit_ball_in_place(spec.dim, y);
        return;
    }
    let (nx, ny) = (spec.cells_per_axis[0], spec.cells_per_axis[1]);
    let n = nx * ny;
    let k = 0.5 * sigma / spec.spacing;
    let (yx, yy) = y.split_at_mut(n);
    for row in 0..ny {
        let r = row * nx;
        let last_row = row + 1 == ny;
        for col in 0..nx {
            let i = r + col;
            let last_col = col + 1 == nx;
            let a = u[i];
            let b = if last_col { 0.0 } else { u[i + 1] };
            let (c, d) = if last_row { (0.0, 0.0) } else { (u[i + nx], if last_col { 0.0 } else { u[i + nx + 1] }) };
            let px = yx[i] + (b - a + d - c) * k;
            let py = yy[i] + (c - a + d - b) * k;
            let s = px * px + py * py;
            if s > 1.0 {
                let inv = 1.0 / s.sqrt();
                yx[i] = px * inv;
                yy[i] = py * inv;
            } else {
                yx[i] = px;
                yy[i] = py;
            }
        }
    }
}

/// `out = −div y`.
fn neg_div(spec: &GridSpec, y: &[f64], out: &mut [f64]) {
    div_into(spec, y, out);
    out.iter_mut().for_each(|v| *v = -*v);
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}
