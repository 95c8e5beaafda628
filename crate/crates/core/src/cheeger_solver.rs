//! First eigenvalue of the 1-Laplacian by Dinkelbach iteration.
//!
//! The eigenvalue is the minimum of `tv(ū) / Σ u hⁿ` over nonnegative `u`
//! supported in the domain, where `ū` is the zero extension. Each outer step
//! fixes `λ` and minimizes `tv(ū) − λ Σ u hⁿ` over `0 ≤ u ≤ 1` with a
//! restarted primal-dual iteration. The dual variable of that inner problem is
//! a vector field with pointwise norm at most one whose divergence bounds the
//! eigenvalue from below, so it doubles as a calibration certificate.
//!
//! The unknown lives on fully covered cells. Partially covered cells follow
//! their fully covered neighbours scaled by their occupancy (see
//! [`crate::primal_dual::Extension`]), which keeps sub-cell features such as
//! small holes visible to the ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, LastResiduals, Result};
use crate::geometry::{AnalyticTag, GridDomain};
use crate::primal_dual::{self, field_tv, BoxTv, Crop, Extension, Settings, Work};
use crate::tv_core::{grad, tv, ScalarField, VectorField};

/// Fraction of the best possible inner decrease that ends an inner solve early.
const SUFFICIENT_DECREASE: f64 = 0.5;

/// Ratios closer than this are treated as ties when picking an eigenset.
const RATIO_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative tolerance on the eigenvalue: the outer loop stops once no
    /// `u` can lower the inner objective by more than `tol_outer · λ · |Ω|`.
    pub tol_outer: f64,
    /// Primal-dual gap per unit volume required by [`inner_pd`].
    pub tol_inner: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Number of quantile thresholds scanned by [`extract_eigenset`].
    pub thresholds: usize,
    /// Iterations between gap evaluations.
    pub check_every: usize,
    /// Randomizes the starting point when set.
    pub seed: Option<u64>,
    /// Relative tolerance used by [`check_certificate`].
    pub certificate_tol: f64,
    /// Start cold solves from the solution on a grid twice as coarse.
    pub multilevel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_outer: 1e-5,
            tol_inner: 1e-7,
            max_inner: 50_000,
            max_outer: 100,
            thresholds: 64,
            check_every: 64,
            seed: None,
            certificate_tol: 0.05,
            multilevel: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tol_outer) || !positive(self.tol_inner) || !positive(self.certificate_tol) {
            return Err(Error::Domain("tolerances must be positive and finite".into()));
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.thresholds == 0 || self.check_every == 0 {
            return Err(Error::Domain("iteration counts and threshold count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Final inner primal-dual gap per unit volume.
    pub duality_gap: f64,
    /// Mean deviation of the certificate's divergence from `λ` on `{u > 0}`.
    pub div_residual: f64,
    /// `|perimeter(A)/volume(A) − λ|` for the extracted eigenset `A`.
    pub ratio_mismatch: f64,
    /// `1 − Σ dual·∇u hⁿ / tv(u)`.
    pub alignment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterations {
    pub outer: usize,
    /// Primal-dual iterations of each inner solve.
    pub inner: Vec<usize>,
}

impl Iterations {
    pub fn inner_total(&self) -> usize {
        self.inner.iter().sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda: f64,
    /// Eigenfunction with `Σ u hⁿ = 1`.
    pub u: ScalarField,
    pub eigenset: GridDomain,
    pub eigenset_ratio: f64,
    pub dual: VectorField,
    pub residuals: Residuals,
    pub iterations: Iterations,
    /// `λ_k` at every outer step, starting with `perimeter/volume`.
    pub history: Vec<f64>,
}

/// Starting point for a solve, given on the full grid.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub u: Option<Vec<f64>>,
    pub dual: Option<Vec<f64>>,
}

impl From<&EigenResult> for WarmStart {
    fn from(r: &EigenResult) -> Self {
        Self { u: Some(r.u.values.clone()), dual: Some(r.dual.components.clone()) }
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    /// Best primal point, values in `[0, 1]`.
    pub u: ScalarField,
    pub dual: VectorField,
    /// `tv(ū) − λ Σ u hⁿ` at `u`.
    pub value: f64,
    /// Certified lower bound on the optimal value.
    pub dual_value: f64,
    pub gap_per_volume: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Eigenset {
    pub domain: GridDomain,
    pub ratio: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub dual_max_norm: f64,
    pub div_residual: f64,
    pub alignment: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// The discretized problem on the bounding box of a domain.
struct Model {
    crop: Crop,
    prob: BoxTv,
    mass: Vec<f64>,
    volume_cells: f64,
    cell_volume: f64,
}

impl Model {
    fn new(domain: &GridDomain) -> Result<Self> {
        let volume = domain.volume();
        if !(volume > 0.0) {
            return Err(Error::Degenerate("domain has zero volume".into()));
        }
        let crop =
            Crop::around(&domain.spec, |i| domain.occupancy[i] > 0.0).ok_or_else(|| Error::Degenerate("domain has zero volume".into()))?;
        let occ = crop.gather(&domain.occupancy);
        let ext = Extension::new(&crop.spec, &occ);
        if !has_interior_block(&crop.spec, &ext.free) {
            return Err(Error::Resolution("domain is thinner than about 4 cells: no fully covered 3ⁿ block of cells".into()));
        }
        let n = crop.spec.len();
        let hi: Vec<f64> = ext.free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let mass = ext.weights.clone();
        let volume_cells = occ.iter().sum();
        let cell_volume = domain.spec.cell_volume();
        let prob = BoxTv { spec: crop.spec.clone(), ext: Some(ext), c: vec![0.0; n], lo: vec![0.0; n], hi };
        Ok(Self { crop, prob, mass, volume_cells, cell_volume })
    }

    fn set_lambda(&mut self, lambda: f64) {
        for (c, m) in self.prob.c.iter_mut().zip(&self.mass) {
            *c = -lambda * m;
        }
    }

    fn mass_of(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.mass).map(|(a, b)| a * b).sum()
    }

    fn ratio(&self, x: &[f64], w: &mut Work) -> f64 {
        let m = self.mass_of(x);
        if m > 0.0 {
            self.prob.tv(x, w) / m
        } else {
            f64::INFINITY
        }
    }

    fn ones(&self) -> Vec<f64> {
        self.prob.hi.clone()
    }

    /// Free-cell values from a full-grid field, rescaled to maximum one.
    fn restrict_full(&self, values: &[f64]) -> Option<Vec<f64>> {
        let mut x = self.crop.gather(values);
        for (v, h) in x.iter_mut().zip(&self.prob.hi) {
            *v = if *h > 0.0 { v.max(0.0) } else { 0.0 };
        }
        let top = x.iter().cloned().fold(0.0, f64::max);
        if top > 0.0 && top.is_finite() {
            x.iter_mut().for_each(|v| *v /= top);
            Some(x)
        } else {
            None
        }
    }

    fn lift_full(&self, x: &[f64]) -> Vec<f64> {
        let mut lifted = vec![0.0; x.len()];
        self.prob.lift(x, &mut lifted);
        self.crop.scatter(&lifted)
    }

    /// Truncations `min(1, x/t)` at a few fractions of the maximum.
    fn roundings(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let top = x.iter().cloned().fold(0.0, f64::max);
        if top <= 0.0 {
            return Vec::new();
        }
        [0.2, 0.4, 0.6, 0.8]
            .iter()
            .map(|f| {
                let t = f * top;
                x.iter().map(|v| (v / t).min(1.0)).collect()
            })
            .collect()
    }

    fn settings(&self, opts: &SolverOptions) -> Settings {
        Settings { tol: opts.tol_inner * self.volume_cells, max_iter: opts.max_inner, check_every: opts.check_every, ..Settings::default() }
    }

    fn start(&self, warm: Option<&WarmStart>, opts: &SolverOptions) -> (Vec<f64>, Vec<f64>) {
        let n = self.prob.len();
        let dim = self.crop.spec.dim;
        let mut x = warm.and_then(|w| w.u.as_ref()).and_then(|u| self.restrict_full(u)).unwrap_or_else(|| self.ones());
        let mut y = match warm.and_then(|w| w.dual.as_ref()) {
            Some(d) => gather_vector(&self.crop, d),
            None => vec![0.0; dim * n],
        };
        if let Some(seed) = opts.seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in x.iter_mut() {
                *v *= rng.gen_range(0.5..1.0);
            }
            for v in y.iter_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        (x, y)
    }
}

fn gather_vector(crop: &Crop, values: &[f64]) -> Vec<f64> {
    let nf = crop.full.len();
    let mut out = Vec::with_capacity(crop.spec.dim * crop.spec.len());
    for d in 0..crop.spec.dim {
        out.extend(crop.gather(&values[d * nf..(d + 1) * nf]));
    }
    out
}

/// Whether some free cell has all of its `3ⁿ − 1` neighbours free.
fn has_interior_block(spec: &crate::geometry::GridSpec, free: &[bool]) -> bool {
    let s = spec.shape3();
    let st = spec.strides();
    let dim = spec.dim;
    (0..spec.len()).any(|i| {
        if !free[i] {
            return false;
        }
        let ijk = spec.unflatten(i);
        if (0..dim).any(|d| ijk[d] == 0 || ijk[d] + 1 >= s[d]) {
            return false;
        }
        let (zr, zs) = if dim == 3 { (-1..=1, st[2] as isize) } else { (0..=0, 0) };
        zr.clone().all(|dz| {
            (-1isize..=1).all(|dy| {
                (-1isize..=1).all(|dx| {
                    let j = i as isize + dx + dy * st[1] as isize + dz * zs;
                    free[j as usize]
                })
            })
        })
    })
}

/// Minimizes `tv(ū) − λ Σ u hⁿ` over `0 ≤ u ≤ 1` supported in the domain.
///
/// Runs until the primal-dual gap per unit volume is below `tol_inner`.
pub fn inner_pd(domain: &GridDomain, lambda: f64, warm: Option<&WarmStart>, opts: &SolverOptions) -> Result<InnerResult> {
    opts.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    let mut model = Model::new(domain)?;
    model.set_lambda(lambda);
    let (x0, y0) = model.start(warm, opts);
    let settings = model.settings(opts);
    let out = primal_dual::run(&model.prob, &x0, &y0, &settings, &mut |x| model.roundings(x), &mut |_| false);
    let hv = model.cell_volume;
    let gap = (out.primal - out.dual) / model.volume_cells;
    if !out.converged {
        return Err(Error::Convergence(LastResiduals { gap_per_volume: gap, primal_value: out.primal * hv, iterations: out.iterations }));
    }
    let spec = domain.spec.clone();
    let values = model.lift_full(&out.x);
    let mask = domain.occupancy.iter().map(|&v| v > 0.0).collect();
    Ok(InnerResult {
        u: ScalarField { spec: spec.clone(), values, support_mask: mask },
        dual: VectorField { spec, components: model.crop.scatter_vector(&out.y) },
        value: out.primal * hv,
        dual_value: out.dual * hv,
        gap_per_volume: gap,
        iterations: out.iterations,
    })
}

/// Computes the first eigenvalue, an eigenfunction, an eigenset and a
/// calibration certificate.
pub fn solve(domain: &GridDomain, opts: &SolverOptions) -> Result<EigenResult> {
    solve_from(domain, opts, None)
}

/// [`solve`] started from a previous solution (typically on a nearby domain).
pub fn solve_from(domain: &GridDomain, opts: &SolverOptions, warm: Option<&WarmStart>) -> Result<EigenResult> {
    opts.validate()?;
    let mut model = Model::new(domain)?;
    let coarse = match warm {
        None if opts.multilevel => coarse_start(domain, &model, opts),
        _ => None,
    };
    let warm = warm.or(coarse.as_ref());
    let mut work = Work::new(&model.crop.spec);
    let (mut x, mut y) = model.start(warm, opts);

    // λ₀ = perimeter/volume of the domain itself; a warm start may do better.
    let ones = model.ones();
    let mut lambda = model.ratio(&ones, &mut work);
    let mut best = ones;
    let warm_ratio = model.ratio(&x, &mut work);
    let mut history = vec![lambda];
    if warm_ratio < lambda {
        lambda = warm_ratio;
        best = x.clone();
        history.push(lambda);
    }

    let settings = model.settings(opts);
    let certified_level = opts.tol_outer * model.volume_cells;
    let mut inner_counts = Vec::new();
    let mut final_gap = f64::NAN;
    let mut final_dual = y.clone();
    let mut certified = false;
    for outer in 0..opts.max_outer {
        model.set_lambda(lambda);
        let threshold = certified_level * lambda;
        let mut stop = |s: &primal_dual::Snapshot| s.dual >= -threshold || (s.primal < 0.0 && s.primal <= SUFFICIENT_DECREASE * s.dual);
        let out = primal_dual::run(&model.prob, &x, &y, &settings, &mut |v| model.roundings(v), &mut stop);
        inner_counts.push(out.iterations);
        log::info!("outer {outer}: λ = {lambda:.8}, inner {} its, primal {:.3e}, dual {:.3e}", out.iterations, out.primal, out.dual);
        final_gap = (out.primal - out.dual) / model.volume_cells;
        final_dual = out.y.clone();
        if out.dual >= -threshold {
            certified = true;
            break;
        }
        if out.primal < 0.0 {
            let next = model.ratio(&out.x, &mut work);
            debug_assert!(next <= lambda + 1e-12);
            lambda = next;
            best = out.x.clone();
            history.push(lambda);
            x = out.x_last;
            y = out.y_last;
            continue;
        }
        return Err(Error::Convergence(LastResiduals {
            gap_per_volume: final_gap,
            primal_value: out.primal * model.cell_volume,
            iterations: out.iterations,
        }));
    }
    if !certified {
        return Err(Error::Convergence(LastResiduals {
            gap_per_volume: final_gap,
            primal_value: f64::NAN,
            iterations: inner_counts.iter().sum(),
        }));
    }

    let spec = domain.spec.clone();
    let mut values = model.lift_full(&best);
    let total: f64 = values.iter().sum::<f64>() * model.cell_volume;
    values.iter_mut().for_each(|v| *v /= total);
    let mask: Vec<bool> = domain.occupancy.iter().map(|&v| v > 0.0).collect();
    let u = ScalarField { spec: spec.clone(), values, support_mask: mask };
    let dual = VectorField { spec, components: model.crop.scatter_vector(&final_dual) };
    let set = extract_eigenset(&u, domain, opts.thresholds)?;
    let mut result = EigenResult {
        lambda,
        u,
        eigenset_ratio: set.ratio,
        eigenset: set.domain,
        dual,
        residuals: Residuals {
            duality_gap: final_gap,
            div_residual: f64::NAN,
            ratio_mismatch: (set.ratio - lambda).abs(),
            alignment: f64::NAN,
        },
        iterations: Iterations { outer: inner_counts.len(), inner: inner_counts },
        history,
    };
    let report = certificate_with(&result, &model, opts.certificate_tol);
    result.residuals.div_residual = report.div_residual;
    result.residuals.alignment = report.alignment;
    Ok(result)
}

/// Smallest bounding-box extent, in cells, for which a coarse pre-solve is used.
const MULTILEVEL_MIN_CELLS: usize = 96;

/// Solves on the grid with twice the spacing and prolongs the result.
fn coarse_start(domain: &GridDomain, model: &Model, opts: &SolverOptions) -> Option<WarmStart> {
    let spec = &domain.spec;
    if model.crop.spec.cells_per_axis.iter().any(|&c| c < MULTILEVEL_MIN_CELLS) || spec.cells_per_axis.iter().any(|c| c % 2 == 1) {
        return None;
    }
    let cells: Vec<usize> = spec.cells_per_axis.iter().map(|c| c / 2).collect();
    let coarse_spec = crate::geometry::GridSpec::new(spec.dim, cells, spec.origin.clone(), 2.0 * spec.spacing).ok()?;
    let blocks = 1usize << spec.dim;
    let mut occ = vec![0.0; coarse_spec.len()];
    for (i, &v) in domain.occupancy.iter().enumerate() {
        let ijk = spec.unflatten(i);
        occ[coarse_spec.flatten([ijk[0] / 2, ijk[1] / 2, ijk[2] / 2])] += v / blocks as f64;
    }
    let coarse = GridDomain::from_occupancy(coarse_spec.clone(), occ, AnalyticTag::Generic).ok()?;
    let coarse_opts = SolverOptions { tol_outer: opts.tol_outer.max(1e-4), seed: None, ..opts.clone() };
    let res = solve_from(&coarse, &coarse_opts, None).ok()?;
    let n = spec.len();
    let nc = coarse_spec.len();
    let mut u = vec![0.0; n];
    let mut dual = vec![0.0; spec.dim * n];
    for i in 0..n {
        let ijk = spec.unflatten(i);
        // In coarse index units: cell centres sit at I + 1/2, corners at I + 1.
        let centre: Vec<f64> = (0..spec.dim).map(|d| (ijk[d] as f64 + 0.5) / 2.0 - 0.5).collect();
        u[i] = interpolate(&coarse_spec, &res.u.values, &centre);
        let corner: Vec<f64> = (0..spec.dim).map(|d| (ijk[d] as f64 + 1.0) / 2.0 - 1.0).collect();
        for d in 0..spec.dim {
            dual[d * n + i] = interpolate(&coarse_spec, &res.dual.components[d * nc..(d + 1) * nc], &corner);
        }
    }
    log::debug!("coarse pre-solve at {:?}: λ = {:.6}", coarse_spec.cells_per_axis, res.lambda);
    Some(WarmStart { u: Some(u), dual: Some(dual) })
}

/// Multilinear interpolation of a grid array at fractional index `pos`,
/// clamped to the array.
fn interpolate(spec: &crate::geometry::GridSpec, values: &[f64], pos: &[f64]) -> f64 {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for d in 0..spec.dim {
        let top = (spec.cells_per_axis[d] - 1) as f64;
        let p = pos[d].clamp(0.0, top);
        let b = p.floor().min(top - 1.0).max(0.0);
        base[d] = b as usize;
        frac[d] = p - b;
    }
    let mut total = 0.0;
    for c in 0..1usize << spec.dim {
        let mut idx = base;
        let mut w = 1.0;
        for d in 0..spec.dim {
            if c >> d & 1 == 1 {
                idx[d] += 1;
                w *= frac[d];
            } else {
                w *= 1.0 - frac[d];
            }
        }
        if w != 0.0 {
            total += w * values[spec.flatten(idx)];
        }
    }
    total
}

/// Scans superlevel sets of `u` and returns the one with the smallest
/// perimeter-to-volume ratio.
///
/// The thresholds are `thresholds` quantiles of the positive values of `u`.
/// The level set at `t` is anti-aliased as `min(occupancy, u/t)`, which is
/// the plain indicator `{u ≥ t}` away from partially covered cells. Ratios
/// within `1e-9` of each other are ties and resolve to the larger volume.
pub fn extract_eigenset(u: &ScalarField, domain: &GridDomain, thresholds: usize) -> Result<Eigenset> {
    domain.spec.same_grid(&u.spec)?;
    let mut positive: Vec<f64> = u.values.iter().cloned().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::Degenerate("eigenfunction vanishes identically".into()));
    }
    positive.sort_by(f64::total_cmp);
    let mut ts: Vec<f64> = (0..thresholds.max(1)).map(|q| positive[q * positive.len() / thresholds.max(1)]).collect();
    ts.dedup();

    let crop = Crop::around(&domain.spec, |i| u.values[i] > 0.0 && domain.occupancy[i] > 0.0)
        .ok_or_else(|| Error::Degenerate("eigenfunction vanishes on the domain".into()))?;
    let uc = crop.gather(&u.values);
    let occ = crop.gather(&domain.occupancy);
    let mut field = vec![0.0; crop.spec.dim * uc.len()];
    let mut level = vec![0.0; uc.len()];
    let mut best: Option<(f64, f64, f64)> = None;
    for &t in &ts {
        for i in 0..uc.len() {
            level[i] = occ[i].min(uc[i].max(0.0) / t);
        }
        let vol: f64 = level.iter().sum();
        if vol <= 0.0 {
            continue;
        }
        let ratio = field_tv(&crop.spec, &level, &mut field) / vol;
        let better = match best {
            None => true,
            Some((r, _, v)) => ratio < r - RATIO_TIE || ((ratio - r).abs() <= RATIO_TIE && vol > v),
        };
        if better {
            best = Some((ratio, t, vol));
        }
    }
    let (ratio, t, _) = best.ok_or_else(|| Error::Degenerate("no level set with positive volume".into()))?;
    let occupancy: Vec<f64> = domain.occupancy.iter().zip(&u.values).map(|(&o, &v)| o.min(v.max(0.0) / t)).collect();
    Ok(Eigenset { domain: GridDomain { spec: domain.spec.clone(), occupancy, analytic: AnalyticTag::Generic }, ratio, threshold: t })
}

/// Residuals of the calibration conditions `−div Λ = λ` and `Λ·∇u = |∇u|`.
///
/// The divergence residual is measured in the same discretization the solver
/// uses: on every fully covered cell `j` with `u_j > 0` it compares
/// `(Aᵀ(−div Λ))_j / m_j` with `λ`, where `A` is the occupancy extension and
/// `m = Aᵀ1`, and averages with weights `m_j u_j`.
pub fn check_certificate(res: &EigenResult, domain: &GridDomain, tol: f64) -> Result<CertificateReport> {
    domain.spec.same_grid(&res.u.spec)?;
    let model = Model::new(domain)?;
    Ok(certificate_with(res, &model, tol))
}

fn certificate_with(res: &EigenResult, model: &Model, tol: f64) -> CertificateReport {
    let y = gather_vector(&model.crop, &res.dual.components);
    let g = model.prob.dual_slack(&y);
    let u = model.crop.gather(&res.u.values);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..u.len() {
        if model.prob.hi[j] > 0.0 && u[j] > 0.0 {
            let w = model.mass[j] * u[j];
            num += w * (g[j] / model.mass[j] - res.lambda).abs();
            den += w;
        }
    }
    let div_residual = if den > 0.0 { num / den } else { f64::INFINITY };
    let t = tv(&res.u);
    let alignment = if t > 0.0 { 1.0 - grad(&res.u).dot(&res.dual) / t } else { f64::INFINITY };
    let dual_max_norm = res.dual.max_norm();
    CertificateReport {
        dual_max_norm,
        div_residual,
        alignment,
        tolerance: tol,
        passed: dual_max_norm <= 1.0 + 1e-9 && alignment <= tol && div_residual <= tol * res.lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, GridSpec, Shape};

    fn disk(n: usize) -> GridDomain {
        let g = GridSpec::cube(2, n, -1.25, 1.25).unwrap();
        rasterize(&Shape::ball(&[0.0, 0.0], 1.0), &g).unwrap()
    }

    #[test]
    fn disk_eigenvalue_coarse() {
        let d = disk(64);
        let r = solve(&d, &SolverOptions::default()).unwrap();
        assert!((r.lambda - 2.0).abs() < 0.06, "{}", r.lambda);
        assert!((r.u.integral() - 1.0).abs() < 1e-9);
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
