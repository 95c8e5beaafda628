//! Parametrized domain families and the response of the first eigenvalue.
//!
//! Three kinds of sweep are supported: punching small balls out of a domain
//! ([`HoleFamily`]), transporting a domain by a near-identity map
//! ([`DiffeoFamily`]), and arbitrary sequences of domains whose symmetric
//! difference with the base has vanishing capacity
//! ([`run_capacity_sequence`]). Every sweep solves each perturbed domain
//! warm-started from the base solution and records the eigenvalue shift,
//! the eigenset drift and the capacity of the perturbation.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::capacity::{cap1_variational_with, CapacityOptions};
use crate::cheeger_solver::{solve, solve_from, EigenResult, SolverOptions, WarmStart};
use crate::error::{Error, Result};
use crate::geometry::{rasterize, subtract, symmetric_difference_hull, AnalyticTag, CompactSet, GridDomain, GridSpec, Shape};
use crate::oracles::{ball_lambda, hole_slope, unit_sphere_area, HoleRegime};
use crate::tv_core::tv;

/// Samples per axis used when pulling a cell back through a map.
fn pullback_samples(dim: usize) -> usize {
    if dim == 2 {
        16
    } else {
        8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    pub solver: SolverOptions,
    pub capacity: CapacityOptions,
    /// Worker threads for the per-δ solves.
    pub threads: usize,
    /// Relative slack on asserted bounds and slopes.
    pub slack: f64,
    /// Relative tolerance on derivative estimates.
    pub derivative_tol: f64,
    /// Relative tolerance against closed-form families.
    pub oracle_tol: f64,
    /// Slope assertions only use samples above this multiple of the noise floor.
    pub noise_multiple: f64,
    pub fit_model: FitModel,
    /// Measure the capacity of every perturbation.
    pub capacities: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            capacity: CapacityOptions { rel_tol: 1e-4, ..CapacityOptions::default() },
            threads: 1,
            slack: 0.1,
            derivative_tol: 0.05,
            oracle_tol: 0.03,
            noise_multiple: 3.0,
            fit_model: FitModel::LeadingOrder,
            capacities: true,
        }
    }
}

/// A solved base domain together with an estimate of the eigenvalue noise.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub domain: GridDomain,
    pub result: EigenResult,
    /// Largest eigenvalue spread over randomized restarts and a tenfold
    /// tighter outer tolerance.
    pub noise_floor: f64,
    pub noise_lambdas: Vec<f64>,
}

impl Baseline {
    pub fn lambda(&self) -> f64 {
        self.result.lambda
    }

    pub fn eigenset_volume(&self) -> f64 {
        self.result.eigenset.volume()
    }
}

/// Solves `domain` and estimates the solver noise: two restarts from
/// randomly perturbed starting points and one solve at `tol_outer / 10`.
pub fn baseline(domain: &GridDomain, opts: &ExperimentOptions) -> Result<Baseline> {
    let result = solve(domain, &opts.solver)?;
    let warm = WarmStart::from(&result);
    let variants = [
        SolverOptions { seed: Some(1), ..opts.solver.clone() },
        SolverOptions { seed: Some(2), ..opts.solver.clone() },
        SolverOptions { tol_outer: opts.solver.tol_outer / 10.0, ..opts.solver.clone() },
    ];
    let lambdas = parallel_map(variants.len(), opts.threads, |i| solve_from(domain, &variants[i], Some(&warm)).map(|r| r.lambda))?;
    let spread = lambdas.iter().map(|l| (l - result.lambda).abs()).fold(0.0, f64::max);
    let noise_floor = spread.max(f64::EPSILON * result.lambda);
    log::info!("baseline λ = {:.8}, noise floor {:.3e}", result.lambda, noise_floor);
    Ok(Baseline { domain: domain.clone(), result, noise_floor, noise_lambdas: lambdas })
}

/// Runs `f(0..n)` on up to `threads` workers and returns the results in order.
fn parallel_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = threads.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|s| s.expect("every index is visited")).collect()
}

// ---------------------------------------------------------------------------
// Slope fitting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = c x^p`.
    LinearThroughOrigin,
    /// `y = c x^p + d x^{2p}`, which absorbs the next order of the expansion.
    LeadingOrder,
    /// `ln y = ln c + p ln x` with the exponent left free.
    LogLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub model: FitModel,
    /// `None` when the fitted exponent is more than 20% away from the predicted one.
    pub coefficient: Option<f64>,
    pub coefficient_se: Option<f64>,
    pub exponent: f64,
    pub exponent_se: f64,
    /// Root mean square residual of the coefficient fit.
    pub residual_rms: f64,
    pub samples_used: usize,
}

/// Least-squares fit of `(x, y)` samples with `x > 0`.
///
/// Only samples with `|y| > noise_floor` enter the fit, and at least four are
/// required. The exponent always comes from a log-log regression of `|y|`
/// on `x`. The coefficient is fitted with the exponent fixed at
/// `predicted_exponent`, and only when the free exponent lies within 20% of it.
pub fn fit_slope(samples: &[(f64, f64)], model: FitModel, predicted_exponent: f64, noise_floor: f64) -> Result<SlopeFit> {
    let used: Vec<(f64, f64)> = samples.iter().cloned().filter(|&(x, y)| x > 0.0 && y.is_finite() && y.abs() > noise_floor).collect();
    if used.len() < 4 {
        return Err(Error::InsufficientSignal(format!(
            "{} of {} samples above the noise floor {noise_floor:.3e}; a slope fit needs 4",
            used.len(),
            samples.len()
        )));
    }
    let m = used.len() as f64;
    let lx: Vec<f64> = used.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = used.iter().map(|s| s.1.abs().ln()).collect();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Domain("slope fit needs at least two distinct driver values".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let log_ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - exponent * a).powi(2)).sum();
    let exponent_se = (log_ssr / (m - 2.0) / sxx).sqrt();

    let consistent = (exponent - predicted_exponent).abs() <= 0.2 * predicted_exponent.abs();
    let p = predicted_exponent;
    let (coefficient, coefficient_se, residual_rms) = match model {
        FitModel::LogLog => {
            let c = intercept.exp() * used[0].1.signum();
            (Some(c), None, (log_ssr / m).sqrt())
        }
        FitModel::LinearThroughOrigin => {
            let sxx: f64 = used.iter().map(|s| s.0.powf(2.0 * p)).sum();
            let c = used.iter().map(|s| s.0.powf(p) * s.1).sum::<f64>() / sxx;
            let ssr: f64 = used.iter().map(|s| (s.1 - c * s.0.powf(p)).powi(2)).sum();
            (Some(c), Some((ssr / (m - 1.0) / sxx).sqrt()), (ssr / m).sqrt())
        }
        FitModel::LeadingOrder => {
            // Normal equations for the basis (x^p, x^{2p}).
            let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &(x, y) in &used {
                let (f, g) = (x.powf(p), x.powf(2.0 * p));
                a11 += f * f;
                a12 += f * g;
                a22 += g * g;
                b1 += f * y;
                b2 += g * y;
            }
            let det = a11 * a22 - a12 * a12;
            let c = (b1 * a22 - b2 * a12) / det;
            let d = (a11 * b2 - a12 * b1) / det;
            let ssr: f64 = used.iter().map(|&(x, y)| (y - c * x.powf(p) - d * x.powf(2.0 * p)).powi(2)).sum();
            let var = if m > 2.0 { ssr / (m - 2.0) } else { 0.0 };
            (Some(c), Some((var * a22 / det).sqrt()), (ssr / m).sqrt())
        }
    };
    Ok(SlopeFit {
        model,
        coefficient: coefficient.filter(|_| consistent),
        coefficient_se: coefficient_se.filter(|_| consistent),
        exponent,
        exponent_se,
        residual_rms,
        samples_used: used.len(),
    })
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    /// `cap₁` of the closed symmetric difference.
    Capacity,
    /// `ε^{n−1}` of the dominant hole.
    HoleRadius,
    /// The family parameter itself.
    Delta,
}

impl Driver {
    pub fn label(self) -> &'static str {
        match self {
            Driver::Capacity => "cap1",
            Driver::HoleRadius => "eps^(n-1)",
            Driver::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub delta: f64,
    pub driver: f64,
    pub lambda: f64,
    pub lambda_minus_base: f64,
    pub eigenset_volume: f64,
    /// `‖χ_{A_δ} − χ_A‖_{L¹}`.
    pub eigenset_l1_distance: f64,
    /// `|tv(ū_δ) − tv(ū)|` for unit-mass eigenfunctions.
    pub tv_mass: f64,
    /// `cap₁` of the closed symmetric difference with the base domain.
    pub capacity: Option<f64>,
    /// `(λ_δ − λ) |A_δ| / cap₁(K_δ)`.
    pub capacity_coefficient: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub delta: f64,
    /// `(λ_δ − λ_{−δ}) / (2δ)`.
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub experiment: String,
    pub driver: Driver,
    pub regime: Option<HoleRegime>,
    pub classification: Option<Classification>,
    pub warnings: Vec<String>,
    pub base_lambda: f64,
    pub base_eigenset_volume: f64,
    pub noise_floor: f64,
    /// Sorted by decreasing driver.
    pub samples: Vec<Sample>,
    pub fit: Option<SlopeFit>,
    /// Through-origin coefficient for comparison with `fit`.
    pub linear_coefficient: Option<f64>,
    /// Set when no slope could be fitted above the noise floor.
    pub inconclusive: Option<String>,
    pub predicted_coefficient: f64,
    pub predicted_exponent: f64,
    pub derivatives: Vec<DerivativeEstimate>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SlopeReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }
}

// ---------------------------------------------------------------------------
// Sweeps

struct Solved {
    delta: f64,
    domain: GridDomain,
    result: EigenResult,
}

fn sweep(base: &Baseline, domains: Vec<(f64, GridDomain)>, opts: &ExperimentOptions) -> Result<Vec<Solved>> {
    let warm = WarmStart::from(&base.result);
    let domains = &domains;
    parallel_map(domains.len(), opts.threads, |i| {
        let (delta, domain) = &domains[i];
        let result = solve_from(domain, &opts.solver, Some(&warm))?;
        log::info!("δ = {delta:.4e}: λ = {:.8}", result.lambda);
        Ok(Solved { delta: *delta, domain: domain.clone(), result })
    })
}

fn sample(base: &Baseline, s: &Solved, driver: f64, opts: &ExperimentOptions) -> Result<Sample> {
    let spec = &base.domain.spec;
    let hv = spec.cell_volume();
    let a0 = &base.result.eigenset.occupancy;
    let l1: f64 = a0.iter().zip(&s.result.eigenset.occupancy).map(|(a, b)| (a - b).abs()).sum::<f64>() * hv;
    let eigenset_volume = s.result.eigenset.volume();
    let diff = s.result.lambda - base.lambda();
    let capacity = if opts.capacities {
        let hull = symmetric_difference_hull(&base.domain, &s.domain)?;
        Some(cap1_variational_with(&hull, spec, &opts.capacity)?.value)
    } else {
        None
    };
    let capacity_coefficient = capacity.map(|c| if c > 0.0 { diff * eigenset_volume / c } else { 0.0 });
    Ok(Sample {
        delta: s.delta,
        driver,
        lambda: s.result.lambda,
        lambda_minus_base: diff,
        eigenset_volume,
        eigenset_l1_distance: l1,
        tv_mass: (tv(&s.result.u) - tv(&base.result.u)).abs(),
        capacity,
        capacity_coefficient,
        iterations: s.result.iterations.inner_total(),
    })
}

fn sort_by_driver(samples: &mut [Sample]) {
    samples.sort_by(|a, b| b.driver.abs().total_cmp(&a.driver.abs()));
}

// ---------------------------------------------------------------------------
// Hole families

/// Radius schedule `ε(δ) = scale · δ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleRate {
    pub scale: f64,
    pub exponent: f64,
}

impl HoleRate {
    pub fn radius(&self, delta: f64) -> f64 {
        self.scale * delta.powf(self.exponent)
    }
}

/// Balls `B̄_{x_i}(ε_i(δ))` removed from a base domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleFamily {
    pub base: GridDomain,
    pub centers: Vec<Vec<f64>>,
    pub rates: Vec<HoleRate>,
    /// Index of the hole that dominates as `δ → 0`.
    pub dominant: usize,
    /// Decreasing positive parameters.
    pub deltas: Vec<f64>,
}

impl HoleFamily {
    /// One hole of radius `δ` at `center`.
    pub fn single(base: GridDomain, center: Vec<f64>, radii: Vec<f64>) -> Self {
        Self { base, centers: vec![center], rates: vec![HoleRate { scale: 1.0, exponent: 1.0 }], dominant: 0, deltas: radii }
    }

    pub fn radii(&self, delta: f64) -> Vec<f64> {
        self.rates.iter().map(|r| r.radius(delta)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fam = |m: String| Err(Error::Family(m));
        if self.centers.is_empty() || self.centers.len() != self.rates.len() {
            return fam(format!("{} centres but {} radius schedules", self.centers.len(), self.rates.len()));
        }
        if self.dominant >= self.centers.len() {
            return fam(format!("dominant index {} out of range", self.dominant));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return fam("δ values must be positive".into());
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return fam("δ values must be strictly decreasing".into());
        }
        if self.rates.iter().any(|r| !(r.scale > 0.0 && r.exponent > 0.0)) {
            return fam("radius schedules need positive scale and exponent".into());
        }
        let lead = self.rates[self.dominant];
        for (i, r) in self.rates.iter().enumerate() {
            if i != self.dominant && r.exponent <= lead.exponent {
                return fam(format!("hole {i} does not vanish faster than the dominant hole {}", self.dominant));
            }
        }
        let spec = &self.base.spec;
        for c in &self.centers {
            if c.len() != spec.dim {
                return fam(format!("centre {c:?} does not have {} coordinates", spec.dim));
            }
            // The boundary regime puts centres on ∂A, which may lie on ∂Ω.
            if local_density(&self.base, c, 3.0 * spec.spacing) <= 0.0 {
                return fam(format!("centre {c:?} lies outside the closure of the domain"));
            }
        }
        Ok(())
    }

    pub fn holes(&self, delta: f64) -> Result<CompactSet> {
        let spec = &self.base.spec;
        let mut occupancy = vec![0.0; spec.len()];
        for (c, r) in self.centers.iter().zip(self.radii(delta)) {
            let ball = rasterize(&Shape::ball(c, r), spec)?;
            for (o, b) in occupancy.iter_mut().zip(&ball.occupancy) {
                *o = f64::max(*o, *b);
            }
        }
        let analytic = if self.centers.len() == 1 {
            AnalyticTag::Ball { center: self.centers[0].clone(), radius: self.rates[0].radius(delta) }
        } else {
            AnalyticTag::Generic
        };
        Ok(CompactSet(GridDomain { spec: spec.clone(), occupancy, analytic }))
    }

    pub fn domain(&self, delta: f64) -> Result<GridDomain> {
        subtract(&self.base, &self.holes(delta)?)
    }
}

/// Densities of an eigenset and of the domain around a point, with the
/// resulting regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub eigenset_density: f64,
    pub domain_density: f64,
    pub regime: Option<HoleRegime>,
}

/// Mean occupancy over the cells whose centres lie within `radius` of `x`.
pub fn local_density(domain: &GridDomain, x: &[f64], radius: f64) -> f64 {
    let spec = &domain.spec;
    let h = spec.spacing;
    let s = spec.shape3();
    let reach = (radius / h).ceil() as isize + 1;
    let mut range = [(0isize, 0isize); 3];
    for d in 0..spec.dim {
        let c = ((x[d] - spec.origin[d]) / h).floor() as isize;
        range[d] = ((c - reach).max(0), (c + reach).min(s[d] as isize - 1));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for k in range[2].0..=range[2].1 {
        for j in range[1].0..=range[1].1 {
            for i in range[0].0..=range[0].1 {
                let idx = spec.flatten([i as usize, j as usize, k as usize]);
                let c = spec.cell_center(idx);
                let r2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if r2 <= radius * radius {
                    total += domain.occupancy[idx];
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Classifies `x` against an eigenset by its density over `B_x(3h)`.
///
/// Interior when the density exceeds 0.95; reduced boundary when it lies in
/// `[0.25, 0.75]`; exterior when it is below 0.05 while the domain density
/// exceeds 0.95. Anything else is left unclassified.
pub fn classify_point(eigenset: &GridDomain, domain: &GridDomain, x: &[f64]) -> Classification {
    let r = 3.0 * eigenset.spec.spacing;
    let a = local_density(eigenset, x, r);
    let o = local_density(domain, x, r);
    let regime = if a > 0.95 {
        Some(HoleRegime::Interior)
    } else if (0.25..=0.75).contains(&a) {
        Some(HoleRegime::Boundary)
    } else if a < 0.05 && o > 0.95 {
        Some(HoleRegime::Exterior)
    } else {
        None
    };
    Classification { eigenset_density: a, domain_density: o, regime }
}

/// Point on the segment from `from` to `to` where the eigenset density over
/// `B_x(3h)` is closest to one half, located at grid resolution.
pub fn locate_reduced_boundary(eigenset: &GridDomain, from: &[f64], to: &[f64]) -> Vec<f64> {
    let len: f64 = from.iter().zip(to).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let steps = ((len / (0.25 * eigenset.spec.spacing)).ceil() as usize).max(1);
    let r = 3.0 * eigenset.spec.spacing;
    let point = |t: f64| -> Vec<f64> { from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect() };
    (0..=steps)
        .map(|k| point(k as f64 / steps as f64))
        .min_by(|p, q| {
            let dp = (local_density(eigenset, p, r) - 0.5).abs();
            let dq = (local_density(eigenset, q, r) - 0.5).abs();
            dp.total_cmp(&dq)
        })
        .expect("at least one point")
}

fn same_base(base: &Baseline, domain: &GridDomain) -> Result<()> {
    base.domain.spec.same_grid(&domain.spec)?;
    if base.domain.occupancy != domain.occupancy {
        return Err(Error::Family("baseline was computed for a different domain".into()));
    }
    Ok(())
}

/// Sweeps a hole family and compares the eigenvalue shift with the
/// first-order prediction for the regime of the dominant centre.
///
/// The regime comes from [`classify_point`] on the base eigenset; `hint` is
/// used only when the point cannot be classified, and a contradiction between
/// the two is recorded as a warning.
pub fn run_hole_experiment(fam: &HoleFamily, hint: Option<HoleRegime>, base: &Baseline, opts: &ExperimentOptions) -> Result<SlopeReport> {
    fam.validate()?;
    same_base(base, &fam.base)?;
    let spec = &fam.base.spec;
    let n = spec.dim;
    let h = spec.spacing;
    let lead = fam.rates[fam.dominant];
    if fam.deltas.iter().all(|&d| lead.radius(d) < 0.25 * h) {
        return Err(Error::Resolution(format!("every dominant hole radius is below h/4 = {:.3e}", 0.25 * h)));
    }

    let x0 = &fam.centers[fam.dominant];
    let classification = classify_point(&base.result.eigenset, &fam.base, x0);
    let mut warnings = Vec::new();
    let regime = match (classification.regime, hint) {
        (Some(c), Some(h)) if c != h => {
            warnings.push(format!("regime hint {h:?} contradicts the computed classification {c:?}"));
            c
        }
        (Some(c), _) => c,
        (None, Some(h)) => {
            warnings.push(format!(
                "centre could not be classified (eigenset density {:.3}); using the hint {h:?}",
                classification.eigenset_density
            ));
            h
        }
        (None, None) => {
            return Err(Error::Domain(format!(
                "cannot classify the dominant centre (eigenset density {:.3}) and no regime hint was given",
                classification.eigenset_density
            )))
        }
    };

    let domains = fam.deltas.iter().map(|&d| Ok((d, fam.domain(d)?))).collect::<Result<Vec<_>>>()?;
    let solved = sweep(base, domains, opts)?;
    let mut samples = solved.iter().map(|s| sample(base, s, lead.radius(s.delta).powi(n as i32 - 1), opts)).collect::<Result<Vec<_>>>()?;
    sort_by_driver(&mut samples);

    let volume = base.eigenset_volume();
    let predicted = hole_slope(regime, n, volume)?;
    let floor = opts.noise_multiple * base.noise_floor;
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.driver, s.lambda_minus_base)).collect();
    let (fit, inconclusive) = match fit_slope(&pairs, opts.fit_model, 1.0, floor) {
        Ok(f) => (Some(f), None),
        Err(Error::InsufficientSignal(m)) => (None, Some(m)),
        Err(e) => return Err(e),
    };
    let linear_coefficient = fit_slope(&pairs, FitModel::LinearThroughOrigin, 1.0, floor).ok().and_then(|f| f.coefficient);

    let mut checks = Vec::new();
    let low: Vec<String> =
        samples.iter().filter(|s| s.lambda_minus_base < -floor).map(|s| format!("δ={:.4}: {:.3e}", s.delta, s.lambda_minus_base)).collect();
    checks.push(Check::new(
        "lower_bracket",
        low.is_empty(),
        if low.is_empty() { "λ_δ ≥ λ₀ on every sample".into() } else { low.join(", ") },
    ));
    let upper = |s: &Sample| match regime {
        HoleRegime::Interior => (1.0 + opts.slack) * predicted * s.driver,
        _ => (predicted + opts.slack) * s.driver,
    };
    let worst = samples.iter().map(|s| (s.lambda_minus_base - floor) / upper(s)).fold(f64::NEG_INFINITY, f64::max);
    let over: Vec<String> = samples
        .iter()
        .filter(|s| s.lambda_minus_base > upper(s) + floor)
        .map(|s| format!("δ={:.4}: {:.5e} > {:.5e}", s.delta, s.lambda_minus_base, upper(s)))
        .collect();
    checks.push(Check::new(
        "upper_bracket",
        over.is_empty(),
        if over.is_empty() { format!("largest shift / bound = {worst:.4}") } else { over.join(", ") },
    ));
    match regime {
        HoleRegime::Interior => {
            let (ok, detail) = match fit.and_then(|f| f.coefficient) {
                Some(c) => ((c - predicted).abs() <= opts.slack * predicted, format!("fitted {c:.5} vs predicted {predicted:.5}")),
                None => (false, inconclusive.clone().unwrap_or_else(|| "exponent inconsistent with 1".into())),
            };
            checks.push(Check::new("slope", ok, detail));
        }
        HoleRegime::Exterior => {
            let top = samples.iter().map(|s| s.driver).fold(0.0, f64::max);
            let (ok, detail) = match (fit, &inconclusive) {
                (_, Some(m)) => (true, format!("inconclusive: below noise floor ({m})")),
                (Some(f), None) => {
                    let c = f.coefficient.unwrap_or(f64::INFINITY);
                    ((c * top).abs() <= floor, format!("fitted {c:.4e}; shift at largest driver {:.3e} vs 3× noise {floor:.3e}", c * top))
                }
                (None, None) => unreachable!("fit either succeeds or is inconclusive"),
            };
            checks.push(Check::new("slope", ok, detail));
        }
        HoleRegime::Boundary => {}
    }

    Ok(SlopeReport {
        experiment: "hole".into(),
        driver: Driver::HoleRadius,
        regime: Some(regime),
        classification: Some(classification),
        warnings,
        base_lambda: base.lambda(),
        base_eigenset_volume: volume,
        noise_floor: base.noise_floor,
        samples,
        fit,
        linear_coefficient,
        inconclusive,
        predicted_coefficient: predicted,
        predicted_exponent: 1.0,
        derivatives: Vec::new(),
        checks,
        passed: false,
    }
    .finish())
}

// ---------------------------------------------------------------------------
// Diffeomorphism families

/// The `o(δ)` part of the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Remainder {
    None,
    /// `R(x, δ) = amplitude |δ|^alpha ρ((x − point)/|δ|) x` with the bump
    /// `ρ(z) = (1 − |z|²)²` on the unit ball. For `alpha > 2` both `R` and
    /// `D_x R` are `o(δ)`.
    BoundaryBump {
        point: Vec<f64>,
        alpha: f64,
        amplitude: f64,
    },
}

/// `T_δ(x) = (1 − δΛ) x + R(x, δ)` applied to an analytic shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoFamily {
    pub shape: Shape,
    pub spec: GridSpec,
    /// The scaling rate `Λ`.
    pub rate: f64,
    pub remainder: Remainder,
    /// Positive parameters; every sweep uses `±δ`.
    pub deltas: Vec<f64>,
}

const INVERSION_TOL: f64 = 1e-10;
const INVERSION_MAX_ITER: usize = 200;

impl DiffeoFamily {
    pub fn pure_scaling(shape: Shape, spec: GridSpec, rate: f64, deltas: Vec<f64>) -> Self {
        Self { shape, spec, rate, remainder: Remainder::None, deltas }
    }

    fn remainder_at(&self, x: &[f64], delta: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        if let Remainder::BoundaryBump { point, alpha, amplitude } = &self.remainder {
            let s = delta.abs();
            if s == 0.0 {
                return out;
            }
            let z2: f64 = x.iter().zip(point).map(|(a, p)| ((a - p) / s).powi(2)).sum();
            if z2 < 1.0 {
                let k = amplitude * s.powf(*alpha) * (1.0 - z2).powi(2);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = k * v;
                }
            }
        }
        out
    }

    /// `D_x T_δ` at `x`, row-major.
    pub fn jacobian(&self, x: &[f64], delta: f64) -> [[f64; 3]; 3] {
        let n = self.spec.dim;
        let mut j = [[0.0; 3]; 3];
        for (i, row) in j.iter_mut().enumerate().take(n) {
            row[i] = 1.0 - delta * self.rate;
        }
        if let Remainder::BoundaryBump { point, alpha, amplitude } = &self.remainder {
            let s = delta.abs();
            if s > 0.0 {
                let z: Vec<f64> = x.iter().zip(point).map(|(a, p)| (a - p) / s).collect();
                let z2: f64 = z.iter().map(|v| v * v).sum();
                if z2 < 1.0 {
                    let k = amplitude * s.powf(*alpha);
                    let rho = (1.0 - z2).powi(2);
                    for a in 0..n {
                        j[a][a] += k * rho;
                        for b in 0..n {
                            // ∂ρ/∂x_b = −4(1 − |z|²) z_b / s.
                            j[a][b] += k * x[a] * (-4.0 * (1.0 - z2) * z[b] / s);
                        }
                    }
                }
            }
        }
        j
    }

    pub fn forward(&self, x: &[f64], delta: f64) -> Vec<f64> {
        let r = self.remainder_at(x, delta);
        x.iter().enumerate().map(|(i, v)| (1.0 - delta * self.rate) * v + r[i]).collect()
    }

    /// `T_δ^{-1}(y)` by the fixed-point iteration `x ← (y − R(x, δ)) / (1 − δΛ)`.
    pub fn inverse(&self, y: &[f64], delta: f64) -> Result<Vec<f64>> {
        let scale = 1.0 - delta * self.rate;
        let mut x: Vec<f64> = y.iter().map(|v| v / scale).collect();
        if matches!(self.remainder, Remainder::None) {
            return Ok(x);
        }
        let tol = INVERSION_TOL * self.spec.spacing;
        for _ in 0..INVERSION_MAX_ITER {
            let r = self.remainder_at(&x, delta);
            let next: Vec<f64> = y.iter().enumerate().map(|(i, v)| (v - r[i]) / scale).collect();
            let step: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            x = next;
            if !step.is_finite() {
                break;
            }
            if step <= tol {
                return Ok(x);
            }
        }
        Err(Error::Inversion(y.to_vec()))
    }

    fn determinant(&self, x: &[f64], delta: f64) -> f64 {
        let j = self.jacobian(x, delta);
        match self.spec.dim {
            2 => j[0][0] * j[1][1] - j[0][1] * j[1][0],
            _ => {
                j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                    + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
            }
        }
    }

    /// Checks that the Jacobian determinant stays above a tenth of the
    /// scaling part on a lattice over the grid and over the bump support.
    pub fn check_invertible(&self, delta: f64) -> Result<()> {
        let n = self.spec.dim;
        let floor = 0.1 * (1.0 - delta * self.rate).abs().powi(n as i32);
        if (1.0 - delta * self.rate) <= 0.0 {
            return Err(Error::Family(format!("δ = {delta} reverses orientation")));
        }
        let upper = self.spec.upper();
        let mut boxes = vec![(self.spec.origin.clone(), upper)];
        if let Remainder::BoundaryBump { point, .. } = &self.remainder {
            let s = delta.abs();
            boxes.push((point.iter().map(|p| p - s).collect(), point.iter().map(|p| p + s).collect()));
        }
        let m: usize = if n == 2 { 33 } else { 17 };
        for (lo, hi) in boxes {
            for k in 0..m.pow(n as u32) {
                let mut rem = k;
                let x: Vec<f64> = (0..n)
                    .map(|d| {
                        let t = (rem % m) as f64 / (m - 1) as f64;
                        rem /= m;
                        lo[d] + t * (hi[d] - lo[d])
                    })
                    .collect();
                let det = self.determinant(&x, delta);
                if !(det > floor) {
                    return Err(Error::Family(format!("Jacobian determinant {det:.3e} at {x:?} for δ = {delta}")));
                }
            }
        }
        Ok(())
    }

    /// Occupancy of `T_δ(Ω)`: each cell is pulled back through `T_δ^{-1}`
    /// and tested against the shape, by supersampling near the boundary.
    pub fn domain(&self, delta: f64) -> Result<GridDomain> {
        self.check_invertible(delta)?;
        let spec = &self.spec;
        let n = spec.dim;
        let h = spec.spacing;
        let s = pullback_samples(n);
        // Cells whose pulled-back centre is this far from the boundary are
        // entirely on one side; the factor 2 covers the remainder term.
        let reach = 0.5 * (n as f64).sqrt() * h * 2.0 / (1.0 - (delta * self.rate).abs());
        let mut occupancy = vec![0.0; spec.len()];
        for (idx, o) in occupancy.iter_mut().enumerate() {
            let y = spec.cell_center(idx);
            let x = self.inverse(&y, delta)?;
            match self.shape.signed_distance(&x) {
                Some(d) if d > reach => continue,
                Some(d) if d < -reach => *o = 1.0,
                _ => {
                    let lo = spec.cell_lower(spec.unflatten(idx));
                    let mut inside = 0usize;
                    let total = s.pow(n as u32);
                    for k in 0..total {
                        let mut rem = k;
                        let p: Vec<f64> = (0..n)
                            .map(|d| {
                                let t = (rem % s) as f64;
                                rem /= s;
                                lo[d] + (t + 0.5) * h / s as f64
                            })
                            .collect();
                        if self.shape.contains(&self.inverse(&p, delta)?) {
                            inside += 1;
                        }
                    }
                    *o = inside as f64 / total as f64;
                }
            }
        }
        GridDomain::from_occupancy(spec.clone(), occupancy, AnalyticTag::Generic)
    }

    /// The unperturbed domain rasterized the same way as the family members.
    pub fn base_domain(&self) -> Result<GridDomain> {
        self.domain(0.0)
    }

    /// Closed-form eigenvalue of the family member, when known.
    pub fn exact_lambda(&self, delta: f64) -> Option<f64> {
        if !matches!(self.remainder, Remainder::None) {
            return None;
        }
        let scale = 1.0 - delta * self.rate;
        match &self.shape {
            Shape::Ball { radius, .. } => ball_lambda(self.spec.dim, radius * scale).ok(),
            Shape::Annulus { radius, inner, .. } => crate::oracles::annulus_lambda(self.spec.dim, radius * scale, inner * scale).ok(),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Family("δ values must be positive; both signs are swept".into()));
        }
        if let Remainder::BoundaryBump { point, alpha, amplitude } = &self.remainder {
            if point.len() != self.spec.dim || !(*alpha > 2.0) || !amplitude.is_finite() {
                return Err(Error::Family("boundary bump needs a point in the grid dimension and alpha > 2".into()));
            }
        }
        Ok(())
    }
}

/// Sweeps `±δ` and compares the symmetric difference quotient with `Λ λ₀`.
///
/// `base` must be the solve of [`DiffeoFamily::base_domain`].
pub fn run_diffeo_experiment(fam: &DiffeoFamily, base: &Baseline, opts: &ExperimentOptions) -> Result<SlopeReport> {
    fam.validate()?;
    same_base(base, &fam.base_domain()?)?;
    let mut deltas = fam.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let signed: Vec<f64> = deltas.iter().flat_map(|&d| [d, -d]).collect();
    let domains = signed.iter().map(|&d| Ok((d, fam.domain(d)?))).collect::<Result<Vec<_>>>()?;
    let solved = sweep(base, domains, opts)?;
    let mut samples = solved.iter().map(|s| sample(base, s, s.delta, opts)).collect::<Result<Vec<_>>>()?;
    sort_by_driver(&mut samples);

    let lambda0 = base.lambda();
    let predicted = fam.rate * lambda0;
    let lookup = |d: f64| samples.iter().find(|s| s.delta == d).map(|s| s.lambda);
    let derivatives: Vec<DerivativeEstimate> =
        deltas.iter().filter_map(|&d| Some(DerivativeEstimate { delta: d, quotient: (lookup(d)? - lookup(-d)?) / (2.0 * d) })).collect();
    let pairs: Vec<(f64, f64)> = derivatives.iter().map(|e| (e.delta, e.quotient * e.delta)).collect();
    let floor = opts.noise_multiple * base.noise_floor;
    let mut warnings = Vec::new();
    let (fit, inconclusive) = match fit_slope(&pairs, FitModel::LinearThroughOrigin, 1.0, floor) {
        Ok(f) => (Some(f), None),
        Err(Error::InsufficientSignal(m)) if pairs.iter().all(|p| p.1.abs() <= floor) => (None, Some(m)),
        Err(Error::InsufficientSignal(m)) => {
            warnings.push(format!("no slope fit: {m}"));
            (None, None)
        }
        Err(e) => return Err(e),
    };

    let mut checks = Vec::new();
    let scale = if predicted != 0.0 { predicted.abs() } else { lambda0 };
    let off: Vec<String> = derivatives
        .iter()
        .filter(|e| (e.quotient - predicted).abs() > opts.derivative_tol * scale)
        .map(|e| format!("δ={}: {:.5}", e.delta, e.quotient))
        .collect();
    let all: Vec<String> = derivatives.iter().map(|e| format!("δ={}: {:.5}", e.delta, e.quotient)).collect();
    checks.push(Check::new("derivative", off.is_empty(), format!("quotients [{}] vs Λλ₀ = {predicted:.5}", all.join(", "))));
    if samples.iter().any(|s| fam.exact_lambda(s.delta).is_some()) {
        let worst = samples.iter().filter_map(|s| Some((s.lambda / fam.exact_lambda(s.delta)? - 1.0).abs())).fold(0.0, f64::max);
        checks.push(Check::new(
            "exact_family",
            worst <= opts.oracle_tol,
            format!("largest relative deviation from the closed form {worst:.4e}"),
        ));
    }
    let mut continuity = true;
    for sign in [1.0, -1.0] {
        let mut seq: Vec<&Sample> = samples.iter().filter(|s| s.delta * sign > 0.0).collect();
        seq.sort_by(|a, b| b.delta.abs().total_cmp(&a.delta.abs()));
        continuity &= seq.windows(2).all(|w| w[1].lambda_minus_base.abs() <= w[0].lambda_minus_base.abs() + floor);
    }
    checks.push(Check::new("continuity", continuity, "|λ_δ − λ₀| shrinks with |δ|".into()));

    Ok(SlopeReport {
        experiment: "diffeo".into(),
        driver: Driver::Delta,
        regime: None,
        classification: None,
        warnings,
        base_lambda: lambda0,
        base_eigenset_volume: base.eigenset_volume(),
        noise_floor: base.noise_floor,
        samples,
        fit,
        linear_coefficient: fit.and_then(|f| f.coefficient),
        inconclusive,
        predicted_coefficient: predicted,
        predicted_exponent: 1.0,
        derivatives,
        checks,
        passed: false,
    }
    .finish())
}

// ---------------------------------------------------------------------------
// Capacity-controlled sequences

/// Eigenset and total-variation convergence along a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Signed `(λ_δ − λ₀)|A_δ| / cap₁(K_δ)` per sample.
    pub coefficients: Vec<f64>,
    pub coefficient_range: (f64, f64),
    /// Smallest `|A_δ| / |A|`.
    pub min_volume_ratio: f64,
    pub l1_distances: Vec<f64>,
    pub l1_threshold: f64,
    pub tv_mass: Vec<f64>,
    pub tv_threshold: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Whether `seq` decreases to below `threshold`, tolerating rises of at most
/// one percent of the threshold.
fn decreases_below(seq: &[f64], threshold: f64) -> bool {
    let tol = 0.01 * threshold;
    seq.windows(2).all(|w| w[1] <= w[0] + tol) && seq.last().is_some_and(|&v| v < threshold)
}

/// Evaluates the capacity bound and the convergence of eigensets and of the
/// total-variation mass on the samples of any sweep that measured capacities.
pub fn capacity_convergence(report: &SlopeReport, opts: &ExperimentOptions) -> Result<ConvergenceReport> {
    let mut ordered: Vec<&Sample> = report.samples.iter().collect();
    ordered.sort_by(|a, b| b.delta.abs().total_cmp(&a.delta.abs()));
    let coefficients = ordered
        .iter()
        .map(|s| s.capacity_coefficient.ok_or_else(|| Error::Family("samples carry no capacity".into())))
        .collect::<Result<Vec<_>>>()?;
    let lo = coefficients.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = coefficients.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let volume = report.base_eigenset_volume;
    let min_volume_ratio = ordered.iter().map(|s| s.eigenset_volume / volume).fold(f64::INFINITY, f64::min);
    let l1: Vec<f64> = ordered.iter().map(|s| s.eigenset_l1_distance).collect();
    let tvm: Vec<f64> = ordered.iter().map(|s| s.tv_mass).collect();
    let l1_threshold = 0.02 * volume;
    let tv_threshold = 0.02 * report.base_lambda;
    let checks = vec![
        Check::new(
            "capacity_coefficient",
            lo >= -opts.slack && hi <= 1.0 + opts.slack,
            format!("range [{lo:.4}, {hi:.4}] against [{:.2}, {:.2}]", -opts.slack, 1.0 + opts.slack),
        ),
        Check::new("eigenset_volume", min_volume_ratio >= 0.5, format!("smallest |A_δ|/|A| = {min_volume_ratio:.4}")),
        Check::new("eigenset_l1", decreases_below(&l1, l1_threshold), format!("[{}] against {l1_threshold:.3e}", sci(&l1))),
        Check::new("tv_mass", decreases_below(&tvm, tv_threshold), format!("[{}] against {tv_threshold:.3e}", sci(&tvm))),
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(ConvergenceReport {
        coefficients,
        coefficient_range: (lo, hi),
        min_volume_ratio,
        l1_distances: l1,
        l1_threshold,
        tv_mass: tvm,
        tv_threshold,
        checks,
        passed,
    })
}

/// Sweeps an explicit sequence of perturbed domains `(δ, Ω_δ)`, with the
/// capacity of the closed symmetric difference as the driver.
///
/// The capacities must decrease along decreasing `δ`.
pub fn run_capacity_sequence(
    base: &Baseline,
    family: Vec<(f64, GridDomain)>,
    opts: &ExperimentOptions,
) -> Result<(SlopeReport, ConvergenceReport)> {
    if family.is_empty() {
        return Err(Error::Family("empty domain sequence".into()));
    }
    for (_, d) in &family {
        base.domain.spec.same_grid(&d.spec)?;
    }
    let opts = ExperimentOptions { capacities: true, ..opts.clone() };
    let solved = sweep(base, family, &opts)?;
    let mut samples = solved.iter().map(|s| sample(base, s, 0.0, &opts)).collect::<Result<Vec<_>>>()?;
    for s in samples.iter_mut() {
        s.driver = s.capacity.unwrap_or(0.0);
    }
    samples.sort_by(|a, b| b.delta.abs().total_cmp(&a.delta.abs()));
    if samples.windows(2).any(|w| w[1].driver > w[0].driver) {
        return Err(Error::Family("capacity of the perturbation does not decrease with δ".into()));
    }
    let floor = opts.noise_multiple * base.noise_floor;
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.driver, s.lambda_minus_base)).collect();
    let (fit, inconclusive) = match fit_slope(&pairs, FitModel::LinearThroughOrigin, 1.0, floor) {
        Ok(f) => (Some(f), None),
        Err(Error::InsufficientSignal(m)) => (None, Some(m)),
        Err(e) => return Err(e),
    };
    let volume = base.eigenset_volume();
    let mut report = SlopeReport {
        experiment: "capacity".into(),
        driver: Driver::Capacity,
        regime: None,
        classification: None,
        warnings: Vec::new(),
        base_lambda: base.lambda(),
        base_eigenset_volume: volume,
        noise_floor: base.noise_floor,
        samples,
        fit,
        linear_coefficient: fit.and_then(|f| f.coefficient),
        inconclusive,
        predicted_coefficient: 1.0 / volume,
        predicted_exponent: 1.0,
        derivatives: Vec::new(),
        checks: Vec::new(),
        passed: false,
    };
    let convergence = capacity_convergence(&report, &opts)?;
    report.checks = convergence.checks.clone();
    Ok((report.finish(), convergence))
}

/// `ω_{n−1} ε^{n−1}`, the capacity of a single closed ball.
pub fn ball_capacity(n: usize, eps: f64) -> f64 {
    unit_sphere_area(n) * eps.powi(n as i32 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exact_linear_data() {
        let s: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&x| (x, 3.0 * x)).collect();
        for model in [FitModel::LinearThroughOrigin, FitModel::LeadingOrder, FitModel::LogLog] {
            let f = fit_slope(&s, model, 1.0, 0.0).unwrap();
            assert!((f.coefficient.unwrap() - 3.0).abs() < 1e-12, "{model:?}");
            assert!((f.exponent - 1.0).abs() < 1e-12);
            assert!(f.residual_rms < 1e-12);
        }
    }

    #[test]
    fn quadratic_remainder_is_tolerated() {
        let s: Vec<(f64, f64)> = (0..7).map(|k| 1e-3 * 2f64.powi(k)).map(|x| (x, 2.0 * x + 0.001 * x * x)).collect();
        let f = fit_slope(&s, FitModel::LinearThroughOrigin, 1.0, 0.0).unwrap();
        assert!((f.coefficient.unwrap() / 2.0 - 1.0).abs() < 0.01);
        let g = fit_slope(&s, FitModel::LeadingOrder, 1.0, 0.0).unwrap();
        assert!((g.coefficient.unwrap() / 2.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_data_is_insufficient_signal() {
        let s: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&x| (x, 0.0)).collect();
        assert!(matches!(fit_slope(&s, FitModel::LinearThroughOrigin, 1.0, 1e-9), Err(Error::InsufficientSignal(_))));
    }

    #[test]
    fn wrong_power_withholds_coefficient() {
        let s: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&x| (x, x * x)).collect();
        let f = fit_slope(&s, FitModel::LinearThroughOrigin, 1.0, 0.0).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(f.coefficient.is_none());
    }

    fn disk(n: usize) -> GridDomain {
        let g = GridSpec::cube(2, n, -1.25, 1.25).unwrap();
        rasterize(&Shape::ball(&[0.0, 0.0], 1.0), &g).unwrap()
    }

    #[test]
    fn hole_family_validation() {
        let base = disk(48);
        let ok = HoleFamily::single(base.clone(), vec![0.0, 0.0], vec![0.2, 0.1]);
        ok.validate().unwrap();
        let rising = HoleFamily::single(base.clone(), vec![0.0, 0.0], vec![0.1, 0.2]);
        assert!(matches!(rising.validate(), Err(Error::Family(_))));
        let outside = HoleFamily::single(base.clone(), vec![1.2, 0.0], vec![0.2, 0.1]);
        assert!(matches!(outside.validate(), Err(Error::Family(_))));
        let mut two = ok.clone();
        two.centers.push(vec![0.5, 0.0]);
        two.rates.push(HoleRate { scale: 1.0, exponent: 1.0 });
        assert!(matches!(two.validate(), Err(Error::Family(_))));
        two.rates[1].exponent = 2.0;
        two.validate().unwrap();
    }

    #[test]
    fn hole_domain_loses_the_ball() {
        let base = disk(128);
        let fam = HoleFamily::single(base.clone(), vec![0.0, 0.0], vec![0.2]);
        let d = fam.domain(0.2).unwrap();
        assert!(((base.volume() - d.volume()) / (PI * 0.04) - 1.0).abs() < 1e-9);
        assert!(matches!(d.analytic, AnalyticTag::Annulus { .. }));
    }

    #[test]
    fn density_classification() {
        let base = disk(128);
        let c = classify_point(&base, &base, &[0.0, 0.0]);
        assert_eq!(c.regime, Some(HoleRegime::Interior));
        let p = locate_reduced_boundary(&base, &[0.0, 0.0], &[1.2, 0.0]);
        assert!((p[0] - 1.0).abs() < 0.02, "{p:?}");
        assert_eq!(classify_point(&base, &base, &p).regime, Some(HoleRegime::Boundary));
        let empty = GridDomain::empty(&base.spec);
        assert_eq!(classify_point(&empty, &base, &[0.0, 0.0]).regime, Some(HoleRegime::Exterior));
    }

    #[test]
    fn scaling_map_roundtrip() {
        let g = GridSpec::cube(2, 64, -1.25, 1.25).unwrap();
        let fam = DiffeoFamily {
            shape: Shape::ball(&[0.0, 0.0], 1.0),
            spec: g,
            rate: 0.5,
            remainder: Remainder::BoundaryBump { point: vec![1.0, 0.0], alpha: 3.0, amplitude: 1.0 },
            deltas: vec![0.1],
        };
        let y = fam.forward(&[0.98, 0.01], 0.1);
        let x = fam.inverse(&y, 0.1).unwrap();
        assert!((x[0] - 0.98).abs() < 1e-9 && (x[1] - 0.01).abs() < 1e-9);
        fam.check_invertible(0.1).unwrap();
        fam.check_invertible(-0.1).unwrap();
    }

    #[test]
    fn pulled_back_disk_has_scaled_area() {
        let g = GridSpec::cube(2, 128, -1.25, 1.25).unwrap();
        let fam = DiffeoFamily::pure_scaling(Shape::ball(&[0.0, 0.0], 1.0), g, 0.5, vec![0.1]);
        for d in [0.1, 0.0, -0.1] {
            let r = 1.0 - 0.5 * d;
            let v = fam.domain(d).unwrap().volume();
            assert!((v / (PI * r * r) - 1.0).abs() < 1e-4, "{d}: {v}");
        }
        assert!((fam.exact_lambda(0.1).unwrap() - 2.0 / 0.95).abs() < 1e-12);
    }

    #[test]
    fn orientation_reversal_is_rejected() {
        let g = GridSpec::cube(2, 32, -1.25, 1.25).unwrap();
        let fam = DiffeoFamily::pure_scaling(Shape::ball(&[0.0, 0.0], 1.0), g, 0.5, vec![3.0]);
        assert!(matches!(fam.domain(3.0), Err(Error::Family(_))));
    }

    #[test]
    fn constant_family_has_zero_shift() {
        let base_domain = disk(48);
        let opts = ExperimentOptions { capacities: true, ..ExperimentOptions::default() };
        let base = baseline(&base_domain, &opts).unwrap();
        let family = (0..4).map(|k| (0.1 / (k + 1) as f64, base_domain.clone())).collect();
        let (report, conv) = run_capacity_sequence(&base, family, &opts).unwrap();
        for s in &report.samples {
            assert!(s.lambda_minus_base.abs() <= 3.0 * base.noise_floor + 1e-12, "{s:?}");
            assert_eq!(s.capacity, Some(0.0));
            assert_eq!(s.capacity_coefficient, Some(0.0));
        }
        assert!(report.inconclusive.is_some());
        assert!(conv.passed, "{conv:?}");
    }
}
