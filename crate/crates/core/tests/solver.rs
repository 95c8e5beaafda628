use cheeger_core::cheeger_solver::{check_certificate, extract_eigenset, inner_pd, solve, solve_from, WarmStart};
use cheeger_core::geometry::{rasterize, subtract};
use cheeger_core::oracles::{lower_bound, square_arc_radius};
use cheeger_core::{CompactSet, Error, GridDomain, GridSpec, ScalarField, Shape, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disk(n: usize, radius: f64, half_width: f64) -> GridDomain {
    let g = GridSpec::cube(2, n, -half_width, half_width).unwrap();
    rasterize(&Shape::ball(&[0.0, 0.0], radius), &g).unwrap()
}

#[test]
fn eigen_result_invariants_on_a_disk() {
    let d = disk(96, 1.0, 1.25);
    let r = solve(&d, &SolverOptions::default()).unwrap();
    let hv = d.spec.cell_volume();
    assert!(r.u.values.iter().all(|&v| v >= 0.0));
    assert!((r.u.values.iter().sum::<f64>() * hv - 1.0).abs() < 1e-9);
    let m = d.measure();
    assert!(r.lambda >= lower_bound(2, m.volume).unwrap());
    assert!(r.lambda <= m.perimeter / m.volume + 1e-9);
    assert!(r.residuals.ratio_mismatch <= 0.05 * r.lambda);
    assert!(r.dual.max_norm() <= 1.0 + 1e-9);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!((r.lambda / 2.0 - 1.0).abs() < 0.03, "{}", r.lambda);
    let c = check_certificate(&r, &d, 0.05).unwrap();
    assert!(c.passed, "{c:?}");
}

#[test]
fn zero_volume_is_degenerate() {
    let g = GridSpec::cube(2, 32, -1.0, 1.0).unwrap();
    let empty = rasterize(&Shape::Empty, &g).unwrap();
    assert!(matches!(solve(&empty, &SolverOptions::default()), Err(Error::Degenerate(_))));
}

#[test]
fn thin_domain_is_rejected() {
    let g = GridSpec::cube(2, 64, -1.0, 1.0).unwrap();
    let h = g.spacing;
    let strip = rasterize(&Shape::rectangle(&[0.0, 0.0], &[1.0, 2.0 * h]), &g).unwrap();
    assert!(matches!(solve(&strip, &SolverOptions::default()), Err(Error::Resolution(_))));
}

#[test]
fn subcritical_inner_problem_is_trivial() {
    let d = disk(64, 1.0, 1.25);
    let r = inner_pd(&d, 1.0, None, &SolverOptions::default()).unwrap();
    assert!(r.value.abs() < 1e-9, "{}", r.value);
    assert!(r.u.values.iter().all(|&v| v.abs() < 1e-9));
}

#[test]
fn critical_inner_problem_is_nonpositive() {
    let d = disk(64, 1.0, 1.25);
    let m = d.measure();
    let r = inner_pd(&d, m.perimeter / m.volume, None, &SolverOptions::default()).unwrap();
    assert!(r.value <= 1e-9, "{}", r.value);
    assert!(r.dual_value <= r.value + 1e-12);
}

#[test]
fn warm_start_saves_iterations_without_changing_the_answer() {
    let d = disk(96, 1.0, 1.25);
    let opts = SolverOptions::default();
    let base = solve(&d, &opts).unwrap();
    let hole = CompactSet(rasterize(&Shape::ball(&[0.0, 0.0], 0.1), &d.spec).unwrap());
    let punched = subtract(&d, &hole).unwrap();
    let cold = solve(&punched, &SolverOptions { multilevel: false, ..opts.clone() }).unwrap();
    let warm = solve_from(&punched, &opts, Some(&WarmStart::from(&base))).unwrap();
    assert!(warm.iterations.inner_total() < cold.iterations.inner_total());
    assert!((warm.lambda - cold.lambda).abs() < 1e-4 * cold.lambda);
    assert!(base.lambda <= warm.lambda + 1e-6);
}

#[test]
fn scaling_law() {
    let opts = SolverOptions::default();
    let lambda = |r: f64| solve(&disk(160, r, 2.5), &opts).unwrap().lambda;
    let one = lambda(1.0);
    for t in [0.5, 2.0] {
        let scaled = lambda(t);
        assert!((scaled * t / one - 1.0).abs() < 0.01, "t = {t}: {scaled} vs {one}");
    }
}

#[test]
fn indicator_thresholds_to_itself() {
    let d = disk(64, 1.0, 1.25);
    let total = d.volume();
    let values: Vec<f64> = d.occupancy.iter().map(|v| v / total).collect();
    let u = ScalarField::full(d.spec.clone(), values).unwrap();
    let set = extract_eigenset(&u, &d, 64).unwrap();
    for (a, b) in set.domain.occupancy.iter().zip(&d.occupancy) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn zero_function_has_no_eigenset() {
    let d = disk(64, 1.0, 1.25);
    let u = ScalarField::zeros(&d.spec);
    assert!(matches!(extract_eigenset(&u, &d, 64), Err(Error::Degenerate(_))));
}

#[test]
fn square_eigenset_cuts_the_corners() {
    let g = GridSpec::cube(2, 128, -0.1, 1.1).unwrap();
    let sq = rasterize(&Shape::rectangle(&[0.5, 0.5], &[1.0, 1.0]), &g).unwrap();
    let r = solve(&sq, &SolverOptions::default()).unwrap();
    // The cell at the corner of the square lies outside the rounded set.
    let corner = g.flatten([((0.1 + 0.5 * g.spacing) / g.spacing) as usize, ((0.1 + 0.5 * g.spacing) / g.spacing) as usize, 0]);
    assert!(r.eigenset.occupancy[corner] < 0.05, "{}", r.eigenset.occupancy[corner]);
    let center = g.flatten([64, 64, 0]);
    assert!(r.eigenset.occupancy[center] > 0.99);
    let rr = square_arc_radius();
    assert!((r.eigenset.volume() / (1.0 - (4.0 - std::f64::consts::PI) * rr * rr) - 1.0).abs() < 0.05);
}

#[test]
fn random_functions_fail_the_certificate() {
    let d = disk(64, 1.0, 1.25);
    let mut r = solve(&d, &SolverOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hv = d.spec.cell_volume();
    let mut values: Vec<f64> = d.occupancy.iter().map(|&o| if o > 0.0 { o * rng.gen::<f64>() } else { 0.0 }).collect();
    let total: f64 = values.iter().sum::<f64>() * hv;
    values.iter_mut().for_each(|v| *v /= total);
    r.u.values = values;
    let c = check_certificate(&r, &d, 0.05).unwrap();
    assert!(c.alignment > 0.05, "{c:?}");
    assert!(!c.passed);
}
