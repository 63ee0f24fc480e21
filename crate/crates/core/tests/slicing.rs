use std::f64::consts::PI;

use noether_paths::profiles::ShapeFunction;
use noether_paths::slicing::*;
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[test]
fn single_free_slice() {
    let s = DyadicSlicing::new(0.0, 1.0, 0).unwrap();
    let f = SliceIntegrand::free(1.0, 0.0, 1.0).unwrap();
    let g = eval_g(&[0.0, 1.0], &s, &f).unwrap();
    let expected = (2.0 * PI * I).sqrt().inv() * Complex64::from_polar(1.0, 0.5);
    assert!((g - expected).norm() < 1e-15);
    assert!((g.norm() - 0.398_942_280_401_432_7).abs() < 1e-15);
}

#[test]
fn constant_path_is_pure_prefactor() {
    let s = DyadicSlicing::new(0.0, 2.0, 3).unwrap();
    let f = SliceIntegrand::free(1.0, 0.7, 0.7).unwrap();
    let g = eval_g(&[0.7; 9], &s, &f).unwrap();
    let expected = (2.0 * PI * I * 0.25).sqrt().inv().powu(8);
    assert!((g - expected).norm() < 1e-15);
}

#[test]
fn integrand_factorizes() {
    let s = DyadicSlicing::new(0.0, 1.0, 2).unwrap();
    let f = SliceIntegrand::new(ShapeFunction::Quartic(0.3), 1.0, 0.1, -0.4).unwrap();
    let free = SliceIntegrand { shape: ShapeFunction::Zero, ..f.clone() };
    let pts = [0.1, 0.5, -0.2, 0.3, -0.4];
    let lhs = eval_g(&pts, &s, &f).unwrap();
    let rhs = eval_g(&pts, &s, &free).unwrap() * potential_phase(&pts, &s, &f).unwrap();
    assert!((lhs - rhs).norm() < 1e-14 * lhs.norm());
    assert!(eval_g(&[0.0, 0.5, -0.2, 0.3, -0.4], &s, &f).is_err());
}

#[test]
fn analytic_free_collapse() {
    let f = SliceIntegrand::free(1.0, -0.3, 1.2).unwrap();
    let exact = free_kernel(1.2, -0.3, 1.0, 1.0);
    for q in 0..=10 {
        let s = DyadicSlicing::new(0.0, 1.0, q).unwrap();
        let g = gamma_m_analytic(&s, &f).unwrap();
        assert!((g - exact).norm() < 1e-11 * exact.norm(), "q = {q}");
    }
}

#[test]
fn analytic_oscillator_matches_closed_sliced_form() {
    // With both ends at zero the sliced oscillator is a discrete sine
    // recursion: Gamma_m = (2 pi i dt)^(-1/2) (sin th / sin(m th))^(1/2)
    // with cos th = 1 - dt^2 / 2.
    let f = SliceIntegrand::new(ShapeFunction::Quadratic(1.0), 1.0, 0.0, 0.0).unwrap();
    for q in [1, 4, 8] {
        let s = DyadicSlicing::new(0.0, 1.0, q).unwrap();
        let m = s.m() as f64;
        let dt = s.dt();
        let th = (1.0 - dt * dt / 2.0).acos();
        let expected = (2.0 * PI * I * dt).sqrt().inv() * (th.sin() / (m * th).sin()).sqrt();
        let g = gamma_m_analytic(&s, &f).unwrap();
        assert!((g - expected).norm() < 1e-12 * expected.norm(), "q = {q}: {g} vs {expected}");
    }
}

#[test]
fn grid_free_collapse() {
    let grid = SpatialGrid::default();
    let f = SliceIntegrand::free(1.0, 0.0, 1.0).unwrap();
    let exact = free_kernel(1.0, 0.0, 1.0, 1.0);
    for q in 1..=6 {
        let s = DyadicSlicing::new(0.0, 1.0, q).unwrap();
        let g = gamma_m_grid_value(&s, &f, &grid).unwrap();
        assert!((g - exact).norm() < 1e-5 * exact.norm(), "q = {q}: {}", (g - exact).norm() / exact.norm());
    }
}

#[test]
fn grid_oscillator() {
    let grid = SpatialGrid::default();
    let f = SliceIntegrand::new(ShapeFunction::Quadratic(1.0), 1.0, 0.0, 0.0).unwrap();
    let s = DyadicSlicing::new(0.0, 1.0, 8).unwrap();
    let g = gamma_m_grid_value(&s, &f, &grid).unwrap();
    let exact = (2.0 * PI * I * 1f64.sin()).sqrt().inv();
    assert!((g - exact).norm() < 1e-3 * exact.norm());
    let a = gamma_m_analytic(&s, &f).unwrap();
    assert!((g - a).norm() < 1e-6 * a.norm(), "grid {g} analytic {a}");
}

#[test]
fn constant_shape_is_a_global_phase() {
    let grid = SpatialGrid::default();
    let s = DyadicSlicing::new(0.0, 1.5, 5).unwrap();
    let free = gamma_m_grid(&s, &SliceIntegrand::free(1.0, 0.5, -1.0).unwrap(), &grid).unwrap().field;
    let shifted = gamma_m_grid(&s, &SliceIntegrand::new(ShapeFunction::Constant(0.8), 1.0, 0.5, -1.0).unwrap(), &grid)
        .unwrap()
        .field;
    let phase = Complex64::from_polar(1.0, -0.8 * 1.5);
    let worst = free.values.iter().zip(&shifted.values).map(|(a, b)| (a * phase - b).norm()).fold(0.0, f64::max);
    let peak = free.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-13 * peak, "{worst}");
}

#[test]
fn split_step_preserves_norm() {
    let grid = SpatialGrid::new(-20.0, 20.0, 2048, WindowKind::None).unwrap();
    let mut step = SplitStep::new(&grid, 1.0, 0.01).unwrap();
    let mut field: Vec<Complex64> =
        grid.points().iter().map(|&x| Complex64::from_polar((-x * x).exp(), 2.0 * x)).collect();
    let before = GridField { grid, values: field.clone() }.norm();
    step.kick(&mut field, |x| 0.5 * x * x);
    step.drift(&mut field);
    let after = GridField { grid, values: field }.norm();
    assert!((after - before).abs() <= 1e-12 * before);
}

#[test]
fn direct_matches_free_composition() {
    let s = DyadicSlicing::new(0.0, 1.0, 1).unwrap();
    let f = SliceIntegrand::free(1.0, 0.0, 0.5).unwrap();
    let d = gamma_m_direct(&s, &f, DEFAULT_EPS_ROT).unwrap();
    let exact = free_kernel(0.5, 0.0, 1.0, 1.0);
    assert!((d.value - exact).norm() < 1e-6 * exact.norm(), "{:?} vs {exact}", d);
}

#[test]
fn refinement_reports_gaps() {
    let f = SliceIntegrand::free(1.0, 0.0, 1.0).unwrap();
    let est = refine_with(Engine::Analytic, &f, (0.0, 1.0), &SpatialGrid::default(), 4, 1e-9).unwrap();
    assert_eq!(est.values.len(), 4);
    assert_eq!(est.cauchy_gaps.len(), 3);
    assert!(est.converged);
    assert_eq!(est.converged_at, Some(1));
    assert!(refine_to_convergence(&f, (0.0, 1.0), &SpatialGrid::default(), 13, 1e-6).is_err());
}
