use noether_paths::profiles::{Profile, ScaleProfile, ShapeFunction};
use noether_paths::symmetry::*;
use noether_paths::*;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

fn tdho_sqrt(window: (f64, f64)) -> SymmetrySystem {
    SymmetrySystem::new(
        ScaleProfile::new(Profile::SqrtQuadratic { c0: 1.0, c1: 0.0, c2: 1.0 }, Profile::Constant(0.0)),
        ShapeFunction::Zero,
        1.0,
        window,
    )
    .unwrap()
}

fn static_oscillator(window: (f64, f64)) -> SymmetrySystem {
    let rho = Profile::Cos { amplitude: 1.0, omega: 1.0, phase: 0.0 };
    SymmetrySystem::new(ScaleProfile::new(rho, Profile::Constant(0.0)), ShapeFunction::Zero, 1.0, window).unwrap()
}

fn uniform_force(window: (f64, f64)) -> SymmetrySystem {
    let a = Profile::Polynomial(vec![0.0, 0.0, -0.5]);
    SymmetrySystem::new(ScaleProfile::new(Profile::Constant(1.0), a), ShapeFunction::Zero, 1.0, window).unwrap()
}

#[test]
fn scaled_shift_gives_time_dependent_oscillator() {
    let rho = Profile::SqrtQuadratic { c0: 1.0, c1: 0.0, c2: 1.0 };
    let a = rho.clone().scaled(0.7);
    let sys = SymmetrySystem::new(ScaleProfile::new(rho.clone(), a), ShapeFunction::Zero, 1.0, (0.0, 3.0)).unwrap();
    for &(x, t) in &[(0.3, 0.5), (-1.2, 2.0), (2.0, 2.9)] {
        let omega = -rho.d2(t) / rho.value(t);
        let v = sys.potential_at(x, t).unwrap();
        assert!((v - 0.5 * omega * x * x).abs() < 1e-13, "V = {v}");
    }
}

#[test]
fn identity_profile_has_no_potential() {
    let sys = SymmetrySystem::free((0.0, 1.0)).unwrap();
    assert_eq!(sys.potential_at(3.0, 0.5).unwrap(), 0.0);
    assert_eq!(sys.invariant_at(3.0, 2.0, 0.5).unwrap(), 2.0);
}

#[test]
fn shifted_profile_gives_uniform_force() {
    let sys = uniform_force((0.0, 2.0));
    for &(x, t) in &[(0.0, 0.0), (1.5, 1.0), (-2.0, 1.9)] {
        assert!((sys.potential_at(x, t).unwrap() - x).abs() < 1e-14);
    }
}

#[test]
fn tdho_invariant_form() {
    let rho = Profile::SqrtQuadratic { c0: 1.0, c1: 0.0, c2: 1.0 };
    let c = 0.4;
    let sys = SymmetrySystem::new(
        ScaleProfile::new(rho.clone(), rho.clone().scaled(c)),
        ShapeFunction::Zero,
        1.0,
        (0.0, 2.0),
    )
    .unwrap();
    // With a = C rho the invariant is the C = 0 form evaluated at x - C rho.
    let (x, v, t) = (0.8, -0.3, 1.1);
    let expected = {
        let (r, rd) = (rho.value(t), rho.d1(t));
        let xs = x - c * r;
        let vs = v - c * rd;
        0.5 * (r * vs - rd * xs).powi(2)
    };
    assert!((sys.invariant_at(x, v, t).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn invariant_conserved_along_sqrt_profile_flow() {
    let sys = tdho_sqrt((0.0, 5.0));
    let traj = el_flow(&sys, 1.0, 0.0, 0.0, 5.0, 1e-10).unwrap();
    let i0 = sys.invariant_at(1.0, 0.0, 0.0).unwrap();
    let (_, x5, v5) = traj.last_state();
    let i5 = sys.invariant_at(x5, v5, 5.0).unwrap();
    assert!((i5 - i0).abs() < 1e-8);
}

#[test]
fn window_and_positivity_errors() {
    let sys = SymmetrySystem::free((0.0, 1.0)).unwrap();
    assert!(matches!(sys.potential_at(0.0, 1.5), Err(Error::Domain(_))));
    let rho = Profile::Cos { amplitude: 1.0, omega: 1.0, phase: 0.0 };
    let err = SymmetrySystem::new(ScaleProfile::new(rho, Profile::Constant(0.0)), ShapeFunction::Zero, 1.0, (0.0, 2.0));
    assert!(matches!(err, Err(Error::Domain(_))));
    assert!(SymmetrySystem::new(ScaleProfile::identity(), ShapeFunction::Zero, 1.0, (1.0, 1.0)).is_err());
    assert!(SymmetrySystem::new(ScaleProfile::identity(), ShapeFunction::Zero, -1.0, (0.0, 1.0)).is_err());
}

#[test]
fn free_flight() {
    let sys = SymmetrySystem::free((0.0, 2.0)).unwrap();
    let traj = el_flow(&sys, 0.0, 1.0, 0.0, 2.0, 1e-10).unwrap();
    let (t, x, v) = traj.last_state();
    assert_eq!(t, 2.0);
    assert!((x - 2.0).abs() < 1e-12);
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn oscillator_flow_matches_cosine() {
    let sys = static_oscillator((0.0, 1.0));
    let traj = el_flow(&sys, 1.0, 0.0, 0.0, FRAC_PI_4, 1e-10).unwrap();
    let (_, x, _) = traj.last_state();
    assert!((x - FRAC_PI_4.cos()).abs() < 1e-9);
}

#[test]
fn uniform_force_kinematics() {
    let sys = uniform_force((0.0, 2.0));
    let times: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
    let traj = el_flow_on_grid(&sys, 0.0, 0.0, &times, 1e-10).unwrap();
    for (t, x) in traj.times.iter().zip(&traj.positions) {
        assert!((x + t * t / 2.0).abs() < 1e-9);
    }
}

#[test]
fn backward_flow_ordering() {
    let sys = static_oscillator((0.0, 1.0));
    let back = el_flow(&sys, 0.5, 0.1, 1.0, 0.0, 1e-10).unwrap();
    assert_eq!(back.times[0], 0.0);
    assert_eq!(*back.times.last().unwrap(), 1.0);
    assert_eq!(*back.positions.last().unwrap(), 0.5);
}

#[test]
fn transform_at_zero_is_identity() {
    let sys = tdho_sqrt((0.0, 2.0));
    let traj = el_flow(&sys, 1.0, 0.5, 0.0, 1.0, 1e-9).unwrap();
    assert_eq!(symmetry_transform(&sys, &traj, 0.0).unwrap(), traj);
}

#[test]
fn tdho_transform_matches_closed_form() {
    let sys = tdho_sqrt((0.0, 3.0));
    let eps = 1e-3;
    let path = Trajectory::from_fn(0.0, 2.0, 4001, |t| 1.0 + 0.5 * t, |_| 0.5).unwrap();
    let out = symmetry_transform(&sys, &path, eps).unwrap();
    // Endpoints are not resampled: t_hat = t + eps rho^2, x_hat = x + (eps/2) d(rho^2)/dt x.
    let (t_end, x_end) = (2.0, 2.0);
    let rho2 = 1.0 + t_end * t_end;
    let drho2 = 2.0 * t_end;
    assert!((out.times.last().unwrap() - (t_end + eps * rho2)).abs() < 1e-14);
    assert!((out.positions.last().unwrap() - (x_end + 0.5 * eps * drho2 * x_end)).abs() < 1e-13);
    assert!((out.times[0] - eps).abs() < 1e-15);
    assert!((out.positions[0] - 1.0).abs() < 1e-15);
}

#[test]
fn non_monotone_transform_is_rejected() {
    let sys = tdho_sqrt((0.0, 3.0));
    let path = Trajectory::from_fn(0.0, 2.0, 11, |t| t, |_| 1.0).unwrap();
    // d(rho^2)/dt = 2t, so eps = -1 makes 1 + 2 eps t negative for t > 0.5.
    assert!(matches!(symmetry_transform(&sys, &path, -1.0), Err(Error::Invalid(_))));
}

#[test]
fn action_examples() {
    let free = SymmetrySystem::free((0.0, 1.0)).unwrap();
    let line = Trajectory::from_fn(0.0, 1.0, 11, |t| t, |_| 1.0).unwrap();
    assert!((action_of_path(&free, &line).unwrap() - 0.5).abs() < 1e-15);

    // rho = cos t only admits windows shorter than pi/2; a shifted cosine
    // covers [0, pi/2] with the same V = x^2/2.
    let rho = Profile::Cos { amplitude: 1.0, omega: 1.0, phase: -FRAC_PI_4 };
    let osc =
        SymmetrySystem::new(ScaleProfile::new(rho, Profile::Constant(0.0)), ShapeFunction::Zero, 1.0, (0.0, FRAC_PI_2))
            .unwrap();
    let cosine = Trajectory::from_fn(0.0, FRAC_PI_2, 201, f64::cos, |t| -t.sin()).unwrap();
    assert!(action_of_path(&osc, &cosine).unwrap().abs() < 1e-10);

    let zero = Trajectory::from_fn(0.0, FRAC_PI_2, 21, |_| 0.0, |_| 0.0).unwrap();
    assert_eq!(action_of_path(&osc, &zero).unwrap(), 0.0);
}

#[test]
fn action_error_is_fourth_order() {
    let free = SymmetrySystem::free((0.0, 1.0)).unwrap();
    let exact = 0.25 * (1.0 - (2.0f64).sin() / 2.0); // integral of sin^2 / 2 on [0,1]
    let err = |n| {
        let p = Trajectory::from_fn(0.0, 1.0, n, |t: f64| 1.0 - t.cos(), f64::sin).unwrap();
        (action_of_path(&free, &p).unwrap() - exact).abs()
    };
    let (e1, e2) = (err(6), err(11));
    assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
}
