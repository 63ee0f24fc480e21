use noether_paths::profiles::*;

#[test]
fn builtin_derivatives_match_differences() {
    let profiles = [
        Profile::Constant(2.0),
        Profile::Polynomial(vec![1.0, -0.5, 0.25, 0.1]),
        Profile::Cos { amplitude: 1.0, omega: 1.3, phase: 0.2 },
        Profile::SqrtQuadratic { c0: 1.0, c1: 0.0, c2: 1.0 },
        Profile::Exp { amplitude: 0.5, rate: -0.7 },
        Profile::SqrtQuadratic { c0: 1.0, c1: 0.0, c2: 1.0 }.scaled(0.3),
    ];
    for p in &profiles {
        p.check_derivatives((0.0, 3.0), 31, 1e-6).unwrap();
    }
}

#[test]
fn inconsistent_custom_derivative_is_rejected() {
    let p = Profile::Custom(CustomFn::new(|t| t * t).with_d1(|t| 3.0 * t));
    assert!(p.check_derivatives((0.0, 1.0), 5, 1e-6).is_err());
    let p = Profile::Custom(CustomFn::new(|t| t * t).with_d1(|t| 2.0 * t));
    p.check_derivatives((0.0, 1.0), 5, 1e-6).unwrap();
    assert!((p.d2(0.4) - 2.0).abs() < 1e-6);
}

#[test]
fn differenced_custom_profile() {
    let p = Profile::Custom(CustomFn::new(f64::sin));
    assert!((p.d1(0.7) - 0.7f64.cos()).abs() < 1e-9);
    assert!((p.d2(0.7) + 0.7f64.sin()).abs() < 1e-6);
}

#[test]
fn spline_interpolates_smooth_data() {
    let knots: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
    let values: Vec<f64> = knots.iter().map(|t| t.sin()).collect();
    let s = CubicSpline::new(knots, values).unwrap();
    let (v, d, _) = s.eval(1.234);
    assert!((v - 1.234f64.sin()).abs() < 1e-5);
    assert!((d - 1.234f64.cos()).abs() < 1e-4);
    Profile::Tabulated(s).check_derivatives((0.05, 3.95), 17, 1e-6).unwrap();
}

#[test]
fn spline_rejects_unsorted_knots() {
    assert!(CubicSpline::new(vec![0.0, 2.0, 1.0], vec![0.0; 3]).is_err());
}

#[test]
fn shape_coefficients() {
    assert_eq!(ShapeFunction::Quadratic(2.0).quadratic_coefficients(), Some((2.0, 0.0, 0.0)));
    assert!(ShapeFunction::Abs(1.0).quadratic_coefficients().is_none());
    assert!(ShapeFunction::Zero.is_zero());
    assert!(!ShapeFunction::Linear(1.0).is_zero());
    assert_eq!(ShapeFunction::Abs(2.0).d1(-3.0), -2.0);
}
