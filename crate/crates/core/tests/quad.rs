use noether_paths::quad::*;

#[test]
fn gk_polynomial_and_transcendental() {
    let r = integrate_gk(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
    assert!((r.value - 1.0 / 3.0).abs() < 1e-14);
    let r = integrate_gk(f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap();
    assert!((r.value - 2.0).abs() < 1e-12);
    let r = integrate_gk(|x| 1.0 / (1.0 + x * x), 0.0, 50.0, 1e-11).unwrap();
    assert!((r.value - 50f64.atan()).abs() < 1e-11);
}

#[test]
fn gk_reversed_bounds_flip_sign() {
    let r = integrate_gk(|x| x, 1.0, 0.0, 1e-12).unwrap();
    assert!((r.value + 0.5).abs() < 1e-14);
}

#[test]
fn hermite_reproduces_cubics() {
    let f = |t: f64| t * t * t - 2.0 * t;
    let df = |t: f64| 3.0 * t * t - 2.0;
    let (v, d) = hermite(0.5, 1.5, f(0.5), f(1.5), df(0.5), df(1.5), 0.8);
    assert!((v - f(0.8)).abs() < 1e-14);
    assert!((d - df(0.8)).abs() < 1e-13);
}
