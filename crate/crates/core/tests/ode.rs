use noether_paths::ode::*;

#[test]
fn exponential_decay() {
    let sol = dopri5(|_, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], 3.0, 1e-12, 1e-12).unwrap();
    let end = *sol.states.last().unwrap();
    assert_eq!(*sol.times.last().unwrap(), 3.0);
    assert!((end[0] - (-3.0f64).exp()).abs() < 1e-11);
}

#[test]
fn backward_integration() {
    let sol =
        dopri5(|_, y: &[f64; 2]| Ok([y[1], -y[0]]), 1.0, [1.0f64.cos(), -1.0f64.sin()], 0.0, 1e-12, 1e-12).unwrap();
    let end = *sol.states.last().unwrap();
    assert!((end[0] - 1.0).abs() < 1e-10);
    assert!(end[1].abs() < 1e-10);
}
