use noether_paths::gauge::*;
use noether_paths::*;

fn iv(u: f64, v: f64) -> ExtInterval {
    ExtInterval::new(u, v).unwrap()
}

#[test]
fn attachment_table() {
    assert!(is_attached(&TaggedPair::new(0.0, iv(0.0, 1.0))));
    assert!(is_attached(&TaggedPair::new(1.0, iv(0.0, 1.0))));
    assert!(is_attached(&TaggedPair::new(f64::NEG_INFINITY, iv(f64::NEG_INFINITY, 3.0))));
    assert!(!is_attached(&TaggedPair::new(0.5, iv(0.0, 1.0))));
    assert!(!is_attached(&TaggedPair::new(3.0, iv(f64::NEG_INFINITY, 3.0))));
    assert!(!is_attached(&TaggedPair::new(0.0, ExtInterval::whole())));
}

#[test]
fn fineness_table() {
    let g = Gauge1D::constant(0.2).unwrap();
    assert!(is_fine(&TaggedPair::new(0.0, iv(0.0, 0.1)), &g).unwrap());
    let g = Gauge1D::constant(0.1).unwrap();
    assert!(is_fine(&TaggedPair::new(f64::INFINITY, iv(20.0, f64::INFINITY)), &g).unwrap());
    assert!(!is_fine(&TaggedPair::new(f64::INFINITY, iv(5.0, f64::INFINITY)), &g).unwrap());
    assert!(is_fine(&TaggedPair::new(f64::NEG_INFINITY, iv(f64::NEG_INFINITY, -20.0)), &g).unwrap());
    assert!(matches!(is_fine(&TaggedPair::new(0.5, iv(0.0, 1.0)), &g), Err(Error::NotAttached { .. })));
}

#[test]
fn lengths() {
    assert_eq!(iv(1.0, 3.5).length(), 2.5);
    assert_eq!(iv(f64::NEG_INFINITY, 0.0).length(), 0.0);
    assert_eq!(iv(0.0, f64::INFINITY).length(), 0.0);
    assert!(ExtInterval::new(1.0, 1.0).is_err());
    assert!(ExtInterval::new(f64::INFINITY, f64::INFINITY).is_err());
}

#[test]
fn constant_gauge_division() {
    let g = Gauge1D::constant(0.3).unwrap();
    let dom = iv(0.0, 1.0);
    let d = build_division(&dom, &g).unwrap();
    assert!(d.tiles(&dom));
    assert!(d.is_fine(&g).unwrap());
    assert!(d.max_length() < 0.3);
    assert!((riemann_sum(|_, i| i.length(), &d) - 1.0).abs() < 1e-15);
}

#[test]
fn right_tail_division() {
    let g = Gauge1D::constant(0.01).unwrap();
    let dom = iv(1.0, f64::INFINITY);
    let d = build_division(&dom, &g).unwrap();
    let last = d.pairs().last().unwrap();
    assert_eq!(last.tag, f64::INFINITY);
    assert!(last.interval.lower() > 100.0);
    assert!(d.tiles(&dom));
    assert!(d.is_fine(&g).unwrap());
}

#[test]
fn whole_line_division() {
    let g = Gauge1D::new(|x: f64| if x.is_finite() { 0.5 / (1.0 + x.abs()) } else { 0.25 });
    let dom = ExtInterval::whole();
    let d = build_division(&dom, &g).unwrap();
    assert!(d.tiles(&dom));
    assert!(d.is_fine(&g).unwrap());
    assert_eq!(d.pairs()[0].tag, f64::NEG_INFINITY);
}

#[test]
fn dirichlet_division_has_irrational_tags() {
    let ex = DirichletExample::new(1e-3).unwrap();
    let dom = iv(0.0, 1.0);
    let d = build_division(&dom, &ex.gauge).unwrap();
    assert!(d.tiles(&dom));
    assert!(d.is_fine(&ex.gauge).unwrap());
    assert!(d.all_tags_avoid(ex.gauge.exceptional()));
    assert_eq!(riemann_sum(|x, i| ex.h(x, i), &d), 1.0);
}

#[test]
fn dirichlet_forced_rational_tags_stay_within_eps() {
    let ex = DirichletExample::new(1e-3).unwrap();
    let dom = iv(0.0, 1.0);
    let d = division_with_forced_tags(&dom, &ex.gauge, &ex.rationals()).unwrap();
    assert!(d.tiles(&dom));
    assert!(d.is_fine(&ex.gauge).unwrap());
    let s = riemann_sum(|x, i| ex.h(x, i), &d);
    assert!(s < 1.0 && (s - 1.0).abs() <= 1e-3);
}

#[test]
fn rational_enumeration() {
    let r = dirichlet_rationals(1.0).unwrap();
    assert_eq!(&r[..5].iter().map(|p| p.0).collect::<Vec<_>>(), &[0.0, 1.0, 0.5, 1.0 / 3.0, 2.0 / 3.0]);
    assert_eq!(r[0].1, 1.0 / 8.0);
    assert_eq!(r[1].1, 1.0 / 16.0);
}

#[test]
fn integrals() {
    let o = IntegrationOptions::default();
    let r = integrate_1d(|x, i| x * x * i.length(), &iv(0.0, 1.0), 1e-10, &o).unwrap();
    assert!((r.value - 1.0 / 3.0).abs() < 1e-10);
    let r = integrate_1d(|x, i| i.length() / (x * x), &iv(1.0, f64::INFINITY), 1e-9, &o).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9, "{r:?}");
    let r = integrate_1d(|x, i| (-x * x).exp() * i.length(), &ExtInterval::whole(), 1e-9, &o).unwrap();
    assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-9, "{r:?}");
}

#[test]
fn dirichlet_integral_is_exact() {
    let ex = DirichletExample::new(1e-3).unwrap();
    let o = IntegrationOptions { exceptional: ex.gauge.exceptional().clone(), ..Default::default() };
    let r = integrate_1d(|x, i| ex.h(x, i), &iv(0.0, 1.0), 1e-12, &o).unwrap();
    assert!((r.value - 1.0).abs() <= 4.0 * f64::EPSILON, "{r:?}");
}

#[test]
fn nd_integrals() {
    let o = IntegrationOptions::default();
    let sq = [iv(0.0, 1.0), iv(0.0, 1.0)];
    let r = integrate_nd(|_, c| c[0].length() * c[1].length(), &sq, 1e-10, &o).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12);
    let r = integrate_nd(|x, c| x[0] * x[1] * c[0].length() * c[1].length(), &sq, 1e-10, &o).unwrap();
    assert!((r.value - 0.25).abs() < 1e-10);
    let five: Vec<ExtInterval> = (0..5).map(|_| iv(0.0, 1.0)).collect();
    assert!(matches!(integrate_nd(|_, _| 0.0, &five, 1e-6, &o), Err(Error::DimensionCap { dim: 5, cap: 4 })));
}

#[test]
fn cylinders() {
    let dims = DimensionSet::new(vec![0.25, 0.5], (0.0, 1.0)).unwrap();
    let c = Cylinder::new(dims.clone(), vec![iv(0.0, 1.0), iv(0.0, 0.5)]).unwrap();
    assert_eq!(cylinder_volume(&c), 0.5);
    let c = Cylinder::new(dims, vec![iv(0.0, 1.0), iv(f64::NEG_INFINITY, 0.0)]).unwrap();
    assert_eq!(cylinder_volume(&c), 0.0);
    assert!(DimensionSet::new(vec![0.0, 0.5], (0.0, 1.0)).is_err());
    assert!(DimensionSet::new(vec![0.5, 0.25], (0.0, 1.0)).is_err());
}

#[test]
fn gamma_fineness() {
    let dims = DimensionSet::new(vec![0.25, 0.5], (0.0, 1.0)).unwrap();
    let c = Cylinder::new(dims, vec![iv(0.0, 0.1), iv(1.0, 1.05)]).unwrap();
    let path = PathSamples::new(vec![0.25, 0.5, 0.75], vec![0.0, 1.05, 2.0]).unwrap();
    let vacuous = InfGauge::new(vec![0.25, 0.5, 0.75], |_| Vec::new(), |_, _| 0.2);
    assert!(check_gamma_fine(&path, &c, &vacuous).unwrap());
    let demanding = InfGauge::new(vec![0.25, 0.5, 0.75], |_| vec![0.75], |_, _| 0.2);
    assert!(!check_gamma_fine(&path, &c, &demanding).unwrap());
    let tight = InfGauge::new(vec![0.25, 0.5, 0.75], |_| Vec::new(), |_, _| 0.1);
    assert!(!check_gamma_fine(&path, &c, &tight).unwrap());
    let rogue = InfGauge::new(vec![0.25], |_| vec![0.9], |_, _| 0.2);
    assert!(check_gamma_fine(&path, &c, &rogue).is_err());
    let loose = PathSamples::new(vec![0.25, 0.5], vec![0.05, 1.0]).unwrap();
    assert!(matches!(check_gamma_fine(&loose, &c, &vacuous), Err(Error::NotAttached { .. })));
}
