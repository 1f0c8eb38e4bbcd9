use std::sync::{Arc, OnceLock};

use mghc_lab::lamination::ComponentSpec;
use mghc_lab::metric::*;
use mghc_lab::singularity::GradientLine;
use mghc_lab::times::{time_by_name, TimeFunction};
use mghc_lab::*;
use proptest::prelude::*;

fn group() -> &'static SurfaceGroup {
    static G: OnceLock<SurfaceGroup> = OnceLock::new();
    G.get_or_init(|| SurfaceGroup::genus2_octagon().unwrap())
}

fn build(items: &[(&str, f64)]) -> Arc<Spacetime> {
    let g = group();
    let lam = if items.is_empty() {
        MeasuredMulticurve::empty()
    } else {
        let spec: Vec<_> = items.iter().map(|(w, x)| ComponentSpec::new(w, *x).unwrap()).collect();
        MeasuredMulticurve::realize(g, &spec, &g.ball(3).unwrap()).unwrap()
    };
    Arc::new(Spacetime::new(g, lam, 5.0).unwrap())
}

fn fuchsian() -> &'static Arc<Spacetime> {
    static S: OnceLock<Arc<Spacetime>> = OnceLock::new();
    S.get_or_init(|| build(&[]))
}

fn one_curve() -> &'static Arc<Spacetime> {
    static S: OnceLock<Arc<Spacetime>> = OnceLock::new();
    S.get_or_init(|| build(&[("a1", 1.0)]))
}

fn time(st: &Arc<Spacetime>, name: &str) -> Arc<dyn TimeFunction> {
    time_by_name(name, st.clone()).unwrap()
}

fn line(st: &Spacetime, u: &HPoint) -> GradientLine {
    st.gradient_line(&st.point_above(u, 1.0)).unwrap()
}

/// Hyperbolic distance from the Minkowski product, independent of the crate.
fn hyperbolic(x: &HPoint, y: &HPoint) -> f64 {
    let (p, q) = (x.vec().0, y.vec().0);
    let c = p[0] * q[0] - p[1] * q[1] - p[2] * q[2];
    c.max(1.0).acosh()
}

/// Translation length from the trace `1 + 2 cosh ℓ` of an element of SO(2,1).
fn trace_length(m: &Mat3) -> f64 {
    let tr = m.0[0][0] + m.0[1][1] + m.0[2][2];
    ((tr - 1.0) / 2.0).acosh()
}

fn tau_distance(st: &Arc<Spacetime>, a: f64, x: &HPoint, y: &HPoint) -> DistanceEstimate {
    let tau = time(st, "cosmological");
    mixed_distance(st, tau.as_ref(), tau.as_ref(), a, &line(st, x), &line(st, y), &MetricOptions::default()).unwrap()
}

#[test]
fn fuchsian_calibration() {
    let st = fuchsian();
    for (x, y) in [
        (HPoint::from_polar(0.3, 0.1), HPoint::from_polar(1.7, 2.0)),
        (HPoint::from_polar(2.2, -1.0), HPoint::from_polar(0.9, 2.5)),
    ] {
        for a in [1.0, 0.25, 1.0 / 16.0] {
            let d = tau_distance(st, a, &x, &y);
            let want = a * hyperbolic(&x, &y);
            assert!((d.upper - want).abs() <= 5e-3 * want, "{} vs {want}", d.upper);
            assert!(d.lower <= d.upper + 1e-9);
        }
    }
}

#[test]
fn hull_matches_the_fuchsian_cone() {
    let st = fuchsian();
    let (tau, hull) = (time(st, "cosmological"), time(st, "hull"));
    let (x, y) = (HPoint::from_polar(0.4, 0.3), HPoint::from_polar(1.5, 2.2));
    for a in [1.0, 0.25] {
        let d = mixed_distance(st, hull.as_ref(), tau.as_ref(), a, &line(st, &x), &line(st, &y), &MetricOptions::default())
            .unwrap();
        let want = a * hyperbolic(&x, &y);
        assert!((d.upper - want).abs() <= 5e-3 * want, "{} vs {want}", d.upper);
        assert!(!d.certified_lower);
    }
}

#[test]
fn crossing_one_band_costs_its_weight() {
    let w = 0.7;
    let st = build(&[("a1", w)]);
    let leaf = st.leaves().within(3.0)[0].clone();
    let foot = leaf.geodesic.foot(&group().basepoint);
    let v = leaf.dual();
    let (x, y) = (foot.exp(&v, -0.2), foot.exp(&v, 0.2));
    assert_eq!(st.tree.tree_distance(&x, &y).leaves, 1);
    let grid: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
    let values: Vec<f64> = grid.iter().map(|&a| tau_distance(&st, a, &x, &y).upper).collect();
    let e = richardson(&grid, &values, 1e-9);
    assert!((e.limit - w).abs() <= 0.02 * w, "{e:?}");
    assert!((values.last().unwrap() - w).abs() <= 0.02 * w);
}

#[test]
fn coincident_points_are_at_distance_zero() {
    let st = one_curve();
    let x = HPoint::from_polar(1.1, 0.4);
    for a in [1.0, 0.01] {
        assert_eq!(tau_distance(st, a, &x, &x).upper, 0.0);
    }
}

#[test]
fn mixed_distance_for_tau_is_the_level_distance() {
    let st = one_curve();
    let tau = time(st, "cosmological");
    let (x, y) = (HPoint::from_polar(2.0, 0.2), HPoint::from_polar(1.5, 2.9));
    let opts = MetricOptions::default();
    let (lx, ly) = (LineRef::Tau(line(st, &x)), LineRef::Tau(line(st, &y)));
    for a in [1.0, 0.1] {
        let d = level_distance(st, tau.as_ref(), tau.as_ref(), a, &lx, &ly, &opts).unwrap();
        let m = tau_distance(st, a, &x, &y);
        assert_eq!(d.upper, m.upper);
    }
}

#[test]
fn backends_agree_on_tau_levels() {
    let st = one_curve();
    let tau = time(st, "cosmological");
    let opts = MetricOptions {
        cross_validate: true,
        ..MetricOptions::default()
    };
    for (x, y) in [
        (HPoint::from_polar(2.0, 0.2), HPoint::from_polar(1.5, 2.9)),
        (HPoint::from_polar(0.5, 1.0), HPoint::from_polar(2.5, -2.0)),
    ] {
        for a in [1.0, 0.125, 1.0 / 64.0] {
            let d = mixed_distance(st, tau.as_ref(), tau.as_ref(), a, &line(st, &x), &line(st, &y), &opts).unwrap();
            let [s, g] = [&d.backends[0], &d.backends[1]];
            assert_eq!((s.backend.as_str(), g.backend.as_str()), ("structured", "generic"));
            assert!((g.value - s.value).abs() <= 0.01 * s.value, "{s:?} {g:?}");
        }
    }
}

#[test]
fn warped_levels_in_the_past_are_shorter() {
    let st = one_curve();
    let tau = time(st, "cosmological");
    let warped = time(st, "warped");
    let opts = MetricOptions::default();
    let (x, y) = (HPoint::from_polar(2.0, 0.2), HPoint::from_polar(1.5, 2.9));
    let (lx, ly) = (line(st, &x), line(st, &y));
    // warped = τ·φ with φ within 5% of 1, so {T = a} lies below {τ = a/0.95}
    for a in [0.5, 0.1] {
        let a0 = a / 0.95;
        let d = mixed_distance(st, warped.as_ref(), tau.as_ref(), a, &lx, &ly, &opts).unwrap();
        for l in [&lx, &ly] {
            assert!(tau.value(&warped.level_on_line(l, a).unwrap()).unwrap() <= a0);
        }
        let dt = mixed_distance(st, tau.as_ref(), tau.as_ref(), a0, &lx, &ly, &opts).unwrap();
        assert!(d.upper <= dt.upper * (1.0 + 1e-3), "{} > {}", d.upper, dt.upper);
    }
}

#[test]
fn fuchsian_spectrum_is_scaled_translation_length() {
    let st = fuchsian();
    let tau = time(st, "cosmological");
    let opts = MetricOptions::default();
    for w in ["a1", "a1b1"] {
        let gamma: Word = w.parse().unwrap();
        let ell = trace_length(&group().eval(&gamma));
        for a in [1.0, 0.25] {
            let s = spectrum(st, tau.as_ref(), tau.as_ref(), tau.as_ref(), a, &gamma, None, &opts).unwrap();
            assert!((s.value - a * ell).abs() <= 0.01 * a * ell, "{w}: {} vs {}", s.value, a * ell);
        }
    }
}

#[test]
fn one_curve_spectra_limits() {
    let st = one_curve();
    let tau = time(st, "cosmological");
    let opts = MetricOptions::default();
    let grid: Vec<f64> = (0..9).map(|k| 0.5f64.powi(k)).collect();
    let a1 = converge::spectrum_grid(st, tau.as_ref(), tau.as_ref(), tau.as_ref(), &grid, &"a1".parse().unwrap(), None, &opts).unwrap();
    let b1 = converge::spectrum_grid(st, tau.as_ref(), tau.as_ref(), tau.as_ref(), &grid, &"b1".parse().unwrap(), None, &opts).unwrap();
    assert!(a1.last().unwrap().value < 0.01);
    let values: Vec<f64> = b1.iter().map(|p| p.value).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-3)), "{values:?}");
    assert!((richardson(&grid, &values, 1e-9).limit - 1.0).abs() < 0.02);
}

#[test]
fn converge_on_the_fuchsian_cone_collapses_to_a_point() {
    let st = fuchsian();
    let setup = ConvergeSetup {
        st,
        tau: time(st, "cosmological"),
        times: vec![time(st, "hull")],
        pairs: vec![(HPoint::from_polar(0.5, 0.0), HPoint::from_polar(1.0, 2.0))],
        gammas: vec!["b1".parse().unwrap()],
        grid: (0..6).map(|k| 0.5f64.powi(k)).collect(),
        spectrum_grid: (2..6).map(|k| 0.5f64.powi(k)).collect(),
        search: Vec::new(),
        chains: false,
        opts: MetricOptions::default(),
        tol: Tolerances::default(),
    };
    let report = converge(&setup).unwrap();
    assert!(report.items.iter().all(|i| i.target == 0.0 && i.extrapolation.limit.abs() < 0.02));
    assert_eq!(report.status, converge::Status::Pass);
}

#[test]
fn converge_across_one_leaf() {
    let st = one_curve();
    let leaf = st.leaves().within(3.0)[0].clone();
    let foot = leaf.geodesic.foot(&group().basepoint);
    let v = leaf.dual();
    let setup = ConvergeSetup {
        st,
        tau: time(st, "cosmological"),
        times: vec![time(st, "hull")],
        pairs: vec![(foot.exp(&v, -0.3), foot.exp(&v, 0.4))],
        gammas: Vec::new(),
        grid: (0..9).map(|k| 0.5f64.powi(k)).collect(),
        spectrum_grid: Vec::new(),
        search: Vec::new(),
        chains: false,
        opts: MetricOptions::default(),
        tol: Tolerances::default(),
    };
    let report = converge(&setup).unwrap();
    for item in &report.items {
        assert!((item.extrapolation.limit - 1.0).abs() <= 0.02, "{item:?}");
        assert_eq!(item.status, converge::Status::Pass);
    }
}

fn h2_point() -> impl Strategy<Value = HPoint> {
    (0.0..2.5f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| HPoint::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tau_distances_are_equivariant(x in h2_point(), y in h2_point(), k in 0usize..4, a in 0.05..1.0f64) {
        let st = one_curve();
        let gamma: Word = ["a1", "b1", "B2", "a2b1"][k].parse().unwrap();
        let m = group().eval(&gamma);
        let d = tau_distance(st, a, &x, &y).upper;
        let e = tau_distance(st, a, &x.transform(&m), &y.transform(&m)).upper;
        prop_assert!((d - e).abs() <= 1e-6 * (1.0 + d), "{} vs {}", d, e);
    }

    #[test]
    fn tau_distances_sit_above_the_tree(x in h2_point(), y in h2_point(), a in 0.001..1.0f64) {
        let st = one_curve();
        let d = tau_distance(st, a, &x, &y);
        let tree = st.tree.tree_distance(&x, &y).weight;
        prop_assert!(tree - 1e-9 <= d.upper);
        prop_assert_eq!(d.lower, tree);
    }

    #[test]
    fn tau_distances_satisfy_the_triangle_inequality(x in h2_point(), y in h2_point(), z in h2_point(), a in 0.01..1.0f64) {
        let st = one_curve();
        let xy = tau_distance(st, a, &x, &y).upper;
        let yz = tau_distance(st, a, &y, &z).upper;
        let xz = tau_distance(st, a, &x, &z).upper;
        prop_assert!(xz <= (xy + yz) * (1.0 + 1e-3) + 1e-12);
    }

    #[test]
    fn tau_distances_shrink_toward_the_singularity(x in h2_point(), y in h2_point(), a in 0.01..1.0f64) {
        let st = one_curve();
        let big = tau_distance(st, a, &x, &y).upper;
        let small = tau_distance(st, a / 2.0, &x, &y).upper;
        prop_assert!(small <= big * (1.0 + 1e-3) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn hull_distances_shrink_toward_the_singularity(x in h2_point(), y in h2_point(), a in 0.05..1.0f64) {
        let st = one_curve();
        let (tau, hull) = (time(st, "cosmological"), time(st, "hull"));
        let opts = MetricOptions::default();
        let (lx, ly) = (line(st, &x), line(st, &y));
        let big = mixed_distance(st, hull.as_ref(), tau.as_ref(), a, &lx, &ly, &opts).unwrap().upper;
        let small = mixed_distance(st, hull.as_ref(), tau.as_ref(), a / 2.0, &lx, &ly, &opts).unwrap().upper;
        prop_assert!(small <= big * (1.0 + 1e-3) + 1e-12, "{} > {}", small, big);
    }
}
