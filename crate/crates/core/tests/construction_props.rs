use proptest::prelude::*;
use relu_forge::analysis::{lp_norm_mc, slope_fit, uniform_points};
use relu_forge::approx_space::witness_function;
use relu_forge::dataset::Dataset;
use relu_forge::deepen::{bad_interpolant, deepen, make_plan, DeepenFlavor, DeepenPlan};
use relu_forge::gate::{multi_gate, pair_gate, GateFlavor, GateSpec};
use relu_forge::primitives::{bump_net, BumpSpec};
use relu_forge::synth::{random_teacher, sample_dataset, target, TargetKind};

fn cube_point(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, d)
}

fn dataset(d: usize, m: usize, seed: u64) -> Dataset {
    let f = target(&TargetKind::Additive, d).unwrap();
    sample_dataset(&*f, d, m, 0.1, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bump_is_one_inside_and_zero_outside(
        d in 1usize..4,
        a in -0.5f64..0.0,
        w in 0.01f64..0.5,
        tau in 0.01f64..0.3,
        u in prop::collection::vec(0.0f64..1.0, 3),
        far in prop::collection::vec(0.0f64..1.0, 3),
        axis in 0usize..3,
    ) {
        let b = a + w;
        let net = bump_net(&BumpSpec::new(a, b, tau, d).unwrap()).unwrap();
        let inside: Vec<f64> = u[..d].iter().map(|t| a + t * w).collect();
        prop_assert!((net.eval(&inside) - 1.0).abs() <= 1e-12);
        let mut outside = inside.clone();
        outside[axis % d] = b + tau + far[0] * 0.5;
        prop_assert!(net.eval(&outside).abs() <= 1e-12);
        let anywhere: Vec<f64> = far[..d].iter().map(|t| 2.0 * t - 1.0).collect();
        let v = net.eval(&anywhere);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
    }

    #[test]
    fn pair_gate_error_and_zeros(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let g = pair_gate(1e-3).unwrap();
        prop_assert!((g.eval(&[x, y]) - x * y).abs() <= 1e-3);
        prop_assert_eq!(g.eval(&[0.0, y]), 0.0);
        prop_assert_eq!(g.eval(&[x, 0.0]), 0.0);
    }

    #[test]
    fn multi_gate_preserves_zeros(x in cube_point(4, -1.0, 1.0), k in 0usize..4) {
        let spec = GateSpec::new(4, 1e-3, 1.0, 1, GateFlavor::FixedDepth).unwrap();
        let g = multi_gate(&spec).unwrap();
        let exact: f64 = x.iter().product();
        prop_assert!((g.eval(&x) - exact).abs() <= 1e-3);
        let mut z = x.clone();
        z[k] = 0.0;
        prop_assert_eq!(g.eval(&z), 0.0);
    }

    #[test]
    fn log_depth_gate_shares_the_error_bound(x in cube_point(3, -1.0, 1.0)) {
        let g = multi_gate(&GateSpec::log_depth(3, 1e-4).unwrap()).unwrap();
        prop_assert!((g.eval(&x) - x.iter().product::<f64>()).abs() <= 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn deepened_students_interpolate(d in 1usize..4, m in 2usize..30, seed in any::<u64>(), fc in any::<bool>()) {
        let ds = dataset(d, m, seed);
        let teacher = random_teacher(d, &[6, 5], seed.wrapping_add(1)).unwrap();
        let flavor = if fc { DeepenFlavor::FullyConnected } else { DeepenFlavor::FixedDepth };
        let plan = make_plan(&ds, &teacher, 0.1, 2.0, 1.0, 1, flavor).unwrap();
        let student = deepen(&teacher, &ds, &plan).unwrap();
        for (x, y) in ds.points().iter().zip(ds.labels()) {
            prop_assert!((student.eval(x) - y).abs() <= 1e-8);
        }
        if !fc {
            prop_assert_eq!(student.depth(), 4 * plan.tilde_l + 16 + teacher.depth().max(2));
        }
    }

    #[test]
    fn bad_interpolant_interpolates(d in 1usize..4, m in 1usize..20, seed in any::<u64>()) {
        let ds = dataset(d, m, seed);
        let tau = 0.9 * DeepenPlan::separation_bound(ds.separation_radius().unwrap(), d);
        let net = bad_interpolant(&ds, tau).unwrap();
        // first-layer slopes are 2/τ, so rounding grows like ε_mach/τ
        for (x, y) in ds.points().iter().zip(ds.labels()) {
            prop_assert!((net.eval(x) - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn witness_has_unit_values_and_bounded_slope(d in 1usize..4, m in 2usize..15, seed in any::<u64>()) {
        let ds = dataset(d, m, seed);
        let signs: Vec<f64> = (0..m).map(|i| if (seed >> (i % 64)) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let g = witness_function(&ds, &signs).unwrap();
        let q = ds.separation_radius().unwrap();
        for (x, s) in ds.points().iter().zip(&signs) {
            prop_assert!((g(x) - s).abs() <= 1e-9);
        }
        let pts = uniform_points(d, 200, seed);
        for w in pts.windows(2) {
            let (a, b) = (g(&w[0]), g(&w[1]));
            prop_assert!(a.abs() <= 1.0 + 1e-12);
            let dist: f64 = w[0].iter().zip(&w[1]).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            prop_assert!((a - b).abs() <= dist / q + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn mc_norms_are_monotone_in_p(seed in any::<u64>()) {
        let f = target(&TargetKind::Sine, 2).unwrap();
        let n1 = lp_norm_mc(&*f, 2, 1.0, 20_000, seed).unwrap();
        let n2 = lp_norm_mc(&*f, 2, 2.0, 20_000, seed).unwrap();
        // averages over the cube: ‖f‖₁/4 ≤ ‖f‖₂/2
        prop_assert!(n1.value / 4.0 <= n2.value / 2.0 + 1e-12);
    }

    #[test]
    fn slope_fit_recovers_power_laws(c in 0.1f64..10.0, k in -3.0f64..-0.1) {
        let xs = [2.0, 4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(k)).collect();
        let fit = slope_fit(&xs, &ys).unwrap();
        prop_assert!((fit.slope - k).abs() < 1e-10);
        prop_assert!(fit.r_squared > 1.0 - 1e-10);
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let f = target(&TargetKind::Additive, 3).unwrap();
    let a = lp_norm_mc(&*f, 3, 2.0, 50_000, 9).unwrap();
    let b = lp_norm_mc(&*f, 3, 2.0, 50_000, 9).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
}
