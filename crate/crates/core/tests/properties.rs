use kinopt::analysis::{check_strong_convexity_condition, fit_rate_series, power_spectrum};
use kinopt::flows::{self, reference::reference_subflow, Component, FlowParams, SubFlow};
use kinopt::oracle::step_rng;
use kinopt::problems::{
    central_difference, make_fig3_quadratic, make_toy_classifier, QuadraticProblem,
    RosenbrockProblem,
};
use kinopt::{
    integrate, GradientOracle, HyperParams, MomentumSchedule, OptState, OptimizerConfig,
    OptimizerKind, RecordOptions,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn state_strategy(n: usize) -> impl Strategy<Value = OptState> {
    (
        prop::collection::vec(-5.0..5.0f64, n),
        prop::collection::vec(-5.0..5.0f64, n),
        prop::collection::vec(0.0..5.0f64, n),
        prop::collection::vec(0.0..5.0f64, n),
    )
        .prop_map(|(x, p, xi, zeta)| OptState {
            x,
            p,
            xi: Some(xi),
            zeta: Some(zeta),
            step_count: 0,
        })
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(u, v)| (u - v).abs() <= tol * v.abs().max(1e-300) || u == v)
}

/// Relative error with an absolute floor for entries that decay to ~0.
fn close_vec(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(u, v)| (u - v).abs() <= tol * v.abs().max(1e-6))
}

fn components(s: &OptState, c: Component) -> Vec<f64> {
    match c {
        Component::X => s.x.clone(),
        Component::P => s.p.clone(),
        Component::Xi => s.xi.clone().unwrap_or_default(),
        Component::Zeta => s.zeta.clone().unwrap_or_default(),
    }
}

const ALL_COMPONENTS: [Component; 4] = [Component::X, Component::P, Component::Xi, Component::Zeta];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_subflows_match_rk4(
        s in state_strategy(3),
        g in prop::collection::vec(-5.0..5.0f64, 3),
        dt in prop::sample::select(vec![1e-3, 1e-2, 1e-1]),
        gamma in 0.0..3.0f64, alpha in 0.1..3.0f64, c in 0.0..3.0f64,
    ) {
        let params = FlowParams { gamma, alpha, rho: 1.0, c, eps_div: 1e-8, grad: Some(&g) };
        for kind in SubFlow::ALL {
            if kind == SubFlow::FrictionExchange {
                continue;
            }
            let mut a = s.clone();
            flows::apply(kind, &mut a, dt, &params).unwrap();
            let r = reference_subflow(kind, &s, dt, &params).unwrap();
            for comp in ALL_COMPONENTS {
                prop_assert!(
                    close_vec(&components(&a, comp), &components(&r, comp), 1e-8),
                    "{} {:?}: {:?} vs {:?}", kind.label(), comp, components(&a, comp), components(&r, comp)
                );
            }
        }
    }

    #[test]
    fn friction_exchange_conserves_energy(
        s in state_strategy(4), dt in 1e-4..2.0f64, rho in 0.01..10.0f64,
    ) {
        let mut a = s.clone();
        flows::friction_exchange(&mut a, dt, rho).unwrap();
        let xi0 = s.xi.as_ref().unwrap();
        let xi1 = a.xi.as_ref().unwrap();
        for i in 0..4 {
            let e0 = s.p[i] * s.p[i] + rho * xi0[i] * xi0[i];
            let e1 = a.p[i] * a.p[i] + rho * xi1[i] * xi1[i];
            prop_assert!((e0 - e1).abs() <= 1e-12 * e0.max(1e-300));
            prop_assert!(xi1[i] >= xi0[i]);
            prop_assert!(a.p[i].abs() <= s.p[i].abs());
        }
    }

    #[test]
    fn subflows_touch_only_declared_components(
        s in state_strategy(3),
        g in prop::collection::vec(-5.0..5.0f64, 3),
        dt in 1e-3..1.0f64,
    ) {
        let params = FlowParams { gamma: 0.5, alpha: 0.7, rho: 1.3, c: 0.9, eps_div: 1e-8, grad: Some(&g) };
        for kind in SubFlow::ALL {
            let mut a = s.clone();
            flows::apply(kind, &mut a, dt, &params).unwrap();
            for comp in ALL_COMPONENTS {
                if !kind.acts_on().contains(&comp) {
                    prop_assert_eq!(components(&a, comp), components(&s, comp), "{} touched {:?}", kind.label(), comp);
                }
            }
        }
    }

    #[test]
    fn cubic_damping_preserves_sign_and_contracts(p in prop::collection::vec(-1e6..1e6f64, 5), dt in 1e-4..10.0f64, c in 0.0..10.0f64) {
        let mut s = OptState { x: vec![0.0; 5], p: p.clone(), xi: None, zeta: None, step_count: 0 };
        flows::cubic_damping(&mut s, dt, c);
        for (a, b) in s.p.iter().zip(&p) {
            prop_assert!(a.abs() <= b.abs());
            prop_assert!(a * b >= 0.0);
            prop_assert!(a.is_finite());
        }
    }

    #[test]
    fn damping_contracts(s in state_strategy(4), dt in 1e-4..5.0f64, gamma in 0.0..5.0f64, alpha in 0.01..5.0f64) {
        let mut a = s.clone();
        flows::damping(&mut a, dt, gamma, alpha).unwrap();
        for i in 0..4 {
            prop_assert!(a.p[i].abs() <= s.p[i].abs());
            prop_assert!(a.xi.as_ref().unwrap()[i] <= s.xi.as_ref().unwrap()[i]);
        }
    }

    #[test]
    fn ikfad_friction_stays_nonnegative(
        x in prop::collection::vec(-3.0..3.0f64, 4),
        xi in prop::collection::vec(0.0..3.0f64, 4),
        gamma in 0.0..2.0f64, rho in 0.01..10.0f64, alpha in 0.01..10.0f64, dt in 1e-3..0.2f64,
    ) {
        let q = QuadraticProblem::diagonal(vec![1.0, 2.0, 5.0, 10.0]).unwrap();
        let s = kinopt::init_state(OptimizerKind::IkfadSplit, x, vec![0.0; 4], Some(xi), None).unwrap();
        let hp = HyperParams::new(dt).with_gamma(gamma).with_alpha(alpha).with_rho(rho);
        let t = integrate(&OptimizerConfig::new(OptimizerKind::IkfadSplit), &hp, &q, s, 0,
            RecordOptions::new(200).with_sample_stride(1)).unwrap();
        for st in &t.samples {
            prop_assert!(st.xi.as_ref().unwrap().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn cadam_second_moment_stays_nonnegative(
        x in prop::collection::vec(-3.0..3.0f64, 3), dt in 1e-3..0.1f64, alpha in 0.01..5.0f64,
    ) {
        let q = QuadraticProblem::diagonal(vec![1.0, 3.0, 9.0]).unwrap();
        let s = kinopt::rest_state(OptimizerKind::CadamSplit, x).unwrap();
        let hp = HyperParams::new(dt).with_gamma(1.0).with_c(1.0).with_alpha(alpha);
        let t = integrate(&OptimizerConfig::new(OptimizerKind::CadamSplit), &hp, &q, s, 0,
            RecordOptions::new(100).with_sample_stride(1)).unwrap();
        for st in &t.samples {
            prop_assert!(st.zeta.as_ref().unwrap().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn parseval(sig in prop::collection::vec(-10.0..10.0f64, 8..300)) {
        let r = power_spectrum(&sig, 1).unwrap();
        let s = &sig[..r.n_used];
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64;
        prop_assert!((r.total_power() - var).abs() <= 1e-10 * var.max(1e-300));
        prop_assert_eq!(r.power.len(), r.n_used / 2 + 1);
        prop_assert!(r.power.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn spectrum_ignores_offsets(sig in prop::collection::vec(-10.0..10.0f64, 8..200), shift in -1e3..1e3f64) {
        let a = power_spectrum(&sig, 1).unwrap();
        let moved: Vec<f64> = sig.iter().map(|v| v + shift).collect();
        let b = power_spectrum(&moved, 1).unwrap();
        let scale = a.total_power().max(1e-12);
        for (u, v) in a.power.iter().zip(&b.power) {
            prop_assert!((u - v).abs() <= 1e-9 * scale.max(shift.abs() * shift.abs() * 1e-6));
        }
    }

    #[test]
    fn rate_fit_recovers_decay(kappa in prop::sample::select(vec![0.1, 1.0, 10.0]), c in 0.1..100.0f64, seed in 0u64..1000) {
        let mut rng = step_rng(seed, 0);
        let dt = 1.0 / (kappa * 200.0);
        let t: Vec<f64> = (0..2000).map(|n| n as f64 * dt).collect();
        let y: Vec<f64> = t.iter().map(|t| c * (-kappa * t).exp() * (1.0 + rng.random_range(-0.01..0.01))).collect();
        let fit = fit_rate_series(&t, &y, 1.0).unwrap();
        prop_assert!((fit.kappa - kappa).abs() <= 0.02 * kappa, "{} vs {}", fit.kappa, kappa);
    }
}

#[test]
fn equilibrium_is_fixed_for_every_optimizer() {
    let r = RosenbrockProblem::default();
    let x_star = r.minimizer().unwrap().to_vec();
    let hp = HyperParams::new(0.01)
        .with_gamma(1.0)
        .with_alpha(1.0)
        .with_rho(1.0)
        .with_c(1.0)
        .with_mu(0.9)
        .with_betas(0.9, 0.999);
    for kind in OptimizerKind::ALL {
        let s = kinopt::rest_state(kind, x_star.clone()).unwrap();
        let next = kinopt::step(&OptimizerConfig::new(kind), &s, &hp, &r, 0).unwrap();
        assert_eq!(next.x, s.x, "{kind}");
        assert_eq!(next.p, s.p, "{kind}");
        assert_eq!(next.xi, s.xi, "{kind}");
        assert_eq!(next.zeta, s.zeta, "{kind}");
    }
    let cfg = OptimizerConfig::with_schedule(OptimizerKind::MsgdEuler, MomentumSchedule::Nesterov)
        .unwrap();
    let s = kinopt::rest_state(OptimizerKind::MsgdEuler, x_star.clone()).unwrap();
    assert_eq!(kinopt::step(&cfg, &s, &hp, &r, 0).unwrap().x, x_star);
}

#[test]
fn gradients_match_finite_differences_everywhere() {
    let problems: Vec<Box<dyn GradientOracle>> = vec![
        Box::new(make_fig3_quadratic(10, 1.0, 10.0, None).unwrap()),
        Box::new(make_fig3_quadratic(10, 1.0, 1e4, Some(7)).unwrap()),
        Box::new(RosenbrockProblem::default()),
        Box::new(make_toy_classifier(40, 4, 0, 1).unwrap()),
        Box::new(make_toy_classifier(40, 4, 3, 2).unwrap()),
    ];
    for (k, p) in problems.iter().enumerate() {
        let mut rng = step_rng(k as u64, 99);
        for _ in 0..100 {
            let x: Vec<f64> = (0..p.dim())
                .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let g = p.gradient(&x);
            let fd = central_difference(p.as_ref(), &x, 1e-6);
            let err = g
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
            assert!(err <= 1e-5 * scale, "problem {k}: {err} vs {scale}");
        }
    }
}

#[test]
fn quadratics_satisfy_the_convexity_condition() {
    for (dim, lo, hi, rot) in [
        (2, 1.0, 4.0, None),
        (10, 1.0, 10.0, None),
        (50, 0.5, 1e4, Some(3)),
        (200, 1.0, 1e4, None),
    ] {
        let q = make_fig3_quadratic(dim, lo, hi, rot).unwrap();
        assert!(check_strong_convexity_condition(&q, 1.0, lo / 2.0, 1000, 11).unwrap());
    }
}

#[test]
fn minibatch_gradient_is_unbiased() {
    let p = make_toy_classifier(64, 3, 0, 5)
        .unwrap()
        .with_batch_size(8)
        .unwrap();
    let w = vec![0.3, -0.2, 0.5];
    let full = p.gradient(&w);
    let draws = 10_000;
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut g = vec![0.0; 3];
    for k in 0..draws {
        p.sample_gradient_into(&w, 17, k, &mut g);
        for i in 0..3 {
            sum[i] += g[i];
            sq[i] += g[i] * g[i];
        }
    }
    for i in 0..3 {
        let n = draws as f64;
        let mean = sum[i] / n;
        let se = ((sq[i] / n - mean * mean) / n).sqrt();
        assert!(
            (mean - full[i]).abs() <= 4.0 * se,
            "coord {i}: {mean} vs {} (se {se})",
            full[i]
        );
    }
}

#[test]
fn rotated_and_axis_aligned_runs_agree_in_loss() {
    // Loss is basis independent, so a rotated problem started at the rotated
    // initial point follows the same loss curve.
    let a = make_fig3_quadratic(6, 1.0, 100.0, None).unwrap();
    let b = make_fig3_quadratic(6, 1.0, 100.0, Some(4)).unwrap();
    let x0 = vec![1.0, -0.5, 0.25, 2.0, 0.0, 1.0];
    let r = b.rotation().unwrap();
    let x0b: Vec<f64> = (r * nalgebra_vec(&x0)).iter().copied().collect();
    let hp = HyperParams::new(0.01).with_gamma(1.0).with_c(1.0);
    let cfg = OptimizerConfig::new(OptimizerKind::LdhdSplit);
    let ta = integrate(
        &cfg,
        &hp,
        &a,
        kinopt::rest_state(OptimizerKind::LdhdSplit, x0).unwrap(),
        0,
        RecordOptions::new(300),
    )
    .unwrap();
    let tb = integrate(
        &cfg,
        &hp,
        &b,
        kinopt::rest_state(OptimizerKind::LdhdSplit, x0b).unwrap(),
        0,
        RecordOptions::new(300),
    )
    .unwrap();
    assert!(rel_close(&ta.losses, &tb.losses, 1e-9));
}

fn nalgebra_vec(v: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(v)
}
