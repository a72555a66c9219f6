use kinopt::{HyperParams, OptimizerKind};
use kinopt_harness::output::{write_summary, write_trajectory};
use kinopt_harness::run::{
    grid_cell_spec, run_gamma_dt_grid, run_phase_portrait, run_seed_ensemble, run_single, Exec,
    RunStatus,
};
use kinopt_harness::{
    EnsembleSpec, GridMetric, GridSpec, Output, PortraitSpec, ProblemSpec, RunSpec, X0Spec,
};
use proptest::prelude::*;

fn quad_spec(kind: OptimizerKind, steps: u64) -> RunSpec {
    let hp = HyperParams::new(0.01)
        .with_gamma(1.0)
        .with_alpha(1.0)
        .with_rho(1.0)
        .with_c(1.0);
    let mut s = RunSpec::new(
        ProblemSpec::Quadratic {
            eigenvalues: vec![1.0, 4.0],
            rotation_seed: None,
        },
        kind,
        hp,
        steps,
    );
    s.xi0 = 1e-3;
    s
}

fn csv_bytes(spec: &RunSpec) -> (Vec<u8>, Vec<u8>) {
    let out = run_single(spec).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_summary(&mut a, std::slice::from_ref(&out.summary)).unwrap();
    write_trajectory(&mut b, &out.trajectory).unwrap();
    (a, b)
}

#[test]
fn identical_specs_give_identical_csv() {
    let mut s = quad_spec(OptimizerKind::IkfadSplit, 500);
    s.noise_sigma = 0.05;
    s.seed = 9;
    s.sample_stride = Some(7);
    assert_eq!(csv_bytes(&s), csv_bytes(&s));
}

#[test]
fn different_seeds_differ_under_noise() {
    let mut s = quad_spec(OptimizerKind::CdSplit, 200);
    s.noise_sigma = 0.05;
    let a = csv_bytes(&s).1;
    s.seed = 1;
    assert_ne!(a, csv_bytes(&s).1);
}

#[test]
fn zero_steps_keeps_the_initial_state() {
    let out = run_single(&quad_spec(OptimizerKind::CdSplit, 0)).unwrap();
    assert_eq!(out.summary.status, RunStatus::Completed);
    assert_eq!(out.trajectory.len(), 1);
    assert_eq!(out.trajectory.final_state.x, vec![1.0, 1.0]);
    assert_eq!(out.summary.final_loss, Some(2.5));
}

#[test]
fn divergence_is_reported_not_raised() {
    let mut s = quad_spec(OptimizerKind::LdhdSplit, 10_000);
    s.hp.dt = 2.0;
    s.hp.gamma = Some(0.0);
    let out = run_single(&s).unwrap();
    assert!(matches!(out.summary.status, RunStatus::Diverged(_)));
    assert_eq!(out.summary.final_loss, Some(f64::INFINITY));
    assert!(!out.summary.converged);
}

fn small_grid(kind: OptimizerKind) -> GridSpec {
    GridSpec {
        gamma_values: vec![0.5, 2.0],
        dt_values: vec![0.01, 0.8],
        base: quad_spec(kind, 300),
        metric: GridMetric::FinalLoss,
    }
}

#[test]
fn grid_cells_match_single_runs() {
    let g = small_grid(OptimizerKind::CdSplit);
    let cells = run_gamma_dt_grid(&g, Exec::default());
    assert_eq!(cells.len(), 4);
    for c in &cells {
        let spec = grid_cell_spec(&g, c.gamma_index, c.dt_index).unwrap();
        assert_eq!(c.spec.as_ref(), Some(&spec));
        let single = run_single(&spec).unwrap();
        assert_eq!(c.summary, single.summary);
        assert_eq!(c.metric, single.summary.final_loss);
    }
}

#[test]
fn one_by_one_grid_equals_single_run() {
    let mut g = small_grid(OptimizerKind::IkfadSplit);
    g.gamma_values = vec![0.7];
    g.dt_values = vec![0.02];
    let cell = &run_gamma_dt_grid(&g, Exec::default())[0];
    let mut spec = g.base.clone();
    spec.hp.gamma = Some(0.7);
    spec.hp.dt = 0.02;
    spec.seed = cell.summary.seed;
    spec.spec_id = cell.summary.spec_id.clone();
    assert_eq!(cell.summary, run_single(&spec).unwrap().summary);
}

#[test]
fn msgd_cells_use_matched_rate_and_flag_invalid_pairs() {
    let g = small_grid(OptimizerKind::MsgdEuler);
    let spec = grid_cell_spec(&g, 0, 0).unwrap();
    assert!((spec.hp.dt - 1e-4).abs() < 1e-18);
    assert!((spec.hp.mu.unwrap() - 0.995).abs() < 1e-15);
    // gamma 2, h 0.8: gamma h > 1 has no momentum equivalent
    assert!(grid_cell_spec(&g, 1, 1).is_err());
    let cells = run_gamma_dt_grid(&g, Exec::default());
    let bad = cells
        .iter()
        .find(|c| c.gamma_index == 1 && c.dt_index == 1)
        .unwrap();
    assert_eq!(bad.summary.status, RunStatus::Invalid);
    assert_eq!(bad.summary.final_loss, None);
    assert!(bad.spec.is_none());
}

#[test]
fn single_seed_ensemble_has_zero_spread() {
    let mut base = quad_spec(OptimizerKind::CdEuler, 300);
    base.noise_sigma = 0.1;
    let res = run_seed_ensemble(
        &EnsembleSpec {
            base: base.clone(),
            n_seeds: 1,
        },
        Exec::default(),
    )
    .unwrap();
    let (_, fl) = res.stats.iter().find(|(n, _)| *n == "final_loss").unwrap();
    assert_eq!(fl.unwrap().std, 0.0);
    assert!(res.std_loss.iter().all(|&s| s == 0.0));
    assert_eq!(res.mean_loss, res.runs[0].trajectory.losses);
    assert_eq!(res.runs[0].summary.seed, base.seed);
}

#[test]
fn ensemble_members_use_consecutive_seeds() {
    let mut base = quad_spec(OptimizerKind::CdEuler, 100);
    base.noise_sigma = 0.1;
    base.seed = 40;
    let res = run_seed_ensemble(&EnsembleSpec { base, n_seeds: 3 }, Exec::default()).unwrap();
    let seeds: Vec<u64> = res.runs.iter().map(|r| r.summary.seed).collect();
    assert_eq!(seeds, vec![40, 41, 42]);
}

fn rosen_portrait(lower: [f64; 2], upper: [f64; 2], shape: [usize; 2], steps: u64) -> PortraitSpec {
    let hp = HyperParams::new(0.005).with_gamma(1.0).with_c(1.0);
    PortraitSpec {
        base: RunSpec::new(
            ProblemSpec::Rosenbrock { a: 1.0, b: 100.0 },
            OptimizerKind::CdSplit,
            hp,
            steps,
        ),
        lower: lower.to_vec(),
        upper: upper.to_vec(),
        shape: shape.to_vec(),
    }
}

#[test]
fn portrait_started_at_the_minimizer_stays_put() {
    let cells = run_phase_portrait(
        &rosen_portrait([1.0, 1.0], [1.0, 1.0], [1, 1], 1000),
        Exec::default(),
    )
    .unwrap();
    assert_eq!(cells.len(), 1);
    let m = cells[0].metrics;
    assert!(m.converged);
    assert_eq!(m.overshoot_count, 0);
    assert_eq!(m.final_distance, 0.0);
}

#[test]
fn symmetric_quadratic_portrait_is_mirror_symmetric() {
    let mut p = rosen_portrait([-1.0, -1.0], [1.0, 1.0], [3, 3], 400);
    p.base.problem = ProblemSpec::Quadratic {
        eigenvalues: vec![1.0, 3.0],
        rotation_seed: None,
    };
    p.base.hp.dt = 0.05;
    let cells = run_phase_portrait(&p, Exec::default()).unwrap();
    let at = |i: usize, j: usize| cells.iter().find(|c| c.index == (i, j)).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (at(i, j), at(2 - i, 2 - j));
            assert_eq!(a.metrics.overshoot_count, b.metrics.overshoot_count);
            assert!(
                (a.metrics.path_ratio - b.metrics.path_ratio).abs() < 1e-9
                    || a.metrics.path_ratio.is_nan()
            );
            assert!((a.metrics.final_distance - b.metrics.final_distance).abs() < 1e-12);
        }
    }
}

#[test]
fn portrait_rejects_non_planar_problems() {
    let mut p = rosen_portrait([-1.0, -1.0], [1.0, 1.0], [2, 2], 10);
    p.base.problem = ProblemSpec::Quadratic {
        eigenvalues: vec![1.0, 2.0, 3.0],
        rotation_seed: None,
    };
    assert!(run_phase_portrait(&p, Exec::default()).is_err());
}

#[test]
fn rosenbrock_reference_run_converges() {
    let spec = RunSpec::parse(include_str!("../specs/fig2_cd_reference.spec")).unwrap();
    let out = run_single(&spec).unwrap();
    assert_eq!(out.summary.status, RunStatus::Completed);
    assert!(
        out.summary.converged,
        "final loss {:?}",
        out.summary.final_loss
    );
}

#[test]
fn shipped_specs_parse() {
    for text in [
        include_str!("../specs/fig2_cd_reference.spec"),
        include_str!("../specs/fig3_mgd.spec"),
        include_str!("../specs/fig3_ikfad.spec"),
        include_str!("../specs/fig3_cd.spec"),
        include_str!("../specs/toy_ikfad_friction.spec"),
    ] {
        let s = RunSpec::parse(text).unwrap();
        assert_eq!(RunSpec::parse(&s.to_spec_string()).unwrap(), s);
    }
    for text in [
        include_str!("../specs/fig2_portrait_cd.spec"),
        include_str!("../specs/fig2_portrait_ikfad.spec"),
        include_str!("../specs/fig2_portrait_msgd.spec"),
    ] {
        let p = PortraitSpec::parse(text).unwrap();
        assert_eq!(PortraitSpec::parse(&p.to_spec_string()).unwrap(), p);
    }
    for text in [
        include_str!("../specs/toy_grid_ikfad.spec"),
        include_str!("../specs/toy_grid_cd.spec"),
        include_str!("../specs/toy_grid_msgd.spec"),
    ] {
        let g = GridSpec::parse(text).unwrap();
        assert_eq!(GridSpec::parse(&g.to_spec_string()).unwrap(), g);
    }
    let e = EnsembleSpec::parse(include_str!("../specs/quad_noisy_cd_ensemble.spec")).unwrap();
    assert_eq!(EnsembleSpec::parse(&e.to_spec_string()).unwrap(), e);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6, 1e-9..1e-3, Just(0.1), Just(1.0 / 3.0)]
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1e-6..10.0, Just(0.1), Just(1e-12)]
}

fn problem() -> impl Strategy<Value = ProblemSpec> {
    prop_oneof![
        (
            prop::collection::vec(positive(), 1..6),
            prop::option::of(any::<u64>())
        )
            .prop_map(|(eigenvalues, rotation_seed)| ProblemSpec::Quadratic {
                eigenvalues,
                rotation_seed
            }),
        (2usize..50, positive(), prop::option::of(any::<u64>())).prop_map(
            |(dim, m, rotation_seed)| {
                ProblemSpec::Fig3Quadratic {
                    dim,
                    min_eig: m,
                    max_eig: m * 100.0,
                    rotation_seed,
                }
            }
        ),
        (finite(), positive()).prop_map(|(a, b)| ProblemSpec::Rosenbrock { a, b }),
        (
            1usize..100,
            1usize..8,
            1usize..8,
            any::<u64>(),
            prop::option::of(1u64..64),
            positive()
        )
            .prop_map(
                |(n_examples, n_features, hidden, data_seed, batch_size, l2)| {
                    ProblemSpec::ToyClassifier {
                        n_examples,
                        n_features,
                        hidden,
                        data_seed,
                        batch_size,
                        l2,
                    }
                }
            ),
    ]
}

fn kind() -> impl Strategy<Value = OptimizerKind> {
    prop::sample::select(OptimizerKind::ALL.to_vec())
}

prop_compose! {
    fn run_spec()(
        problem in problem(),
        kind in kind(),
        dt in positive(),
        gamma in prop::option::of(positive()),
        mu in prop::option::of(0.0..1.0f64),
        eps in prop::option::of(positive()),
        sigma in prop_oneof![Just(0.0), positive()],
        x0 in prop_oneof![
            Just(X0Spec::Default),
            prop::collection::vec(finite(), 1..4).prop_map(X0Spec::Explicit),
            (prop::collection::vec(finite(), 2), positive()).prop_map(|(center, radius)| X0Spec::Ball { center, radius }),
        ],
        xi0 in prop_oneof![Just(0.0), positive()],
        steps in 0u64..1_000_000,
        seed in any::<u64>(),
        record_stride in 1u64..100,
        sample_stride in prop::option::of(1u64..100),
        fit_tail in prop::option::of(0.01..1.0f64),
        id in "[a-z][a-z0-9_.]{0,12}",
        outputs in prop::sample::subsequence(vec![Output::TrajectoryCsv, Output::SummaryCsv, Output::SpectrumCsv], 1..=3),
    ) -> RunSpec {
        let mut hp = HyperParams::new(dt);
        hp.gamma = gamma;
        hp.mu = mu;
        hp.eps_div = eps;
        let mut s = RunSpec::new(problem, kind, hp, steps);
        s.spec_id = id;
        s.noise_sigma = sigma;
        s.x0 = x0;
        s.xi0 = xi0;
        s.seed = seed;
        s.record_stride = record_stride;
        s.sample_stride = if outputs.contains(&Output::SpectrumCsv) { sample_stride.or(Some(1)) } else { sample_stride };
        s.fit_tail = fit_tail;
        s.outputs = outputs;
        s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn run_spec_text_round_trips(s in run_spec()) {
        let text = s.to_spec_string();
        prop_assert_eq!(RunSpec::parse(&text).unwrap(), s);
    }

    #[test]
    fn unknown_keys_are_rejected(s in run_spec(), key in "zz[a-z]{1,6}") {
        let text = format!("{}{key} = 1\n", s.to_spec_string());
        prop_assert!(RunSpec::parse(&text).is_err());
    }
}
