use approx::assert_relative_eq;
use proptest::prelude::*;

use gridform_core::controllers::{
    invert_equivalent, ControllerConfig, ControllerFamily, ControllerForm, EquivalentParams,
    FixedNative, MatchingParams, NativeParams,
};
use gridform_core::network::{build_laplacian, Line, NetworkGraph, DEFAULT_OMEGA0};
use gridform_core::simulator::{
    compare_trajectories, compute_metrics, run_scenario, Component, Disturbance, FlowModel,
    Scenario, SimError,
};
use gridform_core::spectral::{
    common_tuning, predict_disturbance_steady_state, tuning_report, SpectralError,
};

fn target(m: f64, d: f64) -> EquivalentParams {
    EquivalentParams {
        m,
        d,
        p_star: 0.0,
        q_star: 0.0,
        vm_star: 1.0,
        tau_f: m / d,
        r_q: 0.05,
    }
}

fn configs_for(eq: &EquivalentParams, n: usize) -> Vec<Vec<ControllerConfig>> {
    let fixed = |family| match family {
        ControllerFamily::Matching => FixedNative {
            c_dc: Some(2.0),
            ..Default::default()
        },
        _ => FixedNative::default(),
    };
    ControllerFamily::ALL
        .iter()
        .map(|&family| {
            let native = invert_equivalent(eq, family, &fixed(family)).unwrap();
            vec![ControllerConfig::new(native, ControllerForm::Reduced); n]
        })
        .collect()
}

fn connected_graph(n: usize, weights: &[f64], chords: &[(usize, usize)]) -> NetworkGraph {
    let mut lines: Vec<Line> = (1..n).map(|k| Line::lossless(k - 1, k, weights[k % weights.len()])).collect();
    for &(a, b) in chords {
        let (a, b) = (a % n, b % n);
        if a != b && !lines.iter().any(|l| (l.from, l.to) == (a, b) || (l.from, l.to) == (b, a)) {
            lines.push(Line::lossless(a, b, 0.9));
        }
    }
    NetworkGraph::new(n, lines, DEFAULT_OMEGA0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inverted_families_share_trajectories(
        m in 0.2f64..4.0,
        d in 1.0f64..30.0,
        n in 2usize..6,
        weights in prop::collection::vec(0.3f64..3.0, 1..4),
        chords in prop::collection::vec((0usize..6, 0usize..6), 0..3),
        amp in -0.3f64..0.3,
    ) {
        let graph = connected_graph(n, &weights, &chords);
        let eq = target(m, d);
        let runs: Vec<_> = configs_for(&eq, n)
            .into_iter()
            .map(|controllers| {
                run_scenario(&Scenario {
                    disturbances: vec![Disturbance { t_start: 0.05, node: n - 1, delta_p: amp }],
                    flow_model: FlowModel::AcStandard,
                    t_end: 1.0,
                    dt: 2e-3,
                    ..Scenario::new(graph.clone(), controllers)
                })
                .unwrap()
            })
            .collect();
        let comps = [Component::Theta, Component::Omega, Component::Vm, Component::P, Component::Q];
        for other in &runs[1..] {
            let report = compare_trajectories(&runs[0], other, &comps, 1e-10).unwrap();
            prop_assert!(report.passed, "deviation {}", report.max_deviation);
        }
    }
}

#[test]
fn simulated_steady_state_matches_prediction() {
    let graph = NetworkGraph::path(5, 1.5).unwrap();
    let lap = build_laplacian(&graph).unwrap();
    let p_d = [0.0, 0.2, 0.0, -0.05, 0.1];
    let (m, d) = (1.0, 4.0);
    let pred = predict_disturbance_steady_state(&lap, d, &p_d).unwrap();
    let eta2 = tuning_report(&lap, m, d).unwrap().eta2;

    let controllers = configs_for(&target(m, d), 5).remove(0);
    let traj = run_scenario(&Scenario {
        disturbances: p_d
            .iter()
            .enumerate()
            .map(|(node, p)| Disturbance {
                t_start: 0.0,
                node,
                delta_p: -p,
            })
            .collect(),
        t_end: (12.0 / eta2.re.abs()).ceil(),
        dt: 1e-2,
        ..Scenario::new(graph, controllers)
    })
    .unwrap();

    let last = traj.final_state();
    let mean = last.iter().map(|s| s.theta).sum::<f64>() / 5.0;
    for (k, s) in last.iter().enumerate() {
        assert_relative_eq!(s.omega, pred.omega, max_relative = 1e-4);
        assert_relative_eq!(s.theta - mean, pred.theta_offsets[k], epsilon = 1e-5);
    }
    let metrics = compute_metrics(&traj, 0.02).unwrap();
    assert_relative_eq!(metrics.theta_avg_ramp_rate, pred.omega, max_relative = 1e-6);
    assert_relative_eq!(metrics.omega_avg_final, pred.omega, max_relative = 1e-6);
}

#[test]
fn heterogeneous_networks_have_no_common_tuning() {
    let mut controllers = configs_for(&target(2.0, 20.0), 3).remove(0);
    controllers[2] = configs_for(&target(2.0, 10.0), 1).remove(0).remove(0);
    assert!(matches!(
        common_tuning(&controllers),
        Err(SpectralError::HeterogeneousTuning { .. })
    ));
    let mixed: Vec<_> = configs_for(&target(2.0, 20.0), 1).into_iter().flatten().collect();
    let eq = common_tuning(&mixed).unwrap();
    assert_relative_eq!(eq.m, 2.0, max_relative = 1e-12);
    assert_relative_eq!(eq.d, 20.0, max_relative = 1e-12);
}

#[test]
fn large_step_collapses_matching_dc_link() {
    let mt = MatchingParams::new(0.08, 0.04, 0.8);
    let result = run_scenario(&Scenario {
        disturbances: vec![Disturbance {
            t_start: 0.0,
            node: 0,
            delta_p: 5.0,
        }],
        t_end: 5.0,
        ..Scenario::new(
            NetworkGraph::ring(3, 1.0).unwrap(),
            vec![ControllerConfig::new(NativeParams::Matching(mt), ControllerForm::Full); 3],
        )
    });
    match result {
        Err(err @ SimError::DcLinkCollapse { t, .. }) => {
            assert!(t > 0.0 && t < 5.0);
            assert!(err.is_runtime());
        }
        other => panic!("expected DC-link collapse, got {other:?}"),
    }
}
