use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mta_core::ddc::{
    estimate, ex_ante_values, solve_model, utility_flows, DdcModel, EstimationOptions, StateStatus,
    TransitionMatrix, UnusableStatePolicy, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use mta_core::montecarlo::{build_resource_model, ResourceModelSpec};
use mta_core::{invert_ccp, CcpVector, MtaError, ShockSpec, StateShocks};

fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> TransitionMatrix {
    let mut data = vec![0.0; n * n];
    for x in 0..n {
        let row = &mut data[x * n..(x + 1) * n];
        let k = rng.random_range(1..=n.min(6));
        for _ in 0..k {
            row[rng.random_range(0..n)] += rng.random_range(0.01..1.0);
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    TransitionMatrix::new(n, data).unwrap()
}

fn residual(t: &TransitionMatrix, beta: f64, v: &[f64], w: &[f64]) -> f64 {
    (0..w.len())
        .map(|x| (beta * t.expect(x, v) - v[x] - w[x]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn linear_system_residual_on_random_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1usize, 2, 17, 120, 500] {
        let t = random_kernel(&mut rng, n);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let wmax = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for beta in [0.0, 0.5, 0.9, 0.99] {
            let v = ex_ante_values(&w, &t, beta).unwrap();
            let r = residual(&t, beta, &v, &w);
            assert!(r <= 1e-10 * (1.0 + wmax), "n={n} beta={beta}: residual {r:e}");
            if beta == 0.0 {
                assert!(v.iter().zip(&w).all(|(a, b)| *a == -*b));
            }
        }
    }
}

#[test]
fn identity_kernel_scales_payoffs() {
    let v = ex_ante_values(&[1.0, 1.0], &TransitionMatrix::identity(2), 0.9).unwrap();
    for x in v {
        assert!((x + 10.0).abs() < 1e-12);
    }
    let v = ex_ante_values(&[0.0; 3], &TransitionMatrix::identity(3), 0.5).unwrap();
    assert_eq!(v, vec![0.0; 3]);
}

#[test]
fn benchmark_flows_vanish_by_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 40;
    let transitions: Vec<TransitionMatrix> = (0..3).map(|_| random_kernel(&mut rng, n)).collect();
    let w0: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n).map(|_| rng.random_range(-3.0..0.0)).collect())
        .collect();
    for y0 in 0..3 {
        let v = ex_ante_values(&w0[y0], &transitions[y0], 0.95).unwrap();
        let flows = utility_flows(&w0, &v, &transitions, 0.95).unwrap();
        assert!(flows[y0].iter().all(|f| f.abs() < 1e-8));
    }
    let zero = utility_flows(&w0, &vec![0.0; n], &transitions, 0.9).unwrap();
    assert_eq!(zero, w0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residual_bound_holds(seed in any::<u64>(), n in 1usize..60, beta in prop::sample::select(vec![0.0, 0.5, 0.9, 0.99])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_kernel(&mut rng, n);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let wmax = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let v = ex_ante_values(&w, &t, beta).unwrap();
        prop_assert!(residual(&t, beta, &v, &w) <= 1e-10 * (1.0 + wmax));
    }
}

#[test]
fn rejects_discount_of_one() {
    let err = ex_ante_values(&[1.0], &TransitionMatrix::identity(1), 1.0).unwrap_err();
    assert!(err.is_input_error());
}

fn resource(points: usize, seed: u64) -> (ResourceModelSpec, DdcModel, StateShocks) {
    let spec = ResourceModelSpec::default();
    let model = build_resource_model(&spec).unwrap();
    let shocks = StateShocks::discretize(&model.shocks, spec.n_states, points, seed).unwrap();
    (spec, model, shocks)
}

#[test]
fn model_solution_satisfies_bellman_identities() {
    let (_, model, shocks) = resource(500, 3);
    let sol = solve_model(&model, &shocks, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(sol.bellman_residual <= 1e-9);
    for y in 0..3 {
        for x in 0..30 {
            let expected = model.flows[y][x] + model.beta * model.transitions[y].expect(x, &sol.values);
            assert!((sol.w[y][x] - expected).abs() < 1e-8);
        }
    }
}

#[test]
fn value_iteration_contracts_at_rate_beta() {
    let (_, model, shocks) = resource(300, 4);
    let mut last = f64::INFINITY;
    for k in 1..25 {
        match solve_model(&model, &shocks, 1e-300, k) {
            Err(MtaError::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, k);
                assert!(residual <= last * model.beta + 1e-12, "iteration {k}: {residual} after {last}");
                last = residual;
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}

#[test]
fn static_model_converges_immediately() {
    let flows = vec![vec![0.5, -1.0], vec![0.0, 0.0]];
    let model = DdcModel::new(
        0.0,
        vec![TransitionMatrix::identity(2), TransitionMatrix::identity(2)],
        flows.clone(),
        ShockSpec::gumbel(2),
        1,
    )
    .unwrap();
    let shocks = StateShocks::discretize(&model.shocks, 2, 200, 5).unwrap();
    let sol = solve_model(&model, &shocks, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(sol.iterations <= 2);
    assert_eq!(sol.w, flows);
}

#[test]
fn symmetric_model_has_uniform_choices() {
    let model = DdcModel::new(
        0.9,
        vec![TransitionMatrix::identity(3); 3],
        vec![vec![0.0; 3]; 3],
        ShockSpec::gumbel(3),
        0,
    )
    .unwrap();
    let shocks = StateShocks::discretize(&model.shocks, 3, 50, 1).unwrap();
    let sol = solve_model(&model, &shocks, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    for x in 0..3 {
        assert_eq!(sol.w[0][x], sol.w[1][x]);
        assert_eq!(sol.w[1][x], sol.w[2][x]);
    }
}

/// Solve the model and feed its own choice probabilities back with the same shocks.
#[test]
fn exact_ccp_round_trip() {
    let (spec, model, shocks) = resource(1000, 17);
    let sol = solve_model(&model, &shocks, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let ccps: Vec<Option<CcpVector>> = sol.ccp.iter().cloned().map(Some).collect();
    let options = EstimationOptions {
        with_bounds: true,
        ..EstimationOptions::default()
    };
    let est = estimate(&ccps, &model.transitions, model.beta, &shocks, model.benchmark, &options).unwrap();
    let truth = spec.true_flows();
    let bounds = est.bounds.as_ref().unwrap();
    let identified = est.identified_states();
    assert_eq!(identified.len(), 30);
    assert!(est.linear_residual <= 1e-10);

    let mut max_width: f64 = 0.0;
    for &x in &identified {
        let b = bounds[x].as_ref().unwrap();
        max_width = max_width.max(b.max_width());
        // The true payoffs, normalised to zero surplus, are in the identified set.
        let normalised: Vec<f64> = (0..3).map(|y| sol.w[y][x] - sol.values[x]).collect();
        assert!(b.contains(&normalised, 1e-6), "state {x}");
        assert!(est.flows[2][x].abs() < 1e-8);
    }
    // Payoff errors reach the flows through V = (beta P0 - I)^{-1} W.
    let amplification = 1.0 + (1.0 + model.beta) / (1.0 - model.beta);
    for &x in &identified {
        for y in 0..3 {
            let err = (est.flows[y][x] - truth[y][x]).abs();
            assert!(err <= amplification * max_width + 1e-6);
            assert!(err <= 0.05, "state {x} action {y}: error {err}");
        }
    }
}

#[test]
fn single_state_model() {
    let model = DdcModel::new(
        0.9,
        vec![TransitionMatrix::identity(1); 2],
        vec![vec![0.7], vec![0.0]],
        ShockSpec::gumbel(2),
        1,
    )
    .unwrap();
    let shocks = StateShocks::discretize(&model.shocks, 1, 20_000, 8).unwrap();
    let sol = solve_model(&model, &shocks, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let ccps = vec![Some(sol.ccp[0].clone())];
    let est = estimate(&ccps, &model.transitions, 0.9, &shocks, 1, &EstimationOptions::default()).unwrap();
    assert!(est.flows[1][0].abs() < 1e-8);
    assert!((est.flows[0][0] - 0.7).abs() < 0.01);
    // V solves the scalar equation (0.9 - 1) V = w0_1.
    assert!(((0.9 - 1.0) * est.values[0] - est.w0[1][0]).abs() < 1e-12);
}

#[test]
fn static_estimation_matches_payoff_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 5;
    let transitions: Vec<TransitionMatrix> = (0..3).map(|_| random_kernel(&mut rng, n)).collect();
    let shocks = StateShocks::discretize(&ShockSpec::gumbel(3), n, 2000, 10).unwrap();
    let ccps: Vec<Option<CcpVector>> = (0..n)
        .map(|_| {
            let a = rng.random_range(0.1..0.4);
            let b = rng.random_range(0.1..0.4);
            Some(CcpVector::new(vec![a, b, 1.0 - a - b]).unwrap())
        })
        .collect();
    let est = estimate(&ccps, &transitions, 0.0, &shocks, 0, &EstimationOptions::default()).unwrap();
    for x in 0..n {
        let inv = invert_ccp(ccps[x].as_ref().unwrap(), shocks.at(x)).unwrap();
        for y in 0..3 {
            assert!((est.flows[y][x] - (inv.w0[y] - inv.w0[0])).abs() < 1e-12);
        }
    }
}

fn chain_kernel(n: usize) -> TransitionMatrix {
    // Each state moves to the next one; the last state is absorbing.
    let rows = (0..n)
        .map(|x| {
            let mut r = vec![0.0; n];
            r[(x + 1).min(n - 1)] = 1.0;
            r
        })
        .collect();
    TransitionMatrix::from_rows(rows).unwrap()
}

#[test]
fn unusable_states_error_or_are_excluded() {
    let n = 5;
    let transitions = vec![chain_kernel(n), TransitionMatrix::identity(n)];
    let shocks = StateShocks::discretize(&ShockSpec::gumbel(2), n, 500, 2).unwrap();
    let interior = CcpVector::new(vec![0.4, 0.6]).unwrap();
    let mut ccps: Vec<Option<CcpVector>> = vec![Some(interior.clone()); n];
    ccps[3] = None;

    let err = estimate(&ccps, &transitions, 0.9, &shocks, 0, &EstimationOptions::default()).unwrap_err();
    assert!(matches!(err, MtaError::Unobserved { state: 3 }));

    let exclude = EstimationOptions {
        policy: UnusableStatePolicy::Exclude,
        ..EstimationOptions::default()
    };
    let est = estimate(&ccps, &transitions, 0.9, &shocks, 0, &exclude).unwrap();
    // States 0..2 reach state 3 under the benchmark chain; state 4 does not.
    use StateStatus::*;
    assert_eq!(est.status, vec![Pruned, Pruned, Pruned, Unobserved, Identified]);
    assert!(est.flows[1][..4].iter().all(|f| f.is_nan()));
    assert!(est.flows[0][4].abs() < 1e-8);

    let mut boundary = vec![Some(interior.clone()); n];
    boundary[4] = Some(CcpVector::new(vec![0.0, 1.0]).unwrap());
    let err = estimate(&boundary, &transitions, 0.9, &shocks, 0, &EstimationOptions::default()).unwrap_err();
    assert!(matches!(err, MtaError::BenchmarkBoundary { state: 4, action: 0, .. }));
    assert_eq!(err.kind(), "benchmark_boundary");
    // Every state drifts into state 4, so excluding it leaves nothing.
    let err = estimate(&boundary, &transitions, 0.9, &shocks, 0, &exclude).unwrap_err();
    assert!(matches!(err, MtaError::Empty(_)));
}

#[test]
fn boundary_non_benchmark_state_keeps_values() {
    let n = 3;
    let transitions = vec![TransitionMatrix::identity(n); 3];
    let shocks = StateShocks::discretize(&ShockSpec::gumbel(3), n, 500, 2).unwrap();
    let ccps = vec![
        Some(CcpVector::new(vec![0.4, 0.3, 0.3]).unwrap()),
        Some(CcpVector::new(vec![0.5, 0.5, 0.0]).unwrap()),
        Some(CcpVector::new(vec![0.2, 0.3, 0.5]).unwrap()),
    ];
    let est = estimate(&ccps, &transitions, 0.9, &shocks, 0, &EstimationOptions::default()).unwrap();
    assert_eq!(est.status[1], StateStatus::BoundaryCcp);
    assert!(est.values[1].is_finite());
    assert!(est.w0[0][1].is_finite() && est.w0[1][1].is_finite() && est.w0[2][1].is_nan());
    assert!(est.flows[0][1].is_nan());
    assert_eq!(est.identified_states(), vec![0, 2]);
}

#[test]
fn csv_marks_unidentified_entries_empty() {
    let n = 2;
    let transitions = vec![TransitionMatrix::identity(n); 3];
    let shocks = StateShocks::discretize(&ShockSpec::gumbel(3), n, 100, 2).unwrap();
    let ccps = vec![
        Some(CcpVector::new(vec![0.4, 0.3, 0.3]).unwrap()),
        Some(CcpVector::new(vec![0.5, 0.5, 0.0]).unwrap()),
    ];
    let est = estimate(&ccps, &transitions, 0.5, &shocks, 0, &EstimationOptions::default()).unwrap();
    let mut buf = Vec::new();
    est.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,w0,flow,lower,upper,identified,status");
    assert!(lines[1].ends_with(",true,identified"));
    assert_eq!(lines[6], "1,2,,,,,false,boundary_ccp");
}
