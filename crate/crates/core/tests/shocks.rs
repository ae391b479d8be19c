use std::path::PathBuf;

use mta_core::shocks::mixture_for_state;
use mta_core::{discretize, DiscreteShocks, ShockSpec, EULER_GAMMA};

fn golden_specs() -> Vec<(&'static str, ShockSpec, u64)> {
    vec![
        ("gumbel", ShockSpec::GumbelIid { scale: 1.0, dim: 2 }, 42),
        (
            "normal",
            ShockSpec::MultivariateNormal {
                mean: vec![0.0; 3],
                cov: vec![
                    vec![0.5, 0.5, 0.0],
                    vec![0.5, 1.0, 0.0],
                    vec![0.0, 0.0, 0.0],
                ],
            },
            7,
        ),
        ("mixture_x10", mixture_for_state(0.1, 0.5, 10).unwrap(), 3),
    ]
}

fn golden_text() -> String {
    let mut out = String::new();
    for (name, spec, seed) in golden_specs() {
        let shocks = discretize(&spec, 6, seed).unwrap();
        let mut buf = Vec::new();
        shocks.write_csv(&mut buf).unwrap();
        out.push_str(&format!("# {name} seed={seed}\n"));
        out.push_str(&String::from_utf8(buf).unwrap());
    }
    out
}

/// The seed-to-matrix map is frozen; set `MTA_BLESS=1` to rewrite the file after an
/// intentional change of sampler.
#[test]
fn seed_to_matrix_golden_file() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/shocks_golden.csv");
    let actual = golden_text();
    if std::env::var_os("MTA_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).expect("golden file present");
    assert_eq!(actual, expected);
}

fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

fn ks_distance(shocks: &DiscreteShocks, y: usize) -> f64 {
    let mut col: Vec<f64> = shocks.rows().map(|r| r[y]).collect();
    col.sort_by(f64::total_cmp);
    let n = col.len() as f64;
    col.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = gumbel_cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn ks_distance_shrinks_with_support_size() {
    let spec = ShockSpec::gumbel(3);
    for y in 0..3 {
        let avg = |s: usize| {
            (0..10)
                .map(|seed| ks_distance(&discretize(&spec, s, seed).unwrap(), y))
                .sum::<f64>()
                / 10.0
        };
        let small = avg(100);
        let large = avg(10_000);
        assert!(large < small, "marginal {y}: {large} !< {small}");
        assert!(large < 0.02);
    }
}

#[test]
fn weights_are_exactly_uniform() {
    for s in [1, 3, 7, 1000] {
        let shocks = discretize(&ShockSpec::gumbel(2), s, 1).unwrap();
        assert_eq!(shocks.weight(), 1.0 / s as f64);
    }
}

#[test]
fn gumbel_mean_and_scale() {
    let shocks = discretize(&ShockSpec::GumbelIid { scale: 2.0, dim: 2 }, 200_000, 5).unwrap();
    for y in 0..2 {
        assert!((shocks.column_mean(y) - 2.0 * EULER_GAMMA).abs() < 0.02);
    }
}

#[test]
fn normal_moments_and_degenerate_coordinate() {
    let spec = &golden_specs()[1].1;
    let shocks = discretize(spec, 200_000, 11).unwrap();
    let n = shocks.n_points() as f64;
    let mut s = [[0.0; 2]; 2];
    for r in shocks.rows() {
        assert_eq!(r[2], 0.0);
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] += r[i] * r[j] / n;
            }
        }
    }
    assert!((s[0][0] - 0.5).abs() < 0.01);
    assert!((s[0][1] - 0.5).abs() < 0.01);
    assert!((s[1][1] - 1.0).abs() < 0.02);
}

#[test]
fn state_mixture_variance() {
    for x in [0usize, 10, 29] {
        let spec = mixture_for_state(0.1, 0.5, x).unwrap();
        let shocks = discretize(&spec, 200_000, x as u64).unwrap();
        let n = shocks.n_points() as f64;
        let var: f64 = shocks.rows().map(|r| r[0] * r[0]).sum::<f64>() / n;
        let expected = 0.5 + 0.5 / (1.0 + 0.1 * x as f64);
        assert!((var - expected).abs() < 0.02, "x={x}: {var} vs {expected}");
        assert!(shocks.rows().all(|r| r[1] == 0.0));
    }
}

#[test]
fn state_dependent_mixture_resolves_per_component() {
    let spec = ShockSpec::Mixture {
        weights: vec![0.3, 0.7],
        components: vec![
            ShockSpec::StateDependentNormalMixture { a: 0.1, b: 0.5 },
            ShockSpec::StateDependentNormalMixture { a: 0.0, b: 1.0 },
        ],
    };
    assert!(spec.is_state_dependent());
    let resolved = spec.at_state(4).unwrap();
    assert!(!resolved.is_state_dependent());
    assert!(discretize(&resolved, 10, 0).is_ok());
}
