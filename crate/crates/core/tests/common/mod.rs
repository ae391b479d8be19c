#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mta_core::{CcpVector, DiscreteShocks};

/// Random transportation instance; about half of them use small integer shocks so
/// that ties and degenerate bases are common.
pub fn random_instance(seed: u64, max_y: usize, max_s: usize, interior: bool) -> (CcpVector, DiscreteShocks) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ny = rng.random_range(if interior { 2 } else { 1 }..=max_y);
    let ns = rng.random_range(1..=max_s);
    let integer = rng.random_bool(0.5);
    let rows: Vec<Vec<f64>> = (0..ns)
        .map(|_| {
            (0..ny)
                .map(|_| {
                    if integer {
                        rng.random_range(-2..=2) as f64
                    } else {
                        rng.random_range(-3.0..3.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut raw: Vec<f64> = (0..ny)
        .map(|_| {
            if !interior && rng.random_bool(0.15) {
                0.0
            } else if rng.random_bool(0.4) {
                // Multiples of 1/S produce degenerate staircase bases.
                rng.random_range(1..=ns.max(2)) as f64
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    if raw.iter().all(|v| *v == 0.0) {
        raw[0] = 1.0;
    }
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = probs[..ny - 1].iter().sum();
    probs[ny - 1] = (1.0 - head).max(0.0);
    (
        CcpVector::new(probs).unwrap(),
        DiscreteShocks::from_rows(rows).unwrap(),
    )
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Maximum of `sum pi_ys eps^s_y` over all basic feasible points of the
/// transportation polytope, found by enumerating every candidate basis.
pub fn brute_force_objective(p: &[f64], eps: &DiscreteShocks) -> f64 {
    let ny = p.len();
    let ns = eps.n_points();
    let cells: Vec<(usize, usize)> = (0..ny).flat_map(|y| (0..ns).map(move |s| (y, s))).collect();
    let m = ny + ns - 1;
    let b = DVector::from_iterator(
        ny + ns,
        p.iter().copied().chain(std::iter::repeat_n(1.0 / ns as f64, ns)),
    );
    let mut best = f64::NEG_INFINITY;
    combinations(cells.len(), m, &mut |idx| {
        let mut a = DMatrix::<f64>::zeros(ny + ns, m);
        for (j, &c) in idx.iter().enumerate() {
            let (y, s) = cells[c];
            a[(y, j)] = 1.0;
            a[(ny + s, j)] = 1.0;
        }
        let svd = a.clone().svd(true, true);
        let Ok(x) = svd.solve(&b, 1e-12) else { return };
        if (&a * &x - &b).amax() > 1e-10 || x.iter().any(|v| *v < -1e-12) {
            return;
        }
        let obj: f64 = idx
            .iter()
            .zip(x.iter())
            .map(|(&c, v)| {
                let (y, s) = cells[c];
                v * eps.point(s)[y]
            })
            .sum();
        best = best.max(obj);
    });
    best
}

/// The transportation LP solved by a general-purpose simplex code.
pub fn lp_objective(p: &[f64], eps: &DiscreteShocks) -> f64 {
    let ny = p.len();
    let ns = eps.n_points();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Vec<_>> = (0..ny)
        .map(|y| {
            (0..ns)
                .map(|s| lp.add_var(eps.point(s)[y], (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    for y in 0..ny {
        let row: Vec<_> = vars[y].iter().map(|v| (*v, 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, p[y]);
    }
    for s in 0..ns {
        let col: Vec<_> = (0..ny).map(|y| (vars[y][s], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, 1.0 / ns as f64);
    }
    lp.solve().expect("transportation LP is feasible").objective()
}

/// Extreme values of `w_y` over `{(w, z): w_y + eps^s_y <= z_s, E_p[w] = gstar, E[z] = 0}`.
pub fn lp_bounds(p: &[f64], eps: &DiscreteShocks, gstar: f64) -> (Vec<f64>, Vec<f64>) {
    let ny = p.len();
    let ns = eps.n_points();
    let solve = |y: usize, dir: OptimizationDirection| -> f64 {
        let mut lp = Problem::new(dir);
        let free = (f64::NEG_INFINITY, f64::INFINITY);
        let w: Vec<_> = (0..ny)
            .map(|k| lp.add_var(if k == y { 1.0 } else { 0.0 }, free))
            .collect();
        let z: Vec<_> = (0..ns).map(|_| lp.add_var(0.0, free)).collect();
        for s in 0..ns {
            for k in 0..ny {
                lp.add_constraint([(w[k], 1.0), (z[s], -1.0)], ComparisonOp::Le, -eps.point(s)[k]);
            }
        }
        let mean_w: Vec<_> = (0..ny).map(|k| (w[k], p[k])).collect();
        lp.add_constraint(mean_w.as_slice(), ComparisonOp::Eq, gstar);
        let mean_z: Vec<_> = z.iter().map(|v| (*v, 1.0)).collect();
        lp.add_constraint(mean_z.as_slice(), ComparisonOp::Eq, 0.0);
        lp.solve().expect("identified set is nonempty").objective()
    };
    let lower = (0..ny).map(|y| solve(y, OptimizationDirection::Minimize)).collect();
    let upper = (0..ny).map(|y| solve(y, OptimizationDirection::Maximize)).collect();
    (lower, upper)
}
