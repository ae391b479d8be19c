//! Primal network simplex specialised to the `|Y| x S` transportation graph.
//!
//! The basis is a spanning tree rooted at row 0 (after reordering). Rows store their
//! parent column, columns their parent row. With `|Y|` much smaller than `S` almost
//! every column is a leaf hanging off a single row, so column potentials are never
//! stored: `v_s = eps[s][parent(s)] - u[parent(s)]`. Re-hanging a subtree therefore
//! only touches row data, and a pivot costs `O(|Y|)` besides pricing.
//!
//! Gain convention: maximise `sum pi_ys eps^s_y`; dual feasibility is
//! `u_y + v_s >= eps^s_y` with equality on basic arcs. Anti-cycling follows the
//! strongly feasible tree rule: zero-flow tree arcs always point toward the root and
//! the leaving arc is the last blocking arc met when walking the cycle from its apex
//! in the direction of the entering arc.

use crate::error::{MtaError, Result};
use crate::shocks::DiscreteShocks;

const NONE: usize = usize::MAX;

/// Solver controls.
#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Hard cap on pivots; `None` uses `50 * (|Y| + S) * |Y| + 10_000`.
    pub max_pivots: Option<usize>,
    /// Reduced-gain threshold for an arc to enter, relative to `1 + max |eps|`.
    pub pricing_tol: f64,
    /// Gauss–Seidel sweeps used to order columns for the initial staircase basis.
    pub warm_start_sweeps: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_pivots: None,
            pricing_tol: 1e-12,
            warm_start_sweeps: 8,
        }
    }
}

/// Terminal basis of the solver.
#[derive(Clone, Debug)]
pub(crate) struct RawSolution {
    /// `(row, column, mass)` for every tree arc, `|Y| + S - 1` entries.
    pub arcs: Vec<(usize, usize, f64)>,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
    pub pivots: usize,
    pub degenerate_pivots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Row(usize),
    Col(usize),
}

struct Tree<'a> {
    eps: &'a [f64],
    ny: usize,
    ns: usize,
    supply: Vec<f64>,
    demand: f64,
    root: usize,
    row_parent: Vec<usize>,
    row_flow: Vec<f64>,
    col_parent: Vec<usize>,
    col_flow: Vec<f64>,
    row_depth: Vec<usize>,
    u: Vec<f64>,
    // scratch
    order: Vec<usize>,
    kids_start: Vec<usize>,
    kids: Vec<usize>,
}

impl<'a> Tree<'a> {
    #[inline]
    fn eps(&self, s: usize, y: usize) -> f64 {
        self.eps[s * self.ny + y]
    }

    #[inline]
    fn col_potential(&self, c: usize) -> f64 {
        let r = self.col_parent[c];
        self.eps(c, r) - self.u[r]
    }

    #[inline]
    fn depth(&self, n: Node) -> usize {
        match n {
            Node::Row(r) => self.row_depth[r],
            Node::Col(c) => self.row_depth[self.col_parent[c]] + 1,
        }
    }

    #[inline]
    fn parent(&self, n: Node) -> Node {
        match n {
            Node::Row(r) => Node::Col(self.row_parent[r]),
            Node::Col(c) => Node::Row(self.col_parent[c]),
        }
    }

    #[inline]
    fn flow(&self, n: Node) -> f64 {
        match n {
            Node::Row(r) => self.row_flow[r],
            Node::Col(c) => self.col_flow[c],
        }
    }

    #[inline]
    fn flow_mut(&mut self, n: Node) -> &mut f64 {
        match n {
            Node::Row(r) => &mut self.row_flow[r],
            Node::Col(c) => &mut self.col_flow[c],
        }
    }

    fn set_parent(&mut self, n: Node, parent: Node, flow: f64) {
        match (n, parent) {
            (Node::Row(r), Node::Col(c)) => {
                self.row_parent[r] = c;
                self.row_flow[r] = flow;
            }
            (Node::Col(c), Node::Row(r)) => {
                self.col_parent[c] = r;
                self.col_flow[c] = flow;
            }
            _ => unreachable!("transportation tree is bipartite"),
        }
    }

    /// Recomputes row depths and row potentials from the tree structure.
    fn refresh_rows(&mut self) {
        let ny = self.ny;
        // Children of each row through its bridge columns, as a CSR list.
        self.kids_start.clear();
        self.kids_start.resize(ny + 1, 0);
        for r in 0..ny {
            if r != self.root {
                let g = self.col_parent[self.row_parent[r]];
                self.kids_start[g + 1] += 1;
            }
        }
        for r in 0..ny {
            self.kids_start[r + 1] += self.kids_start[r];
        }
        self.kids.clear();
        self.kids.resize(ny.saturating_sub(1), 0);
        let mut fill = self.kids_start.clone();
        for r in 0..ny {
            if r != self.root {
                let g = self.col_parent[self.row_parent[r]];
                self.kids[fill[g]] = r;
                fill[g] += 1;
            }
        }
        self.order.clear();
        self.order.push(self.root);
        self.row_depth[self.root] = 0;
        self.u[self.root] = 0.0;
        let mut head = 0;
        while head < self.order.len() {
            let g = self.order[head];
            head += 1;
            for k in self.kids_start[g]..self.kids_start[g + 1] {
                let r = self.kids[k];
                let pc = self.row_parent[r];
                let v_pc = self.eps(pc, g) - self.u[g];
                self.u[r] = self.eps(pc, r) - v_pc;
                self.row_depth[r] = self.row_depth[g] + 2;
                self.order.push(r);
            }
        }
        debug_assert_eq!(self.order.len(), ny, "row tree is disconnected");
    }

    /// Recomputes every tree flow from the marginals (flows on a spanning tree are
    /// determined by the supplies and demands).
    fn recompute_flows(&mut self) -> Result<()> {
        let ny = self.ny;
        let mut bridge_of_row = vec![NONE; ny];
        let mut leaf_count = vec![0usize; ny];
        let mut is_bridge = vec![false; 0];
        let mut bridges: Vec<usize> = Vec::new();
        for r in 0..ny {
            if r != self.root {
                bridge_of_row[r] = self.row_parent[r];
                bridges.push(self.row_parent[r]);
            }
        }
        bridges.sort_unstable();
        bridges.dedup();
        is_bridge.resize(bridges.len(), false);
        for c in 0..self.ns {
            if bridges.binary_search(&c).is_err() {
                leaf_count[self.col_parent[c]] += 1;
            }
        }
        // Net demand of each subtree, processed from the deepest rows upward.
        let mut row_net = vec![0.0; ny];
        let mut bridge_net: Vec<f64> = vec![self.demand; bridges.len()];
        let mut rows_by_depth: Vec<usize> = (0..ny).collect();
        rows_by_depth.sort_by_key(|&r| std::cmp::Reverse(self.row_depth[r]));
        for &r in &rows_by_depth {
            let mut net = -self.supply[r] + leaf_count[r] as f64 * self.demand;
            for (k, &c) in bridges.iter().enumerate() {
                if self.col_parent[c] == r {
                    net += bridge_net[k];
                }
            }
            row_net[r] = net;
            if r != self.root {
                let k = bridges.binary_search(&bridge_of_row[r]).expect("bridge column");
                bridge_net[k] += net;
            }
        }
        let clamp = |f: f64, what: &str| -> Result<f64> {
            if f < -1e-9 {
                Err(MtaError::Infeasible(format!(
                    "basis carries negative flow {f:e} on {what}"
                )))
            } else {
                Ok(f.max(0.0))
            }
        };
        for c in 0..self.ns {
            self.col_flow[c] = self.demand;
        }
        for (k, &c) in bridges.iter().enumerate() {
            self.col_flow[c] = clamp(bridge_net[k], "a column arc")?;
        }
        for r in 0..ny {
            if r != self.root {
                self.row_flow[r] = clamp(-row_net[r], "a row arc")?;
            }
        }
        Ok(())
    }
}

/// Column order for the initial staircase: columns grouped by their preferred row
/// under approximate row duals, most decisive columns first within each group.
fn warm_start_order(eps: &[f64], ny: usize, ns: usize, supply: &[f64], sweeps: usize) -> Vec<usize> {
    let mut lambda = vec![0.0; ny];
    if ny > 1 {
        let mut d = vec![0.0; ns];
        for _ in 0..sweeps {
            for y in 0..ny {
                for s in 0..ns {
                    let row = &eps[s * ny..(s + 1) * ny];
                    let mut other = f64::NEG_INFINITY;
                    for (k, e) in row.iter().enumerate() {
                        if k != y {
                            other = other.max(e - lambda[k]);
                        }
                    }
                    d[s] = row[y] - other;
                }
                let k = (supply[y] * ns as f64).round() as usize;
                lambda[y] = if k == 0 {
                    d.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0
                } else if k >= ns {
                    d.iter().copied().fold(f64::INFINITY, f64::min) - 1.0
                } else {
                    // Threshold between the k-th and (k+1)-th largest advantages.
                    d.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
                    let below = d[k];
                    let above = d[..k].iter().copied().fold(f64::INFINITY, f64::min);
                    0.5 * (above + below)
                };
            }
        }
    }
    let mut keyed: Vec<(usize, f64, usize)> = (0..ns)
        .map(|s| {
            let row = &eps[s * ny..(s + 1) * ny];
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for (y, e) in row.iter().enumerate() {
                let v = e - lambda[y];
                if v > best_val {
                    second = best_val;
                    best_val = v;
                    best = y;
                } else if v > second {
                    second = v;
                }
            }
            (best, best_val - second, s)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    keyed.into_iter().map(|(_, _, s)| s).collect()
}

/// Solves `max sum_{y,s} pi_ys eps^s_y` subject to row sums `supply` and column sums `1/S`.
pub(crate) fn solve(
    supply: &[f64],
    shocks: &DiscreteShocks,
    options: &SimplexOptions,
) -> Result<RawSolution> {
    let ny = shocks.n_actions();
    let ns = shocks.n_points();
    let eps = shocks.points();
    let demand = 1.0 / ns as f64;

    let col_order = warm_start_order(eps, ny, ns, supply, options.warm_start_sweeps);

    let mut tree = Tree {
        eps,
        ny,
        ns,
        supply: supply.to_vec(),
        demand,
        root: 0,
        row_parent: vec![NONE; ny],
        row_flow: vec![0.0; ny],
        col_parent: vec![NONE; ns],
        col_flow: vec![0.0; ns],
        row_depth: vec![0; ny],
        u: vec![0.0; ny],
        order: Vec::with_capacity(ny),
        kids_start: Vec::with_capacity(ny + 1),
        kids: Vec::with_capacity(ny),
    };

    // Staircase (north-west corner) basis over rows 0..|Y| and the ordered columns,
    // with row intervals [P_{i-1}, P_i) in column units. When a row and a column end
    // together the walk moves to the next row, so the zero-flow arc points at the root.
    let mut cumulative = Vec::with_capacity(ny);
    let mut acc = 0.0;
    for (i, p) in supply.iter().enumerate() {
        acc += p * ns as f64;
        let mut edge = if i + 1 == ny { ns as f64 } else { acc.min(ns as f64) };
        let nearest = edge.round();
        if (edge - nearest).abs() < 1e-9 {
            edge = nearest;
        }
        cumulative.push(edge);
    }
    let mut i = 0;
    let mut j = 0;
    tree.col_parent[col_order[0]] = 0;
    loop {
        if i + 1 == ny && j + 1 == ns {
            break;
        }
        if i + 1 < ny && cumulative[i] <= (j + 1) as f64 {
            i += 1;
            tree.row_parent[i] = col_order[j];
        } else {
            j += 1;
            tree.col_parent[col_order[j]] = i;
        }
    }
    tree.refresh_rows();
    tree.recompute_flows()?;

    let scale = 1.0 + eps.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let tol = options.pricing_tol * scale;
    let tie = 1e-14;
    let max_pivots = options
        .max_pivots
        .unwrap_or(50 * (ny + ns) * ny + 10_000);
    let block = ((ns as f64).sqrt() as usize).max(8).min(ns).max(1);

    let mut next_col = 0usize;
    let mut pivots = 0usize;
    let mut degenerate = 0usize;
    let mut path_r: Vec<Node> = Vec::with_capacity(2 * ny);
    let mut path_c: Vec<Node> = Vec::with_capacity(2 * ny);

    loop {
        // Block pricing: best reduced gain within the first block holding a candidate.
        let mut best_rc = tol;
        let mut entering: Option<(usize, usize)> = None;
        let mut scanned = 0;
        while scanned < ns {
            let c = next_col;
            next_col += 1;
            if next_col == ns {
                next_col = 0;
            }
            scanned += 1;
            let v = tree.col_potential(c);
            let row = &eps[c * ny..(c + 1) * ny];
            for (y, e) in row.iter().enumerate() {
                let rc = e - tree.u[y] - v;
                if rc > best_rc {
                    best_rc = rc;
                    entering = Some((y, c));
                }
            }
            if entering.is_some() && scanned % block == 0 {
                break;
            }
        }
        let Some((r_in, c_in)) = entering else {
            break;
        };
        if pivots >= max_pivots {
            return Err(MtaError::PivotLimit {
                pivots,
                reduced_gain: best_rc,
            });
        }
        pivots += 1;

        // Cycle: entering arc plus the tree paths from both endpoints to the apex.
        path_r.clear();
        path_c.clear();
        let mut a = Node::Row(r_in);
        let mut b = Node::Col(c_in);
        while a != b {
            if tree.depth(a) >= tree.depth(b) {
                path_r.push(a);
                a = tree.parent(a);
            } else {
                path_c.push(b);
                b = tree.parent(b);
            }
        }
        // Arcs losing flow: column-child arcs above c_in, row-child arcs above r_in.
        let mut theta = f64::INFINITY;
        for &n in &path_c {
            if matches!(n, Node::Col(_)) {
                theta = theta.min(tree.flow(n));
            }
        }
        for &n in &path_r {
            if matches!(n, Node::Row(_)) {
                theta = theta.min(tree.flow(n));
            }
        }
        debug_assert!(theta.is_finite());
        // Last blocking arc in the orientation apex -> r_in -> c_in -> apex.
        let mut leaving: Option<(Node, bool)> = None;
        for &n in path_c.iter().rev() {
            if matches!(n, Node::Col(_)) && tree.flow(n) <= theta + tie {
                leaving = Some((n, true));
                break;
            }
        }
        if leaving.is_none() {
            for &n in path_r.iter() {
                if matches!(n, Node::Row(_)) && tree.flow(n) <= theta + tie {
                    leaving = Some((n, false));
                    break;
                }
            }
        }
        let (q, on_col_side) = leaving.expect("a blocking arc exists on every cycle");
        if theta <= tie {
            degenerate += 1;
        }
        let theta = theta.max(0.0);

        for &n in &path_c {
            let f = tree.flow_mut(n);
            *f = match n {
                Node::Col(_) => (*f - theta).max(0.0),
                Node::Row(_) => *f + theta,
            };
        }
        for &n in &path_r {
            let f = tree.flow_mut(n);
            *f = match n {
                Node::Row(_) => (*f - theta).max(0.0),
                Node::Col(_) => *f + theta,
            };
        }

        // Drop the leaving arc and hang the detached subtree from the entering arc.
        let (mut node, mut prev) = if on_col_side {
            (Node::Col(c_in), Node::Row(r_in))
        } else {
            (Node::Row(r_in), Node::Col(c_in))
        };
        let mut prev_flow = theta;
        loop {
            let next = tree.parent(node);
            let next_flow = tree.flow(node);
            tree.set_parent(node, prev, prev_flow);
            if node == q {
                break;
            }
            prev = node;
            prev_flow = next_flow;
            node = next;
        }
        tree.refresh_rows();
    }

    tree.recompute_flows()?;

    let mut arcs = Vec::with_capacity(ny + ns - 1);
    for c in 0..ns {
        arcs.push((tree.col_parent[c], c, tree.col_flow[c]));
    }
    for r in 0..ny {
        if r != tree.root {
            arcs.push((r, tree.row_parent[r], tree.row_flow[r]));
        }
    }
    arcs.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let col_duals = (0..ns).map(|c| tree.col_potential(c)).collect();
    Ok(RawSolution {
        arcs,
        row_duals: tree.u,
        col_duals,
        pivots,
        degenerate_pivots: degenerate,
    })
}
