//! Optimal-transport distances d_p (p = 1, 2) and d_∞ between discrete
//! measures.
//!
//! Equal-size uniform measures are handled as assignment problems (an
//! optimal coupling can always be taken to be a permutation). Everything
//! else goes through network flow with the weights rounded onto an integer
//! grid of resolution [`GRID`].

mod assignment;
mod flow;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use assignment::hungarian;
pub use flow::FlowGraph;

use crate::error::{Error, Result};
use crate::geometry::{projective_rho_raw, rho_raw};
use crate::measures::DiscreteMeasure;

/// Mass resolution of the flow formulation.
pub const GRID: f64 = 1e-12;

/// Costs of the assignment problem are `round(c^p · COST_SCALE)`.
pub const COST_SCALE: f64 = 4_503_599_627_370_496.0; // 2^52

/// Largest instance accepted by [`assignment_bruteforce`].
pub const BRUTEFORCE_MAX: usize = 8;

const UNIFORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostExponent {
    One,
    Two,
    Infinity,
}

impl CostExponent {
    fn pow(self, c: f64) -> f64 {
        match self {
            CostExponent::Two => c * c,
            _ => c,
        }
    }

    fn root(self, s: f64) -> f64 {
        match self {
            CostExponent::Two => s.sqrt(),
            _ => s,
        }
    }
}

/// Ground metric on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Geodesic distance ρ on S^d.
    Sphere,
    /// Quotient distance min(ρ(x, y), ρ(x, -y)) on RP^d.
    Projective,
}

impl Metric {
    fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Metric::Sphere => rho_raw(x, y),
            Metric::Projective => projective_rho_raw(x, y),
        }
    }
}

/// A coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub mass: DMatrix<f64>,
    pub cost_exponent: CostExponent,
    pub metric: Metric,
}

impl TransportPlan {
    /// Largest deviation of the plan's marginals from the given weights.
    pub fn marginal_error(&self, source: &[f64], target: &[f64]) -> f64 {
        let rows = (0..self.rows).map(|i| (self.mass.row(i).sum() - source[i]).abs());
        let cols = (0..self.cols).map(|j| (self.mass.column(j).sum() - target[j]).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// Nonzero entries as `(i, j, mass)`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let m = self.mass[(i, j)];
                if m > 0.0 {
                    out.push((i, j, m));
                }
            }
        }
        out
    }
}

/// Row-major ground-distance matrix.
pub fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: Metric) -> Result<Vec<f64>> {
    mu.check_same_dim(nu)?;
    let mut out = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.points() {
        for y in nu.points() {
            out.push(metric.eval(x.coords(), y.coords()));
        }
    }
    Ok(out)
}

fn is_uniform_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    mu.len() == nu.len() && mu.is_uniform(UNIFORM_TOL) && nu.is_uniform(UNIFORM_TOL)
}

fn quantized(c: f64, p: CostExponent) -> i128 {
    (p.pow(c) * COST_SCALE).round() as i128
}

/// Value of a permutation coupling between two uniform N-point measures:
/// `(Σ_i c(i, π(i))^p / N)^{1/p}`, or the maximum for p = ∞. For finite p
/// the terms are summed exactly on the grid of [`COST_SCALE`].
pub fn permutation_value(dist: &[f64], n: usize, perm: &[usize], p: CostExponent) -> f64 {
    if p == CostExponent::Infinity {
        return perm
            .iter()
            .enumerate()
            .map(|(i, &j)| dist[i * n + j])
            .fold(0.0, f64::max);
    }
    let total: i128 = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| quantized(dist[i * n + j], p))
        .sum();
    p.root(total as f64 / COST_SCALE / n as f64)
}

fn permutation_plan(n: usize, perm: &[usize], p: CostExponent, metric: Metric) -> TransportPlan {
    let mut mass = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        mass[(i, j)] = 1.0 / n as f64;
    }
    TransportPlan {
        rows: n,
        cols: n,
        mass,
        cost_exponent: p,
        metric,
    }
}

/// Rounds weights onto the integer grid, preserving the exact total
/// `1 / GRID` by largest remainders.
fn grid_weights(weights: &[f64]) -> Vec<i64> {
    let total = (1.0 / GRID).round() as i64;
    let scaled: Vec<f64> = weights.iter().map(|w| w / GRID).collect();
    let mut ints: Vec<i64> = scaled.iter().map(|s| s.floor() as i64).collect();
    let mut deficit = total - ints.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut k = 0;
    while deficit != 0 && !order.is_empty() {
        let i = order[k % order.len()];
        if deficit > 0 {
            ints[i] += 1;
            deficit -= 1;
        } else if ints[i] > 0 {
            ints[i] -= 1;
            deficit += 1;
        }
        k += 1;
    }
    ints
}

struct Bipartite {
    graph: FlowGraph,
    edges: Vec<(usize, usize, flow::EdgeId)>,
    source: usize,
    sink: usize,
    demand: i64,
    /// Grid units that independent rounding of the two marginals can
    /// strand; at most one per atom.
    slack: i64,
    unit: f64,
}

/// Source → rows → columns → sink network; only pairs accepted by `keep`
/// get an edge.
fn bipartite(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    dist: &[f64],
    p: CostExponent,
    keep: impl Fn(f64) -> bool,
) -> Bipartite {
    let (m, n) = (mu.len(), nu.len());
    let (a, b, unit, slack) = if is_uniform_pair(mu, nu) {
        (vec![1i64; m], vec![1i64; n], 1.0 / m as f64, 0)
    } else {
        let w = (grid_weights(&mu.weights()), grid_weights(&nu.weights()));
        (w.0, w.1, GRID, (m + n) as i64)
    };
    let (source, sink) = (0, m + n + 1);
    let mut graph = FlowGraph::new(m + n + 2);
    for (i, &cap) in a.iter().enumerate() {
        graph.add_edge(source, 1 + i, cap, 0.0);
    }
    for (j, &cap) in b.iter().enumerate() {
        graph.add_edge(1 + m + j, sink, cap, 0.0);
    }
    let demand = a.iter().sum();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let c = dist[i * n + j];
            if keep(c) {
                let id = graph.add_edge(1 + i, 1 + m + j, demand, p.pow(c));
                edges.push((i, j, id));
            }
        }
    }
    Bipartite {
        graph,
        edges,
        source,
        sink,
        demand,
        slack,
        unit,
    }
}

impl Bipartite {
    fn plan(&self, rows: usize, cols: usize, p: CostExponent, metric: Metric) -> TransportPlan {
        let mut mass = DMatrix::zeros(rows, cols);
        for &(i, j, id) in &self.edges {
            mass[(i, j)] = self.graph.flow(id) as f64 * self.unit;
        }
        TransportPlan {
            rows,
            cols,
            mass,
            cost_exponent: p,
            metric,
        }
    }
}

/// L^p transport distance (p = 1 or 2) with an optimal plan.
pub fn dp_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: CostExponent,
    metric: Metric,
) -> Result<(f64, TransportPlan)> {
    if p == CostExponent::Infinity {
        return Err(Error::InvalidArgument(
            "dp_distance takes p = 1 or 2; use dinf_distance".into(),
        ));
    }
    let dist = cost_matrix(mu, nu, metric)?;
    if is_uniform_pair(mu, nu) {
        let n = mu.len();
        let powered: Vec<i128> = dist.iter().map(|&c| quantized(c, p)).collect();
        let perm = hungarian(&powered, n);
        let value = permutation_value(&dist, n, &perm, p);
        return Ok((value, permutation_plan(n, &perm, p, metric)));
    }
    let mut net = bipartite(mu, nu, &dist, p, |_| true);
    let sent = net.graph.min_cost_flow(net.source, net.sink, net.demand);
    if sent != net.demand {
        return Err(Error::Internal(format!(
            "transport flow infeasible: sent {sent} of {}",
            net.demand
        )));
    }
    let plan = net.plan(mu.len(), nu.len(), p, metric);
    let total: f64 = plan
        .entries()
        .iter()
        .map(|&(i, j, m)| m * p.pow(dist[i * nu.len() + j]))
        .sum();
    Ok((p.root(total), plan))
}

/// Bottleneck distance: the least t such that some coupling is supported on
/// pairs at distance ≤ t. The value is always one of the pairwise distances.
/// For weighted input the test ignores up to one grid unit of mass per atom.
pub fn dinf_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    metric: Metric,
) -> Result<(f64, TransportPlan)> {
    let dist = cost_matrix(mu, nu, metric)?;
    let mut levels = dist.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let feasible = |t: f64| -> Option<Bipartite> {
        let mut net = bipartite(mu, nu, &dist, CostExponent::Infinity, |c| c <= t);
        (net.graph.max_flow(net.source, net.sink) >= net.demand - net.slack).then_some(net)
    };

    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let value = levels[lo];
    let net = feasible(value)
        .ok_or_else(|| Error::Internal("bottleneck search lost feasibility".into()))?;
    Ok((value, net.plan(mu.len(), nu.len(), CostExponent::Infinity, metric)))
}

/// Dispatches to [`dp_distance`] or [`dinf_distance`].
pub fn distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: CostExponent,
    metric: Metric,
) -> Result<(f64, TransportPlan)> {
    match p {
        CostExponent::Infinity => dinf_distance(mu, nu, metric),
        _ => dp_distance(mu, nu, p, metric),
    }
}

/// Exhaustive minimum over all N! permutations; test oracle for the
/// assignment reduction.
pub fn assignment_bruteforce(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: CostExponent,
    metric: Metric,
) -> Result<f64> {
    if !is_uniform_pair(mu, nu) {
        return Err(Error::InvalidArgument(
            "brute force needs two uniform measures of equal size".into(),
        ));
    }
    let n = mu.len();
    if n > BRUTEFORCE_MAX {
        return Err(Error::TooLarge(format!(
            "{n} atoms exceeds the brute-force limit {BRUTEFORCE_MAX}"
        )));
    }
    let dist = cost_matrix(mu, nu, metric)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = permutation_value(&dist, n, &perm, p);
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(permutation_value(&dist, n, &perm, p));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}
