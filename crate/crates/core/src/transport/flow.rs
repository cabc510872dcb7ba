//! Network-flow solvers for bipartite transport: successive shortest paths
//! for min-cost flow and Dinic for max-flow.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    adj: Vec<Vec<Edge>>,
}

/// Handle to an edge as returned by [`FlowGraph::add_edge`].
#[derive(Debug, Clone, Copy)]
pub struct EdgeId {
    from: usize,
    index: usize,
}

#[derive(PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> EdgeId {
        let index = self.adj[from].len();
        let rev = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Edge { to, rev, cap, cost });
        self.adj[to].push(Edge {
            to: from,
            rev: index,
            cap: 0,
            cost: -cost,
        });
        EdgeId { from, index }
    }

    /// Flow currently pushed through an edge.
    pub fn flow(&self, id: EdgeId) -> i64 {
        let e = &self.adj[id.from][id.index];
        self.adj[e.to][e.rev].cap
    }

    /// Sends up to `limit` units from `s` to `t` at minimum cost. All
    /// forward costs must be nonnegative. Returns the amount sent.
    pub fn min_cost_flow(&mut self, s: usize, t: usize, limit: i64) -> i64 {
        let n = self.adj.len();
        let mut potential = vec![0.0f64; n];
        let mut sent = 0i64;
        while sent < limit {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut heap = BinaryHeap::new();
            dist[s] = 0.0;
            heap.push(State { dist: 0.0, node: s });
            while let Some(State { dist: d, node: u }) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for (k, e) in self.adj[u].iter().enumerate() {
                    if e.cap <= 0 {
                        continue;
                    }
                    // reduced costs are nonnegative up to rounding
                    let rc = (e.cost + potential[u] - potential[e.to]).max(0.0);
                    let nd = d + rc;
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        prev[e.to] = Some((u, k));
                        heap.push(State { dist: nd, node: e.to });
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            for (p, d) in potential.iter_mut().zip(&dist) {
                if d.is_finite() {
                    *p += d;
                }
            }
            let mut push = limit - sent;
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                push = push.min(self.adj[u][k].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                let rev = self.adj[u][k].rev;
                self.adj[u][k].cap -= push;
                self.adj[v][rev].cap += push;
                v = u;
            }
            sent += push;
        }
        sent
    }

    /// Dinic's maximum flow from `s` to `t`.
    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let n = self.adj.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for e in &self.adj[u] {
                    if e.cap > 0 && level[e.to] == usize::MAX {
                        level[e.to] = level[u] + 1;
                        queue.push_back(e.to);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut iter = vec![0usize; n];
            loop {
                let f = self.augment(s, t, i64::MAX, &level, &mut iter);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }

    fn augment(&mut self, u: usize, t: usize, limit: i64, level: &[usize], iter: &mut [usize]) -> i64 {
        if u == t {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let k = iter[u];
            let (to, cap) = (self.adj[u][k].to, self.adj[u][k].cap);
            if cap > 0 && level[to] == level[u] + 1 {
                let f = self.augment(to, t, limit.min(cap), level, iter);
                if f > 0 {
                    let rev = self.adj[u][k].rev;
                    self.adj[u][k].cap -= f;
                    self.adj[to][rev].cap += f;
                    return f;
                }
            }
            iter[u] += 1;
        }
        0
    }
}
