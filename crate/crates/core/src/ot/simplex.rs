//! Exact transport solver: network simplex on the bipartite transportation
//! graph.
//!
//! A basis is a spanning tree of `m + n - 1` arcs over the `m` source and `n`
//! sink nodes. Each pivot prices all non-basic arcs against the node
//! potentials of the current tree, brings in the most negative reduced cost,
//! and pushes flow around the unique cycle it closes. After too many
//! consecutive degenerate pivots the entering and leaving choices fall back to
//! Bland's smallest-index rule, which cannot cycle.

use super::{OtError, OtProblem, Result, TransportPlan};

/// Degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK_LIMIT: usize = 64;

/// Pushes smaller than this count as degenerate.
const DEGENERATE_STEP: f64 = 1e-14;

/// Returns an optimal plan for a balanced problem. Output is a deterministic
/// function of the input.
pub fn solve_exact(problem: &OtProblem) -> Result<TransportPlan> {
    let cost = problem.cost();
    let (m, n) = (cost.rows(), cost.cols());
    if m == 1 || n == 1 {
        // the only feasible plan
        let flows = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                if m == 1 {
                    problem.dest_weights()[j]
                } else {
                    problem.source_weights()[i]
                }
            })
            .collect();
        return Ok(TransportPlan::new(m, n, flows, cost));
    }

    let mut tree = SpanningTree::northwest_corner(problem);
    let scale = cost
        .as_slice()
        .iter()
        .fold(0.0f64, |acc, c| acc.max(c.abs()))
        .max(1e-300);
    let optimality_tol = 1e-12 * scale.max(1.0);
    let max_pivots = 50 * m * n + 1000;

    let mut degenerate_streak = 0usize;
    let mut pivots = 0usize;
    loop {
        tree.compute_potentials(problem);
        let bland = degenerate_streak >= DEGENERATE_STREAK_LIMIT;
        let Some((p, q)) = tree.entering_arc(problem, optimality_tol, bland) else {
            break;
        };
        let step = tree.pivot(p, q);
        degenerate_streak = if step <= DEGENERATE_STEP {
            degenerate_streak + 1
        } else {
            0
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(OtError::NumericalFailure(format!(
                "network simplex exceeded {max_pivots} pivots"
            )));
        }
    }

    let flows = tree.exact_flows(problem)?;
    Ok(TransportPlan::new(m, n, flows, cost))
}

struct SpanningTree {
    m: usize,
    n: usize,
    /// Basic arcs as (source, sink).
    arcs: Vec<(usize, usize)>,
    flow: Vec<f64>,
    is_basic: Vec<bool>,
    // Scratch state refreshed by `compute_potentials`. Nodes are sources
    // `0..m` followed by sinks `m..m+n`.
    potential: Vec<f64>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

const NONE: usize = usize::MAX;

impl SpanningTree {
    /// Staircase initial basis. Ties advance the row, leaving a zero-flow
    /// arc in the basis so it always has exactly `m + n - 1` arcs.
    fn northwest_corner(problem: &OtProblem) -> Self {
        let m = problem.cost().rows();
        let n = problem.cost().cols();
        let mut supply = problem.source_weights().to_vec();
        let mut demand = problem.dest_weights().to_vec();
        let mut arcs = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = supply[i].min(demand[j]);
            arcs.push((i, j));
            flow.push(x);
            supply[i] -= x;
            demand[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut is_basic = vec![false; m * n];
        for &(i, j) in &arcs {
            is_basic[i * n + j] = true;
        }
        SpanningTree {
            m,
            n,
            arcs,
            flow,
            is_basic,
            potential: vec![0.0; m + n],
            parent_arc: vec![NONE; m + n],
            depth: vec![0; m + n],
            adjacency: vec![Vec::new(); m + n],
        }
    }

    #[inline]
    fn other_end(&self, arc: usize, node: usize) -> usize {
        let (i, j) = self.arcs[arc];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    /// Solves `u_i + v_j = c_ij` over the basic arcs with `u_0 = 0`, and
    /// roots the tree at source 0.
    fn compute_potentials(&mut self, problem: &OtProblem) {
        let cost = problem.cost();
        for adj in &mut self.adjacency {
            adj.clear();
        }
        for (k, &(i, j)) in self.arcs.iter().enumerate() {
            self.adjacency[i].push(k);
            self.adjacency[self.m + j].push(k);
        }
        self.parent_arc.fill(NONE);
        self.potential[0] = 0.0;
        self.depth[0] = 0;
        let mut stack = vec![0usize];
        let mut visited = vec![false; self.m + self.n];
        visited[0] = true;
        while let Some(node) = stack.pop() {
            for idx in 0..self.adjacency[node].len() {
                let arc = self.adjacency[node][idx];
                let next = self.other_end(arc, node);
                if visited[next] {
                    continue;
                }
                visited[next] = true;
                let (i, j) = self.arcs[arc];
                let c = cost.get(i, j);
                // v_j = c - u_i when stepping source -> sink, and vice versa
                self.potential[next] = c - self.potential[node];
                self.parent_arc[next] = arc;
                self.depth[next] = self.depth[node] + 1;
                stack.push(next);
            }
        }
        debug_assert!(visited.iter().all(|&v| v), "basis is not a spanning tree");
    }

    fn entering_arc(&self, problem: &OtProblem, tol: f64, bland: bool) -> Option<(usize, usize)> {
        let cost = problem.cost();
        let mut best: Option<(usize, usize)> = None;
        let mut best_reduced = -tol;
        for i in 0..self.m {
            let u = self.potential[i];
            for j in 0..self.n {
                if self.is_basic[i * self.n + j] {
                    continue;
                }
                let reduced = cost.get(i, j) - u - self.potential[self.m + j];
                if reduced < best_reduced {
                    if bland {
                        return Some((i, j));
                    }
                    best_reduced = reduced;
                    best = Some((i, j));
                }
            }
        }
        best
    }

    /// Brings arc `(p, q)` into the basis; returns the amount of flow pushed.
    fn pivot(&mut self, p: usize, q: usize) -> f64 {
        // Tree path from sink q up to the common ancestor, then down to
        // source p. Arcs alternate -, +, -, ... starting at q.
        let mut from_q = Vec::new();
        let mut from_p = Vec::new();
        let (mut a, mut b) = (self.m + q, p);
        while self.depth[a] > self.depth[b] {
            from_q.push(self.parent_arc[a]);
            a = self.other_end(self.parent_arc[a], a);
        }
        while self.depth[b] > self.depth[a] {
            from_p.push(self.parent_arc[b]);
            b = self.other_end(self.parent_arc[b], b);
        }
        while a != b {
            from_q.push(self.parent_arc[a]);
            a = self.other_end(self.parent_arc[a], a);
            from_p.push(self.parent_arc[b]);
            b = self.other_end(self.parent_arc[b], b);
        }
        let cycle: Vec<usize> = from_q.into_iter().chain(from_p.into_iter().rev()).collect();

        // Leaving arc: smallest flow among the decreasing arcs, ties broken
        // by smallest cell index.
        let mut leaving = NONE;
        for &arc in cycle.iter().step_by(2) {
            if leaving == NONE {
                leaving = arc;
                continue;
            }
            let (fa, fl) = (self.flow[arc], self.flow[leaving]);
            if fa < fl || (fa == fl && self.cell(arc) < self.cell(leaving)) {
                leaving = arc;
            }
        }
        let step = self.flow[leaving].max(0.0);
        for (k, &arc) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[arc] -= step;
            } else {
                self.flow[arc] += step;
            }
        }

        let (li, lj) = self.arcs[leaving];
        self.is_basic[li * self.n + lj] = false;
        self.is_basic[p * self.n + q] = true;
        self.arcs[leaving] = (p, q);
        self.flow[leaving] = step;
        step
    }

    #[inline]
    fn cell(&self, arc: usize) -> usize {
        let (i, j) = self.arcs[arc];
        i * self.n + j
    }

    /// Recomputes basic flows from the original marginals by peeling leaves
    /// off the tree, so rounding from the pivots does not accumulate.
    fn exact_flows(&self, problem: &OtProblem) -> Result<Vec<f64>> {
        let (m, n) = (self.m, self.n);
        let mut remaining: Vec<f64> = problem
            .source_weights()
            .iter()
            .chain(problem.dest_weights())
            .copied()
            .collect();
        let mut degree = vec![0usize; m + n];
        let mut incident = vec![Vec::new(); m + n];
        for (k, &(i, j)) in self.arcs.iter().enumerate() {
            degree[i] += 1;
            degree[m + j] += 1;
            incident[i].push(k);
            incident[m + j].push(k);
        }
        let mut done = vec![false; self.arcs.len()];
        let mut arc_flow = vec![0.0; self.arcs.len()];
        let mut leaves: Vec<usize> = (0..m + n).filter(|&v| degree[v] == 1).collect();
        let mut assigned = 0;
        while let Some(node) = leaves.pop() {
            if degree[node] != 1 {
                continue;
            }
            let Some(&arc) = incident[node].iter().find(|&&k| !done[k]) else {
                continue;
            };
            let x = remaining[node];
            arc_flow[arc] = x;
            done[arc] = true;
            assigned += 1;
            degree[node] = 0;
            remaining[node] = 0.0;
            let other = self.other_end(arc, node);
            remaining[other] -= x;
            degree[other] -= 1;
            if degree[other] == 1 {
                leaves.push(other);
            }
        }
        if assigned != self.arcs.len() {
            return Err(OtError::NumericalFailure(
                "basis is not a spanning tree".into(),
            ));
        }

        let mut flows = vec![0.0; m * n];
        for (k, &(i, j)) in self.arcs.iter().enumerate() {
            let x = arc_flow[k];
            if x < -1e-10 {
                return Err(OtError::NumericalFailure(format!(
                    "negative basic flow {x:e} at ({i}, {j})"
                )));
            }
            flows[i * n + j] = x.max(0.0);
        }
        Ok(flows)
    }
}
