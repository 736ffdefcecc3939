use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{solve_lp, LpOutcome};
use super::{Row, SolveLimits, Status};

pub(crate) const INTEGRALITY_TOL: f64 = 1e-6;

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
}

// Min-heap on (bound, creation order).
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

/// Most fractional integral column; ties go to the lowest index.
pub(crate) fn branching_column(x: &[f64], integral: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &int)) in x.iter().zip(integral).enumerate() {
        if !int {
            continue;
        }
        let frac = v - v.floor();
        let dist = frac.min(1.0 - frac);
        if dist > INTEGRALITY_TOL && best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Best-first branch and bound. Because children are solved when created and
/// the queue pops the smallest relaxation bound first, the first integral
/// node popped is optimal.
pub(crate) fn branch_and_bound(cost: &[f64], rows: &[Row], lower: &[f64], upper: &[f64], integral: &[bool], limits: &SolveLimits) -> LpOutcome {
    let mut lower = lower.to_vec();
    let mut upper = upper.to_vec();
    for j in 0..cost.len() {
        if integral[j] {
            lower[j] = (lower[j] - INTEGRALITY_TOL).ceil();
            upper[j] = (upper[j] + INTEGRALITY_TOL).floor();
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut relax = |lower: Vec<f64>, upper: Vec<f64>, heap: &mut BinaryHeap<Node>| -> Option<Status> {
        match solve_lp(cost, rows, &lower, &upper, limits.max_lp_iterations).0 {
            LpOutcome::Optimal { x, objective } => {
                heap.push(Node { bound: objective, seq, lower, upper, x });
                seq += 1;
                None
            }
            LpOutcome::Stopped(Status::Infeasible) => None,
            LpOutcome::Stopped(other) => Some(other),
        }
    };

    if let Some(stop) = relax(lower, upper, &mut heap) {
        return LpOutcome::Stopped(stop);
    }
    if heap.is_empty() {
        return LpOutcome::Stopped(Status::Infeasible);
    }

    let mut explored = 0usize;
    while let Some(node) = heap.pop() {
        explored += 1;
        if explored > limits.max_nodes {
            return LpOutcome::Stopped(Status::IterationLimit);
        }
        let Some(j) = branching_column(&node.x, integral) else {
            return LpOutcome::Optimal { x: node.x, objective: node.bound };
        };
        let v = node.x[j];
        let mut down_upper = node.upper.clone();
        down_upper[j] = v.floor();
        if let Some(stop) = relax(node.lower.clone(), down_upper, &mut heap) {
            return LpOutcome::Stopped(stop);
        }
        let mut up_lower = node.lower;
        up_lower[j] = v.ceil();
        if let Some(stop) = relax(up_lower, node.upper, &mut heap) {
            return LpOutcome::Stopped(stop);
        }
    }
    LpOutcome::Stopped(Status::Infeasible)
}
