//! Benchmark metrics: execution accuracy, Pass@N, Best-of-N and tree
//! entropy.

use crate::search::{SearchTree, TerminalRecord};

/// Absolute tolerance used when the ground truth is zero.
pub const ZERO_TOL: f64 = 1e-6;
/// Allowed relative error.
pub const MARGIN: f64 = 0.05;

/// Within 5% of the ground truth (absolute 1e-6 when it is zero). The margin
/// is widened by one part in 10^12 so an exact 5% error is not lost to
/// rounding.
pub fn execution_accuracy(predicted: f64, ground_truth: f64) -> bool {
    if !predicted.is_finite() || !ground_truth.is_finite() {
        return false;
    }
    if ground_truth == 0.0 {
        return predicted.abs() <= ZERO_TOL;
    }
    (predicted - ground_truth).abs() <= MARGIN * ground_truth.abs() * (1.0 + 1e-12)
}

/// Per-record correctness: solved optimally and accurate.
pub fn correctness(records: &[TerminalRecord], ground_truth: f64) -> Vec<bool> {
    records.iter().map(|r| r.objective_value().is_some_and(|v| execution_accuracy(v, ground_truth))).collect()
}

/// Any of the first `n` records correct.
pub fn pass_at_n(correct: &[bool], n: usize) -> bool {
    assert!(n >= 1, "N must be at least 1");
    correct.iter().take(n).any(|&c| c)
}

/// Mean of `V = λ·V_prior + (1−λ)·V_bp` over a node's path, root excluded.
pub fn path_mean(tree: &SearchTree, node: usize, lambda: f64) -> f64 {
    let path = tree.path(node);
    let vals: Vec<f64> = path[1..].iter().map(|&n| tree.node(n).value(lambda)).collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Among the first `n` records, the one whose path mean is highest; ties go
/// to the earlier discovery. `None` without records.
pub fn best_of_n(records: &[TerminalRecord], tree: &SearchTree, n: usize, lambda: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in records.iter().take(n).enumerate() {
        let m = path_mean(tree, r.node, lambda);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((k, m));
        }
    }
    best.map(|(k, _)| k)
}

/// Shannon entropy (nats) of the visit shares of visited children.
pub fn visit_entropy(visits: &[u64]) -> f64 {
    let seen: Vec<f64> = visits.iter().filter(|&&v| v > 0).map(|&v| v as f64).collect();
    if seen.len() <= 1 {
        return 0.0;
    }
    let total: f64 = seen.iter().sum();
    -seen.iter().map(|v| v / total).map(|p| p * p.ln()).sum::<f64>()
}

/// Mean visit entropy over expanded nodes that have children.
pub fn tree_entropy(tree: &SearchTree) -> f64 {
    let per_node: Vec<f64> = tree
        .nodes
        .iter()
        .filter(|n| n.expanded && !n.children.is_empty())
        .map(|n| visit_entropy(&n.children.iter().map(|&c| tree.node(c).visits).collect::<Vec<_>>()))
        .collect();
    if per_node.is_empty() {
        return 0.0;
    }
    per_node.iter().sum::<f64>() / per_node.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_rule() {
        assert!(execution_accuracy(10.4, 10.0));
        assert!(!execution_accuracy(10.6, 10.0));
        assert!(execution_accuracy(10.5, 10.0));
        assert!(execution_accuracy(-9.5, -10.0));
        assert!(execution_accuracy(0.0, 0.0));
        assert!(!execution_accuracy(1e-3, 0.0));
        assert!(!execution_accuracy(f64::NAN, 1.0));
    }

    #[test]
    fn pass_at_n_examples() {
        let flags = [false, true, false];
        assert!(!pass_at_n(&flags, 1));
        assert!(pass_at_n(&flags, 2));
        assert!(pass_at_n(&flags, 10));
        assert!(!pass_at_n(&[], 3));
    }

    #[test]
    fn entropy_examples() {
        assert!((visit_entropy(&[2, 2]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(visit_entropy(&[5, 0, 0]), 0.0);
        assert_eq!(visit_entropy(&[]), 0.0);
    }
}
