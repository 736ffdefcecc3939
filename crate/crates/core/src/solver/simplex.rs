//! Dense bounded-variable primal simplex.
//!
//! Every row gets a slack whose bounds encode the relation (`<=` gives
//! `s >= 0`, `>=` gives `s <= 0`, `==` fixes `s = 0`), so the working system
//! is `A x + s = b` with box bounds on all columns. Nonbasic columns rest at
//! a finite bound, or at zero when free. Phase 1 adds artificials only on
//! rows whose slack cannot absorb the initial residual.

use super::{Row, Status};

pub(crate) const OPT_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots before switching to Bland's rule.
pub(crate) const BLAND_AFTER: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Stopped(Status),
}

pub(crate) struct LpStats {
    pub iterations: usize,
    pub bland_switches: usize,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    x: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
}

enum Phase {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let old = self.basis[r];
        self.basic_row[old] = None;
        self.basic_row[j] = Some(r);
        self.basis[r] = j;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, tij) in d.iter_mut().zip(&self.t[i]) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    fn run(&mut self, cost: &[f64], budget: usize, stats: &mut LpStats) -> Phase {
        let n = cost.len();
        let mut stalled = 0usize;
        loop {
            if stats.iterations >= budget {
                return Phase::Limit;
            }
            let bland = stalled >= BLAND_AFTER;
            let d = self.reduced_costs(cost);

            // Pricing.
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.basic_row[j].is_some() || self.lo[j] == self.up[j] {
                    continue;
                }
                let dir = if d[j] < -OPT_TOL && self.x[j] < self.up[j] {
                    1.0
                } else if d[j] > OPT_TOL && self.x[j] > self.lo[j] {
                    -1.0
                } else {
                    continue;
                };
                match enter {
                    None => enter = Some((j, dir)),
                    Some((k, _)) if !bland && d[j].abs() > d[k].abs() => enter = Some((j, dir)),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((j, dir)) = enter else { return Phase::Optimal };

            // Ratio test; `None` means the entering column hits its own bound.
            let mut step = self.up[j] - self.lo[j];
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[j] * dir;
                let b = self.basis[i];
                let limit = if a > PIVOT_TOL && self.lo[b].is_finite() {
                    (self.x[b] - self.lo[b]) / a
                } else if a < -PIVOT_TOL && self.up[b].is_finite() {
                    (self.up[b] - self.x[b]) / -a
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    _ if limit < step - 1e-12 => true,
                    Some((r, ar)) if limit <= step + 1e-12 => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            a.abs() > ar.abs()
                        }
                    }
                    _ => false,
                };
                if better {
                    step = limit;
                    leave = Some((i, a));
                }
            }
            if step.is_infinite() {
                return Phase::Unbounded;
            }

            stats.iterations += 1;
            if step * d[j].abs() <= 1e-12 {
                stalled += 1;
                if stalled == BLAND_AFTER {
                    stats.bland_switches += 1;
                }
            } else {
                stalled = 0;
            }

            self.x[j] += dir * step;
            for (i, row) in self.t.iter().enumerate() {
                let b = self.basis[i];
                self.x[b] -= row[j] * dir * step;
            }
            match leave {
                None => self.x[j] = if dir > 0.0 { self.up[j] } else { self.lo[j] },
                Some((r, a)) => {
                    let b = self.basis[r];
                    self.x[b] = if a > 0.0 { self.lo[b] } else { self.up[b] };
                    self.pivot(r, j);
                }
            }
        }
    }
}

/// Minimizes `cost·x` over `rows` and the column box `[lower, upper]`.
pub(crate) fn solve_lp(cost: &[f64], rows: &[Row], lower: &[f64], upper: &[f64], budget: usize) -> (LpOutcome, LpStats) {
    let mut stats = LpStats { iterations: 0, bland_switches: 0 };
    let n0 = cost.len();
    let m = rows.len();
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return (LpOutcome::Stopped(Status::Infeasible), stats);
    }

    let rest = |l: f64, u: f64| {
        if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    };

    let mut lo: Vec<f64> = lower.to_vec();
    let mut up: Vec<f64> = upper.to_vec();
    for r in rows {
        let (l, u) = match r.op {
            crate::expr::RelOp::Le => (0.0, f64::INFINITY),
            crate::expr::RelOp::Ge => (f64::NEG_INFINITY, 0.0),
            crate::expr::RelOp::Eq => (0.0, 0.0),
        };
        lo.push(l);
        up.push(u);
    }
    let mut x: Vec<f64> = (0..n0).map(|j| rest(lo[j], up[j])).collect();
    x.extend(std::iter::repeat_n(0.0, m));

    // Residuals decide, row by row, whether the slack can start basic.
    let mut t = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut artificial_rows = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let activity: f64 = r.coefficients.iter().map(|&(j, c)| c * x[j]).sum();
        let residual = r.rhs - activity;
        let s = n0 + i;
        let mut row = vec![0.0; n0 + m];
        for &(j, c) in &r.coefficients {
            row[j] += c;
        }
        row[s] = 1.0;
        if residual >= lo[s] - FEAS_TOL && residual <= up[s] + FEAS_TOL {
            x[s] = residual.clamp(lo[s], up[s]);
            basis.push(s);
        } else {
            x[s] = rest(lo[s], up[s]);
            let sign = if residual - x[s] >= 0.0 { 1.0 } else { -1.0 };
            for v in row.iter_mut() {
                *v *= sign;
            }
            artificial_rows.push((i, (residual - x[s]).abs()));
            basis.push(usize::MAX);
        }
        t.push(row);
    }
    let n = n0 + m + artificial_rows.len();
    for row in t.iter_mut() {
        row.resize(n, 0.0);
    }
    for (k, &(i, value)) in artificial_rows.iter().enumerate() {
        let a = n0 + m + k;
        t[i][a] = 1.0;
        basis[i] = a;
        x.push(value);
        lo.push(0.0);
        up.push(f64::INFINITY);
    }
    let mut basic_row = vec![None; n];
    for (i, &b) in basis.iter().enumerate() {
        basic_row[b] = Some(i);
    }
    let mut tab = Tableau { t, basis, basic_row, x, lo, up };

    if !artificial_rows.is_empty() {
        let mut phase1 = vec![0.0; n];
        for c in phase1.iter_mut().skip(n0 + m) {
            *c = 1.0;
        }
        match tab.run(&phase1, budget, &mut stats) {
            Phase::Limit => return (LpOutcome::Stopped(Status::IterationLimit), stats),
            Phase::Unbounded => return (LpOutcome::Stopped(Status::Error("phase 1 unbounded".into())), stats),
            Phase::Optimal => {}
        }
        let scale = 1.0 + rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        let infeasibility: f64 = tab.x[n0 + m..].iter().sum();
        if infeasibility > FEAS_TOL * scale {
            return (LpOutcome::Stopped(Status::Infeasible), stats);
        }
        // Pivot zero-valued artificials out where possible; rows where that
        // fails are redundant and keep a pinned artificial.
        for i in 0..m {
            if tab.basis[i] < n0 + m {
                continue;
            }
            let pick = (0..n0 + m)
                .filter(|&j| tab.basic_row[j].is_none())
                .max_by(|&a, &b| tab.t[i][a].abs().total_cmp(&tab.t[i][b].abs()).then(b.cmp(&a)));
            if let Some(j) = pick.filter(|&j| tab.t[i][j].abs() > PIVOT_TOL) {
                tab.pivot(i, j);
            }
        }
        for a in n0 + m..n {
            tab.lo[a] = 0.0;
            tab.up[a] = 0.0;
            if tab.basic_row[a].is_none() {
                tab.x[a] = 0.0;
            }
        }
    }

    let mut phase2 = vec![0.0; n];
    phase2[..n0].copy_from_slice(cost);
    let outcome = match tab.run(&phase2, budget, &mut stats) {
        Phase::Limit => LpOutcome::Stopped(Status::IterationLimit),
        Phase::Unbounded => LpOutcome::Stopped(Status::Unbounded),
        Phase::Optimal => {
            let x: Vec<f64> = tab.x[..n0].to_vec();
            if x.iter().any(|v| !v.is_finite()) {
                LpOutcome::Stopped(Status::Error("non-finite primal value".into()))
            } else {
                let objective = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                LpOutcome::Optimal { x, objective }
            }
        }
    };
    (outcome, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::RelOp;

    fn row(coefficients: &[(usize, f64)], op: RelOp, rhs: f64) -> Row {
        Row { coefficients: coefficients.to_vec(), op, rhs, source: String::new() }
    }

    fn optimum(cost: &[f64], rows: &[Row], lower: &[f64], upper: &[f64]) -> LpOutcome {
        solve_lp(cost, rows, lower, upper, 10_000).0
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 2y as min -3x - 2y
        let rows = [row(&[(0, 1.0), (1, 1.0)], RelOp::Le, 4.0), row(&[(0, 1.0)], RelOp::Le, 2.0)];
        let LpOutcome::Optimal { x, objective } = optimum(&[-3.0, -2.0], &rows, &[0.0; 2], &[f64::INFINITY; 2]) else {
            panic!()
        };
        assert!((objective + 10.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn needs_phase_one() {
        // min x + y s.t. x + 2y >= 4, 3x + y >= 6, x - y == 0.5
        let rows = [
            row(&[(0, 1.0), (1, 2.0)], RelOp::Ge, 4.0),
            row(&[(0, 3.0), (1, 1.0)], RelOp::Ge, 6.0),
            row(&[(0, 1.0), (1, -1.0)], RelOp::Eq, 0.5),
        ];
        let LpOutcome::Optimal { x, .. } = optimum(&[1.0, 1.0], &rows, &[0.0; 2], &[f64::INFINITY; 2]) else { panic!() };
        for r in &rows {
            let act: f64 = r.coefficients.iter().map(|&(j, c)| c * x[j]).sum();
            assert!(r.op.holds(act, r.rhs, 1e-9), "{act} {:?} {}", r.op, r.rhs);
        }
        assert!((x[0] - x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let rows = [row(&[(0, 1.0)], RelOp::Le, 1.0), row(&[(0, 1.0)], RelOp::Ge, 2.0)];
        assert_eq!(optimum(&[1.0], &rows, &[0.0], &[f64::INFINITY]), LpOutcome::Stopped(Status::Infeasible));
        let rows = [row(&[(0, 1.0), (1, -1.0)], RelOp::Le, 1.0)];
        assert_eq!(optimum(&[-1.0, 0.0], &rows, &[0.0; 2], &[f64::INFINITY; 2]), LpOutcome::Stopped(Status::Unbounded));
    }

    #[test]
    fn free_and_upper_bounded_columns() {
        // min x - y with x free, y in [-1, 3], x >= -2 via a row.
        let rows = [row(&[(0, 1.0)], RelOp::Ge, -2.0)];
        let LpOutcome::Optimal { objective, x } =
            optimum(&[1.0, -1.0], &rows, &[f64::NEG_INFINITY, -1.0], &[f64::INFINITY, 3.0])
        else {
            panic!()
        };
        assert!((objective + 5.0).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn redundant_equalities() {
        let rows = [
            row(&[(0, 1.0), (1, 1.0)], RelOp::Eq, 2.0),
            row(&[(0, 2.0), (1, 2.0)], RelOp::Eq, 4.0),
        ];
        let LpOutcome::Optimal { objective, .. } = optimum(&[1.0, 2.0], &rows, &[0.0; 2], &[f64::INFINITY; 2]) else { panic!() };
        assert!((objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap() {
        let rows = [row(&[(0, 1.0), (1, 1.0)], RelOp::Le, 4.0)];
        let (out, _) = solve_lp(&[-1.0, -1.0], &rows, &[0.0; 2], &[f64::INFINITY; 2], 0);
        assert_eq!(out, LpOutcome::Stopped(Status::IterationLimit));
    }
}
