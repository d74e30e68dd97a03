use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::simplex::{BasisSnapshot, LpStatus, Simplex, Tolerances};
use super::{MilpOptions, MilpProblem, MilpSolution, MilpStatus};

/// Bound change on one variable, chained back to the root.
struct BoundChange {
    parent: Option<Rc<BoundChange>>,
    var: usize,
    lower: f64,
    upper: f64,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    parent_seq: usize,
    changes: Option<Rc<BoundChange>>,
    basis: Rc<BasisSnapshot>,
}

impl Node {
    fn key_cmp(&self, other: &Self) -> Ordering {
        // smallest bound first, then deepest, then oldest
        self.bound
            .total_cmp(&other.bound)
            .then(other.depth.cmp(&self.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap
        other.key_cmp(self)
    }
}

fn tolerances(options: &MilpOptions) -> Tolerances {
    Tolerances {
        feas: options.feas_tol,
        opt: options.opt_tol,
    }
}

fn full_bounds(problem: &MilpProblem, lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    lo.extend_from_slice(&problem.row_lower);
    hi.extend_from_slice(&problem.row_upper);
    (lo, hi)
}

fn empty(status: MilpStatus, nodes: usize, iters: usize) -> MilpSolution {
    MilpSolution {
        status,
        x: Vec::new(),
        objective: f64::INFINITY,
        best_bound: if status == MilpStatus::Unbounded { f64::NEG_INFINITY } else { f64::INFINITY },
        nodes_explored: nodes,
        lp_iterations: iters,
    }
}

pub(super) fn solve_relaxation(problem: &MilpProblem, options: &MilpOptions) -> MilpSolution {
    let cols = problem.rows.transpose();
    let (lo, hi) = full_bounds(problem, &problem.lower, &problem.upper);
    let mut lp = Simplex::new(&cols, problem.num_rows(), &problem.cost, lo, hi, tolerances(options));
    let status = lp.solve(false);
    match status {
        LpStatus::Optimal => {
            let x = lp.values().to_vec();
            let obj = problem.objective_value(&x);
            MilpSolution {
                status: MilpStatus::Optimal,
                x,
                objective: obj,
                best_bound: obj,
                nodes_explored: 1,
                lp_iterations: lp.iterations,
            }
        }
        LpStatus::Infeasible => empty(MilpStatus::Infeasible, 1, lp.iterations),
        LpStatus::Unbounded => empty(MilpStatus::Unbounded, 1, lp.iterations),
        LpStatus::IterationLimit => empty(MilpStatus::IterationLimit, 1, lp.iterations),
    }
}

/// Activity-based bound tightening. Returns `false` if infeasibility is
/// detected.
fn propagate(problem: &MilpProblem, lower: &mut [f64], upper: &mut [f64], tol: f64) -> bool {
    let is_int: Vec<bool> = {
        let mut v = vec![false; lower.len()];
        for &j in &problem.integers {
            v[j] = true;
        }
        v
    };
    for _pass in 0..10 {
        let mut changed = false;
        for i in 0..problem.num_rows() {
            let (mut amin, mut amax) = (0.0, 0.0);
            let (mut ninf_min, mut ninf_max) = (0usize, 0usize);
            for (j, a) in problem.rows.row_iter(i) {
                let (lmin, lmax) = if a > 0.0 { (lower[j], upper[j]) } else { (upper[j], lower[j]) };
                if lmin.is_finite() {
                    amin += a * lmin;
                } else {
                    ninf_min += 1;
                }
                if lmax.is_finite() {
                    amax += a * lmax;
                } else {
                    ninf_max += 1;
                }
            }
            if ninf_min == 0 && amin > problem.row_upper[i] + tol {
                return false;
            }
            if ninf_max == 0 && amax < problem.row_lower[i] - tol {
                return false;
            }
            for (j, a) in problem.rows.row_iter(i) {
                // residual activity of the row without variable j
                let (lmin, lmax) = if a > 0.0 { (lower[j], upper[j]) } else { (upper[j], lower[j]) };
                let rest_min = if lmin.is_finite() {
                    (ninf_min == 0).then(|| amin - a * lmin)
                } else {
                    (ninf_min == 1).then_some(amin)
                };
                let rest_max = if lmax.is_finite() {
                    (ninf_max == 0).then(|| amax - a * lmax)
                } else {
                    (ninf_max == 1).then_some(amax)
                };
                let mut new_lo = lower[j];
                let mut new_hi = upper[j];
                if let Some(rmin) = rest_min {
                    if problem.row_upper[i].is_finite() {
                        let b = (problem.row_upper[i] - rmin) / a;
                        if a > 0.0 {
                            new_hi = new_hi.min(b);
                        } else {
                            new_lo = new_lo.max(b);
                        }
                    }
                }
                if let Some(rmax) = rest_max {
                    if problem.row_lower[i].is_finite() {
                        let b = (problem.row_lower[i] - rmax) / a;
                        if a > 0.0 {
                            new_lo = new_lo.max(b);
                        } else {
                            new_hi = new_hi.min(b);
                        }
                    }
                }
                if is_int[j] {
                    new_lo = (new_lo - 1e-6).ceil();
                    new_hi = (new_hi + 1e-6).floor();
                }
                if new_lo > new_hi + tol {
                    return false;
                }
                // only keep meaningful tightenings so the loop settles
                if new_lo > lower[j] + 1e-7 {
                    lower[j] = new_lo.min(upper[j]);
                    changed = true;
                }
                if new_hi < upper[j] - 1e-7 {
                    upper[j] = new_hi.max(lower[j]);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    true
}

fn most_fractional(x: &[f64], integers: &[usize], int_tol: f64) -> (Option<usize>, f64) {
    let mut pick = None;
    let mut best = 0.0;
    let mut max_frac = 0.0f64;
    for &j in integers {
        let f = (x[j] - x[j].round()).abs();
        max_frac = max_frac.max(f);
        if f > int_tol && f > best {
            best = f;
            pick = Some(j);
        }
    }
    (pick, max_frac)
}

pub(super) fn branch_and_bound(problem: &MilpProblem, options: &MilpOptions) -> MilpSolution {
    let n = problem.num_vars();
    let m = problem.num_rows();
    let mut root_lower = problem.lower.clone();
    let mut root_upper = problem.upper.clone();
    for &j in &problem.integers {
        root_lower[j] = root_lower[j].ceil();
        root_upper[j] = root_upper[j].floor();
        if root_lower[j] > root_upper[j] {
            return empty(MilpStatus::Infeasible, 0, 0);
        }
    }
    if options.presolve && !propagate(problem, &mut root_lower, &mut root_upper, options.feas_tol) {
        return empty(MilpStatus::Infeasible, 0, 0);
    }
    let cols = problem.rows.transpose();
    let (lo, hi) = full_bounds(problem, &root_lower, &root_upper);
    let mut lp = Simplex::new(&cols, m, &problem.cost, lo, hi, tolerances(options));

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq,
        parent_seq: usize::MAX,
        changes: None,
        basis: lp.snapshot(),
    });
    seq += 1;

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes = 0usize;
    let mut incomplete = false;
    let mut last_solved = usize::MAX;
    let mut node_lower = root_lower.clone();
    let mut node_upper = root_upper.clone();
    let mut stamp = vec![0usize; n];
    let mut stamp_gen = 0usize;

    let prune_level = |inc: &Option<(Vec<f64>, f64)>| inc.as_ref().map_or(f64::INFINITY, |(_, v)| v - options.gap_tol);

    while let Some(node) = heap.pop() {
        if node.bound >= prune_level(&incumbent) {
            continue;
        }
        if nodes >= options.node_limit {
            heap.push(node);
            break;
        }
        nodes += 1;

        // integer bounds of this node: root bounds overridden by the chain
        stamp_gen += 1;
        for &j in &problem.integers {
            node_lower[j] = root_lower[j];
            node_upper[j] = root_upper[j];
        }
        let mut link = node.changes.as_deref();
        while let Some(c) = link {
            if stamp[c.var] != stamp_gen {
                stamp[c.var] = stamp_gen;
                node_lower[c.var] = c.lower;
                node_upper[c.var] = c.upper;
            }
            link = c.parent.as_deref();
        }
        for &j in &problem.integers {
            lp.set_bounds(j, node_lower[j], node_upper[j]);
        }
        if node.parent_seq != last_solved || node.parent_seq == usize::MAX {
            lp.load(&node.basis);
        } else {
            lp.recompute_primal();
        }
        let status = lp.solve(node.depth > 0);
        last_solved = node.seq;

        let obj = match status {
            LpStatus::Optimal => lp.objective(),
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    return empty(MilpStatus::Unbounded, nodes, lp.iterations);
                }
                // a bounded root cannot have unbounded children; treat as numerical trouble
                incomplete = true;
                continue;
            }
            LpStatus::IterationLimit => {
                incomplete = true;
                continue;
            }
        };
        debug_assert!(
            node.bound == f64::NEG_INFINITY || obj >= node.bound - 1e-6 * (1.0 + node.bound.abs()),
            "node relaxation {obj} below inherited bound {}",
            node.bound
        );
        if obj >= prune_level(&incumbent) {
            continue;
        }
        let x = lp.values().to_vec();
        let (branch, max_frac) = most_fractional(&x, &problem.integers, options.int_tol);
        match branch {
            None => {
                let (mut x, mut val) = (x, obj);
                if max_frac > 1e-9 {
                    if let Some((px, pv)) = polish(problem, &mut lp, &x) {
                        x = px;
                        val = pv;
                    }
                    last_solved = usize::MAX;
                }
                for &j in &problem.integers {
                    x[j] = x[j].round();
                }
                debug_assert!(incumbent.as_ref().is_none_or(|(_, v)| val <= *v));
                if incumbent.as_ref().is_none_or(|(_, v)| val < *v) {
                    incumbent = Some((x, val));
                }
            }
            Some(j) => {
                let basis = lp.snapshot();
                let v = x[j];
                let down = Rc::new(BoundChange {
                    parent: node.changes.clone(),
                    var: j,
                    lower: node_lower[j],
                    upper: v.floor(),
                });
                let up = Rc::new(BoundChange {
                    parent: node.changes.clone(),
                    var: j,
                    lower: v.ceil(),
                    upper: node_upper[j],
                });
                for ch in [down, up] {
                    heap.push(Node {
                        bound: obj,
                        depth: node.depth + 1,
                        seq,
                        parent_seq: node.seq,
                        changes: Some(ch),
                        basis: basis.clone(),
                    });
                    seq += 1;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    let hit_limit = heap.iter().any(|nd| nd.bound < prune_level(&incumbent));
    let iters = lp.iterations;
    match incumbent {
        Some((x, val)) => {
            let status = if hit_limit {
                MilpStatus::NodeLimit
            } else if incomplete {
                MilpStatus::IterationLimit
            } else {
                MilpStatus::Optimal
            };
            let best_bound = if status == MilpStatus::Optimal { val.min(open_bound) } else { open_bound.min(val) };
            MilpSolution {
                status,
                x,
                objective: val,
                best_bound,
                nodes_explored: nodes,
                lp_iterations: iters,
            }
        }
        None => {
            let status = if hit_limit {
                MilpStatus::NodeLimit
            } else if incomplete {
                MilpStatus::IterationLimit
            } else {
                MilpStatus::Infeasible
            };
            let mut s = empty(status, nodes, iters);
            if hit_limit {
                s.best_bound = open_bound;
            }
            s
        }
    }
}

/// Fixes the integers of a nearly integral point to their rounded values and
/// re-solves for the continuous part.
fn polish(problem: &MilpProblem, lp: &mut Simplex, x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let saved: Vec<(f64, f64)> = problem.integers.iter().map(|&j| (lp.lower(j), lp.upper(j))).collect();
    for &j in &problem.integers {
        let r = x[j].round();
        lp.set_bounds(j, r, r);
    }
    lp.recompute_primal();
    let status = lp.solve(true);
    let out = (status == LpStatus::Optimal).then(|| (lp.values().to_vec(), lp.objective()));
    for (&j, &(l, u)) in problem.integers.iter().zip(&saved) {
        lp.set_bounds(j, l, u);
    }
    out
}

/// Walks the integer variables in index order, pushing each to its smallest
/// value among optimal solutions.
pub(super) fn lex_smallest(problem: &MilpProblem, options: &MilpOptions, sol: MilpSolution) -> MilpSolution {
    let z = sol.objective;
    let slack = 0.5 * options.gap_tol;
    let mut p = problem.clone();
    // objective cut as an extra row
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(problem.rows.nnz() + problem.num_vars());
    for i in 0..problem.num_rows() {
        for (j, v) in problem.rows.row_iter(i) {
            trip.push((i, j, v));
        }
    }
    let cut = problem.num_rows();
    for (j, &c) in problem.cost.iter().enumerate() {
        if c != 0.0 {
            trip.push((cut, j, c));
        }
    }
    p.rows = match crate::sparse::CsrMatrix::from_triplets(cut + 1, problem.num_vars(), &trip) {
        Ok(r) => r,
        Err(_) => return sol,
    };
    p.row_lower.push(f64::NEG_INFINITY);
    p.row_upper.push(z + slack);
    let inner = MilpOptions {
        lex_tiebreak: false,
        ..options.clone()
    };
    let mut current = sol.x.clone();
    let mut nodes = sol.nodes_explored;
    let mut iters = sol.lp_iterations;
    for &j in &problem.integers {
        // the current point already sits at the bound: nothing to improve
        if current[j] <= p.lower[j] {
            p.upper[j] = p.lower[j];
            continue;
        }
        let mut cost = vec![0.0; problem.num_vars()];
        cost[j] = 1.0;
        p.cost = cost;
        let r = branch_and_bound(&p, &inner);
        nodes += r.nodes_explored;
        iters += r.lp_iterations;
        if r.status != MilpStatus::Optimal {
            return sol;
        }
        let v = r.x[j].round();
        p.lower[j] = v;
        p.upper[j] = v;
        current = r.x;
    }
    // continuous part with the original objective
    p.cost = problem.cost.clone();
    let r = branch_and_bound(&p, &inner);
    nodes += r.nodes_explored;
    iters += r.lp_iterations;
    if r.status != MilpStatus::Optimal {
        return sol;
    }
    MilpSolution {
        status: MilpStatus::Optimal,
        objective: problem.objective_value(&r.x),
        x: r.x,
        best_bound: sol.best_bound,
        nodes_explored: nodes,
        lp_iterations: iters,
    }
}
