#![allow(dead_code)]

use hocp::milp::{solve_lp, MilpOptions, MilpProblem};
use hocp::CsrMatrix;
use rand::Rng;

/// Solves a dense square system by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(h: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, h: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..h {
            if h - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, h, k, cur, f);
            cur.pop();
        }
    }
    rec(0, h, k, &mut Vec::new(), f);
}

/// Minimum of a bounded LP (integrality ignored) over all basic feasible
/// solutions, found by enumerating every choice of `n` active hyperplanes.
pub fn vertex_enumeration(p: &MilpProblem) -> Option<f64> {
    let n = p.num_vars();
    let dense = p.rows.to_dense();
    // hyperplanes a·x = rhs
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, row) in dense.iter().enumerate() {
        if p.row_lower[i].is_finite() {
            planes.push((row.clone(), p.row_lower[i]));
        }
        if p.row_upper[i].is_finite() && p.row_upper[i] != p.row_lower[i] {
            planes.push((row.clone(), p.row_upper[i]));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lower[j]));
        if p.upper[j] != p.lower[j] {
            planes.push((e, p.upper[j]));
        }
    }
    let mut best: Option<f64> = None;
    combinations(planes.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = dense_solve(a, b) {
            if p.max_violation(&x) <= 1e-8 {
                let v = p.objective_value(&x);
                if best.is_none_or(|bv| v < bv) {
                    best = Some(v);
                }
            }
        }
    });
    best
}

/// Minimum over all integer fixings, each fixing solved as an LP.
pub fn integer_enumeration(p: &MilpProblem) -> Option<f64> {
    let ints = &p.integers;
    let ranges: Vec<(i64, i64)> = ints.iter().map(|&j| (p.lower[j].ceil() as i64, p.upper[j].floor() as i64)).collect();
    let mut values: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut best: Option<f64> = None;
    loop {
        let mut q = p.clone();
        q.integers.clear();
        for (k, &j) in ints.iter().enumerate() {
            q.lower[j] = values[k] as f64;
            q.upper[j] = values[k] as f64;
        }
        let s = solve_lp(&q, &MilpOptions::engine()).unwrap();
        if s.status == hocp::milp::MilpStatus::Optimal && best.is_none_or(|b| s.objective < b) {
            best = Some(s.objective);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == values.len() {
                return best;
            }
            if values[k] < ranges[k].1 {
                values[k] += 1;
                break;
            }
            values[k] = ranges[k].0;
            k += 1;
        }
    }
}

fn coefficient(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => 0.0,
        1 => rng.gen_range(-3i32..=3) as f64,
        _ => rng.gen_range(-3.0..3.0),
    }
}

/// Random feasible bounded instance: `n_real` continuous variables, `n_bin`
/// binaries and `m` rows, built around a random feasible point.
pub fn random_instance(rng: &mut impl Rng, n_real: usize, n_bin: usize, m: usize) -> MilpProblem {
    let n = n_real + n_bin;
    let mut p = MilpProblem::new(n);
    let mut x0 = vec![0.0; n];
    for j in 0..n {
        if j < n_real {
            let l: f64 = rng.gen_range(-5.0..0.0);
            let u = l + rng.gen_range(0.5..5.0);
            p.lower[j] = l;
            p.upper[j] = u;
            x0[j] = rng.gen_range(l..=u);
        } else {
            p.lower[j] = 0.0;
            p.upper[j] = 1.0;
            x0[j] = rng.gen_range(0..=1) as f64;
            p.integers.push(j);
        }
        p.cost[j] = coefficient(rng) + rng.gen_range(-2.0..2.0);
    }
    let mut trip = Vec::new();
    for i in 0..m {
        let mut act = 0.0;
        for j in 0..n {
            let a = coefficient(rng);
            if a != 0.0 {
                trip.push((i, j, a));
                act += a * x0[j];
            }
        }
        let slack = rng.gen_range(0.0..2.0);
        match rng.gen_range(0..7) {
            0 => {
                p.row_lower.push(act);
                p.row_upper.push(act);
            }
            1 | 2 => {
                p.row_lower.push(act - slack);
                p.row_upper.push(f64::INFINITY);
            }
            3 => {
                p.row_lower.push(act - slack);
                p.row_upper.push(act + rng.gen_range(0.0..2.0));
            }
            _ => {
                p.row_lower.push(f64::NEG_INFINITY);
                p.row_upper.push(act + slack);
            }
        }
    }
    p.rows = CsrMatrix::from_triplets(m, n, &trip).unwrap();
    p
}
