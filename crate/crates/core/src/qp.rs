//! Convex quadratic programs
//! `min ½ xᵀB x + gᵀx  s.t.  row_lower <= A x <= row_upper, lower <= x <= upper`
//! by a primal-dual interior-point method (Mehrotra predictor-corrector).
//!
//! Fixed variables are eliminated and single-variable rows turned into bounds
//! before the iterations. The KKT system is kept quasi-definite by small
//! regularization and factored with an envelope `LDLᵀ` in an ordering that
//! places each row multiplier right after its last variable, so banded
//! problems (transcriptions) factor in linear time.

use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct QpProblem {
    /// Symmetric, both triangles stored.
    pub hessian: CsrMatrix,
    pub cost: Vec<f64>,
    pub rows: CsrMatrix,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// Iteration cap; `x` is the last (interior) iterate.
    IterationLimit,
    /// Bounds or rows are inconsistent.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const FIX_TOL: f64 = 1e-12;
const REG_PRIMAL: f64 = 1e-9;
const REG_DUAL: f64 = 1e-9;
const MAX_ITERS: usize = 100;

impl QpProblem {
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut bx = vec![0.0; x.len()];
        self.hessian.mul_vec(x, &mut bx);
        x.iter().zip(&bx).zip(&self.cost).map(|((xi, bi), gi)| 0.5 * xi * bi + gi * xi).sum()
    }
}

struct Reduced {
    /// Original index of each free variable.
    free: Vec<usize>,
    /// Value of every original variable that is fixed.
    fixed: Vec<Option<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// General rows: (entries over free positions, lower, upper).
    rows: Vec<(Vec<(usize, f64)>, f64, f64)>,
}

fn reduce(p: &QpProblem) -> Option<Reduced> {
    let n = p.cost.len();
    let mut lower = p.lower.clone();
    let mut upper = p.upper.clone();
    let mut fixed: Vec<Option<f64>> = (0..n)
        .map(|j| (upper[j] - lower[j] <= FIX_TOL).then(|| 0.5 * (lower[j] + upper[j])))
        .collect();
    let m = p.rows.nrows();
    let mut alive = vec![true; m];
    loop {
        let mut changed = false;
        for i in 0..m {
            if !alive[i] {
                continue;
            }
            let mut shift = 0.0;
            let mut single = None;
            let mut count = 0;
            for (j, a) in p.rows.row_iter(i) {
                if a == 0.0 {
                    continue;
                }
                match fixed[j] {
                    Some(v) => shift += a * v,
                    None => {
                        count += 1;
                        single = Some((j, a));
                    }
                }
            }
            let (rl, ru) = (p.row_lower[i] - shift, p.row_upper[i] - shift);
            if count == 0 {
                if rl > 1e-7 * (1.0 + rl.abs()) || ru < -1e-7 * (1.0 + ru.abs()) {
                    return None;
                }
                alive[i] = false;
                changed = true;
            } else if count == 1 {
                let (j, a) = single.unwrap();
                let (mut lo, mut hi) = (rl / a, ru / a);
                if a < 0.0 {
                    std::mem::swap(&mut lo, &mut hi);
                }
                lower[j] = lower[j].max(lo);
                upper[j] = upper[j].min(hi);
                if lower[j] > upper[j] + 1e-9 * (1.0 + lower[j].abs()) {
                    return None;
                }
                if upper[j] - lower[j] <= FIX_TOL.max(1e-12 * lower[j].abs()) {
                    let v = 0.5 * (lower[j] + upper[j]);
                    fixed[j] = Some(v);
                }
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut pos = vec![usize::MAX; n];
    let mut free = Vec::new();
    for j in 0..n {
        if fixed[j].is_none() {
            pos[j] = free.len();
            free.push(j);
        }
    }
    let mut rows = Vec::new();
    for i in 0..m {
        if !alive[i] {
            continue;
        }
        let mut shift = 0.0;
        let mut entries = Vec::new();
        for (j, a) in p.rows.row_iter(i) {
            if a == 0.0 {
                continue;
            }
            match fixed[j] {
                Some(v) => shift += a * v,
                None => entries.push((pos[j], a)),
            }
        }
        let (rl, ru) = (p.row_lower[i] - shift, p.row_upper[i] - shift);
        if rl.is_finite() || ru.is_finite() {
            rows.push((entries, rl, ru));
        }
    }
    Some(Reduced {
        lower: free.iter().map(|&j| lower[j]).collect(),
        upper: free.iter().map(|&j| upper[j]).collect(),
        free,
        fixed,
        rows,
    })
}

/// Symmetric matrix in envelope (skyline) storage of its lower triangle.
struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl Envelope {
    fn new(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            start.push(total);
            total += i - f;
        }
        start.push(total);
        Self {
            diag: vec![0.0; first.len()],
            vals: vec![0.0; total],
            first,
            start,
        }
    }

    fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
        self.diag.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` at `(i, j)` of the symmetric matrix (either triangle).
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i == j {
            self.diag[i] += v;
        } else {
            let k = self.start[i] + (j - self.first[i]);
            self.vals[k] += v;
        }
    }

    /// In-place `LDLᵀ`; returns false on a zero pivot.
    fn factor(&mut self) -> bool {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let lo = fi.max(fj);
                let mut s = self.vals[si + (j - fi)];
                for k in lo..j {
                    s -= self.vals[si + (k - fi)] * self.diag[k] * self.vals[sj + (k - fj)];
                }
                self.vals[si + (j - fi)] = s / self.diag[j];
            }
            let mut d = self.diag[i];
            for k in fi..i {
                let l = self.vals[si + (k - fi)];
                d -= l * l * self.diag[k];
            }
            if d == 0.0 || !d.is_finite() {
                return false;
            }
            self.diag[i] = d;
        }
        true
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let mut s = b[i];
            for k in fi..i {
                s -= self.vals[si + (k - fi)] * b[k];
            }
            b[i] = s;
        }
        for i in 0..n {
            b[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let bi = b[i];
            for k in fi..i {
                b[k] -= self.vals[si + (k - fi)] * bi;
            }
        }
    }
}

pub fn solve_qp(p: &QpProblem) -> QpSolution {
    let n_orig = p.cost.len();
    let Some(red) = reduce(p) else {
        return QpSolution {
            status: QpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
            iterations: 0,
        };
    };
    let n = red.free.len();
    let mut full = vec![0.0; n_orig];
    for j in 0..n_orig {
        if let Some(v) = red.fixed[j] {
            full[j] = v;
        }
    }
    // reduced Hessian and linear term g + B_free,fixed x_fixed
    let mut pos = vec![usize::MAX; n_orig];
    for (k, &j) in red.free.iter().enumerate() {
        pos[j] = k;
    }
    let mut hb: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut g = vec![0.0; n];
    for (k, &j) in red.free.iter().enumerate() {
        g[k] = p.cost[j];
        for (c, v) in p.hessian.row_iter(j) {
            if pos[c] != usize::MAX {
                hb[k].push((pos[c], v));
            } else {
                g[k] += v * full[c];
            }
        }
    }
    if n > 0 {
        let Some((x, iters, ok)) = interior_point(&hb, &g, &red) else {
            return QpSolution {
                status: QpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::INFINITY,
                iterations: 0,
            };
        };
        for (k, &j) in red.free.iter().enumerate() {
            full[j] = x[k];
        }
        let status = if ok { QpStatus::Optimal } else { QpStatus::IterationLimit };
        return QpSolution {
            status,
            objective: p.objective_value(&full),
            x: full,
            iterations: iters,
        };
    }
    QpSolution {
        status: QpStatus::Optimal,
        objective: p.objective_value(&full),
        x: full,
        iterations: 0,
    }
}

/// Bound bookkeeping for one boxed quantity.
#[derive(Clone, Copy)]
struct Bounds {
    l: f64,
    u: f64,
}

impl Bounds {
    fn has_l(&self) -> bool {
        self.l.is_finite()
    }
    fn has_u(&self) -> bool {
        self.u.is_finite()
    }
    fn start(&self) -> f64 {
        match (self.has_l(), self.has_u()) {
            (true, true) => {
                let w = self.u - self.l;
                0.0f64.clamp(self.l + 0.1 * w, self.u - 0.1 * w)
            }
            (true, false) => 0.0f64.max(self.l + 1.0),
            (false, true) => 0.0f64.min(self.u - 1.0),
            (false, false) => 0.0,
        }
    }
}

struct State {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

fn interior_point(hb: &[Vec<(usize, f64)>], g: &[f64], red: &Reduced) -> Option<(Vec<f64>, usize, bool)> {
    let n = g.len();
    let rows = &red.rows;
    let m = rows.len();
    let eq: Vec<bool> = rows.iter().map(|r| r.1 == r.2).collect();
    // boxes for x then s (equality rows carry no slack bounds)
    let mut bx: Vec<Bounds> = (0..n).map(|j| Bounds { l: red.lower[j], u: red.upper[j] }).collect();
    for (i, r) in rows.iter().enumerate() {
        bx.push(if eq[i] {
            Bounds {
                l: f64::NEG_INFINITY,
                u: f64::INFINITY,
            }
        } else {
            Bounds { l: r.1, u: r.2 }
        });
    }
    let nv = n + m;

    // KKT ordering: variables in order, each row right after its last variable
    let mut last = vec![0usize; m];
    for (i, r) in rows.iter().enumerate() {
        last[i] = r.0.iter().map(|e| e.0).max().unwrap_or(0);
    }
    let mut order: Vec<(usize, usize, usize)> = Vec::with_capacity(n + m); // (key, tie, id)
    for j in 0..n {
        order.push((j, 0, j));
    }
    for i in 0..m {
        order.push((last[i], 1 + i, n + i));
    }
    order.sort_unstable();
    let mut kpos = vec![0usize; n + m];
    for (p, &(_, _, id)) in order.iter().enumerate() {
        kpos[id] = p;
    }
    let mut first: Vec<usize> = (0..n + m).collect();
    let touch = |a: usize, b: usize, first: &mut Vec<usize>| {
        let (pa, pb) = (kpos[a], kpos[b]);
        let (hi, lo) = if pa > pb { (pa, pb) } else { (pb, pa) };
        if lo < first[hi] {
            first[hi] = lo;
        }
    };
    for (j, row) in hb.iter().enumerate() {
        for &(c, _) in row {
            touch(j, c, &mut first);
        }
    }
    for (i, r) in rows.iter().enumerate() {
        for &(j, _) in &r.0 {
            touch(j, n + i, &mut first);
        }
    }
    let mut env = Envelope::new(first);

    let mut st = State {
        x: (0..n).map(|j| bx[j].start()).collect(),
        s: vec![0.0; m],
        y: vec![0.0; m],
        zl: vec![0.0; nv],
        zu: vec![0.0; nv],
    };
    for (i, r) in rows.iter().enumerate() {
        let a: f64 = r.0.iter().map(|&(j, v)| v * st.x[j]).sum();
        st.s[i] = if eq[i] { a } else { a.clamp(bx[n + i].start().min(a).max(r.1), r.2) };
        if !eq[i] {
            let b = bx[n + i];
            let w = if b.has_l() && b.has_u() { 0.1 * (b.u - b.l) } else { 1.0 };
            let lo = if b.has_l() { b.l + w.min(1.0) } else { f64::NEG_INFINITY };
            let hi = if b.has_u() { b.u - w.min(1.0) } else { f64::INFINITY };
            st.s[i] = if lo <= hi { a.clamp(lo, hi) } else { 0.5 * (b.l + b.u) };
        }
    }
    for k in 0..nv {
        if bx[k].has_l() {
            st.zl[k] = 1.0;
        }
        if bx[k].has_u() {
            st.zu[k] = 1.0;
        }
    }
    let nbounds = bx.iter().map(|b| b.has_l() as usize + b.has_u() as usize).sum::<usize>().max(1);

    let val = |st: &State, k: usize| if k < n { st.x[k] } else { st.s[k - n] };
    let scale = 1.0 + g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-10;

    let mut rd = vec![0.0; n];
    let mut rs = vec![0.0; m];
    let mut rp = vec![0.0; m];
    let mut sig = vec![0.0; nv];
    let mut rhs = vec![0.0; n + m];
    let mut dx = vec![0.0; nv];
    let mut dy = vec![0.0; m];
    let mut dzl = vec![0.0; nv];
    let mut dzu = vec![0.0; nv];
    let mut aff = (vec![0.0; nv], vec![0.0; nv], vec![0.0; nv]);

    for it in 0..MAX_ITERS {
        // residuals of L = ½xBx + gx − yᵀ(Ax − s) − zlᵀ(v − l) − zuᵀ(u − v)
        for j in 0..n {
            let mut r = g[j] - st.zl[j] + st.zu[j];
            for &(c, v) in &hb[j] {
                r += v * st.x[c];
            }
            rd[j] = r;
        }
        for (i, r) in rows.iter().enumerate() {
            let mut a = 0.0;
            for &(j, v) in &r.0 {
                a += v * st.x[j];
                rd[j] -= v * st.y[i];
            }
            if eq[i] {
                rp[i] = a - r.1;
                rs[i] = 0.0;
            } else {
                rp[i] = a - st.s[i];
                rs[i] = st.y[i] - st.zl[n + i] + st.zu[n + i];
            }
        }
        let mut gap = 0.0;
        for k in 0..nv {
            let v = val(&st, k);
            if bx[k].has_l() {
                gap += st.zl[k] * (v - bx[k].l);
            }
            if bx[k].has_u() {
                gap += st.zu[k] * (bx[k].u - v);
            }
        }
        let mu = gap / nbounds as f64;
        let dual_res = rd.iter().chain(&rs).fold(0.0f64, |a, v| a.max(v.abs()));
        let primal_res = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if dual_res <= tol * scale && primal_res <= 1e-9 && mu <= tol * scale {
            return Some((st.x, it, true));
        }

        for k in 0..nv {
            let v = val(&st, k);
            let mut s = 0.0;
            if bx[k].has_l() {
                s += st.zl[k] / (v - bx[k].l);
            }
            if bx[k].has_u() {
                s += st.zu[k] / (bx[k].u - v);
            }
            sig[k] = s;
        }
        env.clear();
        for j in 0..n {
            env.add(kpos[j], kpos[j], sig[j] + REG_PRIMAL);
            for &(c, v) in &hb[j] {
                if c <= j {
                    env.add(kpos[j], kpos[c], v);
                }
            }
        }
        for (i, r) in rows.iter().enumerate() {
            let d = if eq[i] { REG_DUAL } else { 1.0 / sig[n + i] + REG_DUAL };
            env.add(kpos[n + i], kpos[n + i], -d);
            for &(j, v) in &r.0 {
                env.add(kpos[n + i], kpos[j], v);
            }
        }
        if !env.factor() {
            return Some((st.x, it, false));
        }

        // Newton direction for complementarity targets `target` plus
        // second-order corrections `corr_l/u` (products of affine steps)
        let direction = |target: f64,
                         corr: Option<&(Vec<f64>, Vec<f64>, Vec<f64>)>,
                         dx: &mut Vec<f64>,
                         dy: &mut Vec<f64>,
                         dzl: &mut Vec<f64>,
                         dzu: &mut Vec<f64>,
                         rhs: &mut Vec<f64>| {
            // rcl = target − sl·zl − Δv_aff·Δzl_aff ; rcu = target − su·zu + Δv_aff·Δzu_aff
            let rc = |k: usize| -> (f64, f64) {
                let v = val(&st, k);
                let mut rcl = 0.0;
                let mut rcu = 0.0;
                if bx[k].has_l() {
                    rcl = target - (v - bx[k].l) * st.zl[k];
                    if let Some(c) = corr {
                        rcl -= c.0[k] * c.1[k];
                    }
                }
                if bx[k].has_u() {
                    rcu = target - (bx[k].u - v) * st.zu[k];
                    if let Some(c) = corr {
                        rcu += c.0[k] * c.2[k];
                    }
                }
                (rcl, rcu)
            };
            let bterm = |k: usize, rcl: f64, rcu: f64| -> f64 {
                let v = val(&st, k);
                let mut t = 0.0;
                if bx[k].has_l() {
                    t += rcl / (v - bx[k].l);
                }
                if bx[k].has_u() {
                    t -= rcu / (bx[k].u - v);
                }
                t
            };
            let mut rho_s = vec![0.0; m];
            for j in 0..n {
                let (rcl, rcu) = rc(j);
                rhs[kpos[j]] = -rd[j] + bterm(j, rcl, rcu);
            }
            for i in 0..m {
                if eq[i] {
                    rhs[kpos[n + i]] = -rp[i];
                } else {
                    let (rcl, rcu) = rc(n + i);
                    rho_s[i] = -rs[i] + bterm(n + i, rcl, rcu);
                    rhs[kpos[n + i]] = -rp[i] + rho_s[i] / sig[n + i];
                }
            }
            env.solve(rhs);
            for j in 0..n {
                dx[j] = rhs[kpos[j]];
            }
            for i in 0..m {
                let w = rhs[kpos[n + i]];
                dy[i] = -w;
                if !eq[i] {
                    dx[n + i] = (rho_s[i] - dy[i]) / sig[n + i];
                } else {
                    dx[n + i] = 0.0;
                }
            }
            for k in 0..nv {
                let (rcl, rcu) = rc(k);
                let v = val(&st, k);
                dzl[k] = if bx[k].has_l() { (rcl - st.zl[k] * dx[k]) / (v - bx[k].l) } else { 0.0 };
                dzu[k] = if bx[k].has_u() { (rcu + st.zu[k] * dx[k]) / (bx[k].u - v) } else { 0.0 };
            }
        };
        let max_step = |dx: &[f64], dzl: &[f64], dzu: &[f64], frac: f64| -> (f64, f64) {
            let (mut ap, mut ad) = (1.0f64, 1.0f64);
            for k in 0..nv {
                let v = val(&st, k);
                if bx[k].has_l() {
                    if dx[k] < 0.0 {
                        ap = ap.min(-frac * (v - bx[k].l) / dx[k]);
                    }
                    if dzl[k] < 0.0 {
                        ad = ad.min(-frac * st.zl[k] / dzl[k]);
                    }
                }
                if bx[k].has_u() {
                    if dx[k] > 0.0 {
                        ap = ap.min(frac * (bx[k].u - v) / dx[k]);
                    }
                    if dzu[k] < 0.0 {
                        ad = ad.min(-frac * st.zu[k] / dzu[k]);
                    }
                }
            }
            (ap, ad)
        };

        // predictor
        direction(0.0, None, &mut aff.0, &mut dy, &mut aff.1, &mut aff.2, &mut rhs);
        let (ap, ad) = max_step(&aff.0, &aff.1, &aff.2, 1.0);
        let mut gap_aff = 0.0;
        for k in 0..nv {
            let v = val(&st, k) + ap * aff.0[k];
            if bx[k].has_l() {
                gap_aff += (st.zl[k] + ad * aff.1[k]) * (v - bx[k].l);
            }
            if bx[k].has_u() {
                gap_aff += (st.zu[k] + ad * aff.2[k]) * (bx[k].u - v);
            }
        }
        let mu_aff = gap_aff / nbounds as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };
        // corrector
        direction(sigma * mu, Some(&aff), &mut dx, &mut dy, &mut dzl, &mut dzu, &mut rhs);
        let (ap, ad) = max_step(&dx, &dzl, &dzu, 0.995);
        for j in 0..n {
            st.x[j] += ap * dx[j];
        }
        for i in 0..m {
            st.s[i] += ap * dx[n + i];
            st.y[i] += ad * dy[i];
        }
        for k in 0..nv {
            st.zl[k] += ad * dzl[k];
            st.zu[k] += ad * dzu[k];
        }
    }
    Some((st.x, MAX_ITERS, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> CsrMatrix {
        let n = d.len();
        let t: Vec<(usize, usize, f64)> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn box_constrained_quadratic() {
        // min (x0 − 3)² + (x1 + 1)² over [0, 2]²
        let p = QpProblem {
            hessian: diag(&[2.0, 2.0]),
            cost: vec![-6.0, 2.0],
            rows: CsrMatrix::zeros(0, 2),
            row_lower: vec![],
            row_upper: vec![],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
        };
        let s = solve_qp(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 2.0).abs() < 1e-7 && s.x[1].abs() < 1e-7, "{:?}", s.x);
    }

    #[test]
    fn equality_and_inequality_rows() {
        // min x0² + x1² + x2²  s.t. x0 + x1 + x2 = 3, x0 − x1 >= 1
        let p = QpProblem {
            hessian: diag(&[2.0, 2.0, 2.0]),
            cost: vec![0.0; 3],
            rows: CsrMatrix::from_dense(&[vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]], 3).unwrap(),
            row_lower: vec![3.0, 1.0],
            row_upper: vec![3.0, f64::INFINITY],
            lower: vec![-10.0; 3],
            upper: vec![10.0; 3],
        };
        let s = solve_qp(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        // KKT by hand: x = (1.5, 0.5, 1)
        for (a, b) in s.x.iter().zip([1.5, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-7, "{:?}", s.x);
        }
    }

    #[test]
    fn fixed_variables_and_singleton_rows_are_eliminated() {
        let p = QpProblem {
            hessian: diag(&[1.0, 1.0]),
            cost: vec![0.0, -5.0],
            rows: CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 2.0]], 2).unwrap(),
            row_lower: vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
            row_upper: vec![4.0, 6.0],
            lower: vec![2.0, -10.0],
            upper: vec![2.0, 10.0],
        };
        let s = solve_qp(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert_eq!(s.x[0], 2.0);
        assert!((s.x[1] - 2.0).abs() < 1e-7, "{:?}", s.x);
    }

    #[test]
    fn linear_program_reaches_a_vertex() {
        let p = QpProblem {
            hessian: CsrMatrix::zeros(2, 2),
            cost: vec![-1.0, -1.0],
            rows: CsrMatrix::from_dense(&[vec![1.0, 2.0]], 2).unwrap(),
            row_lower: vec![f64::NEG_INFINITY],
            row_upper: vec![4.0],
            lower: vec![0.0, 0.0],
            upper: vec![3.0, 3.0],
        };
        let s = solve_qp(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.objective + 3.5).abs() < 1e-7, "{:?}", s);
    }

    #[test]
    fn inconsistent_singleton_is_infeasible() {
        let p = QpProblem {
            hessian: diag(&[1.0]),
            cost: vec![0.0],
            rows: CsrMatrix::from_dense(&[vec![1.0]], 1).unwrap(),
            row_lower: vec![5.0],
            row_upper: vec![f64::INFINITY],
            lower: vec![0.0],
            upper: vec![1.0],
        };
        assert_eq!(solve_qp(&p).status, QpStatus::Infeasible);
    }
}
