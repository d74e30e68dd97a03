//! Basis factorization for the revised simplex method.
//!
//! The basis is factored as `P B Q = L U` by right-looking elimination on a
//! dense work matrix, skipping zero entries so that the sparse bases produced
//! by transcription problems factor quickly. Pivots follow a threshold rule
//! (within 10% of the column maximum) preferring short rows. Basis changes
//! between refactorizations are kept as product-form eta vectors.

const PIVOT_ABS_TOL: f64 = 1e-11;
const PIVOT_THRESHOLD: f64 = 0.1;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Basis positions that could not be pivoted and the rows left uncovered.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    prow: Vec<usize>,
    pcol: Vec<usize>,
    l_cols: Vec<Vec<(usize, f64)>>,
    u_rows: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    work: Vec<f64>,
}

impl BasisFactor {
    /// Factors the basis whose column at position `p` is `column(p)` as sparse
    /// `(row, value)` pairs.
    pub fn factor<F>(m: usize, mut column: F) -> Result<Self, Singular>
    where
        F: FnMut(usize, &mut Vec<(usize, f64)>),
    {
        let mut w = vec![0.0; m * m];
        let mut col_nnz = vec![0usize; m];
        let mut row_nnz = vec![0usize; m];
        let mut buf = Vec::new();
        for p in 0..m {
            buf.clear();
            column(p, &mut buf);
            for &(i, v) in &buf {
                if v != 0.0 {
                    if w[i * m + p] == 0.0 {
                        col_nnz[p] += 1;
                        row_nnz[i] += 1;
                    }
                    w[i * m + p] += v;
                }
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (col_nnz[p], p));

        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut f = BasisFactor {
            m,
            work: vec![0.0; m],
            ..Default::default()
        };
        let mut failed = Vec::new();
        let mut cand: Vec<usize> = Vec::new();
        let mut upd: Vec<usize> = Vec::new();
        for &p in &order {
            cand.clear();
            let mut maxabs: f64 = 0.0;
            for i in 0..m {
                if !row_done[i] {
                    let v = w[i * m + p];
                    if v != 0.0 {
                        cand.push(i);
                        maxabs = maxabs.max(v.abs());
                    }
                }
            }
            col_done[p] = true;
            if maxabs < PIVOT_ABS_TOL {
                failed.push(p);
                continue;
            }
            let mut r = usize::MAX;
            for &i in &cand {
                let v = w[i * m + p].abs();
                if v < PIVOT_THRESHOLD * maxabs {
                    continue;
                }
                if r == usize::MAX
                    || row_nnz[i] < row_nnz[r]
                    || (row_nnz[i] == row_nnz[r] && v > w[r * m + p].abs())
                {
                    r = i;
                }
            }
            row_done[r] = true;
            let diag = w[r * m + p];
            upd.clear();
            for q in 0..m {
                if !col_done[q] && w[r * m + q] != 0.0 {
                    upd.push(q);
                }
            }
            let urow: Vec<(usize, f64)> = upd.iter().map(|&q| (q, w[r * m + q])).collect();
            let mut lcol = Vec::new();
            for &i in &cand {
                if i == r {
                    continue;
                }
                let l = w[i * m + p] / diag;
                w[i * m + p] = 0.0;
                row_nnz[i] -= 1;
                if l.abs() <= DROP_TOL {
                    continue;
                }
                for &(q, u) in &urow {
                    let cell = &mut w[i * m + q];
                    let was_zero = *cell == 0.0;
                    *cell -= l * u;
                    if was_zero && *cell != 0.0 {
                        row_nnz[i] += 1;
                    }
                }
                lcol.push((i, l));
            }
            f.prow.push(r);
            f.pcol.push(p);
            f.l_cols.push(lcol);
            f.u_rows.push(urow);
            f.u_diag.push(diag);
        }
        if !failed.is_empty() {
            let rows = (0..m).filter(|&i| !row_done[i]).collect();
            return Err(Singular {
                positions: failed,
                rows,
            });
        }
        Ok(f)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row on input and by basis
    /// position on output.
    pub fn ftran(&mut self, rhs: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let val = rhs[self.prow[k]];
            if val != 0.0 {
                for &(i, l) in &self.l_cols[k] {
                    rhs[i] -= l * val;
                }
            }
        }
        let x = &mut self.work;
        for k in (0..m).rev() {
            let mut s = rhs[self.prow[k]];
            for &(q, u) in &self.u_rows[k] {
                s -= u * x[q];
            }
            x[self.pcol[k]] = s / self.u_diag[k];
        }
        rhs.copy_from_slice(x);
        for eta in &self.etas {
            let xr = rhs[eta.pos] / eta.pivot;
            rhs[eta.pos] = xr;
            if xr != 0.0 {
                for &(i, a) in &eta.entries {
                    rhs[i] -= a * xr;
                }
            }
        }
    }

    /// Solves `Bᵀ y = c`; `c` is indexed by basis position on input and by row
    /// on output.
    pub fn btran(&mut self, c: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let y = &mut self.work;
        for k in 0..m {
            let zk = c[self.pcol[k]] / self.u_diag[k];
            y[self.prow[k]] = zk;
            if zk != 0.0 {
                for &(q, u) in &self.u_rows[k] {
                    c[q] -= u * zk;
                }
            }
        }
        for k in (0..m).rev() {
            let r = self.prow[k];
            let mut s = y[r];
            for &(i, l) in &self.l_cols[k] {
                s -= l * y[i];
            }
            y[r] = s;
        }
        c.copy_from_slice(y);
    }

    /// Records the replacement of the column at position `pos` by a column
    /// whose FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pos && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}
