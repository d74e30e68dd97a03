//! Plain-text dump of a [`MilpProblem`] for cross-checking with other solvers.
//!
//! ```text
//! minimize
//!  obj: +2 x0 -1 x3
//! subject to
//!  r0: -inf <= +1 x0 +2 x1 <= 3
//! bounds
//!  0 <= x0 <= 1
//! integers
//!  x0 x3
//! end
//! ```
//!
//! Variables are named `x<index>` and rows `r<index>`. Every row and every
//! variable gets one line; infinite sides are written `-inf`/`inf`. Numbers
//! use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::io;

use super::MilpProblem;

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn term(out: &mut String, coef: f64, j: usize) {
    let sign = if coef.is_sign_negative() { '-' } else { '+' };
    let _ = write!(out, " {sign}{} x{j}", num(coef.abs()));
}

pub fn write_lp<W: io::Write>(p: &MilpProblem, mut w: W) -> io::Result<()> {
    let mut s = String::new();
    s.push_str("minimize\n obj:");
    for (j, &c) in p.cost.iter().enumerate() {
        if c != 0.0 {
            term(&mut s, c, j);
        }
    }
    s.push_str("\nsubject to\n");
    for i in 0..p.num_rows() {
        let _ = write!(s, " r{i}: {} <=", num(p.row_lower[i]));
        for (j, v) in p.rows.row_iter(i) {
            term(&mut s, v, j);
        }
        let _ = writeln!(s, " <= {}", num(p.row_upper[i]));
    }
    s.push_str("bounds\n");
    for j in 0..p.num_vars() {
        let _ = writeln!(s, " {} <= x{j} <= {}", num(p.lower[j]), num(p.upper[j]));
    }
    s.push_str("integers\n");
    if !p.integers.is_empty() {
        let names: Vec<String> = p.integers.iter().map(|j| format!("x{j}")).collect();
        let _ = writeln!(s, " {}", names.join(" "));
    }
    s.push_str("end\n");
    w.write_all(s.as_bytes())
}
