//! Dense two-phase simplex method for small linear programs.
//!
//! Programs are stated as `maximize c·x` subject to linear rows and
//! `x ≥ 0`. Pivoting is deterministic: Dantzig's rule with lowest-index
//! tie-breaking, switching to Bland's rule after a run of degenerate pivots.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const OPT_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-8;
const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_RUN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> Self {
        Self { coeffs, cmp, rhs }
    }
}

/// `maximize objective·x` subject to `constraints`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn subject_to(mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> Self {
        self.constraints.push(Constraint::new(coeffs, cmp, rhs));
        self
    }

    pub fn push(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        self.constraints.push(Constraint::new(coeffs, cmp, rhs));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// One multiplier per constraint, signed so that `value = Σ duals·rhs`.
    pub duals: Vec<f64>,
    /// Structural variables that are basic at the optimum.
    pub basic: Vec<usize>,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // (rows + 1) x (cols + 1); last row is the objective, last column the rhs
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] *= inv;
        }
        self.t[pr * w + pc] = 1.0;
        let prow: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[r * w..(r + 1) * w];
            for (v, p) in row.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations on the current objective row; columns at or
    /// beyond `enter_limit` never enter the basis.
    fn optimize(&mut self, enter_limit: usize) -> Result<()> {
        let mut degenerate = 0usize;
        for _ in 0..MAX_PIVOTS {
            let obj = self.rows;
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -OPT_EPS;
            for c in 0..enter_limit {
                let z = self.at(obj, c);
                if z < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = z;
                }
            }
            let Some(pc) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc);
        }
        Err(Error::LpFailure("pivot limit reached".into()))
    }
}

/// Solves a linear program exactly up to floating point pivoting.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m = lp.constraints.len();
    for (r, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "constraint {r} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::LpFailure(format!("constraint {r} is not finite")));
        }
    }
    if lp.objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::LpFailure("objective is not finite".into()));
    }

    // normalize to rhs >= 0
    let mut flip = vec![false; m];
    let mut cmps = Vec::with_capacity(m);
    for (r, c) in lp.constraints.iter().enumerate() {
        flip[r] = c.rhs < 0.0;
        cmps.push(match (c.cmp, flip[r]) {
            (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Ge, true) => Cmp::Le,
            (cmp, _) => cmp,
        });
    }
    let n_slack = cmps.iter().filter(|c| **c != Cmp::Eq).count();
    let n_art = cmps.iter().filter(|c| **c != Cmp::Le).count();
    let art_start = n + n_slack;
    let cols = art_start + n_art;
    let w = cols + 1;
    let mut tab = Tableau {
        rows: m,
        cols,
        t: vec![0.0; (m + 1) * w],
        basis: vec![0; m],
    };
    // column carrying +e_r in row r, used to read duals
    let mut unit_col = vec![0usize; m];
    let (mut s, mut a) = (n, art_start);
    for (r, c) in lp.constraints.iter().enumerate() {
        let sign = if flip[r] { -1.0 } else { 1.0 };
        for (j, v) in c.coeffs.iter().enumerate() {
            tab.t[r * w + j] = sign * v;
        }
        tab.t[r * w + cols] = sign * c.rhs;
        match cmps[r] {
            Cmp::Le => {
                tab.t[r * w + s] = 1.0;
                tab.basis[r] = s;
                unit_col[r] = s;
                s += 1;
            }
            Cmp::Ge => {
                tab.t[r * w + s] = -1.0;
                s += 1;
                tab.t[r * w + a] = 1.0;
                tab.basis[r] = a;
                unit_col[r] = a;
                a += 1;
            }
            Cmp::Eq => {
                tab.t[r * w + a] = 1.0;
                tab.basis[r] = a;
                unit_col[r] = a;
                a += 1;
            }
        }
    }

    if n_art > 0 {
        // phase 1: maximize -Σ artificials
        let obj = m * w;
        for r in 0..m {
            if tab.basis[r] >= art_start {
                for c in 0..w {
                    tab.t[obj + c] -= tab.t[r * w + c];
                }
            }
        }
        for c in art_start..cols {
            tab.t[obj + c] = 0.0;
        }
        tab.optimize(art_start)?;
        let infeas = -tab.t[obj + cols];
        let scale = 1.0 + lp.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeas > FEAS_EPS * scale {
            return Err(Error::Infeasible);
        }
        // drive basic artificials out where possible
        for r in 0..m {
            if tab.basis[r] < art_start {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for c in 0..art_start {
                let v = tab.at(r, c).abs();
                if v > 1e-9 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((c, v));
                }
            }
            if let Some((c, _)) = best {
                tab.pivot(r, c);
            }
        }
    }

    // phase 2 objective row: z_j = c_B B^-1 A_j - c_j
    let cost = |j: usize| if j < n { lp.objective[j] } else { 0.0 };
    let obj = m * w;
    for c in 0..w {
        tab.t[obj + c] = if c < cols { -cost(c) } else { 0.0 };
    }
    for r in 0..m {
        let cb = cost(tab.basis[r]);
        if cb != 0.0 {
            for c in 0..w {
                tab.t[obj + c] += cb * tab.t[r * w + c];
            }
        }
    }
    tab.optimize(art_start)?;

    let mut x = vec![0.0; n];
    let mut basic = Vec::new();
    for r in 0..m {
        let b = tab.basis[r];
        if b < n {
            x[b] = tab.rhs(r).max(0.0);
            basic.push(b);
        }
    }
    basic.sort_unstable();
    let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    let duals = (0..m)
        .map(|r| {
            let y = tab.at(m, unit_col[r]);
            if flip[r] {
                -y
            } else {
                y
            }
        })
        .collect();
    Ok(LpSolution { x, value, duals, basic })
}
