//! Finite-horizon values on a belief grid by backward application of the
//! one-stage Shapley operator.
//!
//! At each grid point `(p,q)` the operator is the saddle value of
//!
//! ```text
//! φ(x,y) = α G(p,q,x,y) + (1-α) Σ_{i,j} x(p)(i) y(q)(j) f(p(x,i)M, q(y,j)N).
//! ```
//!
//! A behavioral action of player 1 is the same thing as a labelled
//! splitting of `p` into posteriors, so a best response against a mixture
//! of opponent actions is a concavification LP over (posterior, action)
//! atoms. The double-oracle driver in [`crate::minimax`] alternates these
//! exact best responses with restricted matrix games.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{action_marginal, posterior, stage_payoff, BehavioralAction, GameSpec};
use crate::grid::{Cell, SimplexGrid};
use crate::lp::{lp_solve, Cmp, LinearProgram};
use crate::markov::{fiber_grid, ChainAnalysis};
use crate::minimax::{solve_saddle, SaddleOptions, SaddleProblem, SaddleResult};
use crate::table::ValueTable;

/// Which one-stage actions a player may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Revelation {
    /// Any behavioral action in `Δ(I)^K`.
    Free,
    /// Only actions whose posteriors keep the class masses `λ(p)`.
    NonRevealing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapleyOptions {
    /// Saddle gap accepted at each grid point.
    pub tol: f64,
    /// Resolution of the posterior atoms used by best responses; defaults to
    /// the table resolution.
    pub atom_resolution: Option<usize>,
    pub max_iterations: usize,
}

impl ShapleyOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            atom_resolution: None,
            max_iterations: 200,
        }
    }
}

/// A posterior together with its interpolation cell after one transition.
#[derive(Debug, Clone)]
struct Atom {
    belief: Vec<f64>,
    next: Cell,
}

/// The saddle problem at one belief pair.
pub struct ShapleyObjective<'a> {
    spec: &'a GameSpec,
    f: &'a ValueTable,
    alpha: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    x_rule: Revelation,
    y_rule: Revelation,
}

/// Drops coordinates below `SUPPORT_EPS` and renormalizes; the splitting
/// LPs are not reliable on rows with right-hand sides near rounding level.
fn trim_support(p: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = p.iter().map(|&x| if x < SUPPORT_EPS { 0.0 } else { x }).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

const SUPPORT_EPS: f64 = 1e-10;

fn support_ok(belief: &[f64], prior: &[f64]) -> bool {
    belief.iter().zip(prior).all(|(b, p)| *p > 0.0 || *b <= 0.0)
}

fn candidate_atoms(
    prior: &[f64],
    rule: Revelation,
    chain: &ChainAnalysis,
    grid: &SimplexGrid,
    resolution: usize,
) -> Vec<Atom> {
    let mut beliefs: Vec<Vec<f64>> = vec![prior.to_vec()];
    let pool: Vec<Vec<f64>> = match rule {
        Revelation::Free => {
            if resolution == grid.resolution() {
                grid.points().to_vec()
            } else {
                SimplexGrid::new(prior.len(), resolution).points().to_vec()
            }
        }
        Revelation::NonRevealing => fiber_grid(&chain.class_masses(prior), resolution, chain),
    };
    beliefs.extend(pool.into_iter().filter(|b| support_ok(b, prior)));
    beliefs
        .into_iter()
        .map(|b| {
            let next = grid.locate(&chain.matrix.left_mul(&b));
            Atom { belief: b, next }
        })
        .collect()
}

/// Maximizes `Σ ω(a,i) h(a,i)` over labelled splittings `Σ ω(a,i) atom_a = prior`;
/// returns the induced behavioral action and the optimal value.
fn splitting_response(
    prior: &[f64],
    atoms: &[Atom],
    actions: usize,
    h: impl Fn(usize, usize) -> f64,
) -> Result<(BehavioralAction, f64)> {
    let support: Vec<usize> = (0..prior.len()).filter(|&k| prior[k] > 0.0).collect();
    let nvar = atoms.len() * actions;
    let mut obj = Vec::with_capacity(nvar);
    for a in 0..atoms.len() {
        for i in 0..actions {
            obj.push(h(a, i));
        }
    }
    let mut lp = LinearProgram::maximize(obj);
    for &k in &support {
        let mut row = Vec::with_capacity(nvar);
        for atom in atoms {
            row.extend(std::iter::repeat_n(atom.belief[k], actions));
        }
        lp.push(row, Cmp::Eq, prior[k]);
    }
    let sol = lp_solve(&lp)?;
    let mut x = vec![0.0; prior.len() * actions];
    for (a, atom) in atoms.iter().enumerate() {
        for i in 0..actions {
            let w = sol.x[a * actions + i];
            if w <= 0.0 {
                continue;
            }
            for &k in &support {
                x[k * actions + i] += w * atom.belief[k];
            }
        }
    }
    let mut aggregate: Vec<f64> = (0..actions)
        .map(|i| (0..atoms.len()).map(|a| sol.x[a * actions + i].max(0.0)).sum())
        .collect();
    let total: f64 = aggregate.iter().sum();
    if total > 0.0 {
        aggregate.iter_mut().for_each(|v| *v /= total);
    } else {
        aggregate.fill(1.0 / actions as f64);
    }
    for k in 0..prior.len() {
        let row = &mut x[k * actions..(k + 1) * actions];
        let s: f64 = row.iter().sum();
        if prior[k] > 0.0 && s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.copy_from_slice(&aggregate);
        }
    }
    Ok((BehavioralAction::from_flat(prior.len(), actions, x), sol.value))
}

/// Action probabilities and next-stage interpolation cells of a behavioral action.
fn decompose(prior: &[f64], x: &BehavioralAction, chain: &ChainAnalysis, grid: &SimplexGrid) -> Vec<(f64, Cell)> {
    action_marginal(prior, x)
        .into_iter()
        .enumerate()
        .filter(|(_, m)| *m > 0.0)
        .map(|(i, m)| {
            let post = posterior(prior, x, i);
            (m, grid.locate(&chain.matrix.left_mul(&post)))
        })
        .collect()
}

impl<'a> ShapleyObjective<'a> {
    pub fn new(
        spec: &'a GameSpec,
        f: &'a ValueTable,
        alpha: f64,
        p: &[f64],
        q: &[f64],
        x_rule: Revelation,
        y_rule: Revelation,
    ) -> Self {
        Self {
            spec,
            f,
            alpha,
            p: trim_support(p),
            q: trim_support(q),
            x_rule,
            y_rule,
        }
    }

    fn mixture_mean(mix: &[(f64, &BehavioralAction)]) -> BehavioralAction {
        let first = mix[0].1;
        let mut acc = vec![0.0; first.as_flat().len()];
        for (w, b) in mix {
            for (a, v) in acc.iter_mut().zip(b.as_flat()) {
                *a += w * v;
            }
        }
        BehavioralAction::from_flat(first.states(), first.actions(), acc)
    }
}

impl SaddleProblem for ShapleyObjective<'_> {
    fn evaluate(&self, x: &BehavioralAction, y: &BehavioralAction) -> f64 {
        let g = stage_payoff(self.spec, &self.p, &self.q, x, y);
        if self.alpha >= 1.0 {
            return g;
        }
        let dx = decompose(&self.p, x, &self.spec.chain_k, self.f.grid_p());
        let dy = decompose(&self.q, y, &self.spec.chain_l, self.f.grid_q());
        let mut cont = 0.0;
        for (pi, cp) in &dx {
            for (rho, cq) in &dy {
                cont += pi * rho * self.f.eval_cells(cp, cq);
            }
        }
        self.alpha * g + (1.0 - self.alpha) * cont
    }

    fn initial(&self) -> (Vec<BehavioralAction>, Vec<BehavioralAction>) {
        (
            vec![BehavioralAction::uniform(self.spec.nk(), self.spec.ni())],
            vec![BehavioralAction::uniform(self.spec.nl(), self.spec.nj())],
        )
    }

    fn best_response_max(&self, ys: &[(f64, &BehavioralAction)], resolution: usize) -> Result<(BehavioralAction, f64)> {
        let s = self.spec;
        let ybar = Self::mixture_mean(ys);
        // c[i][k] = Σ_l q^l Σ_j ybar^l(j) g(k,l,i,j)
        let mut c = vec![vec![0.0; s.nk()]; s.ni()];
        for (i, ci) in c.iter_mut().enumerate() {
            for (k, cik) in ci.iter_mut().enumerate() {
                let mut acc = 0.0;
                for l in 0..s.nl() {
                    if self.q[l] == 0.0 {
                        continue;
                    }
                    for j in 0..s.nj() {
                        acc += self.q[l] * ybar.prob(l, j) * s.g(k, l, i, j);
                    }
                }
                *cik = acc;
            }
        }
        // continuation as a function of the p-grid point of the next stage
        let cont: Vec<f64> = if self.alpha < 1.0 {
            let nq = self.f.grid_q().len();
            let mut wq = vec![0.0; nq];
            for (w, y) in ys {
                for (rho, cell) in decompose(&self.q, y, &s.chain_l, self.f.grid_q()) {
                    for (v, mu) in cell {
                        wq[v] += w * rho * mu;
                    }
                }
            }
            let active: Vec<(usize, f64)> = wq.into_iter().enumerate().filter(|(_, w)| *w != 0.0).collect();
            (0..self.f.grid_p().len())
                .map(|u| active.iter().map(|&(v, w)| w * self.f.at(u, v)).sum())
                .collect()
        } else {
            Vec::new()
        };
        let atoms = candidate_atoms(&self.p, self.x_rule, &s.chain_k, self.f.grid_p(), resolution);
        let alpha = self.alpha;
        splitting_response(&self.p, &atoms, s.ni(), |a, i| {
            let atom = &atoms[a];
            let g: f64 = atom.belief.iter().zip(&c[i]).map(|(b, ci)| b * ci).sum();
            if alpha >= 1.0 {
                g
            } else {
                let h: f64 = atom.next.iter().map(|&(u, w)| w * cont[u]).sum();
                alpha * g + (1.0 - alpha) * h
            }
        })
    }

    fn best_response_min(&self, xs: &[(f64, &BehavioralAction)], resolution: usize) -> Result<(BehavioralAction, f64)> {
        let s = self.spec;
        let xbar = Self::mixture_mean(xs);
        let mut c = vec![vec![0.0; s.nl()]; s.nj()];
        for (j, cj) in c.iter_mut().enumerate() {
            for (l, cjl) in cj.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..s.nk() {
                    if self.p[k] == 0.0 {
                        continue;
                    }
                    for i in 0..s.ni() {
                        acc += self.p[k] * xbar.prob(k, i) * s.g(k, l, i, j);
                    }
                }
                *cjl = acc;
            }
        }
        let cont: Vec<f64> = if self.alpha < 1.0 {
            let np = self.f.grid_p().len();
            let mut wp = vec![0.0; np];
            for (w, x) in xs {
                for (pi, cell) in decompose(&self.p, x, &s.chain_k, self.f.grid_p()) {
                    for (u, lam) in cell {
                        wp[u] += w * pi * lam;
                    }
                }
            }
            let active: Vec<(usize, f64)> = wp.into_iter().enumerate().filter(|(_, w)| *w != 0.0).collect();
            (0..self.f.grid_q().len())
                .map(|v| active.iter().map(|&(u, w)| w * self.f.at(u, v)).sum())
                .collect()
        } else {
            Vec::new()
        };
        let atoms = candidate_atoms(&self.q, self.y_rule, &s.chain_l, self.f.grid_q(), resolution);
        let alpha = self.alpha;
        let (y, neg) = splitting_response(&self.q, &atoms, s.nj(), |a, j| {
            let atom = &atoms[a];
            let g: f64 = atom.belief.iter().zip(&c[j]).map(|(b, cj)| b * cj).sum();
            let v = if alpha >= 1.0 {
                g
            } else {
                let h: f64 = atom.next.iter().map(|&(u, w)| w * cont[u]).sum();
                alpha * g + (1.0 - alpha) * h
            };
            -v
        })?;
        Ok((y, -neg))
    }
}

/// Saddle of the one-stage operator at an arbitrary belief pair.
#[allow(clippy::too_many_arguments)]
pub fn solve_point(
    spec: &GameSpec,
    f: &ValueTable,
    alpha: f64,
    p: &[f64],
    q: &[f64],
    x_rule: Revelation,
    y_rule: Revelation,
    opts: &ShapleyOptions,
) -> Result<SaddleResult> {
    let problem = ShapleyObjective::new(spec, f, alpha, p, q, x_rule, y_rule);
    let res = f.grid_p().resolution().max(f.grid_q().resolution()).max(1);
    let atom_res = opts.atom_resolution.unwrap_or(res);
    let sopts = SaddleOptions {
        tol: opts.tol,
        initial_resolution: atom_res,
        max_resolution: atom_res,
        max_iterations: opts.max_iterations,
    };
    solve_saddle(&problem, &sopts)
}

/// One application of the operator at every grid point of `f`.
///
/// Points where the saddle tolerance is not met keep the best estimate;
/// the largest remaining gap is recorded in `solver_gap`.
pub fn shapley_step(
    spec: &GameSpec,
    f: &ValueTable,
    alpha: f64,
    x_rule: Revelation,
    y_rule: Revelation,
    opts: &ShapleyOptions,
) -> Result<ValueTable> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::PreconditionViolated(format!("alpha {alpha} outside [0,1]")));
    }
    if f.grid_p().dim() != spec.nk() || f.grid_q().dim() != spec.nl() {
        return Err(Error::DimensionMismatch("table grids do not match the game".into()));
    }
    let (gp, gq) = f.shared_grids();
    let nq = gq.len();
    let results: Vec<Result<(f64, f64)>> = (0..gp.len() * nq)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / nq, idx % nq);
            match solve_point(spec, f, alpha, gp.point(i), gq.point(j), x_rule, y_rule, opts) {
                Ok(r) => Ok((r.value, r.gap)),
                Err(Error::ToleranceNotReached(r)) => Ok((r.value, r.gap)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut gap: f64 = 0.0;
    for r in results {
        let (v, g) = r?;
        values.push(v);
        gap = gap.max(g);
    }
    let mut out = ValueTable::new(gp, gq, values, f.lipschitz);
    out.solver_gap = gap;
    Ok(out)
}

/// Iterates `(t+1) v_{t+1} = max min [G + t·E v_t]` from `v_0 = 0` on the
/// given tables' grids with the given revelation rules; returns `v_1..v_T`.
pub fn iterate_values(
    spec: &GameSpec,
    horizon: usize,
    resolution: usize,
    x_rule: Revelation,
    y_rule: Revelation,
    lipschitz: f64,
    opts: &ShapleyOptions,
) -> Result<Vec<ValueTable>> {
    if horizon == 0 {
        return Err(Error::PreconditionViolated("horizon must be at least 1".into()));
    }
    let (gp, gq) = ValueTable::grids(spec.nk(), spec.nl(), resolution);
    let mut current = ValueTable::constant(gp, gq, 0.0);
    current.lipschitz = lipschitz;
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let alpha = 1.0 / (t + 1) as f64;
        let mut next = shapley_step(spec, &current, alpha, x_rule, y_rule, opts)?;
        next.lipschitz = lipschitz;
        out.push(next.clone());
        current = next;
    }
    Ok(out)
}

/// `v_1..v_T` on a grid of the given resolution; tables carry Lipschitz
/// constant 1.
pub fn compute_v(spec: &GameSpec, horizon: usize, resolution: usize, tol: f64) -> Result<Vec<ValueTable>> {
    iterate_values(
        spec,
        horizon,
        resolution,
        Revelation::Free,
        Revelation::Free,
        1.0,
        &ShapleyOptions::new(tol),
    )
}
