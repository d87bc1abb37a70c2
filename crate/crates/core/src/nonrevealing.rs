//! Nonrevealing play: the constraint polytopes `NR(p)`, the values `v̂_T`
//! of the game where neither player may move the opponent's projected
//! belief, their regularity checks, and the balanced limit `v̂`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::grid::SimplexGrid;
use crate::markov::{balanced_residual, fiber_grid, s_value, ChainAnalysis};
use crate::minimax::Polytope;
use crate::table::ValueTable;
use crate::value_iteration::{shapley_step, Revelation, ShapleyOptions};

/// `NR(p)` as a polytope over `Δ(I)^K`, flattened state-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NrPolytope {
    pub polytope: Polytope,
    pub lambda: Vec<f64>,
}

/// Per class `r` and action `i`: `Σ_{k∈K(r)} p^k x^k(i) = λ(p)^r Σ_k p^k x^k(i)`.
/// Identically vanishing equations are dropped.
pub fn nr_polytope(p: &[f64], analysis: &ChainAnalysis, actions: usize) -> NrPolytope {
    let nk = p.len();
    let lambda = analysis.class_masses(p);
    let mut poly = Polytope::simplex_product(nk, actions);
    for (r, &lr) in lambda.iter().enumerate() {
        for i in 0..actions {
            let mut coeffs = vec![0.0; nk * actions];
            for k in 0..nk {
                let inside = if analysis.class_of(k) == Some(r) { 1.0 } else { 0.0 };
                coeffs[k * actions + i] = p[k] * (inside - lr);
            }
            if coeffs.iter().any(|c| c.abs() > 1e-14) {
                poly = poly.with_equality(coeffs, 0.0);
            }
        }
    }
    NrPolytope { polytope: poly, lambda }
}

impl NrPolytope {
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.polytope.contains(x, tol)
    }
}

/// `v̂_1..v̂_T`, both players restricted to nonrevealing actions; tables
/// carry Lipschitz constant 3.
pub fn compute_vhat(spec: &GameSpec, horizon: usize, resolution: usize, tol: f64) -> Result<Vec<ValueTable>> {
    VhatSequence::new(spec, resolution, Revelation::NonRevealing, Revelation::NonRevealing, ShapleyOptions::new(tol))
        .take(horizon)
        .collect()
}

/// The recursion `v̂_{t+1} = Φ_{1/(t+1)}(v̂_t)` as a lazy sequence, with a
/// choice of which players are restricted.
pub struct VhatSequence<'a> {
    spec: &'a GameSpec,
    current: ValueTable,
    t: usize,
    x_rule: Revelation,
    y_rule: Revelation,
    opts: ShapleyOptions,
    failed: bool,
}

impl<'a> VhatSequence<'a> {
    pub fn new(
        spec: &'a GameSpec,
        resolution: usize,
        x_rule: Revelation,
        y_rule: Revelation,
        opts: ShapleyOptions,
    ) -> Self {
        let (gp, gq) = ValueTable::grids(spec.nk(), spec.nl(), resolution);
        let mut current = ValueTable::constant(gp, gq, 0.0);
        current.lipschitz = 3.0;
        Self {
            spec,
            current,
            t: 0,
            x_rule,
            y_rule,
            opts,
            failed: false,
        }
    }

    pub fn horizon(&self) -> usize {
        self.t
    }
}

impl Iterator for VhatSequence<'_> {
    type Item = Result<ValueTable>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let alpha = 1.0 / (self.t + 1) as f64;
        match shapley_step(self.spec, &self.current, alpha, self.x_rule, self.y_rule, &self.opts) {
            Ok(mut next) => {
                next.lipschitz = 3.0;
                self.t += 1;
                self.current = next.clone();
                Some(Ok(next))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Worst slack of the S-Lipschitz and 3-Lipschitz bounds over sampled grid pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LipschitzReport {
    /// Largest `f(p,q) - f(p',q) - S(p,p')` or `f(p,q) - f(p,q') - S(q',q)`.
    pub s_violation: f64,
    /// Largest `|f(p,q) - f(p',q')| - 3(‖p-p'‖ + ‖q-q'‖)`.
    pub l1_violation: f64,
}

/// Samples `samples` pairs of grid points per table and returns the worst
/// slack of both bounds (negative when they hold with room).
pub fn check_s_lipschitz(
    tables: &[ValueTable],
    chain_k: &ChainAnalysis,
    chain_l: &ChainAnalysis,
    samples: usize,
    seed: u64,
) -> LipschitzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = LipschitzReport {
        s_violation: f64::NEG_INFINITY,
        l1_violation: f64::NEG_INFINITY,
    };
    for f in tables {
        let (gp, gq) = (f.grid_p(), f.grid_q());
        for _ in 0..samples {
            let (i, i2) = (rng.gen_range(0..gp.len()), rng.gen_range(0..gp.len()));
            let (j, j2) = (rng.gen_range(0..gq.len()), rng.gen_range(0..gq.len()));
            let (p, p2) = (gp.point(i), gp.point(i2));
            let (q, q2) = (gq.point(j), gq.point(j2));
            let dp = f.at(i, j) - f.at(i2, j) - s_value(p, p2, chain_k);
            let dq = f.at(i, j) - f.at(i, j2) - s_value(q2, q, chain_l);
            rep.s_violation = rep.s_violation.max(dp).max(dq);
            let l1 = crate::linalg::l1(p, p2) + crate::linalg::l1(q, q2);
            rep.l1_violation = rep.l1_violation.max((f.at(i, j) - f.at(i2, j2)).abs() - 3.0 * l1);
        }
    }
    rep
}

/// Largest midpoint-concavity violation in `p` along fibers `λ(p) = p*`,
/// and midpoint-convexity violation in `q` along fibers `λ(q) = q*`, over
/// random fiber pairs with grid midpoints.
pub fn fiber_curvature_violation(
    f: &ValueTable,
    chain_k: &ChainAnalysis,
    chain_l: &ChainAnalysis,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    let (gp, gq) = (f.grid_p(), f.grid_q());
    for _ in 0..samples {
        // fiber through a random grid point; endpoints from the fiber grid
        let i = rng.gen_range(0..gp.len());
        let j = rng.gen_range(0..gq.len());
        let pf = fiber_grid(&chain_k.class_masses(gp.point(i)), gp.resolution(), chain_k);
        let qf = fiber_grid(&chain_l.class_masses(gq.point(j)), gq.resolution(), chain_l);
        let (a, b) = (&pf[rng.gen_range(0..pf.len())], &pf[rng.gen_range(0..pf.len())]);
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let q = gq.point(j);
        worst = worst.max(0.5 * (f.eval(a, q) + f.eval(b, q)) - f.eval(&mid, q));
        let (c, d) = (&qf[rng.gen_range(0..qf.len())], &qf[rng.gen_range(0..qf.len())]);
        let mid: Vec<f64> = c.iter().zip(d).map(|(x, y)| 0.5 * (x + y)).collect();
        let p = gp.point(i);
        worst = worst.max(f.eval(p, &mid) - 0.5 * (f.eval(p, c) + f.eval(p, d)));
    }
    worst
}

/// The balanced limit `v̂(p,q) = v̂*(λ(p), λ(q))` stored on the class simplices.
#[derive(Debug, Clone)]
pub struct NrLimit {
    /// Table over `Δ(r_M) × Δ(r_L)`.
    pub table: ValueTable,
    /// Certified sup-norm bound: last increment, interpolation and solver gap.
    pub error_bound: f64,
    /// `‖v̂_T - v̂_{T/2}‖` at the final horizon.
    pub increment: f64,
    pub horizon: usize,
    /// `max |v̂_T(p,q) - v̂_T(pB,qC)|` over the grid.
    pub balanced_residual: f64,
    /// `(T, increment)` for each doubling step.
    pub schedule: Vec<(usize, f64)>,
    /// The full-space table at the final horizon.
    pub last: ValueTable,
}

impl NrLimit {
    pub fn eval(&self, p: &[f64], q: &[f64], chain_k: &ChainAnalysis, chain_l: &ChainAnalysis) -> f64 {
        self.table.eval(&chain_k.class_masses(p), &chain_l.class_masses(q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    pub resolution: usize,
    /// Resolution of the class-simplex table.
    pub class_resolution: usize,
    pub tol: f64,
    pub solver_tol: f64,
    pub max_horizon: usize,
}

/// Restricts a full-space table to the invariant lifts of the class grids.
pub fn restrict_to_classes(
    f: &ValueTable,
    chain_k: &ChainAnalysis,
    chain_l: &ChainAnalysis,
    resolution: usize,
) -> ValueTable {
    let gp = Arc::new(SimplexGrid::new(chain_k.num_classes(), resolution));
    let gq = Arc::new(SimplexGrid::new(chain_l.num_classes(), resolution));
    let mut t = ValueTable::from_fn(gp, gq, f.lipschitz, |a, b| f.eval(&chain_k.lift(a), &chain_l.lift(b)));
    t.solver_gap = f.solver_gap;
    t
}

/// Doubles the horizon from 1 until `‖v̂_T - v̂_{2T}‖_∞ ≤ tol`, then
/// restricts `v̂_{2T}` to the class simplices.
pub fn estimate_vhat_limit(spec: &GameSpec, opts: &LimitOptions) -> Result<NrLimit> {
    spec.chain_k.require_recurrent()?;
    spec.chain_l.require_recurrent()?;
    spec.chain_k.require_aperiodic()?;
    spec.chain_l.require_aperiodic()?;
    let mut seq = VhatSequence::new(
        spec,
        opts.resolution,
        Revelation::NonRevealing,
        Revelation::NonRevealing,
        ShapleyOptions::new(opts.solver_tol),
    );
    let mut prev = seq.next().expect("sequence is infinite")?;
    let mut schedule = Vec::new();
    let mut target = 2;
    let mut gap: f64 = prev.solver_gap;
    loop {
        let mut current = prev.clone();
        while seq.horizon() < target {
            current = seq.next().expect("sequence is infinite")?;
            gap = gap.max(current.solver_gap);
        }
        let increment = current.sup_dist(&prev);
        schedule.push((target, increment));
        let done = increment <= opts.tol;
        if done || target * 2 > opts.max_horizon {
            let table = restrict_to_classes(&current, &spec.chain_k, &spec.chain_l, opts.class_resolution);
            let limit = NrLimit {
                error_bound: increment + current.interpolation_error() + table.interpolation_error() + gap,
                increment,
                horizon: target,
                balanced_residual: projection_residual(&current, &spec.chain_k, &spec.chain_l),
                schedule,
                table,
                last: current,
            };
            return if done {
                Ok(limit)
            } else {
                Err(Error::LimitNotReached(Box::new(limit)))
            };
        }
        prev = current;
        target *= 2;
    }
}

/// `max |f(p,q) - f(pB,qC)|` over the grid.
pub fn projection_residual(f: &ValueTable, chain_k: &ChainAnalysis, chain_l: &ChainAnalysis) -> f64 {
    let (gp, gq) = (f.grid_p(), f.grid_q());
    let proj_q: Vec<Vec<f64>> = (0..gq.len()).map(|j| chain_l.project(gq.point(j))).collect();
    let mut worst: f64 = 0.0;
    for i in 0..gp.len() {
        let pb = chain_k.project(gp.point(i));
        for (j, qc) in proj_q.iter().enumerate() {
            worst = worst.max((f.at(i, j) - f.eval(&pb, qc)).abs());
        }
    }
    worst
}

/// Balanced residual `max |f(p,q) - f(pM,qN)|`, re-exported for reports.
pub fn chain_residual(f: &ValueTable, chain_k: &ChainAnalysis, chain_l: &ChainAnalysis) -> f64 {
    balanced_residual(f, chain_k, chain_l)
}
