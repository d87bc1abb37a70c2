//! The invariant suite behind `verify`.

use std::sync::Arc;

use mzgames::game::{action_marginal, posterior, BehavioralAction, GameSpec};
use mzgames::linalg::l1;
use mzgames::markov::{lambda_decompose, s_value, Belief, ChainAnalysis};
use mzgames::minimax::{solve_matrix_game, MatrixGame};
use mzgames::mz::{membership_c_plus, mz_fixed_point, mz_residuals, splitting_for_cav};
use mzgames::nonrevealing::{check_s_lipschitz, compute_vhat, fiber_curvature_violation, VhatSequence};
use mzgames::simulator::{
    enumerate_plays, martingale_diagnostics, simulate, split_strategy, total_variation, RandomStrategy, SimOptions,
    Strategy,
};
use mzgames::table::ValueTable;
use mzgames::transport::{affine_fiber_map, laraki_transport};
use mzgames::value_iteration::{compute_v, iterate_values, Revelation, ShapleyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::Outcome;
use crate::commands::{mz_options, nr_limit, INNER_TOL};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{fmt_float, Csv};

/// One invariant: passes when `value ≤ threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.threshold
    }
}

const EXACT: f64 = 1e-10;
const SAMPLES: usize = 200;
const NR_HORIZON: usize = 8;
const ORDER_HORIZON: usize = 4;
const ENUM_HORIZON: usize = 3;

struct Suite {
    checks: Vec<Check>,
    rng: ChaCha8Rng,
}

impl Suite {
    fn add(&mut self, module: &'static str, name: impl Into<String>, value: f64, threshold: f64) {
        self.checks.push(Check {
            module,
            name: name.into(),
            value,
            threshold,
        });
    }

    fn simplex(&mut self, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| self.rng.gen::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }
}


fn chain_checks(s: &mut Suite, name: &str, chain: &ChainAnalysis) {
    let m = &chain.matrix;
    let b = &chain.limit_matrix;
    s.add("markov", format!("{name}.limit_idempotent"), b.mul(b).max_dist(b), EXACT);
    s.add("markov", format!("{name}.limit_right_invariant"), b.mul(m).max_dist(b), EXACT);
    s.add("markov", format!("{name}.limit_left_invariant"), m.mul(b).max_dist(b), EXACT);
    let inv = chain
        .invariant_measures
        .iter()
        .map(|mu| l1(&m.left_mul(mu), mu))
        .fold(0.0, f64::max);
    s.add("markov", format!("{name}.invariant_measures"), inv, EXACT);
    let n = chain.num_states();
    let (mut bounds, mut projected, mut recombine) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..SAMPLES {
        let (p, p2) = (s.simplex(n), s.simplex(n));
        let sv = s_value(&p, &p2, chain);
        let d = l1(&p, &p2);
        bounds = bounds.max(d - sv).max(sv - 3.0 * d);
        let sb = s_value(&chain.project(&p), &chain.project(&p2), chain);
        projected = projected.max((sb - l1(&chain.class_masses(&p), &chain.class_masses(&p2))).abs());
        recombine = recombine.max(l1(&lambda_decompose(&p, chain).recombine(), &p));
    }
    s.add("markov", format!("{name}.s_between_l1_and_3l1"), bounds, 1e-12);
    s.add("markov", format!("{name}.s_on_invariant_beliefs"), projected, 1e-12);
    s.add("markov", format!("{name}.lambda_recombines"), recombine, 1e-12);
}

fn game_checks(s: &mut Suite, spec: &GameSpec) {
    let (nk, ni) = (spec.nk(), spec.ni());
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let p = s.simplex(nk);
        let flat: Vec<f64> = (0..nk).flat_map(|_| s.simplex(ni)).collect();
        let x = BehavioralAction::from_flat(nk, ni, flat);
        let marg = action_marginal(&p, &x);
        let mut avg = vec![0.0; nk];
        for (i, w) in marg.iter().enumerate() {
            for (a, b) in avg.iter_mut().zip(posterior(&p, &x, i)) {
                *a += w * b;
            }
        }
        worst = worst.max(l1(&avg, &p));
    }
    s.add("game_model", "posteriors_average_to_prior", worst, 1e-12);
}

fn minimax_checks(s: &mut Suite, spec: &GameSpec) -> Result<()> {
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES / 4 {
        let (r, c) = (s.rng.gen_range(1..6), s.rng.gen_range(1..6));
        let a: Vec<f64> = (0..r * c).map(|_| s.rng.gen_range(-1.0..1.0)).collect();
        worst = worst.max(solve_matrix_game(&MatrixGame::from_flat(r, c, a))?.gap);
    }
    s.add("minimax", "random_matrix_game_gap", worst, 1e-9);
    let avg = spec.average_matrix(&spec.p0, &spec.q0);
    let res = solve_matrix_game(&MatrixGame::new(avg)?)?;
    s.add("minimax", "average_game_at_prior_gap", res.gap, 1e-9);
    Ok(())
}

fn recursion_checks(s: &mut Suite, spec: &GameSpec, config: &RunConfig) -> Result<Vec<ValueTable>> {
    let v = compute_v(spec, config.horizon, config.resolution, INNER_TOL)?;
    let gap = v.iter().map(|t| t.solver_gap).fold(INNER_TOL, f64::max);
    let slack = 2.0 * (gap + v[0].mesh());
    let mut inc: f64 = f64::NEG_INFINITY;
    let mut bal: f64 = f64::NEG_INFINITY;
    let mut range: f64 = 0.0;
    for (t, w) in v.windows(2).enumerate() {
        inc = inc.max(w[1].sup_dist(&w[0]) - 2.0 / (t + 1) as f64);
    }
    for (t, f) in v.iter().enumerate() {
        bal = bal.max(mzgames::markov::balanced_residual(f, &spec.chain_k, &spec.chain_l) - 4.0 / (t + 1) as f64);
        range = range.max(f.max_abs());
    }
    if v.len() > 1 {
        s.add("value_iteration", "increment_minus_2_over_t", inc, slack);
    }
    s.add("value_iteration", "balance_minus_4_over_t", bal, slack);
    s.add("value_iteration", "values_in_unit_range", range, 1.0 + gap);
    Ok(v)
}

fn nonrevealing_checks(s: &mut Suite, spec: &GameSpec, config: &RunConfig, v: &[ValueTable]) -> Result<()> {
    let (ck, cl) = (&spec.chain_k, &spec.chain_l);
    let horizon = config.horizon.min(NR_HORIZON);
    let vhat = compute_vhat(spec, horizon, config.resolution, INNER_TOL)?;
    let gap = vhat.iter().map(|t| t.solver_gap).fold(INNER_TOL, f64::max);
    let rep = check_s_lipschitz(&vhat, ck, cl, SAMPLES, config.seed);
    s.add("nonrevealing", "s_lipschitz", rep.s_violation, 2.0 * gap);
    s.add("nonrevealing", "three_lipschitz", rep.l1_violation, 2.0 * gap);
    let curv = vhat
        .iter()
        .map(|f| fiber_curvature_violation(f, ck, cl, SAMPLES, config.seed))
        .fold(f64::NEG_INFINITY, f64::max);
    s.add("nonrevealing", "fiber_concave_convex", curv, 2.0 * gap + vhat[0].interpolation_error());

    let order = config.horizon.min(ORDER_HORIZON);
    let opts = ShapleyOptions::new(INNER_TOL);
    let (nr, free) = (Revelation::NonRevealing, Revelation::Free);
    let lower = iterate_values(spec, order, config.resolution, nr, free, 1.0, &opts)?;
    let upper = iterate_values(spec, order, config.resolution, free, nr, 1.0, &opts)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut gap2: f64 = gap;
    for t in 0..order {
        gap2 = gap2.max(lower[t].solver_gap).max(upper[t].solver_gap).max(v[t].solver_gap);
        for (a, b) in lower[t].values().iter().zip(v[t].values()) {
            worst = worst.max(a - b);
        }
        for (a, b) in v[t].values().iter().zip(upper[t].values()) {
            worst = worst.max(a - b);
        }
    }
    s.add("nonrevealing", "one_sided_restriction_order", worst, 2.0 * gap2);

    let mut seq = VhatSequence::new(spec, config.resolution, nr, nr, opts);
    let first = seq.next().expect("sequence is infinite")?;
    s.add("nonrevealing", "sequence_matches_batch", first.sup_dist(&vhat[0]), EXACT);
    Ok(())
}

fn mz_checks(s: &mut Suite, spec: &GameSpec, config: &RunConfig) -> Result<()> {
    let (lim, _) = nr_limit(spec, config)?;
    let sol = match mz_fixed_point(&lim.table, None, &mz_options()) {
        Ok(sol) => sol.w,
        Err(mzgames::Error::NotConverged { last, .. }) => *last,
        Err(e) => return Err(e.into()),
    };
    let (rv, rc) = mz_residuals(&sol, &lim.table)?;
    s.add("mz_solver", "residual_vex_max", rv, 1e-3);
    s.add("mz_solver", "residual_cav_min", rc, 1e-3);
    let (_, plus) = membership_c_plus(&sol, &lim.table, 1e-3)?;
    s.add("mz_solver", "solution_in_c_plus", plus, 1e-3);
    let (ck, cl) = (&spec.chain_k, &spec.chain_l);
    let (lp, lq) = (ck.class_masses(&spec.p0), cl.class_masses(&spec.q0));
    let split = splitting_for_cav(&sol, &lim.table, &lp, &lq, 1e-3)?;
    s.add("splitting_geometry", "split_barycenter", l1(&split.barycenter(), &lp), 1e-9);
    s.add("splitting_geometry", "split_weights", (split.total_weight() - 1.0).abs(), 1e-9);
    Ok(())
}

fn transport_checks(s: &mut Suite, chain: &ChainAnalysis) -> Result<()> {
    let n = chain.num_states();
    let (mut bary, mut cost, mut round_trip) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..SAMPLES / 4 {
        let m = s.rng.gen_range(1..4);
        let weights = s.simplex(m);
        let sources: Vec<Vec<f64>> = (0..m).map(|_| s.simplex(n)).collect();
        let target = s.simplex(n);
        let mut p = vec![0.0; n];
        for (w, src) in weights.iter().zip(&sources) {
            for (a, b) in p.iter_mut().zip(src) {
                *a += w * b;
            }
        }
        let out = laraki_transport(&weights, &sources, &target)?;
        let mut mean = vec![0.0; n];
        let mut c = 0.0;
        for ((w, src), o) in weights.iter().zip(&sources).zip(&out) {
            c += w * l1(src, o);
            for (a, b) in mean.iter_mut().zip(o) {
                *a += w * b;
            }
        }
        bary = bary.max(l1(&mean, &target));
        cost = cost.max((c - l1(&p, &target)).abs());

        let q = s.simplex(n);
        let (from, to) = (chain.class_masses(&q), s.simplex(chain.num_classes()));
        let there = affine_fiber_map(&q, &from, &to, chain)?;
        let back = affine_fiber_map(&there, &to, &from, chain)?;
        round_trip = round_trip.max(l1(&back, &q));
    }
    s.add("splitting_geometry", "laraki_barycenter", bary, EXACT);
    s.add("splitting_geometry", "laraki_cost_equals_distance", cost, EXACT);
    s.add("splitting_geometry", "fiber_map_round_trip", round_trip, EXACT);
    Ok(())
}

fn simulator_checks(s: &mut Suite, spec: &GameSpec, config: &RunConfig) -> Result<()> {
    let horizon = config.horizon.min(ENUM_HORIZON);
    let player = |seed: u64, states: usize, actions: usize| RandomStrategy {
        seed,
        states,
        actions,
        modes: 2,
    };
    let sigma = player(config.seed, spec.nk(), spec.ni());
    let tau = player(config.seed.wrapping_add(1), spec.nl(), spec.nj());
    let e = enumerate_plays(spec, &sigma, &tau, horizon)?;
    s.add("simulator", "tracker_matches_enumeration", e.tracker_error(), EXACT);
    s.add(
        "simulator",
        "posterior_martingale",
        e.martingale_residual(&spec.chain_k, &spec.chain_l),
        EXACT,
    );

    // p0 = t·a + (1-t)·b with a = p0 + (c(1-t)/t)·(e - p0), b = p0 - c·(e - p0)
    let nk = spec.nk();
    let e = s.simplex(nk);
    let t = s.rng.gen_range(0.2..0.8);
    let mut c: f64 = 0.5 * t / (1.0 - t);
    for (pk, ek) in spec.p0.iter().zip(&e) {
        if ek > pk {
            c = c.min(0.5 * pk / (ek - pk));
        }
    }
    let a: Vec<f64> = spec.p0.iter().zip(&e).map(|(p, x)| p + c * (1.0 - t) / t * (x - p)).collect();
    let b: Vec<f64> = spec.p0.iter().zip(&e).map(|(p, x)| (p - c * (x - p)).max(0.0)).collect();
    let (a, b) = (Belief::normalized(a).into_inner(), Belief::normalized(b).into_inner());
    let first: Arc<dyn Strategy> = Arc::new(player(config.seed.wrapping_add(2), nk, spec.ni()));
    let second: Arc<dyn Strategy> = Arc::new(player(config.seed.wrapping_add(3), nk, spec.ni()));
    let mix = vec![(t, a.clone(), first.clone()), (1.0 - t, b.clone(), second.clone())];
    match split_strategy(&spec.p0, mix) {
        Ok(split) => {
            let joint = enumerate_plays(spec, &split, &tau, horizon)?;
            let mut expected = std::collections::BTreeMap::new();
            for (w, p, strat) in [(t, a, first), (1.0 - t, b, second)] {
                let sub = spec.clone().with_initial(Belief::new(p)?, spec.q0.clone())?;
                for (play, prob) in enumerate_plays(&sub, strat.as_ref(), &tau, horizon)?.plays {
                    *expected.entry(play).or_insert(0.0) += w * prob;
                }
            }
            s.add("simulator", "split_law_is_mixture", total_variation(&joint.plays, &expected), EXACT);
        }
        Err(mzgames::Error::BadCombination(_)) => {}
        Err(e) => return Err(e.into()),
    }

    let sim = SimOptions {
        horizon: config.horizon,
        runs: config.runs,
        seed: config.seed,
        retain: 0,
    };
    let report = simulate(spec, &sigma, &tau, &sim)?;
    let d = martingale_diagnostics(&report, spec);
    let excess = (d.p_variation - d.p_bound - 3.0 * d.p_variation_se).max(d.q_variation - d.q_bound - 3.0 * d.q_variation_se);
    s.add("simulator", "variation_minus_bound", excess, 0.0);
    Ok(())
}

/// Runs every module's invariants on the game; deterministic for a fixed
/// configuration.
pub fn run_checks(spec: &GameSpec, config: &RunConfig) -> Result<Vec<Check>> {
    let mut s = Suite {
        checks: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };
    chain_checks(&mut s, "K", &spec.chain_k);
    chain_checks(&mut s, "L", &spec.chain_l);
    game_checks(&mut s, spec);
    minimax_checks(&mut s, spec)?;
    let v = recursion_checks(&mut s, spec, config)?;
    nonrevealing_checks(&mut s, spec, config, &v)?;
    mz_checks(&mut s, spec, config)?;
    transport_checks(&mut s, &spec.chain_k)?;
    transport_checks(&mut s, &spec.chain_l)?;
    simulator_checks(&mut s, spec, config)?;
    Ok(s.checks)
}

pub fn verify(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    let checks = run_checks(spec, config)?;
    let mut csv = Csv::new(["module", "check", "value", "threshold", "status"]);
    for c in &checks {
        csv.push(vec![
            c.module.into(),
            c.name.clone(),
            fmt_float(c.value),
            fmt_float(c.threshold),
            if c.passed() { "PASS" } else { "FAIL" }.into(),
        ]);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("{} checks passed\n", checks.len())
    } else {
        format!("{} of {} checks failed: {}\n", failed.len(), checks.len(), failed.join(", "))
    };
    Ok(Outcome {
        output: csv.to_bytes()?,
        summary,
        ok: failed.is_empty(),
    })
}
