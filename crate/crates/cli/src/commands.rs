//! Command implementations.

use std::fmt::Write as _;
use std::sync::Arc;

use mzgames::game::GameSpec;
use mzgames::markov::ChainAnalysis;
use mzgames::mz::{balanced_lift, mz_fixed_point, MzOptions, MzSolution};
use mzgames::nonrevealing::{compute_vhat, estimate_vhat_limit, LimitOptions, NrLimit};
use mzgames::simulator::{
    block_strategy, martingale_diagnostics, nr_optimal_block_strategy, nr_value_tables, simulate,
    BlockStrategyConfig, Player, SimOptions,
};
use mzgames::table::ValueTable;
use mzgames::value_iteration::{compute_v, ShapleyOptions};

use crate::cache::{cache_key, Cache, Outcome};
use crate::config::{Command, RunConfig};
use crate::error::Result;
use crate::ingest::{build_spec, load_game_str, parse_game, read_game_file};
use crate::output::{belief_header, fmt_float, fmt_vector, table_rows, Csv};

/// Saddle and fixed-point tolerance of the inner solves behind the limit.
pub const INNER_TOL: f64 = 1e-6;
/// Class-simplex resolution relative to `--resolution`.
pub const CLASS_RESOLUTION_FACTOR: usize = 4;
pub const MZ_MAX_ITER: usize = 5000;
/// Full records written by `simulate`.
pub const RETAINED_RUNS: usize = 10;

/// Validates the configuration, loads the game and runs the command,
/// consulting the cache when one is configured.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let text = read_game_file(&config.game)?;
    let spec = match config.command {
        Command::AnalyzeChain => build_spec(&parse_game(&text)?)?,
        _ => load_game_str(&text)?,
    };
    let cache = config.cache.as_deref().map(Cache::open).transpose()?;
    let key = cache_key(&spec, config);
    if let Some(hit) = cache.as_ref().map(|c| c.get(&key)).transpose()?.flatten() {
        return Ok(hit);
    }
    let outcome = execute(&spec, config)?;
    if let Some(c) = &cache {
        c.put(&key, &outcome)?;
    }
    Ok(outcome)
}

pub fn execute(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    match config.command {
        Command::AnalyzeChain => Ok(Outcome {
            output: analyze_chain_report(spec).into_bytes(),
            summary: String::new(),
            ok: true,
        }),
        Command::Value => value(spec, config),
        Command::Nrvalue => nrvalue(spec, config),
        Command::VhatLimit => vhat_limit(spec, config),
        Command::Mz => mz(spec, config),
        Command::Solve => solve(spec, config),
        Command::Simulate => simulate_block(spec, config),
        Command::Verify => crate::verify::verify(spec, config),
    }
}

fn chain_section(out: &mut String, name: &str, star: &str, labels: &[String], chain: &ChainAnalysis) {
    let _ = writeln!(out, "chain {name}: {} states, period {}", labels.len(), chain.period);
    for (r, (class, mu)) in chain.classes.iter().zip(&chain.invariant_measures).enumerate() {
        let members: Vec<&str> = class.iter().map(|&k| labels[k].as_str()).collect();
        let _ = writeln!(
            out,
            "  class {} {{{}}} period {}: {star} = {}",
            r + 1,
            members.join(", "),
            chain.class_periods[r],
            fmt_vector(mu)
        );
    }
    let _ = writeln!(out, "  B =");
    for (k, label) in labels.iter().enumerate() {
        let _ = writeln!(out, "    {label}: {}", fmt_vector(chain.limit_matrix.row(k)));
    }
}

/// Recurrence classes, invariant measures, periods and limit matrices.
pub fn analyze_chain_report(spec: &GameSpec) -> String {
    let mut out = String::new();
    chain_section(&mut out, "K", "p*", &spec.states_k, &spec.chain_k);
    chain_section(&mut out, "L", "q*", &spec.states_l, &spec.chain_l);
    out
}

fn table_csv(spec: &GameSpec, t: &ValueTable, error: f64) -> Result<Vec<u8>> {
    let mut csv = Csv::new(belief_header("p", &spec.states_k, "q", &spec.states_l, &["value", "error"]));
    table_rows(&mut csv, &[t], |_, _| vec![error]);
    csv.to_bytes()
}

fn increments_summary(name: &str, tables: &[ValueTable]) -> String {
    let mut s = String::new();
    for (t, w) in tables.windows(2).enumerate() {
        let _ = writeln!(s, "{name}: ‖t={} - t={}‖ = {}", t + 2, t + 1, fmt_float(w[1].sup_dist(&w[0])));
    }
    s
}

fn value(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    let tables = compute_v(spec, config.horizon, config.resolution, config.tol)?;
    let last = tables.last().expect("horizon is at least 1");
    let error = last.solver_gap + last.interpolation_error();
    let mut summary = increments_summary("v", &tables);
    let _ = writeln!(
        summary,
        "v_{}(p0,q0) = {}, solver gap {}",
        config.horizon,
        fmt_float(last.eval(&spec.p0, &spec.q0)),
        fmt_float(last.solver_gap)
    );
    Ok(Outcome {
        output: table_csv(spec, last, error)?,
        summary,
        ok: true,
    })
}

fn nrvalue(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    let tables = compute_vhat(spec, config.horizon, config.resolution, config.tol)?;
    let last = tables.last().expect("horizon is at least 1");
    let error = last.solver_gap + last.interpolation_error();
    let mut summary = increments_summary("vhat", &tables);
    let _ = writeln!(
        summary,
        "vhat_{}(p0,q0) = {}, solver gap {}",
        config.horizon,
        fmt_float(last.eval(&spec.p0, &spec.q0)),
        fmt_float(last.solver_gap)
    );
    Ok(Outcome {
        output: table_csv(spec, last, error)?,
        summary,
        ok: true,
    })
}

pub fn limit_options(config: &RunConfig) -> LimitOptions {
    LimitOptions {
        resolution: config.resolution,
        class_resolution: CLASS_RESOLUTION_FACTOR * config.resolution,
        tol: config.tol,
        solver_tol: INNER_TOL,
        max_horizon: config.horizon.max(2),
    }
}

/// The limit estimate and whether it reached the tolerance.
pub fn nr_limit(spec: &GameSpec, config: &RunConfig) -> Result<(NrLimit, bool)> {
    match estimate_vhat_limit(spec, &limit_options(config)) {
        Ok(l) => Ok((l, true)),
        Err(mzgames::Error::LimitNotReached(l)) => Ok((*l, false)),
        Err(e) => Err(e.into()),
    }
}

fn limit_summary(lim: &NrLimit, reached: bool) -> String {
    let mut s = String::new();
    for (t, inc) in &lim.schedule {
        let _ = writeln!(s, "vhat: T = {t}, increment {}", fmt_float(*inc));
    }
    let _ = writeln!(
        s,
        "limit at T = {}: increment {}, error bound {}, balanced residual {}",
        lim.horizon,
        fmt_float(lim.increment),
        fmt_float(lim.error_bound),
        fmt_float(lim.balanced_residual)
    );
    if !reached {
        let _ = writeln!(s, "warning: increment tolerance not reached; raise --T");
    }
    s
}

fn class_labels(labels: &[String], chain: &ChainAnalysis) -> Vec<String> {
    chain
        .classes
        .iter()
        .map(|c| c.iter().map(|&k| labels[k].as_str()).collect::<Vec<_>>().join("+"))
        .collect()
}

fn class_csv(spec: &GameSpec, t: &ValueTable, error: f64) -> Result<Vec<u8>> {
    let header = belief_header(
        "lambda_p",
        &class_labels(&spec.states_k, &spec.chain_k),
        "lambda_q",
        &class_labels(&spec.states_l, &spec.chain_l),
        &["value", "error"],
    );
    let mut csv = Csv::new(header);
    table_rows(&mut csv, &[t], |_, _| vec![error]);
    csv.to_bytes()
}

fn vhat_limit(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    let (lim, reached) = nr_limit(spec, config)?;
    Ok(Outcome {
        output: class_csv(spec, &lim.table, lim.error_bound)?,
        summary: limit_summary(&lim, reached),
        ok: reached,
    })
}

pub fn mz_options() -> MzOptions {
    MzOptions {
        tol: INNER_TOL,
        max_iter: MZ_MAX_ITER,
    }
}

fn mz_summary(sol: &MzSolution) -> String {
    format!(
        "MZ: {} iterations, residuals {} (vex) and {} (cav)\n",
        sol.iterations,
        fmt_float(sol.residual_vex),
        fmt_float(sol.residual_cav)
    )
}

fn mz(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    let (lim, reached) = nr_limit(spec, config)?;
    let sol = mz_fixed_point(&lim.table, None, &mz_options())?;
    let error = lim.error_bound + sol.residual_vex.max(sol.residual_cav);
    let mut summary = limit_summary(&lim, reached);
    summary.push_str(&mz_summary(&sol));
    let (ck, cl) = (&spec.chain_k, &spec.chain_l);
    let _ = writeln!(
        summary,
        "MZ(vhat)(p0,q0) = {}",
        fmt_float(sol.w.eval(&ck.class_masses(&spec.p0), &cl.class_masses(&spec.q0)))
    );
    Ok(Outcome {
        output: class_csv(spec, &sol.w, error)?,
        summary,
        ok: reached,
    })
}

fn solve(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    let (lim, reached) = nr_limit(spec, config)?;
    let sol = mz_fixed_point(&lim.table, None, &mz_options())?;
    let w = balanced_lift(&sol.w, &spec.chain_k, &spec.chain_l, config.resolution);
    let tables = compute_v(spec, config.horizon, config.resolution, INNER_TOL)?;
    let v = tables.last().expect("horizon is at least 1");
    let gap = v.sup_dist(&w);
    let tolerance = lim.error_bound + sol.residual_vex.max(sol.residual_cav) + v.solver_gap;
    let mut summary = limit_summary(&lim, reached);
    summary.push_str(&mz_summary(&sol));
    let _ = writeln!(
        summary,
        "sup |v_{} - MZ(vhat)| = {}, combined tolerance {}",
        config.horizon,
        fmt_float(gap),
        fmt_float(tolerance)
    );
    let mut csv = Csv::new(belief_header("p", &spec.states_k, "q", &spec.states_l, &["value", "mz", "gap"]));
    table_rows(&mut csv, &[v, &w], |i, j| vec![(v.at(i, j) - w.at(i, j)).abs()]);
    Ok(Outcome {
        output: csv.to_bytes()?,
        summary,
        ok: reached,
    })
}

fn simulate_block(spec: &GameSpec, config: &RunConfig) -> Result<Outcome> {
    let (lim, reached) = nr_limit(spec, config)?;
    let sol = mz_fixed_point(&lim.table, None, &mz_options())?;
    let w = balanced_lift(&sol.w, &spec.chain_k, &spec.chain_l, config.resolution);
    let spec = Arc::new(spec.clone());
    let opts = ShapleyOptions::new(INNER_TOL);
    let t0 = config.block_length;
    let tables = Arc::new(nr_value_tables(&spec, t0, config.resolution, opts)?);
    let sigma = block_strategy(
        spec.clone(),
        BlockStrategyConfig {
            w: w.clone(),
            vhat: lim.clone(),
            nr_tables: tables.clone(),
            block_length: t0,
            epsilon: config.epsilon,
            options: opts,
            tol: 1e-3,
        },
    )?;
    let tau = nr_optimal_block_strategy(spec.clone(), Player::Two, tables, t0, 0.0, opts)?;
    let sim = SimOptions {
        horizon: config.horizon,
        runs: config.runs,
        seed: config.seed,
        retain: RETAINED_RUNS.min(config.runs),
    };
    let report = simulate(&spec, &sigma, &tau, &sim)?;
    let diag = martingale_diagnostics(&report, &spec);

    let w0 = w.eval(&spec.p0, &spec.q0);
    let slack = w.interpolation_error();
    let bound = w0 - 4.0 * config.epsilon - 3.0 * report.std_error - slack;
    let mut summary = limit_summary(&lim, reached);
    summary.push_str(&mz_summary(&sol));
    let _ = writeln!(
        summary,
        "payoff {} ± {} over {} runs of {} stages",
        fmt_float(report.mean),
        fmt_float(report.std_error),
        config.runs,
        config.horizon
    );
    let _ = writeln!(
        summary,
        "w(p0,q0) = {}, vhat(p0,q0) = {}, guarantee w - 4ε - 3SE - slack = {}",
        fmt_float(w0),
        fmt_float(lim.eval(&spec.p0, &spec.q0, &spec.chain_k, &spec.chain_l)),
        fmt_float(bound)
    );
    let _ = writeln!(
        summary,
        "terms: exploration 4ε = {}, sampling 3SE = {}, grid slack = {}",
        fmt_float(4.0 * config.epsilon),
        fmt_float(3.0 * report.std_error),
        fmt_float(slack)
    );
    let _ = writeln!(
        summary,
        "variation of p̂ {} (bound {}), of q̂ {} (bound {}), max |z| of increments {}",
        fmt_float(diag.p_variation),
        fmt_float(diag.p_bound),
        fmt_float(diag.q_variation),
        fmt_float(diag.q_bound),
        fmt_float(diag.max_abs_z)
    );

    let mut header: Vec<String> = ["run", "t", "k", "l", "i", "j", "payoff"].map(String::from).to_vec();
    header.extend(belief_header("p", &spec.states_k, "q", &spec.states_l, &[]));
    let mut csv = Csv::new(header);
    for (run, rec) in report.records.iter().enumerate() {
        for (t, s) in rec.stages.iter().enumerate() {
            let mut row = vec![
                run.to_string(),
                t.to_string(),
                spec.states_k[s.k].clone(),
                spec.states_l[s.l].clone(),
                spec.actions_i[s.i].clone(),
                spec.actions_j[s.j].clone(),
                fmt_float(s.payoff),
            ];
            row.extend(s.p.iter().chain(&s.q).map(|&x| fmt_float(x)));
            csv.push(row);
        }
    }
    Ok(Outcome {
        output: csv.to_bytes()?,
        summary,
        ok: reached && report.mean >= bound && diag.within_bounds(),
    })
}
