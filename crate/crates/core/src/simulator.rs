//! Plays of the game under history-dependent strategies, with exact
//! Bayesian tracking of the public posteriors, exhaustive enumeration for
//! short horizons, and the block strategies built from nonrevealing play.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{BehavioralAction, GameSpec};
use crate::linalg::{l1, KahanSum};
use crate::markov::{balanced_residual, ChainAnalysis, StochasticMatrix};
use crate::mz::{membership_c_minus, splitting_for_cav, Splitting};
use crate::nonrevealing::{NrLimit, VhatSequence};
use crate::table::ValueTable;
use crate::value_iteration::{solve_point, Revelation, ShapleyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

/// Law of a player's (private memory, current state) given the public
/// history, as seen by an outside observer who knows the strategy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Joint {
    entries: BTreeMap<usize, Vec<f64>>,
}

impl Joint {
    pub fn new(prior: &[f64]) -> Self {
        Self {
            entries: BTreeMap::from([(0, prior.to_vec())]),
        }
    }

    pub fn entries(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.entries
    }

    pub fn memories(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn mass(&self, memory: usize) -> f64 {
        self.entries.get(&memory).map_or(0.0, |v| v.iter().sum())
    }

    /// Marginal law of the state.
    pub fn marginal(&self) -> Vec<f64> {
        let n = self.entries.values().next().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for v in self.entries.values() {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        normalize(out)
    }

    /// Law of the state given the memory.
    pub fn conditional(&self, memory: usize) -> Option<Vec<f64>> {
        let v = self.entries.get(&memory)?;
        let s: f64 = v.iter().sum();
        (s > 0.0).then(|| v.iter().map(|x| x / s).collect())
    }

    /// The conditional joint on memories kept by `keep`, relabelled.
    pub fn restrict(&self, keep: impl Fn(usize) -> Option<usize>) -> Self {
        let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (m, v) in &self.entries {
            if let Some(n) = keep(*m) {
                let e = out.entry(n).or_insert_with(|| vec![0.0; v.len()]);
                e.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
        }
        let total: f64 = out.values().flatten().sum();
        if total > 0.0 {
            out.values_mut().flatten().for_each(|x| *x /= total);
        }
        Self { entries: out }
    }

    fn randomized(&self, mut f: impl FnMut(usize, usize) -> Result<Vec<(usize, f64)>>) -> Result<Self> {
        let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (m, v) in &self.entries {
            for (k, &w) in v.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                for (n, a) in f(*m, k)? {
                    if a > 0.0 {
                        out.entry(n).or_insert_with(|| vec![0.0; v.len()])[k] += w * a;
                    }
                }
            }
        }
        Ok(Self { entries: out })
    }

    fn observe(&self, acts: &BTreeMap<usize, BehavioralAction>, action: usize) -> Self {
        let mut out = BTreeMap::new();
        let mut total = 0.0;
        for (m, v) in &self.entries {
            let x = &acts[m];
            let nv: Vec<f64> = v.iter().enumerate().map(|(k, w)| w * x.prob(k, action)).collect();
            let s: f64 = nv.iter().sum();
            if s > 0.0 {
                total += s;
                out.insert(*m, nv);
            }
        }
        if total <= 0.0 {
            return self.clone();
        }
        out.values_mut().flatten().for_each(|x| *x /= total);
        Self { entries: out }
    }

    fn advance(&self, m: &StochasticMatrix) -> Self {
        Self {
            entries: self.entries.iter().map(|(k, v)| (*k, m.left_mul(v))).collect(),
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// What a strategy may condition on at a stage.
pub struct Context<'a> {
    pub player: Player,
    pub stage: usize,
    /// Public actions `(i, j)` of the previous stages.
    pub history: &'a [(usize, usize)],
    /// Public law of the player's own (memory, state).
    pub own: &'a Joint,
    /// Public posterior on the opponent's current state.
    pub opponent_belief: &'a [f64],
}

impl Context<'_> {
    /// The opponent's posterior on this player's current state.
    pub fn own_belief(&self) -> Vec<f64> {
        self.own.marginal()
    }
}

/// A strategy in the class of strategies depending on the public history
/// and the current private state, with private randomization carried by
/// an integer memory.
pub trait Strategy: Send + Sync {
    /// Law of the new memory, drawn at the start of the stage before
    /// acting. The default keeps the memory.
    fn randomize(&self, _ctx: &Context, memory: usize, _state: usize) -> Result<Vec<(usize, f64)>> {
        Ok(vec![(memory, 1.0)])
    }

    /// Behavioral action at the stage given the (already drawn) memory.
    fn act(&self, ctx: &Context, memory: usize) -> Result<BehavioralAction>;
}

/// Plays the same behavioral action at every stage.
#[derive(Debug, Clone)]
pub struct StationaryStrategy {
    pub action: BehavioralAction,
}

impl Strategy for StationaryStrategy {
    fn act(&self, _ctx: &Context, _memory: usize) -> Result<BehavioralAction> {
        Ok(self.action.clone())
    }
}

/// A history-dependent strategy whose actions are pseudo-random functions
/// of `(seed, stage, history, memory)`; with `modes > 1` it also draws a
/// state-dependent private mode at the first stage.
#[derive(Debug, Clone)]
pub struct RandomStrategy {
    pub seed: u64,
    pub states: usize,
    pub actions: usize,
    pub modes: usize,
}

fn mix(seed: u64, xs: impl IntoIterator<Item = u64>) -> u64 {
    xs.into_iter().fold(seed ^ 0x9e37_79b9_7f4a_7c15, |s, x| {
        s.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(x.wrapping_add(1_442_695_040_888_963_407))
    })
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    normalize((0..n).map(|_| rng.gen::<f64>() + 0.05).collect())
}

impl Strategy for RandomStrategy {
    fn randomize(&self, ctx: &Context, memory: usize, state: usize) -> Result<Vec<(usize, f64)>> {
        if ctx.stage > 0 || self.modes <= 1 {
            return Ok(vec![(memory, 1.0)]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, [1, state as u64]));
        Ok(random_simplex(&mut rng, self.modes).into_iter().enumerate().collect())
    }

    fn act(&self, ctx: &Context, memory: usize) -> Result<BehavioralAction> {
        let keys = [ctx.stage as u64, memory as u64]
            .into_iter()
            .chain(ctx.history.iter().flat_map(|(i, j)| [*i as u64, *j as u64]));
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, keys));
        let mut flat = Vec::with_capacity(self.states * self.actions);
        for _ in 0..self.states {
            flat.extend(random_simplex(&mut rng, self.actions));
        }
        Ok(BehavioralAction::from_flat(self.states, self.actions, flat))
    }
}

/// One stage of a play.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub k: usize,
    pub l: usize,
    pub i: usize,
    pub j: usize,
    pub payoff: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayRecord {
    pub stages: Vec<StageRecord>,
    /// Posteriors on the states following the last stage.
    pub final_p: Vec<f64>,
    pub final_q: Vec<f64>,
}

impl PlayRecord {
    pub fn average_payoff(&self) -> f64 {
        let mut s = KahanSum::default();
        self.stages.iter().for_each(|st| s.add(st.payoff));
        s.value() / self.stages.len().max(1) as f64
    }

    /// `(p̂_t)` for `t = 0..=T`, including the one after the last stage.
    pub fn p_hat_path(&self, chain: &ChainAnalysis) -> Vec<Vec<f64>> {
        let mut v: Vec<Vec<f64>> = self.stages.iter().map(|s| s.p_hat.clone()).collect();
        v.push(chain.project(&self.final_p));
        v
    }

    pub fn q_hat_path(&self, chain: &ChainAnalysis) -> Vec<Vec<f64>> {
        let mut v: Vec<Vec<f64>> = self.stages.iter().map(|s| s.q_hat.clone()).collect();
        v.push(chain.project(&self.final_q));
        v
    }

    pub fn play(&self) -> Vec<[usize; 4]> {
        self.stages.iter().map(|s| [s.k, s.l, s.i, s.j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    /// Number of full records kept in the report.
    pub retain: usize,
}

/// Per-run quantities used by the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub payoff: f64,
    pub p_hat_variation: f64,
    pub q_hat_variation: f64,
    /// `p̂_{t+1} - p̂_t` then `q̂_{t+1} - q̂_t`, stage by stage.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub mean: f64,
    pub std_error: f64,
    pub horizon: usize,
    pub summaries: Vec<RunSummary>,
    pub records: Vec<PlayRecord>,
}

struct Sides<'a> {
    spec: &'a GameSpec,
    sigma: &'a dyn Strategy,
    tau: &'a dyn Strategy,
}

type Prepared = (Joint, BTreeMap<usize, BehavioralAction>);

impl Sides<'_> {
    /// Randomized public laws and the actions for every memory in them.
    fn prepare(&self, stage: usize, history: &[(usize, usize)], j1: &Joint, j2: &Joint) -> Result<(Prepared, Prepared)> {
        let (p, q) = (j1.marginal(), j2.marginal());
        let one = prepare_player(self.sigma, Player::One, stage, history, j1, &q)?;
        let two = prepare_player(self.tau, Player::Two, stage, history, j2, &p)?;
        Ok((one, two))
    }
}

fn prepare_player(
    strategy: &dyn Strategy,
    player: Player,
    stage: usize,
    history: &[(usize, usize)],
    joint: &Joint,
    opponent: &[f64],
) -> Result<Prepared> {
    let ctx = Context {
        player,
        stage,
        history,
        own: joint,
        opponent_belief: opponent,
    };
    let randomized = joint.randomized(|m, k| strategy.randomize(&ctx, m, k))?;
    let ctx = Context {
        own: &randomized,
        ..ctx
    };
    let acts = randomized
        .memories()
        .map(|m| Ok((m, strategy.act(&ctx, m)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok((randomized, acts))
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    WeightedIndex::new(weights).map_or(0, |d| d.sample(rng))
}

fn draw_memory(rng: &mut ChaCha8Rng, law: &[(usize, f64)]) -> usize {
    let w: Vec<f64> = law.iter().map(|x| x.1).collect();
    law[draw(rng, &w)].0
}

fn play_once(sides: &Sides, horizon: usize, rng: &mut ChaCha8Rng) -> Result<PlayRecord> {
    let spec = sides.spec;
    let mut k = draw(rng, &spec.p0);
    let mut l = draw(rng, &spec.q0);
    let (mut m1, mut m2) = (0usize, 0usize);
    let mut j1 = Joint::new(&spec.p0);
    let mut j2 = Joint::new(&spec.q0);
    let mut history = Vec::with_capacity(horizon);
    let mut stages = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let (p, q) = (j1.marginal(), j2.marginal());
        let pre1 = Context {
            player: Player::One,
            stage: t,
            history: &history,
            own: &j1,
            opponent_belief: &q,
        };
        m1 = draw_memory(rng, &sides.sigma.randomize(&pre1, m1, k)?);
        let pre2 = Context {
            player: Player::Two,
            stage: t,
            history: &history,
            own: &j2,
            opponent_belief: &p,
        };
        m2 = draw_memory(rng, &sides.tau.randomize(&pre2, m2, l)?);
        let ((r1, acts1), (r2, acts2)) = sides.prepare(t, &history, &j1, &j2)?;
        let i = draw(rng, acts1[&m1].row(k));
        let j = draw(rng, acts2[&m2].row(l));
        stages.push(StageRecord {
            k,
            l,
            i,
            j,
            payoff: spec.g(k, l, i, j),
            p_hat: spec.chain_k.project(&p),
            q_hat: spec.chain_l.project(&q),
            p,
            q,
        });
        j1 = r1.observe(&acts1, i).advance(spec.m());
        j2 = r2.observe(&acts2, j).advance(spec.n());
        history.push((i, j));
        k = draw(rng, spec.m().row(k));
        l = draw(rng, spec.n().row(l));
    }
    Ok(PlayRecord {
        stages,
        final_p: j1.marginal(),
        final_q: j2.marginal(),
    })
}

fn summarize(record: &PlayRecord, spec: &GameSpec) -> RunSummary {
    let ph = record.p_hat_path(&spec.chain_k);
    let qh = record.q_hat_path(&spec.chain_l);
    let mut increments = Vec::with_capacity(record.stages.len() * (spec.nk() + spec.nl()));
    let (mut vp, mut vq) = (0.0, 0.0);
    for t in 0..record.stages.len() {
        vp += l1(&ph[t + 1], &ph[t]);
        vq += l1(&qh[t + 1], &qh[t]);
        increments.extend(ph[t + 1].iter().zip(&ph[t]).map(|(a, b)| a - b));
        increments.extend(qh[t + 1].iter().zip(&qh[t]).map(|(a, b)| a - b));
    }
    RunSummary {
        payoff: record.average_payoff(),
        p_hat_variation: vp,
        q_hat_variation: vq,
        increments,
    }
}

/// Mean and standard error with compensated sums, in run order.
pub fn mean_and_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut s = KahanSum::default();
    for x in xs.clone() {
        s.add(x);
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = s.value() / n as f64;
    let mut v = KahanSum::default();
    xs.for_each(|x| v.add((x - mean) * (x - mean)));
    let se = if n > 1 {
        (v.value() / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    (mean, se)
}

/// Independent plays with per-run seeded generators; identical seeds give
/// identical reports.
pub fn simulate(spec: &GameSpec, sigma: &dyn Strategy, tau: &dyn Strategy, opts: &SimOptions) -> Result<SimulationReport> {
    let sides = Sides { spec, sigma, tau };
    let outcomes = (0..opts.runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let rec = play_once(&sides, opts.horizon, &mut rng)?;
            let summary = summarize(&rec, spec);
            Ok((summary, (r < opts.retain).then_some(rec)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut records = Vec::new();
    for (s, r) in outcomes {
        summaries.push(s);
        records.extend(r);
    }
    let (mean, std_error) = mean_and_se(summaries.iter().map(|s| s.payoff));
    Ok(SimulationReport {
        mean,
        std_error,
        horizon: opts.horizon,
        summaries,
        records,
    })
}

/// Empirical law of the full plays among the retained records.
pub fn empirical_play_distribution(records: &[PlayRecord]) -> BTreeMap<Vec<[usize; 4]>, f64> {
    let mut out = BTreeMap::new();
    let w = 1.0 / records.len().max(1) as f64;
    for r in records {
        *out.entry(r.play()).or_insert(0.0) += w;
    }
    out
}

/// Total variation between two finitely supported laws.
pub fn total_variation<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut s = 0.0;
    for (k, v) in a {
        s += (v - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, v) in b {
        if !a.contains_key(k) {
            s += v.abs();
        }
    }
    0.5 * s
}

/// A public history with its probability, the tracked posteriors and the
/// posteriors recomputed from the enumerated law of the private paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicNode {
    pub history: Vec<(usize, usize)>,
    pub prob: f64,
    pub tracked_p: Vec<f64>,
    pub tracked_q: Vec<f64>,
    pub exact_p: Vec<f64>,
    pub exact_q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub horizon: usize,
    pub nodes: Vec<PublicNode>,
    /// Law of `((k_t, l_t, i_t, j_t))_{t < T}`.
    pub plays: BTreeMap<Vec<[usize; 4]>, f64>,
    /// Expected average payoff.
    pub payoff: f64,
}

#[derive(Clone)]
struct PrivatePath {
    k: usize,
    l: usize,
    m1: usize,
    m2: usize,
    play: Vec<[usize; 4]>,
    prob: f64,
}

/// Exhaustive law of the plays; the number of paths grows like
/// `(K L I J)^T`, so this is meant for `T ≤ 4`.
pub fn enumerate_plays(spec: &GameSpec, sigma: &dyn Strategy, tau: &dyn Strategy, horizon: usize) -> Result<Enumeration> {
    let sides = Sides { spec, sigma, tau };
    let mut paths = Vec::new();
    for k in 0..spec.nk() {
        for l in 0..spec.nl() {
            let prob = spec.p0[k] * spec.q0[l];
            if prob > 0.0 {
                paths.push(PrivatePath {
                    k,
                    l,
                    m1: 0,
                    m2: 0,
                    play: Vec::new(),
                    prob,
                });
            }
        }
    }
    let mut out = Enumeration {
        horizon,
        nodes: Vec::new(),
        plays: BTreeMap::new(),
        payoff: 0.0,
    };
    let mut payoff = KahanSum::default();
    enumerate_node(
        &sides,
        horizon,
        Vec::new(),
        paths,
        Joint::new(&spec.p0),
        Joint::new(&spec.q0),
        &mut out,
        &mut payoff,
    )?;
    out.payoff = payoff.value();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_node(
    sides: &Sides,
    horizon: usize,
    history: Vec<(usize, usize)>,
    paths: Vec<PrivatePath>,
    j1: Joint,
    j2: Joint,
    out: &mut Enumeration,
    payoff: &mut KahanSum,
) -> Result<()> {
    let spec = sides.spec;
    let t = history.len();
    let prob: f64 = paths.iter().map(|p| p.prob).sum();
    let mut ep = vec![0.0; spec.nk()];
    let mut eq = vec![0.0; spec.nl()];
    for p in &paths {
        ep[p.k] += p.prob;
        eq[p.l] += p.prob;
    }
    out.nodes.push(PublicNode {
        history: history.clone(),
        prob,
        tracked_p: j1.marginal(),
        tracked_q: j2.marginal(),
        exact_p: normalize(ep),
        exact_q: normalize(eq),
    });
    if t == horizon {
        for p in paths {
            *out.plays.entry(p.play).or_insert(0.0) += p.prob;
        }
        return Ok(());
    }
    let (p, q) = (j1.marginal(), j2.marginal());
    let pre1 = Context {
        player: Player::One,
        stage: t,
        history: &history,
        own: &j1,
        opponent_belief: &q,
    };
    let pre2 = Context {
        player: Player::Two,
        stage: t,
        history: &history,
        own: &j2,
        opponent_belief: &p,
    };
    let ((r1, acts1), (r2, acts2)) = sides.prepare(t, &history, &j1, &j2)?;
    let mut children: BTreeMap<(usize, usize), Vec<PrivatePath>> = BTreeMap::new();
    for path in &paths {
        for (n1, a) in sides.sigma.randomize(&pre1, path.m1, path.k)? {
            for (n2, b) in sides.tau.randomize(&pre2, path.m2, path.l)? {
                let w = path.prob * a * b;
                if w <= 0.0 {
                    continue;
                }
                let (x, y) = (&acts1[&n1], &acts2[&n2]);
                for i in 0..spec.ni() {
                    for j in 0..spec.nj() {
                        let wij = w * x.prob(path.k, i) * y.prob(path.l, j);
                        if wij <= 0.0 {
                            continue;
                        }
                        payoff.add(wij * spec.g(path.k, path.l, i, j) / horizon as f64);
                        let mut play = path.play.clone();
                        play.push([path.k, path.l, i, j]);
                        for k2 in 0..spec.nk() {
                            let mk = spec.m().get(path.k, k2);
                            if mk <= 0.0 {
                                continue;
                            }
                            for l2 in 0..spec.nl() {
                                let nl = spec.n().get(path.l, l2);
                                if nl <= 0.0 {
                                    continue;
                                }
                                children.entry((i, j)).or_default().push(PrivatePath {
                                    k: k2,
                                    l: l2,
                                    m1: n1,
                                    m2: n2,
                                    play: play.clone(),
                                    prob: wij * mk * nl,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    for ((i, j), kids) in children {
        let c1 = r1.observe(&acts1, i).advance(spec.m());
        let c2 = r2.observe(&acts2, j).advance(spec.n());
        let mut h = history.clone();
        h.push((i, j));
        enumerate_node(sides, horizon, h, kids, c1, c2, out, payoff)?;
    }
    Ok(())
}

impl Enumeration {
    /// Largest total-variation distance between the tracked and the
    /// enumerated posteriors over histories of positive probability.
    pub fn tracker_error(&self) -> f64 {
        self.nodes
            .iter()
            .filter(|n| n.prob > 0.0)
            .map(|n| 0.5 * l1(&n.tracked_p, &n.exact_p).max(l1(&n.tracked_q, &n.exact_q)))
            .fold(0.0, f64::max)
    }

    /// Largest `|E[x̂_{t+1} | h_t] - x̂_t|` for both projected posteriors.
    pub fn martingale_residual(&self, chain_k: &ChainAnalysis, chain_l: &ChainAnalysis) -> f64 {
        let by_history: HashMap<&[(usize, usize)], &PublicNode> =
            self.nodes.iter().map(|n| (n.history.as_slice(), n)).collect();
        let mut worst = 0.0f64;
        for node in self.nodes.iter().filter(|n| n.prob > 0.0 && n.history.len() < self.horizon) {
            let mut ep = vec![0.0; node.tracked_p.len()];
            let mut eq = vec![0.0; node.tracked_q.len()];
            for child in self.nodes.iter().filter(|c| {
                c.history.len() == node.history.len() + 1 && c.history.starts_with(&node.history)
            }) {
                let w = child.prob / node.prob;
                let (a, b) = (chain_k.project(&child.tracked_p), chain_l.project(&child.tracked_q));
                ep.iter_mut().zip(&a).for_each(|(x, y)| *x += w * y);
                eq.iter_mut().zip(&b).for_each(|(x, y)| *x += w * y);
            }
            let parent = by_history[node.history.as_slice()];
            worst = worst
                .max(l1(&ep, &chain_k.project(&parent.tracked_p)))
                .max(l1(&eq, &chain_l.project(&parent.tracked_q)));
        }
        worst
    }

    /// Largest `‖p̂_t - p̂_0‖₁` over histories of positive probability;
    /// zero exactly when player one's play is nonrevealing.
    pub fn revelation(&self, player: Player, chain: &ChainAnalysis) -> f64 {
        let pick = |n: &PublicNode| match player {
            Player::One => chain.project(&n.tracked_p),
            Player::Two => chain.project(&n.tracked_q),
        };
        let root = pick(&self.nodes[0]);
        self.nodes
            .iter()
            .filter(|n| n.prob > 0.0)
            .map(|n| l1(&pick(n), &root))
            .fold(0.0, f64::max)
    }
}

/// Plays component `s` with probability `α_s p_s^k / p^k` after observing
/// the first state `k`.
pub struct SplitStrategy {
    prior: Vec<f64>,
    components: Vec<(f64, Vec<f64>, Arc<dyn Strategy>)>,
}

/// The composite of strategies `σ_s` at beliefs `p_s` with weights `α_s`.
pub fn split_strategy(prior: &[f64], components: Vec<(f64, Vec<f64>, Arc<dyn Strategy>)>) -> Result<SplitStrategy> {
    let mut bary = vec![0.0; prior.len()];
    let mut wsum = 0.0;
    for (w, p, _) in &components {
        if *w < 0.0 || p.len() != prior.len() {
            return Err(Error::BadCombination(w.abs()));
        }
        wsum += w;
        bary.iter_mut().zip(p).for_each(|(a, b)| *a += w * b);
    }
    let err = l1(&bary, prior).max((wsum - 1.0).abs());
    if err > 1e-10 {
        return Err(Error::BadCombination(err));
    }
    Ok(SplitStrategy {
        prior: prior.to_vec(),
        components,
    })
}

impl SplitStrategy {
    fn width(&self) -> usize {
        self.components.len()
    }

    fn sub_context<'a>(&self, ctx: &Context<'a>, own: &'a Joint) -> Context<'a> {
        Context {
            player: ctx.player,
            stage: ctx.stage,
            history: ctx.history,
            own,
            opponent_belief: ctx.opponent_belief,
        }
    }
}

impl Strategy for SplitStrategy {
    fn randomize(&self, ctx: &Context, memory: usize, state: usize) -> Result<Vec<(usize, f64)>> {
        let s_count = self.width();
        let mut out = Vec::new();
        if ctx.stage == 0 {
            for (s, (alpha, ps, strat)) in self.components.iter().enumerate() {
                let w = if self.prior[state] > 0.0 {
                    alpha * ps[state] / self.prior[state]
                } else {
                    0.0
                };
                if w <= 0.0 {
                    continue;
                }
                let own = Joint::new(ps);
                for (m, a) in strat.randomize(&self.sub_context(ctx, &own), 0, state)? {
                    out.push((s + s_count * m, w * a));
                }
            }
            return Ok(out);
        }
        let (s, sub) = (memory % s_count, memory / s_count);
        let own = ctx.own.restrict(|m| (m % s_count == s).then_some(m / s_count));
        let strat = &self.components[s].2;
        Ok(strat
            .randomize(&self.sub_context(ctx, &own), sub, state)?
            .into_iter()
            .map(|(m, a)| (s + s_count * m, a))
            .collect())
    }

    fn act(&self, ctx: &Context, memory: usize) -> Result<BehavioralAction> {
        let s_count = self.width();
        let (s, sub) = (memory % s_count, memory / s_count);
        let own = ctx.own.restrict(|m| (m % s_count == s).then_some(m / s_count));
        self.components[s].2.act(&self.sub_context(ctx, &own), sub)
    }
}

/// `[v̂_0, …, v̂_T]` on a common grid, `v̂_0 = 0`.
pub fn nr_value_tables(spec: &GameSpec, horizon: usize, resolution: usize, options: ShapleyOptions) -> Result<Vec<ValueTable>> {
    let (gp, gq) = ValueTable::grids(spec.nk(), spec.nl(), resolution);
    let mut out = vec![ValueTable::constant(gp, gq, 0.0)];
    for t in VhatSequence::new(spec, resolution, Revelation::NonRevealing, Revelation::NonRevealing, options).take(horizon)
    {
        out.push(t?);
    }
    Ok(out)
}

/// Data for the block strategy of player one.
#[derive(Debug, Clone)]
pub struct BlockStrategyConfig {
    /// Balanced candidate below `cav_I Min(w, v̂)`.
    pub w: ValueTable,
    pub vhat: NrLimit,
    /// `[v̂_0, …, v̂_{T0}]`, see [`nr_value_tables`].
    pub nr_tables: Arc<Vec<ValueTable>>,
    pub block_length: usize,
    pub epsilon: f64,
    pub options: ShapleyOptions,
    /// Tolerance of the membership and splitting checks.
    pub tol: f64,
}

struct Regime {
    w: ValueTable,
    vhat: ValueTable,
    tol: f64,
}

type Key = Vec<i64>;

fn quantize(h: usize, a: &[f64], b: &[f64]) -> Key {
    std::iter::once(h as i64)
        .chain(a.iter().chain(b).map(|x| (x * 1e12).round() as i64))
        .collect()
}

/// Plays by blocks of `T0` stages: at each block start, with probability
/// `ε` uniform play for the block, otherwise the optimal nonrevealing
/// strategy of the `T0`-stage game at the current posteriors. With a
/// candidate `w`, player one first splits where `v̂ < w`.
pub struct BlockStrategy {
    spec: Arc<GameSpec>,
    player: Player,
    tables: Arc<Vec<ValueTable>>,
    block_length: usize,
    epsilon: f64,
    options: ShapleyOptions,
    regime: Option<Regime>,
    actions: Mutex<HashMap<Key, BehavioralAction>>,
    splits: Mutex<HashMap<Key, Splitting>>,
}

/// `σ_{T0,ε}` played at the posteriors of every block start.
pub fn nr_optimal_block_strategy(
    spec: Arc<GameSpec>,
    player: Player,
    nr_tables: Arc<Vec<ValueTable>>,
    block_length: usize,
    epsilon: f64,
    options: ShapleyOptions,
) -> Result<BlockStrategy> {
    if block_length == 0 || nr_tables.len() < block_length {
        return Err(Error::Validation {
            field: "block_length".into(),
            reason: format!("needs 1 ≤ T0 ≤ {}", nr_tables.len()),
        });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Validation {
            field: "epsilon".into(),
            reason: format!("{epsilon} is not a probability"),
        });
    }
    Ok(BlockStrategy {
        spec,
        player,
        tables: nr_tables,
        block_length,
        epsilon,
        options,
        regime: None,
        actions: Mutex::new(HashMap::new()),
        splits: Mutex::new(HashMap::new()),
    })
}

/// Player one's block strategy guaranteeing about `w`.
pub fn block_strategy(spec: Arc<GameSpec>, config: BlockStrategyConfig) -> Result<BlockStrategy> {
    let ni = spec.ni() as f64;
    if !(config.epsilon > 0.0 && config.epsilon < 1.0 / ni) {
        return Err(Error::Validation {
            field: "epsilon".into(),
            reason: format!("{} is outside (0, 1/|I|)", config.epsilon),
        });
    }
    let (gp, gq) = config.w.shared_grids();
    let (ck, cl) = (spec.chain_k.clone(), spec.chain_l.clone());
    let vhat = ValueTable::from_fn(gp, gq, 3.0, |p, q| config.vhat.eval(p, q, &ck, &cl));
    let unbalanced = balanced_residual(&config.w, &ck, &cl);
    if unbalanced > config.tol {
        return Err(Error::PreconditionViolated(format!("w is not balanced (residual {unbalanced:.3e})")));
    }
    let (inside, residual) = membership_c_minus(&config.w, &vhat, config.tol)?;
    if !inside {
        return Err(Error::PreconditionViolated(format!(
            "w fails the cav Min(w, v̂) test (residual {residual:.3e})"
        )));
    }
    let mut s = nr_optimal_block_strategy(
        spec,
        Player::One,
        config.nr_tables,
        config.block_length,
        config.epsilon,
        config.options,
    )?;
    s.regime = Some(Regime {
        w: config.w,
        vhat,
        tol: config.tol,
    });
    Ok(s)
}

impl BlockStrategy {
    fn split(&self, p: &[f64], q: &[f64]) -> Result<Splitting> {
        let Some(regime) = &self.regime else {
            return Ok(Splitting::trivial(p));
        };
        let key = quantize(0, p, q);
        if let Some(s) = self.splits.lock().expect("cache poisoned").get(&key) {
            return Ok(s.clone());
        }
        let s = splitting_for_cav(&regime.w, &regime.vhat, p, q, regime.tol)?;
        self.splits.lock().expect("cache poisoned").insert(key, s.clone());
        Ok(s)
    }

    fn nr_action(&self, remaining: usize, own: &[f64], opp: &[f64]) -> Result<BehavioralAction> {
        let key = quantize(remaining, own, opp);
        if let Some(x) = self.actions.lock().expect("cache poisoned").get(&key) {
            return Ok(x.clone());
        }
        let (p, q) = match self.player {
            Player::One => (own, opp),
            Player::Two => (opp, own),
        };
        let f = &self.tables[remaining - 1];
        let alpha = 1.0 / remaining as f64;
        let nr = Revelation::NonRevealing;
        let res = match solve_point(&self.spec, f, alpha, p, q, nr, nr, &self.options) {
            Ok(r) => r,
            Err(Error::ToleranceNotReached(r)) => *r,
            Err(e) => return Err(e),
        };
        let x = match self.player {
            Player::One => res.x_star,
            Player::Two => res.y_star,
        };
        self.actions.lock().expect("cache poisoned").insert(key, x.clone());
        Ok(x)
    }

    fn actions_count(&self) -> usize {
        match self.player {
            Player::One => self.spec.ni(),
            Player::Two => self.spec.nj(),
        }
    }
}

impl Strategy for BlockStrategy {
    fn randomize(&self, ctx: &Context, memory: usize, state: usize) -> Result<Vec<(usize, f64)>> {
        if ctx.stage % self.block_length != 0 {
            return Ok(vec![(memory, 1.0)]);
        }
        let own = ctx.own_belief();
        let split = self.split(&own, ctx.opponent_belief)?;
        let mut out = Vec::with_capacity(2 * split.atoms.len());
        for (s, (alpha, ps)) in split.atoms.iter().enumerate() {
            let w = if own[state] > 0.0 {
                alpha * ps[state] / own[state]
            } else {
                0.0
            };
            if w * (1.0 - self.epsilon) > 0.0 {
                out.push((2 * s, w * (1.0 - self.epsilon)));
            }
            if w * self.epsilon > 0.0 {
                out.push((2 * s + 1, w * self.epsilon));
            }
        }
        if out.is_empty() {
            out.push((0, 1.0));
        }
        Ok(out)
    }

    fn act(&self, ctx: &Context, memory: usize) -> Result<BehavioralAction> {
        let n = ctx.own.entries().values().next().map_or(0, Vec::len);
        if memory % 2 == 1 {
            return Ok(BehavioralAction::uniform(n, self.actions_count()));
        }
        let own = ctx.own.conditional(memory).unwrap_or_else(|| ctx.own_belief());
        let remaining = self.block_length - ctx.stage % self.block_length;
        self.nr_action(remaining, &own, ctx.opponent_belief)
    }
}

/// Martingale checks on simulated plays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleReport {
    /// Largest |z| of the mean increments of `p̂` and `q̂`, per stage and coordinate.
    pub max_abs_z: f64,
    pub p_variation: f64,
    pub p_variation_se: f64,
    pub q_variation: f64,
    pub q_variation_se: f64,
    /// `√(T(|K|-1))` and `√(T(|L|-1))`.
    pub p_bound: f64,
    pub q_bound: f64,
}

impl MartingaleReport {
    pub fn within_bounds(&self) -> bool {
        self.p_variation <= self.p_bound + 3.0 * self.p_variation_se
            && self.q_variation <= self.q_bound + 3.0 * self.q_variation_se
    }
}

pub fn martingale_diagnostics(report: &SimulationReport, spec: &GameSpec) -> MartingaleReport {
    let s = &report.summaries;
    let width = s.first().map_or(0, |r| r.increments.len());
    let mut max_abs_z = 0.0f64;
    for c in 0..width {
        let (m, se) = mean_and_se(s.iter().map(|r| r.increments[c]));
        let z = if se > 1e-14 {
            m / se
        } else if m.abs() > 1e-12 {
            f64::INFINITY
        } else {
            0.0
        };
        max_abs_z = max_abs_z.max(z.abs());
    }
    let (p_variation, p_variation_se) = mean_and_se(s.iter().map(|r| r.p_hat_variation));
    let (q_variation, q_variation_se) = mean_and_se(s.iter().map(|r| r.q_hat_variation));
    let t = report.horizon as f64;
    MartingaleReport {
        max_abs_z,
        p_variation,
        p_variation_se,
        q_variation,
        q_variation_se,
        p_bound: (t * (spec.nk() as f64 - 1.0)).sqrt(),
        q_bound: (t * (spec.nl() as f64 - 1.0)).sqrt(),
    }
}
