//! Game primitives and the one-stage belief and payoff algebra.

use crate::error::{Error, Result};
use crate::markov::{analyze_chain, Belief, ChainAnalysis, StochasticMatrix, STOCHASTIC_TOL};

/// Posteriors after an action of probability at or below this are the prior.
pub const ZERO_PROB: f64 = 1e-12;

/// A two-player zero-sum game with independent Markov private states.
#[derive(Debug, Clone)]
pub struct GameSpec {
    pub states_k: Vec<String>,
    pub states_l: Vec<String>,
    pub actions_i: Vec<String>,
    pub actions_j: Vec<String>,
    /// `g[k][l][i][j]` flattened in that order.
    payoff: Vec<f64>,
    pub chain_k: ChainAnalysis,
    pub chain_l: ChainAnalysis,
    pub p0: Belief,
    pub q0: Belief,
}

impl GameSpec {
    /// Validates the primitives and analyzes both chains. Chains must be
    /// recurrent; periodicity is left to the caller.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        states_k: Vec<String>,
        states_l: Vec<String>,
        actions_i: Vec<String>,
        actions_j: Vec<String>,
        payoff: Vec<f64>,
        transition_k: StochasticMatrix,
        transition_l: StochasticMatrix,
        p0: Belief,
        q0: Belief,
    ) -> Result<Self> {
        let (nk, nl, ni, nj) = (states_k.len(), states_l.len(), actions_i.len(), actions_j.len());
        for (name, n) in [("states_k", nk), ("states_l", nl), ("actions_i", ni), ("actions_j", nj)] {
            if n == 0 {
                return Err(Error::Validation {
                    field: name.into(),
                    reason: "must be nonempty".into(),
                });
            }
        }
        if payoff.len() != nk * nl * ni * nj {
            return Err(Error::Validation {
                field: "payoff".into(),
                reason: format!("has {} entries, expected {}", payoff.len(), nk * nl * ni * nj),
            });
        }
        if let Some(pos) = payoff.iter().position(|g| !g.is_finite() || g.abs() > 1.0) {
            let (k, rest) = (pos / (nl * ni * nj), pos % (nl * ni * nj));
            let (l, rest) = (rest / (ni * nj), rest % (ni * nj));
            let (i, j) = (rest / nj, rest % nj);
            return Err(Error::Validation {
                field: format!("payoff[{k}][{l}][{i}][{j}]"),
                reason: format!("value {} outside [-1,1]", payoff[pos]),
            });
        }
        if transition_k.size() != nk {
            return Err(Error::Validation {
                field: "transition_k".into(),
                reason: format!("size {} does not match {nk} states", transition_k.size()),
            });
        }
        if transition_l.size() != nl {
            return Err(Error::Validation {
                field: "transition_l".into(),
                reason: format!("size {} does not match {nl} states", transition_l.size()),
            });
        }
        if p0.len() != nk {
            return Err(Error::Validation {
                field: "p0".into(),
                reason: format!("length {} does not match {nk} states", p0.len()),
            });
        }
        if q0.len() != nl {
            return Err(Error::Validation {
                field: "q0".into(),
                reason: format!("length {} does not match {nl} states", q0.len()),
            });
        }
        let chain_k = analyze_chain(&transition_k, false)?;
        let chain_l = analyze_chain(&transition_l, false)?;
        Ok(Self {
            states_k,
            states_l,
            actions_i,
            actions_j,
            payoff,
            chain_k,
            chain_l,
            p0,
            q0,
        })
    }

    /// Builds a spec with generated labels; convenient for tests.
    pub fn from_parts(
        nk: usize,
        nl: usize,
        ni: usize,
        nj: usize,
        payoff: impl Fn(usize, usize, usize, usize) -> f64,
        transition_k: StochasticMatrix,
        transition_l: StochasticMatrix,
    ) -> Result<Self> {
        let mut g = Vec::with_capacity(nk * nl * ni * nj);
        for k in 0..nk {
            for l in 0..nl {
                for i in 0..ni {
                    for j in 0..nj {
                        g.push(payoff(k, l, i, j));
                    }
                }
            }
        }
        let labels = |prefix: &str, n: usize| (0..n).map(|x| format!("{prefix}{x}")).collect();
        Self::new(
            labels("k", nk),
            labels("l", nl),
            labels("i", ni),
            labels("j", nj),
            g,
            transition_k,
            transition_l,
            Belief::uniform(nk),
            Belief::uniform(nl),
        )
    }

    pub fn nk(&self) -> usize {
        self.states_k.len()
    }

    pub fn nl(&self) -> usize {
        self.states_l.len()
    }

    pub fn ni(&self) -> usize {
        self.actions_i.len()
    }

    pub fn nj(&self) -> usize {
        self.actions_j.len()
    }

    pub fn g(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        let (nl, ni, nj) = (self.nl(), self.ni(), self.nj());
        self.payoff[((k * nl + l) * ni + i) * nj + j]
    }

    pub fn payoff_flat(&self) -> &[f64] {
        &self.payoff
    }

    pub fn m(&self) -> &StochasticMatrix {
        &self.chain_k.matrix
    }

    pub fn n(&self) -> &StochasticMatrix {
        &self.chain_l.matrix
    }

    /// Expected payoff matrix of the one-shot game when types are drawn
    /// from `p` and `q` and nobody conditions on them.
    pub fn average_matrix(&self, p: &[f64], q: &[f64]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.nj()]; self.ni()];
        for k in 0..self.nk() {
            for l in 0..self.nl() {
                let w = p[k] * q[l];
                if w == 0.0 {
                    continue;
                }
                for (i, row) in a.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v += w * self.g(k, l, i, j);
                    }
                }
            }
        }
        a
    }

    pub fn with_initial(mut self, p0: Belief, q0: Belief) -> Result<Self> {
        if p0.len() != self.nk() || q0.len() != self.nl() {
            return Err(Error::DimensionMismatch("initial beliefs".into()));
        }
        self.p0 = p0;
        self.q0 = q0;
        Ok(self)
    }
}

/// A mixed action per private state: `x^k ∈ Δ(I)` for each `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralAction {
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl BehavioralAction {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        let actions = rows.first().map_or(0, Vec::len);
        if states == 0 || actions == 0 {
            return Err(Error::DimensionMismatch("empty behavioral action".into()));
        }
        let mut probs = Vec::with_capacity(states * actions);
        for row in &rows {
            if row.len() != actions {
                return Err(Error::DimensionMismatch("ragged behavioral action".into()));
            }
            Belief::new(row.clone())?;
            probs.extend_from_slice(row);
        }
        Ok(Self { states, actions, probs })
    }

    /// Builds from a flat row-major vector without validation beyond shape.
    pub fn from_flat(states: usize, actions: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), states * actions);
        Self { states, actions, probs }
    }

    /// Every state plays the same mixed action.
    pub fn state_independent(states: usize, mixed: &[f64]) -> Self {
        let mut probs = Vec::with_capacity(states * mixed.len());
        for _ in 0..states {
            probs.extend_from_slice(mixed);
        }
        Self {
            states,
            actions: mixed.len(),
            probs,
        }
    }

    pub fn uniform(states: usize, actions: usize) -> Self {
        Self::state_independent(states, &vec![1.0 / actions as f64; actions])
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn prob(&self, k: usize, i: usize) -> f64 {
        self.probs[k * self.actions + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k * self.actions..(k + 1) * self.actions]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_valid(&self) -> bool {
        (0..self.states).all(|k| {
            let r = self.row(k);
            r.iter().all(|v| *v >= -STOCHASTIC_TOL) && (r.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        })
    }
}

/// `G(p,q,x,y) = Σ p^k q^l x^k(i) y^l(j) g(k,l,i,j)`.
pub fn stage_payoff(spec: &GameSpec, p: &[f64], q: &[f64], x: &BehavioralAction, y: &BehavioralAction) -> f64 {
    let mut s = 0.0;
    for k in 0..spec.nk() {
        if p[k] == 0.0 {
            continue;
        }
        for l in 0..spec.nl() {
            let w = p[k] * q[l];
            if w == 0.0 {
                continue;
            }
            for i in 0..spec.ni() {
                let xi = x.prob(k, i);
                if xi == 0.0 {
                    continue;
                }
                for j in 0..spec.nj() {
                    s += w * xi * y.prob(l, j) * spec.g(k, l, i, j);
                }
            }
        }
    }
    s
}

/// `x(p)(i) = Σ_k p^k x^k(i)`.
pub fn action_marginal(p: &[f64], x: &BehavioralAction) -> Vec<f64> {
    let mut out = vec![0.0; x.actions()];
    for (k, &pk) in p.iter().enumerate() {
        for (o, xi) in out.iter_mut().zip(x.row(k)) {
            *o += pk * xi;
        }
    }
    out
}

/// Bayes posterior on the state after action `i`; the prior when `i` has
/// (numerically) zero probability.
pub fn posterior(p: &[f64], x: &BehavioralAction, i: usize) -> Vec<f64> {
    let joint: Vec<f64> = p.iter().enumerate().map(|(k, pk)| pk * x.prob(k, i)).collect();
    let m: f64 = joint.iter().sum();
    if m <= ZERO_PROB {
        return p.to_vec();
    }
    joint.into_iter().map(|v| v / m).collect()
}

/// Law of the next state: `p · M`.
pub fn advance(p: &[f64], m: &StochasticMatrix) -> Vec<f64> {
    m.left_mul(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin_game() -> GameSpec {
        GameSpec::from_parts(
            2,
            2,
            2,
            2,
            |k, l, i, j| ((k + 2 * l + 3 * i + 5 * j) % 7) as f64 / 7.0 - 0.4,
            StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap(),
            StochasticMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_play_gives_mean_payoff() {
        let g = coin_game();
        let x = BehavioralAction::uniform(2, 2);
        let v = stage_payoff(&g, &[0.5, 0.5], &[0.5, 0.5], &x, &x);
        let mean: f64 = g.payoff_flat().iter().sum::<f64>() / 16.0;
        assert!((v - mean).abs() < 1e-12);
    }

    #[test]
    fn degenerate_beliefs_pick_an_entry() {
        let g = coin_game();
        let x = BehavioralAction::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let y = BehavioralAction::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(stage_payoff(&g, &[1.0, 0.0], &[0.0, 1.0], &x, &y), g.g(0, 1, 1, 1));
    }

    #[test]
    fn revealing_posteriors() {
        let x = BehavioralAction::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(posterior(&[0.3, 0.7], &x, 0), vec![1.0, 0.0]);
        assert_eq!(posterior(&[0.3, 0.7], &x, 1), vec![0.0, 1.0]);
        assert_eq!(posterior(&[1.0, 0.0], &x, 1), vec![1.0, 0.0]);
        let nr = BehavioralAction::state_independent(2, &[0.4, 0.6]);
        assert_eq!(posterior(&[0.3, 0.7], &nr, 1), vec![0.3, 0.7]);
    }

    #[test]
    fn advance_example_a_row() {
        let m = StochasticMatrix::new(vec![
            vec![2.0 / 3.0, 1.0 / 3.0, 0.0],
            vec![1.0 / 3.0, 2.0 / 3.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(advance(&[1.0, 0.0, 0.0], &m), vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn payoff_range_is_enforced() {
        let err = GameSpec::from_parts(
            1,
            1,
            2,
            1,
            |_, _, i, _| if i == 1 { 1.5 } else { 0.0 },
            StochasticMatrix::identity(1),
            StochasticMatrix::identity(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "payoff[0][0][1][0]"));
    }
    fn belief(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    }

    fn action(raw: &[f64], states: usize) -> BehavioralAction {
        BehavioralAction::new(raw.chunks(raw.len() / states).map(belief).collect()).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn posteriors_average_to_the_prior(pr in proptest::collection::vec(0.01f64..1.0, 3), xr in proptest::collection::vec(0.0f64..1.0, 6)) {
            proptest::prop_assume!(xr.chunks(2).all(|c| c.iter().sum::<f64>() > 0.05));
            let p = belief(&pr);
            let x = action(&xr, 3);
            let marg = action_marginal(&p, &x);
            proptest::prop_assert!((marg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut back = vec![0.0; 3];
            for (i, m) in marg.iter().enumerate() {
                for (b, v) in back.iter_mut().zip(posterior(&p, &x, i)) {
                    *b += m * v;
                }
            }
            for (b, v) in back.iter().zip(&p) {
                proptest::prop_assert!((b - v).abs() < 1e-10);
            }
            // brute-force Bayes on the joint law of (k, i)
            for i in 0..2 {
                let joint: Vec<f64> = (0..3).map(|k| p[k] * x.prob(k, i)).collect();
                let z: f64 = joint.iter().sum();
                if z > 1e-12 {
                    let post = posterior(&p, &x, i);
                    for k in 0..3 {
                        proptest::prop_assert!((post[k] - joint[k] / z).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn stage_payoff_is_affine(
            a in proptest::collection::vec(0.01f64..1.0, 4),
            b in proptest::collection::vec(0.01f64..1.0, 4),
            xr in proptest::collection::vec(0.01f64..1.0, 8),
            xr2 in proptest::collection::vec(0.01f64..1.0, 8),
            t in 0.0f64..1.0,
        ) {
            let g = coin_game();
            let (p, p2) = (belief(&a[..2]), belief(&a[2..]));
            let (q, q2) = (belief(&b[..2]), belief(&b[2..]));
            let (x, x2) = (action(&xr[..4], 2), action(&xr2[..4], 2));
            let (y, y2) = (action(&xr[4..], 2), action(&xr2[4..], 2));
            let mixv = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(a, b)| t * a + (1.0 - t) * b).collect() };
            let pm = mixv(&p, &p2);
            let lhs = stage_payoff(&g, &pm, &q, &x, &y);
            let rhs = t * stage_payoff(&g, &p, &q, &x, &y) + (1.0 - t) * stage_payoff(&g, &p2, &q, &x, &y);
            proptest::prop_assert!((lhs - rhs).abs() < 1e-10);
            let qm = mixv(&q, &q2);
            let lhs = stage_payoff(&g, &p, &qm, &x, &y);
            let rhs = t * stage_payoff(&g, &p, &q, &x, &y) + (1.0 - t) * stage_payoff(&g, &p, &q2, &x, &y);
            proptest::prop_assert!((lhs - rhs).abs() < 1e-10);
            let xm = BehavioralAction::from_flat(2, 2, mixv(x.as_flat(), x2.as_flat()));
            let lhs = stage_payoff(&g, &p, &q, &xm, &y);
            let rhs = t * stage_payoff(&g, &p, &q, &x, &y) + (1.0 - t) * stage_payoff(&g, &p, &q, &x2, &y);
            proptest::prop_assert!((lhs - rhs).abs() < 1e-10);
            let ym = BehavioralAction::from_flat(2, 2, mixv(y.as_flat(), y2.as_flat()));
            let lhs = stage_payoff(&g, &p, &q, &x, &ym);
            let rhs = t * stage_payoff(&g, &p, &q, &x, &y) + (1.0 - t) * stage_payoff(&g, &p, &q, &x, &y2);
            proptest::prop_assert!((lhs - rhs).abs() < 1e-10);
            proptest::prop_assert!(advance(&p, g.m()).iter().zip(g.m().left_mul(&p)).all(|(a, b)| a == &b));
        }
    }
}
