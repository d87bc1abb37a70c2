//! Finite Markov chains: recurrence classes, invariant measures, the limit
//! projection `B`, the class-mass decomposition of beliefs and the
//! quasi-metric `S` built on it.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::grid::SimplexGrid;
use crate::linalg::{self, l1};
use crate::table::ValueTable;

/// Tolerance used to validate stochastic rows and beliefs.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Class masses at or below this threshold count as zero in `S`.
pub const MASS_EPS: f64 = 1e-12;

/// Square row-stochastic matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    size: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::NotStochastic {
                row: 0,
                reason: "matrix is empty".into(),
            });
        }
        let mut data = Vec::with_capacity(size * size);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::NotStochastic {
                    row: r,
                    reason: format!("has {} entries, expected {size}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(size, data)
    }

    pub fn from_flat(size: usize, data: Vec<f64>) -> Result<Self> {
        if size == 0 || data.len() != size * size {
            return Err(Error::NotStochastic {
                row: 0,
                reason: "shape is not square".into(),
            });
        }
        for r in 0..size {
            let row = &data[r * size..(r + 1) * size];
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
                return Err(Error::NotStochastic {
                    row: r,
                    reason: format!("has entry {v} outside [0,1]"),
                });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic {
                    row: r,
                    reason: format!("sums to {s}"),
                });
            }
        }
        Ok(Self { size, data })
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    /// `p · M` for a row vector `p`.
    pub fn left_mul(&self, p: &[f64]) -> Vec<f64> {
        linalg::vec_mat(p, &self.data, self.size)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            size: self.size,
            data: linalg::mat_mul(&self.data, &other.data, self.size),
        }
    }

    pub fn pow(&self, mut e: usize) -> Self {
        let mut base = self.clone();
        let mut acc = Self::identity(self.size);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        linalg::sup_dist(&self.data, &other.data)
    }
}

/// A probability vector over a finite state set.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidBelief("empty".into()));
        }
        if let Some(v) = coords.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidBelief(format!("entry {v} is negative")));
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidBelief(format!("sums to {s}")));
        }
        Ok(Self(coords))
    }

    /// Clamps tiny negative entries and renormalizes; for vectors produced
    /// by arithmetic that is exact up to rounding.
    pub fn normalized(mut coords: Vec<f64>) -> Self {
        for c in coords.iter_mut() {
            if *c < 0.0 {
                *c = 0.0;
            }
        }
        let s: f64 = coords.iter().sum();
        if s > 0.0 {
            coords.iter_mut().for_each(|c| *c /= s);
        }
        Self(coords)
    }

    pub fn dirac(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Self(v)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Belief {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Recurrence structure of a chain together with its limit projection.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub matrix: StochasticMatrix,
    /// Recurrence classes, each sorted ascending, ordered by smallest state.
    pub classes: Vec<Vec<usize>>,
    pub invariant_measures: Vec<Belief>,
    pub limit_matrix: StochasticMatrix,
    /// Least common multiple of the class periods.
    pub period: usize,
    pub class_periods: Vec<usize>,
    pub transient: Vec<usize>,
    class_of: Vec<Option<usize>>,
}

/// Class masses `λ(p)` and class-conditional beliefs `p_{|r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaDecomposition {
    pub lambda: Vec<f64>,
    pub conditionals: Vec<Vec<f64>>,
}

impl LambdaDecomposition {
    pub fn recombine(&self) -> Vec<f64> {
        let n = self.conditionals[0].len();
        let mut p = vec![0.0; n];
        for (l, c) in self.lambda.iter().zip(&self.conditionals) {
            for (pk, ck) in p.iter_mut().zip(c) {
                *pk += l * ck;
            }
        }
        p
    }
}

impl ChainAnalysis {
    pub fn has_transient(&self) -> bool {
        !self.transient.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.matrix.size()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, k: usize) -> Option<usize> {
        self.class_of[k]
    }

    /// `p · B`.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        self.limit_matrix.left_mul(p)
    }

    /// `λ(p)`: the mass `p` puts on each recurrence class.
    pub fn class_masses(&self, p: &[f64]) -> Vec<f64> {
        self.classes
            .iter()
            .map(|c| c.iter().map(|&k| p[k]).sum())
            .collect()
    }

    /// The invariant belief `Σ_r λ^r p*(r)` with prescribed class masses.
    pub fn lift(&self, lambda: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.num_states()];
        for (l, m) in lambda.iter().zip(&self.invariant_measures) {
            for (pk, mk) in p.iter_mut().zip(m.iter()) {
                *pk += l * mk;
            }
        }
        p
    }

    pub fn require_recurrent(&self) -> Result<()> {
        if self.has_transient() {
            Err(Error::TransientState {
                states: self.transient.clone(),
            })
        } else {
            Ok(())
        }
    }

    pub fn require_aperiodic(&self) -> Result<()> {
        if self.period > 1 {
            Err(Error::PeriodicChain {
                period: self.period,
            })
        } else {
            Ok(())
        }
    }
}

/// Tarjan's strongly connected components on the digraph of positive entries.
fn strongly_connected(m: &StochasticMatrix) -> Vec<Vec<usize>> {
    struct State<'a> {
        m: &'a StochasticMatrix,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for w in 0..s.m.size() {
            if s.m.get(v, w) <= 0.0 {
                continue;
            }
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }

    let n = m.size();
    let mut s = State {
        m,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// Period of a closed class: gcd of `level(u) + 1 - level(v)` over its edges.
fn class_period(m: &StochasticMatrix, class: &[usize]) -> usize {
    let n = m.size();
    let mut level = vec![usize::MAX; n];
    level[class[0]] = 0;
    let mut queue = std::collections::VecDeque::from([class[0]]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in class {
            if m.get(u, v) <= 0.0 {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let d = (level[u] + 1).abs_diff(level[v]);
                g = linalg::gcd(g, d);
            }
        }
    }
    g.max(1)
}

/// Stationary distribution of the chain restricted to a closed class.
fn class_invariant(m: &StochasticMatrix, class: &[usize]) -> Vec<f64> {
    let c = class.len();
    // columns of (M_C - I)^T, with the last equation replaced by normalization
    let mut a = vec![0.0; c * c];
    let mut b = vec![0.0; c];
    for (row, &j) in class.iter().enumerate() {
        for (col, &i) in class.iter().enumerate() {
            a[row * c + col] = m.get(i, j) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for col in 0..c {
        a[(c - 1) * c + col] = 1.0;
    }
    b[c - 1] = 1.0;
    let x = linalg::solve(&a, &b, c).expect("irreducible class has a unique invariant measure");
    let mut p = vec![0.0; m.size()];
    for (&k, &v) in class.iter().zip(&x) {
        p[k] = if v < 0.0 && v > -STOCHASTIC_TOL { 0.0 } else { v };
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Recurrence classes, invariant measures, limit matrix and period of `M`.
///
/// With `allow_transient` the limit (Cesàro) matrix also covers transient
/// rows through absorption probabilities; otherwise transient states are an
/// error.
pub fn analyze_chain(m: &StochasticMatrix, allow_transient: bool) -> Result<ChainAnalysis> {
    let n = m.size();
    let sccs = strongly_connected(m);
    let mut classes = Vec::new();
    let mut transient = Vec::new();
    for comp in sccs {
        let closed = comp
            .iter()
            .all(|&u| (0..n).all(|v| m.get(u, v) <= 0.0 || comp.contains(&v)));
        if closed {
            classes.push(comp);
        } else {
            transient.extend(comp);
        }
    }
    transient.sort_unstable();
    if !transient.is_empty() && !allow_transient {
        return Err(Error::TransientState { states: transient });
    }
    classes.sort_by_key(|c| c[0]);
    let mut class_of = vec![None; n];
    for (r, c) in classes.iter().enumerate() {
        for &k in c {
            class_of[k] = Some(r);
        }
    }
    let invariant: Vec<Vec<f64>> = classes.iter().map(|c| class_invariant(m, c)).collect();
    let class_periods: Vec<usize> = classes.iter().map(|c| class_period(m, c)).collect();
    let period = class_periods.iter().fold(1, |acc, &p| linalg::lcm(acc, p));

    let mut limit = vec![0.0; n * n];
    for k in 0..n {
        if let Some(r) = class_of[k] {
            limit[k * n..(k + 1) * n].copy_from_slice(&invariant[r]);
        }
    }
    if !transient.is_empty() {
        // absorption probabilities h_r = (I - Q)^{-1} R_r on transient states
        let t = transient.len();
        let mut a = vec![0.0; t * t];
        for (i, &u) in transient.iter().enumerate() {
            for (j, &v) in transient.iter().enumerate() {
                a[i * t + j] = if i == j { 1.0 } else { 0.0 } - m.get(u, v);
            }
        }
        for (r, c) in classes.iter().enumerate() {
            let b: Vec<f64> = transient
                .iter()
                .map(|&u| c.iter().map(|&v| m.get(u, v)).sum())
                .collect();
            let h = linalg::solve(&a, &b, t).expect("transient block is invertible");
            for (i, &u) in transient.iter().enumerate() {
                for k in 0..n {
                    limit[u * n + k] += h[i] * invariant[r][k];
                }
            }
        }
    }
    let limit_matrix = StochasticMatrix {
        size: n,
        data: limit,
    };
    Ok(ChainAnalysis {
        matrix: m.clone(),
        classes,
        invariant_measures: invariant.into_iter().map(Belief).collect(),
        limit_matrix,
        period,
        class_periods,
        transient,
        class_of,
    })
}

/// `M^{T0}` where `T0` is the period of the chain; aperiodic on every class.
pub fn aperiodic_lift(analysis: &ChainAnalysis) -> StochasticMatrix {
    analysis.matrix.pow(analysis.period)
}

/// Splits `p` into class masses and class-conditional beliefs. A class with
/// zero mass gets its invariant measure as conditional.
///
/// Panics if the chain has transient states.
pub fn lambda_decompose(p: &[f64], analysis: &ChainAnalysis) -> LambdaDecomposition {
    assert!(
        !analysis.has_transient(),
        "class decomposition needs a recurrent chain"
    );
    let lambda = analysis.class_masses(p);
    let conditionals = analysis
        .classes
        .iter()
        .enumerate()
        .map(|(r, c)| {
            if lambda[r] > 0.0 {
                let mut v = vec![0.0; p.len()];
                for &k in c {
                    v[k] = p[k] / lambda[r];
                }
                v
            } else {
                analysis.invariant_measures[r].to_vec()
            }
        })
        .collect();
    LambdaDecomposition {
        lambda,
        conditionals,
    }
}

/// The quasi-metric `S(p, p')`.
pub fn s_value(p: &[f64], p2: &[f64], analysis: &ChainAnalysis) -> f64 {
    let a = lambda_decompose(p, analysis);
    let b = lambda_decompose(p2, analysis);
    let mut s = l1(&a.lambda, &b.lambda);
    for r in 0..analysis.num_classes() {
        if a.lambda[r] * b.lambda[r] > MASS_EPS {
            s += b.lambda[r] * l1(&a.conditionals[r], &b.conditionals[r]);
        }
    }
    s
}

/// Largest `|f(p,q) - f(pM, qN)|` over the table grid.
pub fn balanced_residual(f: &ValueTable, chain_k: &ChainAnalysis, chain_l: &ChainAnalysis) -> f64 {
    let gp = f.grid_p();
    let gq = f.grid_q();
    let moved_q: Vec<Vec<f64>> = (0..gq.len())
        .map(|j| chain_l.matrix.left_mul(gq.point(j)))
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..gp.len() {
        let pm = chain_k.matrix.left_mul(gp.point(i));
        for (j, qn) in moved_q.iter().enumerate() {
            worst = worst.max((f.at(i, j) - f.eval(&pm, qn)).abs());
        }
    }
    worst
}

/// Checks `|f(p,q) - f(pM,qN)| <= tol` on the grid; returns the verdict and
/// the largest residual.
pub fn is_balanced(
    f: &ValueTable,
    chain_k: &ChainAnalysis,
    chain_l: &ChainAnalysis,
    tol: f64,
) -> (bool, f64) {
    let r = balanced_residual(f, chain_k, chain_l);
    (r <= tol, r)
}

/// Beliefs with class masses `p_star`, gridded at `resolution` inside each
/// class simplex. Classes with zero mass contribute their invariant measure
/// only.
pub fn fiber_grid(p_star: &[f64], resolution: usize, analysis: &ChainAnalysis) -> Vec<Vec<f64>> {
    let n = analysis.num_states();
    let per_class: Vec<Vec<Vec<f64>>> = analysis
        .classes
        .iter()
        .enumerate()
        .map(|(r, c)| {
            if resolution == 0 || p_star[r] <= MASS_EPS || c.len() == 1 {
                vec![analysis.invariant_measures[r].to_vec()]
            } else {
                let g = SimplexGrid::new(c.len(), resolution);
                (0..g.len())
                    .map(|i| {
                        let mut v = vec![0.0; n];
                        for (&k, &x) in c.iter().zip(g.point(i)) {
                            v[k] = x;
                        }
                        v
                    })
                    .collect()
            }
        })
        .collect();
    let mut out = vec![vec![0.0; n]];
    for (r, options) in per_class.iter().enumerate() {
        let w = p_star[r];
        let mut next = Vec::with_capacity(out.len() * options.len());
        for base in &out {
            for opt in options {
                let mut v = base.clone();
                for (vk, ok) in v.iter_mut().zip(opt) {
                    *vk += w * ok;
                }
                next.push(v);
            }
        }
        out = next;
    }
    out
}
