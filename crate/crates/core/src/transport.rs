//! Transport of finite-support measures on simplices: proportional mass
//! routing, the affine map between class-mass fibers, their combination on
//! measures with fixed class masses, L¹-Wasserstein distance and the convex
//! order.

use crate::error::{Error, Result};
use crate::linalg::l1;
use crate::lp::{lp_solve, Cmp, LinearProgram};
use crate::markov::{lambda_decompose, ChainAnalysis};

/// A probability measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    pub atoms: Vec<(f64, Vec<f64>)>,
}

impl FiniteMeasure {
    pub fn new(atoms: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidBelief("measure has no atoms".into()));
        }
        let dim = atoms[0].1.len();
        if atoms.iter().any(|(w, a)| *w < 0.0 || !w.is_finite() || a.len() != dim) {
            return Err(Error::InvalidBelief("bad atom weight or dimension".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.0).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidBelief(format!("weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(p: &[f64]) -> Self {
        Self {
            atoms: vec![(1.0, p.to_vec())],
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.atoms[0].1.len()];
        for (w, a) in &self.atoms {
            for (x, y) in m.iter_mut().zip(a) {
                *x += w * y;
            }
        }
        m
    }
}

/// Moves sources with barycenter `p` to new points with barycenter `target`
/// so that `Σ λ_s ‖p_s - p'_s‖₁ = ‖p - target‖₁`.
///
/// Where the target is below `p`, each source sheds in proportion to its
/// own holding; the shed mass is redistributed over the coordinates where
/// the target is above `p`, in proportion to the surplus.
pub fn laraki_transport(weights: &[f64], sources: &[Vec<f64>], target: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = target.len();
    let mut p = vec![0.0; n];
    for (w, s) in weights.iter().zip(sources) {
        for (a, b) in p.iter_mut().zip(s) {
            *a += w * b;
        }
    }
    let wsum: f64 = weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-10 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::BadCombination((wsum - 1.0).abs()));
    }
    let d: Vec<f64> = target.iter().zip(&p).map(|(t, q)| t - q).collect();
    let delta: f64 = d.iter().filter(|x| **x > 0.0).sum();
    if delta <= 0.0 {
        return Ok(sources.to_vec());
    }
    if d.iter().zip(&p).any(|(dk, pk)| *dk < 0.0 && *pk <= 0.0) {
        return Err(Error::BadCombination(delta));
    }
    Ok(sources
        .iter()
        .map(|s| {
            let mut out = s.clone();
            let mut shed = 0.0;
            for k in 0..n {
                if d[k] < 0.0 {
                    let m = s[k] * (-d[k]) / p[k];
                    out[k] -= m;
                    shed += m;
                }
            }
            for k in 0..n {
                if d[k] > 0.0 {
                    out[k] += shed * d[k] / delta;
                }
            }
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            out
        })
        .collect())
}

/// `L(p) = Σ_r to^r p_{|r}`: moves `p` from the fiber `λ = from` to the
/// fiber `λ = to` keeping every class-conditional belief.
pub fn affine_fiber_map(p: &[f64], from: &[f64], to: &[f64], analysis: &ChainAnalysis) -> Result<Vec<f64>> {
    analysis.require_recurrent()?;
    let d = lambda_decompose(p, analysis);
    let err = l1(&d.lambda, from);
    if err > 1e-10 {
        return Err(Error::FiberMismatch(err));
    }
    let mut out = vec![0.0; p.len()];
    for (t, c) in to.iter().zip(&d.conditionals) {
        for (o, x) in out.iter_mut().zip(c) {
            *o += t * x;
        }
    }
    Ok(out)
}

/// Whether every atom of `mu` has the class masses of its mean.
pub fn in_h(mu: &FiniteMeasure, analysis: &ChainAnalysis, tol: f64) -> bool {
    let lam = analysis.class_masses(&mu.mean());
    mu.atoms
        .iter()
        .all(|(_, a)| l1(&analysis.class_masses(a), &lam) <= tol)
}

/// Transports `mu` (all atoms on the fiber of its mean `p`) to a measure
/// with mean `target` whose atoms share `λ(target)`, with
/// `Σ α_n S(p_n, p'_n) = S(p, target)`.
pub fn h_transport(mu: &FiniteMeasure, target: &[f64], analysis: &ChainAnalysis) -> Result<FiniteMeasure> {
    analysis.require_recurrent()?;
    if !in_h(mu, analysis, 1e-10) {
        return Err(Error::NotInH("atoms do not share the class masses of the mean".into()));
    }
    let p = mu.mean();
    let from = analysis.class_masses(&p);
    let to = analysis.class_masses(target);
    let moved: Vec<Vec<f64>> = mu
        .atoms
        .iter()
        .map(|(_, a)| affine_fiber_map(a, &from, &to, analysis))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = mu.atoms.iter().map(|a| a.0).collect();
    let target_d = lambda_decompose(target, analysis);
    let conds: Vec<_> = moved.iter().map(|a| lambda_decompose(a, analysis)).collect();
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; target.len()]; moved.len()];
    for r in 0..analysis.num_classes() {
        if to[r] <= 0.0 {
            continue;
        }
        let sources: Vec<Vec<f64>> = conds.iter().map(|c| c.conditionals[r].clone()).collect();
        let routed = laraki_transport(&weights, &sources, &target_d.conditionals[r])?;
        for (o, c) in out.iter_mut().zip(&routed) {
            for (x, y) in o.iter_mut().zip(c) {
                *x += to[r] * y;
            }
        }
    }
    Ok(FiniteMeasure {
        atoms: weights.into_iter().zip(out).collect(),
    })
}

/// L¹-Wasserstein distance between finite measures by the transport LP.
pub fn wasserstein_l1(mu: &FiniteMeasure, nu: &FiniteMeasure) -> Result<f64> {
    let (m, n) = (mu.atoms.len(), nu.atoms.len());
    let mut cost = Vec::with_capacity(m * n);
    for (_, a) in &mu.atoms {
        for (_, b) in &nu.atoms {
            cost.push(-l1(a, b));
        }
    }
    let mut lp = LinearProgram::maximize(cost);
    for (i, (w, _)) in mu.atoms.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        row[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        lp.push(row, Cmp::Eq, *w);
    }
    for (j, (w, _)) in nu.atoms.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        lp.push(row, Cmp::Eq, *w);
    }
    Ok(-lp_solve(&lp)?.value)
}

/// `μ ≤ ν` in the convex order: a dilation carries `μ` onto `ν` keeping
/// each atom as the barycenter of its image.
pub fn convex_order_check(mu: &FiniteMeasure, nu: &FiniteMeasure) -> Result<bool> {
    let (m, n) = (mu.atoms.len(), nu.atoms.len());
    let dim = mu.atoms[0].1.len();
    let mut lp = LinearProgram::maximize(vec![0.0; m * n]);
    for (i, (w, a)) in mu.atoms.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        row[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        lp.push(row, Cmp::Eq, *w);
        for k in 0..dim {
            let mut row = vec![0.0; m * n];
            for (j, (_, b)) in nu.atoms.iter().enumerate() {
                row[i * n + j] = b[k];
            }
            lp.push(row, Cmp::Eq, w * a[k]);
        }
    }
    for (j, (w, _)) in nu.atoms.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        lp.push(row, Cmp::Eq, *w);
    }
    match lp_solve(&lp) {
        Ok(_) => Ok(true),
        Err(Error::Infeasible) => Ok(false),
        Err(e) => Err(e),
    }
}
