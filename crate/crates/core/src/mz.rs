//! Concavification in `p`, convexification in `q`, the Mertens–Zamir
//! fixed point and the splittings that realize concave envelopes.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SimplexGrid;
use crate::lp::{lp_solve, Cmp, LinearProgram};
use crate::markov::ChainAnalysis;
use crate::table::ValueTable;

/// A finite convex decomposition of a belief.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    pub atoms: Vec<(f64, Vec<f64>)>,
}

impl Splitting {
    pub fn trivial(p: &[f64]) -> Self {
        Self {
            atoms: vec![(1.0, p.to_vec())],
        }
    }

    pub fn barycenter(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.atoms[0].1.len()];
        for (w, a) in &self.atoms {
            for (o, x) in out.iter_mut().zip(a) {
                *o += w * x;
            }
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).sum()
    }
}

/// Maximum of `Σ ω_a values[a]` over convex combinations of grid points
/// with barycenter `p`, together with the optimal atoms (a basic solution,
/// so at most `|supp p|` of them).
pub fn concavify_at(grid: &SimplexGrid, values: &[f64], p: &[f64]) -> Result<(f64, Splitting)> {
    let support: Vec<usize> = (0..p.len()).filter(|&k| p[k] > 0.0).collect();
    let atoms: Vec<usize> = (0..grid.len())
        .filter(|&a| grid.point(a).iter().zip(p).all(|(x, pk)| *pk > 0.0 || *x <= 0.0))
        .collect();
    let mut lp = LinearProgram::maximize(atoms.iter().map(|&a| values[a]).collect());
    for &k in &support {
        lp.push(atoms.iter().map(|&a| grid.point(a)[k]).collect(), Cmp::Eq, p[k]);
    }
    let sol = match lp_solve(&lp) {
        Ok(s) => s,
        // off-grid targets near a face can leave no admissible atoms
        Err(Error::Infeasible) => return Err(Error::PreconditionViolated("no grid atoms around the target".into())),
        Err(e) => return Err(e),
    };
    let mut split: Vec<(f64, Vec<f64>)> = sol
        .x
        .iter()
        .zip(&atoms)
        .filter(|(w, _)| **w > 1e-13)
        .map(|(w, &a)| (*w, grid.point(a).to_vec()))
        .collect();
    let total: f64 = split.iter().map(|s| s.0).sum();
    split.iter_mut().for_each(|s| s.0 /= total);
    Ok((sol.value, Splitting { atoms: split }))
}

/// Smallest function concave in `p` above `f`, at every grid point.
pub fn cav_i(f: &ValueTable) -> Result<ValueTable> {
    let gp = f.grid_p();
    let (np, nq) = (gp.len(), f.grid_q().len());
    let cols: Vec<Result<Vec<f64>>> = (0..nq)
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = (0..np).map(|i| f.at(i, j)).collect();
            (0..np)
                .map(|i| concavify_at(gp, &column, gp.point(i)).map(|r| r.0.max(column[i])))
                .collect()
        })
        .collect();
    let mut out = f.clone();
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// `cav_I f(·, q_j)` at the `p`-grid for one grid column.
pub fn cav_i_slice(f: &ValueTable, j: usize) -> Result<Vec<f64>> {
    let gp = f.grid_p();
    let column: Vec<f64> = (0..gp.len()).map(|i| f.at(i, j)).collect();
    (0..gp.len())
        .map(|i| concavify_at(gp, &column, gp.point(i)).map(|r| r.0.max(column[i])))
        .collect()
}

/// Largest function convex in `q` below `f`: `-cav_II(-f)`.
pub fn vex_ii(f: &ValueTable) -> Result<ValueTable> {
    let neg_t = f.transposed().map(|v| -v);
    Ok(cav_i(&neg_t)?.map(|v| -v).transposed())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzOptions {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct MzSolution {
    pub w: ValueTable,
    /// `‖w - vex_II Max(w,f)‖_∞`.
    pub residual_vex: f64,
    /// `‖w - cav_I Min(w,f)‖_∞`.
    pub residual_cav: f64,
    pub iterations: usize,
}

/// `(‖w - vex_II Max(w,f)‖, ‖w - cav_I Min(w,f)‖)`.
pub fn mz_residuals(w: &ValueTable, f: &ValueTable) -> Result<(f64, f64)> {
    let a = vex_ii(&w.zip_with(f, f64::max))?;
    let b = cav_i(&w.zip_with(f, f64::min))?;
    Ok((w.sup_dist(&a), w.sup_dist(&b)))
}

/// Alternates `w ← vex_II Max(w,f)` and `w ← cav_I Min(w,f)` from `w0`
/// (default `f`) until both equations hold within `tol`.
pub fn mz_fixed_point(f: &ValueTable, w0: Option<&ValueTable>, opts: &MzOptions) -> Result<MzSolution> {
    let mut w = w0.cloned().unwrap_or_else(|| f.clone());
    let mut last = (f64::INFINITY, f64::INFINITY);
    for it in 0..opts.max_iter {
        let (rv, rc) = mz_residuals(&w, f)?;
        last = (rv, rc);
        if rv <= opts.tol && rc <= opts.tol {
            return Ok(MzSolution {
                w,
                residual_vex: rv,
                residual_cav: rc,
                iterations: it,
            });
        }
        let a = vex_ii(&w.zip_with(f, f64::max))?;
        w = cav_i(&a.zip_with(f, f64::min))?;
    }
    Err(Error::NotConverged {
        last: Box::new(w),
        residual_vex: last.0,
        residual_cav: last.1,
    })
}

/// `w(p,q) = w*(λ(p), λ(q))` on product grids of the given resolution.
pub fn balanced_lift(
    w_star: &ValueTable,
    chain_k: &ChainAnalysis,
    chain_l: &ChainAnalysis,
    resolution: usize,
) -> ValueTable {
    let gp = Arc::new(SimplexGrid::new(chain_k.num_states(), resolution));
    let gq = Arc::new(SimplexGrid::new(chain_l.num_states(), resolution));
    let mut t = ValueTable::from_fn(gp, gq, w_star.lipschitz, |p, q| {
        w_star.eval(&chain_k.class_masses(p), &chain_l.class_masses(q))
    });
    t.solver_gap = w_star.solver_gap;
    t
}

/// Membership in `C⁺(f)`: `w` is I-concave and `w ≥ vex_II Max(w,f)`.
/// Returns the verdict and the worst residual.
pub fn membership_c_plus(w: &ValueTable, f: &ValueTable, tol: f64) -> Result<(bool, f64)> {
    let concavity = cav_i(w)?.sup_dist(w);
    let lower = vex_ii(&w.zip_with(f, f64::max))?;
    let excess = lower
        .values()
        .iter()
        .zip(w.values())
        .fold(0.0f64, |m, (l, v)| m.max(l - v));
    let r = concavity.max(excess);
    Ok((r <= tol, r))
}

/// Membership in `C⁻(f)`: `w` is II-convex and `w ≤ cav_I Min(w,f)`.
pub fn membership_c_minus(w: &ValueTable, f: &ValueTable, tol: f64) -> Result<(bool, f64)> {
    let convexity = vex_ii(w)?.sup_dist(w);
    let upper = cav_i(&w.zip_with(f, f64::min))?;
    let excess = upper
        .values()
        .iter()
        .zip(w.values())
        .fold(0.0f64, |m, (u, v)| m.max(v - u));
    let r = convexity.max(excess);
    Ok((r <= tol, r))
}

/// A splitting `p = Σ α_m p_m` with `w(p_m,q) ≤ f(p_m,q)` at every atom
/// and `Σ α_m w(p_m,q) ≥ w(p,q)`, read from the optimal basis of the
/// concavification of `Min(w,f)(·,q)`.
pub fn splitting_for_cav(w: &ValueTable, f: &ValueTable, p: &[f64], q: &[f64], tol: f64) -> Result<Splitting> {
    let here_w = w.eval(p, q);
    if here_w <= f.eval(p, q) + tol {
        return Ok(Splitting::trivial(p));
    }
    let gp = w.grid_p();
    let mins: Vec<f64> = (0..gp.len())
        .map(|a| w.eval(gp.point(a), q).min(f.eval(gp.point(a), q)))
        .collect();
    let (value, split) = concavify_at(gp, &mins, p)?;
    if here_w > value + tol {
        return Err(Error::PreconditionViolated(format!(
            "w(p,q) = {here_w:.6} exceeds cav Min(w,f) = {value:.6}"
        )));
    }
    for (_, pm) in &split.atoms {
        let (wm, fm) = (w.eval(pm, q), f.eval(pm, q));
        if wm > fm + tol {
            return Err(Error::PreconditionViolated(format!(
                "atom with w = {wm:.6} above f = {fm:.6}"
            )));
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{analyze_chain, StochasticMatrix};
    use proptest::prelude::*;

    fn grids(k: usize, l: usize, n: usize) -> (Arc<SimplexGrid>, Arc<SimplexGrid>) {
        ValueTable::grids(k, l, n)
    }

    #[test]
    fn concave_functions_are_fixed() {
        let (gp, gq) = grids(3, 2, 6);
        let f = ValueTable::from_fn(gp, gq, 1.0, |p, q| -(p[0] - 0.3).powi(2) - p[1] * p[1] + q[0]);
        let c = cav_i(&f).unwrap();
        assert!(c.sup_dist(&f) < 1e-12);
    }

    #[test]
    fn remark_function_vanishes_at_the_absorbing_vertex() {
        let (gp, gq) = grids(3, 1, 30);
        let f = ValueTable::from_fn(gp, gq, 1.0, |p, _| (p[1] - 1.0 / 3.0).max(0.0));
        let c = cav_i(&f).unwrap();
        let i = c.grid_p().find(&[0.0, 0.0, 1.0]).unwrap();
        assert!(c.at(i, 0).abs() < 1e-12);
    }

    #[test]
    fn convexification_duality() {
        let (gp, gq) = grids(2, 3, 5);
        let f = ValueTable::from_fn(gp, gq, 1.0, |p, q| (7.0 * p[0] * q[1]).sin() - q[2] * q[0]);
        let lhs = vex_ii(&f.map(|v| -v)).unwrap();
        let cav_ii = cav_i(&f.transposed()).unwrap().transposed();
        assert!(lhs.sup_dist(&cav_ii.map(|v| -v)) < 1e-12);
    }

    #[test]
    fn hand_lp_convexification() {
        // f(q) = |q^0 - 1/2| on a line has affine-free convex shape; its
        // concave part 1 - 2|q^0 - 1/2| convexifies to the chord 0.
        let (gp, gq) = grids(1, 2, 4);
        let f = ValueTable::from_fn(gp, gq, 2.0, |_, q| 1.0 - 2.0 * (q[0] - 0.5).abs());
        let v = vex_ii(&f).unwrap();
        assert!(v.values().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn one_sided_fixed_point_is_the_concavification() {
        let (gp, gq) = grids(2, 1, 10);
        let f = ValueTable::from_fn(gp, gq, 1.0, |p, _| (6.0 * p[0]).sin() * 0.5);
        let mz = mz_fixed_point(&f, None, &MzOptions { tol: 1e-9, max_iter: 20 }).unwrap();
        assert!(mz.w.sup_dist(&cav_i(&f).unwrap()) < 1e-9);
    }

    #[test]
    fn fixed_point_is_sandwiched_and_unique() {
        let (gp, gq) = grids(2, 2, 8);
        let f = ValueTable::from_fn(gp, gq, 1.0, |p, q| {
            0.6 * (5.0 * p[0]).sin() * (4.0 * q[0] + 1.0).cos() + 0.3 * (p[0] - q[0])
        });
        let opts = MzOptions { tol: 1e-7, max_iter: 200 };
        let a = mz_fixed_point(&f, None, &opts).unwrap();
        let up = ValueTable::constant(f.shared_grids().0, f.shared_grids().1, 1.0);
        let down = up.map(|v| -v);
        let b = mz_fixed_point(&f, Some(&up), &opts).unwrap();
        let c = mz_fixed_point(&f, Some(&down), &opts).unwrap();
        assert!(a.w.sup_dist(&b.w) <= 2e-7 && a.w.sup_dist(&c.w) <= 2e-7);
        let lo = vex_ii(&f).unwrap();
        let hi = cav_i(&f).unwrap();
        for ((l, w), h) in lo.values().iter().zip(a.w.values()).zip(hi.values()) {
            assert!(*l <= w + 1e-7 && *w <= h + 1e-7);
        }
        assert!(membership_c_plus(&a.w, &f, 1e-6).unwrap().0);
        assert!(membership_c_minus(&a.w, &f, 1e-6).unwrap().0);
    }

    #[test]
    fn membership_edge_cases() {
        let (gp, gq) = grids(2, 2, 6);
        let f = ValueTable::from_fn(gp.clone(), gq.clone(), 1.0, |p, q| (p[0] - 0.5).abs() - q[0] * 0.2);
        let top = ValueTable::constant(gp, gq, 1.0);
        assert!(membership_c_plus(&top, &f, 1e-9).unwrap().0);
        let (ok, r) = membership_c_plus(&f, &f, 1e-9).unwrap();
        assert!(!ok && r > 0.1);
    }

    #[test]
    fn balanced_lift_depends_on_class_masses_only() {
        let m = StochasticMatrix::new(vec![
            vec![2.0 / 3.0, 1.0 / 3.0, 0.0],
            vec![1.0 / 3.0, 2.0 / 3.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let an = analyze_chain(&m, false).unwrap();
        let (cp, cq) = grids(2, 2, 4);
        let w_star = ValueTable::from_fn(cp.clone(), cq.clone(), 1.0, |a, b| 0.7 * a[0] - 0.2 * b[1]);
        let w = balanced_lift(&w_star, &an, &an, 6);
        let q = [0.5, 0.0, 0.5];
        let v1 = w.eval(&[0.1, 0.4, 0.5], &q);
        let v2 = w.eval(&[0.4, 0.1, 0.5], &q);
        assert!((v1 - v2).abs() < 1e-12);
        assert!((v1 - (0.7 * 0.5 - 0.2 * 0.5)).abs() < 1e-12);
        let constant = balanced_lift(&ValueTable::constant(cp, cq, 0.4), &an, &an, 4);
        assert!(constant.values().iter().all(|v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn trivial_splitting_when_w_below_f() {
        let (gp, gq) = grids(2, 2, 4);
        let f = ValueTable::constant(gp.clone(), gq.clone(), 0.5);
        let w = ValueTable::constant(gp, gq, 0.0);
        let s = splitting_for_cav(&w, &f, &[0.3, 0.7], &[0.5, 0.5], 1e-9).unwrap();
        assert_eq!(s.atoms, vec![(1.0, vec![0.3, 0.7])]);
    }

    proptest! {
        #[test]
        fn cav_is_idempotent_and_above(vals in prop::collection::vec(-1.0f64..1.0, 21 * 6)) {
            let (gp, gq) = grids(3, 2, 5);
            let f = ValueTable::new(gp, gq, vals, 1.0);
            let c = cav_i(&f).unwrap();
            prop_assert!(c.values().iter().zip(f.values()).all(|(a, b)| a >= &(b - 1e-12)));
            prop_assert!(cav_i(&c).unwrap().sup_dist(&c) < 1e-9);
            let v = vex_ii(&f).unwrap();
            prop_assert!(v.values().iter().zip(f.values()).all(|(a, b)| a <= &(b + 1e-12)));
            prop_assert!(vex_ii(&v).unwrap().sup_dist(&v) < 1e-9);
        }

        #[test]
        fn splittings_recombine(vals in prop::collection::vec(-1.0f64..1.0, 15), raw in prop::collection::vec(0.05f64..1.0, 3)) {
            let (gp, gq) = grids(3, 1, 4);
            let s: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let f = ValueTable::new(gp, gq, vals, 1.0);
            let w = cav_i(&f).unwrap();
            // w = cav f satisfies the precondition with Min(w,f) = f on atoms
            match splitting_for_cav(&w, &f, &p, &[1.0], 1e-9) {
                Ok(split) => {
                    prop_assert!(split.atoms.len() <= 3);
                    prop_assert!((split.total_weight() - 1.0).abs() < 1e-10);
                    let b = split.barycenter();
                    prop_assert!(crate::linalg::l1(&b, &p) < 1e-10);
                    let sw: f64 = split.atoms.iter().map(|(a, pm)| a * w.eval(pm, &[1.0])).sum();
                    prop_assert!(sw >= w.eval(&p, &[1.0]) - 1e-9);
                }
                Err(Error::PreconditionViolated(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}
