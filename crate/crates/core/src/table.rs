//! Functions on `Δ(K)×Δ(L)` stored on a product of simplex grids.

use std::sync::Arc;

use crate::grid::{Cell, SimplexGrid};

/// A function on `Δ(K)×Δ(L)` sampled on a product grid, interpolated
/// bilinearly across the two Kuhn subdivisions.
#[derive(Debug, Clone)]
pub struct ValueTable {
    grid_p: Arc<SimplexGrid>,
    grid_q: Arc<SimplexGrid>,
    values: Vec<f64>,
    /// Declared Lipschitz constant in each variable (L¹ norm).
    pub lipschitz: f64,
    /// Largest saddle gap left by the solver that produced the table.
    pub solver_gap: f64,
}

impl ValueTable {
    pub fn new(grid_p: Arc<SimplexGrid>, grid_q: Arc<SimplexGrid>, values: Vec<f64>, lipschitz: f64) -> Self {
        assert_eq!(values.len(), grid_p.len() * grid_q.len(), "table size");
        Self {
            grid_p,
            grid_q,
            values,
            lipschitz,
            solver_gap: 0.0,
        }
    }

    pub fn from_fn(
        grid_p: Arc<SimplexGrid>,
        grid_q: Arc<SimplexGrid>,
        lipschitz: f64,
        f: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(grid_p.len() * grid_q.len());
        for i in 0..grid_p.len() {
            for j in 0..grid_q.len() {
                values.push(f(grid_p.point(i), grid_q.point(j)));
            }
        }
        Self::new(grid_p, grid_q, values, lipschitz)
    }

    pub fn constant(grid_p: Arc<SimplexGrid>, grid_q: Arc<SimplexGrid>, c: f64) -> Self {
        let n = grid_p.len() * grid_q.len();
        Self::new(grid_p, grid_q, vec![c; n], 0.0)
    }

    /// Uniform grids at a common resolution.
    pub fn grids(k: usize, l: usize, resolution: usize) -> (Arc<SimplexGrid>, Arc<SimplexGrid>) {
        (
            Arc::new(SimplexGrid::new(k, resolution)),
            Arc::new(SimplexGrid::new(l, resolution)),
        )
    }

    pub fn grid_p(&self) -> &SimplexGrid {
        &self.grid_p
    }

    pub fn grid_q(&self) -> &SimplexGrid {
        &self.grid_q
    }

    pub fn shared_grids(&self) -> (Arc<SimplexGrid>, Arc<SimplexGrid>) {
        (self.grid_p.clone(), self.grid_q.clone())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid_q.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let nq = self.grid_q.len();
        self.values[i * nq + j] = v;
    }

    pub fn eval(&self, p: &[f64], q: &[f64]) -> f64 {
        let cp = self.grid_p.locate(p);
        let cq = self.grid_q.locate(q);
        self.eval_cells(&cp, &cq)
    }

    pub fn eval_cells(&self, cp: &Cell, cq: &Cell) -> f64 {
        let nq = self.grid_q.len();
        let mut s = 0.0;
        for &(i, wi) in cp {
            let row = &self.values[i * nq..(i + 1) * nq];
            for &(j, wj) in cq {
                s += wi * wj * row[j];
            }
        }
        s
    }

    /// Interpolation at `p` with `q` fixed to the grid point `j`.
    pub fn eval_p(&self, p: &[f64], j: usize) -> f64 {
        let nq = self.grid_q.len();
        self.grid_p
            .locate(p)
            .iter()
            .map(|&(i, w)| w * self.values[i * nq + j])
            .sum()
    }

    /// Interpolation at `q` with `p` fixed to the grid point `i`.
    pub fn eval_q(&self, i: usize, q: &[f64]) -> f64 {
        let nq = self.grid_q.len();
        self.grid_q
            .locate(q)
            .iter()
            .map(|&(j, w)| w * self.values[i * nq + j])
            .sum()
    }

    /// Worst-case error from evaluating a `lipschitz`-continuous function
    /// through the interpolant.
    pub fn interpolation_error(&self) -> f64 {
        self.lipschitz * (self.grid_p.mesh() + self.grid_q.mesh())
    }

    pub fn mesh(&self) -> f64 {
        self.grid_p.mesh() + self.grid_q.mesh()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "tables on different grids");
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(&other.values) {
            *v = f(*v, *o);
        }
        out
    }

    pub fn sup_dist(&self, other: &Self) -> f64 {
        crate::linalg::sup_dist(&self.values, &other.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Swaps the roles of the two variables: `(p,q) ↦ f(q,p)`.
    pub fn transposed(&self) -> Self {
        let (np, nq) = (self.grid_p.len(), self.grid_q.len());
        let mut values = vec![0.0; np * nq];
        for i in 0..np {
            for j in 0..nq {
                values[j * np + i] = self.values[i * nq + j];
            }
        }
        Self {
            grid_p: self.grid_q.clone(),
            grid_q: self.grid_p.clone(),
            values,
            lipschitz: self.lipschitz,
            solver_gap: self.solver_gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_functions_are_exact() {
        let (gp, gq) = ValueTable::grids(3, 2, 5);
        let f = |p: &[f64], q: &[f64]| (0.3 * p[0] - p[2]) * (q[0] - 0.5 * q[1]) + p[1];
        let t = ValueTable::from_fn(gp, gq, 1.0, f);
        let p = [0.13, 0.52, 0.35];
        let q = [0.71, 0.29];
        assert!((t.eval(&p, &q) - f(&p, &q)).abs() < 1e-12);
    }

    #[test]
    fn transpose_round_trip() {
        let (gp, gq) = ValueTable::grids(2, 3, 4);
        let t = ValueTable::from_fn(gp, gq, 1.0, |p, q| p[0] * q[2]);
        let tt = t.transposed();
        assert!((tt.eval(&[0.2, 0.3, 0.5], &[0.4, 0.6]) - 0.4 * 0.5).abs() < 1e-12);
        assert_eq!(tt.transposed().values(), t.values());
    }
}
