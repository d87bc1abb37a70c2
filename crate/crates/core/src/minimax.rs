//! Matrix games and saddle points of concave-convex objectives over
//! products of simplices.
//!
//! The saddle driver is a double-oracle loop: a finite set of candidate
//! strategies for each player is solved as a matrix game, and each side's
//! best response to the opponent's equilibrium mixture is added until the
//! two best-response values meet. Best-response values bracket the saddle
//! value, so the returned gap certifies the result.

use crate::error::{Error, Result};
use crate::game::BehavioralAction;
use crate::grid::SimplexGrid;
use crate::linalg;
use crate::lp::{lp_solve, Cmp, LinearProgram};

/// Payoff matrix, rows for the maximizer and columns for the minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
}

impl MatrixGame {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("matrix game must be a nonempty rectangle".into()));
        }
        let a: Vec<f64> = rows.into_iter().flatten().collect();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::LpFailure("matrix game has non-finite entries".into()));
        }
        Ok(Self { rows: r, cols: c, a })
    }

    pub fn from_flat(rows: usize, cols: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), rows * cols);
        Self { rows, cols, a }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    /// `-Aᵀ`: the same game seen from the other side.
    pub fn negated_transpose(&self) -> Self {
        let mut a = vec![0.0; self.a.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                a[j * self.rows + i] = -self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            a,
        }
    }
}

/// A saddle point estimate with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    pub value: f64,
    /// Guaranteed by `x_star` against every opponent response considered.
    pub lower: f64,
    /// Conceded by `y_star` against every maximizer response considered.
    pub upper: f64,
    pub gap: f64,
    pub x_star: BehavioralAction,
    pub y_star: BehavioralAction,
}

/// Mixed equilibrium of a finite matrix game.
#[derive(Debug, Clone)]
pub struct MatrixSolution {
    pub value: f64,
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

pub(crate) fn solve_matrix(game: &MatrixGame) -> Result<MatrixSolution> {
    let (r, c) = (game.rows, game.cols);
    let min = game.a.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    // column player: maximize Σu subject to A'u ≤ 1, u ≥ 0; then y = u / Σu
    let mut lp = LinearProgram::maximize(vec![1.0; c]);
    for i in 0..r {
        lp.push(game.a[i * c..(i + 1) * c].iter().map(|v| v + shift).collect(), Cmp::Le, 1.0);
    }
    let sol = lp_solve(&lp)?;
    let total: f64 = sol.x.iter().sum();
    if total <= 0.0 {
        return Err(Error::LpFailure("degenerate matrix game".into()));
    }
    let col: Vec<f64> = sol.x.iter().map(|u| u / total).collect();
    let dual_total: f64 = sol.duals.iter().map(|d| d.max(0.0)).sum();
    if dual_total <= 0.0 {
        return Err(Error::LpFailure("matrix game duals vanished".into()));
    }
    let row: Vec<f64> = sol.duals.iter().map(|d| d.max(0.0) / dual_total).collect();
    Ok(MatrixSolution {
        value: 1.0 / total - shift,
        row,
        col,
    })
}

/// `(max_i (A y)_i, min_j (x A)_j)` for the given mixed strategies.
pub fn best_response_values(game: &MatrixGame, x: &[f64], y: &[f64]) -> (f64, f64) {
    let (r, c) = (game.rows, game.cols);
    let mut up = f64::NEG_INFINITY;
    for i in 0..r {
        let v: f64 = (0..c).map(|j| game.a[i * c + j] * y[j]).sum();
        up = up.max(v);
    }
    let mut lo = f64::INFINITY;
    for j in 0..c {
        let v: f64 = (0..r).map(|i| game.a[i * c + j] * x[i]).sum();
        lo = lo.min(v);
    }
    (up, lo)
}

/// Optimal mixed strategies and value of a matrix game.
pub fn solve_matrix_game(game: &MatrixGame) -> Result<SaddleResult> {
    let s = solve_matrix(game)?;
    let (upper, lower) = best_response_values(game, &s.row, &s.col);
    Ok(SaddleResult {
        value: s.value,
        lower,
        upper,
        gap: (upper - lower).max(0.0),
        x_star: BehavioralAction::from_flat(1, game.rows, s.row),
        y_star: BehavioralAction::from_flat(1, game.cols, s.col),
    })
}

/// A product of `blocks` simplices of dimension `block_size`, cut by extra
/// linear equalities on the flattened vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub blocks: usize,
    pub block_size: usize,
    pub equalities: Vec<(Vec<f64>, f64)>,
}

impl Polytope {
    pub fn simplex_product(blocks: usize, block_size: usize) -> Self {
        Self {
            blocks,
            block_size,
            equalities: Vec::new(),
        }
    }

    pub fn with_equality(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(coeffs.len(), self.dim());
        self.equalities.push((coeffs, rhs));
        self
    }

    pub fn dim(&self) -> usize {
        self.blocks * self.block_size
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| *v < -tol) {
            return false;
        }
        for b in 0..self.blocks {
            let s: f64 = x[b * self.block_size..(b + 1) * self.block_size].iter().sum();
            if (s - 1.0).abs() > tol {
                return false;
            }
        }
        self.equalities
            .iter()
            .all(|(a, r)| (a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - r).abs() <= tol)
    }

    fn constraint_rows(&self) -> (Vec<f64>, Vec<f64>, usize) {
        let d = self.dim();
        let rows = self.blocks + self.equalities.len();
        let mut a = vec![0.0; rows * d];
        let mut b = vec![0.0; rows];
        for blk in 0..self.blocks {
            for c in 0..self.block_size {
                a[blk * d + blk * self.block_size + c] = 1.0;
            }
            b[blk] = 1.0;
        }
        for (e, (coeffs, rhs)) in self.equalities.iter().enumerate() {
            a[(self.blocks + e) * d..(self.blocks + e + 1) * d].copy_from_slice(coeffs);
            b[self.blocks + e] = *rhs;
        }
        (a, b, rows)
    }

    /// Some point of the polytope, or `Infeasible`.
    pub fn feasible_point(&self) -> Result<Vec<f64>> {
        let (a, b, rows) = self.constraint_rows();
        let d = self.dim();
        let mut lp = LinearProgram::maximize(vec![0.0; d]);
        for r in 0..rows {
            lp.push(a[r * d..(r + 1) * d].to_vec(), Cmp::Eq, b[r]);
        }
        Ok(lp_solve(&lp)?.x)
    }

    /// Vertices by enumeration of basic feasible solutions. Only meant for
    /// the small polytopes of one-stage behavioral actions.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        if d > 20 {
            return Err(Error::LpFailure(format!("vertex enumeration in dimension {d}")));
        }
        if self.equalities.is_empty() {
            let mut out = vec![Vec::new()];
            for _ in 0..self.blocks {
                let mut next = Vec::new();
                for base in &out {
                    for c in 0..self.block_size {
                        let mut v: Vec<f64> = base.clone();
                        let mut e = vec![0.0; self.block_size];
                        e[c] = 1.0;
                        v.extend(e);
                        next.push(v);
                    }
                }
                out = next;
            }
            return Ok(out);
        }
        let (a, b, rows) = self.constraint_rows();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for mask in 1u32..(1u32 << d) {
            let cols: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
            if cols.len() > rows {
                continue;
            }
            if (0..self.blocks)
                .any(|blk| !cols.iter().any(|&j| j / self.block_size == blk))
            {
                continue;
            }
            let mut sub = vec![0.0; rows * cols.len()];
            for r in 0..rows {
                for (c, &j) in cols.iter().enumerate() {
                    sub[r * cols.len() + c] = a[r * d + j];
                }
            }
            let Some(sol) = linalg::solve_rect(&sub, &b, rows, cols.len(), 1e-9) else {
                continue;
            };
            if sol.iter().any(|v| *v < -1e-10) {
                continue;
            }
            let mut v = vec![0.0; d];
            for (&j, &s) in cols.iter().zip(&sol) {
                v[j] = s.max(0.0);
            }
            if !out.iter().any(|w| linalg::sup_dist(w, &v) < 1e-9) {
                out.push(v);
            }
        }
        if out.is_empty() {
            return Err(Error::Infeasible);
        }
        Ok(out)
    }

    /// Finite discretization: the product of block grids when there are no
    /// extra equalities, otherwise barycentric combinations of vertices with
    /// denominator `resolution`.
    pub fn grid(&self, resolution: usize) -> Result<Vec<Vec<f64>>> {
        if self.equalities.is_empty() {
            let g = SimplexGrid::new(self.block_size, resolution);
            let mut out = vec![Vec::new()];
            for _ in 0..self.blocks {
                let mut next = Vec::with_capacity(out.len() * g.len());
                for base in &out {
                    for pt in g.points() {
                        let mut v: Vec<f64> = base.clone();
                        v.extend_from_slice(pt);
                        next.push(v);
                    }
                }
                out = next;
            }
            return Ok(out);
        }
        let verts = self.vertices()?;
        let g = SimplexGrid::new(verts.len(), resolution);
        let mut out: Vec<Vec<f64>> = Vec::new();
        for w in g.points() {
            let mut v = vec![0.0; self.dim()];
            for (wi, vert) in w.iter().zip(&verts) {
                for (a, b) in v.iter_mut().zip(vert) {
                    *a += wi * b;
                }
            }
            if !out.iter().any(|u| linalg::sup_dist(u, &v) < 1e-12) {
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// A concave-convex game solvable by [`solve_saddle`].
pub trait SaddleProblem {
    fn evaluate(&self, x: &BehavioralAction, y: &BehavioralAction) -> f64;

    /// Starting candidates for both players.
    fn initial(&self) -> (Vec<BehavioralAction>, Vec<BehavioralAction>);

    /// A maximizer response to the mixture `ys` and an upper bound on
    /// `max_x Σ w φ(x, y)` at the given discretization.
    fn best_response_max(&self, ys: &[(f64, &BehavioralAction)], resolution: usize) -> Result<(BehavioralAction, f64)>;

    /// A minimizer response to the mixture `xs` and a lower bound on
    /// `min_y Σ w φ(x, y)`.
    fn best_response_min(&self, xs: &[(f64, &BehavioralAction)], resolution: usize) -> Result<(BehavioralAction, f64)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleOptions {
    pub tol: f64,
    pub initial_resolution: usize,
    pub max_resolution: usize,
    pub max_iterations: usize,
}

impl SaddleOptions {
    pub fn new(tol: f64, resolution: usize) -> Self {
        Self {
            tol,
            initial_resolution: resolution,
            max_resolution: resolution,
            max_iterations: 200,
        }
    }
}

fn mixture_mean(weights: &[f64], pts: &[BehavioralAction]) -> BehavioralAction {
    let first = &pts[0];
    let mut acc = vec![0.0; first.as_flat().len()];
    for (w, p) in weights.iter().zip(pts) {
        if *w == 0.0 {
            continue;
        }
        for (a, b) in acc.iter_mut().zip(p.as_flat()) {
            *a += w * b;
        }
    }
    BehavioralAction::from_flat(first.states(), first.actions(), acc)
}

fn support<'a>(weights: &[f64], pts: &'a [BehavioralAction]) -> Vec<(f64, &'a BehavioralAction)> {
    weights
        .iter()
        .zip(pts)
        .filter(|(w, _)| **w > 1e-14)
        .map(|(w, p)| (*w, p))
        .collect()
}

fn is_new(pts: &[BehavioralAction], x: &BehavioralAction) -> bool {
    !pts.iter().any(|p| linalg::sup_dist(p.as_flat(), x.as_flat()) < 1e-10)
}

/// Double-oracle saddle search.
///
/// Bounds are reset when the discretization is refined, so the reported
/// gap always refers to the finest resolution used. On failure the error
/// carries the best estimate found.
pub fn solve_saddle(problem: &impl SaddleProblem, opts: &SaddleOptions) -> Result<SaddleResult> {
    let (mut xs, mut ys) = problem.initial();
    let mut mat: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| problem.evaluate(x, y)).collect()).collect();
    let mut res = opts.initial_resolution.max(1);
    let cap = opts.max_resolution.max(res);
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut best_x = xs[0].clone();
    let mut best_y = ys[0].clone();
    let mut last_value = 0.0;
    let finish = |value: f64, lower: f64, upper: f64, x: BehavioralAction, y: BehavioralAction| {
        let (lo, hi) = if lower <= upper { (lower, upper) } else { (upper, lower) };
        SaddleResult {
            value: value.clamp(lo, hi),
            lower: lo,
            upper: hi,
            gap: hi - lo,
            x_star: x,
            y_star: y,
        }
    };
    for _ in 0..opts.max_iterations {
        let game = MatrixGame::from_flat(xs.len(), ys.len(), mat.iter().flatten().copied().collect());
        let sol = solve_matrix(&game)?;
        last_value = sol.value;
        let (xb, up) = problem.best_response_max(&support(&sol.col, &ys), res)?;
        let (yb, lo) = problem.best_response_min(&support(&sol.row, &xs), res)?;
        if up < upper {
            upper = up;
            best_y = mixture_mean(&sol.col, &ys);
        }
        if lo > lower {
            lower = lo;
            best_x = mixture_mean(&sol.row, &xs);
        }
        if upper - lower <= opts.tol {
            if res >= cap {
                return Ok(finish(last_value, lower, upper, best_x, best_y));
            }
            res = (2 * res).min(cap);
            lower = f64::NEG_INFINITY;
            upper = f64::INFINITY;
            continue;
        }
        let mut grew = false;
        if up > sol.value + 1e-13 && is_new(&xs, &xb) {
            let row: Vec<f64> = ys.iter().map(|y| problem.evaluate(&xb, y)).collect();
            mat.push(row);
            xs.push(xb);
            grew = true;
        }
        if lo < sol.value - 1e-13 && is_new(&ys, &yb) {
            for (row, x) in mat.iter_mut().zip(&xs) {
                row.push(problem.evaluate(x, &yb));
            }
            ys.push(yb);
            grew = true;
        }
        if !grew {
            if res >= cap {
                return Err(Error::ToleranceNotReached(Box::new(finish(
                    last_value, lower, upper, best_x, best_y,
                ))));
            }
            res = (2 * res).min(cap);
            lower = f64::NEG_INFINITY;
            upper = f64::INFINITY;
        }
    }
    Err(Error::ToleranceNotReached(Box::new(finish(
        last_value, lower, upper, best_x, best_y,
    ))))
}

/// Grid oracle over two polytopes for an arbitrary objective.
struct GridSaddle<'a, F> {
    phi: &'a F,
    x: &'a Polytope,
    y: &'a Polytope,
    x_grids: Vec<Vec<BehavioralAction>>,
    y_grids: Vec<Vec<BehavioralAction>>,
}

fn level(resolution: usize) -> usize {
    resolution.trailing_zeros() as usize
}

fn to_actions(p: &Polytope, pts: Vec<Vec<f64>>) -> Vec<BehavioralAction> {
    pts.into_iter()
        .map(|v| BehavioralAction::from_flat(p.blocks, p.block_size, v))
        .collect()
}

impl<'a, F> GridSaddle<'a, F>
where
    F: Fn(&BehavioralAction, &BehavioralAction) -> f64,
{
    fn new(phi: &'a F, x: &'a Polytope, y: &'a Polytope, cap: usize) -> Result<Self> {
        let mut x_grids = Vec::new();
        let mut y_grids = Vec::new();
        let mut r = 1;
        while r <= cap {
            x_grids.push(to_actions(x, x.grid(r)?));
            y_grids.push(to_actions(y, y.grid(r)?));
            r *= 2;
        }
        Ok(Self {
            phi,
            x,
            y,
            x_grids,
            y_grids,
        })
    }
}

impl<F> SaddleProblem for GridSaddle<'_, F>
where
    F: Fn(&BehavioralAction, &BehavioralAction) -> f64,
{
    fn evaluate(&self, x: &BehavioralAction, y: &BehavioralAction) -> f64 {
        (self.phi)(x, y)
    }

    fn initial(&self) -> (Vec<BehavioralAction>, Vec<BehavioralAction>) {
        let cx = self.x.feasible_point().unwrap_or_else(|_| self.x_grids[0][0].as_flat().to_vec());
        let cy = self.y.feasible_point().unwrap_or_else(|_| self.y_grids[0][0].as_flat().to_vec());
        (
            vec![BehavioralAction::from_flat(self.x.blocks, self.x.block_size, cx)],
            vec![BehavioralAction::from_flat(self.y.blocks, self.y.block_size, cy)],
        )
    }

    fn best_response_max(&self, ys: &[(f64, &BehavioralAction)], resolution: usize) -> Result<(BehavioralAction, f64)> {
        let grid = &self.x_grids[level(resolution).min(self.x_grids.len() - 1)];
        let mut best = (0, f64::NEG_INFINITY);
        for (a, x) in grid.iter().enumerate() {
            let v: f64 = ys.iter().map(|(w, y)| w * (self.phi)(x, y)).sum();
            if v > best.1 + 1e-15 {
                best = (a, v);
            }
        }
        Ok((grid[best.0].clone(), best.1))
    }

    fn best_response_min(&self, xs: &[(f64, &BehavioralAction)], resolution: usize) -> Result<(BehavioralAction, f64)> {
        let grid = &self.y_grids[level(resolution).min(self.y_grids.len() - 1)];
        let mut best = (0, f64::INFINITY);
        for (b, y) in grid.iter().enumerate() {
            let v: f64 = xs.iter().map(|(w, x)| w * (self.phi)(x, y)).sum();
            if v < best.1 - 1e-15 {
                best = (b, v);
            }
        }
        Ok((grid[best.0].clone(), best.1))
    }
}

/// Saddle value of `phi` over `x × y` by double oracle on vertex-plus-
/// barycentric grids whose resolution doubles from 1 up to `max_resolution`
/// (rounded down to a power of two).
pub fn saddle_eval<F>(phi: &F, x: &Polytope, y: &Polytope, tol: f64, max_resolution: usize) -> Result<SaddleResult>
where
    F: Fn(&BehavioralAction, &BehavioralAction) -> f64,
{
    let mut cap = 1;
    while cap * 2 <= max_resolution.max(1) {
        cap *= 2;
    }
    let problem = GridSaddle::new(phi, x, y, cap)?;
    let opts = SaddleOptions {
        tol,
        initial_resolution: 1,
        max_resolution: cap,
        max_iterations: 10_000,
    };
    solve_saddle(&problem, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn game(rows: Vec<Vec<f64>>) -> MatrixGame {
        MatrixGame::new(rows).unwrap()
    }

    #[test]
    fn matching_pennies() {
        let s = solve_matrix_game(&game(vec![vec![1.0, -1.0], vec![-1.0, 1.0]])).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!((s.x_star.prob(0, 0) - 0.5).abs() < 1e-12);
        assert!((s.y_star.prob(0, 0) - 0.5).abs() < 1e-12);
        assert!(s.gap <= 1e-9);
    }

    #[test]
    fn diagonal_game() {
        let s = solve_matrix_game(&game(vec![vec![2.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert!((s.value - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.x_star.prob(0, 0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_row() {
        let s = solve_matrix_game(&game(vec![vec![1.0, 1.0], vec![0.0, 0.0]])).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.x_star.prob(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_saddle_matches_lp() {
        let a = [[0.3, -0.8, 0.1], [-0.2, 0.5, -0.6]];
        let direct = solve_matrix_game(&game(a.iter().map(|r| r.to_vec()).collect())).unwrap();
        let phi = |x: &BehavioralAction, y: &BehavioralAction| {
            (0..2).map(|i| (0..3).map(|j| x.prob(0, i) * a[i][j] * y.prob(0, j)).sum::<f64>()).sum::<f64>()
        };
        let s = saddle_eval(&phi, &Polytope::simplex_product(1, 2), &Polytope::simplex_product(1, 3), 1e-9, 4).unwrap();
        assert!((s.value - direct.value).abs() < 1e-9);
        assert!(s.lower <= s.upper);
    }

    #[test]
    fn degenerate_opponent_reduces_to_grid_max() {
        // concave in x, independent of y
        let phi = |x: &BehavioralAction, _: &BehavioralAction| -(x.prob(0, 0) - 0.25).powi(2);
        let s = saddle_eval(&phi, &Polytope::simplex_product(1, 2), &Polytope::simplex_product(1, 2), 1e-12, 4).unwrap();
        assert!(s.value.abs() < 1e-12);
    }

    #[test]
    fn symmetric_objective_has_zero_value() {
        let phi = |x: &BehavioralAction, y: &BehavioralAction| {
            let (a, b) = (x.prob(0, 0), y.prob(0, 0));
            (a - b) * (1.0 - a - b) * 0.5 - a * a + b * b
        };
        let s = saddle_eval(&phi, &Polytope::simplex_product(1, 2), &Polytope::simplex_product(1, 2), 1e-3, 64).unwrap();
        assert!(s.value.abs() < 1e-3);
    }

    #[test]
    fn gap_does_not_grow_with_resolution() {
        let phi = |x: &BehavioralAction, y: &BehavioralAction| {
            let (a, b) = (x.prob(0, 0), y.prob(0, 0));
            -(a - 0.37).powi(2) + (b - 0.61).powi(2) + 0.3 * a * b
        };
        let px = Polytope::simplex_product(1, 2);
        let mut last = f64::INFINITY;
        for cap in [2, 4, 8, 16, 32] {
            let s = match saddle_eval(&phi, &px, &px, 0.0, cap) {
                Ok(s) => s,
                Err(Error::ToleranceNotReached(s)) => *s,
                Err(e) => panic!("{e}"),
            };
            assert!(s.gap <= last + 1e-12, "gap {} after {}", s.gap, last);
            last = s.gap;
        }
    }

    #[test]
    fn polytope_vertices_with_equalities() {
        // two blocks over two actions, first coordinates tied together
        let p = Polytope::simplex_product(2, 2).with_equality(vec![1.0, 0.0, -1.0, 0.0], 0.0);
        let v = p.vertices().unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| p.contains(x, 1e-12)));
        let g = p.grid(4).unwrap();
        assert_eq!(g.len(), 5);
    }

    proptest! {
        #[test]
        fn transposition_flips_value(a in prop::collection::vec(-1.0f64..1.0, 12)) {
            let g = MatrixGame::from_flat(3, 4, a);
            let v = solve_matrix_game(&g).unwrap();
            let w = solve_matrix_game(&g.negated_transpose()).unwrap();
            prop_assert!((v.value + w.value).abs() < 1e-9);
            prop_assert!(v.gap <= 1e-9);
            prop_assert!(v.lower <= v.upper + 1e-12);
        }
    }
}
