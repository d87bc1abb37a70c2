//! Barycentric grids on the simplex with Kuhn-triangulation interpolation.

use smallvec::SmallVec;

/// Grid points with their interpolation weights.
pub type Cell = SmallVec<[(usize, f64); 8]>;

/// All beliefs over `dim` states whose coordinates are multiples of
/// `1/resolution`, enumerated in lexicographic order of their numerators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    dim: usize,
    resolution: usize,
    points: Vec<Vec<f64>>,
    // count[m][parts]: compositions of m into `parts` nonnegative parts
    count: Vec<Vec<usize>>,
}

impl SimplexGrid {
    pub fn new(dim: usize, resolution: usize) -> Self {
        assert!(dim >= 1, "simplex needs at least one vertex");
        let n = if dim == 1 { 0 } else { resolution };
        let mut count = vec![vec![0usize; dim + 1]; n + 1];
        for (m, row) in count.iter_mut().enumerate() {
            row[1] = 1;
            if m == 0 {
                row.iter_mut().skip(1).for_each(|c| *c = 1);
            }
        }
        for m in 1..=n {
            for parts in 2..=dim {
                count[m][parts] = (0..=m).map(|v| count[m - v][parts - 1]).sum();
            }
        }
        let mut points = Vec::with_capacity(count[n][dim]);
        let mut comp = vec![0usize; dim];
        enumerate(&mut comp, 0, n, &mut |c| {
            points.push(
                c.iter()
                    .map(|&x| if n == 0 { 1.0 } else { x as f64 / n as f64 })
                    .collect(),
            )
        });
        Self {
            dim,
            resolution: n,
            points,
            count,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Index of the grid point with numerators `comp` (summing to the resolution).
    pub fn rank(&self, comp: &[usize]) -> usize {
        let mut rem = self.resolution;
        let mut idx = 0;
        for (j, &c) in comp.iter().enumerate().take(self.dim - 1) {
            let parts = self.dim - j - 1;
            for v in 0..c {
                idx += self.count[rem - v][parts];
            }
            rem -= c;
        }
        idx
    }

    /// Numerators of a grid point.
    pub fn composition(&self, idx: usize) -> Vec<usize> {
        self.points[idx]
            .iter()
            .map(|x| (x * self.resolution as f64).round() as usize)
            .collect()
    }

    /// Index of the grid point closest to an on-grid belief, if it is one.
    pub fn find(&self, p: &[f64]) -> Option<usize> {
        let n = self.resolution as f64;
        let comp: Vec<usize> = p.iter().map(|x| (x * n).round().max(0.0) as usize).collect();
        if comp.iter().sum::<usize>() != self.resolution {
            return None;
        }
        if p.iter().zip(&comp).any(|(x, &c)| (x * n - c as f64).abs() > 1e-9) {
            return None;
        }
        Some(self.rank(&comp))
    }

    /// L¹ diameter of a Kuhn simplex of the subdivision.
    pub fn mesh(&self) -> f64 {
        if self.resolution == 0 {
            0.0
        } else {
            2.0 * (self.dim / 2) as f64 / self.resolution as f64
        }
    }

    /// Vertices and barycentric weights of the Kuhn simplex containing `p`.
    /// Weights are nonnegative, sum to one and reproduce `p` exactly for
    /// beliefs; entries with zero weight are omitted.
    pub fn locate(&self, p: &[f64]) -> Cell {
        let mut cell = Cell::new();
        let d = self.dim;
        let n = self.resolution;
        if d == 1 || n == 0 {
            cell.push((0, 1.0));
            return cell;
        }
        // cumulative coordinates s_j = n (p_0 + .. + p_j), j < d-1
        let nf = n as f64;
        let mut base = vec![0usize; d - 1];
        let mut frac = vec![0.0; d - 1];
        let mut acc = 0.0;
        for j in 0..d - 1 {
            acc += p[j];
            let s = (acc * nf).clamp(0.0, nf);
            let mut b = s.floor();
            if b >= nf {
                b = nf - 1.0;
            }
            // snap values within rounding of an integer
            let mut f = s - b;
            if (f - 1.0).abs() < 1e-12 && b + 1.0 < nf {
                b += 1.0;
                f = 0.0;
            } else if f < 1e-12 {
                f = 0.0;
            }
            base[j] = b as usize;
            frac[j] = f;
        }
        // cumulative coordinates are nondecreasing; rounding may break this
        for j in 1..d - 1 {
            if base[j] < base[j - 1] || (base[j] == base[j - 1] && frac[j] < frac[j - 1]) {
                base[j] = base[j - 1];
                frac[j] = frac[j - 1];
            }
        }
        let mut order: Vec<usize> = (0..d - 1).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(b.cmp(&a)));

        let mut cum = base.clone();
        let mut comp = vec![0usize; d];
        let mut push = |cum: &[usize], w: f64, cell: &mut Cell| {
            if w <= 0.0 {
                return;
            }
            let mut prev = 0;
            for j in 0..d - 1 {
                comp[j] = cum[j] - prev;
                prev = cum[j];
            }
            comp[d - 1] = n - prev;
            cell.push((self.rank(&comp), w));
        };
        push(&cum, 1.0 - frac[order[0]], &mut cell);
        for m in 0..d - 1 {
            cum[order[m]] += 1;
            let next = if m + 1 < d - 1 { frac[order[m + 1]] } else { 0.0 };
            push(&cum, frac[order[m]] - next, &mut cell);
        }
        cell
    }

    /// Piecewise-linear interpolation of per-point values.
    pub fn interpolate(&self, values: &[f64], p: &[f64]) -> f64 {
        self.locate(p).iter().map(|&(i, w)| w * values[i]).sum()
    }
}

fn enumerate(comp: &mut [usize], pos: usize, rem: usize, f: &mut impl FnMut(&[usize])) {
    let d = comp.len();
    if pos == d - 1 {
        comp[pos] = rem;
        f(comp);
        return;
    }
    for v in 0..=rem {
        comp[pos] = v;
        enumerate(comp, pos + 1, rem - v, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_and_ranks() {
        let g = SimplexGrid::new(3, 4);
        assert_eq!(g.len(), 15);
        for i in 0..g.len() {
            assert_eq!(g.rank(&g.composition(i)), i);
        }
        assert_eq!(SimplexGrid::new(1, 10).len(), 1);
        assert_eq!(SimplexGrid::new(2, 10).len(), 11);
        assert_eq!(SimplexGrid::new(4, 3).len(), 20);
    }

    #[test]
    fn grid_points_locate_to_themselves() {
        let g = SimplexGrid::new(3, 5);
        for i in 0..g.len() {
            let c = g.locate(g.point(i));
            assert_eq!(c.len(), 1);
            assert_eq!(c[0].0, i);
        }
    }

    #[test]
    fn mesh_values() {
        assert!((SimplexGrid::new(2, 10).mesh() - 0.2).abs() < 1e-15);
        assert!((SimplexGrid::new(3, 10).mesh() - 0.2).abs() < 1e-15);
        assert!((SimplexGrid::new(4, 10).mesh() - 0.4).abs() < 1e-15);
    }

    fn belief(raw: Vec<f64>) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn barycentric_weights_reproduce_point(
            raw in prop::collection::vec(0.001f64..1.0, 2..5),
            n in 1usize..9,
        ) {
            let p = belief(raw);
            let g = SimplexGrid::new(p.len(), n);
            let cell = g.locate(&p);
            let wsum: f64 = cell.iter().map(|c| c.1).sum();
            prop_assert!((wsum - 1.0).abs() < 1e-12);
            prop_assert!(cell.len() <= p.len());
            let mut rec = vec![0.0; p.len()];
            for &(i, w) in &cell {
                prop_assert!(w > 0.0);
                for (r, x) in rec.iter_mut().zip(g.point(i)) {
                    *r += w * x;
                }
                // every vertex lies within the mesh of p
                let d: f64 = p.iter().zip(g.point(i)).map(|(a, b)| (a - b).abs()).sum();
                prop_assert!(d <= g.mesh() + 1e-12);
            }
            for (a, b) in rec.iter().zip(&p) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn linear_functions_interpolate_exactly(
            raw in prop::collection::vec(0.001f64..1.0, 3..5),
            coef in prop::collection::vec(-1.0f64..1.0, 4),
        ) {
            let p = belief(raw);
            let g = SimplexGrid::new(p.len(), 6);
            let vals: Vec<f64> = g.points().iter()
                .map(|x| x.iter().zip(&coef).map(|(a, b)| a * b).sum())
                .collect();
            let exact: f64 = p.iter().zip(&coef).map(|(a, b)| a * b).sum();
            prop_assert!((g.interpolate(&vals, &p) - exact).abs() < 1e-12);
        }
    }
}
