//! Discrete Laplacian and gradient operators on [`PolarGrid`] layouts.
//!
//! The Laplacian rows hold `s_p·(−Δ_h u)_p` with row scale `s_p = 1` on the
//! polar layout and `s_p = ρ_p²` on the log-polar layouts, where
//! `Δ = ρ⁻²(∂_ss + ∂_φφ)`. Rows of non-interior nodes are left empty.

use crate::grid::{Layout, PolarGrid};
use crate::linalg::SparseRows;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct GridOperators {
    pub lap: SparseRows,
    pub grad_r: SparseRows,
    pub grad_t: SparseRows,
    pub scale: Vec<f64>,
}

/// Fourier differentiation matrices `(D1, D2)` on `n` equispaced periodic nodes (`n` even).
pub fn spectral_matrices(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let h = 2.0 * PI / n as f64;
    let mut d1 = vec![vec![0.0; n]; n];
    let mut d2 = vec![vec![0.0; n]; n];
    for j in 0..n {
        for l in 0..n {
            if j == l {
                d2[j][l] = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
            } else {
                let k = j as isize - l as isize;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let half = k as f64 * h / 2.0;
                d1[j][l] = 0.5 * sign / half.tan();
                d2[j][l] = -0.5 * sign / (half.sin() * half.sin());
            }
        }
    }
    (d1, d2)
}

impl GridOperators {
    pub fn new(grid: &PolarGrid) -> Self {
        match grid.layout {
            Layout::Polar => Self::polar(grid),
            _ => Self::graded(grid),
        }
    }

    fn polar(g: &PolarGrid) -> Self {
        let (n_r, n_t) = (g.n_r(), g.n_theta());
        let n = g.len();
        let h = g.step;
        let (d1, d2) = spectral_matrices(n_t);
        let mut lap = SparseRows::new(n);
        let mut gr = SparseRows::new(n);
        let mut gt = SparseRows::new(n);
        for i in 0..n_r {
            let r = g.radii[i];
            for j in 0..n_t {
                let p = g.index(i, j);
                let opposite = g.index(0, (j + n_t / 2) % n_t);
                gr.rows[p] = if i == 0 {
                    vec![(g.index(1, j), 0.5 / h), (opposite, -0.5 / h)]
                } else if i + 1 == n_r {
                    vec![(p, 1.5 / h), (g.index(i - 1, j), -2.0 / h), (g.index(i - 2, j), 0.5 / h)]
                } else {
                    vec![(g.index(i + 1, j), 0.5 / h), (g.index(i - 1, j), -0.5 / h)]
                };
                gt.rows[p] = (0..n_t)
                    .filter(|&l| l != j)
                    .map(|l| (g.index(i, l), d1[j][l] / r))
                    .collect();
                if i + 1 == n_r {
                    continue;
                }
                let ap = (r + 0.5 * h) / (r * h * h);
                let am = if i == 0 { 0.0 } else { (r - 0.5 * h) / (r * h * h) };
                let mut row: Vec<(usize, f64)> = (0..n_t)
                    .map(|l| (g.index(i, l), -d2[j][l] / (r * r)))
                    .collect();
                row[j].1 += ap + am;
                row.push((g.index(i + 1, j), -ap));
                if i > 0 {
                    row.push((g.index(i - 1, j), -am));
                }
                lap.rows[p] = row;
            }
        }
        Self { lap, grad_r: gr, grad_t: gt, scale: vec![1.0; n] }
    }

    fn graded(g: &PolarGrid) -> Self {
        let (n_r, n_t) = (g.n_r(), g.n_theta());
        let n = g.len();
        let ds = g.step;
        let dt = g.dtheta;
        let periodic = g.periodic();
        let mut lap = SparseRows::new(n);
        let mut gr = SparseRows::new(n);
        let mut gt = SparseRows::new(n);
        let mut scale = vec![0.0; n];
        for i in 0..n_r {
            let rho = g.radii[i];
            for j in 0..n_t {
                let p = g.index(i, j);
                scale[p] = rho * rho;
                let cr = 1.0 / (2.0 * ds * rho);
                gr.rows[p] = if i == 0 {
                    vec![(p, -3.0 * cr), (g.index(1, j), 4.0 * cr), (g.index(2, j), -cr)]
                } else if i + 1 == n_r {
                    vec![(p, 3.0 * cr), (g.index(i - 1, j), -4.0 * cr), (g.index(i - 2, j), cr)]
                } else {
                    vec![(g.index(i + 1, j), cr), (g.index(i - 1, j), -cr)]
                };
                let ct = 1.0 / (2.0 * dt * rho);
                let jp = (j + 1) % n_t;
                let jm = (j + n_t - 1) % n_t;
                gt.rows[p] = if periodic || (j > 0 && j + 1 < n_t) {
                    vec![(g.index(i, jp), ct), (g.index(i, jm), -ct)]
                } else if j == 0 {
                    vec![(p, -3.0 * ct), (g.index(i, 1), 4.0 * ct), (g.index(i, 2), -ct)]
                } else {
                    vec![(p, 3.0 * ct), (g.index(i, j - 1), -4.0 * ct), (g.index(i, j - 2), ct)]
                };
                if !g.is_interior(p) {
                    continue;
                }
                let a = 1.0 / (ds * ds);
                let b = 1.0 / (dt * dt);
                lap.rows[p] = vec![
                    (p, 2.0 * a + 2.0 * b),
                    (g.index(i + 1, j), -a),
                    (g.index(i - 1, j), -a),
                    (g.index(i, jp), -b),
                    (g.index(i, jm), -b),
                ];
            }
        }
        Self { lap, grad_r: gr, grad_t: gt, scale }
    }

    /// Polar gradient components per node.
    pub fn gradient(&self, u: &[f64]) -> Vec<[f64; 2]> {
        (0..u.len())
            .map(|p| [self.grad_r.apply_row(p, u), self.grad_t.apply_row(p, u)])
            .collect()
    }

    /// Unscaled `−Δ_h u` on interior nodes, zero elsewhere.
    pub fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|p| {
                if self.lap.rows[p].is_empty() {
                    0.0
                } else {
                    self.lap.apply_row(p, u) / self.scale[p]
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::grid::{GridField, GridSpec};
    use std::sync::Arc;

    // the pole ring is only first-order consistent, so it is left out
    fn max_interior_err(g: &PolarGrid, v: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
        (0..g.len())
            .filter(|&p| g.is_interior(p) && g.radii[g.split(p).0] >= 0.1)
            .map(|p| (v[p] - exact(g.node(p))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn polar_laplacian_second_order() {
        let f = |x: [f64; 2]| (x[0] + 0.3 * x[1]).exp();
        let lap = |x: [f64; 2]| -1.09 * (x[0] + 0.3 * x[1]).exp();
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = PolarGrid::new(&Domain::ball(2, 1.0), &GridSpec::polar(n, n)).unwrap();
            let ops = GridOperators::new(&g);
            let u = GridField::from_fn(Arc::new(g.clone()), f);
            let l = ops.neg_laplacian(&u.values);
            errs.push(max_interior_err(&g, &l, lap));
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.8, "{errs:?}");
    }

    #[test]
    fn polar_gradient() {
        let g = PolarGrid::new(&Domain::ball(2, 1.0), &GridSpec::polar(64, 32)).unwrap();
        let ops = GridOperators::new(&g);
        let u: Vec<f64> = g.nodes().iter().map(|x| x[0] * x[0] + 2.0 * x[1]).collect();
        let gr = ops.gradient(&u);
        for p in 0..g.len() {
            let x = g.node(p);
            let t = g.angles[g.split(p).1];
            let (gx, gy) = (2.0 * x[0], 2.0);
            let er = gx * t.cos() + gy * t.sin();
            let et = -gx * t.sin() + gy * t.cos();
            assert!((gr[p][0] - er).abs() < 1e-3 && (gr[p][1] - et).abs() < 1e-9);
        }
    }

    #[test]
    fn graded_laplacian() {
        let g = PolarGrid::new(&Domain::half_disk(2, 1.0), &GridSpec::anchor(80, 41, 0.9)).unwrap();
        let ops = GridOperators::new(&g);
        // harmonic: Poisson kernel at the corner
        let u: Vec<f64> = g.nodes().iter().map(|x| x[1] / (x[0] * x[0] + x[1] * x[1]) - x[1]).collect();
        let l = ops.neg_laplacian(&u);
        let gr = ops.gradient(&u);
        for p in 0..g.len() {
            if g.is_interior(p) {
                let x = g.node(p);
                let r2 = x[0] * x[0] + x[1] * x[1];
                let rel = l[p].abs() * r2 * r2.sqrt();
                assert!(rel < 2e-2, "{rel}");
                let gmag = gr[p][0].hypot(gr[p][1]);
                assert!((gmag * r2 - 1.0).abs() < 0.1 + 2.0 * r2);
            }
        }
    }
}
