//! Green and Poisson kernels of the canonical domains and the operators `P[μ]`, `G[f]`.

use crate::error::{LabError, Result};
use crate::geometry::{dist, norm, Domain, DomainKind};
use crate::grid::{GridField, NodeKind, PolarGrid};
use crate::measure::{eval_fourier, fourier_coefficients, BoundaryMeasure};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn sphere_area(n: usize) -> f64 {
    if n == 2 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

/// Fundamental solution of `−Δ`.
pub fn fundamental(n: usize, r: f64) -> f64 {
    if n == 2 {
        -r.ln() / (2.0 * PI)
    } else {
        1.0 / (4.0 * PI * r)
    }
}

fn fundamental_slope(n: usize, r: f64) -> f64 {
    -1.0 / (sphere_area(n) * r.powi(n as i32 - 1))
}

fn image_distance(radius: f64, x: &[f64], y: &[f64]) -> f64 {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (xx * yy / (radius * radius) - 2.0 * xy + radius * radius).max(0.0).sqrt()
}

fn reflect(x: &[f64]) -> Vec<f64> {
    let mut r = x.to_vec();
    let n = r.len();
    r[n - 1] = -r[n - 1];
    r
}

fn ball_green(n: usize, radius: f64, x: &[f64], y: &[f64]) -> f64 {
    fundamental(n, dist(x, y)) - fundamental(n, image_distance(radius, x, y))
}

/// Green function of `−Δ` with zero Dirichlet data.
pub fn green_kernel(domain: &Domain, x: &[f64], y: &[f64]) -> Result<f64> {
    let sep = dist(x, y);
    if sep < 1e-14 {
        return Err(LabError::CoincidentPoints(sep));
    }
    let n = domain.dim;
    Ok(match domain.kind {
        DomainKind::Ball => ball_green(n, domain.radius, x, y),
        DomainKind::HalfDisk => ball_green(n, domain.radius, x, y) - ball_green(n, domain.radius, x, &reflect(y)),
    })
}

/// Regular part `G(x, y) − Γ(|x − y|)` evaluated at `y = x`.
pub fn green_regular_part(domain: &Domain, x: &[f64]) -> f64 {
    let n = domain.dim;
    let r = domain.radius;
    let base = -fundamental(n, image_distance(r, x, x));
    match domain.kind {
        DomainKind::Ball => base,
        DomainKind::HalfDisk => {
            let xb = reflect(x);
            if dist(x, &xb) < 1e-300 {
                return f64::NEG_INFINITY;
            }
            base - ball_green(n, r, x, &xb)
        }
    }
}

fn ball_poisson(n: usize, radius: f64, x: &[f64], sigma: &[f64]) -> f64 {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    (radius * radius - xx) / (sphere_area(n) * radius * dist(x, sigma).powi(n as i32))
}

/// Poisson kernel `P(x, σ) = −∂_{n_σ} G(x, σ)`.
pub fn poisson_kernel(domain: &Domain, x: &[f64], sigma: &[f64]) -> f64 {
    let n = domain.dim;
    let r = domain.radius;
    match domain.kind {
        DomainKind::Ball => ball_poisson(n, r, x, sigma),
        DomainKind::HalfDisk => {
            let flat = sigma[n - 1].abs() <= 1e-12 * r && norm(sigma) < r * (1.0 - 1e-12);
            if flat {
                let xn = x[n - 1];
                let a = dist(x, sigma);
                let b = image_distance(r, x, sigma);
                let ga = -fundamental_slope(n, a) / a;
                let gb = -fundamental_slope(n, b) / b;
                2.0 * xn * (ga - gb)
            } else {
                ball_poisson(n, r, x, sigma) - ball_poisson(n, r, &reflect(x), sigma)
            }
        }
    }
}

/// Poisson integral of the density part of `μ` at an interior point.
fn density_poisson(mu: &BoundaryMeasure, x: &[f64], coeffs: Option<&[(f64, f64)]>) -> f64 {
    let Some(d) = &mu.density else { return 0.0 };
    let domain = &mu.domain;
    if let Some(c) = coeffs {
        let rho = norm(x) / domain.radius;
        let t = x[1].atan2(x[0]);
        return eval_fourier(c, rho, t);
    }
    d.quadrature
        .nodes
        .iter()
        .zip(&d.quadrature.weights)
        .zip(&d.values)
        .map(|((s, w), v)| v * w * poisson_kernel(domain, x, s))
        .sum()
}

fn fourier_for(mu: &BoundaryMeasure) -> Option<Vec<(f64, f64)>> {
    match (&mu.density, mu.domain.kind, mu.domain.dim) {
        (Some(d), DomainKind::Ball, 2) => Some(fourier_coefficients(&d.values)),
        _ => None,
    }
}

/// `P[μ](x)` at a point of the open domain.
///
/// The density part of a disk measure is summed as a Fourier series, which is
/// the trapezoidal rule carried out exactly; other densities use the trapezoidal rule.
pub fn poisson_integral(mu: &BoundaryMeasure, x: &[f64]) -> f64 {
    let coeffs = fourier_for(mu);
    let atoms: f64 = mu.atoms.iter().map(|a| a.mass * poisson_kernel(&mu.domain, x, &a.point)).sum();
    atoms + density_poisson(mu, x, coeffs.as_deref())
}

/// Samples `P[μ]` on a grid. Boundary nodes receive the density value (atoms vanish there).
pub fn apply_poisson(mu: &BoundaryMeasure, grid: Arc<PolarGrid>) -> Result<GridField> {
    if grid.domain != mu.domain {
        return Err(LabError::InvalidInput("measure and grid live on different domains".into()));
    }
    let coeffs = fourier_for(mu);
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let x = grid.node(p);
            match grid.kind(p) {
                NodeKind::Outer | NodeKind::Flat => mu.density_at(&x),
                _ => {
                    let a: f64 = mu.atoms.iter().map(|a| a.mass * poisson_kernel(&mu.domain, &x, &a.point)).sum();
                    a + density_poisson(mu, &x, coeffs.as_deref())
                }
            }
        })
        .collect();
    Ok(GridField::new(grid, values))
}

/// `G[f]` by node quadrature. The self cell integrates the free-space kernel
/// over the equal-area disk; the regular part is taken at the node.
pub fn apply_green(f: &GridField) -> Result<GridField> {
    let grid = f.grid.clone();
    let domain = &grid.domain;
    let d = grid.distances();
    let weighted: f64 = f.values.iter().zip(&d).zip(&grid.weights).map(|((v, dd), w)| v.abs() * dd * w).sum();
    if !weighted.is_finite() {
        return Err(LabError::NonIntegrableInput);
    }
    let nodes = grid.nodes();
    let sources: Vec<usize> = (0..grid.len()).filter(|&q| f.values[q] != 0.0 && grid.kind(q) != NodeKind::Outer && grid.kind(q) != NodeKind::Flat).collect();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let kind = grid.kind(p);
            if kind == NodeKind::Outer || kind == NodeKind::Flat {
                return 0.0;
            }
            let x = nodes[p];
            let mut acc = 0.0;
            for &q in &sources {
                let wq = grid.weights[q] * f.values[q];
                if q == p {
                    let a = (grid.weights[q] / PI).sqrt();
                    let free = 0.5 * a * a * (0.5 - a.ln());
                    acc += f.values[q] * free + wq * green_regular_part(domain, &x);
                } else {
                    acc += wq * green_kernel(domain, &x, &nodes[q]).unwrap_or(0.0);
                }
            }
            acc
        })
        .collect();
    Ok(GridField::new(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::stencil::GridOperators;
    use proptest::prelude::*;

    #[test]
    fn green_at_center() {
        let b = Domain::ball(2, 1.0);
        let g = green_kernel(&b, &[0.5, 0.0], &[0.0, 0.0]).unwrap();
        assert!((g + 0.5f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert!(green_kernel(&b, &[0.1, 0.1], &[0.1, 0.1]).is_err());
    }

    #[test]
    fn green_vanishes_on_boundary() {
        let h = Domain::half_disk(2, 1.0);
        let x = [0.2, 0.3];
        for s in [[0.5, 0.0], [-0.7, 0.0], [0.6f64.cos(), 0.6f64.sin()]] {
            assert!(green_kernel(&h, &x, &s).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn poisson_kernel_matches_normal_derivative() {
        for dom in [Domain::ball(2, 1.0), Domain::half_disk(2, 1.0), Domain::ball(3, 1.0), Domain::half_disk(3, 1.0)] {
            let x: Vec<f64> = if dom.dim == 2 { vec![0.1, 0.4] } else { vec![0.1, -0.2, 0.4] };
            let mut sigmas: Vec<Vec<f64>> = if dom.dim == 2 {
                vec![vec![1.1f64.cos(), 1.1f64.sin()]]
            } else {
                vec![vec![0.0, 0.6, 0.8]]
            };
            if dom.kind == DomainKind::HalfDisk {
                sigmas.push(if dom.dim == 2 { vec![0.3, 0.0] } else { vec![0.3, 0.1, 0.0] });
            }
            for s in sigmas {
                let n = dom.outward_normal(&s);
                let h = 1e-5;
                let inner: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a - h * b).collect();
                let inner2: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a - 2.0 * h * b).collect();
                // one-sided second-order derivative of G(x, ·) at σ along −n
                let g1 = green_kernel(&dom, &x, &inner).unwrap();
                let g2 = green_kernel(&dom, &x, &inner2).unwrap();
                let deriv = (4.0 * g1 - g2) / (2.0 * h);
                let p = poisson_kernel(&dom, &x, &s);
                assert!((deriv - p).abs() < 1e-6 * p.abs().max(1.0), "{dom:?} {deriv} {p}");
            }
        }
    }

    #[test]
    fn half_disk_corner_kernel() {
        let h = Domain::half_disk(2, 1.0);
        let x = [0.3, 0.2];
        let exact = 0.2 / PI * (1.0 / 0.13 - 1.0);
        assert!((poisson_kernel(&h, &x, &[0.0, 0.0]) - exact).abs() < 1e-14);
    }

    #[test]
    fn ball3_green_reproduces_test_function() {
        // ∫ G(x, y)(−Δφ)(x) dx = φ(y) for φ = (1 − |x|²)², in spherical coordinates around y
        let dom = Domain::ball(3, 1.0);
        let y = [0.0, 0.1, 0.3];
        let neg_lap = |x: &[f64]| 12.0 - 20.0 * x.iter().map(|v| v * v).sum::<f64>();
        let (nt, np, ns) = (60, 60, 80);
        let mut total = 0.0;
        for it in 0..nt {
            let ct = -1.0 + 2.0 * (it as f64 + 0.5) / nt as f64;
            let st = (1.0 - ct * ct).sqrt();
            for ip in 0..np {
                let ph = 2.0 * PI * (ip as f64 + 0.5) / np as f64;
                let w = [st * ph.cos(), st * ph.sin(), ct];
                let yw: f64 = y.iter().zip(&w).map(|(a, b)| a * b).sum();
                let yy: f64 = y.iter().map(|v| v * v).sum();
                let smax = -yw + (yw * yw - yy + 1.0).sqrt();
                // Simpson in s on the smooth integrand s²·G·(−Δφ)
                let h = smax / ns as f64;
                let mut acc = 0.0;
                for k in 0..=ns {
                    let s = k as f64 * h;
                    let coef = if k == 0 || k == ns { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    let val = if k == 0 {
                        1.0 / (4.0 * PI) * neg_lap(&y) * 0.0
                    } else {
                        let x: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a + s * b).collect();
                        s * s * green_kernel(&dom, &x, &y).unwrap_or(0.0) * neg_lap(&x)
                    };
                    acc += coef * val;
                }
                total += acc * h / 3.0 * (2.0 / nt as f64) * (2.0 * PI / np as f64);
            }
        }
        let phi_y = (1.0 - 0.1f64) * (1.0 - 0.1);
        assert!((total - phi_y).abs() < 1e-3, "{total} vs {phi_y}");
    }

    #[test]
    fn constant_density_gives_one() {
        let d = Domain::ball(2, 1.0);
        let mu = BoundaryMeasure::from_density(&d, 64, |_| 1.0).unwrap();
        let g = Arc::new(PolarGrid::new(&d, &GridSpec::polar(32, 32)).unwrap());
        let u = apply_poisson(&mu, g).unwrap();
        assert!(u.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let atom = BoundaryMeasure::atom(&d, vec![1.0, 0.0], 1.0).unwrap();
        assert!((poisson_integral(&atom, &[0.0, 0.0]) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn cos2_density_matches_brute_force() {
        let d = Domain::ball(2, 1.0);
        let f = |x: &[f64]| x[0] * x[0];
        let mu = BoundaryMeasure::from_density(&d, 64, f).unwrap();
        let m = 100_000;
        for k in 0..10 {
            let r = 0.05 + 0.09 * k as f64;
            let t = 0.7 * k as f64;
            let x = [r * t.cos(), r * t.sin()];
            let mut brute = 0.0;
            for j in 0..m {
                let a = 2.0 * PI * j as f64 / m as f64;
                let s = [a.cos(), a.sin()];
                brute += f(&s) * poisson_kernel(&d, &x, &s) * 2.0 * PI / m as f64;
            }
            assert!((poisson_integral(&mu, &x) - brute).abs() < 1e-8);
        }
    }

    #[test]
    fn poisson_field_is_discretely_harmonic_at_second_order() {
        let d = Domain::ball(2, 1.0);
        let mu = BoundaryMeasure::atom(&d, vec![0.0, -1.0], 1.0).unwrap();
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = Arc::new(PolarGrid::new(&d, &GridSpec::polar(n, n)).unwrap());
            let u = apply_poisson(&mu, g.clone()).unwrap();
            let ops = GridOperators::new(&g);
            let l = ops.neg_laplacian(&u.values);
            // compact interior set away from the atom and from the coordinate pole,
            // where the polar stencil itself is only first-order consistent
            let e = (0..g.len())
                .filter(|&p| (0.1..=0.5).contains(&g.radii[g.split(p).0]))
                .map(|p| l[p].abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!((o1 - 2.0).abs() < 0.3 && (o2 - 2.0).abs() < 0.3, "{errs:?}");
    }

    #[test]
    fn torsion_function() {
        let d = Domain::ball(2, 1.0);
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = Arc::new(PolarGrid::new(&d, &GridSpec::polar(n, n)).unwrap());
            let f = GridField::from_fn(g.clone(), |_| 1.0);
            let u = apply_green(&f).unwrap();
            let e = (0..g.len())
                .map(|p| {
                    let x = g.node(p);
                    (u.values[p] - (1.0 - x[0] * x[0] - x[1] * x[1]) / 4.0).abs()
                })
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[1] < 5e-3 && errs[1] < errs[0], "{errs:?}");
        let g = Arc::new(PolarGrid::new(&d, &GridSpec::polar(16, 16)).unwrap());
        let z = apply_green(&GridField::zeros(g)).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn green_reproduction_order() {
        let d = Domain::ball(2, 1.0);
        let src = |x: [f64; 2]| 1.0 + x[0] + x[0] * x[1];
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Arc::new(PolarGrid::new(&d, &GridSpec::polar(n, n)).unwrap());
            let f = GridField::from_fn(g.clone(), src);
            let u = apply_green(&f).unwrap();
            let ops = GridOperators::new(&g);
            let l = ops.neg_laplacian(&u.values);
            let e = (0..g.len())
                .filter(|&p| (0.1..=0.7).contains(&g.radii[g.split(p).0]))
                .map(|p| (l[p] - src(g.node(p))).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let order = (errs[1] / errs[2]).log2();
        assert!(order >= 1.5, "{errs:?}");
    }

    proptest! {
        #[test]
        fn green_symmetry(r1 in 0.05f64..0.95, t1 in 0.0f64..PI, r2 in 0.05f64..0.95, t2 in 0.0f64..PI) {
            for dom in [Domain::ball(2, 1.0), Domain::half_disk(2, 1.0)] {
                let x = [r1 * t1.cos(), r1 * t1.sin()];
                let y = [r2 * t2.cos(), r2 * t2.sin()];
                if dist(&x, &y) > 1e-6 {
                    let a = green_kernel(&dom, &x, &y).unwrap();
                    let b = green_kernel(&dom, &y, &x).unwrap();
                    prop_assert!((a - b).abs() < 1e-13);
                    prop_assert!(a >= -1e-15);
                }
            }
        }

        #[test]
        fn poisson_is_positive(r in 0.01f64..0.99, t in 0.01f64..3.1, s in -0.99f64..0.99) {
            let h = Domain::half_disk(2, 1.0);
            let x = [r * t.cos(), r * t.sin()];
            prop_assert!(poisson_kernel(&h, &x, &[s, 0.0]) >= 0.0);
        }
    }
}
