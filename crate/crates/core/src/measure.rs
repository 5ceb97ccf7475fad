//! Finite positive measures on the boundary and in the interior.

use crate::error::{LabError, Result};
use crate::geometry::{Domain, DomainKind, SurfaceQuadrature};
use crate::grid::GridField;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

/// Density samples at the nodes of the level-zero surface quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDensity {
    pub quadrature: SurfaceQuadrature,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    pub domain: Domain,
    pub atoms: Vec<Atom>,
    pub density: Option<BoundaryDensity>,
}

impl BoundaryMeasure {
    pub fn zero(domain: &Domain) -> Self {
        Self { domain: domain.clone(), atoms: Vec::new(), density: None }
    }

    pub fn atom(domain: &Domain, point: Vec<f64>, mass: f64) -> Result<Self> {
        let mut m = Self::zero(domain);
        m.push_atom(point, mass)?;
        Ok(m)
    }

    /// Atom of the given mass at the domain's singular anchor.
    pub fn anchor_atom(domain: &Domain, mass: f64) -> Self {
        if mass == 0.0 {
            return Self::zero(domain);
        }
        Self::atom(domain, domain.singular_anchor(), mass).expect("anchor lies on the boundary")
    }

    pub fn push_atom(&mut self, point: Vec<f64>, mass: f64) -> Result<()> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(LabError::InvalidInput(format!("atom mass {mass}")));
        }
        let d = self.domain.boundary_distance(&point)?;
        if d > 1e-12 * self.domain.radius {
            return Err(LabError::InvalidInput(format!("atom {point:?} is not on the boundary")));
        }
        self.atoms.push(Atom { point, mass });
        Ok(())
    }

    /// Samples `f` on a level-zero quadrature of `m` nodes.
    pub fn from_density(domain: &Domain, m: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let quadrature = domain.level_surface(0.0, m)?;
        let values: Vec<f64> = quadrature.nodes.iter().map(|x| f(x)).collect();
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(LabError::InvalidInput("density must be finite and nonnegative".into()));
        }
        Ok(Self { domain: domain.clone(), atoms: Vec::new(), density: Some(BoundaryDensity { quadrature, values }) })
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        for a in &mut m.atoms {
            a.mass *= c;
        }
        if let Some(d) = &mut m.density {
            for v in &mut d.values {
                *v *= c;
            }
        }
        if c == 0.0 {
            m.atoms.clear();
        }
        m
    }

    pub fn total_mass(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let d = self
            .density
            .as_ref()
            .map(|d| d.values.iter().zip(&d.quadrature.weights).map(|(v, w)| v * w).sum())
            .unwrap_or(0.0);
        a + d
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }

    /// Density value at a boundary point (zero without a density part).
    ///
    /// Ball, N=2: trigonometric interpolation. Otherwise piecewise-linear along
    /// the boundary parameter of each boundary piece.
    pub fn density_at(&self, sigma: &[f64]) -> f64 {
        let Some(d) = &self.density else { return 0.0 };
        match (self.domain.kind, self.domain.dim) {
            (DomainKind::Ball, 2) => {
                let t = sigma[1].atan2(sigma[0]);
                let coeffs = fourier_coefficients(&d.values);
                eval_fourier(&coeffs, 1.0, t)
            }
            (DomainKind::HalfDisk, 2) => {
                let on_flat = sigma[1].abs() < 1e-12 && sigma[0].abs() < self.domain.radius * (1.0 - 1e-12);
                let mut pts: Vec<(f64, f64)> = d
                    .quadrature
                    .nodes
                    .iter()
                    .zip(&d.values)
                    .filter(|(x, _)| (x[1].abs() < 1e-12) == on_flat)
                    .map(|(x, v)| (if on_flat { x[0] } else { x[1].atan2(x[0]) }, *v))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let t = if on_flat { sigma[0] } else { sigma[1].atan2(sigma[0]) };
                linear_lookup(&pts, t)
            }
            _ => {
                // nearest node on the surface
                let mut best = (f64::INFINITY, 0.0);
                for (x, v) in d.quadrature.nodes.iter().zip(&d.values) {
                    let dd = crate::geometry::dist(x, sigma);
                    if dd < best.0 {
                        best = (dd, *v);
                    }
                }
                best.1
            }
        }
    }

    pub fn min_density(&self) -> Option<f64> {
        self.density.as_ref().map(|d| d.values.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// `∫ φ dμ`.
    pub fn integrate(&self, phi: impl Fn(&[f64]) -> f64) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| a.mass * phi(&a.point)).sum();
        let d = self
            .density
            .as_ref()
            .map(|d| {
                d.values
                    .iter()
                    .zip(&d.quadrature.weights)
                    .zip(&d.quadrature.nodes)
                    .map(|((v, w), x)| v * w * phi(x))
                    .sum()
            })
            .unwrap_or(0.0);
        a + d
    }
}

fn linear_lookup(pts: &[(f64, f64)], t: f64) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    if t <= pts[0].0 {
        return pts[0].1;
    }
    if t >= pts[pts.len() - 1].0 {
        return pts[pts.len() - 1].1;
    }
    let k = pts.partition_point(|p| p.0 <= t);
    let (a, b) = (pts[k - 1], pts[k]);
    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
}

/// Complex Fourier coefficients `(re, im)` for wavenumbers `0..=m/2` of equispaced samples.
pub fn fourier_coefficients(values: &[f64]) -> Vec<(f64, f64)> {
    let m = values.len();
    let kmax = m / 2;
    (0..=kmax)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, v) in values.iter().enumerate() {
                let a = 2.0 * PI * (k * j % m) as f64 / m as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            (re / m as f64, im / m as f64)
        })
        .collect()
}

/// Evaluates `Σ_k c_k ρ^{|k|} e^{ikθ}` for a real signal; the Nyquist term is halved when `m` is even.
pub fn eval_fourier(coeffs: &[(f64, f64)], rho: f64, theta: f64) -> f64 {
    let mut s = coeffs[0].0;
    let last = coeffs.len() - 1;
    let mut pk = 1.0;
    for (k, &(re, im)) in coeffs.iter().enumerate().skip(1) {
        pk *= rho;
        let w = if k == last { 1.0 } else { 2.0 };
        let a = k as f64 * theta;
        s += w * pk * (re * a.cos() - im * a.sin());
    }
    s
}

/// Interior measure: atoms strictly inside plus an optional density on a grid.
#[derive(Clone, Debug)]
pub struct InteriorMeasure {
    pub atoms: Vec<Atom>,
    pub density: Option<GridField>,
}

impl InteriorMeasure {
    pub fn zero() -> Self {
        Self { atoms: Vec::new(), density: None }
    }

    pub fn atom(point: Vec<f64>, mass: f64) -> Self {
        Self { atoms: vec![Atom { point, mass }], density: None }
    }

    pub fn total_mass(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let d = self
            .density
            .as_ref()
            .map(|f| f.values.iter().zip(&f.grid.weights).map(|(v, w)| v * w).sum())
            .unwrap_or(0.0);
        a + d
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        for a in &self.atoms {
            if !(a.mass > 0.0) {
                return Err(LabError::InvalidInput(format!("atom mass {}", a.mass)));
            }
            if domain.boundary_distance(&a.point)? <= 0.0 {
                return Err(LabError::InvalidInput("interior atom on the boundary".into()));
            }
        }
        Ok(())
    }
}
