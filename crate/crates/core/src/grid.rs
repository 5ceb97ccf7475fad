//! Structured polar grids over the two-dimensional canonical domains and the
//! scalar fields that live on them.
//!
//! Three layouts are provided:
//!
//! * `Polar`: the ball with uniform radial nodes `r_i = (i + ½)h` (the last one
//!   on the circle) and a periodic, spectrally differentiated angle.
//! * `AnchorGraded`: the half-disk in log-polar coordinates around the corner
//!   anchor. Radii form a geometric sequence of ratio `grading` ending at `R`;
//!   angles run over `[0, π]` with the flat boundary on the end rays.
//! * `CenterGraded`: the ball in log-polar coordinates around its center, used
//!   for point sources placed at the center.
//!
//! Nodes are numbered `p = i·n_θ + j` (radius-major).

use crate::error::{LabError, Result};
use crate::geometry::{Domain, DomainKind};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    Polar,
    AnchorGraded,
    CenterGraded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default)]
    pub layout: Option<Layout>,
}

fn default_grading() -> f64 {
    0.9
}

impl GridSpec {
    pub fn new(n_r: usize, n_theta: usize, grading: f64) -> Self {
        Self { n_r, n_theta, grading, layout: None }
    }

    pub fn polar(n_r: usize, n_theta: usize) -> Self {
        Self { n_r, n_theta, grading: 1.0, layout: Some(Layout::Polar) }
    }

    pub fn anchor(n_r: usize, n_theta: usize, grading: f64) -> Self {
        Self { n_r, n_theta, grading, layout: Some(Layout::AnchorGraded) }
    }

    pub fn centered(n_r: usize, n_theta: usize, grading: f64) -> Self {
        Self { n_r, n_theta, grading, layout: Some(Layout::CenterGraded) }
    }
}

/// Role of a node in boundary-value problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    /// On the curved boundary `|x| = R`.
    Outer,
    /// On the flat boundary of the half-disk.
    Flat,
    /// On the small artificial circle around the grading center.
    Inner,
}

#[derive(Clone, Debug)]
pub struct PolarGrid {
    pub domain: Domain,
    pub layout: Layout,
    pub spec: GridSpec,
    /// Distance of each ring from the grid center.
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    /// Uniform step in `r` (Polar) or in `s = ln ρ` (graded layouts).
    pub step: f64,
    pub dtheta: f64,
    pub weights: Vec<f64>,
}

impl PolarGrid {
    pub fn new(domain: &Domain, spec: &GridSpec) -> Result<Self> {
        if domain.dim != 2 {
            return Err(LabError::UnsupportedDimension(domain.dim));
        }
        let (n_r, n_t) = (spec.n_r, spec.n_theta);
        if n_r < 16 || n_t < 16 {
            return Err(LabError::InvalidInput(format!("grid {n_r}x{n_t} below 16x16")));
        }
        if !(spec.grading > 0.0 && spec.grading <= 1.0) {
            return Err(LabError::InvalidInput(format!("grading {} outside (0, 1]", spec.grading)));
        }
        let layout = spec.layout.unwrap_or(match domain.kind {
            DomainKind::Ball if spec.grading == 1.0 => Layout::Polar,
            DomainKind::Ball => Layout::CenterGraded,
            DomainKind::HalfDisk => Layout::AnchorGraded,
        });
        let r_max = domain.radius;
        let (radii, step, angles, dtheta) = match (layout, domain.kind) {
            (Layout::Polar, DomainKind::Ball) => {
                if spec.grading != 1.0 {
                    return Err(LabError::InvalidInput("the polar layout is ungraded".into()));
                }
                if n_t % 2 != 0 {
                    return Err(LabError::InvalidInput("polar layout needs an even angular count".into()));
                }
                let h = r_max / (n_r as f64 - 0.5);
                let radii = (0..n_r).map(|i| (i as f64 + 0.5) * h).collect();
                let dt = 2.0 * PI / n_t as f64;
                (radii, h, (0..n_t).map(|j| j as f64 * dt).collect(), dt)
            }
            (Layout::AnchorGraded, DomainKind::HalfDisk) | (Layout::CenterGraded, DomainKind::Ball) => {
                if spec.grading >= 1.0 {
                    return Err(LabError::InvalidInput("graded layouts need grading < 1".into()));
                }
                let ds = -spec.grading.ln();
                let s_end = r_max.ln();
                let radii = (0..n_r).map(|i| (s_end - (n_r - 1 - i) as f64 * ds).exp()).collect();
                let (angles, dt) = if layout == Layout::AnchorGraded {
                    let dt = PI / (n_t as f64 - 1.0);
                    ((0..n_t).map(|j| j as f64 * dt).collect(), dt)
                } else {
                    let dt = 2.0 * PI / n_t as f64;
                    ((0..n_t).map(|j| j as f64 * dt).collect(), dt)
                };
                (radii, ds, angles, dt)
            }
            _ => {
                return Err(LabError::InvalidInput(format!("layout {layout:?} does not fit {:?}", domain.kind)));
            }
        };
        let mut spec = spec.clone();
        spec.layout = Some(layout);
        let mut g = Self { domain: domain.clone(), layout, spec, radii, angles, step, dtheta, weights: Vec::new() };
        g.weights = g.cell_areas();
        Ok(g)
    }

    pub fn n_r(&self) -> usize {
        self.radii.len()
    }

    pub fn n_theta(&self) -> usize {
        self.angles.len()
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_theta()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta() + j
    }

    pub fn split(&self, p: usize) -> (usize, usize) {
        (p / self.n_theta(), p % self.n_theta())
    }

    pub fn periodic(&self) -> bool {
        self.layout != Layout::AnchorGraded
    }

    pub fn graded(&self) -> bool {
        self.layout != Layout::Polar
    }

    /// Smallest ring radius of a graded layout (zero for the polar layout).
    pub fn inner_radius(&self) -> f64 {
        if self.graded() {
            self.radii[0]
        } else {
            0.0
        }
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let (r, t) = (self.radii[i], self.angles[j]);
        [r * t.cos(), r * t.sin()]
    }

    pub fn node(&self, p: usize) -> [f64; 2] {
        let (i, j) = self.split(p);
        self.point(i, j)
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|p| self.node(p)).collect()
    }

    pub fn kind(&self, p: usize) -> NodeKind {
        let (i, j) = self.split(p);
        let n_r = self.n_r();
        if self.layout == Layout::AnchorGraded && (j == 0 || j + 1 == self.n_theta()) {
            return NodeKind::Flat;
        }
        if i + 1 == n_r {
            return NodeKind::Outer;
        }
        if self.graded() && i == 0 {
            return NodeKind::Inner;
        }
        NodeKind::Interior
    }

    pub fn is_interior(&self, p: usize) -> bool {
        self.kind(p) == NodeKind::Interior
    }

    /// Distance of every node to the physical boundary.
    pub fn distances(&self) -> Vec<f64> {
        (0..self.len())
            .map(|p| {
                let x = self.node(p);
                let x = clamp_into(&self.domain, x);
                self.domain.boundary_distance(&x).unwrap_or(0.0)
            })
            .collect()
    }

    fn cell_areas(&self) -> Vec<f64> {
        let n_r = self.n_r();
        let n_t = self.n_theta();
        let mut w = vec![0.0; self.len()];
        for i in 0..n_r {
            let ring = match self.layout {
                Layout::Polar => {
                    let h = self.step;
                    let lo = (self.radii[i] - 0.5 * h).max(0.0);
                    let hi = (self.radii[i] + 0.5 * h).min(self.domain.radius);
                    0.5 * (hi * hi - lo * lo)
                }
                _ => {
                    let s = self.radii[i].ln();
                    let lo = if i == 0 { s } else { s - 0.5 * self.step };
                    let hi = if i + 1 == n_r { s } else { s + 0.5 * self.step };
                    0.5 * ((2.0 * hi).exp() - (2.0 * lo).exp())
                }
            };
            for j in 0..n_t {
                let dt = if self.layout == Layout::AnchorGraded && (j == 0 || j + 1 == n_t) {
                    0.5 * self.dtheta
                } else {
                    self.dtheta
                };
                w[self.index(i, j)] = ring * dt;
            }
        }
        w
    }

    /// Grid coordinates `(ξ, η)` in index units for a Cartesian point.
    fn index_coords(&self, x: [f64; 2]) -> Result<(f64, f64)> {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let tol = 1e-10;
        let out = || LabError::OutOfGrid(x.to_vec());
        if r > self.domain.radius * (1.0 + tol) {
            return Err(out());
        }
        let mut t = x[1].atan2(x[0]);
        match self.layout {
            Layout::Polar => {
                if t < 0.0 {
                    t += 2.0 * PI;
                }
                Ok((r / self.step - 0.5, t / self.dtheta))
            }
            Layout::CenterGraded | Layout::AnchorGraded => {
                if r < self.radii[0] * (1.0 - tol) {
                    return Err(out());
                }
                let xi = (r.ln() - self.radii[0].ln()) / self.step;
                if self.layout == Layout::CenterGraded {
                    if t < 0.0 {
                        t += 2.0 * PI;
                    }
                } else {
                    if x[1] < -tol * self.domain.radius {
                        return Err(out());
                    }
                    if t < 0.0 {
                        t = if t < -0.5 * PI { PI } else { 0.0 };
                    }
                }
                Ok((xi, t / self.dtheta))
            }
        }
    }
}

fn clamp_into(domain: &Domain, x: [f64; 2]) -> [f64; 2] {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let mut y = x;
    if r > domain.radius {
        y = [x[0] * domain.radius / r, x[1] * domain.radius / r];
    }
    if domain.kind == DomainKind::HalfDisk && y[1] < 0.0 {
        y[1] = 0.0;
    }
    y
}

/// Four-point Lagrange weights for nodes `0, 1, 2, 3` at coordinate `t`.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

/// Scalar samples on a grid, optionally with the polar gradient `(∂_r u, r⁻¹∂_θ u)`.
#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: Arc<PolarGrid>,
    pub values: Vec<f64>,
    pub grad: Option<Vec<[f64; 2]>>,
}

impl GridField {
    pub fn new(grid: Arc<PolarGrid>, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "field length must match the grid");
        Self { grid, values, grad: None }
    }

    pub fn zeros(grid: Arc<PolarGrid>) -> Self {
        let n = grid.len();
        Self::new(grid, vec![0.0; n])
    }

    pub fn from_fn(grid: Arc<PolarGrid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(grid.node(p))).collect();
        Self::new(grid, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.grid.domain
    }

    /// Gradient magnitude per node, if the cache is filled.
    pub fn grad_norm(&self) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g.iter().map(|v| v[0].hypot(v[1])).collect())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min)
    }

    /// Bicubic Lagrange interpolation in grid-index space.
    pub fn interpolate(&self, x: [f64; 2]) -> Result<f64> {
        let g = &*self.grid;
        let (xi, eta) = g.index_coords(x)?;
        let n_r = g.n_r() as isize;
        let n_t = g.n_theta() as isize;
        let (i0, ti) = match g.layout {
            Layout::Polar => {
                let i0 = (xi.floor() as isize - 1).clamp(-2, n_r - 4);
                (i0, xi - i0 as f64)
            }
            _ => {
                let i0 = (xi.floor() as isize - 1).clamp(0, n_r - 4);
                (i0, xi - i0 as f64)
            }
        };
        let (j0, tj) = if g.periodic() {
            let j0 = eta.floor() as isize - 1;
            (j0, eta - j0 as f64)
        } else {
            let j0 = (eta.floor() as isize - 1).clamp(0, n_t - 4);
            (j0, eta - j0 as f64)
        };
        let wi = cubic_weights(ti);
        let wj = cubic_weights(tj);
        let mut acc = 0.0;
        for (a, wa) in wi.iter().enumerate() {
            let i = i0 + a as isize;
            let (ii, shift) = if i < 0 { ((-1 - i) as usize, n_t / 2) } else { (i as usize, 0) };
            for (b, wb) in wj.iter().enumerate() {
                let j = j0 + b as isize + shift;
                let jj = j.rem_euclid(n_t) as usize;
                acc += wa * wb * self.values[g.index(ii, jj)];
            }
        }
        Ok(acc)
    }

    /// Writes the field as CSV: a `#` line with the grid parameters, a column header, one row per node.
    pub fn to_csv(&self) -> String {
        let g = &*self.grid;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# domain={:?} N={} R={} layout={:?} n_r={} n_theta={} grading={}",
            g.domain.kind,
            g.domain.dim,
            g.domain.radius,
            g.layout,
            g.n_r(),
            g.n_theta(),
            g.spec.grading
        );
        if self.grad.is_some() {
            s.push_str("r,theta,value,grad_r,grad_theta\n");
        } else {
            s.push_str("r,theta,value\n");
        }
        for p in 0..g.len() {
            let (i, j) = g.split(p);
            let _ = write!(s, "{},{},{}", g.radii[i], g.angles[j], self.values[p]);
            if let Some(gr) = &self.grad {
                let _ = write!(s, ",{},{}", gr[p][0], gr[p][1]);
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| LabError::Parse("empty csv".into()))?;
        let head = head.strip_prefix('#').ok_or_else(|| LabError::Parse("missing grid line".into()))?;
        let mut kind = None;
        let (mut dim, mut radius, mut layout, mut n_r, mut n_t, mut grading) = (2, 1.0, None, 0, 0, 1.0);
        for tok in head.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| LabError::Parse(tok.into()))?;
            let bad = |_| LabError::Parse(format!("bad value for {k}"));
            match k {
                "domain" => {
                    kind = Some(match v {
                        "Ball" => DomainKind::Ball,
                        "HalfDisk" => DomainKind::HalfDisk,
                        _ => return Err(LabError::Parse(format!("domain {v}"))),
                    })
                }
                "N" => dim = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "R" => radius = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                "layout" => {
                    layout = Some(match v {
                        "Polar" => Layout::Polar,
                        "AnchorGraded" => Layout::AnchorGraded,
                        "CenterGraded" => Layout::CenterGraded,
                        _ => return Err(LabError::Parse(format!("layout {v}"))),
                    })
                }
                "n_r" => n_r = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "n_theta" => n_t = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "grading" => grading = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                _ => {}
            }
        }
        let domain = Domain::new(kind.ok_or_else(|| LabError::Parse("no domain".into()))?, dim, radius)?;
        let grid = Arc::new(PolarGrid::new(&domain, &GridSpec { n_r, n_theta: n_t, grading, layout })?);
        let cols = lines.next().ok_or_else(|| LabError::Parse("missing header".into()))?;
        let with_grad = cols.split(',').count() == 5;
        let mut values = Vec::with_capacity(grid.len());
        let mut grad = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let v: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| LabError::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            values.push(v[2]);
            if with_grad {
                grad.push([v[3], v[4]]);
            }
        }
        if values.len() != grid.len() {
            return Err(LabError::Parse(format!("{} rows for {} nodes", values.len(), grid.len())));
        }
        let mut f = GridField::new(grid, values);
        if with_grad {
            f.grad = Some(grad);
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polar_areas_are_exact() {
        let g = PolarGrid::new(&Domain::ball(2, 1.0), &GridSpec::polar(32, 16)).unwrap();
        let total: f64 = g.weights.iter().sum();
        assert!((total - PI).abs() < 1e-12);
        assert!((g.radii[31] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn graded_areas() {
        let g = PolarGrid::new(&Domain::half_disk(2, 1.0), &GridSpec::anchor(60, 33, 0.9)).unwrap();
        let rmin = g.inner_radius();
        let total: f64 = g.weights.iter().sum();
        assert!((total - 0.5 * PI * (1.0 - rmin * rmin)).abs() < 1e-12);
        assert_eq!(g.kind(g.index(5, 0)), NodeKind::Flat);
        assert_eq!(g.kind(g.index(0, 5)), NodeKind::Inner);
        assert_eq!(g.kind(g.index(59, 5)), NodeKind::Outer);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(PolarGrid::new(&Domain::ball(2, 1.0), &GridSpec::polar(8, 16)).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let g = Arc::new(PolarGrid::new(&Domain::ball(2, 1.0), &GridSpec::polar(40, 32)).unwrap());
        // x² y is a trigonometric polynomial of degree 3 in θ and cubic in r
        let f = |x: [f64; 2]| x[0] * x[0] * x[1] + 0.5 * x[1];
        let field = GridField::from_fn(g.clone(), f);
        for &(r, t) in &[(0.01, 0.3), (0.3, 1.0), (0.77, 4.0), (0.999, 2.0)] {
            let x = [r * f64::cos(t), r * f64::sin(t)];
            let v = field.interpolate(x).unwrap();
            assert!((v - f(x)).abs() < 1e-3, "{v} vs {}", f(x));
        }
    }

    #[test]
    fn graded_interpolation() {
        let g = Arc::new(PolarGrid::new(&Domain::half_disk(2, 1.0), &GridSpec::anchor(120, 65, 0.9)).unwrap());
        let f = |x: [f64; 2]| x[1] / (x[0] * x[0] + x[1] * x[1]);
        let field = GridField::from_fn(g, f);
        for &(r, t) in &[(1e-3, 0.3), (0.05, 1.5), (0.5, 3.0)] {
            let x = [r * f64::cos(t), r * f64::sin(t)];
            let v = field.interpolate(x).unwrap();
            assert!((v / f(x) - 1.0).abs() < 1e-3);
        }
        assert!(field.interpolate([0.0, 1e-9]).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(seed in 0u64..500) {
            let g = Arc::new(PolarGrid::new(&Domain::half_disk(2, 1.0), &GridSpec::anchor(16, 17, 0.8)).unwrap());
            let vals: Vec<f64> = (0..g.len()).map(|p| ((p as u64 ^ seed) as f64).sin() * 1e3).collect();
            let mut f = GridField::new(g.clone(), vals);
            f.grad = Some((0..g.len()).map(|p| [p as f64 / 7.0, -(seed as f64)]).collect());
            let back = GridField::from_csv(&f.to_csv()).unwrap();
            prop_assert_eq!(&back.values, &f.values);
            prop_assert_eq!(&back.grad, &f.grad);
            prop_assert_eq!(back.grid.radii.len(), 16);
        }
    }
}
