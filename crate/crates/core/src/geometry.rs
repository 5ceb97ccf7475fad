//! Canonical domains: the ball `B_R ⊂ ℝ^N` and the flat model `B_R ∩ ℝ^N_+`.
//!
//! Points are plain slices of length `N`. The last coordinate is the one
//! normal to the flat boundary of the half-disk.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const CLOSURE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    Ball,
    HalfDisk,
}

/// A canonical domain. Serializes as `{"kind","N","R"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "R")]
    pub radius: f64,
}

/// Nodes and weights on the level surface `Σ_δ = {d = δ}`.
///
/// `feet` holds the boundary projection `σ(x)` of every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceQuadrature {
    pub level: f64,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub feet: Vec<Vec<f64>>,
}

impl SurfaceQuadrature {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl Domain {
    pub fn new(kind: DomainKind, dim: usize, radius: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(LabError::UnsupportedDimension(dim));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidInput(format!("radius {radius}")));
        }
        Ok(Self { kind, dim, radius })
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        Self::new(DomainKind::Ball, dim, radius).expect("valid ball")
    }

    pub fn half_disk(dim: usize, radius: f64) -> Self {
        Self::new(DomainKind::HalfDisk, dim, radius).expect("valid half-disk")
    }

    /// Reach of the flow coordinates.
    pub fn reach(&self) -> f64 {
        match self.kind {
            DomainKind::Ball => self.radius,
            DomainKind::HalfDisk => 0.5 * self.radius,
        }
    }

    /// Default singular anchor: the south pole of the ball, the corner origin of the half-disk.
    pub fn singular_anchor(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.dim];
        if self.kind == DomainKind::Ball {
            a[self.dim - 1] = -self.radius;
        }
        a
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(LabError::InvalidInput(format!(
                "point of length {} in dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let slack = CLOSURE_SLACK * self.radius;
        let inside_ball = norm(x) <= self.radius + slack;
        match self.kind {
            DomainKind::Ball => inside_ball,
            DomainKind::HalfDisk => inside_ball && x[self.dim - 1] >= -slack,
        }
    }

    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.contains_closed(x) {
            return Err(LabError::PointOutsideDomain(x.to_vec()));
        }
        let to_sphere = (self.radius - norm(x)).max(0.0);
        Ok(match self.kind {
            DomainKind::Ball => to_sphere,
            DomainKind::HalfDisk => to_sphere.min(x[self.dim - 1].max(0.0)),
        })
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, sigma: &[f64]) -> Vec<f64> {
        let r = norm(sigma);
        let on_flat = self.kind == DomainKind::HalfDisk
            && sigma[self.dim - 1].abs() <= CLOSURE_SLACK * self.radius
            && r < self.radius * (1.0 - 1e-12);
        if on_flat {
            let mut n = vec![0.0; self.dim];
            n[self.dim - 1] = -1.0;
            n
        } else {
            sigma.iter().map(|v| v / r).collect()
        }
    }

    /// Returns `(δ, σ)` with `x = σ − δ n_σ`.
    pub fn flow_coordinates(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.boundary_distance(x)?;
        if !(d > 0.0 && d < self.reach()) {
            return Err(LabError::OutsideFlowRegion(x.to_vec()));
        }
        let r = norm(x);
        let to_sphere = self.radius - r;
        match self.kind {
            DomainKind::Ball => {
                let sigma = x.iter().map(|v| v * self.radius / r).collect();
                Ok((d, sigma))
            }
            DomainKind::HalfDisk => {
                let h = x[self.dim - 1];
                if (h - to_sphere).abs() <= 1e-13 * self.radius {
                    return Err(LabError::OutsideFlowRegion(x.to_vec()));
                }
                if h < to_sphere {
                    let mut sigma = x.to_vec();
                    sigma[self.dim - 1] = 0.0;
                    Ok((h, sigma))
                } else {
                    let sigma = x.iter().map(|v| v * self.radius / r).collect();
                    Ok((to_sphere, sigma))
                }
            }
        }
    }

    /// Inverse of [`Domain::flow_coordinates`].
    pub fn from_flow(&self, delta: f64, sigma: &[f64]) -> Vec<f64> {
        let n = self.outward_normal(sigma);
        sigma.iter().zip(&n).map(|(s, nn)| s - delta * nn).collect()
    }

    /// Exact measure of `Σ_δ`.
    pub fn level_measure(&self, delta: f64) -> Result<f64> {
        if delta < 0.0 || delta >= self.reach() {
            return Err(LabError::LevelTooDeep { delta, reach: self.reach() });
        }
        let rho = self.radius - delta;
        Ok(match (self.kind, self.dim) {
            (DomainKind::Ball, 2) => 2.0 * PI * rho,
            (DomainKind::Ball, _) => 4.0 * PI * rho * rho,
            (DomainKind::HalfDisk, 2) => {
                let a = (rho * rho - delta * delta).sqrt();
                2.0 * a + rho * (PI - 2.0 * (delta / rho).asin())
            }
            (DomainKind::HalfDisk, _) => {
                let a2 = rho * rho - delta * delta;
                PI * a2 + 2.0 * PI * rho * rho * (1.0 - delta / rho)
            }
        })
    }

    /// Quadrature on `Σ_δ` with about `m` nodes.
    ///
    /// Ball, N=2: `m` equispaced angles. Ball, N=3: `m` colatitude bands with
    /// exact band areas times `2m` longitudes. Half-disk: nodes shared between
    /// the flat piece and the curved piece in proportion to their measures,
    /// each piece with midpoint nodes and exact piece measure.
    pub fn level_surface(&self, delta: f64, m: usize) -> Result<SurfaceQuadrature> {
        if m < 8 {
            return Err(LabError::InvalidInput(format!("level surface needs m >= 8, got {m}")));
        }
        if delta < 0.0 || delta >= self.reach() {
            return Err(LabError::LevelTooDeep { delta, reach: self.reach() });
        }
        let rho = self.radius - delta;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match (self.kind, self.dim) {
            (DomainKind::Ball, 2) => {
                let w = 2.0 * PI * rho / m as f64;
                for k in 0..m {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    nodes.push(vec![rho * t.cos(), rho * t.sin()]);
                    weights.push(w);
                }
            }
            (DomainKind::Ball, _) => {
                push_spherical_cap(rho, PI, m, &mut nodes, &mut weights);
            }
            (DomainKind::HalfDisk, 2) => {
                let a = (rho * rho - delta * delta).sqrt();
                let alpha = (delta / rho).asin();
                let l_seg = 2.0 * a;
                let l_arc = rho * (PI - 2.0 * alpha);
                let m_seg = ((m as f64 * l_seg / (l_seg + l_arc)).round() as usize).clamp(2, m - 2);
                let m_arc = m - m_seg;
                for k in 0..m_seg {
                    let t = -a + l_seg * (k as f64 + 0.5) / m_seg as f64;
                    nodes.push(vec![t, delta]);
                    weights.push(l_seg / m_seg as f64);
                }
                for k in 0..m_arc {
                    let t = alpha + (PI - 2.0 * alpha) * (k as f64 + 0.5) / m_arc as f64;
                    nodes.push(vec![rho * t.cos(), rho * t.sin()]);
                    weights.push(l_arc / m_arc as f64);
                }
            }
            (DomainKind::HalfDisk, _) => {
                let a = (rho * rho - delta * delta).sqrt();
                let theta_max = (delta / rho).acos();
                let flat_area = PI * a * a;
                let cap_area = 2.0 * PI * rho * rho * (1.0 - theta_max.cos());
                let m_flat = ((m as f64 * flat_area / (flat_area + cap_area)).round() as usize).clamp(2, m - 2);
                let m_cap = m - m_flat;
                let n_lon = 2 * m_flat;
                for i in 0..m_flat {
                    let r0 = a * i as f64 / m_flat as f64;
                    let r1 = a * (i + 1) as f64 / m_flat as f64;
                    let rm = 0.5 * (r0 + r1);
                    let w = PI * (r1 * r1 - r0 * r0) / n_lon as f64;
                    for k in 0..n_lon {
                        let t = 2.0 * PI * (k as f64 + 0.5) / n_lon as f64;
                        nodes.push(vec![rm * t.cos(), rm * t.sin(), delta]);
                        weights.push(w);
                    }
                }
                push_spherical_cap(rho, theta_max, m_cap, &mut nodes, &mut weights);
            }
        }
        let feet = nodes
            .iter()
            .map(|x| self.project_to_boundary(x, delta))
            .collect();
        Ok(SurfaceQuadrature { level: delta, nodes, weights, feet })
    }

    /// Boundary foot of a point known to lie on `Σ_δ`. Degenerates gracefully at δ = 0.
    fn project_to_boundary(&self, x: &[f64], delta: f64) -> Vec<f64> {
        if delta > 0.0 {
            if let Ok((_, s)) = self.flow_coordinates(x) {
                return s;
            }
        }
        let r = norm(x);
        let on_flat = self.kind == DomainKind::HalfDisk
            && (x[self.dim - 1] - delta).abs() <= 1e-12 * self.radius
            && r < self.radius - delta - 1e-12 * self.radius;
        if on_flat {
            let mut s = x.to_vec();
            s[self.dim - 1] = 0.0;
            s
        } else if r > 0.0 {
            x.iter().map(|v| v * self.radius / r).collect()
        } else {
            x.to_vec()
        }
    }
}

/// Colatitude bands on `[0, θ_max]` of a sphere of radius `rho` with exact band areas.
fn push_spherical_cap(rho: f64, theta_max: f64, m: usize, nodes: &mut Vec<Vec<f64>>, weights: &mut Vec<f64>) {
    let n_lon = 2 * m;
    for i in 0..m {
        let t0 = theta_max * i as f64 / m as f64;
        let t1 = theta_max * (i + 1) as f64 / m as f64;
        let tm = 0.5 * (t0 + t1);
        let band = 2.0 * PI * rho * rho * (t0.cos() - t1.cos());
        for k in 0..n_lon {
            let p = 2.0 * PI * (k as f64 + 0.5) / n_lon as f64;
            let s = tm.sin();
            nodes.push(vec![rho * s * p.cos(), rho * s * p.sin(), rho * tm.cos()]);
            weights.push(band / n_lon as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distances() {
        let b = Domain::ball(2, 1.0);
        assert_eq!(b.boundary_distance(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(b.boundary_distance(&[0.5, 0.0]).unwrap(), 0.5);
        let h = Domain::half_disk(2, 1.0);
        let x = [0.3, 0.1];
        let oracle = f64::min(0.1, 1.0 - (0.09f64 + 0.01).sqrt());
        assert!((h.boundary_distance(&x).unwrap() - oracle).abs() < 1e-15);
        assert!(matches!(h.boundary_distance(&[0.0, -0.2]), Err(LabError::PointOutsideDomain(_))));
    }

    #[test]
    fn flow_examples() {
        let b = Domain::ball(2, 1.0);
        let (d, s) = b.flow_coordinates(&[0.0, 0.5]).unwrap();
        assert!((d - 0.5).abs() < 1e-15 && s[0].abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
        let h = Domain::half_disk(2, 1.0);
        let (d, s) = h.flow_coordinates(&[0.2, 0.05]).unwrap();
        assert!((d - 0.05).abs() < 1e-15);
        assert_eq!(s, vec![0.2, 0.0]);
        assert!(matches!(b.flow_coordinates(&[0.0, 0.0]), Err(LabError::OutsideFlowRegion(_))));
    }

    #[test]
    fn half_disk_ties_are_rejected() {
        let h = Domain::half_disk(2, 1.0);
        // equidistant from the flat part and the arc
        let t: f64 = 0.3;
        let r = 1.0 - t;
        let x = [(r * r - t * t).sqrt(), t];
        assert!(matches!(h.flow_coordinates(&x), Err(LabError::OutsideFlowRegion(_))));
    }

    #[test]
    fn level_weights_ball() {
        let b = Domain::ball(2, 1.0);
        let q0 = b.level_surface(0.0, 360).unwrap();
        assert!((q0.total_weight() - 2.0 * PI).abs() < 1e-12);
        let q1 = b.level_surface(0.5, 360).unwrap();
        assert!((q1.total_weight() - PI).abs() < 1e-12);
        let b3 = Domain::ball(3, 1.0);
        let q3 = b3.level_surface(0.25, 40).unwrap();
        assert!((q3.total_weight() / (4.0 * PI * 0.5625) - 1.0).abs() < 1e-10);
        assert!(matches!(b.level_surface(1.0, 10), Err(LabError::LevelTooDeep { .. })));
    }

    #[test]
    fn level_weights_half_disk_match_numerical_length() {
        let h = Domain::half_disk(2, 1.0);
        let q = h.level_surface(0.1, 100).unwrap();
        // independent oracle: polyline length of the composite curve
        let n = 200_000;
        let mut len = 0.0;
        let rho: f64 = 0.9;
        let a = (rho * rho - 0.01f64).sqrt();
        len += 2.0 * a;
        let alpha = (0.1f64 / rho).asin();
        let mut prev = [rho * alpha.cos(), rho * alpha.sin()];
        for k in 1..=n {
            let t = alpha + (PI - 2.0 * alpha) * k as f64 / n as f64;
            let p = [rho * t.cos(), rho * t.sin()];
            len += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
            prev = p;
        }
        assert!((q.total_weight() - len).abs() < 1e-9);
        for (x, s) in q.nodes.iter().zip(&q.feet) {
            assert!((h.boundary_distance(x).unwrap() - 0.1).abs() < 1e-12);
            let back = h.from_flow(0.1, s);
            assert!(dist(&back, x) < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn ball_round_trip(r in 0.01f64..0.999, t in 0.0f64..(2.0 * PI)) {
            let b = Domain::ball(2, 1.0);
            let x = [r * t.cos(), r * t.sin()];
            let (d, s) = b.flow_coordinates(&x).unwrap();
            let y = b.from_flow(d, &s);
            prop_assert!(dist(&x, &y) < 1e-12);
        }

        #[test]
        fn half_disk_round_trip(r in 0.01f64..0.99, t in 0.01f64..(PI - 0.01)) {
            let h = Domain::half_disk(2, 1.0);
            let x = [r * t.cos(), r * t.sin()];
            if let Ok((d, s)) = h.flow_coordinates(&x) {
                let y = h.from_flow(d, &s);
                prop_assert!(dist(&x, &y) < 1e-12);
            }
        }

        #[test]
        fn distance_is_lipschitz(r1 in 0.0f64..1.0, t1 in 0.0f64..PI, r2 in 0.0f64..1.0, t2 in 0.0f64..PI) {
            for dom in [Domain::ball(2, 1.0), Domain::half_disk(2, 1.0)] {
                let x = [r1 * t1.cos(), r1 * t1.sin()];
                let y = [r2 * t2.cos(), r2 * t2.sin()];
                let dd = (dom.boundary_distance(&x).unwrap() - dom.boundary_distance(&y).unwrap()).abs();
                prop_assert!(dd <= dist(&x, &y) + 1e-14);
            }
        }

        #[test]
        fn ball_level_measure_decreases(d1 in 0.0f64..0.99, d2 in 0.0f64..0.99) {
            let b = Domain::ball(2, 1.0);
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let a = b.level_surface(lo, 64).unwrap();
            let c = b.level_surface(hi, 64).unwrap();
            prop_assert!(a.weights.iter().all(|w| *w > 0.0));
            prop_assert!(a.total_weight() >= c.total_weight());
        }
    }
}
