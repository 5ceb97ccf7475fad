//! Scaling analysis of boundary singularities: the transform `T_ℓ`, self-similar
//! extraction, weak/strong/removable classification, the collapse and
//! increasing-mass experiments, point capacities and the interior cutoff identity.

use crate::error::{LabError, Result};
use crate::geometry::{Domain, DomainKind};
use crate::grid::GridField;
use crate::kernels::poisson_kernel;
use crate::measure::BoundaryMeasure;
use crate::profile::{exponents, solve_profile, Profile, ShootingConfig};
use crate::solver::{
    build_grid, gradient_envelope, keller_osserman_violations, solve_dirichlet, solve_with_boundary_values, AbsorptionLaw,
    Solution, SolverConfig,
};
use crate::stencil::GridOperators;
use crate::trace::{boundary_arclength, dyadic_limit, fit_line, perimeter};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ratio growth that counts as divergence of `u/P`.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
/// Sup-distance to `ω_s`, relative to `max ω_s`, accepted for a strong verdict.
pub const PROFILE_TOLERANCE: f64 = 0.05;

fn beta_of(q: f64) -> Result<f64> {
    if !(q > 1.0 && q < 2.0) {
        return Err(LabError::QOutOfRange(q));
    }
    Ok((2.0 - q) / (q - 1.0))
}

fn anchor_frame(domain: &Domain, z: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let n = domain.outward_normal(&z);
    let inward = [-n[0], -n[1]];
    (inward, [inward[1], -inward[0]])
}

fn anchor_of(domain: &Domain) -> [f64; 2] {
    let a = domain.singular_anchor();
    [a[0], a[1]]
}

/// `T_ℓ[u](x) = ℓ^β u(z + ℓ(x − z))` on the nodes of the source grid, `z` the
/// domain anchor. Nodes whose image falls into the unresolved core of a graded
/// grid get NaN.
pub fn rescale(field: &GridField, ell: f64, q: f64) -> Result<GridField> {
    if !(ell > 0.0 && ell <= 1.0) {
        return Err(LabError::InvalidInput(format!("scale factor {ell} outside (0, 1]")));
    }
    let beta = beta_of(q)?;
    let z = anchor_of(field.domain());
    let factor = ell.powf(beta);
    let values = field
        .grid
        .nodes()
        .par_iter()
        .map(|x| {
            let y = [z[0] + ell * (x[0] - z[0]), z[1] + ell * (x[1] - z[1])];
            match field.interpolate(y) {
                Ok(v) => Ok(factor * v),
                Err(LabError::OutOfGrid(_)) => Ok(f64::NAN),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.iter().all(|v| v.is_nan()) {
        return Err(LabError::OutOfGrid(z.to_vec()));
    }
    Ok(GridField::new(field.grid.clone(), values))
}

/// Samples of `ℓ^β u(z + ℓ(sin φ·t + cos φ·n))` on the unit half-circle, `n` the
/// inward normal and `t` the tangent at the anchor.
#[derive(Clone, Debug, Serialize)]
pub struct SelfSimilar {
    pub ells: Vec<f64>,
    pub angles: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    /// Sup-differences between successive samples.
    pub history: Vec<f64>,
}

impl SelfSimilar {
    pub fn last(&self) -> &[f64] {
        self.samples.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// `max_φ |est(φ) − ω(φ)| / max ω` for the sample at index `k`.
    pub fn distance_at(&self, k: usize, profile: &Profile) -> f64 {
        let top = profile.max_omega();
        self.angles
            .iter()
            .zip(&self.samples[k])
            .filter(|(_, v)| v.is_finite())
            .map(|(phi, v)| (v - profile.omega_at(*phi)).abs())
            .fold(0.0, f64::max)
            / top
    }

    pub fn distance(&self, profile: &Profile) -> f64 {
        self.distance_at(self.samples.len() - 1, profile)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("phi");
        for l in &self.ells {
            s.push_str(&format!(",ell_{l:e}"));
        }
        s.push('\n');
        for (k, phi) in self.angles.iter().enumerate() {
            s.push_str(&format!("{phi}"));
            for row in &self.samples {
                s.push_str(&format!(",{:e}", row[k]));
            }
            s.push('\n');
        }
        s
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Samples `ℓ^β u(ℓ·)` on the unit half-circle for a decreasing `ℓ` sequence.
///
/// Arc points outside the domain are NaN; arc points inside the unresolved core
/// of a graded grid raise `OutOfGrid`.
pub fn extract_self_similar(field: &GridField, q: f64, ells: &[f64], n_arc: usize) -> Result<SelfSimilar> {
    let beta = beta_of(q)?;
    if ells.is_empty() || ells.iter().any(|l| !(*l > 0.0)) || ells.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidInput("ℓ sequence must be positive and strictly decreasing".into()));
    }
    let domain = field.domain();
    let z = anchor_of(domain);
    let (n, t) = anchor_frame(domain, z);
    let angles: Vec<f64> = (1..=n_arc).map(|k| -0.5 * PI + PI * k as f64 / (n_arc + 1) as f64).collect();
    let mut samples = Vec::with_capacity(ells.len());
    for &ell in ells {
        let row = angles
            .iter()
            .map(|phi| {
                let (s, c) = phi.sin_cos();
                let y = [z[0] + ell * (s * t[0] + c * n[0]), z[1] + ell * (s * t[1] + c * n[1])];
                if !domain.contains_closed(&y) {
                    return Ok(f64::NAN);
                }
                Ok(ell.powf(beta) * field.interpolate(y)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(row);
    }
    let history = samples.windows(2).map(|w| sup_diff(&w[0], &w[1])).collect();
    Ok(SelfSimilar { ells: ells.to_vec(), angles, samples, history })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Weak(f64),
    Strong,
    Removable,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularityReport {
    pub verdict: Verdict,
    pub q: f64,
    pub anchor: [f64; 2],
    pub radii: Vec<f64>,
    /// `u/P(·, z)` along the inward normal ray.
    pub ratios: Vec<f64>,
    /// `sup u` on the half-annuli `r/2 < |x − z| ≤ r`.
    pub annulus_sup: Vec<f64>,
    /// Log-log slope of the ratio over the inner half of the sweep.
    pub ratio_slope: f64,
    pub ratio_r2: f64,
    /// Log-log slope of the annulus sup over the inner half of the sweep.
    pub sup_slope: f64,
    pub self_similar: Option<SelfSimilar>,
    pub profile_distance: Option<f64>,
    pub notes: Vec<String>,
}

impl SingularityReport {
    pub fn ratio_diverges(&self) -> bool {
        let (first, last) = (self.ratios[0], self.ratios[self.ratios.len() - 1]);
        last > DIVERGENCE_FACTOR * first && self.ratio_slope < 0.0
    }

    pub fn sweeps_csv(&self) -> String {
        let mut s = String::from("radius,ratio,annulus_sup\n");
        for k in 0..self.radii.len() {
            s.push_str(&format!("{:e},{:e},{:e}\n", self.radii[k], self.ratios[k], self.annulus_sup[k]));
        }
        s
    }
}

/// Fits `ρ(r) = c + a r^γ` by least squares and returns `c`.
fn fit_offset(r: &[f64], rho: &[f64], gamma: f64) -> f64 {
    let x: Vec<f64> = r.iter().map(|v| v.powf(gamma)).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = rho.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(rho).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return my;
    }
    my - sxy / sxx * mx
}

/// Weak/strong/removable classification of an isolated singularity at `anchor`.
///
/// The ratio `u/P(·, z)` is sampled on the normal ray at radii `0.3R·2^{−k}`
/// down to eight times the distance of the nearest interior node. A ratio that
/// grows tenfold with a negative inner slope triggers the self-similar
/// extraction; a ratio decaying with slope above 0.2, or an annulus sup growing
/// at least half an order slower than the Poisson rate `r^{1−N}`, is removable;
/// otherwise the limit of the ratio is fitted with the exponent `N + 1 − Nq`.
pub fn classify_isolated(field: &GridField, q: f64, anchor: [f64; 2]) -> Result<SingularityReport> {
    beta_of(q)?;
    let g = &*field.grid;
    let domain = &g.domain;
    let dim = domain.dim as f64;
    if domain.boundary_distance(&anchor)? > 1e-9 * domain.radius {
        return Err(LabError::InvalidInput(format!("anchor {anchor:?} is not on the boundary")));
    }
    let (n, _) = anchor_frame(domain, anchor);
    let mut notes = Vec::new();
    let dist = |x: [f64; 2]| (x[0] - anchor[0]).hypot(x[1] - anchor[1]);
    let top = field.max().abs().max(1e-300);
    let leak = (0..g.len())
        .filter(|&p| !g.is_interior(p) && domain.boundary_distance(&g.node(p)).map(|d| d < 1e-12).unwrap_or(false))
        .filter(|&p| {
            let t = dist(g.node(p));
            t > 0.05 * domain.radius && t < domain.reach()
        })
        .map(|p| field.values[p].abs())
        .fold(0.0, f64::max);
    if leak > 1e-8 * top {
        notes.push(format!("boundary values near the anchor reach {leak:e}"));
    }
    let core = (0..g.len()).filter(|&p| g.is_interior(p)).map(|p| dist(g.node(p))).fold(f64::INFINITY, f64::min);
    let r_min = 8.0 * core;
    let radii: Vec<f64> = (0..40).map(|k| 0.3 * domain.radius * 0.5f64.powi(k)).take_while(|&r| r >= r_min).collect();
    let mut ratios = Vec::with_capacity(radii.len());
    let mut annulus_sup = Vec::with_capacity(radii.len());
    for &r in &radii {
        let x = [anchor[0] + r * n[0], anchor[1] + r * n[1]];
        ratios.push(field.interpolate(x)? / poisson_kernel(domain, &x, &anchor));
        let s = (0..g.len())
            .filter(|&p| g.is_interior(p))
            .filter(|&p| {
                let t = dist(g.node(p));
                t > 0.5 * r && t <= r
            })
            .map(|p| field.values[p])
            .fold(f64::NEG_INFINITY, f64::max);
        annulus_sup.push(s);
    }
    let mut report = SingularityReport {
        verdict: Verdict::Inconclusive,
        q,
        anchor,
        radii: radii.clone(),
        ratios: ratios.clone(),
        annulus_sup: annulus_sup.clone(),
        ratio_slope: f64::NAN,
        ratio_r2: 0.0,
        sup_slope: f64::NAN,
        self_similar: None,
        profile_distance: None,
        notes,
    };
    if radii.len() < 4 {
        report.notes.push("fewer than four resolved radii".into());
        return Ok(report);
    }
    let ells: Vec<f64> = radii.iter().copied().filter(|&r| r <= 0.1 * domain.radius + 1e-15).collect();
    if ells.len() >= 2 {
        report.self_similar = extract_self_similar(field, q, &ells, 39).ok();
    }
    if !report.notes.is_empty() {
        return Ok(report);
    }
    let inner = radii.len() / 2;
    let lr: Vec<f64> = radii[inner..].iter().map(|r| r.ln()).collect();
    if ratios[inner..].iter().all(|v| *v > 0.0) {
        let lrho: Vec<f64> = ratios[inner..].iter().map(|v| v.ln()).collect();
        let (s, r2) = fit_line(&lr, &lrho);
        report.ratio_slope = s;
        report.ratio_r2 = r2;
    }
    if annulus_sup[inner..].iter().all(|v| *v > 0.0) {
        let ls: Vec<f64> = annulus_sup[inner..].iter().map(|v| v.ln()).collect();
        report.sup_slope = fit_line(&lr, &ls).0;
    }
    let q_c = (dim + 1.0) / dim;
    if report.ratio_diverges() {
        if q >= q_c {
            report.notes.push("diverging ratio with no separable profile".into());
            return Ok(report);
        }
        let profile = match solve_profile(domain.dim, q, &ShootingConfig::default())?.profile() {
            Some(p) => p.clone(),
            None => return Ok(report),
        };
        if let Some(ss) = &report.self_similar {
            let d = ss.distance(&profile);
            report.profile_distance = Some(d);
            if d < PROFILE_TOLERANCE {
                report.verdict = Verdict::Strong;
            }
        }
        return Ok(report);
    }
    let poisson_rate = 1.0 - dim;
    if (report.ratio_slope > 0.2 && report.ratio_r2 > 0.9) || report.sup_slope > poisson_rate + 0.5 {
        report.verdict = Verdict::Removable;
        return Ok(report);
    }
    let gamma = dim + 1.0 - dim * q;
    let c = if gamma > 0.0 { fit_offset(&radii[inner..], &ratios[inner..], gamma) } else { ratios[ratios.len() - 1] };
    if c.is_finite() && c > 0.0 {
        report.verdict = Verdict::Weak(c);
    }
    Ok(report)
}

fn check_decreasing(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !(*x > 0.0)) || v.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidInput(format!("{what} must be positive and strictly decreasing")));
    }
    Ok(())
}

/// Distance from the anchor along the boundary; off-boundary nodes (the inner
/// ring of a graded grid) use the Euclidean distance.
fn anchor_gap(domain: &Domain, z: [f64; 2], x: [f64; 2]) -> f64 {
    let on_boundary = domain.boundary_distance(&x).map(|d| d < 1e-12 * domain.radius).unwrap_or(false);
    if on_boundary {
        let s = boundary_arclength(domain, &x);
        s.min(perimeter(domain) - s)
    } else {
        (x[0] - z[0]).hypot(x[1] - z[1])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseSweep {
    pub q: f64,
    pub mass: f64,
    pub widths: Vec<f64>,
    pub probes: Vec<[f64; 2]>,
    /// Probe values per width.
    pub values: Vec<Vec<f64>>,
    /// Mean over the probes per width.
    pub headline: Vec<f64>,
    pub iterations: Vec<usize>,
    #[serde(skip)]
    pub last: Option<Solution>,
}

impl CollapseSweep {
    pub fn strictly_decreasing(&self) -> bool {
        self.headline.windows(2).all(|w| w[1] < w[0])
    }

    pub fn last_over_first(&self) -> f64 {
        self.headline[self.headline.len() - 1] / self.headline[0]
    }

    /// Log-log slope of the headline against the width.
    pub fn decay_exponent(&self) -> f64 {
        let x: Vec<f64> = self.widths.iter().map(|w| w.ln()).collect();
        let y: Vec<f64> = self.headline.iter().map(|v| v.max(1e-300).ln()).collect();
        fit_line(&x, &y).0
    }

    /// Dyadic extrapolation of the headline.
    pub fn limit(&self) -> f64 {
        dyadic_limit(&self.headline)
    }

    /// The last two increments shrink and the extrapolated limit is positive.
    pub fn converges_to_positive(&self) -> bool {
        let n = self.headline.len();
        if n < 3 {
            return false;
        }
        let h = &self.headline;
        let shrinking = (h[n - 1] - h[n - 2]).abs() < (h[n - 2] - h[n - 3]).abs();
        let last = h[n - 1];
        let limit = self.limit();
        shrinking && limit > 0.0 && limit > 0.5 * last
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("width,headline");
        for k in 0..self.probes.len() {
            s.push_str(&format!(",probe_{k}"));
        }
        s.push('\n');
        for (k, w) in self.widths.iter().enumerate() {
            s.push_str(&format!("{w:e},{:e}", self.headline[k]));
            for v in &self.values[k] {
                s.push_str(&format!(",{v:e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Default interior probes of the collapse experiment.
pub fn default_probes(domain: &Domain) -> Vec<[f64; 2]> {
    let z = anchor_of(domain);
    let r = domain.radius;
    [[0.0, 0.5], [0.3, 0.3], [-0.3, 0.3], [0.0, 0.2]].iter().map(|p| [z[0] + r * p[0], z[1] + r * p[1]]).collect()
}

/// Solves with boundary data `c(1 + cos(πs/w))/(2w)` for `s < w`, `s` the distance
/// from the anchor along the boundary, and records `u` at the probes for each width.
pub fn dirac_collapse_experiment(
    domain: &Domain,
    q: f64,
    mass: f64,
    widths: &[f64],
    probes: &[[f64; 2]],
    cfg: &SolverConfig,
) -> Result<CollapseSweep> {
    beta_of(q)?;
    check_decreasing(widths, "widths")?;
    if !(mass >= 0.0) || probes.is_empty() {
        return Err(LabError::InvalidInput("collapse needs a nonnegative mass and at least one probe".into()));
    }
    if widths[0] >= 0.5 * domain.reach() {
        return Err(LabError::InvalidInput(format!("width {} too large for the domain", widths[0])));
    }
    let z = anchor_of(domain);
    let grid = build_grid(domain, &cfg.grid)?;
    for &w in widths {
        let covered = (0..grid.len()).filter(|&p| !grid.is_interior(p) && anchor_gap(domain, z, grid.node(p)) < w).count();
        if covered < 4 {
            return Err(LabError::InvalidInput(format!("width {w} spans fewer than two grid cells")));
        }
    }
    let law = AbsorptionLaw::power(domain.dim, q)?;
    let mut sweep = CollapseSweep {
        q,
        mass,
        widths: widths.to_vec(),
        probes: probes.to_vec(),
        values: Vec::new(),
        headline: Vec::new(),
        iterations: Vec::new(),
        last: None,
    };
    for &w in widths {
        let d = domain.clone();
        let bump = move |x: [f64; 2]| {
            let s = anchor_gap(&d, z, x);
            if s < w {
                mass * (1.0 + (PI * s / w).cos()) / (2.0 * w)
            } else {
                0.0
            }
        };
        let sol = solve_with_boundary_values(domain, &law, bump, cfg)?;
        let v = probes.iter().map(|p| sol.field.interpolate(*p)).collect::<Result<Vec<f64>>>()?;
        sweep.headline.push(v.iter().sum::<f64>() / v.len() as f64);
        sweep.values.push(v);
        sweep.iterations.push(sol.meta.iterations);
        sweep.last = Some(sol);
    }
    Ok(sweep)
}

#[derive(Clone, Debug, Serialize)]
pub struct MassSweep {
    pub q: f64,
    pub masses: Vec<f64>,
    pub iterations: Vec<usize>,
    /// Nodes where `u_{c_k} < u_{c_{k−1}} − 10⁻⁸ max(1, |u_{c_{k−1}}|)`.
    pub monotone_violations: Vec<usize>,
    pub ko_violations: Vec<usize>,
    pub gradient_envelope: Vec<f64>,
    /// `sup |u_k − u_{k−1}| / sup u_k` on the half-annulus `0.2R ≤ |x − z| ≤ 0.4R`.
    pub saturation: Vec<f64>,
    pub self_similar: SelfSimilar,
    pub profile_distance: f64,
    #[serde(skip)]
    pub last: Option<Solution>,
}

impl MassSweep {
    pub fn saturated(&self) -> bool {
        self.saturation.last().is_some_and(|s| *s < 0.05)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("mass,iterations,monotone_violations,ko_violations,gradient_envelope,saturation\n");
        for k in 0..self.masses.len() {
            let sat = if k == 0 { f64::NAN } else { self.saturation[k - 1] };
            s.push_str(&format!(
                "{:e},{},{},{},{:e},{:e}\n",
                self.masses[k], self.iterations[k], self.monotone_violations[k], self.ko_violations[k], self.gradient_envelope[k], sat
            ));
        }
        s
    }
}

/// Default extraction scales, relative to the domain radius.
pub const DEFAULT_ELLS: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];

/// Solves `Power(q)` with atoms `c_k δ_z` of increasing mass, checks monotonicity,
/// the envelope `C₄(q)|x − z|^{−β}` and saturation, then compares the
/// self-similar extraction of the last field with the shot profile `ω_s`.
pub fn increasing_mass_experiment(domain: &Domain, q: f64, masses: &[f64], ells: &[f64], cfg: &SolverConfig) -> Result<MassSweep> {
    let e = exponents(domain.dim, q)?;
    if !(q > 1.0 && q < e.q_c) {
        return Err(LabError::ExponentOutOfRange { q, limit: e.q_c });
    }
    if masses.len() < 2 || masses.iter().any(|m| !(*m > 0.0)) || masses.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidInput("masses must be positive and strictly increasing".into()));
    }
    let profile = solve_profile(domain.dim, q, &ShootingConfig::default())?
        .profile()
        .cloned()
        .ok_or_else(|| LabError::InvalidInput(format!("no separable profile at q = {q}")))?;
    let law = AbsorptionLaw::power(domain.dim, q)?;
    let z = anchor_of(domain);
    let mut iterations = Vec::new();
    let mut monotone = Vec::new();
    let mut ko = Vec::new();
    let mut envelope = Vec::new();
    let mut saturation = Vec::new();
    let mut prev: Option<Solution> = None;
    for &m in masses {
        let sol = solve_dirichlet(&law, &BoundaryMeasure::anchor_atom(domain, m), cfg)?;
        let g = sol.grid().clone();
        iterations.push(sol.meta.iterations);
        ko.push(keller_osserman_violations(&sol, q, &z, 1e-8)?);
        envelope.push(gradient_envelope(&sol, q));
        match &prev {
            None => monotone.push(0),
            Some(p) => {
                let a = &p.field.values;
                let b = &sol.field.values;
                monotone.push((0..g.len()).filter(|&k| b[k] < a[k] - 1e-8 * a[k].abs().max(1.0)).count());
                let band: Vec<usize> = (0..g.len())
                    .filter(|&k| {
                        let x = g.node(k);
                        let t = (x[0] - z[0]).hypot(x[1] - z[1]);
                        g.is_interior(k) && t >= 0.2 * domain.radius && t <= 0.4 * domain.radius
                    })
                    .collect();
                let change = band.iter().map(|&k| (b[k] - a[k]).abs()).fold(0.0, f64::max);
                let size = band.iter().map(|&k| b[k]).fold(0.0, f64::max);
                saturation.push(change / size);
            }
        }
        prev = Some(sol);
    }
    let last = prev.expect("at least two masses");
    let scaled: Vec<f64> = ells.iter().map(|l| l * domain.radius).collect();
    let self_similar = extract_self_similar(&last.field, q, &scaled, 39)?;
    let profile_distance = self_similar.distance(&profile);
    Ok(MassSweep {
        q,
        masses: masses.to_vec(),
        iterations,
        monotone_violations: monotone,
        ko_violations: ko,
        gradient_envelope: envelope,
        saturation,
        self_similar,
        profile_distance,
        last: Some(last),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SetKind {
    Point,
    BallOfRadius(f64),
}

/// Bessel capacity `C_{α,p}` query in `ℝ^{ambient_dim}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityQuery {
    pub alpha: f64,
    pub p: f64,
    pub ambient_dim: usize,
    pub set_kind: SetKind,
}

impl CapacityQuery {
    pub fn new(alpha: f64, p: f64, ambient_dim: usize, set_kind: SetKind) -> Result<Self> {
        if !(alpha > 0.0 && p > 1.0) || ambient_dim == 0 {
            return Err(LabError::InvalidInput(format!("capacity needs α > 0, p > 1 (got α = {alpha}, p = {p})")));
        }
        if let SetKind::BallOfRadius(r) = set_kind {
            if !(r > 0.0) {
                return Err(LabError::InvalidInput(format!("ball radius {r} must be positive")));
            }
        }
        Ok(Self { alpha, p, ambient_dim, set_kind })
    }

    /// `C_{(2−q)/q, q′}` in dimension `N − 1`.
    pub fn boundary(dim: usize, q: f64) -> Result<Self> {
        beta_of(q)?;
        Self::new((2.0 - q) / q, q / (q - 1.0), dim - 1, SetKind::Point)
    }

    /// `C_{1, q′}` in dimension `N`; `q = 2` is admitted since `q* = 2` when `N = 2`.
    pub fn interior(dim: usize, q: f64) -> Result<Self> {
        if !(q > 1.0 && q <= 2.0) {
            return Err(LabError::QOutOfRange(q));
        }
        Self::new(1.0, q / (q - 1.0), dim, SetKind::Point)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapacityVerdict {
    /// Points (or balls as `ρ → 0`) have zero capacity.
    pub zero: bool,
    /// `d − αp`: `C_{α,p}(B_ρ) ~ ρ^{d−αp}` when positive, logarithmic decay at zero.
    pub scaling_exponent: f64,
}

/// Classical criterion: a point has zero `C_{α,p}` capacity in `ℝ^d` iff `αp ≤ d`.
pub fn point_capacity_zero(query: &CapacityQuery) -> CapacityVerdict {
    let d = query.ambient_dim as f64;
    let ap = query.alpha * query.p;
    CapacityVerdict { zero: ap <= d * (1.0 + 1e-12), scaling_exponent: d - ap }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    /// `η = 1` on `B_ε`, C² ramp to 0 on `B_{2ε}`.
    Annular(f64),
    /// `η = log(ε/r)/log(1/ε)` between `ε²` and `ε`.
    Logarithmic(f64),
}

fn ramp_parts(x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, 1.0);
    (x - (2.0 * PI * x).sin() / (2.0 * PI), 1.0 - (2.0 * PI * x).cos())
}

impl Cutoff {
    pub fn eps(&self) -> f64 {
        match self {
            Cutoff::Annular(e) | Cutoff::Logarithmic(e) => *e,
        }
    }

    /// `(η(r), η′(r))`.
    pub fn profile(&self, r: f64) -> (f64, f64) {
        match *self {
            Cutoff::Annular(e) => {
                if r <= e {
                    (1.0, 0.0)
                } else if r >= 2.0 * e {
                    (0.0, 0.0)
                } else {
                    let (v, d) = ramp_parts(2.0 - r / e);
                    (v, -d / e)
                }
            }
            Cutoff::Logarithmic(e) => {
                let l = -e.ln();
                if r <= e * e {
                    (1.0, 0.0)
                } else if r >= e {
                    (0.0, 0.0)
                } else {
                    ((e / r).ln() / l, -1.0 / (r * l))
                }
            }
        }
    }

    /// `η′` continued to the closed support.
    fn slope_on_support(&self, r: f64) -> f64 {
        match *self {
            Cutoff::Annular(e) => -ramp_parts(2.0 - r / e).1 / e,
            Cutoff::Logarithmic(e) => 1.0 / (r * e.ln()),
        }
    }

    /// `∫_{ℝ²} |∇η|^p dx` by composite Simpson in `log r`.
    pub fn gradient_norm(&self, p: f64) -> f64 {
        let (a, b) = match *self {
            Cutoff::Annular(e) => (e, 2.0 * e),
            Cutoff::Logarithmic(e) => (e * e, e),
        };
        let n = 4000;
        let (la, lb) = (a.ln(), b.ln());
        let h = (lb - la) / n as f64;
        let f = |s: f64| {
            let r = s.exp();
            2.0 * PI * self.slope_on_support(r).abs().powf(p) * r * r
        };
        let mut acc = f(la) + f(lb);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(la + k as f64 * h);
        }
        acc * h / 3.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffRecord {
    pub cutoff: Cutoff,
    /// `∫ ζ^{q′}|∇u|^q dx` with `ζ = 1 − η`.
    pub lhs: f64,
    /// `−∫_{∂Ω} ∂_n u dS`.
    pub flux: f64,
    /// `∫ |∇η|^{q′} dx`.
    pub cutoff_energy: f64,
    /// `2·flux + 2(2q′/q)^{q′−1}·cutoff_energy`.
    pub rhs: f64,
    pub holds: bool,
}

/// Both sides of `∫ζ^{q′}|∇u|^q ≤ c₃₀ flux + c₃₁ ∫|∇η|^{q′}` on a disk punctured at
/// `center`, for each cutoff. The constants come from Young's inequality:
/// `c₃₀ = 2`, `c₃₁ = 2(2q′/q)^{q′−1}`.
pub fn interior_removability_identity(field: &GridField, q: f64, center: [f64; 2], cutoffs: &[Cutoff]) -> Result<Vec<CutoffRecord>> {
    beta_of(q)?;
    let g = &*field.grid;
    if g.domain.kind != DomainKind::Ball {
        return Err(LabError::InvalidInput("the cutoff identity is implemented on the disk".into()));
    }
    let qc = q / (q - 1.0);
    let grad = field.grad.clone().unwrap_or_else(|| GridOperators::new(g).gradient(&field.values));
    let n_t = g.n_theta();
    let outer = g.n_r() - 1;
    let flux: f64 = (0..n_t).map(|j| -grad[g.index(outer, j)][0] * g.domain.radius * g.dtheta).sum();
    let c30 = 2.0;
    let c31 = 2.0 * (2.0 * qc / q).powf(qc - 1.0);
    Ok(cutoffs
        .iter()
        .map(|c| {
            let lhs: f64 = (0..g.len())
                .filter(|&p| g.is_interior(p))
                .map(|p| {
                    let x = g.node(p);
                    let zeta = 1.0 - c.profile((x[0] - center[0]).hypot(x[1] - center[1])).0;
                    zeta.powf(qc) * grad[p][0].hypot(grad[p][1]).powf(q) * g.weights[p]
                })
                .sum();
            let energy = c.gradient_norm(qc);
            let rhs = c30 * flux + c31 * energy;
            CutoffRecord { cutoff: *c, lhs, flux, cutoff_energy: energy, rhs, holds: lhs <= rhs }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, PolarGrid};
    use crate::measure::InteriorMeasure;
    use crate::profile::separable_solution;
    use crate::solver::solve_interior;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn profile(q: f64) -> Profile {
        solve_profile(2, q, &ShootingConfig::default()).unwrap().profile().unwrap().clone()
    }

    fn separable(q: f64, spec: GridSpec) -> GridField {
        let p = profile(q);
        let grid = Arc::new(PolarGrid::new(&Domain::half_disk(2, 1.0), &spec).unwrap());
        GridField::from_fn(grid, move |x| separable_solution(&p, &x).unwrap_or(0.0))
    }

    fn rel_sup(a: &GridField, b: &GridField) -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| (x - y).abs() / y.abs().max(1e-12))
            .fold(0.0, f64::max)
    }

    #[test]
    fn rescale_identity_and_range() {
        let u = separable(1.3, GridSpec::anchor(64, 33, 0.9));
        let v = rescale(&u, 1.0, 1.3).unwrap();
        assert!(rel_sup(&v, &u) < 1e-12);
        assert!(rescale(&u, 1.5, 1.3).is_err());
        assert!(rescale(&u, 0.5, 2.0).is_err());
    }

    #[test]
    fn separable_field_is_a_fixed_point() {
        let g = 0.5f64.powf(0.1);
        let u = separable(1.3, GridSpec::anchor(160, 81, g));
        // ℓ on the ring lattice maps nodes onto nodes
        let v = rescale(&u, g.powi(10), 1.3).unwrap();
        assert!(rel_sup(&v, &u) < 1e-10, "{}", rel_sup(&v, &u));
        // off the lattice the error is that of cubic interpolation of e^{−βs} in s = log r
        let v = rescale(&u, 0.37, 1.3).unwrap();
        let ds = -(g.ln());
        assert!(rel_sup(&v, &u) < (1.3f64 / 0.3 * ds).powi(4) / 24.0, "{}", rel_sup(&v, &u));
    }

    #[test]
    fn extraction_of_the_separable_field_is_flat() {
        let q = 1.3;
        let u = separable(q, GridSpec::anchor(160, 81, 0.93));
        let ss = extract_self_similar(&u, q, &[0.2, 0.1, 0.05, 0.01], 39).unwrap();
        let p = profile(q);
        assert!(ss.history.iter().all(|h| *h < 1e-5 * p.max_omega()), "{:?}", ss.history);
        assert!(ss.distance(&p) < 1e-4);
        assert!(matches!(extract_self_similar(&u, q, &[1e-9], 9), Err(LabError::OutOfGrid(_))));
    }

    #[test]
    fn separable_field_is_strong() {
        let u = separable(1.3, GridSpec::anchor(160, 81, 0.93));
        let rep = classify_isolated(&u, 1.3, [0.0, 0.0]).unwrap();
        assert_eq!(rep.verdict, Verdict::Strong);
        assert!(rep.profile_distance.unwrap() < 0.05);
    }

    #[test]
    fn weak_atom_and_its_scaling() {
        let q = 1.25;
        let d = Domain::half_disk(2, 1.0);
        let cfg = SolverConfig::default().with_grid(GridSpec::anchor(160, 81, 0.93));
        let law = AbsorptionLaw::power(2, q).unwrap();
        let sol = solve_dirichlet(&law, &BoundaryMeasure::anchor_atom(&d, 1.0), &cfg).unwrap();
        let rep = classify_isolated(&sol.field, q, [0.0, 0.0]).unwrap();
        match rep.verdict {
            Verdict::Weak(c) => assert!((c - 1.0).abs() < 0.05, "{c}"),
            v => panic!("{v:?}"),
        }
        assert!(!rep.ratio_diverges());
        // ℓ^β u(ℓ·) → 0 since u ~ P decays slower than ℓ^{−β}
        let ss = extract_self_similar(&sol.field, q, &[0.2, 0.05, 0.01, 0.002], 19).unwrap();
        let tops: Vec<f64> = ss.samples.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
        assert!(tops.windows(2).all(|w| w[1] < w[0]), "{tops:?}");
    }

    #[test]
    fn collapse_above_and_stability_below_the_critical_exponent() {
        let d = Domain::half_disk(2, 1.0);
        let cfg = SolverConfig::default().with_grid(GridSpec::anchor(200, 81, 0.93));
        let widths = [0.2, 0.1, 0.05, 0.025, 0.0125];
        let probes = default_probes(&d);
        let hi = dirac_collapse_experiment(&d, 1.6, 1.0, &widths, &probes, &cfg).unwrap();
        assert!(hi.strictly_decreasing());
        // far-field scaling of the width-w problem gives u ~ w^{N−1−β}
        let rate = 1.0 - (2.0 - 1.6) / 0.6;
        assert!((hi.decay_exponent() - rate).abs() < 0.1, "{}", hi.decay_exponent());
        let last = hi.last.as_ref().unwrap();
        assert_eq!(classify_isolated(&last.field, 1.6, [0.0, 0.0]).unwrap().verdict, Verdict::Removable);
        let lo = dirac_collapse_experiment(&d, 1.3, 1.0, &widths, &probes, &cfg).unwrap();
        assert!(lo.converges_to_positive());
        // the limit is the atom solution
        let atom = solve_dirichlet(&AbsorptionLaw::power(2, 1.3).unwrap(), &BoundaryMeasure::anchor_atom(&d, 1.0), &cfg).unwrap();
        let target = probes.iter().map(|p| atom.field.interpolate(*p).unwrap()).sum::<f64>() / probes.len() as f64;
        assert!((lo.limit() / target - 1.0).abs() < 0.05, "{} {target}", lo.limit());
        let zero = dirac_collapse_experiment(&d, 1.6, 0.0, &widths[..2], &probes, &cfg).unwrap();
        assert!(zero.headline.iter().all(|v| *v == 0.0));
        assert!(dirac_collapse_experiment(&d, 1.6, 1.0, &[0.3], &probes, &cfg).is_err());
    }

    #[test]
    fn small_mass_sweep_is_monotone_and_enveloped() {
        let d = Domain::half_disk(2, 1.0);
        let cfg = SolverConfig::default().with_grid(GridSpec::anchor(120, 61, 0.93));
        let s = increasing_mass_experiment(&d, 1.3, &[1.0, 4.0, 16.0, 64.0], &DEFAULT_ELLS, &cfg).unwrap();
        assert!(s.monotone_violations.iter().all(|v| *v == 0));
        assert!(s.ko_violations.iter().all(|v| *v == 0));
        assert!(increasing_mass_experiment(&d, 1.6, &[1.0, 2.0], &DEFAULT_ELLS, &cfg).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert!(point_capacity_zero(&CapacityQuery::boundary(2, 1.6).unwrap()).zero);
        let v = point_capacity_zero(&CapacityQuery::boundary(2, 1.4).unwrap());
        assert!(!v.zero && (v.scaling_exponent + 0.5).abs() < 1e-12);
        assert!(!point_capacity_zero(&CapacityQuery::interior(2, 1.6).unwrap()).zero);
        assert!(point_capacity_zero(&CapacityQuery::new(1.0, 2.0, 2, SetKind::Point).unwrap()).zero);
        assert!(point_capacity_zero(&CapacityQuery::interior(2, 2.0).unwrap()).zero);
        assert!(CapacityQuery::boundary(2, 2.0).is_err());
        assert!(CapacityQuery::new(0.0, 2.0, 2, SetKind::Point).is_err());
        assert!(CapacityQuery::new(1.0, 2.0, 2, SetKind::BallOfRadius(-1.0)).is_err());
    }

    proptest! {
        #[test]
        fn boundary_capacity_transition_is_the_critical_exponent(dim in 2usize..4, q in 1.01f64..1.99) {
            let q_c = (dim as f64 + 1.0) / dim as f64;
            prop_assert_eq!(point_capacity_zero(&CapacityQuery::boundary(dim, q).unwrap()).zero, q >= q_c - 1e-12);
            let q_star = dim as f64 / (dim as f64 - 1.0);
            prop_assert_eq!(point_capacity_zero(&CapacityQuery::interior(dim, q).unwrap()).zero, q >= q_star - 1e-12);
        }

        #[test]
        fn rescaling_is_a_semigroup(a in -1.0f64..1.0, b in -1.0f64..1.0, l1 in 0.3f64..1.0, l2 in 0.3f64..1.0) {
            let grid = Arc::new(PolarGrid::new(&Domain::ball(2, 1.0), &GridSpec::polar(96, 96)).unwrap());
            let u = GridField::from_fn(grid, |x| 1.0 + a * x[0] + b * x[1] * x[1] + 0.3 * (x[0] * x[1]).sin());
            let lhs = rescale(&u, l1 * l2, 1.5).unwrap();
            let rhs = rescale(&rescale(&u, l2, 1.5).unwrap(), l1, 1.5).unwrap();
            let gap = lhs.values.iter().zip(&rhs.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(gap < 1e-5 * lhs.max().abs().max(u.max().abs()), "{}", gap);
        }
    }

    #[test]
    fn cutoff_energies_follow_the_design() {
        let p = 8.0 / 3.0;
        let a = Cutoff::Annular(0.1).gradient_norm(p);
        let b = Cutoff::Annular(0.05).gradient_norm(p);
        assert!((a / b - 2f64.powf(2.0 - p)).abs() < 1e-9);
        for e in [0.1, 0.01, 0.001] {
            let v = Cutoff::Logarithmic(e).gradient_norm(2.0);
            assert!((v - 2.0 * PI / (-e.ln())).abs() < 1e-8 * v);
        }
    }

    #[test]
    fn cutoff_identity_on_punctured_disks() {
        let d = Domain::ball(2, 1.0);
        let cfg = SolverConfig::default().with_grid(GridSpec::centered(160, 64, 0.93));
        let cuts: Vec<Cutoff> = (0..10).map(|k| Cutoff::Annular(0.1 * 0.5f64.powi(k))).collect();
        let green = solve_interior(&AbsorptionLaw::zero(2), &d, &InteriorMeasure::atom(vec![0.0, 0.0], 1.0), &cfg).unwrap();
        let recs = interior_removability_identity(&green.field, 1.6, [0.0, 0.0], &cuts).unwrap();
        assert!(recs.iter().all(|r| (r.flux - 1.0).abs() < 1e-2), "{}", recs[0].flux);
        let punctured = solve_interior(&AbsorptionLaw::power(2, 1.6).unwrap(), &d, &InteriorMeasure::atom(vec![0.0, 0.0], 1.0), &cfg).unwrap();
        let recs = interior_removability_identity(&punctured.field, 1.6, [0.0, 0.0], &cuts).unwrap();
        let n = recs.len();
        assert!((recs[n - 1].lhs / recs[n - 2].lhs - 1.0).abs() < 0.05, "{} {}", recs[n - 1].lhs, recs[n - 2].lhs);
        assert!(recs.iter().all(|r| r.holds));
    }
}
