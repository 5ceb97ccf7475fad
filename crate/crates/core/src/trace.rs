//! Boundary traces read off shrinking level surfaces `Σ_δ`, the regular/singular
//! dichotomy at boundary points, and boundary Harnack ratios.
//!
//! Boundary points are addressed by arclength counted counterclockwise from the
//! domain's singular anchor.

use crate::error::{LabError, Result};
use crate::geometry::{Domain, DomainKind};
use crate::grid::GridField;
use crate::solver::AbsorptionLaw;
use crate::stencil::GridOperators;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Test function on the boundary, evaluated at the boundary foot `σ(x)`.
pub type TestFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Relative change of `A(r)` below which it counts as stable.
pub const STABLE_CHANGE: f64 = 0.05;
/// Log-log slope of `M(δ, r)` against `δ` below which it counts as diverging.
pub const DIVERGENT_SLOPE: f64 = -0.2;
/// Minimal coefficient of determination of the divergence fit.
pub const MIN_R2: f64 = 0.9;
const MAX_HALVINGS: usize = 12;

pub fn perimeter(domain: &Domain) -> f64 {
    match domain.kind {
        DomainKind::Ball => 2.0 * PI * domain.radius,
        DomainKind::HalfDisk => (2.0 + PI) * domain.radius,
    }
}

/// Arclength position of a boundary point.
pub fn boundary_arclength(domain: &Domain, sigma: &[f64]) -> f64 {
    let r = domain.radius;
    match domain.kind {
        DomainKind::Ball => r * (sigma[1].atan2(sigma[0]) + 0.5 * PI).rem_euclid(2.0 * PI),
        DomainKind::HalfDisk => {
            let flat = sigma[1].abs() <= 1e-12 * r && sigma[0].abs() < r * (1.0 - 1e-12);
            if flat {
                sigma[0].rem_euclid(perimeter(domain))
            } else {
                r + r * sigma[1].max(0.0).atan2(sigma[0])
            }
        }
    }
}

/// Boundary point at arclength `s`.
pub fn boundary_point(domain: &Domain, s: f64) -> [f64; 2] {
    let r = domain.radius;
    let s = s.rem_euclid(perimeter(domain));
    match domain.kind {
        DomainKind::Ball => {
            let t = s / r - 0.5 * PI;
            [r * t.cos(), r * t.sin()]
        }
        DomainKind::HalfDisk => {
            if s <= r {
                [s, 0.0]
            } else if s <= r + PI * r {
                let t = (s - r) / r;
                [r * t.cos(), r * t.sin()]
            } else {
                [s - perimeter(domain), 0.0]
            }
        }
    }
}

/// C² ramp with `ψ(x) + ψ(1 − x) = 1`.
fn ramp(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x - (2.0 * PI * x).sin() / (2.0 * PI)
}

/// Partition of unity on the boundary: `n` bumps centered at `s_k = kL/n` with half-width `L/n`.
#[derive(Clone, Debug, Serialize)]
pub struct Partition {
    pub length: f64,
    pub centers: Vec<f64>,
    pub half_width: f64,
}

impl Partition {
    pub fn new(domain: &Domain, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(LabError::InvalidInput(format!("partition needs at least 4 bumps, got {n}")));
        }
        let length = perimeter(domain);
        let h = length / n as f64;
        Ok(Self { length, centers: (0..n).map(|k| k as f64 * h).collect(), half_width: h })
    }

    fn gap(&self, s: f64, k: usize) -> f64 {
        let d = (s - self.centers[k]).rem_euclid(self.length);
        d.min(self.length - d)
    }

    pub fn bump(&self, k: usize, s: f64) -> f64 {
        ramp(1.0 - self.gap(s, k) / self.half_width)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Samples of `u` on `Σ_δ` with the arclength of each boundary foot.
struct LevelSamples {
    points: Vec<[f64; 2]>,
    feet: Vec<Vec<f64>>,
    arclength: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

/// Quadrature nodes so that the spacing on `Σ_δ` stays below `δ/16`.
fn level_nodes(domain: &Domain, delta: f64) -> Result<usize> {
    let len = domain.level_measure(delta)?;
    Ok(((16.0 * len / delta).ceil() as usize).clamp(512, 400_000))
}

fn sample_level(field: &GridField, delta: f64) -> Result<LevelSamples> {
    let domain = field.domain();
    let q = domain.level_surface(delta, level_nodes(domain, delta)?)?;
    let points: Vec<[f64; 2]> = q.nodes.iter().map(|x| [x[0], x[1]]).collect();
    let values = points.par_iter().map(|&x| field.interpolate(x)).collect::<Result<Vec<f64>>>()?;
    let arclength = q.feet.iter().map(|s| boundary_arclength(domain, s)).collect();
    Ok(LevelSamples { points, feet: q.feet, arclength, weights: q.weights, values })
}

/// Pairings `∫_{Σ_δ} u·φ∘σ dS`, one per test function.
pub fn trace_on_level(field: &GridField, delta: f64, tests: &[TestFn]) -> Result<Vec<f64>> {
    let s = sample_level(field, delta)?;
    Ok(tests
        .iter()
        .map(|phi| {
            (0..s.values.len()).map(|k| s.values[k] * phi(&s.feet[k]) * s.weights[k]).sum()
        })
        .collect())
}

/// Limit of a sequence sampled at dyadic `δ` (last entry finest).
///
/// The convergence exponent is read from the last three entries when it is
/// between 0.3 and 3; otherwise first-order Richardson is used.
pub fn dyadic_limit(values: &[f64]) -> f64 {
    let n = values.len();
    match n {
        0 => f64::NAN,
        1 => values[0],
        2 => 2.0 * values[1] - values[0],
        _ => {
            let (a, b, c) = (values[n - 3], values[n - 2], values[n - 1]);
            let (d1, d2) = (b - a, c - b);
            let scale = a.abs().max(b.abs()).max(c.abs());
            if d2.abs() <= 1e-14 * scale {
                return c;
            }
            let ratio = d1 / d2;
            if ratio > 0.0 {
                let p = ratio.log2();
                if (0.3..=3.0).contains(&p) {
                    return c + d2 / (2f64.powf(p) - 1.0);
                }
            }
            2.0 * c - b
        }
    }
}

/// Least-squares line `y = a + s x`; returns `(s, R²)`.
pub(crate) fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return (f64::NAN, 0.0);
    }
    let s = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (s, r2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PointVerdict {
    Regular,
    Singular,
    Inconclusive,
}

/// Raw sweeps of one dichotomy probe.
#[derive(Clone, Debug, Serialize)]
pub struct DichotomyRecord {
    pub z: [f64; 2],
    pub radii: Vec<f64>,
    /// Exclusion radii `ε` around `z` used to test the stability of `A(r)`.
    pub cutoffs: Vec<Vec<f64>>,
    /// `A(r)` restricted to `|x − z| > ε`, per radius and cutoff.
    pub absorption: Vec<Vec<f64>>,
    pub stable: Vec<bool>,
    pub deltas: Vec<f64>,
    /// `M(δ, r)` per radius and level.
    pub level_mass: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
    pub r2: Vec<f64>,
    pub diverges: Vec<bool>,
    pub verdict: PointVerdict,
}

/// Gradient norms and boundary distances shared by the probes of one field.
struct ProbeData {
    nodes: Vec<[f64; 2]>,
    density: Vec<f64>,
    weights: Vec<f64>,
}

impl ProbeData {
    fn new(field: &GridField, law: &AbsorptionLaw) -> Self {
        let g = &*field.grid;
        let grad = field.grad.clone().unwrap_or_else(|| GridOperators::new(g).gradient(&field.values));
        let d = g.distances();
        let density = (0..g.len())
            .map(|p| {
                if g.is_interior(p) {
                    law.value(grad[p][0].hypot(grad[p][1])) * d[p]
                } else {
                    0.0
                }
            })
            .collect();
        let weights = (0..g.len()).map(|p| if g.is_interior(p) { g.weights[p] } else { 0.0 }).collect();
        Self { nodes: g.nodes(), density, weights }
    }

    fn nearest_interior(&self, z: [f64; 2]) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, _)| (x[0] - z[0]).hypot(x[1] - z[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `∫_{Ω ∩ B_r(z), |x − z| > ε} g(|∇u|) d dx`.
    fn absorption(&self, z: [f64; 2], r: f64, eps: f64) -> f64 {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, x)| {
                let t = (x[0] - z[0]).hypot(x[1] - z[1]);
                t < r && t > eps
            })
            .map(|(p, _)| self.density[p] * self.weights[p])
            .sum()
    }
}

fn level_mass(s: &LevelSamples, z: [f64; 2], r: f64) -> f64 {
    (0..s.values.len())
        .filter(|&k| (s.points[k][0] - z[0]).hypot(s.points[k][1] - z[1]) < r)
        .map(|k| s.values[k] * s.weights[k])
        .sum()
}

fn probe(data: &ProbeData, levels: &[(f64, LevelSamples)], z: [f64; 2], radii: &[f64]) -> DichotomyRecord {
    let floor = data.nearest_interior(z);
    let mut cutoffs = Vec::new();
    let mut absorption = Vec::new();
    let mut stable = Vec::new();
    let mut level = Vec::new();
    let mut slopes = Vec::new();
    let mut r2s = Vec::new();
    let mut diverges = Vec::new();
    for &r in radii {
        let eps: Vec<f64> = (1..=MAX_HALVINGS).map(|k| r * 0.5f64.powi(k as i32)).filter(|&e| e >= floor).collect();
        let a: Vec<f64> = eps.iter().map(|&e| data.absorption(z, r, e)).collect();
        let ok = match a.len() {
            0 | 1 => false,
            n => {
                let (x, y) = (a[n - 2], a[n - 1]);
                (y - x).abs() <= STABLE_CHANGE * y.abs() || y.abs() < 1e-300
            }
        };
        cutoffs.push(eps);
        absorption.push(a);
        stable.push(ok);
        let m: Vec<f64> = levels.iter().map(|(_, s)| level_mass(s, z, r)).collect();
        let usable: Vec<(f64, f64)> = levels.iter().zip(&m).filter(|(_, v)| **v > 0.0).map(|((d, _), v)| (d.ln(), v.ln())).collect();
        let (slope, r2) = if usable.len() >= 3 {
            let (x, y): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
            fit_line(&x, &y)
        } else {
            (f64::NAN, 0.0)
        };
        diverges.push(slope < DIVERGENT_SLOPE && r2 > MIN_R2);
        level.push(m);
        slopes.push(slope);
        r2s.push(r2);
    }
    let stable_some = stable.iter().any(|&b| b);
    let diverge_all = !diverges.is_empty() && diverges.iter().all(|&b| b);
    let verdict = match (stable_some, diverge_all) {
        (true, false) => PointVerdict::Regular,
        (false, true) => PointVerdict::Singular,
        _ => PointVerdict::Inconclusive,
    };
    DichotomyRecord {
        z,
        radii: radii.to_vec(),
        cutoffs,
        absorption,
        stable,
        deltas: levels.iter().map(|(d, _)| *d).collect(),
        level_mass: level,
        slopes,
        r2: r2s,
        diverges,
        verdict,
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidInput("radii must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn check_deltas(domain: &Domain, deltas: &[f64]) -> Result<()> {
    if deltas.len() < 3 || deltas.windows(2).any(|w| w[1] >= w[0]) || deltas[deltas.len() - 1] <= 0.0 {
        return Err(LabError::InvalidInput("need at least three strictly decreasing positive levels".into()));
    }
    if deltas[0] >= domain.reach() {
        return Err(LabError::LevelTooDeep { delta: deltas[0], reach: domain.reach() });
    }
    Ok(())
}

/// Default dyadic levels: `δ* / 4` halved five times.
pub fn default_levels(domain: &Domain) -> Vec<f64> {
    (0..6).map(|k| 0.25 * domain.reach() * 0.5f64.powi(k)).collect()
}

fn sample_levels(field: &GridField, deltas: &[f64]) -> Result<Vec<(f64, LevelSamples)>> {
    deltas.par_iter().map(|&d| sample_level(field, d).map(|s| (d, s))).collect()
}

/// Regular/singular test at the boundary point `z`.
///
/// `A(r)` is integrated outside shrinking balls `B_ε(z)` and is stable when the
/// last halving of `ε` changes it by less than 5%. `M(δ, r)` diverges when its
/// log-log slope against `δ` is below −0.2 with R² above 0.9.
pub fn dichotomy_probe(field: &GridField, law: &AbsorptionLaw, z: [f64; 2], radii: &[f64], deltas: &[f64]) -> Result<DichotomyRecord> {
    let domain = field.domain();
    check_radii(radii)?;
    check_deltas(domain, deltas)?;
    let foot = domain.boundary_distance(&z)?;
    if foot > 1e-9 * domain.radius {
        return Err(LabError::InvalidInput(format!("probe point {z:?} is not on the boundary")));
    }
    let levels = sample_levels(field, deltas)?;
    Ok(probe(&ProbeData::new(field, law), &levels, z, radii))
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceReport {
    pub deltas: Vec<f64>,
    pub partition: Partition,
    /// Pairings per level (rows) and bump (columns).
    pub pairings: Vec<Vec<f64>>,
    /// Extrapolated bump masses; `None` on bumps whose support meets the singular set.
    pub mu: Vec<Option<f64>>,
    pub probes: Vec<DichotomyRecord>,
    pub singular: Vec<[f64; 2]>,
    pub inconclusive: Vec<[f64; 2]>,
}

impl TraceReport {
    /// Total recovered mass on the regular bumps.
    pub fn regular_mass(&self) -> f64 {
        self.mu.iter().flatten().sum()
    }

    /// Sum of `|μ_k − exact_k|` over the regular bumps, relative to the sum of `|exact_k|`.
    pub fn total_variation_error(&self, exact: &[f64]) -> f64 {
        let mut err = 0.0;
        let mut size = 0.0;
        for (m, e) in self.mu.iter().zip(exact) {
            if let Some(m) = m {
                err += (m - e).abs();
                size += e.abs();
            }
        }
        err / size
    }

    /// `δ, bump_0, bump_1, ...` rows of raw pairings.
    pub fn pairings_csv(&self) -> String {
        let mut s = String::from("delta");
        for k in 0..self.partition.len() {
            s.push_str(&format!(",bump_{k}"));
        }
        s.push('\n');
        for (d, row) in self.deltas.iter().zip(&self.pairings) {
            s.push_str(&format!("{d:e}"));
            for v in row {
                s.push_str(&format!(",{v:e}"));
            }
            s.push('\n');
        }
        s
    }

    /// `probe, s, radius, delta, level_mass` rows.
    pub fn level_mass_csv(&self) -> String {
        let mut s = String::from("probe,z0,z1,radius,delta,level_mass\n");
        for (k, p) in self.probes.iter().enumerate() {
            for (r, row) in p.radii.iter().zip(&p.level_mass) {
                for (d, m) in p.deltas.iter().zip(row) {
                    s.push_str(&format!("{k},{},{},{r:e},{d:e},{m:e}\n", p.z[0], p.z[1]));
                }
            }
        }
        s
    }

    /// JSON document with the sweeps embedded as CSV text.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("pairings_csv".into(), self.pairings_csv().into());
            m.insert("level_mass_csv".into(), self.level_mass_csv().into());
        }
        v
    }
}

/// Exact masses `∫φ_k dμ` of a boundary measure against the partition.
pub fn partition_masses(partition: &Partition, mu: &crate::measure::BoundaryMeasure) -> Vec<f64> {
    (0..partition.len())
        .map(|k| mu.integrate(|s| partition.bump(k, boundary_arclength(&mu.domain, s))))
        .collect()
}

/// Runs the dichotomy probe at the `n` bump centers (the first one at the
/// anchor) with radii `h` and `h/2`, `h` the bump half-width, and assembles the
/// trace from the dyadic limits of the bump pairings.
pub fn classify_boundary(field: &GridField, law: &AbsorptionLaw, n: usize, deltas: &[f64]) -> Result<TraceReport> {
    let domain = field.domain().clone();
    check_deltas(&domain, deltas)?;
    let partition = Partition::new(&domain, n)?;
    let levels = sample_levels(field, deltas)?;
    let data = ProbeData::new(field, law);
    let h = partition.half_width;
    let radii = [h, 0.5 * h];
    let probes: Vec<DichotomyRecord> = partition
        .centers
        .par_iter()
        .map(|&s| probe(&data, &levels, boundary_point(&domain, s), &radii))
        .collect();
    let pairings: Vec<Vec<f64>> = levels
        .iter()
        .map(|(_, l)| {
            (0..partition.len())
                .map(|k| (0..l.values.len()).map(|i| l.values[i] * partition.bump(k, l.arclength[i]) * l.weights[i]).sum())
                .collect()
        })
        .collect();
    let singular_s: Vec<f64> = partition
        .centers
        .iter()
        .zip(&probes)
        .filter(|(_, p)| p.verdict == PointVerdict::Singular)
        .map(|(s, _)| *s)
        .collect();
    let mu = (0..partition.len())
        .map(|k| {
            if singular_s.iter().any(|&s| partition.gap(s, k) <= h * (1.0 + 1e-12)) {
                None
            } else {
                let column: Vec<f64> = pairings.iter().map(|row| row[k]).collect();
                Some(dyadic_limit(&column))
            }
        })
        .collect();
    let pick = |v: PointVerdict| probes.iter().filter(|p| p.verdict == v).map(|p| p.z).collect();
    Ok(TraceReport {
        deltas: deltas.to_vec(),
        singular: pick(PointVerdict::Singular),
        inconclusive: pick(PointVerdict::Inconclusive),
        partition,
        pairings,
        mu,
        probes,
    })
}

/// `max (u(x)d(y))/(u(y)d(x))` over interior node pairs of `Ω ∩ (B_r \ B_{r/2})(z)`.
///
/// Every pair in the annulus satisfies `|x| ∈ [|y|/2, 2|y|]`, so the maximum is
/// the ratio of the extreme values of `u/d`.
pub fn harnack_ratio(field: &GridField, z: &[f64], r: f64) -> Result<f64> {
    let g = &*field.grid;
    let domain = &g.domain;
    if !(r > 0.0 && r <= 2.0 * domain.reach() / 3.0) {
        return Err(LabError::InvalidInput(format!("scale {r} outside (0, 2δ*/3]")));
    }
    let d = g.distances();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in 0..g.len() {
        let x = g.node(p);
        let t = (x[0] - z[0]).hypot(x[1] - z[1]);
        if g.is_interior(p) && t > 0.5 * r && t < r && d[p] > 0.0 {
            let u = field.values[p];
            if !(u > 0.0) {
                return Err(LabError::InvalidInput(format!("non-positive value {u:e} in the annulus")));
            }
            let v = u / d[p];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi == 0.0 {
        return Err(LabError::EmptyAnnulus);
    }
    Ok(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, PolarGrid};
    use crate::kernels::apply_poisson;
    use crate::measure::BoundaryMeasure;
    use crate::profile::{separable_solution, solve_profile, ShootingConfig};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn field(domain: &Domain, spec: GridSpec, f: impl Fn([f64; 2]) -> f64) -> GridField {
        let grid = Arc::new(PolarGrid::new(domain, &spec).unwrap());
        GridField::from_fn(grid, f)
    }

    fn smooth(d: &Domain) -> BoundaryMeasure {
        BoundaryMeasure::from_density(d, 256, |x| {
            let t = x[1].atan2(x[0]);
            1.0 + 0.5 * t.cos() + 0.3 * (2.0 * t).sin()
        })
        .unwrap()
    }

    fn separable(q: f64) -> GridField {
        let p = solve_profile(2, q, &ShootingConfig::default()).unwrap().profile().unwrap().clone();
        field(&Domain::half_disk(2, 1.0), GridSpec::anchor(160, 81, 0.93), move |x| separable_solution(&p, &x).unwrap_or(0.0))
    }

    #[test]
    fn arclength_round_trip() {
        for d in [Domain::ball(2, 1.0), Domain::half_disk(2, 1.0)] {
            for k in 0..40 {
                let s = perimeter(&d) * (k as f64 + 0.3) / 40.0;
                let x = boundary_point(&d, s);
                assert!((boundary_arclength(&d, &x) - s).abs() < 1e-12, "{s}");
            }
        }
        assert_eq!(boundary_point(&Domain::half_disk(2, 1.0), 0.0), [0.0, 0.0]);
        let b = boundary_point(&Domain::ball(2, 1.0), 0.0);
        assert!(b[0].abs() < 1e-15 && (b[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_field_pairs_to_level_length() {
        let d = Domain::half_disk(2, 1.0);
        let u = field(&d, GridSpec::anchor(64, 33, 0.9), |_| 1.0);
        let one: TestFn = &|_| 1.0;
        for delta in [0.2, 0.05] {
            let v = trace_on_level(&u, delta, &[one]).unwrap()[0];
            assert!((v - d.level_measure(delta).unwrap()).abs() < 1e-10);
        }
        assert!(matches!(trace_on_level(&u, 0.6, &[one]), Err(LabError::LevelTooDeep { .. })));
    }

    #[test]
    fn poisson_trace_recovers_total_mass() {
        let d = Domain::ball(2, 1.0);
        let mu = smooth(&d);
        let grid = Arc::new(PolarGrid::new(&d, &GridSpec::polar(128, 128)).unwrap());
        let u = apply_poisson(&mu, grid).unwrap();
        let one: TestFn = &|_| 1.0;
        let sweep: Vec<f64> = [0.08, 0.04, 0.02].iter().map(|&t| trace_on_level(&u, t, &[one]).unwrap()[0]).collect();
        let m = mu.total_mass();
        assert!((dyadic_limit(&sweep) - m).abs() < 0.01 * m);
    }

    #[test]
    fn dyadic_limits() {
        let f = |d: f64| 3.0 + 2.0 * d.powf(0.5);
        let v: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&d| f(d)).collect();
        assert!((dyadic_limit(&v) - 3.0).abs() < 1e-12);
        assert_eq!(dyadic_limit(&[1.0, 1.0, 1.0]), 1.0);
        assert!((dyadic_limit(&[1.2, 1.1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_sums_to_one() {
        for d in [Domain::ball(2, 1.0), Domain::half_disk(2, 1.0)] {
            let p = Partition::new(&d, 12).unwrap();
            for k in 0..200 {
                let s = p.length * k as f64 / 200.0;
                let total: f64 = (0..p.len()).map(|j| p.bump(j, s)).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_poisson_field_is_regular_everywhere() {
        let d = Domain::ball(2, 1.0);
        let mu = smooth(&d);
        let grid = Arc::new(PolarGrid::new(&d, &GridSpec::polar(128, 128)).unwrap());
        let u = apply_poisson(&mu, grid).unwrap();
        let law = AbsorptionLaw::zero(2);
        let rep = classify_boundary(&u, &law, 16, &default_levels(&d)).unwrap();
        assert!(rep.singular.is_empty() && rep.inconclusive.is_empty());
        let exact = partition_masses(&rep.partition, &mu);
        assert!(rep.total_variation_error(&exact) < 0.02, "{}", rep.total_variation_error(&exact));
    }

    #[test]
    fn separable_field_is_singular_only_at_the_anchor() {
        let q = 1.3;
        let u = separable(q);
        let law = AbsorptionLaw::power(2, q).unwrap();
        let d = u.domain().clone();
        let at = dichotomy_probe(&u, &law, [0.0, 0.0], &[0.2, 0.1], &default_levels(&d)).unwrap();
        assert_eq!(at.verdict, PointVerdict::Singular);
        let away = dichotomy_probe(&u, &law, [0.6, 0.0], &[0.2, 0.1], &default_levels(&d)).unwrap();
        assert_eq!(away.verdict, PointVerdict::Regular);
        // M(δ, r) ~ δ^{1−β} near the anchor
        let beta = (2.0 - q) / (q - 1.0);
        assert!((at.slopes[1] - (1.0 - beta)).abs() < 0.15, "{}", at.slopes[1]);
    }

    #[test]
    fn harnack_ratio_of_the_linear_profile_is_one() {
        let d = Domain::half_disk(2, 1.0);
        let u = field(&d, GridSpec::anchor(64, 33, 0.9), |x| x[1]);
        let r = harnack_ratio(&u, &[0.0, 0.0], 0.3).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(harnack_ratio(&u, &[0.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn harnack_ratio_of_the_separable_field_is_scale_free() {
        let q = 1.3;
        let p = solve_profile(2, q, &ShootingConfig::default()).unwrap().profile().unwrap().clone();
        // ten rings per octave, so annuli at r and r/2 hold matching ring sets
        let d = Domain::half_disk(2, 1.0);
        let pp = p.clone();
        let u = field(&d, GridSpec::anchor(160, 81, 0.5f64.powf(0.1)), move |x| separable_solution(&pp, &x).unwrap_or(0.0));
        let beta = p.beta;
        // ω(φ)/cos φ over the annulus angles, times the radial factor 2^{β+1}
        let g = &*u.grid;
        let vals: Vec<f64> = g.angles[1..g.n_theta() - 1].iter().map(|t| {
            let phi = 0.5 * PI - t;
            p.omega_at(phi) / phi.cos()
        }).collect();
        let ext = vals.iter().copied().fold(0.0, f64::max) / vals.iter().copied().fold(f64::INFINITY, f64::min);
        let r1 = harnack_ratio(&u, &[0.0, 0.0], 0.3).unwrap();
        let r2 = harnack_ratio(&u, &[0.0, 0.0], 0.15).unwrap();
        assert!((r1 / r2 - 1.0).abs() < 0.2, "{r1} {r2}");
        assert!(r1 <= 2f64.powf(beta + 1.0) * ext * 1.001 && r1 >= ext);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn harnack_ratio_is_scale_invariant(c in 1e-3f64..1e3) {
            let d = Domain::half_disk(2, 1.0);
            let u = field(&d, GridSpec::anchor(48, 25, 0.88), |x| x[1] * (1.0 + x[0] * x[0]) / (x[0] * x[0] + x[1] * x[1]));
            let v = GridField::new(u.grid.clone(), u.values.iter().map(|a| c * a).collect());
            let a = harnack_ratio(&u, &[0.0, 0.0], 0.25).unwrap();
            let b = harnack_ratio(&v, &[0.0, 0.0], 0.25).unwrap();
            prop_assert!((a / b - 1.0).abs() < 1e-12);
        }
    }
}
