//! Nonlinear solvers for `−Δu + g(|∇u|) = ν` with measure data.
//!
//! The finite-difference backend works with `u` directly: Dirichlet rows on the
//! physical boundary, the stencil rows of [`GridOperators`] inside. Iterates are
//! kept in the sandwich `[min(0, min b), H]`, `H` being the discrete harmonic
//! (or Green) part of the data, which is the same as clipping `v = u − H` to
//! `[−H, 0]`. A Newton accelerator with backtracking is the default; plain
//! Picard sweeps are available for cross-checks.
//!
//! Atoms are replaced by a mass-preserving raised-cosine bump spanning
//! `mollify_cells` boundary cells, except atoms at the corner of the graded
//! half-disk grid: those enter exactly through the inner ring, where the data
//! is `Σ m P(x, σ)`, capped by the universal bound `C₄(q)ρ₀^{−β}`.

use crate::error::{LabError, Result};
use crate::geometry::{Domain, DomainKind};
use crate::grid::{GridField, GridSpec, Layout, NodeKind, PolarGrid};
use crate::kernels::{apply_green, apply_poisson, poisson_integral, poisson_kernel};
use crate::linalg::BandedLu;
use crate::measure::{Atom, BoundaryMeasure, InteriorMeasure};
use crate::profile::{exponents, keller_osserman_constant};
use crate::stencil::GridOperators;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LawKind {
    Power(f64),
    /// `min(s^q, cap)`.
    TruncatedPower { q: f64, cap: f64 },
    /// Nondecreasing samples `(s, g(s))` from `(0, 0)`, linear in between and
    /// extended with the last slope.
    Custom(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionLaw {
    pub kind: LawKind,
    pub subcritical_boundary: bool,
    pub subcritical_interior: bool,
}

/// `∫₁^∞ g(s) s^{−a} ds < ∞` for a sampled law with linear extension.
fn custom_tail_finite(table: &[(f64, f64)], a: f64) -> bool {
    let n = table.len();
    let (s1, g1) = table[n - 1];
    let (s0, g0) = table[n - 2];
    let slope = (g1 - g0) / (s1 - s0);
    // the tabulated range contributes a finite amount; the tail behaves like slope·s^{1−a} + c·s^{−a}
    if slope > 0.0 {
        a > 2.0
    } else {
        a > 1.0 || g1 == 0.0
    }
}

impl AbsorptionLaw {
    pub fn power(dim: usize, q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(LabError::InvalidInput(format!("power exponent {q}")));
        }
        let n = dim as f64;
        Ok(Self {
            kind: LawKind::Power(q),
            subcritical_boundary: q < (n + 1.0) / n,
            subcritical_interior: q < n / (n - 1.0),
        })
    }

    pub fn truncated(q: f64, cap: f64) -> Result<Self> {
        if !(q > 0.0 && cap > 0.0) {
            return Err(LabError::InvalidInput("truncated power needs q > 0 and cap > 0".into()));
        }
        Ok(Self { kind: LawKind::TruncatedPower { q, cap }, subcritical_boundary: true, subcritical_interior: true })
    }

    pub fn custom(dim: usize, table: Vec<(f64, f64)>) -> Result<Self> {
        if table.len() < 2 || table[0] != (0.0, 0.0) {
            return Err(LabError::InvalidInput("custom law must start at (0, 0) with two samples or more".into()));
        }
        for w in table.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 || !w[1].1.is_finite() {
                return Err(LabError::InvalidInput("custom law must be increasing in s and nondecreasing in g".into()));
            }
        }
        let n = dim as f64;
        Ok(Self {
            subcritical_boundary: custom_tail_finite(&table, (2.0 * n + 1.0) / n),
            subcritical_interior: custom_tail_finite(&table, (2.0 * n - 1.0) / (n - 1.0)),
            kind: LawKind::Custom(table),
        })
    }

    /// `g ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::custom(dim, vec![(0.0, 0.0), (1.0, 0.0)]).expect("valid table")
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.kind, LawKind::Custom(t) if t.iter().all(|p| p.1 == 0.0))
    }

    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            LawKind::Power(q) | LawKind::TruncatedPower { q, .. } => Some(q),
            LawKind::Custom(_) => None,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match &self.kind {
            LawKind::Power(q) => s.powf(*q),
            LawKind::TruncatedPower { q, cap } => s.powf(*q).min(*cap),
            LawKind::Custom(t) => {
                let k = t.partition_point(|p| p.0 <= s).clamp(1, t.len() - 1);
                let (a, b) = (t[k - 1], t[k]);
                a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
            }
        }
    }

    pub fn slope(&self, s: f64) -> f64 {
        match &self.kind {
            LawKind::Power(q) => {
                if s > 0.0 {
                    q * s.powf(q - 1.0)
                } else if *q == 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LawKind::TruncatedPower { q, cap } => {
                if s.powf(*q) < *cap && s > 0.0 {
                    q * s.powf(q - 1.0)
                } else {
                    0.0
                }
            }
            LawKind::Custom(t) => {
                let k = t.partition_point(|p| p.0 <= s).clamp(1, t.len() - 1);
                (t[k].1 - t[k - 1].1) / (t[k].0 - t[k - 1].0)
            }
        }
    }

    /// Laws whose derivative in `∇u` is not continuous at `∇u = 0`.
    fn needs_regularization(&self) -> bool {
        match &self.kind {
            LawKind::Power(q) | LawKind::TruncatedPower { q, .. } => *q <= 1.0,
            LawKind::Custom(_) => !self.is_zero(),
        }
    }

    /// `g_ε(s) = g(√(s²+ε²)) − g(ε)` and `g′_ε(s)/s`.
    fn regularized(&self, s: f64, eps: f64) -> (f64, f64) {
        if eps == 0.0 {
            let f = if s > 0.0 { self.slope(s) / s } else { 0.0 };
            return (self.value(s), f);
        }
        let se = s.hypot(eps);
        (self.value(se) - self.value(eps), self.slope(se) / se)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Damped Picard on `u = P[μ] − G[g(|∇u|)]` with quadrature kernels.
    Picard,
    /// Finite differences.
    Fd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub backend: Backend,
    pub theta: f64,
    pub tol_update: f64,
    pub tol_weak: f64,
    pub max_iter: usize,
    pub grid: GridSpec,
    /// Newton accelerator for the finite-difference backend.
    pub newton: bool,
    pub allow_supercritical: bool,
    pub mollify_cells: usize,
    pub basis_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Fd,
            theta: 0.5,
            tol_update: 1e-9,
            tol_weak: 1e-5,
            max_iter: 10_000,
            grid: GridSpec::new(64, 64, 0.9),
            newton: true,
            allow_supercritical: false,
            mollify_cells: 4,
            basis_size: 5,
        }
    }
}

impl SolverConfig {
    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub backend: Backend,
    pub iterations: usize,
    pub update: f64,
    pub weak_residual: f64,
    /// Notes such as `supercritical` or `subcriticality-violated`.
    pub flags: Vec<String>,
    /// Auxiliary sweep (exhaustion sup-differences, reference errors).
    pub sweep: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// `u` with its polar gradient cached.
    pub field: GridField,
    /// Discrete harmonic (or Green) part of the data: the upper barrier.
    pub harmonic: GridField,
    pub law: AbsorptionLaw,
    pub boundary_data: BoundaryMeasure,
    pub interior_data: Option<InteriorMeasure>,
    pub meta: SolverMeta,
}

impl Solution {
    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.field.grid
    }

    /// Nodes where `u` leaves `[−slack, H + slack]`.
    pub fn comparison_violations(&self, slack: f64) -> usize {
        self.field
            .values
            .iter()
            .zip(&self.harmonic.values)
            .filter(|(u, h)| **u > **h + slack || **u < -slack)
            .count()
    }

    pub fn metadata(&self) -> serde_json::Value {
        let g = self.grid();
        serde_json::json!({
            "law": self.law,
            "grid": g.spec,
            "domain": g.domain,
            "meta": self.meta,
            "boundary_mass": self.boundary_data.total_mass(),
            "interior_mass": self.interior_data.as_ref().map(|m| m.total_mass()),
        })
    }
}

/// Builds the grid named by `spec`; without an explicit layout the ball gets
/// the polar layout and the half-disk the corner-graded one.
pub fn build_grid(domain: &Domain, spec: &GridSpec) -> Result<Arc<PolarGrid>> {
    let mut s = spec.clone();
    if s.layout.is_none() {
        s.layout = Some(match domain.kind {
            DomainKind::Ball => Layout::Polar,
            DomainKind::HalfDisk => Layout::AnchorGraded,
        });
    }
    if s.layout == Some(Layout::Polar) {
        s.grading = 1.0;
    } else if s.grading >= 1.0 {
        s.grading = 0.9;
    }
    Ok(Arc::new(PolarGrid::new(domain, &s)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Row {
    Dirichlet(f64),
    /// `(A u)_p − offset + s_p g(|∇u|_p) = 0`.
    Equation(f64),
}

/// Discrete problem on a grid: linear rows, row kinds and gradient operators.
struct System {
    grid: Arc<PolarGrid>,
    ops: GridOperators,
    rows: Vec<Vec<(usize, f64)>>,
    kind: Vec<Row>,
    lu: BandedLu,
}

impl System {
    /// `flux` is `σ` with `ρ ∂_ρ u = −σ` on the inner ring of the centered layout.
    fn new(grid: Arc<PolarGrid>, boundary: &[f64], source: &[f64], flux: f64) -> Result<Self> {
        let ops = GridOperators::new(&grid);
        let n = grid.len();
        let mut rows = vec![Vec::new(); n];
        let mut kind = vec![Row::Dirichlet(0.0); n];
        let n_t = grid.n_theta();
        for p in 0..n {
            match grid.kind(p) {
                NodeKind::Interior => {
                    rows[p] = ops.lap.rows[p].clone();
                    kind[p] = Row::Equation(ops.scale[p] * source[p]);
                }
                NodeKind::Inner if grid.layout == Layout::CenterGraded => {
                    let (i, j) = grid.split(p);
                    let a = 1.0 / (grid.step * grid.step);
                    let b = 1.0 / (grid.dtheta * grid.dtheta);
                    rows[p] = vec![
                        (p, 2.0 * a + 2.0 * b),
                        (grid.index(i + 1, j), -2.0 * a),
                        (grid.index(i, (j + 1) % n_t), -b),
                        (grid.index(i, (j + n_t - 1) % n_t), -b),
                    ];
                    kind[p] = Row::Equation(2.0 * flux / grid.step + ops.scale[p] * source[p]);
                }
                _ => {
                    rows[p] = vec![(p, 1.0)];
                    kind[p] = Row::Dirichlet(boundary[p]);
                }
            }
        }
        let lu = BandedLu::factor(&rows)?;
        Ok(Self { grid, ops, rows, kind, lu })
    }

    fn rhs(&self, absorption: Option<&[f64]>) -> Vec<f64> {
        (0..self.rows.len())
            .map(|p| match self.kind[p] {
                Row::Dirichlet(b) => b,
                Row::Equation(off) => off - absorption.map_or(0.0, |g| self.ops.scale[p] * g[p]),
            })
            .collect()
    }

    fn linear_solve(&self) -> Vec<f64> {
        self.lu.solve(&self.rhs(None))
    }

    fn grad_norms(&self, u: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>) {
        let gr = self.ops.gradient(u);
        let s = gr.iter().map(|v| v[0].hypot(v[1])).collect();
        (gr, s)
    }

    fn residual(&self, law: &AbsorptionLaw, eps: f64, u: &[f64]) -> Vec<f64> {
        let (_, s) = self.grad_norms(u);
        (0..u.len())
            .map(|p| match self.kind[p] {
                Row::Dirichlet(b) => u[p] - b,
                Row::Equation(off) => {
                    let lin: f64 = self.rows[p].iter().map(|&(c, a)| a * u[c]).sum();
                    // scale-free measure: divide by the row scale
                    (lin - off + self.ops.scale[p] * law.regularized(s[p], eps).0) / self.ops.scale[p]
                }
            })
            .collect()
    }

    fn jacobian(&self, law: &AbsorptionLaw, eps: f64, u: &[f64]) -> Vec<Vec<(usize, f64)>> {
        let (gr, s) = self.grad_norms(u);
        (0..u.len())
            .map(|p| {
                let mut row = self.rows[p].clone();
                if let Row::Equation(_) = self.kind[p] {
                    let f = self.ops.scale[p] * law.regularized(s[p], eps).1;
                    if f != 0.0 {
                        for &(c, a) in &self.ops.grad_r.rows[p] {
                            row.push((c, f * gr[p][0] * a));
                        }
                        for &(c, a) in &self.ops.grad_t.rows[p] {
                            row.push((c, f * gr[p][1] * a));
                        }
                    }
                }
                row
            })
            .collect()
    }
}

/// Largest nodewise change, relative where `|u| > 1`.
fn relative_update(next: &[f64], prev: &[f64]) -> f64 {
    next.iter().zip(prev).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Outcome {
    u: Vec<f64>,
    iterations: usize,
    update: f64,
}

fn clip(u: &mut [f64], lo: f64, hi: &[f64]) {
    for (v, h) in u.iter_mut().zip(hi) {
        *v = v.clamp(lo, lo.max(*h));
    }
}

fn newton(sys: &System, law: &AbsorptionLaw, start: Vec<f64>, lo: f64, hi: &[f64], cfg: &SolverConfig) -> Result<Outcome> {
    let eps_steps: Vec<f64> = if law.needs_regularization() {
        (2..=8).map(|k| 10f64.powi(-k)).collect()
    } else {
        vec![0.0]
    };
    let mut u = start;
    let mut total = 0;
    let mut update = f64::INFINITY;
    let cap = cfg.max_iter.min(500);
    for &eps in &eps_steps {
        let mut converged = false;
        for _ in 0..cap {
            total += 1;
            let f = sys.residual(law, eps, &u);
            let f0 = sup_norm(&f);
            let lu = BandedLu::factor(&sys.jacobian(law, eps, &u))?;
            let mut du: Vec<f64> = f.iter().map(|v| -v).collect();
            // residual rows are divided by the row scale; undo that for the Jacobian system
            for (p, d) in du.iter_mut().enumerate() {
                if let Row::Equation(_) = sys.kind[p] {
                    *d *= sys.ops.scale[p];
                }
            }
            lu.solve_in_place(&mut du);
            let mut t = 1.0;
            let mut next;
            loop {
                next = u.iter().zip(&du).map(|(a, b)| a + t * b).collect::<Vec<f64>>();
                // the sandwich guards the early iterates; near convergence it would bias the fixed point
                if update > 1e-3 {
                    clip(&mut next, lo, hi);
                }
                let f1 = sup_norm(&sys.residual(law, eps, &next));
                if f1 <= (1.0 - 1e-4 * t) * f0 || t < 1e-3 || f0 == 0.0 {
                    break;
                }
                t *= 0.5;
            }
            update = relative_update(&next, &u);
            u = next;
            if update < cfg.tol_update {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LabError::NonConvergence { iterations: total, update, context: "newton".into() });
        }
    }
    Ok(Outcome { u, iterations: total, update })
}

fn picard_fd(sys: &System, law: &AbsorptionLaw, start: Vec<f64>, lo: f64, hi: &[f64], cfg: &SolverConfig) -> Result<Outcome> {
    let mut u = start;
    let mut theta = cfg.theta;
    let mut last = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let (_, s) = sys.grad_norms(&u);
        let g: Vec<f64> = s.iter().map(|&v| law.value(v)).collect();
        let mut w = sys.lu.solve(&sys.rhs(Some(&g)));
        clip(&mut w, lo, hi);
        let next: Vec<f64> = u.iter().zip(&w).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        let update = relative_update(&next, &u);
        if update > last {
            theta = (0.5 * theta).max(1e-3);
        }
        last = update;
        u = next;
        if update < cfg.tol_update {
            return Ok(Outcome { u, iterations: it, update });
        }
    }
    Err(LabError::NonConvergence { iterations: cfg.max_iter, update: last, context: "picard sweeps".into() })
}

fn raised_cosine(t: f64, w: f64) -> f64 {
    if t.abs() >= w {
        0.0
    } else {
        (1.0 + (PI * t / w).cos()) / (2.0 * w)
    }
}

/// Boundary nodes with their arclength weights (trapezoid along each boundary piece).
fn boundary_weights(grid: &PolarGrid) -> Vec<(usize, f64)> {
    let n_t = grid.n_theta();
    let last = grid.n_r() - 1;
    let mut out = Vec::new();
    let r = grid.domain.radius;
    match grid.layout {
        Layout::AnchorGraded => {
            for j in 0..n_t {
                let w = if j == 0 || j + 1 == n_t { 0.5 } else { 1.0 };
                out.push((grid.index(last, j), w * r * grid.dtheta));
            }
            for &j in &[0, n_t - 1] {
                for i in 0..last {
                    let lo = if i == 0 { grid.radii[0] } else { 0.5 * (grid.radii[i - 1] + grid.radii[i]) };
                    let hi = 0.5 * (grid.radii[i] + grid.radii[i + 1]);
                    out.push((grid.index(i, j), hi - lo));
                }
            }
        }
        _ => {
            for j in 0..n_t {
                out.push((grid.index(last, j), r * grid.dtheta));
            }
        }
    }
    out
}

/// Dirichlet values on boundary and inner-ring nodes for a boundary measure.
///
/// Inner-ring values are capped by `ring_cap`, the universal bound `C₄(q)ρ₀^{−β}` for power laws.
fn boundary_values(grid: &PolarGrid, mu: &BoundaryMeasure, cells: usize, ring_cap: f64) -> Vec<f64> {
    let n = grid.len();
    let mut b = vec![0.0; n];
    let corner = |a: &Atom| grid.layout == Layout::AnchorGraded && a.point.iter().all(|v| v.abs() < 1e-14);
    let bw = boundary_weights(grid);
    for &(p, _) in &bw {
        b[p] = mu.density_at(&grid.node(p));
    }
    if grid.layout == Layout::AnchorGraded {
        for j in 0..grid.n_theta() {
            let p = grid.index(0, j);
            let x = grid.node(p);
            let atoms: f64 = mu.atoms.iter().map(|a| a.mass * poisson_kernel(&grid.domain, &x, &a.point)).sum();
            b[p] = (atoms + mu.density_at(&[x[0], 0.0])).min(ring_cap);
        }
    }
    for a in mu.atoms.iter().filter(|a| !corner(a)) {
        // spacing of the boundary nodes next to the atom sets the bump width
        let mut near: Vec<(f64, usize)> = bw.iter().map(|&(p, _)| (dist2(grid.node(p), &a.point), p)).collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0));
        let spacing = bw.iter().find(|(p, _)| *p == near[0].1).map(|x| x.1).unwrap_or(grid.dtheta);
        let w = 0.5 * cells as f64 * spacing;
        let bump: Vec<(usize, f64, f64)> = bw.iter().map(|&(p, wt)| (p, wt, raised_cosine(dist2(grid.node(p), &a.point), w))).collect();
        let mass: f64 = bump.iter().map(|(_, wt, v)| wt * v).sum();
        for (p, _, v) in bump {
            b[p] += a.mass * v / mass;
        }
    }
    b
}

fn ring_cap(law: &AbsorptionLaw, grid: &PolarGrid) -> f64 {
    match law.exponent() {
        Some(q) if q > 1.0 && q < 2.0 && grid.layout == Layout::AnchorGraded => {
            let c4 = keller_osserman_constant(q).expect("q inside (1, 2)");
            c4 * grid.radii[0].powf(-(2.0 - q) / (q - 1.0))
        }
        _ => f64::INFINITY,
    }
}

fn dist2(x: [f64; 2], y: &[f64]) -> f64 {
    (x[0] - y[0]).hypot(x[1] - y[1])
}

fn check_measure(grid: &PolarGrid, mu: &BoundaryMeasure) -> Result<()> {
    if mu.domain != grid.domain {
        return Err(LabError::InvalidInput("measure and grid live on different domains".into()));
    }
    if mu.domain.dim != 2 {
        return Err(LabError::UnsupportedDimension(mu.domain.dim));
    }
    Ok(())
}

fn flags_for(law: &AbsorptionLaw, mu: &BoundaryMeasure, cfg: &SolverConfig) -> Result<Vec<String>> {
    let mut flags = Vec::new();
    if !mu.atoms.is_empty() {
        if let LawKind::Power(q) = law.kind {
            let qc = (mu.domain.dim as f64 + 1.0) / mu.domain.dim as f64;
            if q >= qc {
                if !cfg.allow_supercritical {
                    return Err(LabError::InvalidInput(format!(
                        "atomic data with q = {q} >= {qc} needs allow_supercritical"
                    )));
                }
                flags.push("supercritical".into());
            }
        }
        if !law.subcritical_boundary {
            flags.push("subcriticality-violated".into());
        }
    }
    Ok(flags)
}

fn finish(
    sys: &System,
    law: &AbsorptionLaw,
    out: Outcome,
    harmonic: Vec<f64>,
    mu: BoundaryMeasure,
    nu: Option<InteriorMeasure>,
    backend: Backend,
    flags: Vec<String>,
    basis: usize,
) -> Solution {
    let grad = sys.ops.gradient(&out.u);
    let mut field = GridField::new(sys.grid.clone(), out.u);
    field.grad = Some(grad);
    let mut sol = Solution {
        field,
        harmonic: GridField::new(sys.grid.clone(), harmonic),
        law: law.clone(),
        boundary_data: mu,
        interior_data: nu,
        meta: SolverMeta { backend, iterations: out.iterations, update: out.update, weak_residual: f64::NAN, flags, sweep: Vec::new() },
    };
    sol.meta.weak_residual = weak_residual(&sol, basis);
    sol
}

fn solve_fd_system(sys: &System, law: &AbsorptionLaw, cfg: &SolverConfig) -> Result<(Outcome, Vec<f64>)> {
    let h = sys.linear_solve();
    let lo = sys.kind.iter().filter_map(|k| if let Row::Dirichlet(b) = k { Some(*b) } else { None }).fold(0.0, f64::min);
    if law.is_zero() {
        return Ok((Outcome { u: h.clone(), iterations: 1, update: 0.0 }, h));
    }
    let mut start = h.clone();
    clip(&mut start, lo, &h);
    let out = if cfg.newton { newton(sys, law, start, lo, &h, cfg)? } else { picard_fd(sys, law, start, lo, &h, cfg)? };
    Ok((out, h))
}

/// Solves `−Δu + g(|∇u|) = 0` in the domain of `μ` with boundary trace `μ`.
pub fn solve_dirichlet(law: &AbsorptionLaw, mu: &BoundaryMeasure, cfg: &SolverConfig) -> Result<Solution> {
    let grid = build_grid(&mu.domain, &cfg.grid)?;
    check_measure(&grid, mu)?;
    let flags = flags_for(law, mu, cfg)?;
    match cfg.backend {
        Backend::Fd => {
            let b = boundary_values(&grid, mu, cfg.mollify_cells, ring_cap(law, &grid));
            let sys = System::new(grid.clone(), &b, &vec![0.0; grid.len()], 0.0)?;
            let (out, h) = solve_fd_system(&sys, law, cfg)?;
            Ok(finish(&sys, law, out, h, mu.clone(), None, Backend::Fd, flags, cfg.basis_size))
        }
        Backend::Picard => picard_integral(&grid, law, mu, cfg, flags),
    }
}

/// Dirichlet problem with boundary values given pointwise (boundary nodes and,
/// on the corner-graded grid, the inner ring) and no measure bookkeeping.
pub fn solve_with_boundary_values(
    domain: &Domain,
    law: &AbsorptionLaw,
    values: impl Fn([f64; 2]) -> f64,
    cfg: &SolverConfig,
) -> Result<Solution> {
    let grid = build_grid(domain, &cfg.grid)?;
    let b: Vec<f64> = (0..grid.len()).map(|p| if grid.is_interior(p) { 0.0 } else { values(grid.node(p)) }).collect();
    let sys = System::new(grid.clone(), &b, &vec![0.0; grid.len()], 0.0)?;
    let (out, h) = solve_fd_system(&sys, law, cfg)?;
    Ok(finish(&sys, law, out, h, BoundaryMeasure::zero(domain), None, Backend::Fd, Vec::new(), cfg.basis_size))
}

fn picard_integral(grid: &Arc<PolarGrid>, law: &AbsorptionLaw, mu: &BoundaryMeasure, cfg: &SolverConfig, flags: Vec<String>) -> Result<Solution> {
    let b = boundary_values(grid, mu, cfg.mollify_cells, ring_cap(law, grid));
    let sys = System::new(grid.clone(), &b, &vec![0.0; grid.len()], 0.0)?;
    // P[μ_h] from the kernel, with the mollified boundary values on boundary nodes
    let mut p = apply_poisson(mu, grid.clone())?.values;
    for q in 0..grid.len() {
        if !grid.is_interior(q) {
            p[q] = b[q];
        }
    }
    let mut u = p.clone();
    let mut theta = cfg.theta;
    let mut last = f64::INFINITY;
    let mut iterations = 0;
    let mut update = f64::INFINITY;
    while iterations < cfg.max_iter {
        iterations += 1;
        let (_, s) = sys.grad_norms(&u);
        let mut g = GridField::new(grid.clone(), s.iter().map(|&v| law.value(v)).collect());
        for q in 0..grid.len() {
            if !grid.is_interior(q) {
                g.values[q] = 0.0;
            }
        }
        let gg = apply_green(&g)?;
        let mut w: Vec<f64> = p.iter().zip(&gg.values).map(|(a, b)| a - b).collect();
        clip(&mut w, 0.0, &p);
        let next: Vec<f64> = u.iter().zip(&w).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        update = relative_update(&next, &u);
        if update > last {
            theta = (0.5 * theta).max(1e-3);
        }
        last = update;
        u = next;
        if update < cfg.tol_update {
            let out = Outcome { u, iterations, update };
            return Ok(finish(&sys, law, out, p, mu.clone(), None, Backend::Picard, flags, cfg.basis_size));
        }
    }
    Err(LabError::NonConvergence { iterations, update, context: "integral picard".into() })
}

/// Solves `−Δu + g(|∇u|) = ν` with zero boundary data.
///
/// An atom at the center of a ball uses the centered log-polar layout with the
/// flux `ρ∂_ρu = −m/2π` on its inner ring; other atoms are deposited on the nearest node.
pub fn solve_interior(law: &AbsorptionLaw, domain: &Domain, nu: &InteriorMeasure, cfg: &SolverConfig) -> Result<Solution> {
    nu.validate(domain)?;
    if !nu.atoms.is_empty() && !law.subcritical_interior {
        return Err(LabError::InvalidInput("atomic interior data needs an interior-subcritical law".into()));
    }
    let centered_atom = |a: &Atom| a.point.iter().all(|v| v.abs() < 1e-14);
    let mut spec = cfg.grid.clone();
    if spec.layout.is_none() && domain.kind == DomainKind::Ball && nu.atoms.iter().any(centered_atom) {
        spec.layout = Some(Layout::CenterGraded);
    }
    let grid = build_grid(domain, &spec)?;
    let n = grid.len();
    let mut source = vec![0.0; n];
    if let Some(d) = &nu.density {
        for p in 0..n {
            source[p] = d.interpolate(grid.node(p)).unwrap_or(0.0);
        }
    }
    let mut flux = 0.0;
    for a in &nu.atoms {
        if centered_atom(a) && grid.layout == Layout::CenterGraded {
            flux += a.mass / (2.0 * PI);
        } else if centered_atom(a) && grid.layout == Layout::Polar {
            let ring: Vec<usize> = (0..grid.n_theta()).map(|j| grid.index(0, j)).collect();
            let area: f64 = ring.iter().map(|&p| grid.weights[p]).sum();
            for p in ring {
                source[p] += a.mass / area;
            }
        } else {
            let x = [a.point[0], a.point[1]];
            let p = (0..n).filter(|&p| grid.is_interior(p)).min_by(|&p, &q| dist2(grid.node(p), &x).total_cmp(&dist2(grid.node(q), &x))).ok_or(LabError::EmptyAnnulus)?;
            source[p] += a.mass / grid.weights[p];
        }
    }
    let sys = System::new(grid.clone(), &vec![0.0; n], &source, flux)?;
    let (out, h) = solve_fd_system(&sys, law, cfg)?;
    Ok(finish(&sys, law, out, h, BoundaryMeasure::zero(domain), Some(nu.clone()), Backend::Fd, Vec::new(), cfg.basis_size))
}

/// Exhaustion by the balls of radius `R − δ` with data `P[μ]` on `Σ_δ`.
///
/// Returns the solve at the smallest `δ`; `meta.sweep` holds the sup-differences
/// between successive levels on the nodes of the largest-`δ` grid.
pub fn solve_maximal_exhaustion(law: &AbsorptionLaw, mu: &BoundaryMeasure, deltas: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    let domain = &mu.domain;
    if domain.kind != DomainKind::Ball || domain.dim != 2 {
        return Err(LabError::InvalidInput("exhaustion is implemented for the disk only".into()));
    }
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) || deltas[0] >= domain.reach() || deltas[deltas.len() - 1] <= 0.0 {
        return Err(LabError::InvalidInput("δ sequence must decrease strictly inside (0, δ*)".into()));
    }
    let mut sols: Vec<Solution> = Vec::new();
    for &d in deltas {
        let inner = Domain::ball(2, domain.radius - d);
        let grid = build_grid(&inner, &cfg.grid)?;
        let b: Vec<f64> = (0..grid.len()).map(|p| if grid.is_interior(p) { 0.0 } else { poisson_integral(mu, &grid.node(p)) }).collect();
        let sys = System::new(grid.clone(), &b, &vec![0.0; grid.len()], 0.0)?;
        let (out, h) = solve_fd_system(&sys, law, cfg)?;
        let mut s = finish(&sys, law, out, h, BoundaryMeasure::zero(&inner), None, Backend::Fd, Vec::new(), cfg.basis_size);
        s.meta.weak_residual = f64::NAN;
        sols.push(s);
    }
    let probe = sols[0].grid().nodes();
    let values: Vec<Vec<f64>> = sols.iter().map(|s| probe.iter().map(|&x| s.field.interpolate(x)).collect::<Result<Vec<f64>>>()).collect::<Result<_>>()?;
    let top = values.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-6 * top;
    let mut sweep = Vec::new();
    for k in 1..values.len() {
        let mut excess: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for (a, b) in values[k].iter().zip(&values[k - 1]) {
            excess = excess.max(a - b);
            diff = diff.max((a - b).abs());
        }
        if excess > tol {
            return Err(LabError::MonotonicityViolation { index: k, excess });
        }
        sweep.push(diff);
    }
    let mut last = sols.pop().expect("nonempty");
    last.boundary_data = mu.clone();
    last.meta.sweep = sweep;
    last.meta.flags.push("exhaustion".into());
    Ok(last)
}

/// Hopf–Cole check for `q = 2`: `−ln P[μ]` solves `−Δu + |∇u|² = 0` with data `−ln f`.
///
/// The generic solver runs on that data; `meta.sweep[0]` is the sup-difference to `−ln P[μ]`.
pub fn solve_hopf_cole(mu: &BoundaryMeasure, cfg: &SolverConfig) -> Result<Solution> {
    let min = mu.min_density().unwrap_or(0.0);
    if !(min > 0.0) || !mu.atoms.is_empty() {
        return Err(LabError::DensityNotBoundedBelow(min));
    }
    let grid = build_grid(&mu.domain, &cfg.grid)?;
    let exact: Vec<f64> = apply_poisson(mu, grid.clone())?.values.iter().map(|v| -v.ln()).collect();
    let law = AbsorptionLaw::power(mu.domain.dim, 2.0)?;
    let b: Vec<f64> = (0..grid.len()).map(|p| if grid.is_interior(p) { 0.0 } else { exact[p] }).collect();
    let sys = System::new(grid.clone(), &b, &vec![0.0; grid.len()], 0.0)?;
    let (out, h) = solve_fd_system(&sys, &law, cfg)?;
    let err = out.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut sol = finish(&sys, &law, out, h, mu.clone(), None, Backend::Fd, vec!["hopf-cole".into()], cfg.basis_size);
    sol.meta.sweep = vec![err];
    Ok(sol)
}

/// Solves the `q = 1` problem with data `δ_z` and `ℓδ_z`; returns the second
/// solve and `sup|u_ℓ − ℓu₁| / sup u_ℓ`.
pub fn q1_solve_and_scale(domain: &Domain, z: &[f64], ell: f64, cfg: &SolverConfig) -> Result<(Solution, f64)> {
    if !(ell > 0.0) {
        return Err(LabError::InvalidInput(format!("scale factor {ell}")));
    }
    let law = AbsorptionLaw::power(domain.dim, 1.0)?;
    let mu = BoundaryMeasure::atom(domain, z.to_vec(), 1.0)?;
    let one = solve_dirichlet(&law, &mu, cfg)?;
    let scaled = solve_dirichlet(&law, &mu.scaled(ell), cfg)?;
    let diff = scaled.field.values.iter().zip(&one.field.values).map(|(a, b)| (a - ell * b).abs()).fold(0.0, f64::max);
    let err = diff / scaled.field.max();
    Ok((scaled, err))
}

/// Weight `ξ ≥ 0` vanishing on the boundary with `−Δξ` explicit: the torsion
/// function `(R² − |x|²)/4` of the disk, and `x₂(R² − |x|²)/8` (with `−Δξ = x₂`) on the half-disk.
fn xi_parts(domain: &Domain, x: [f64; 2]) -> (f64, [f64; 2], f64) {
    let r2 = domain.radius * domain.radius;
    let rr = x[0] * x[0] + x[1] * x[1];
    match domain.kind {
        DomainKind::Ball => ((r2 - rr) / 4.0, [-x[0] / 2.0, -x[1] / 2.0], -1.0),
        DomainKind::HalfDisk => (
            x[1] * (r2 - rr) / 8.0,
            [-2.0 * x[0] * x[1] / 8.0, (r2 - rr - 2.0 * x[1] * x[1]) / 8.0],
            -x[1],
        ),
    }
}

/// Harmonic polynomial number `k` (`1, Re z, Im z, Re z², …`) scaled by `R`, and its gradient.
fn harmonic_mode(k: usize, radius: f64, x: [f64; 2]) -> (f64, [f64; 2]) {
    if k == 0 {
        return (1.0, [0.0, 0.0]);
    }
    let m = (k + 1) / 2;
    let (a, b) = (x[0] / radius, x[1] / radius);
    // z^m and m z^{m−1} by repeated complex multiplication
    let (mut re, mut im) = (1.0, 0.0);
    let (mut dre, mut dim) = (0.0, 0.0);
    for j in 0..m {
        if j + 1 == m {
            dre = re * m as f64;
            dim = im * m as f64;
        }
        let t = re * a - im * b;
        im = re * b + im * a;
        re = t;
    }
    let (dre, dim) = (dre / radius, dim / radius);
    if k % 2 == 1 {
        (re, [dre, -dim])
    } else {
        (im, [dim, dre])
    }
}

/// `max_k |∫(−uΔζ_k + g(|∇u|)ζ_k) − ∫ζ_k dν + ∫∂_nζ_k dμ|` relative to the size
/// of the terms, with `ζ_k = ξ h_k` and `h_k` harmonic polynomials.
pub fn weak_residual(sol: &Solution, basis: usize) -> f64 {
    let g = sol.grid();
    let domain = &g.domain;
    let s = sol.field.grad_norm().unwrap_or_else(|| vec![0.0; g.len()]);
    let mut worst: f64 = 0.0;
    for k in 0..basis.max(1) {
        let mut lhs = 0.0;
        let mut size = 0.0;
        for p in 0..g.len() {
            let x = g.node(p);
            let (xi, dxi, lap_xi) = xi_parts(domain, x);
            let (h, dh) = harmonic_mode(k, domain.radius, x);
            let lap_zeta = h * lap_xi + 2.0 * (dxi[0] * dh[0] + dxi[1] * dh[1]);
            let a = -sol.field.values[p] * lap_zeta * g.weights[p];
            let b = if g.is_interior(p) { sol.law.value(s[p]) * xi * h * g.weights[p] } else { 0.0 };
            lhs += a + b;
            size += a.abs() + b.abs();
        }
        let normal = |sigma: &[f64]| -> f64 {
            let x = [sigma[0], sigma[1]];
            let (_, dxi, _) = xi_parts(domain, x);
            let n = domain.outward_normal(sigma);
            let (h, _) = harmonic_mode(k, domain.radius, x);
            h * (dxi[0] * n[0] + dxi[1] * n[1])
        };
        let mut rhs = -sol.boundary_data.integrate(normal);
        if let Some(nu) = &sol.interior_data {
            for a in &nu.atoms {
                let x = [a.point[0], a.point[1]];
                rhs += a.mass * xi_parts(domain, x).0 * harmonic_mode(k, domain.radius, x).0;
            }
            if let Some(d) = &nu.density {
                for p in 0..d.grid.len() {
                    let x = d.grid.node(p);
                    rhs += d.values[p] * d.grid.weights[p] * xi_parts(domain, x).0 * harmonic_mode(k, domain.radius, x).0;
                }
            }
        }
        size += rhs.abs();
        if size > 0.0 {
            worst = worst.max((lhs - rhs).abs() / size);
        }
    }
    worst
}

/// Nodes with `u > C₄(q)|x − z|^{−β} + slack·max(1, C₄(q)|x − z|^{−β})`.
pub fn keller_osserman_violations(sol: &Solution, q: f64, anchor: &[f64], slack: f64) -> Result<usize> {
    let c4 = keller_osserman_constant(q)?;
    let beta = exponents(2, q)?.beta;
    let g = sol.grid();
    Ok((0..g.len())
        .filter(|&p| {
            let r = dist2(g.node(p), anchor);
            let env = c4 * r.powf(-beta);
            r > 0.0 && sol.field.values[p] > env + slack * env.max(1.0)
        })
        .count())
}

/// `max |∇u| d^{1/(q−1)}` over interior nodes.
pub fn gradient_envelope(sol: &Solution, q: f64) -> f64 {
    let g = sol.grid();
    let d = g.distances();
    let s = sol.field.grad_norm().unwrap_or_default();
    (0..g.len()).filter(|&p| g.is_interior(p)).map(|p| s[p] * d[p].powf(1.0 / (q - 1.0))).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::green_kernel;

    fn ball() -> Domain {
        Domain::ball(2, 1.0)
    }

    fn smooth(d: &Domain) -> BoundaryMeasure {
        BoundaryMeasure::from_density(d, 64, |x| {
            let t = x[1].atan2(x[0]);
            1.0 + 0.5 * t.cos() + 0.25 * (2.0 * t).sin() + 0.1 * (3.0 * t).cos()
        })
        .unwrap()
    }

    fn polar(n_r: usize, n_t: usize) -> SolverConfig {
        SolverConfig::default().with_grid(GridSpec::polar(n_r, n_t))
    }

    #[test]
    fn laws() {
        let p = AbsorptionLaw::power(2, 1.25).unwrap();
        assert!(p.subcritical_boundary && p.subcritical_interior);
        let p = AbsorptionLaw::power(2, 1.6).unwrap();
        assert!(!p.subcritical_boundary && p.subcritical_interior);
        let c = AbsorptionLaw::custom(2, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(c.value(1.5), 2.0);
        assert_eq!(c.value(3.0), 5.0);
        assert!(c.subcritical_boundary);
        assert!(AbsorptionLaw::custom(2, vec![(0.0, 0.0), (1.0, -1.0)]).is_err());
        assert!(AbsorptionLaw::zero(2).is_zero());
        let t = AbsorptionLaw::truncated(1.5, 2.0).unwrap();
        assert_eq!(t.value(100.0), 2.0);
        let json = serde_json::to_string(&SolverConfig::default()).unwrap();
        let back: SolverConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SolverConfig::default());
        let partial: SolverConfig = serde_json::from_str(r#"{"backend": "picard", "grid": {"n_r": 32, "n_theta": 32}}"#).unwrap();
        assert_eq!(partial.backend, Backend::Picard);
    }

    #[test]
    fn linear_case_reproduces_poisson_integral() {
        let d = ball();
        let mu = smooth(&d);
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let sol = solve_dirichlet(&AbsorptionLaw::zero(2), &mu, &polar(n, 64)).unwrap();
            let exact = apply_poisson(&mu, sol.grid().clone()).unwrap();
            errs.push(sup_norm(&sol.field.values.iter().zip(&exact.values).map(|(a, b)| a - b).collect::<Vec<_>>()));
        }
        let order = (errs[1] / errs[2]).log2();
        assert!((order - 2.0).abs() < 0.3, "{errs:?}");
    }

    #[test]
    fn zero_data_gives_zero() {
        let d = ball();
        let sol = solve_dirichlet(&AbsorptionLaw::power(2, 1.25).unwrap(), &BoundaryMeasure::zero(&d), &polar(32, 32)).unwrap();
        assert!(sol.field.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn power_law_solution_is_sandwiched_and_weakly_exact() {
        let d = ball();
        let mu = smooth(&d).scaled(3.0);
        let law = AbsorptionLaw::power(2, 1.25).unwrap();
        let sol = solve_dirichlet(&law, &mu, &polar(64, 64)).unwrap();
        assert_eq!(sol.comparison_violations(1e-8), 0);
        assert!(sol.meta.weak_residual < 1e-3, "{}", sol.meta.weak_residual);
        // one Picard sweep is visibly worse
        let rough = SolverConfig { newton: false, max_iter: 1, ..polar(64, 64) };
        let err = solve_dirichlet(&law, &mu, &rough).unwrap_err();
        assert!(matches!(err, LabError::NonConvergence { .. }));
        let b = boundary_values(sol.grid(), &mu, 4, f64::INFINITY);
        let sys = System::new(sol.grid().clone(), &b, &vec![0.0; b.len()], 0.0).unwrap();
        let h = sys.linear_solve();
        let (_, s) = sys.grad_norms(&h);
        let g: Vec<f64> = s.iter().map(|&v| law.value(v)).collect();
        let one = sys.lu.solve(&sys.rhs(Some(&g)));
        let mut one_step = sol.clone();
        one_step.field.values = one.clone();
        one_step.field.grad = Some(sys.ops.gradient(&one));
        assert!(weak_residual(&one_step, 5) > 10.0 * sol.meta.weak_residual);
    }

    #[test]
    fn linear_weak_residual() {
        let d = ball();
        let mu = smooth(&d);
        let sol = solve_dirichlet(&AbsorptionLaw::zero(2), &mu, &polar(128, 64)).unwrap();
        assert!(sol.meta.weak_residual < 1e-4, "{}", sol.meta.weak_residual);
    }

    #[test]
    fn backends_agree() {
        let d = ball();
        let mu = smooth(&d);
        let law = AbsorptionLaw::power(2, 1.25).unwrap();
        let cfg = polar(24, 24);
        let a = solve_dirichlet(&law, &mu, &cfg).unwrap();
        let b = solve_dirichlet(&law, &mu, &SolverConfig { backend: Backend::Picard, tol_update: 1e-8, ..cfg.clone() }).unwrap();
        let c = solve_dirichlet(&law, &mu, &SolverConfig { newton: false, ..cfg }).unwrap();
        let dab = sup_norm(&a.field.values.iter().zip(&b.field.values).map(|(x, y)| x - y).collect::<Vec<_>>());
        let dac = sup_norm(&a.field.values.iter().zip(&c.field.values).map(|(x, y)| x - y).collect::<Vec<_>>());
        assert!(dac < 1e-7, "{dac}");
        assert!(dab < 2e-2 * a.field.max(), "{dab}");
    }

    #[test]
    fn comparison_in_the_data() {
        let d = Domain::half_disk(2, 1.0);
        let law = AbsorptionLaw::power(2, 1.25).unwrap();
        let cfg = SolverConfig::default().with_grid(GridSpec::anchor(60, 33, 0.88));
        let sols: Vec<Solution> = [0.5, 1.0, 2.0].iter().map(|&c| solve_dirichlet(&law, &BoundaryMeasure::anchor_atom(&d, c), &cfg).unwrap()).collect();
        for w in sols.windows(2) {
            assert!(w[0].field.values.iter().zip(&w[1].field.values).all(|(a, b)| *a <= b + 1e-8));
        }
        for s in &sols {
            assert_eq!(s.comparison_violations(1e-8), 0);
            assert_eq!(keller_osserman_violations(s, 1.25, &[0.0, 0.0], 1e-8).unwrap(), 0);
        }
    }

    #[test]
    fn gradient_envelope_is_stable() {
        let d = Domain::half_disk(2, 1.0);
        let law = AbsorptionLaw::power(2, 1.25).unwrap();
        let mu = BoundaryMeasure::anchor_atom(&d, 1.0);
        let a = solve_dirichlet(&law, &mu, &SolverConfig::default().with_grid(GridSpec::anchor(60, 33, 0.88))).unwrap();
        let b = solve_dirichlet(&law, &mu, &SolverConfig::default().with_grid(GridSpec::anchor(119, 65, 0.88f64.sqrt()))).unwrap();
        let (ea, eb) = (gradient_envelope(&a, 1.25), gradient_envelope(&b, 1.25));
        assert!(ea.is_finite() && (ea / eb - 1.0).abs() < 0.2, "{ea} {eb}");
    }

    #[test]
    fn interior_center_atom() {
        let d = ball();
        let nu = InteriorMeasure::atom(vec![0.0, 0.0], 1.0);
        let cfg = SolverConfig::default().with_grid(GridSpec::new(40, 32, 0.85));
        let lin = solve_interior(&AbsorptionLaw::zero(2), &d, &nu, &cfg).unwrap();
        for p in 0..lin.grid().len() {
            let x = lin.grid().node(p);
            let exact = if lin.grid().kind(p) == NodeKind::Outer { 0.0 } else { green_kernel(&d, &x, &[0.0, 0.0]).unwrap() };
            assert!((lin.field.values[p] - exact).abs() < 1e-10);
        }
        let sol = solve_interior(&AbsorptionLaw::power(2, 1.1).unwrap(), &d, &nu, &cfg).unwrap();
        for p in 0..sol.grid().len() {
            assert!(sol.field.values[p] <= lin.field.values[p] + 1e-12);
            if sol.grid().kind(p) != NodeKind::Outer {
                assert!(sol.field.values[p] > 0.0);
            }
        }
        let zero = solve_interior(&AbsorptionLaw::power(2, 1.1).unwrap(), &d, &InteriorMeasure::zero(), &cfg).unwrap();
        assert!(zero.field.values.iter().all(|v| *v == 0.0));
        assert!(solve_interior(&AbsorptionLaw::power(2, 2.5).unwrap(), &d, &nu, &cfg).is_err());
    }

    #[test]
    fn exhaustion() {
        let d = ball();
        let mu = smooth(&d);
        let deltas = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let cfg = polar(64, 64);
        let lin = solve_maximal_exhaustion(&AbsorptionLaw::zero(2), &mu, &deltas, &cfg).unwrap();
        for p in 0..lin.grid().len() {
            let x = lin.grid().node(p);
            assert!((lin.field.values[p] - poisson_integral(&mu, &x)).abs() < 1e-3);
        }
        let law = AbsorptionLaw::power(2, 1.25).unwrap();
        let max = solve_maximal_exhaustion(&law, &mu, &deltas, &cfg).unwrap();
        let direct = solve_dirichlet(&law, &mu, &cfg).unwrap();
        for x in max.grid().nodes() {
            assert!(max.field.interpolate(x).unwrap() >= direct.field.interpolate(x).unwrap() - 1e-6);
        }
        let sw = &max.meta.sweep;
        assert!(sw.windows(2).all(|w| w[1] < w[0]), "{sw:?}");
        assert!(solve_maximal_exhaustion(&law, &BoundaryMeasure::zero(&Domain::half_disk(2, 1.0)), &deltas, &cfg).is_err());
    }

    #[test]
    fn hopf_cole() {
        let d = ball();
        let e = BoundaryMeasure::from_density(&d, 32, |_| std::f64::consts::E).unwrap();
        let sol = solve_hopf_cole(&e, &polar(32, 32)).unwrap();
        assert!(sol.field.values.iter().all(|v| (v + 1.0).abs() < 1e-12));
        let mu = BoundaryMeasure::from_density(&d, 64, |x| 1.0 + 0.5 * x[1].atan2(x[0]).cos()).unwrap();
        let sol = solve_hopf_cole(&mu, &polar(64, 64)).unwrap();
        assert!(sol.meta.sweep[0] < 1e-4, "{}", sol.meta.sweep[0]);
        assert!(matches!(solve_hopf_cole(&BoundaryMeasure::from_density(&d, 32, |x| x[0].max(0.0)).unwrap(), &polar(32, 32)), Err(LabError::DensityNotBoundedBelow(_))));
    }

    #[test]
    fn q1_homogeneity() {
        let d = Domain::half_disk(2, 1.0);
        let cfg = SolverConfig::default().with_grid(GridSpec::anchor(50, 33, 0.86));
        let (_, e1) = q1_solve_and_scale(&d, &[0.0, 0.0], 1.0, &cfg).unwrap();
        assert_eq!(e1, 0.0);
        for l in [2.0, 0.5] {
            let (_, e) = q1_solve_and_scale(&d, &[0.0, 0.0], l, &cfg).unwrap();
            assert!(e < 1e-4, "{e}");
        }
    }

    #[test]
    fn supercritical_atoms_need_opt_in() {
        let d = Domain::half_disk(2, 1.0);
        let law = AbsorptionLaw::power(2, 1.6).unwrap();
        let mu = BoundaryMeasure::anchor_atom(&d, 1.0);
        let cfg = SolverConfig::default().with_grid(GridSpec::anchor(40, 25, 0.85));
        assert!(solve_dirichlet(&law, &mu, &cfg).is_err());
        let sol = solve_dirichlet(&law, &mu, &SolverConfig { allow_supercritical: true, ..cfg }).unwrap();
        assert!(sol.meta.flags.iter().any(|f| f == "supercritical"));
    }

    #[test]
    fn harmonic_modes_are_harmonic() {
        for k in 0..7 {
            let x = [0.3, -0.4];
            let h = 1e-4;
            let f = |a: f64, b: f64| harmonic_mode(k, 1.0, [a, b]).0;
            let lap = (f(x[0] + h, x[1]) + f(x[0] - h, x[1]) + f(x[0], x[1] + h) + f(x[0], x[1] - h) - 4.0 * f(x[0], x[1])) / (h * h);
            assert!(lap.abs() < 1e-5);
            let (_, g) = harmonic_mode(k, 1.0, x);
            assert!((g[0] - (f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2.0 * h)).abs() < 1e-7);
            assert!((g[1] - (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2.0 * h)).abs() < 1e-7);
        }
    }
}
