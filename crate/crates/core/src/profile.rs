//! Exponents, explicit constants and the separable singular profile.
//!
//! The profile `ω` solves, on the upper hemisphere with axial colatitude `φ`,
//!
//! ```text
//! −Δ′ω + (β²ω² + |∇′ω|²)^{q/2} − λ ω = 0,   ω = 0 on the equator,
//! ```
//!
//! with `Δ′ω = ω″ + (N−2) cot φ ω′`. It is found by shooting from the pole with
//! `ω(0) = a`, `ω′(0) = 0` and bisecting on `a` until the first zero of `ω`
//! sits on the equator `φ = π/2`.

use crate::error::{LabError, Result};
use crate::ode::{integrate, State, Stop, Tolerance};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPack {
    pub q: f64,
    #[serde(rename = "N")]
    pub dim: usize,
    pub beta: f64,
    pub q_conj: f64,
    pub q_c: f64,
    pub lambda: f64,
    pub q_star: f64,
}

pub fn exponents(dim: usize, q: f64) -> Result<ExponentPack> {
    if dim < 2 {
        return Err(LabError::UnsupportedDimension(dim));
    }
    if !(q > 1.0 && q < 2.0) {
        return Err(LabError::QOutOfRange(q));
    }
    let n = dim as f64;
    let beta = (2.0 - q) / (q - 1.0);
    let q_conj = q / (q - 1.0);
    Ok(ExponentPack {
        q,
        dim,
        beta,
        q_conj,
        q_c: (n + 1.0) / n,
        lambda: beta * (q_conj - n),
        q_star: n / (n - 1.0),
    })
}

/// `Λ_{N,q}` of the radial singular solution `Λ|x|^{−β}`.
pub fn radial_constant(dim: usize, q: f64) -> Result<f64> {
    let ex = exponents(dim, q)?;
    let n = dim as f64;
    if q >= ex.q_star {
        return Err(LabError::ExponentOutOfRange { q, limit: ex.q_star });
    }
    let a = ((q - 1.0) / (2.0 - q)).powf(ex.q_conj);
    let b = ((2.0 - q) * (n - (n - 1.0) * q) / ((q - 1.0) * (q - 1.0))).powf(1.0 / (q - 1.0));
    Ok(a * b)
}

/// Relative residual `|−ΔU + |∇U|^q| / |ΔU|` of `U = Λ r^{−β}`, evaluated term by term.
pub fn radial_singular_residual_with(dim: usize, q: f64, lambda_const: f64, radii: &[f64]) -> Result<f64> {
    let ex = exponents(dim, q)?;
    let n = dim as f64;
    let b = ex.beta;
    let mut worst: f64 = 0.0;
    for &r in radii {
        let du = -b * lambda_const * r.powf(-b - 1.0);
        let d2u = b * (b + 1.0) * lambda_const * r.powf(-b - 2.0);
        let lap = d2u + (n - 1.0) / r * du;
        let res = -lap + du.abs().powf(q);
        worst = worst.max((res / lap).abs());
    }
    Ok(worst)
}

pub fn radial_singular_residual(dim: usize, q: f64, radii: &[f64]) -> Result<f64> {
    let l = radial_constant(dim, q)?;
    radial_singular_residual_with(dim, q, l, radii)
}

/// `C₄(q) = (q−1)^{(q−2)/(q−1)} (2−q)^{−1}`.
pub fn keller_osserman_constant(q: f64) -> Result<f64> {
    if !(q > 1.0 && q < 2.0) {
        return Err(LabError::QOutOfRange(q));
    }
    Ok((q - 1.0).powf((q - 2.0) / (q - 1.0)) / (2.0 - q))
}

/// True when `N − 1 ≥ λ_{N,q}`: multiplying the profile equation by `cos φ`
/// then rules out positive solutions.
pub fn existence_obstruction(dim: usize, q: f64) -> Result<bool> {
    let ex = exponents(dim, q)?;
    let n1 = dim as f64 - 1.0;
    Ok(n1 >= ex.lambda - 1e-12 * n1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub rtol: f64,
    /// Relative width at which the bisection on the pole height stops.
    pub bisection_rtol: f64,
    pub max_iter: usize,
    pub max_expansions: usize,
    /// Node count of the output grid (`[−π/2, π/2]` for N=2, `[0, π/2]` for N=3).
    pub nodes: usize,
    pub residual_tol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self { rtol: 1e-12, bisection_rtol: 1e-12, max_iter: 400, max_expansions: 50, nodes: 2001, residual_tol: 1e-7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    #[serde(rename = "N")]
    pub dim: usize,
    pub q: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Angle from the pole: `[−π/2, π/2]` for N=2, colatitude `[0, π/2]` for N=3.
    pub angles: Vec<f64>,
    pub omega: Vec<f64>,
    #[serde(rename = "a")]
    pub pole_height: f64,
    /// `sup |Lω| / max(1, sup ω)` from fourth-order differences on the output grid.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub bisection_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoProfile {
    pub reason: String,
    pub obstruction: bool,
    pub lambda: f64,
    pub expansions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProfileOutcome {
    Found(Profile),
    NoProfile(NoProfile),
}

impl ProfileOutcome {
    pub fn profile(&self) -> Option<&Profile> {
        match self {
            ProfileOutcome::Found(p) => Some(p),
            ProfileOutcome::NoProfile(_) => None,
        }
    }

    pub fn exists(&self) -> bool {
        matches!(self, ProfileOutcome::Found(_))
    }
}

struct ProfileOde {
    dim: usize,
    q: f64,
    beta: f64,
    lambda: f64,
}

impl ProfileOde {
    fn rhs(&self) -> impl Fn(f64, &State) -> State + '_ {
        move |phi, y| {
            let (w, dw) = (y[0], y[1]);
            let g = (self.beta * self.beta * w * w + dw * dw).powf(0.5 * self.q);
            let acc = if self.dim == 2 {
                g - self.lambda * w
            } else if phi < 1e-8 {
                (g - self.lambda * w) / (self.dim as f64 - 1.0)
            } else {
                g - self.lambda * w - (self.dim as f64 - 2.0) * dw / phi.tan()
            };
            [dw, acc]
        }
    }

    fn tol(&self, a: f64, rtol: f64) -> Tolerance {
        Tolerance { rtol, atol: 1e-15 * a.max(1e-300) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shot {
    Crossed(f64),
    Above,
}

fn shoot(ode: &ProfileOde, a: f64, phi_end: f64, cap: f64, rtol: f64) -> Shot {
    let f = ode.rhs();
    let mut h = 1e-3;
    let event = |y: &State| y[0] <= 0.0 || y[0] > cap;
    let (t, y, stop) = integrate(&f, 0.0, [a, 0.0], phi_end, ode.tol(a, rtol), &mut h, &event);
    match stop {
        Stop::Event if y[0] <= 0.0 => Shot::Crossed(t),
        _ => Shot::Above,
    }
}

/// Location of the first zero of the shot with pole height `a`, if it occurs before `φ_max`.
pub fn first_zero(dim: usize, q: f64, a: f64, phi_max: f64) -> Result<Option<f64>> {
    let ex = exponents(dim, q)?;
    let ode = ProfileOde { dim, q, beta: ex.beta, lambda: ex.lambda };
    Ok(match shoot(&ode, a, phi_max, f64::MAX, 1e-12) {
        Shot::Crossed(z) => Some(z),
        Shot::Above => None,
    })
}

fn equilibrium(ex: &ExponentPack) -> Option<f64> {
    (ex.lambda > 0.0).then(|| (ex.lambda / ex.beta.powf(ex.q)).powf(1.0 / (ex.q - 1.0)))
}

/// Pole height of the subsolution `γ₁ cos^{γ₂} φ` with `γ₂` mid-window, when the window is non-empty.
fn subsolution_height(ex: &ExponentPack) -> Option<f64> {
    let n1 = ex.dim as f64 - 1.0;
    if ex.lambda <= n1 {
        return None;
    }
    let g2 = 0.5 * (1.0 + ex.lambda / n1);
    let base = (ex.lambda - n1 * g2) / (2.0 * ex.beta.powf(ex.q));
    Some(0.5 * base.powf(1.0 / (ex.q - 1.0)))
}

/// Pole heights below this are rounding noise in the linear regime, not profiles.
const TRIVIAL_HEIGHT: f64 = 1e-20;

pub fn solve_profile(dim: usize, q: f64, cfg: &ShootingConfig) -> Result<ProfileOutcome> {
    if !(2..=3).contains(&dim) {
        return Err(LabError::UnsupportedDimension(dim));
    }
    let ex = exponents(dim, q)?;
    let obstruction = existence_obstruction(dim, q)?;
    let ode = ProfileOde { dim, q, beta: ex.beta, lambda: ex.lambda };
    let gamma_star = equilibrium(&ex);
    let cap = 1e3 * gamma_star.unwrap_or(1.0).max(1.0);

    let mut a_lo = subsolution_height(&ex).or(gamma_star.map(|g| 1e-3 * g)).unwrap_or(1e-3);
    let mut expansions = 0;
    loop {
        if let Shot::Crossed(_) = shoot(&ode, a_lo, FRAC_PI_2, cap, cfg.rtol) {
            break;
        }
        if expansions == cfg.max_expansions {
            return Ok(ProfileOutcome::NoProfile(NoProfile {
                reason: format!("no shot crossed zero before the equator after {expansions} bracket expansions"),
                obstruction,
                lambda: ex.lambda,
                expansions,
            }));
        }
        a_lo /= 10.0;
        expansions += 1;
    }
    let mut a_hi = 2.0 * gamma_star.unwrap_or(1.0);
    let mut up = 0;
    while let Shot::Crossed(_) = shoot(&ode, a_hi, FRAC_PI_2, cap.max(1e3 * a_hi), cfg.rtol) {
        a_hi *= 10.0;
        up += 1;
        if up > cfg.max_expansions {
            return Err(LabError::NonConvergence {
                iterations: up,
                update: a_hi,
                context: "upper shooting bracket".into(),
            });
        }
    }
    let bracket = (a_lo, a_hi);
    let (mut lo, mut hi) = (a_lo, a_hi);
    let mut steps = 0;
    while hi / lo - 1.0 > 1e-15 {
        if steps >= cfg.max_iter {
            return Err(LabError::NonConvergence { iterations: steps, update: hi / lo - 1.0, context: "pole-height bisection".into() });
        }
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(&ode, mid, FRAC_PI_2, cap, cfg.rtol) {
            Shot::Crossed(_) => lo = mid,
            Shot::Above => hi = mid,
        }
        steps += 1;
    }
    if hi / lo - 1.0 > cfg.bisection_rtol.max(1e-15) {
        return Err(LabError::NonConvergence { iterations: steps, update: hi / lo - 1.0, context: "pole-height bisection".into() });
    }
    let a = hi;
    if a < TRIVIAL_HEIGHT {
        return Ok(ProfileOutcome::NoProfile(NoProfile {
            reason: format!("pole-height bisection collapsed onto the trivial solution (a = {a:.1e})"),
            obstruction,
            lambda: ex.lambda,
            expansions,
        }));
    }
    let (angles, omega) = sample_profile(&ode, a, dim, cfg);
    let residual = profile_residual(&ode, &angles, &omega, a, cfg.rtol);
    if residual > cfg.residual_tol {
        return Err(LabError::NonConvergence {
            iterations: steps,
            update: residual,
            context: "profile residual above tolerance".into(),
        });
    }
    Ok(ProfileOutcome::Found(Profile {
        dim,
        q,
        beta: ex.beta,
        lambda: ex.lambda,
        angles,
        omega,
        pole_height: a,
        residual,
        bracket,
        bisection_steps: steps,
    }))
}

/// Values at `k·h`, `k = 0..=K+2`, with `h = (π/2)/K`; the two extra nodes lie past the equator.
fn half_samples(ode: &ProfileOde, a: f64, k_max: usize, rtol: f64) -> (f64, Vec<State>) {
    let h = FRAC_PI_2 / k_max as f64;
    let f = ode.rhs();
    let mut out = vec![[a, 0.0]];
    let mut y = [a, 0.0];
    let mut step = 1e-3;
    for k in 1..=k_max + 2 {
        let (_, y1, _) = integrate(&f, (k - 1) as f64 * h, y, k as f64 * h, ode.tol(a, rtol), &mut step, &|_| false);
        y = y1;
        out.push(y);
    }
    (h, out)
}

fn sample_profile(ode: &ProfileOde, a: f64, dim: usize, cfg: &ShootingConfig) -> (Vec<f64>, Vec<f64>) {
    let k_max = if dim == 2 { (cfg.nodes.max(9) - 1) / 2 } else { cfg.nodes.max(5) - 1 };
    let (h, s) = half_samples(ode, a, k_max, cfg.rtol);
    let mut w: Vec<f64> = s[..=k_max].iter().map(|y| y[0]).collect();
    // the zero has been placed on the equator to bisection accuracy
    w[k_max] = 0.0;
    if dim == 2 {
        let mut angles = Vec::with_capacity(2 * k_max + 1);
        let mut omega = Vec::with_capacity(2 * k_max + 1);
        for k in (1..=k_max).rev() {
            angles.push(-(k as f64) * h);
            omega.push(w[k]);
        }
        for (k, v) in w.iter().enumerate() {
            angles.push(k as f64 * h);
            omega.push(*v);
        }
        (angles, omega)
    } else {
        ((0..=k_max).map(|k| k as f64 * h).collect(), w)
    }
}

fn profile_residual(ode: &ProfileOde, angles: &[f64], omega: &[f64], a: f64, rtol: f64) -> f64 {
    // fourth-order differences on the half grid, with the even reflection at the pole
    let k_max = if ode.dim == 2 { (omega.len() - 1) / 2 } else { omega.len() - 1 };
    let (h, s) = half_samples(ode, a, k_max, rtol);
    let _ = angles;
    let w = |k: isize| -> f64 { s[k.unsigned_abs()][0] };
    let scale = s.iter().map(|y| y[0].abs()).fold(1.0, f64::max);
    let n = ode.dim as f64;
    let mut worst: f64 = 0.0;
    for k in 0..=k_max as isize {
        let d2 = (-w(k + 2) + 16.0 * w(k + 1) - 30.0 * w(k) + 16.0 * w(k - 1) - w(k - 2)) / (12.0 * h * h);
        let d1 = (-w(k + 2) + 8.0 * w(k + 1) - 8.0 * w(k - 1) + w(k - 2)) / (12.0 * h);
        let wk = w(k);
        let g = (ode.beta * ode.beta * wk * wk + d1 * d1).powf(0.5 * ode.q);
        let lap = if k == 0 { (n - 1.0) * d2 } else { d2 + (n - 2.0) * d1 / (k as f64 * h).tan() };
        let r = -lap + g - ode.lambda * wk;
        worst = worst.max(r.abs());
    }
    worst / scale
}

impl Profile {
    /// Cubic interpolation of `ω` at an angle from the pole (`|φ| ≤ π/2`).
    pub fn omega_at(&self, phi: f64) -> f64 {
        let phi = if self.dim == 2 { phi } else { phi.abs() };
        let lo = self.angles[0];
        let h = self.angles[1] - self.angles[0];
        let n = self.angles.len() as isize;
        let x = (phi - lo) / h;
        let i0 = (x.floor() as isize - 1).clamp(if self.dim == 2 { 0 } else { -2 }, n - 4);
        let t = x - i0 as f64;
        let w = [
            -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
            t * (t - 2.0) * (t - 3.0) / 2.0,
            -t * (t - 1.0) * (t - 3.0) / 2.0,
            t * (t - 1.0) * (t - 2.0) / 6.0,
        ];
        (0..4)
            .map(|m| {
                let idx = (i0 + m as isize).unsigned_abs();
                w[m] * self.omega[idx]
            })
            .sum()
    }

    pub fn max_omega(&self) -> f64 {
        self.omega.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("phi,omega\n");
        for (p, w) in self.angles.iter().zip(&self.omega) {
            let _ = writeln!(s, "{p},{w}");
        }
        s
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.dim,
            "q": self.q,
            "a": self.pole_height,
            "residual": self.residual,
            "beta": self.beta,
            "lambda": self.lambda,
            "bracket": [self.bracket.0, self.bracket.1],
        })
    }
}

/// `|x|^{−β} ω(σ(x))` for `x` in the closed upper half-space minus the origin.
pub fn separable_solution(profile: &Profile, x: &[f64]) -> Result<f64> {
    if x.len() != profile.dim {
        return Err(LabError::InvalidInput("point dimension does not match the profile".into()));
    }
    let r = crate::geometry::norm(x);
    if r == 0.0 {
        return Err(LabError::OriginEvaluation);
    }
    let xn = x[profile.dim - 1];
    if xn < 0.0 {
        return Err(LabError::PointOutsideDomain(x.to_vec()));
    }
    let phi = if profile.dim == 2 { x[0].atan2(xn) } else { (xn / r).clamp(-1.0, 1.0).acos() };
    if (phi.abs() - FRAC_PI_2).abs() < 1e-15 {
        return Ok(0.0);
    }
    Ok(r.powf(-profile.beta) * profile.omega_at(phi))
}

/// Hemisphere Laplace–Beltrami operator applied to `cos φ` on `nodes` grid points.
///
/// Returns the least-squares eigenvalue and the sup deviation of `−Δ′cos φ` from `(N−1) cos φ`.
pub fn eigen_check(dim: usize, nodes: usize) -> Result<(f64, f64)> {
    if !(2..=3).contains(&dim) {
        return Err(LabError::UnsupportedDimension(dim));
    }
    let n1 = dim as f64 - 1.0;
    let (lo, hi) = if dim == 2 { (-FRAC_PI_2, FRAC_PI_2) } else { (0.0, FRAC_PI_2) };
    let h = (hi - lo) / (nodes as f64 - 1.0);
    let f = |k: isize| (lo + k as f64 * h).cos();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut dev: f64 = 0.0;
    let first = if dim == 2 { 1 } else { 0 };
    for k in first..(nodes as isize - 1) {
        let phi = lo + k as f64 * h;
        let lap = if dim == 3 && k == 0 {
            2.0 * 2.0 * (f(1) - f(0)) / (h * h)
        } else {
            let d2 = (f(k + 1) - 2.0 * f(k) + f(k - 1)) / (h * h);
            let d1 = (f(k + 1) - f(k - 1)) / (2.0 * h);
            d2 + (dim as f64 - 2.0) * d1 / phi.tan()
        };
        let v = -lap;
        num += v * f(k);
        den += f(k) * f(k);
        dev = dev.max((v - n1 * f(k)).abs());
    }
    let _ = PI;
    Ok((num / den, dev))
}
