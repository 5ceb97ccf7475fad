//! Predefined acceptance experiments grouped into suites.

use std::time::Instant;

use gradabs::geometry::Domain;
use gradabs::grid::{GridField, GridSpec};
use gradabs::kernels::apply_poisson;
use gradabs::measure::BoundaryMeasure;
use gradabs::profile::{eigen_check, exponents, radial_constant, radial_singular_residual, separable_solution, solve_profile, ShootingConfig};
use gradabs::singularity::{
    classify_isolated, default_probes, dirac_collapse_experiment, increasing_mass_experiment, point_capacity_zero, CapacityQuery, Verdict,
    DEFAULT_ELLS,
};
use gradabs::solver::{
    build_grid, gradient_envelope, keller_osserman_violations, q1_solve_and_scale, solve_dirichlet, solve_hopf_cole, AbsorptionLaw, Solution,
    SolverConfig,
};
use gradabs::trace::{boundary_point, classify_boundary, default_levels, partition_masses, perimeter};
use gradabs::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::experiments::smooth_density;

pub const CONSTANT_TOL: f64 = 1e-12;
pub const RADIAL_RESIDUAL_TOL: f64 = 1e-8;
pub const EIGEN_TOL: f64 = 1e-6;
pub const CRITICAL_EXPONENT_TOL: f64 = 0.02;
pub const ORDER_TARGET: f64 = 2.0;
pub const ORDER_TOL: f64 = 0.3;
pub const LINEAR_FINEST_TOL: f64 = 1e-6;
pub const MASS_TOL: f64 = 0.05;
pub const PROFILE_TOL: f64 = 0.05;
pub const KO_SLACK: f64 = 1e-8;
/// Largest relative change of `max |∇u| d^{1/(q−1)}` under one refinement.
pub const ENVELOPE_DRIFT: f64 = 0.1;
pub const COLLAPSE_RATIO: f64 = 0.25;
pub const HOPF_COLE_TOL: f64 = 1e-5;
pub const HOMOGENEITY_TOL: f64 = 1e-4;
pub const CAPACITY_TOL: f64 = 1e-9;
pub const TRACE_TV_TOL: f64 = 0.02;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Constants,
    Profiles,
    Solver,
    Trace,
    Singularity,
    Removability,
    #[default]
    All,
}

impl SuiteName {
    pub fn criteria(self) -> Vec<u8> {
        match self {
            SuiteName::Constants => vec![1, 2, 11],
            SuiteName::Profiles => vec![3, 4],
            SuiteName::Solver => vec![5, 10],
            SuiteName::Singularity => vec![6, 7, 8],
            SuiteName::Removability => vec![9],
            SuiteName::Trace => vec![12],
            SuiteName::All => (1..=12).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub measured: String,
    pub requirement: String,
    pub seconds: f64,
    pub limit_seconds: Option<f64>,
    pub values: Value,
}

impl Row {
    pub fn line(&self) -> String {
        let limit = self.limit_seconds.map(|l| format!(" / {l:.0}s")).unwrap_or_default();
        format!(
            "criterion {:>2} {} {}: {} [need {}] ({:.1}s{limit})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.measured,
            self.requirement,
            self.seconds
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: SuiteName,
    pub rows: Vec<Row>,
    pub wall_seconds: f64,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn table(&self) -> String {
        let mut s: String = self.rows.iter().map(|r| r.line() + "\n").collect();
        let passed = self.rows.iter().filter(|r| r.passed).count();
        s.push_str(&format!("{passed}/{} passed, wall time {:.1}s\n", self.rows.len(), self.wall_seconds));
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("criterion,title,passed,measured,requirement,seconds\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},\"{}\",\"{}\",{:.3}\n", r.id, r.title, r.passed, r.measured, r.requirement, r.seconds));
        }
        s
    }

    /// Timing-free view, stable across identical runs.
    pub fn summary(&self) -> Value {
        let rows: Vec<Value> = self.rows.iter().map(|r| json!({ "id": r.id, "passed": r.passed, "values": r.values })).collect();
        json!({ "suite": self.name, "rows": rows, "all_passed": self.all_passed() })
    }
}

struct Check {
    passed: bool,
    measured: String,
    requirement: String,
    values: Value,
}

/// Coarse and refined envelope measurements gathered by criteria 6 and 7.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeCheck {
    pub label: String,
    pub ko_violations: usize,
    pub envelope: f64,
    pub envelope_refined: f64,
}

impl EnvelopeCheck {
    pub fn drift(&self) -> f64 {
        (self.envelope_refined / self.envelope - 1.0).abs()
    }
}

fn timed(id: u8, title: &'static str, limit: Option<f64>, f: impl FnOnce() -> Result<Check>) -> Row {
    let clock = Instant::now();
    let out = f();
    let seconds = clock.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| seconds <= l);
    match out {
        Ok(c) => Row {
            id,
            title,
            passed: c.passed && in_time,
            measured: c.measured,
            requirement: c.requirement,
            seconds,
            limit_seconds: limit,
            values: c.values,
        },
        Err(e) => Row {
            id,
            title,
            passed: false,
            measured: format!("error: {e}"),
            requirement: String::new(),
            seconds,
            limit_seconds: limit,
            values: json!({ "error": e.to_string() }),
        },
    }
}

pub fn run_suite(name: SuiteName) -> SuiteReport {
    let clock = Instant::now();
    let mut envelopes = Vec::new();
    let rows = name
        .criteria()
        .into_iter()
        .map(|id| match id {
            1 => timed(1, "constants", Some(1.0), constants),
            2 => timed(2, "eigen-check", Some(1.0), eigen),
            3 => timed(3, "critical exponent by shooting", Some(30.0), critical_exponent),
            4 => timed(4, "obstruction equivalence", Some(120.0), obstruction_equivalence),
            5 => timed(5, "linear reproduction", Some(60.0), linear_reproduction),
            6 => timed(6, "weak singularity", Some(120.0), || weak_singularity(&mut envelopes)),
            7 => timed(7, "strong singularity", Some(300.0), || strong_singularity(&mut envelopes)),
            8 => timed(8, "Keller-Osserman envelopes", None, || envelope_row(&envelopes)),
            9 => timed(9, "removability across q_c", Some(300.0), removability),
            10 => timed(10, "extreme cases", Some(120.0), extreme_cases),
            11 => timed(11, "capacity consistency", Some(1.0), capacity),
            _ => timed(12, "trace machinery", Some(180.0), trace_machinery),
        })
        .collect();
    SuiteReport { name, rows, wall_seconds: clock.elapsed().as_secs_f64() }
}

fn half_disk() -> Domain {
    Domain::half_disk(2, 1.0)
}

/// Same innermost radius, `factor` times the rings and angles.
pub fn refined(spec: &GridSpec, factor: f64) -> GridSpec {
    let n_r = ((spec.n_r - 1) as f64 * factor).round() as usize + 1;
    let mut n_theta = ((spec.n_theta - 1) as f64 * factor).round() as usize + 1;
    if spec.n_theta % 2 == 1 && n_theta % 2 == 0 {
        n_theta += 1;
    }
    let grading = spec.grading.powf((spec.n_r - 1) as f64 / (n_r - 1) as f64);
    GridSpec { n_r, n_theta, grading, layout: spec.layout }
}

fn sup_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

fn monotone_violations(lo: &Solution, hi: &Solution) -> usize {
    let (a, b) = (&lo.field.values, &hi.field.values);
    (0..a.len()).filter(|&k| b[k] < a[k] - KO_SLACK * a[k].abs().max(1.0)).count()
}

fn constants() -> Result<Check> {
    let lambda = radial_constant(2, 1.25)?;
    let pairs = [(2, 1.25), (2, 1.4), (2, 1.7), (3, 1.2), (3, 1.4)];
    let radii = [0.05, 0.2, 1.0, 3.0, 10.0];
    let residuals = pairs.iter().map(|&(n, q)| radial_singular_residual(n, q, &radii)).collect::<Result<Vec<_>>>()?;
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(Check {
        passed: (lambda - 27.0).abs() < CONSTANT_TOL && worst < RADIAL_RESIDUAL_TOL,
        measured: format!("Λ(2, 1.25) = {lambda:.15}, worst radial residual {worst:.1e}"),
        requirement: format!("|Λ − 27| < {CONSTANT_TOL:.0e}, residual < {RADIAL_RESIDUAL_TOL:.0e}"),
        values: json!({ "lambda": lambda, "pairs": pairs, "residuals": residuals }),
    })
}

fn eigen() -> Result<Check> {
    let (lambda, dev) = eigen_check(2, 2000)?;
    Ok(Check {
        passed: (lambda - 1.0).abs() < EIGEN_TOL && dev < EIGEN_TOL,
        measured: format!("λ₁ = {lambda:.9}, sup deviation {dev:.1e}"),
        requirement: format!("|λ₁ − 1| and deviation < {EIGEN_TOL:.0e}"),
        values: json!({ "lambda": lambda, "deviation": dev }),
    })
}

fn profile_exists(dim: usize, q: f64) -> Result<bool> {
    Ok(solve_profile(dim, q, &ShootingConfig::default())?.exists())
}

fn critical_exponent() -> Result<Check> {
    let yes = [1.2, 1.3, 1.4, 1.45];
    let no = [1.5, 1.55, 1.6];
    let table = yes.iter().chain(&no).map(|&q| profile_exists(2, q).map(|e| (q, e))).collect::<Result<Vec<_>>>()?;
    let table_ok = table.iter().all(|&(q, e)| e == yes.contains(&q));
    let (mut lo, mut hi) = (1.2, 1.6);
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if profile_exists(2, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let estimate = 0.5 * (lo + hi);
    Ok(Check {
        passed: table_ok && (estimate - 1.5).abs() <= CRITICAL_EXPONENT_TOL,
        measured: format!("table {}, bisection q_c ≈ {estimate:.4}", if table_ok { "matches" } else { "mismatch" }),
        requirement: format!("profiles exactly below 1.5, |q_c − 1.5| ≤ {CRITICAL_EXPONENT_TOL}"),
        values: json!({ "table": table, "estimate": estimate, "bracket": [lo, hi] }),
    })
}

fn obstruction_equivalence() -> Result<Check> {
    let mut cases = Vec::new();
    for dim in [2usize, 3] {
        let q_c = exponents(dim, 1.5)?.q_c;
        cases.extend((1..=19).map(|k| (dim, 1.0 + 0.05 * k as f64)));
        cases.extend([(dim, q_c - 0.01), (dim, q_c + 0.01)]);
    }
    let rows = cases
        .par_iter()
        .map(|&(dim, q)| Ok((dim, q, gradabs::profile::existence_obstruction(dim, q)?, profile_exists(dim, q)?)))
        .collect::<Result<Vec<_>>>()?;
    let mismatches: Vec<_> = rows.iter().filter(|r| r.2 == r.3).map(|r| (r.0, r.1)).collect();
    Ok(Check {
        passed: mismatches.is_empty(),
        measured: format!("{} of {} (N, q) cases disagree", mismatches.len(), rows.len()),
        requirement: "obstruction ⇔ no profile on every case".into(),
        values: json!({ "cases": rows, "mismatches": mismatches }),
    })
}

fn linear_reproduction() -> Result<Check> {
    let d = Domain::ball(2, 1.0);
    let mu = BoundaryMeasure::from_density(&d, 64, smooth_density)?;
    let errs = [32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let sol = solve_dirichlet(&AbsorptionLaw::zero(2), &mu, &SolverConfig::default().with_grid(GridSpec::polar(n, 128)))?;
            let exact = apply_poisson(&mu, sol.grid().clone())?;
            Ok(sup_abs(sol.field.values.iter().zip(&exact.values).map(|(a, b)| a - b)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let finest = errs[3];
    Ok(Check {
        passed: orders.iter().all(|o| (o - ORDER_TARGET).abs() <= ORDER_TOL) && finest < LINEAR_FINEST_TOL,
        measured: format!("orders {:.2?}, finest error {finest:.2e}", orders),
        requirement: format!("orders {ORDER_TARGET} ± {ORDER_TOL}, finest < {LINEAR_FINEST_TOL:.0e}"),
        values: json!({ "errors": errs, "orders": orders }),
    })
}

fn weak_singularity(envelopes: &mut Vec<EnvelopeCheck>) -> Result<Check> {
    let q = 1.25;
    let d = half_disk();
    let law = AbsorptionLaw::power(2, q)?;
    let spec = GridSpec::anchor(160, 81, 0.93);
    let cfg = SolverConfig::default().with_grid(spec.clone());
    let masses = [0.5, 1.0, 2.0];
    let sols = masses.par_iter().map(|&m| solve_dirichlet(&law, &BoundaryMeasure::anchor_atom(&d, m), &cfg)).collect::<Result<Vec<_>>>()?;
    let mut limits = Vec::new();
    for (sol, m) in sols.iter().zip(masses) {
        let c = match classify_isolated(&sol.field, q, [0.0, 0.0])?.verdict {
            Verdict::Weak(c) => Some(c),
            _ => None,
        };
        limits.push((m, c));
        envelopes.push(EnvelopeCheck {
            label: format!("Power({q}) atom {m}"),
            ko_violations: keller_osserman_violations(sol, q, &[0.0, 0.0], KO_SLACK)?,
            envelope: gradient_envelope(sol, q),
            envelope_refined: f64::NAN,
        });
    }
    let fine = solve_dirichlet(&law, &BoundaryMeasure::anchor_atom(&d, 1.0), &SolverConfig::default().with_grid(refined(&spec, 1.5)))?;
    let at_one = envelopes.len() - 2;
    envelopes[at_one].envelope_refined = gradient_envelope(&fine, q);
    envelopes[at_one].ko_violations += keller_osserman_violations(&fine, q, &[0.0, 0.0], KO_SLACK)?;
    let monotone: usize = sols.windows(2).map(|w| monotone_violations(&w[0], &w[1])).sum();
    let worst = limits.iter().map(|(m, c)| c.map_or(f64::INFINITY, |c| (c / m - 1.0).abs())).fold(0.0, f64::max);
    let shown: Vec<String> = limits.iter().map(|(m, c)| format!("{m}→{}", c.map_or("none".into(), |c| format!("{c:.4}")))).collect();
    Ok(Check {
        passed: worst < MASS_TOL && monotone == 0,
        measured: format!("lim u/P: {}, worst relative error {:.2}%, monotone violations {monotone}", shown.join(", "), 100.0 * worst),
        requirement: format!("within {:.0}% of the mass, monotone in c", 100.0 * MASS_TOL),
        values: json!({ "limits": limits, "monotone_violations": monotone }),
    })
}

fn strong_singularity(envelopes: &mut Vec<EnvelopeCheck>) -> Result<Check> {
    let q = 1.3;
    let d = half_disk();
    let spec = GridSpec::anchor(200, 81, 0.93);
    let masses = [1e2, 1e4, 1e6, 1e8, 1e10, 1e12];
    let sweep = increasing_mass_experiment(&d, q, &masses, &DEFAULT_ELLS, &SolverConfig::default().with_grid(spec.clone()))?;
    for (k, m) in masses.iter().enumerate() {
        envelopes.push(EnvelopeCheck {
            label: format!("Power({q}) atom {m:e}"),
            ko_violations: sweep.ko_violations[k],
            envelope: sweep.gradient_envelope[k],
            envelope_refined: f64::NAN,
        });
    }
    let law = AbsorptionLaw::power(2, q)?;
    let top = *masses.last().unwrap_or(&1.0);
    let fine = solve_dirichlet(&law, &BoundaryMeasure::anchor_atom(&d, top), &SolverConfig::default().with_grid(refined(&spec, 1.4)))?;
    if let Some(e) = envelopes.last_mut() {
        e.envelope_refined = gradient_envelope(&fine, q);
        e.ko_violations += keller_osserman_violations(&fine, q, &[0.0, 0.0], KO_SLACK)?;
    }
    let monotone: usize = sweep.monotone_violations.iter().sum();
    let sat = sweep.saturation.last().copied().unwrap_or(f64::NAN);
    Ok(Check {
        passed: sweep.saturated() && sweep.profile_distance < PROFILE_TOL && monotone == 0,
        measured: format!(
            "saturation {sat:.1e} at c = {top:e}, profile distance {:.2}% at ℓ = {}, monotone violations {monotone}",
            100.0 * sweep.profile_distance,
            DEFAULT_ELLS[DEFAULT_ELLS.len() - 1]
        ),
        requirement: format!("saturated, sup distance < {:.0}%", 100.0 * PROFILE_TOL),
        values: json!({
            "masses": masses,
            "saturation": sweep.saturation,
            "profile_distance": sweep.profile_distance,
            "distances": (0..DEFAULT_ELLS.len()).map(|k| sweep.self_similar.distance_at(k, &solve_profile(2, q, &ShootingConfig::default()).ok().and_then(|o| o.profile().cloned()).expect("profile exists below q_c"))).collect::<Vec<_>>(),
        }),
    })
}

fn envelope_row(envelopes: &[EnvelopeCheck]) -> Result<Check> {
    let ko: usize = envelopes.iter().map(|e| e.ko_violations).sum();
    let refined: Vec<&EnvelopeCheck> = envelopes.iter().filter(|e| e.envelope_refined.is_finite()).collect();
    let drift = refined.iter().map(|e| e.drift()).fold(0.0, f64::max);
    let finite = envelopes.iter().all(|e| e.envelope.is_finite());
    Ok(Check {
        passed: refined.len() >= 2 && ko == 0 && finite && drift < ENVELOPE_DRIFT,
        measured: format!("{ko} nodes above C₄|x|^(−β) over {} solves, gradient envelope drift {:.2}% under refinement", envelopes.len(), 100.0 * drift),
        requirement: format!("0 violations beyond {KO_SLACK:.0e} slack, drift < {:.0}%", 100.0 * ENVELOPE_DRIFT),
        values: json!({ "checks": envelopes }),
    })
}

fn removability() -> Result<Check> {
    let d = half_disk();
    let cfg = SolverConfig::default().with_grid(GridSpec::anchor(200, 81, 0.93));
    let widths = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let probes = default_probes(&d);
    let (sup, ctl) = rayon::join(
        || dirac_collapse_experiment(&d, 1.6, 1.0, &widths, &probes, &cfg),
        || dirac_collapse_experiment(&d, 1.3, 1.0, &widths, &probes, &cfg),
    );
    let (sup, ctl) = (sup?, ctl?);
    let ratio = sup.last_over_first();
    Ok(Check {
        passed: sup.strictly_decreasing() && ratio < COLLAPSE_RATIO && ctl.converges_to_positive(),
        measured: format!(
            "q = 1.6 headline {:.4?} ({}decreasing, last/first {ratio:.3}, rate w^{:.2}); q = 1.3 control {:.4?} → {:.4}",
            sup.headline,
            if sup.strictly_decreasing() { "" } else { "not " },
            sup.decay_exponent(),
            ctl.headline,
            ctl.limit()
        ),
        requirement: format!("strictly decreasing, last/first < {COLLAPSE_RATIO}, control limit > 0"),
        values: json!({ "widths": widths, "supercritical": sup, "control": ctl, "control_converges": ctl.converges_to_positive() }),
    })
}

fn extreme_cases() -> Result<Check> {
    let ball = Domain::ball(2, 1.0);
    let mu = BoundaryMeasure::from_density(&ball, 64, |x| 1.0 + 0.5 * x[1].atan2(x[0]).cos())?;
    let hc = solve_hopf_cole(&mu, &SolverConfig::default().with_grid(GridSpec::polar(256, 128)))?;
    let hc_err = hc.meta.sweep[0];
    let cfg = SolverConfig::default().with_grid(GridSpec::anchor(50, 33, 0.86));
    let q1 = [2.0, 0.5].iter().map(|&l| Ok(q1_solve_and_scale(&half_disk(), &[0.0, 0.0], l, &cfg)?.1)).collect::<Result<Vec<f64>>>()?;
    let q1_err = q1.iter().cloned().fold(0.0, f64::max);
    Ok(Check {
        passed: hc_err < HOPF_COLE_TOL && q1_err < HOMOGENEITY_TOL,
        measured: format!("Hopf-Cole sup error {hc_err:.2e}, q = 1 homogeneity error {q1_err:.2e}"),
        requirement: format!("< {HOPF_COLE_TOL:.0e} and < {HOMOGENEITY_TOL:.0e}"),
        values: json!({ "hopf_cole": hc_err, "homogeneity": q1 }),
    })
}

/// Bisects the zero-capacity verdict in `q`; returns the transition and the
/// verdicts at the expected exponent and just below it.
fn capacity_transition(expected: f64, hi: f64, zero: impl Fn(f64) -> Result<bool>) -> Result<(f64, bool, bool)> {
    let (mut lo, mut hi) = (1.0 + 1e-9, hi);
    if zero(lo)? || !zero(hi)? {
        return Ok((f64::NAN, false, false));
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if zero(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, zero(expected)?, !zero(expected * (1.0 - CAPACITY_TOL))?))
}

fn capacity() -> Result<Check> {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for dim in [2usize, 3] {
        let e = exponents(dim, 1.5)?;
        let b = capacity_transition(e.q_c, 2.0 - 1e-9, |q| Ok(point_capacity_zero(&CapacityQuery::boundary(dim, q)?).zero))?;
        let i = capacity_transition(e.q_star, 2.0, |q| Ok(point_capacity_zero(&CapacityQuery::interior(dim, q)?).zero))?;
        for (family, expected, (t, at, below)) in [("boundary", e.q_c, b), ("interior", e.q_star, i)] {
            let gap = (t - expected).abs();
            worst = worst.max(if gap.is_nan() { f64::INFINITY } else { gap });
            exact &= at && below;
            rows.push(json!({ "N": dim, "family": family, "expected": expected, "transition": t, "zero_at": at, "positive_below": below }));
        }
    }
    Ok(Check {
        passed: exact && worst < CAPACITY_TOL,
        measured: format!("worst transition offset {worst:.1e}, verdict flips at the threshold: {exact}"),
        requirement: format!("transition at q_c (boundary) and q* (interior) within {CAPACITY_TOL:.0e}, N ∈ {{2, 3}}"),
        values: json!({ "rows": rows }),
    })
}

/// `∫φ_k u ds` along the boundary by the midpoint rule.
fn boundary_masses(d: &Domain, report: &gradabs::trace::TraceReport, u: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let n = 200_000;
    let len = perimeter(d);
    let ds = len / n as f64;
    let vals: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) * ds;
            (s, u(boundary_point(d, s)))
        })
        .collect();
    (0..report.partition.len()).map(|k| vals.iter().map(|&(s, v)| report.partition.bump(k, s) * v * ds).sum()).collect()
}

fn trace_machinery() -> Result<Check> {
    let ball = Domain::ball(2, 1.0);
    let mu = BoundaryMeasure::from_density(&ball, 64, smooth_density)?;
    let zero = AbsorptionLaw::zero(2);
    let sol = solve_dirichlet(&zero, &mu, &SolverConfig::default().with_grid(GridSpec::polar(128, 128)))?;
    let smooth = classify_boundary(&sol.field, &zero, 16, &default_levels(&ball))?;
    let tv = smooth.total_variation_error(&partition_masses(&smooth.partition, &mu));

    let q = 1.3;
    let d = half_disk();
    let profile = solve_profile(2, q, &ShootingConfig::default())?
        .profile()
        .cloned()
        .ok_or_else(|| gradabs::LabError::InvalidInput("no profile at q = 1.3".into()))?;
    let grid = build_grid(&d, &GridSpec::anchor(200, 81, 0.93))?;
    let field = GridField::from_fn(grid, |x| separable_solution(&profile, &x).unwrap_or(0.0));
    let strong = classify_boundary(&field, &AbsorptionLaw::power(2, q)?, 16, &default_levels(&d))?;
    let exact = boundary_masses(&d, &strong, |x| separable_solution(&profile, &x).unwrap_or(0.0));
    let strong_tv = strong.total_variation_error(&exact);
    let only_anchor = strong.singular.len() == 1 && strong.singular[0].iter().all(|c| c.abs() < 1e-12);
    let h = strong.partition.half_width;
    let flat = |s: f64| s + h <= d.radius || s - h >= perimeter(&d) - d.radius;
    let flat_mu = sup_abs(strong.partition.centers.iter().zip(&strong.mu).filter(|(s, _)| flat(**s)).filter_map(|(_, m)| *m));
    let scale = sup_abs(strong.mu.iter().flatten().copied());
    Ok(Check {
        passed: tv < TRACE_TV_TOL && smooth.singular.is_empty() && only_anchor && strong_tv < TRACE_TV_TOL && flat_mu < TRACE_TV_TOL * scale,
        measured: format!(
            "smooth: TV {:.2}%, {} singular; separable: singular {:?}, TV {:.2}%, flat-side |μ| ≤ {:.1e} (largest bump {:.2})",
            100.0 * tv,
            smooth.singular.len(),
            strong.singular,
            100.0 * strong_tv,
            flat_mu,
            scale
        ),
        requirement: format!("TV < {:.0}%, 𝒮 = ∅ and 𝒮 = {{anchor}}, μ = 0 on the flat side", 100.0 * TRACE_TV_TOL),
        values: json!({
            "smooth": { "tv": tv, "singular": smooth.singular, "inconclusive": smooth.inconclusive },
            "separable": { "tv": strong_tv, "singular": strong.singular, "inconclusive": strong.inconclusive, "mu": strong.mu, "exact": exact, "flat_max": flat_mu },
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refinement_keeps_the_inner_radius() {
        let s = GridSpec::anchor(200, 81, 0.93);
        let r = refined(&s, 1.4);
        assert_eq!(r.n_theta % 2, 1);
        let rho = |g: &GridSpec| g.grading.powi(g.n_r as i32 - 1);
        assert!((rho(&r) / rho(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suites_cover_every_criterion_once() {
        let mut ids: Vec<u8> = [
            SuiteName::Constants,
            SuiteName::Profiles,
            SuiteName::Solver,
            SuiteName::Trace,
            SuiteName::Singularity,
            SuiteName::Removability,
        ]
        .iter()
        .flat_map(|s| s.criteria())
        .collect();
        ids.sort();
        assert_eq!(ids, SuiteName::All.criteria());
    }

    #[test]
    fn capacity_rows_pass() {
        let c = capacity().unwrap();
        assert!(c.passed, "{}", c.measured);
    }
}
