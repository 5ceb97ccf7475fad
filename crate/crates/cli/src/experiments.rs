//! Executes one validated parameter block and writes its artifacts.

use gradabs::geometry::Domain;
use gradabs::measure::BoundaryMeasure;
use gradabs::profile::{existence_obstruction, exponents, keller_osserman_constant, radial_constant, solve_profile, ShootingConfig};
use gradabs::singularity::{
    classify_isolated, default_probes, dirac_collapse_experiment, increasing_mass_experiment, point_capacity_zero, CapacityQuery,
};
use gradabs::solver::{gradient_envelope, keller_osserman_violations, solve_dirichlet, AbsorptionLaw, Solution};
use gradabs::trace::{classify_boundary, default_levels, partition_masses};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::artifacts::ArtifactSet;
use crate::error::CliResult;
use crate::spec::{CapacityFamily, DataParams, DomainName, Params, SolveParams};
use crate::suites;

/// Summary values plus whether the experiment's own checks passed.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Value,
    pub passed: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, passed: true }
    }
}

/// Smooth positive boundary density in the polar angle about the origin.
pub fn smooth_density(x: &[f64]) -> f64 {
    let t = x[1].atan2(x[0]);
    1.0 + 0.5 * t.cos() + 0.25 * (2.0 * t).sin() + 0.1 * (3.0 * t).cos()
}

pub fn measure_for(domain: &Domain, data: &DataParams) -> CliResult<BoundaryMeasure> {
    Ok(match *data {
        DataParams::Atom { mass } => BoundaryMeasure::anchor_atom(domain, mass),
        DataParams::Smooth { scale } => BoundaryMeasure::from_density(domain, 64, smooth_density)?.scaled(scale),
    })
}

fn law_for(q: Option<f64>) -> CliResult<AbsorptionLaw> {
    Ok(match q {
        Some(q) => AbsorptionLaw::power(2, q)?,
        None => AbsorptionLaw::zero(2),
    })
}

fn solve(p: &SolveParams) -> CliResult<(Domain, AbsorptionLaw, BoundaryMeasure, Solution)> {
    let domain = p.domain.domain();
    let law = law_for(p.q)?;
    let mu = measure_for(&domain, &p.data)?;
    let sol = solve_dirichlet(&law, &mu, &p.grid.config(p.domain))?;
    Ok((domain, law, mu, sol))
}

/// Probes in the half-disk centred at the origin, away from the flat side and the arc.
pub fn random_probes(domain: &Domain, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rho = domain.radius * rng.gen_range(0.15..0.7);
            let t = std::f64::consts::PI * rng.gen_range(0.15..0.85);
            [rho * t.cos(), rho * t.sin()]
        })
        .collect()
}

pub fn execute(params: &Params, seed: u64, art: &mut ArtifactSet) -> CliResult<Outcome> {
    match params {
        Params::Exponents(p) => {
            let e = exponents(p.dim, p.q)?;
            let lambda = radial_constant(p.dim, p.q).ok();
            let summary = json!({
                "N": p.dim,
                "q": p.q,
                "beta": e.beta,
                "q_conj": e.q_conj,
                "q_c": e.q_c,
                "lambda": e.lambda,
                "q_star": e.q_star,
                "radial_constant": lambda,
                "keller_osserman_constant": keller_osserman_constant(p.q)?,
                "profile_obstruction": existence_obstruction(p.dim, p.q)?,
            });
            art.json("exponents", &summary)?;
            Ok(Outcome::ok(summary))
        }
        Params::Profile(p) => {
            let cfg = ShootingConfig { nodes: p.nodes, ..ShootingConfig::default() };
            let out = solve_profile(p.dim, p.q, &cfg)?;
            match out.profile() {
                Some(prof) => {
                    art.csv("profile", &prof.to_csv(), "positive hemisphere profile of the separable singular solution", prof.sidecar())?;
                    Ok(Outcome::ok(json!({
                        "exists": true,
                        "a": prof.pole_height,
                        "max_omega": prof.max_omega(),
                        "residual": prof.residual,
                        "beta": prof.beta,
                    })))
                }
                None => Ok(Outcome::ok(json!({ "exists": false, "outcome": out }))),
            }
        }
        Params::Solve(p) => {
            let (domain, _, _, sol) = solve(p)?;
            let anchor = domain.singular_anchor();
            let mut summary = json!({
                "iterations": sol.meta.iterations,
                "update": sol.meta.update,
                "weak_residual": sol.meta.weak_residual,
                "max": sol.field.max(),
                "comparison_violations": sol.comparison_violations(1e-8),
                "flags": sol.meta.flags,
            });
            if let Some(q) = p.q {
                summary["ko_violations"] = json!(keller_osserman_violations(&sol, q, &anchor, 1e-8)?);
                summary["gradient_envelope"] = json!(gradient_envelope(&sol, q));
            }
            art.csv("field", &sol.field.to_csv(), "discrete solution of the boundary value problem with measure data", sol.metadata())?;
            Ok(Outcome::ok(summary))
        }
        Params::Trace(p) => {
            let sp = p.solve();
            let (domain, law, mu, sol) = solve(&sp)?;
            let report = classify_boundary(&sol.field, &law, p.bumps, &default_levels(&domain))?;
            let tests = "boundary trace from pairings on shrinking level curves and the local dichotomy";
            art.csv("pairings", &report.pairings_csv(), tests, json!({ "deltas": report.deltas }))?;
            art.csv("level_mass", &report.level_mass_csv(), tests, json!({}))?;
            art.json("trace", &report.to_json())?;
            let tv = match sp.data {
                DataParams::Smooth { .. } => Some(report.total_variation_error(&partition_masses(&report.partition, &mu))),
                DataParams::Atom { .. } => None,
            };
            Ok(Outcome::ok(json!({
                "singular": report.singular,
                "inconclusive": report.inconclusive,
                "mu": report.mu,
                "tv_error": tv,
            })))
        }
        Params::Singularity(p) => {
            let sp = SolveParams { domain: DomainName::HalfDisk, q: Some(p.q), data: DataParams::Atom { mass: p.mass }, grid: p.grid.clone() };
            let mut cfg = sp.grid.config(DomainName::HalfDisk);
            cfg.allow_supercritical = true;
            let domain = sp.domain.domain();
            let sol = solve_dirichlet(&law_for(sp.q)?, &BoundaryMeasure::anchor_atom(&domain, p.mass), &cfg)?;
            let report = classify_isolated(&sol.field, p.q, [0.0, 0.0])?;
            art.csv("sweeps", &report.sweeps_csv(), "classification of an isolated boundary singularity at the anchor", json!({ "q": p.q, "mass": p.mass }))?;
            if let Some(ss) = &report.self_similar {
                art.csv("self_similar", &ss.to_csv(), "self-similar rescaling limit against the separable profile", json!({ "q": p.q }))?;
            }
            Ok(Outcome::ok(json!({
                "verdict": report.verdict,
                "ratio_slope": report.ratio_slope,
                "sup_slope": report.sup_slope,
                "profile_distance": report.profile_distance,
                "notes": report.notes,
            })))
        }
        Params::MassSweep(p) => {
            let domain = Domain::half_disk(2, 1.0);
            let sweep = increasing_mass_experiment(&domain, p.q, &p.masses, &p.ells, &p.grid.config(DomainName::HalfDisk))?;
            let tests = "monotone saturation of atom solutions towards the strong singular solution";
            art.csv("mass_sweep", &sweep.to_csv(), tests, json!({ "q": p.q }))?;
            art.csv("self_similar", &sweep.self_similar.to_csv(), tests, json!({ "q": p.q }))?;
            Ok(Outcome::ok(json!({
                "saturation": sweep.saturation,
                "saturated": sweep.saturated(),
                "profile_distance": sweep.profile_distance,
                "ko_violations": sweep.ko_violations,
                "monotone_violations": sweep.monotone_violations,
                "gradient_envelope": sweep.gradient_envelope,
            })))
        }
        Params::Collapse(p) => {
            let domain = Domain::half_disk(2, 1.0);
            let mut probes = default_probes(&domain);
            probes.extend(random_probes(&domain, p.random_probes, seed));
            let sweep = dirac_collapse_experiment(&domain, p.q, p.mass, &p.widths, &probes, &p.grid.config(DomainName::HalfDisk))?;
            art.csv("collapse", &sweep.to_csv(), "behaviour of solutions as boundary data concentrates to a point mass", json!({ "q": p.q, "mass": p.mass }))?;
            Ok(Outcome::ok(json!({
                "probes": sweep.probes,
                "headline": sweep.headline,
                "strictly_decreasing": sweep.strictly_decreasing(),
                "last_over_first": sweep.last_over_first(),
                "decay_exponent": sweep.decay_exponent(),
                "limit": sweep.limit(),
            })))
        }
        Params::Capacity(p) => {
            let query = match p.family {
                CapacityFamily::Boundary => CapacityQuery::boundary(p.dim, p.q)?,
                CapacityFamily::Interior => CapacityQuery::interior(p.dim, p.q)?,
            };
            let v = point_capacity_zero(&query);
            Ok(Outcome::ok(json!({ "query": query, "zero": v.zero, "scaling_exponent": v.scaling_exponent })))
        }
        Params::Suite(p) => {
            let report = suites::run_suite(p.suite);
            art.csv("suite", &report.to_csv(), "acceptance experiments", json!({ "suite": p.suite, "wall_seconds": report.wall_seconds }))?;
            Ok(Outcome { summary: report.summary(), passed: report.all_passed() })
        }
    }
}
