//! Experiment specs and their typed parameter blocks.

use std::path::PathBuf;

use gradabs::geometry::Domain;
use gradabs::grid::GridSpec;
use gradabs::solver::SolverConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::suites::SuiteName;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Exponents,
    Profile,
    Solve,
    Trace,
    Singularity,
    MassSweep,
    Collapse,
    Capacity,
    Suite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub target: Target,
    #[serde(default)]
    pub params: Value,
    /// Artifact directory; defaults to `<out>/<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, target: Target, params: Value) -> Self {
        Self { name: name.into(), target, params, out_dir: None, seed: 0 }
    }

    /// SHA-256 of the canonical JSON of everything but the output directory.
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "name": self.name,
            "target": self.target,
            "params": self.params,
            "seed": self.seed,
        });
        hex_digest(&serde_json::to_vec(&canonical).unwrap_or_default())
    }

    /// Parses the parameter block against the target's schema.
    pub fn validate(&self) -> CliResult<Params> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(CliError::invalid(format!("name {:?} must be non-empty [A-Za-z0-9._-]", self.name)));
        }
        let p = match self.target {
            Target::Exponents => Params::Exponents(parse(&self.params)?),
            Target::Profile => Params::Profile(parse(&self.params)?),
            Target::Solve => Params::Solve(parse(&self.params)?),
            Target::Trace => Params::Trace(parse(&self.params)?),
            Target::Singularity => Params::Singularity(parse(&self.params)?),
            Target::MassSweep => Params::MassSweep(parse(&self.params)?),
            Target::Collapse => Params::Collapse(parse(&self.params)?),
            Target::Capacity => Params::Capacity(parse(&self.params)?),
            Target::Suite => Params::Suite(parse(&self.params)?),
        };
        p.check()?;
        Ok(p)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse<T: DeserializeOwned>(v: &Value) -> CliResult<T> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| CliError::invalid(e.to_string()))
}

#[derive(Clone, Debug)]
pub enum Params {
    Exponents(ExponentsParams),
    Profile(ProfileParams),
    Solve(SolveParams),
    Trace(TraceParams),
    Singularity(SingularityParams),
    MassSweep(MassSweepParams),
    Collapse(CollapseParams),
    Capacity(CapacityParams),
    Suite(SuiteParams),
}

impl Params {
    fn check(&self) -> CliResult<()> {
        match self {
            Params::Exponents(p) => check_dq(p.dim, p.q),
            Params::Profile(p) => {
                check_dq(p.dim, p.q)?;
                check_dim_profile(p.dim)?;
                if p.nodes < 11 {
                    return Err(CliError::invalid("profile needs at least 11 nodes"));
                }
                Ok(())
            }
            Params::Solve(p) => p.check(),
            Params::Trace(p) => {
                p.solve().check()?;
                if p.bumps < 4 {
                    return Err(CliError::invalid("trace needs at least 4 bumps"));
                }
                Ok(())
            }
            Params::Singularity(p) => {
                check_dq(2, p.q)?;
                check_mass(p.mass)?;
                p.grid.check()
            }
            Params::MassSweep(p) => {
                check_dq(2, p.q)?;
                if p.q >= 1.5 {
                    return Err(CliError::invalid(format!("mass sweep needs q < 3/2 (got {})", p.q)));
                }
                if p.masses.len() < 2 || p.masses.windows(2).any(|w| !(w[1] > w[0])) || p.masses.iter().any(|m| !(*m > 0.0)) {
                    return Err(CliError::invalid("masses must be positive and strictly increasing"));
                }
                if p.ells.is_empty() || p.ells.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
                    return Err(CliError::invalid("ells must lie in (0, 1]"));
                }
                p.grid.check()
            }
            Params::Collapse(p) => {
                check_dq(2, p.q)?;
                check_mass(p.mass)?;
                if p.widths.is_empty() || p.widths.iter().any(|w| !(*w > 0.0)) {
                    return Err(CliError::invalid("widths must be positive"));
                }
                p.grid.check()
            }
            Params::Capacity(p) => {
                if !(2..=3).contains(&p.dim) {
                    return Err(CliError::invalid(format!("dimension {} not in {{2, 3}}", p.dim)));
                }
                let hi_ok = p.q < 2.0 || (p.q == 2.0 && p.family == CapacityFamily::Interior);
                if !(p.q > 1.0 && hi_ok) {
                    return Err(CliError::invalid(format!("q = {} out of range", p.q)));
                }
                Ok(())
            }
            Params::Suite(_) => Ok(()),
        }
    }
}

fn check_dq(dim: usize, q: f64) -> CliResult<()> {
    if dim < 2 {
        return Err(CliError::invalid(format!("dimension {dim} must be at least 2")));
    }
    if !(q > 1.0 && q < 2.0) {
        return Err(CliError::invalid(format!("q = {q} must lie in (1, 2)")));
    }
    Ok(())
}

fn check_dim_profile(dim: usize) -> CliResult<()> {
    if !(2..=3).contains(&dim) {
        return Err(CliError::invalid(format!("profiles are available for N ∈ {{2, 3}}, got {dim}")));
    }
    Ok(())
}

fn check_mass(m: f64) -> CliResult<()> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(CliError::invalid(format!("mass {m} must be finite and nonnegative")));
    }
    Ok(())
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsParams {
    #[serde(default = "two")]
    pub dim: usize,
    pub q: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileParams {
    #[serde(default = "two")]
    pub dim: usize,
    pub q: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    2001
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    #[default]
    Ball,
    HalfDisk,
}

impl DomainName {
    pub fn domain(self) -> Domain {
        match self {
            DomainName::Ball => Domain::ball(2, 1.0),
            DomainName::HalfDisk => Domain::half_disk(2, 1.0),
        }
    }
}

/// Grid and stopping overrides shared by every solver-backed target.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default)]
    pub n_r: Option<usize>,
    #[serde(default)]
    pub n_theta: Option<usize>,
    #[serde(default)]
    pub grading: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

impl GridParams {
    fn check(&self) -> CliResult<()> {
        if self.n_r.is_some_and(|n| n < 8) || self.n_theta.is_some_and(|n| n < 8) {
            return Err(CliError::invalid("grids need at least 8 rings and 8 angles"));
        }
        if self.grading.is_some_and(|g| !(g > 0.0 && g <= 1.0)) {
            return Err(CliError::invalid("grading must lie in (0, 1]"));
        }
        if self.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(CliError::invalid("tol must be positive"));
        }
        Ok(())
    }

    /// Polar grid on the ball, anchor-graded grid on the half-disk.
    pub fn config(&self, domain: DomainName) -> SolverConfig {
        let spec = match domain {
            DomainName::Ball => GridSpec::new(self.n_r.unwrap_or(64), self.n_theta.unwrap_or(64), self.grading.unwrap_or(1.0)),
            DomainName::HalfDisk => GridSpec::anchor(self.n_r.unwrap_or(160), self.n_theta.unwrap_or(81), self.grading.unwrap_or(0.93)),
        };
        let mut cfg = SolverConfig::default().with_grid(spec);
        if let Some(t) = self.tol {
            cfg.tol_update = t;
        }
        cfg
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataParams {
    /// Atom at the domain's singular anchor.
    Atom { mass: f64 },
    /// `scale·(1 + ½cos t + ¼sin 2t + 0.1cos 3t)` in the polar angle `t`.
    Smooth {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for DataParams {
    fn default() -> Self {
        DataParams::Smooth { scale: 1.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    #[serde(default)]
    pub domain: DomainName,
    /// Absorption exponent; absent means `g ≡ 0`.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub data: DataParams,
    #[serde(default)]
    pub grid: GridParams,
}

impl SolveParams {
    fn check(&self) -> CliResult<()> {
        if let Some(q) = self.q {
            check_dq(2, q)?;
        }
        match self.data {
            DataParams::Atom { mass } => check_mass(mass)?,
            DataParams::Smooth { scale } => check_mass(scale)?,
        }
        self.grid.check()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    #[serde(default)]
    pub domain: DomainName,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub data: DataParams,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default = "default_bumps")]
    pub bumps: usize,
}

impl TraceParams {
    pub fn solve(&self) -> SolveParams {
        SolveParams { domain: self.domain, q: self.q, data: self.data.clone(), grid: self.grid.clone() }
    }
}

fn default_bumps() -> usize {
    16
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularityParams {
    pub q: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub grid: GridParams,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSweepParams {
    pub q: f64,
    pub masses: Vec<f64>,
    #[serde(default = "default_ells")]
    pub ells: Vec<f64>,
    #[serde(default)]
    pub grid: GridParams,
}

fn default_ells() -> Vec<f64> {
    gradabs::singularity::DEFAULT_ELLS.to_vec()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseParams {
    pub q: f64,
    #[serde(default = "one")]
    pub mass: f64,
    pub widths: Vec<f64>,
    /// Extra probes drawn from the seeded generator.
    #[serde(default)]
    pub random_probes: usize,
    #[serde(default)]
    pub grid: GridParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityFamily {
    Boundary,
    Interior,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityParams {
    #[serde(default = "two")]
    pub dim: usize,
    pub q: f64,
    pub family: CapacityFamily,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteParams {
    #[serde(default)]
    pub suite: SuiteName,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn invalid_q_is_rejected() {
        let s = ExperimentSpec::new("bad", Target::Exponents, json!({"dim": 2, "q": 2.5}));
        assert!(matches!(s.validate(), Err(CliError::SpecValidation(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let s = ExperimentSpec::new("bad", Target::Solve, json!({"q": 1.3, "grid": {"nr": 4}}));
        assert!(matches!(s.validate(), Err(CliError::SpecValidation(_))));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentSpec::new("e", Target::Exponents, json!({"q": 1.25}));
        let b = ExperimentSpec { out_dir: Some("/elsewhere".into()), ..a.clone() };
        let c = ExperimentSpec { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = ExperimentSpec::new("c", Target::Collapse, json!({"q": 1.6, "widths": [0.2, 0.1]}));
        let t: ExperimentSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, t);
        assert!(matches!(t.validate().unwrap(), Params::Collapse(_)));
    }

    #[test]
    fn interior_capacity_admits_q_two() {
        let ok = ExperimentSpec::new("c", Target::Capacity, json!({"q": 2.0, "family": "interior"}));
        let bad = ExperimentSpec::new("c", Target::Capacity, json!({"q": 2.0, "family": "boundary"}));
        assert!(ok.validate().is_ok());
        assert!(bad.validate().is_err());
    }
}
