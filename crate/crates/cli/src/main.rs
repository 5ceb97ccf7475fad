use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradabs_cli::artifacts::ArtifactSet;
use gradabs_cli::spec::{hex_digest, DomainName};
use gradabs_cli::{read_specs, run_batch, run_suite, CliError, CliResult, ExperimentSpec, Registry, RunStatus, SuiteName, Target};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "gradabs", version, about = "Boundary singularities of -Δu + g(|∇u|) = 0: experiments and acceptance suites")]
struct Cli {
    /// Output root; the run registry lives in `<out>/registry`.
    #[arg(long, global = true, default_value = "gradabs-out")]
    out: PathBuf,
    /// Seed for randomized probe placement (overrides spec seeds).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid override as `n_r,n_theta`.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Solver update tolerance override.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exponents, radial and Keller-Osserman constants.
    Constants {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        q: f64,
    },
    /// Shoots the hemisphere profile and writes it as CSV.
    Profile {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 2001)]
        nodes: usize,
    },
    /// Solves the Dirichlet problem with smooth or atomic boundary data.
    Solve(SolveArgs),
    /// Solves, then classifies the boundary trace.
    Trace {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, default_value_t = 16)]
        bumps: usize,
    },
    /// Classifies the anchor singularity of an atom solution, or sweeps the atom mass.
    Singularity {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Comma-separated increasing masses; runs the saturation sweep instead.
        #[arg(long, value_delimiter = ',')]
        masses: Option<Vec<f64>>,
    },
    /// Concentrates boundary data of fixed mass towards the anchor.
    Removability {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025,0.0125")]
        widths: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        random_probes: usize,
    },
    /// Runs an acceptance suite and prints the pass/fail table.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteName::All)]
        suite: SuiteName,
    },
    /// Runs one spec or an array of specs from a JSON file.
    Run { spec: PathBuf },
}

#[derive(Debug, clap::Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value_t = DomainArg::Ball)]
    domain: DomainArg,
    /// Absorption exponent; omit for the linear problem.
    #[arg(long)]
    q: Option<f64>,
    /// Atom mass at the anchor; smooth data otherwise.
    #[arg(long)]
    atom: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum DomainArg {
    Ball,
    HalfDisk,
}

impl SolveArgs {
    fn params(&self) -> Value {
        let domain = match self.domain {
            DomainArg::Ball => DomainName::Ball,
            DomainArg::HalfDisk => DomainName::HalfDisk,
        };
        let data = match self.atom {
            Some(mass) => json!({ "kind": "atom", "mass": mass }),
            None => json!({ "kind": "smooth", "scale": self.scale }),
        };
        json!({ "domain": domain, "q": self.q, "data": data })
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected n_r,n_theta")?;
    Ok((a.trim().parse().map_err(|e| format!("n_r: {e}"))?, b.trim().parse().map_err(|e| format!("n_theta: {e}"))?))
}

fn has_grid(t: Target) -> bool {
    matches!(t, Target::Solve | Target::Trace | Target::Singularity | Target::MassSweep | Target::Collapse)
}

fn apply_globals(cli: &Cli, spec: &mut ExperimentSpec) {
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if !has_grid(spec.target) || (cli.grid.is_none() && cli.tol.is_none()) {
        return;
    }
    if spec.params.is_null() {
        spec.params = json!({});
    }
    if let Value::Object(p) = &mut spec.params {
        let grid = p.entry("grid").or_insert_with(|| json!({}));
        if let Value::Object(g) = grid {
            if let Some((n_r, n_t)) = cli.grid {
                g.insert("n_r".into(), n_r.into());
                g.insert("n_theta".into(), n_t.into());
            }
            if let Some(t) = cli.tol {
                g.insert("tol".into(), t.into());
            }
        }
    }
}

fn command_spec(cmd: &Command) -> Option<(Target, Value)> {
    Some(match cmd {
        Command::Constants { dim, q } => (Target::Exponents, json!({ "dim": dim, "q": q })),
        Command::Profile { dim, q, nodes } => (Target::Profile, json!({ "dim": dim, "q": q, "nodes": nodes })),
        Command::Solve(a) => (Target::Solve, a.params()),
        Command::Trace { solve, bumps } => {
            let mut p = solve.params();
            p["bumps"] = json!(bumps);
            (Target::Trace, p)
        }
        Command::Singularity { q, mass, masses: None } => (Target::Singularity, json!({ "q": q, "mass": mass })),
        Command::Singularity { q, masses: Some(m), .. } => (Target::MassSweep, json!({ "q": q, "masses": m })),
        Command::Removability { q, mass, widths, random_probes } => {
            (Target::Collapse, json!({ "q": q, "mass": mass, "widths": widths, "random_probes": random_probes }))
        }
        Command::Verify { .. } | Command::Run { .. } => return None,
    })
}

fn verify(cli: &Cli, suite: SuiteName) -> CliResult<bool> {
    let report = run_suite(suite);
    print!("{}", report.table());
    let name = serde_json::to_value(suite)?.as_str().unwrap_or("all").to_string();
    let mut art = ArtifactSet::new(cli.out.join(format!("verify-{name}")))?;
    art.csv("suite", &report.to_csv(), "acceptance experiments", json!({ "suite": suite, "wall_seconds": report.wall_seconds }))?;
    art.json("report", &serde_json::to_value(&report)?)?;
    Ok(report.all_passed())
}

fn execute(cli: &Cli) -> CliResult<bool> {
    let specs = match &cli.command {
        Command::Verify { suite } => return verify(cli, *suite),
        Command::Run { spec } => {
            let text = std::fs::read_to_string(spec).map_err(|e| CliError::invalid(format!("{}: {e}", spec.display())))?;
            read_specs(&text)?
        }
        cmd => {
            let (target, params) = command_spec(cmd).expect("spec-backed command");
            let mut s = ExperimentSpec::new("", target, params);
            apply_globals(cli, &mut s);
            let tag = serde_json::to_value(target)?.as_str().unwrap_or("run").to_string();
            s.name = format!("{tag}-{}", &hex_digest(&serde_json::to_vec(&(&s.params, s.seed))?)[..10]);
            vec![s]
        }
    };
    let specs: Vec<ExperimentSpec> = specs
        .into_iter()
        .map(|mut s| {
            apply_globals(cli, &mut s);
            s
        })
        .collect();
    let registry = Registry::open(cli.out.join("registry"))?;
    let mut all_ok = true;
    for rec in run_batch(&specs, &registry, &cli.out)? {
        let rec = rec?;
        let state = match &rec.status {
            RunStatus::Passed => "passed".to_string(),
            RunStatus::Failed => "failed".to_string(),
            RunStatus::Error { message } => format!("error: {message}"),
        };
        all_ok &= rec.status == RunStatus::Passed;
        println!("{} [{}] summary {} ({:.2}s)", rec.name, state, &rec.summary_hash[..16], rec.wall_seconds);
        println!("{}", serde_json::to_string_pretty(&rec.summary)?);
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("gradabs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
