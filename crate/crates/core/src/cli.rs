//! Command-line front end. Every command writes its results plus a
//! `manifest.json` into the output directory; outputs carry no timestamps,
//! so repeated runs with the same arguments are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::admissibility::{classify_admissibility, infinite_time_probe, maximal_regularity_probe, Strategy};
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::iss::{iss_gain_fit, p_infty_bridge};
use crate::lyapunov::{
    check_dissipation, check_homogeneity, default_lemma_h_schedule, default_lemma_t_grid, lemma_bounds_check,
    DiagQuadratic, HeatQuadratic, HeatRoute, IntegralHomogeneous, LyapunovFunction, SupExp,
};
use crate::mild_solution::{trajectory, trajectory_time_norm, uniform_grid, ModeWeights};
use crate::scenarios::{
    heat_profile, heat_steady_state_coefficients, reproduce, reproduce_all, ClaimOutcome, ReproduceConfig, Scenario,
    ScenarioId, ScenarioSpec,
};
use crate::signals::GridSignal;
use crate::spectral::StateVector;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ISSLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CLAIM_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "isslab", version, about = "Admissibility and ISS experiments on diagonal linear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Catalog id (scalar_toy, diagonal_minus_n, heat_dirichlet) or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: String,
    /// Number of retained modes (overrides the scenario default).
    #[arg(long)]
    pub modes: Option<usize>,
    /// Diffusion coefficient of the heat scenario.
    #[arg(long)]
    pub diffusion: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Ladder {
    /// Comma-separated geometric horizon ladder.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub horizons: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mild solution on a uniform grid.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 5.0)]
        t_final: f64,
        /// `one`, `zero`, or a path to a grid-signal JSON file.
        #[arg(long, default_value = "one")]
        input: String,
    },
    /// Input and state norms over `[0, t_final]`.
    Norms {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "2")]
        p: Exponent,
        #[arg(long, default_value = "2")]
        q: Exponent,
        #[arg(long, default_value_t = 5.0)]
        t_final: f64,
        #[arg(long, default_value = "one")]
        input: String,
    },
    /// Admissibility constant along a horizon ladder.
    Admissibility {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "2")]
        p: Exponent,
        #[arg(long, default_value = "2")]
        q: Exponent,
        #[command(flatten)]
        ladder: Ladder,
    },
    /// Maximal-regularity probe.
    Maxreg {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "2")]
        p: Exponent,
        #[command(flatten)]
        ladder: Ladder,
    },
    /// Transient constant and gain of the ISS estimate.
    Iss {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "2")]
        p: Exponent,
        #[arg(long, default_value = "2")]
        q: Exponent,
        #[command(flatten)]
        ladder: Ladder,
        /// Fit the pointwise exponential envelope instead of the integral form.
        #[arg(long)]
        pointwise: bool,
    },
    /// Lyapunov certificate by sampled dissipation.
    Lyapunov {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        construction: Option<ConstructionArg>,
        #[arg(long, default_value = "2")]
        q: Exponent,
        /// Decay weight for the `sup` construction (default: half the decay rate).
        #[arg(long)]
        lambda: Option<f64>,
        /// Homogeneity degree for the `integral` construction.
        #[arg(long, default_value_t = 1)]
        degree: u32,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Relation table over exponent pairs and a truncation ladder.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Semicolon-separated pairs such as `1,2;2,2;2,inf`.
        #[arg(long, default_value = "1,1;1,2;2,2;2,inf")]
        pairs: String,
        /// Comma-separated mode counts; defaults to the scenario alone.
        #[arg(long, value_delimiter = ',')]
        truncations: Vec<usize>,
        #[command(flatten)]
        ladder: Ladder,
    },
    /// Reproduce one registered claim, or all claims of the scenario.
    Reproduce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        claim: Option<String>,
        #[command(flatten)]
        ladder: Ladder,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionArg {
    Sup,
    Diag,
    Heat,
    HeatKernel,
    Integral,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Norms { common, .. }
            | Command::Admissibility { common, .. }
            | Command::Maxreg { common, .. }
            | Command::Iss { common, .. }
            | Command::Lyapunov { common, .. }
            | Command::Classify { common, .. }
            | Command::Reproduce { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Norms { .. } => "norms",
            Command::Admissibility { .. } => "admissibility",
            Command::Maxreg { .. } => "maxreg",
            Command::Iss { .. } => "iss",
            Command::Lyapunov { .. } => "lyapunov",
            Command::Classify { .. } => "classify",
            Command::Reproduce { .. } => "reproduce",
        }
    }

    /// Command-specific arguments for the manifest.
    fn arguments(&self) -> Value {
        match self {
            Command::Simulate { dt, t_final, input, .. } => json!({ "dt": dt, "t_final": t_final, "input": input }),
            Command::Norms { p, q, t_final, input, .. } => json!({ "p": p, "q": q, "t_final": t_final, "input": input }),
            Command::Admissibility { p, q, ladder, .. } => json!({ "p": p, "q": q, "horizons": ladder.horizons }),
            Command::Maxreg { p, ladder, .. } => json!({ "p": p, "horizons": ladder.horizons }),
            Command::Iss { p, q, ladder, pointwise, .. } => {
                json!({ "p": p, "q": q, "horizons": ladder.horizons, "pointwise": pointwise })
            }
            Command::Lyapunov { construction, q, lambda, degree, samples, .. } => json!({
                "construction": construction, "q": q, "lambda": lambda, "degree": degree, "samples": samples,
            }),
            Command::Classify { pairs, truncations, ladder, .. } => {
                json!({ "pairs": pairs, "truncations": truncations, "horizons": ladder.horizons })
            }
            Command::Reproduce { claim, ladder, .. } => json!({ "claim": claim, "horizons": ladder.horizons }),
        }
    }
}

/// Files accumulated by a command before being written.
struct Output {
    dir: PathBuf,
    files: Vec<(String, String)>,
    diagnostics: Value,
}

impl Output {
    fn new(dir: &Path) -> Self {
        Output { dir: dir.to_path_buf(), files: Vec::new(), diagnostics: json!({}) }
    }

    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    /// JSON or CSV rendering of the main result, depending on `format`.
    fn add_result<T: Serialize>(&mut self, stem: &str, format: Format, value: &T, csv: impl FnOnce() -> String) -> Result<()> {
        match format {
            Format::Json => self.add_json(format!("{stem}.json"), value),
            Format::Csv => {
                self.add(format!("{stem}.csv"), csv());
                Ok(())
            }
        }
    }

    fn write(self, command: &Command, scenario: &Scenario) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        let control = &scenario.system.control;
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command.name(),
            "config": {
                "common": command.common(),
                "arguments": command.arguments(),
            },
            "scenario": scenario.export(),
            "files": names,
            "diagnostics": {
                "growth_bound": scenario.system.generator.growth_bound(),
                "control_regularity_norm": control.regularity_norm(&scenario.system.generator),
                "results": self.diagnostics,
            },
        });
        for (name, contents) in &self.files {
            fs::write(self.dir.join(name), contents)?;
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn load_scenario(common: &Common) -> Result<Scenario> {
    let mut spec = match common.scenario.parse::<ScenarioId>() {
        Ok(id) => ScenarioSpec::catalog(id),
        Err(unknown) => {
            let path = Path::new(&common.scenario);
            if path.extension().is_some_and(|e| e == "json") || path.is_file() {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::InvalidArgument(format!("cannot read scenario file {}: {e}", path.display()))
                })?;
                ScenarioSpec::from_json(&text)?
            } else {
                return Err(unknown);
            }
        }
    };
    if common.modes.is_some() {
        spec.modes = common.modes;
    }
    if common.diffusion.is_some() {
        spec.diffusion = common.diffusion;
    }
    spec.build()
}

fn load_input(spec: &str, dim: usize, horizon: f64) -> Result<GridSignal> {
    match spec {
        "one" => GridSignal::constant(vec![1.0; dim], horizon),
        "zero" => GridSignal::zero(dim, horizon),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read input file {path}: {e}")))?;
            let u: GridSignal = serde_json::from_str(&text)?;
            if u.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: u.dim() });
            }
            Ok(u)
        }
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(Exponent, Exponent)>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::InvalidArgument(format!("exponent pair '{pair}' must read 'p,q'")));
            }
            Ok((parts[0].parse()?, parts[1].parse()?))
        })
        .collect()
}

fn exit_code(outcomes: &[ClaimOutcome]) -> i32 {
    if outcomes.iter().all(|o| o.passed) {
        EXIT_OK
    } else {
        EXIT_CLAIM_FAILED
    }
}

/// Runs a parsed command and returns the process exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    let command = &cli.command;
    let common = command.common();
    let scenario = load_scenario(common)?;
    let system = &scenario.system;
    let mut out = Output::new(&common.out);
    let mut status = EXIT_OK;
    match command {
        Command::Simulate { dt, t_final, input, .. } => {
            let u = load_input(input, system.input_dim(), *t_final)?;
            let grid = uniform_grid(*t_final, *dt)?;
            let tr = trajectory(system, &StateVector::zeros(system.modes()), &u, &grid)?;
            out.add("trajectory.csv", tr.to_csv());
            let summary = tr.summary();
            if scenario.id == ScenarioId::HeatDirichlet {
                let xi: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
                let prof = heat_profile(tr.final_state(), &xi);
                let target = StateVector::new(heat_steady_state_coefficients(system.modes()));
                let target_prof = heat_profile(&target, &xi);
                let mut csv = String::from("xi,profile,steady_state_projection\n");
                for k in 0..xi.len() {
                    csv.push_str(&format!("{},{},{}\n", xi[k], prof[k], target_prof[k]));
                }
                out.add("profile.csv", csv);
                out.diagnostics = json!({ "distance_to_steady_state": tr.final_state().sub(&target).norm() });
            }
            out.add_json("summary.json", &summary)?;
            println!("simulated {} samples to t = {}; final norm {}", summary.samples, summary.t_final, summary.final_norm);
        }
        Command::Norms { p, q, t_final, input, .. } => {
            let u = load_input(input, system.input_dim(), *t_final)?;
            let x0 = StateVector::zeros(system.modes());
            let input_norm = u.lp_norm(*p, *t_final)?;
            let state_norm = trajectory_time_norm(system, &x0, &u, *t_final, *q, ModeWeights::Identity)?;
            let final_norm = trajectory(system, &x0, &u, &[*t_final])?.final_state().norm();
            let report = json!({
                "p": p, "q": q, "t_final": t_final,
                "input_norm": input_norm, "state_norm": state_norm, "final_state_norm": final_norm,
                "ratio": state_norm / input_norm,
            });
            out.add_result("norms", common.format, &report, || {
                format!("p,q,t_final,input_norm,state_norm,final_state_norm\n{p},{q},{t_final},{input_norm},{state_norm},{final_norm}\n")
            })?;
            println!("‖u‖ = {input_norm}, ‖x‖ = {state_norm}");
        }
        Command::Admissibility { p, q, ladder, .. } => {
            let r = infinite_time_probe(system, *p, *q, &ladder.horizons, &Strategy::default_for(*p, *q), common.seed)?;
            out.add_result("admissibility", common.format, &r, || r.to_csv())?;
            println!("c({}) = {}, verdict {:?}", ladder.horizons.last().unwrap(), r.last_estimate(), r.verdict);
        }
        Command::Maxreg { p, ladder, .. } => {
            let r = maximal_regularity_probe(system, *p, &ladder.horizons, common.seed)?;
            out.add_result("maxreg", common.format, &r, || r.to_csv())?;
            println!("maximal regularity estimate {}, verdict {:?}", r.last_estimate(), r.verdict);
        }
        Command::Iss { p, q, ladder, pointwise, .. } => {
            let r = if *pointwise {
                p_infty_bridge(system, *p, &ladder.horizons, common.seed)?
            } else {
                iss_gain_fit(system, *p, *q, &ladder.horizons, common.seed)?
            };
            out.diagnostics = json!({ "datko_tail_bound": r.stability.tail_bound });
            out.add_result("iss", common.format, &r, || r.to_csv())?;
            println!("M = {}, G = {}, verdict {:?}", r.m, r.g, r.verdict);
        }
        Command::Lyapunov { construction, q, lambda, degree, samples, .. } => {
            let v = build_lyapunov(&scenario, *construction, *lambda, *degree)?;
            let cert = check_dissipation(v.as_ref(), system, *q, *samples, common.seed)?;
            let hom = check_homogeneity(v.as_ref(), system.modes(), 20, common.seed)?;
            let alpha = system.control.regularity();
            let lemma = if alpha < 1.0 && system.generator.is_stable() {
                Some(lemma_bounds_check(system, &default_lemma_h_schedule(), &default_lemma_t_grid())?)
            } else {
                None
            };
            let report = json!({ "certificate": cert, "homogeneity": hom, "smoothing_bounds": lemma });
            out.add_result("lyapunov", common.format, &report, || {
                let [a3, a4] = cert.dissipation.unwrap_or([f64::NAN, f64::NAN]);
                format!(
                    "degree,c_lo,c_hi,a3,a4,success,homogeneity_violation\n{},{},{},{a3},{a4},{},{}\n",
                    cert.degree, cert.coercivity[0], cert.coercivity[1], cert.success, hom.max_violation
                )
            })?;
            println!("dissipation {:?}, success {}", cert.dissipation, cert.success);
        }
        Command::Classify { pairs, truncations, ladder, .. } => {
            let pairs = parse_pairs(pairs)?;
            let systems = if truncations.is_empty() {
                vec![system.clone()]
            } else {
                truncations
                    .iter()
                    .map(|&n| {
                        let mut spec = scenario.spec.clone();
                        spec.modes = Some(n);
                        spec.build().map(|s| s.system)
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let table = classify_admissibility(&systems, &pairs, &ladder.horizons, common.seed)?;
            out.add_result("classify", common.format, &table, || table.to_csv())?;
            for e in &table.entries {
                println!("({}, {}): {:?}", e.p, e.q, e.label);
            }
            println!("arrow violations: {}", table.violations.len());
        }
        Command::Reproduce { claim, ladder, .. } => {
            let cfg = ReproduceConfig { seed: common.seed, horizons: ladder.horizons.clone() };
            let outcomes = match claim {
                Some(c) => vec![reproduce(&scenario, c, &cfg)?],
                None => reproduce_all(&scenario, &cfg)?,
            };
            for o in &outcomes {
                out.add_json(format!("{}.json", o.claim), o)?;
                for a in &o.artifacts {
                    out.add(format!("{}.{}", o.claim, a.name), a.contents.clone());
                }
                println!("{} {}/{}: observed {}", if o.passed { "PASS" } else { "FAIL" }, o.scenario, o.claim, o.observed);
            }
            let summary: Vec<Value> = outcomes
                .iter()
                .map(|o| json!({ "claim": o.claim, "expected": o.expected, "observed": o.observed, "passed": o.passed }))
                .collect();
            out.add_json("reproduce.json", &summary)?;
            out.diagnostics = json!({
                "claims": outcomes.len(),
                "failed": outcomes.iter().filter(|o| !o.passed).count(),
            });
            status = exit_code(&outcomes);
        }
    }
    out.write(command, &scenario)?;
    Ok(status)
}

fn build_lyapunov(
    scenario: &Scenario,
    construction: Option<ConstructionArg>,
    lambda: Option<f64>,
    degree: u32,
) -> Result<Box<dyn LyapunovFunction>> {
    let gen = &scenario.system.generator;
    let default = if scenario.id == ScenarioId::HeatDirichlet { ConstructionArg::Heat } else { ConstructionArg::Diag };
    let diffusion = || {
        scenario
            .diffusion
            .ok_or_else(|| Error::Incompatible("heat constructions need the heat_dirichlet scenario".into()))
    };
    Ok(match construction.unwrap_or(default) {
        ConstructionArg::Sup => {
            let l = lambda.unwrap_or(-gen.growth_bound() / 2.0);
            Box::new(SupExp::new(gen, l)?)
        }
        ConstructionArg::Diag => Box::new(DiagQuadratic::new(gen)),
        ConstructionArg::Heat => Box::new(HeatQuadratic::new(&scenario.system, diffusion()?, HeatRoute::Spectral)?),
        ConstructionArg::HeatKernel => Box::new(HeatQuadratic::new(&scenario.system, diffusion()?, HeatRoute::Kernel)?),
        ConstructionArg::Integral => Box::new(IntegralHomogeneous::new(gen, degree)?),
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

/// Parses the process arguments, runs the command, and maps errors to exit
/// status 2.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
