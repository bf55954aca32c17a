//! `tcspace`: JSON-in, JSON-out front end for the projection pipeline.
//!
//! Exit status: 0 when the requested property holds, 1 when it fails (the
//! report carries a witness), 2 on unusable input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tcspace::harness::{self, Fault, GeneratorKind, GeneratorSpec};
use tcspace::io::{self, IoError};
use tcspace::matching::{self, MatchingInstance};
use tcspace::projection::{self, CertifyOptions, ProjectionError};
use tcspace::transport;
use tcspace::{MetricSpace, Rational};

#[derive(Parser)]
#[command(
    name = "tcspace",
    version,
    about = "Exact norm-one projections in transportation cost spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    EuclideanRounded,
    TreeMetric,
    GraphShortestPath,
    Clustered,
}

impl From<KindArg> for GeneratorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::EuclideanRounded => GeneratorKind::EuclideanRounded,
            KindArg::TreeMetric => GeneratorKind::TreeMetric,
            KindArg::GraphShortestPath => GeneratorKind::GraphShortestPath,
            KindArg::Clustered => GeneratorKind::Clustered,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    denominator_bound: u32,
}

impl GenArgs {
    fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            kind: self.kind.into(),
            size: self.size,
            seed: self.seed,
            denominator_bound: self.denominator_bound,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the metric axioms of a space file.
    Validate {
        #[arg(long)]
        space: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Transportation cost norm of a problem, with plan and potentials.
    TcNorm {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Minimum-weight perfect matching on the paired points (all points
    /// without --pairs), by LP and by brute force.
    Match {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Laminar odd-cut dual for the paired points and its certificate.
    Dual {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Functionals, thresholds and dual of the projection; with --problem
    /// also its image.
    Project {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        /// Use this dual instead of solving for one.
        #[arg(long)]
        dual: Option<PathBuf>,
        #[arg(long)]
        problem: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Build the projection and run every exact check on it.
    Certify {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        dual: Option<PathBuf>,
        /// Seed for the random parts of the checks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random coefficient vectors and random problems to sample.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Check that every prefix of the pairs is a minimum perfect matching.
    Criterion {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Random space, optionally with a pair sequence of length n.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Also search for this many pairs.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Randomized property suite over generated instances.
    Suite {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Perturb one dual weight per trial to exercise failure reports.
        #[arg(long)]
        inject_fault: bool,
        #[command(flatten)]
        output: Output,
    },
}

enum Failure {
    /// The property under test does not hold; the value is the report.
    Property(Value),
    Input(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path) -> Result<MetricSpace, Failure> {
    Ok(io::read_space(&read(path)?)?)
}

fn load_pairs(space: &MetricSpace, path: &Path) -> Result<Vec<(usize, usize)>, Failure> {
    Ok(io::read_pairs(space, &read(path)?)?)
}

fn instance_for(
    space: &MetricSpace,
    pairs: Option<&[(usize, usize)]>,
) -> Result<MatchingInstance<Rational>, Failure> {
    let r = match pairs {
        Some(p) => MatchingInstance::from_pairs(space.clone(), p),
        None => MatchingInstance::new(space.clone(), &(0..space.len()).collect::<Vec<_>>()),
    };
    r.map_err(|e| Failure::Input(e.to_string()))
}

fn projection_failure(e: ProjectionError) -> Failure {
    match e {
        ProjectionError::NotAMinimumMatching(_)
        | ProjectionError::InvalidDual(_)
        | ProjectionError::ThresholdMismatch { .. }
        | ProjectionError::WellDefinednessViolation { .. } => {
            Failure::Property(json!({ "error": e.to_string() }))
        }
        other => Failure::Input(other.to_string()),
    }
}

fn build(
    space: &MetricSpace,
    pairs: &[(usize, usize)],
    dual: Option<&Path>,
) -> Result<tcspace::Projection, Failure> {
    let pinned = match dual {
        Some(path) => {
            let inst = instance_for(space, Some(pairs))?;
            Some(io::read_dual_str(&inst, &read(path)?)?)
        }
        None => None,
    };
    projection::build_projection(space, pairs, pinned).map_err(projection_failure)
}

fn property(ok: bool, v: Value) -> Result<Value, Failure> {
    if ok {
        Ok(v)
    } else {
        Err(Failure::Property(v))
    }
}

fn run(cmd: &Command) -> Result<Value, Failure> {
    match cmd {
        Command::Validate { space, .. } => {
            let text = read(space)?;
            match io::read_space::<Rational>(&text) {
                Ok(s) => Ok(json!({ "valid": true, "points": s.len() })),
                Err(IoError::Metric(e)) => {
                    property(false, json!({ "valid": false, "violation": e.to_string() }))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::TcNorm { space, problem, .. } => {
            let s = load_space(space)?;
            let f = io::read_problem(&s, &read(problem)?)?;
            let n = transport::tc_norm(&s, &f).map_err(|e| Failure::Input(e.to_string()))?;
            let plan: Vec<Value> = n
                .plan
                .moves
                .iter()
                .map(|m| json!({ "from": s.label(m.source), "to": s.label(m.sink), "mass": m.mass.to_string() }))
                .collect();
            let potentials: serde_json::Map<String, Value> = n
                .potentials
                .iter()
                .map(|(p, v)| (s.label(*p).to_string(), Value::String(v.to_string())))
                .collect();
            Ok(json!({ "value": n.value.to_string(), "plan": plan, "potentials": potentials }))
        }
        Command::Match { space, pairs, .. } => {
            let s = load_space(space)?;
            let p = pairs.as_deref().map(|p| load_pairs(&s, p)).transpose()?;
            let inst = instance_for(&s, p.as_deref())?;
            let err = |e: matching::MatchingError| Failure::Input(e.to_string());
            let (m, w) = matching::solve_matching_lp(&inst).map_err(err)?;
            let (_, bw) = matching::brute_force_min_matching(&inst).map_err(err)?;
            property(
                w == bw,
                json!({
                    "pairs": io::pairs_json(&s, &m.pairs)["pairs"],
                    "weight": w.to_string(),
                    "brute_force_weight": bw.to_string(),
                }),
            )
        }
        Command::Dual { space, pairs, .. } => {
            let s = load_space(space)?;
            let p = pairs.as_deref().map(|p| load_pairs(&s, p)).transpose()?;
            let inst = instance_for(&s, p.as_deref())?;
            let err = |e: matching::MatchingError| Failure::Input(e.to_string());
            let (m, _) = matching::solve_matching_lp(&inst).map_err(err)?;
            let raw = matching::solve_dual_lp(&inst).map_err(err)?;
            let lam = matching::uncross_to_laminar(&inst, &m, &raw)
                .map_err(|e| Failure::Property(json!({ "error": e.to_string() })))?;
            let rep = matching::verify_dual_certificate(&inst, &m, &lam);
            property(
                rep.is_valid(),
                json!({
                    "dual": io::dual_json(&inst, &lam),
                    "matching": io::pairs_json(&s, &m.pairs)["pairs"],
                    "certificate": { "valid": rep.is_valid(), "violations": rep.violations },
                }),
            )
        }
        Command::Project {
            space,
            pairs,
            dual,
            problem,
            ..
        } => {
            let s = load_space(space)?;
            let p = load_pairs(&s, pairs)?;
            let op = build(&s, &p, dual.as_deref())?;
            let mut out = io::projection_json(&op);
            if let Some(path) = problem {
                let f = io::read_problem(&s, &read(path)?)?;
                let e = projection::apply_projection(&op, &f)
                    .map_err(|e| Failure::Input(e.to_string()))?;
                let strs = |v: &[Rational]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>();
                out["image"] = json!({
                    "coefficients": strs(&e.coefficients),
                    "pair_coefficients": strs(&e.raw_coefficients(&op)),
                    "norm": e.l1_norm().to_string(),
                });
            }
            Ok(out)
        }
        Command::Certify {
            space,
            pairs,
            dual,
            seed,
            trials,
            ..
        } => {
            let s = load_space(space)?;
            let p = load_pairs(&s, pairs)?;
            let op = build(&s, &p, dual.as_deref())?;
            let opts = CertifyOptions {
                isometry_vectors: *trials,
                sample_problems: *trials,
                seed: *seed,
            };
            let rep = projection::certify_projection(&op, &opts)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let mut v = serde_json::to_value(&rep).expect("serializable");
            v["all_pass"] = json!(rep.all_pass());
            property(rep.all_pass(), v)
        }
        Command::Criterion { space, pairs, .. } => {
            let s = load_space(space)?;
            let p = load_pairs(&s, pairs)?;
            let c = matching::check_prefix_matching_criterion(&s, &p)
                .map_err(|e| Failure::Input(e.to_string()))?;
            property(c.passed(), serde_json::to_value(&c).expect("serializable"))
        }
        Command::Generate { gen, n, .. } => {
            let spec = gen.spec();
            let s: MetricSpace =
                harness::gen_random_metric(&spec).map_err(|e| Failure::Input(e.to_string()))?;
            let mut out = io::space_json(&s);
            if let Some(n) = n {
                let seq = harness::gen_greedy_pair_sequence(&s, *n)
                    .map_err(|e| Failure::Input(e.to_string()))?;
                match seq {
                    Some(p) => out["pairs"] = io::pairs_json(&s, &p)["pairs"].clone(),
                    None => {
                        return Err(Failure::Property(
                            json!({ "error": "no pair sequence found", "space": out }),
                        ))
                    }
                }
            }
            Ok(out)
        }
        Command::Suite {
            gen,
            trials,
            inject_fault,
            ..
        } => {
            let fault = inject_fault.then_some(Fault::PerturbDualWeight);
            let rep = harness::run_property_suite::<Rational>(&gen.spec(), *trials, fault)
                .map_err(|e| Failure::Input(e.to_string()))?;
            property(
                rep.all_pass(),
                serde_json::to_value(&rep).expect("serializable"),
            )
        }
    }
}

fn output_of(cmd: &Command) -> &Output {
    match cmd {
        Command::Validate { output, .. }
        | Command::TcNorm { output, .. }
        | Command::Match { output, .. }
        | Command::Dual { output, .. }
        | Command::Project { output, .. }
        | Command::Certify { output, .. }
        | Command::Criterion { output, .. }
        | Command::Generate { output, .. }
        | Command::Suite { output, .. } => output,
    }
}

fn render_text(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                match val {
                    Value::Object(_) | Value::Array(_) if !is_flat(val) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_text(val, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}{k}: {}\n", scalar_text(val))),
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                if is_flat(item) {
                    out.push_str(&format!("{pad}- {}\n", scalar_text(item)));
                } else {
                    out.push_str(&format!("{pad}-\n"));
                    render_text(item, indent + 1, out);
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar_text(other))),
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|i| !i.is_object() && !i.is_array()),
        Value::Object(_) => false,
        _ => true,
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

fn emit(output: &Output, v: &Value) -> Result<(), String> {
    let text = match output.format {
        Format::Json => io::to_pretty(v),
        Format::Text => {
            let mut s = String::new();
            render_text(v, 0, &mut s);
            s
        }
    };
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = output_of(&cli.command);
    let (code, value) = match run(&cli.command) {
        Ok(v) => (0, v),
        Err(Failure::Property(v)) => (1, v),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(msg) = emit(output, &value) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
