use std::path::{Path, PathBuf};
use std::process::ExitCode;

use branchflow::currents::CurrentDoc;
use branchflow::exec::{self, Execution};
use branchflow::io::{self, ExperimentLog, InstanceFile, Report, SolverOverrides};
use branchflow::local4::{self, LocalFourPointInstance};
use branchflow::perturbation;
use branchflow::solver::{self, SolverConfig};
use branchflow::svg::{self, Layer};
use branchflow::sweep::{self, SweepSpec};
use branchflow::topology;
use branchflow::{flat, rational, Boundary, Error, Point, PolyhedralChain, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Exhaustive solver and experiment lab for discrete branched optimal transport.
#[derive(Parser, Debug)]
#[command(name = "branchflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for the parallel map; 1 runs sequentially.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized commands; overrides any seed in input files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest boundary the exhaustive solver accepts.
    #[arg(long, global = true)]
    max_terminals: Option<usize>,
    /// Append every report to this JSON-lines log.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an instance file exhaustively.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        tol: TolFlags,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also draw the minimizers.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// List Steiner forest topologies on n terminals, or the feasible ones for an instance.
    EnumerateTopologies {
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        n: Option<usize>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        max_branch: Option<usize>,
        /// Print only the count.
        #[arg(long)]
        count: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flat norm of a boundary, or flat distance between two.
    FlatNorm {
        a: PathBuf,
        b: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dent the first minimizer at its distinguishing points and re-solve.
    Perturb {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: Option<u32>,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        tol: TolFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the four-point local problem.
    Local4 {
        #[arg(long, value_parser = parse_point)]
        a: Point,
        #[arg(long, value_parser = parse_point)]
        b: Point,
        #[arg(long, value_parser = parse_point)]
        c: Point,
        #[arg(long, value_parser = parse_point)]
        d: Point,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "1")]
        theta: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Smallest k passing the scalar exclusion inequalities.
    EstimateK0 {
        #[arg(long)]
        alpha: f64,
    },
    /// Render every chain found in a report.
    Plot {
        report: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
    /// Run a classification grid and write one CSV row per cell.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Default)]
struct TolFlags {
    #[arg(long)]
    value_tol: Option<f64>,
    #[arg(long)]
    distinct_tol: Option<f64>,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let coords = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad coordinate {x:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Point::new(coords).map_err(|e| e.to_string())
}

struct Ctx {
    exec: Execution,
    log: Option<PathBuf>,
    verbose: bool,
    max_terminals: Option<usize>,
    seed: Option<u64>,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit<T: Serialize>(&self, report: &Report<T>, out: Option<&Path>) -> Result<()> {
        let text = report.to_json();
        match out {
            Some(p) => {
                std::fs::write(p, text + "\n")?;
                self.note(format!("wrote {}", p.display()));
            }
            None => {
                use std::io::Write;
                match writeln!(std::io::stdout().lock(), "{text}") {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                    r => r?,
                }
            }
        }
        if let Some(path) = &self.log {
            ExperimentLog::open(path)?.append(report)?;
        }
        Ok(())
    }

    fn solver_config(&self, file: &InstanceFile, alpha: Option<f64>, tol: &TolFlags) -> Result<SolverConfig> {
        let env = SolverOverrides::from_env(|k| std::env::var(k).ok())?;
        let flags = SolverOverrides {
            value_tol: tol.value_tol,
            distinct_tol: tol.distinct_tol,
            max_terminals: self.max_terminals,
            ..Default::default()
        };
        let mut file = file.clone();
        if let Some(a) = alpha {
            file.alpha = a;
        }
        let mut cfg = file.solver_config(&flags, &env);
        cfg.execution = self.exec;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct SolveBody {
    boundary: Boundary,
    result: solver::SolveReport,
}

#[derive(Serialize)]
struct TopologyBody {
    n_terminals: usize,
    count: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    topologies: Vec<topology::SteinerTopology>,
}

#[derive(Serialize)]
struct FlatBody {
    value: f64,
    witness: flat::FlatWitness,
}

#[derive(Serialize)]
struct Local4Body {
    instance: LocalFourPointInstance,
    classification: local4::LocalClassification,
    margins: local4::ExclusionMargins,
    k0: Option<u64>,
}

fn write_svg(path: &Path, layers: &[Layer<'_>], b: Option<&Boundary>) -> Result<()> {
    std::fs::write(path, svg::render(layers, b)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be positive".into()));
        }
        exec::init_workers(n);
    }
    let ctx = Ctx {
        exec: if cli.workers == Some(1) { Execution::Sequential } else { Execution::Parallel },
        log: cli.log,
        verbose: cli.verbose,
        max_terminals: cli.max_terminals,
        seed: cli.seed,
    };
    match cli.command {
        Command::Solve { input, alpha, tol, out, svg } => {
            let file = InstanceFile::load(&input)?;
            let cfg = ctx.solver_config(&file, alpha, &tol)?;
            let b = file.boundary()?;
            let result = solver::solve(&b, &cfg)?;
            ctx.note(format!(
                "{} topologies, {} minimizer(s), best value {}",
                result.stats.topologies,
                result.minimizers.len(),
                result.best_value
            ));
            if let Some(p) = svg {
                let layers: Vec<Layer> = result
                    .minimizers
                    .iter()
                    .enumerate()
                    .map(|(i, m)| Layer { label: format!("minimizer {i}"), chain: &m.chain })
                    .collect();
                write_svg(&p, &layers, Some(&b))?;
            }
            ctx.emit(&Report::new("solve", &file, &cfg, SolveBody { boundary: b, result }), out.as_deref())
        }
        Command::EnumerateTopologies { n, input, max_branch, count, out } => {
            let (n_terminals, list, key) = match (n, input) {
                (Some(n), _) => {
                    if n < 2 {
                        return Err(Error::TooFewAtoms(n));
                    }
                    let max = ctx.max_terminals.unwrap_or(solver::DEFAULT_MAX_TERMINALS);
                    if n > max {
                        return Err(Error::TooManyTerminals { n, max });
                    }
                    let mb = max_branch.unwrap_or(n - 2);
                    (n, topology::enumerate_forests(n, mb), serde_json::json!({ "n": n }))
                }
                (None, Some(p)) => {
                    let file = InstanceFile::load(&p)?;
                    let b = file.boundary()?;
                    let max = ctx.max_terminals.unwrap_or(solver::DEFAULT_MAX_TERMINALS);
                    if b.len() > max {
                        return Err(Error::TooManyTerminals { n: b.len(), max });
                    }
                    (b.len(), topology::enumerate_feasible(&b, max_branch), serde_json::to_value(&file)?)
                }
                (None, None) => unreachable!("clap requires --n or --input"),
            };
            let body = TopologyBody {
                n_terminals,
                count: list.len(),
                topologies: if count { Vec::new() } else { list },
            };
            ctx.emit(&Report::new("enumerate-topologies", &key, &max_branch, body), out.as_deref())
        }
        Command::FlatNorm { a, b, out } => {
            let ba = io::load_boundary(&a)?;
            let diff = match &b {
                Some(p) => ba.sub(&io::load_boundary(p)?),
                None => ba,
            };
            let (value, witness) = flat::flat_norm(&diff);
            ctx.emit(&Report::new("flat-norm", &diff, &(), FlatBody { value, witness }), out.as_deref())
        }
        Command::Perturb { input, k, radii, alpha, tol, out } => {
            let file = InstanceFile::load(&input)?;
            let cfg = ctx.solver_config(&file, alpha, &tol)?;
            let defaults = file.perturbation.clone().unwrap_or_default();
            let k = match k.or(defaults.k) {
                Some(k) => k,
                None if cfg.alpha < 1.0 => {
                    let k = local4::estimate_k0(cfg.alpha) + 1;
                    u32::try_from(k).map_err(|_| Error::Config(format!("k0 + 1 = {k} is out of range; pass --k")))?
                }
                None => return Err(Error::Config("--k is required when alpha = 1".into())),
            };
            let radii = radii.or(defaults.radii).unwrap_or_else(|| vec![0.1, 0.05, 0.02]);
            let b = file.boundary()?;
            let exp = perturbation::end_to_end_uniqueness(&b, k, &radii, &cfg)?;
            if exp.below_k0 {
                eprintln!("warning: k = {k} is below k0 = {}; the uniqueness hypotheses do not hold", exp.k0);
            }
            ctx.emit(&Report::new("perturb", &file, &(&cfg, k, &radii), exp), out.as_deref())
        }
        Command::Local4 { a, b, c, d, k, alpha, theta, out, svg } => {
            let inst = LocalFourPointInstance { a, b, c, d, theta: rational::parse(&theta)?, k };
            let classification = local4::local4_solve(&inst, alpha)?;
            let margins = local4::exclusion_margins(&inst, alpha)?;
            let k0 = (alpha < 1.0).then(|| local4::estimate_k0(alpha));
            ctx.note(format!("winner {} ({}) value {}", classification.label, classification.winner_case, classification.value));
            if let Some(p) = svg {
                let (w, z) = local4::build_wz(&inst)?;
                let layers = [
                    Layer { label: format!("winner {}", classification.label), chain: &classification.chain },
                    Layer { label: "W".into(), chain: &w },
                    Layer { label: "Z".into(), chain: &z },
                ];
                write_svg(&p, &layers, Some(&inst.boundary()?))?;
            }
            let body = Local4Body { instance: inst.clone(), classification, margins, k0 };
            ctx.emit(&Report::new("local4", &inst, &alpha, body), out.as_deref())
        }
        Command::EstimateK0 { alpha } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            let k0 = local4::estimate_k0(alpha);
            ctx.emit(&Report::new("estimate-k0", &alpha, &(), serde_json::json!({ "alpha": alpha, "k0": k0 })), None)
        }
        Command::Plot { report, svg } => {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report)?)?;
            let mut chains = Vec::new();
            let mut boundary = None;
            collect_currents(&v, "", &mut chains, &mut boundary)?;
            let layers: Vec<Layer> = chains.iter().map(|(l, c)| Layer { label: l.clone(), chain: c }).collect();
            ctx.note(format!("{} chain(s)", layers.len()));
            write_svg(&svg, &layers, boundary.as_ref())
        }
        Command::Sweep { spec, out } => {
            let mut spec = SweepSpec::parse(&std::fs::read_to_string(&spec)?)?;
            if let Some(s) = ctx.seed {
                spec.seed = s;
            }
            let rows = sweep::run(&spec, ctx.exec);
            let failed = rows.iter().filter(|r| !r.ok()).count();
            ctx.note(format!("{} cell(s), {failed} failed", rows.len()));
            sweep::write_csv(&rows, std::fs::File::create(&out)?)?;
            if let Some(path) = &ctx.log {
                ExperimentLog::open(path)?.append(&Report::new("sweep", &spec, &(), &rows))?;
            }
            Ok(())
        }
    }
}

/// Every current document in a JSON tree: objects with `dim` and a nonempty
/// `segments` array are chains, the first with nonempty `atoms` is the boundary.
fn collect_currents(
    v: &serde_json::Value,
    path: &str,
    chains: &mut Vec<(String, PolyhedralChain)>,
    boundary: &mut Option<Boundary>,
) -> Result<()> {
    match v {
        serde_json::Value::Object(map) => {
            let nonempty = |k: &str| map.get(k).and_then(|x| x.as_array()).is_some_and(|a| !a.is_empty());
            if map.contains_key("dim") && (nonempty("segments") || nonempty("atoms")) {
                if let Ok(doc) = serde_json::from_value::<CurrentDoc>(v.clone()) {
                    if !doc.segments.is_empty() {
                        chains.push((path.trim_start_matches('.').to_string(), doc.to_chain()?));
                    } else if boundary.is_none() {
                        *boundary = Some(doc.to_boundary()?);
                    }
                    return Ok(());
                }
            }
            for (k, x) in map {
                collect_currents(x, &format!("{path}.{k}"), chains, boundary)?;
            }
        }
        serde_json::Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                collect_currents(x, &format!("{path}[{i}]"), chains, boundary)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
    }
}
