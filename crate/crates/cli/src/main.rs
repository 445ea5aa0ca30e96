use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oscgeo::conditions::Verdict;
use oscgeo::osclab::DecayMode;
use oscgeo_cli::execute::default_tolerances;
use oscgeo_cli::objects::parse_object;
use oscgeo_cli::report::to_json;
use oscgeo_cli::scenario::*;
use oscgeo_cli::{run_scenario, run_single, write_single, EXIT_ERROR, EXIT_MISMATCH, EXIT_OK};

#[derive(Parser)]
#[command(name = "oscgeo", version, about = "Geometry of oscillatory integral operators: verifiers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        /// Override the scenario's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Christoffel symbols, Riemann and Ricci tensors at a point.
    Curvature {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,0")]
        point: Vec<f64>,
    },
    /// Shoot to a target, or integrate from a direction.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,0")]
        point: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Taylor data of the Jacobi system along a geodesic.
    JacobiTaylor {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,0")]
        point: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,1")]
        direction: Vec<f64>,
        #[arg(long)]
        epsilon: f64,
    },
    /// Bourgain's condition for a phase, or for a distance phase of a metric.
    CheckBourgain {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,0")]
        point: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0")]
        y0: Vec<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Contact order along the core curve.
    ContactOrder {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,0")]
        point: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0")]
        y0: Vec<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 6)]
        kmax: usize,
    },
    /// Chaotic-curvature check over sampled directions.
    CheckChaotic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,0")]
        point: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        directions: usize,
    },
    /// Infimum of the Wolff functional over symmetric matrices.
    Wolff {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0")]
        v: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0")]
        xi: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        half: f64,
    },
    /// Whether a polynomial phase comes from a metric.
    PhaseMetric {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,0")]
        point: Vec<f64>,
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
    /// Decay of the oscillatory integral in the frequency.
    OscDecay {
        #[command(flatten)]
        common: Common,
        /// `pointwise` or `lp:P`.
        #[arg(long, value_parser = parse_mode)]
        mode: DecayMode,
        #[arg(long = "Ns", value_delimiter = ',')]
        ns: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Union volumes of randomly placed δ-tubes.
    Tubes {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Name, `constant_curvature:κ`, `phase:NAME`, or inline JSON.
    #[arg(long, value_parser = parse_object)]
    object: ObjectSpec,
    /// A single number for one-tolerance tasks, or `key=value` pairs.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long, value_parser = parse_verdict)]
    expect: Option<Verdict>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report and tables here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_format, default_value = "json,csv")]
    format: Vec<Format>,
}

fn parse_mode(s: &str) -> Result<DecayMode, String> {
    match s {
        "pointwise" => Ok(DecayMode::Pointwise),
        _ => match s.strip_prefix("lp:") {
            Some(p) => Ok(DecayMode::Lp { p: p.parse().map_err(|_| format!("bad exponent `{p}`"))? }),
            None => Err(format!("unknown mode `{s}` (pointwise or lp:P)")),
        },
    }
}

fn parse_verdict(s: &str) -> Result<Verdict, String> {
    serde_json::from_value(serde_json::Value::from(s)).map_err(|_| format!("unknown verdict `{s}`"))
}

fn parse_format(s: &str) -> Result<Format, String> {
    serde_json::from_value(serde_json::Value::from(s)).map_err(|_| format!("unknown format `{s}`"))
}

fn tolerances(kind: &TaskKind, flag: Option<&str>) -> Result<BTreeMap<String, f64>, String> {
    let mut t = default_tolerances(kind);
    let Some(flag) = flag else { return Ok(t) };
    let keys = kind.tolerance_keys();
    if let Ok(v) = flag.parse::<f64>() {
        if keys.len() != 1 {
            return Err(format!("{} takes `key=value` tolerances ({})", kind.name(), keys.join(", ")));
        }
        t.insert(keys[0].to_string(), v);
        return Ok(t);
    }
    for pair in flag.split(',') {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("bad tolerance `{pair}`"))?;
        let v: f64 = v.parse().map_err(|_| format!("bad tolerance value `{v}`"))?;
        t.insert(k.trim().to_string(), v);
    }
    Ok(t)
}

fn single(common: Common, kind: TaskKind) -> ExitCode {
    let tols = match tolerances(&kind, common.tol.as_deref()) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let task =
        Task { id: kind.name().into(), object: "object".into(), task: kind, tolerances: tols, expect: common.expect };
    let (report, tables) = match run_single(&common.object, &task, common.seed) {
        Ok(x) => x,
        Err(e) => return fail(&e),
    };
    if let Some(dir) = &common.out {
        if let Err(e) = write_single(dir, &common.format, &report, &tables) {
            return fail(&e);
        }
    }
    print!("{}", to_json(&report));
    ExitCode::from(if report.matches_expectation() { EXIT_OK } else { EXIT_MISMATCH } as u8)
}

fn fail(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_ERROR as u8)
}

fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("OSCGEO_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| format!("OSCGEO_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match cli.command {
        Command::Run { scenario, out } => match run_scenario(&scenario, out.as_deref()) {
            Err(e) => fail(&e),
            Ok(summary) => {
                for o in &summary.outcomes {
                    match &o.report {
                        Ok(r) => {
                            let verdict =
                                r.verdict.map(|v| format!("{v:?}").to_lowercase()).unwrap_or_else(|| "-".into());
                            let status = match r.expected {
                                Some(_) if r.matches_expectation() => "ok",
                                Some(_) => "MISMATCH",
                                None => "",
                            };
                            eprintln!("{:<24} {:<16} {verdict:<10} {status}", o.id, r.task);
                        }
                        Err(e) => eprintln!("{:<24} error: {e}", o.id),
                    }
                }
                ExitCode::from(summary.exit_code as u8)
            }
        },
        Command::Curvature { common, point } => single(common, TaskKind::Curvature(CurvatureParams { point })),
        Command::Geodesic { common, point, target, direction, length, steps } => {
            single(common, TaskKind::Geodesic(GeodesicParams { point, target, direction, length, steps }))
        }
        Command::JacobiTaylor { common, point, direction, epsilon } => {
            single(common, TaskKind::JacobiTaylor(JacobiParams { point, direction, epsilon }))
        }
        Command::CheckBourgain { common, point, y0, epsilon } => {
            single(common, TaskKind::CheckBourgain(BourgainParams { point, y0, epsilon }))
        }
        Command::ContactOrder { common, point, y0, epsilon, kmax } => {
            single(common, TaskKind::ContactOrder(ContactParams { point, y0, epsilon, kmax }))
        }
        Command::CheckChaotic { common, point, directions } => {
            single(common, TaskKind::CheckChaotic(ChaoticParams { point, directions }))
        }
        Command::Wolff { common, v, xi, half } => single(common, TaskKind::Wolff(WolffParams { v, xi, half })),
        Command::PhaseMetric { common, point, grid } => {
            single(common, TaskKind::PhaseMetric(PhaseMetricParams { point, grid }))
        }
        Command::OscDecay { common, mode, ns, point, grid } => {
            single(common, TaskKind::OscDecay(DecayParams { mode, ns, point, grid }))
        }
        Command::Tubes { common, deltas, count, lambda } => {
            single(common, TaskKind::Tubes(TubeParams { deltas, count, lambda }))
        }
    }
}
