//! `sa-lab`: batch experiments on finite-dimensional spectral triples.
//!
//! Subcommands: `expand`, `cocycle-check`, `bound-check`, `pairing`,
//! `moi-verify`, `bench`. Every run is deterministic given the seed; reports
//! land as JSON (plus CSV convergence tables with `--format csv`) in the
//! output directory. Exit codes: 0 success, 2 invalid config, 3 guard
//! violation, 4 check failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use spectral_action::error::Error;
use spectral_action::functions::FunctionSpec;
use spectral_action::lab::{
    self, convergence_csv, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "sa-lab", version, about = "Spectral-action expansion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Direct trace of f(D+V) - f(D) versus the Chern-Simons/Yang-Mills partial sums.
    Expand(CommonArgs),
    /// The b/B cocycle identity suite on random tuples.
    CocycleCheck(CommonArgs),
    /// Trace-norm inequality trials and the fitted remainder envelope.
    BoundCheck(CommonArgs),
    /// Pairing of the odd cocycle with a random unitary on the amplified triple.
    Pairing(CommonArgs),
    /// Eigenbasis evaluation versus quadrature, resolvent-weight and
    /// perturbation identities.
    MoiVerify(CommonArgs),
    /// Contraction-kernel timing: memoized versus uncached evaluation.
    Bench(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; fields set here override the individual flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    /// Amplification order for the pairing.
    #[arg(long)]
    q: Option<usize>,
    /// Expansion order.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Pairing truncation order.
    #[arg(long = "Kmax")]
    k_max: Option<usize>,
    /// "gaussian", "gaussian:<scale>", or a JSON function spec.
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    norm_cap: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    d_scale: Option<f64>,
    /// Highest cochain order for cocycle-check.
    #[arg(long)]
    orders: Option<usize>,
    /// Random tuples per identity for cocycle-check.
    #[arg(long)]
    tuples: Option<usize>,
    #[arg(long, default_value = "sa-lab-out")]
    out: PathBuf,
    /// json (default) or csv (JSON report plus CSV tables).
    #[arg(long, default_value = "json")]
    format: String,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_function(text: &str) -> Result<FunctionSpec, String> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed).map_err(|e| format!("bad function spec: {e}"));
    }
    let mut parts = trimmed.splitn(2, ':');
    let kind = parts.next().unwrap_or("");
    let arg = parts.next();
    match kind {
        "gaussian" => {
            let scale = match arg {
                Some(s) => s.parse::<f64>().map_err(|e| format!("bad gaussian scale: {e}"))?,
                None => 1.0,
            };
            Ok(FunctionSpec::Gaussian { scale })
        }
        other => Err(format!(
            "unknown function shorthand `{other}`; use JSON for rational/poly_gaussian"
        )),
    }
}

fn build_config(args: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::default();
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.dim {
        cfg.dim = v;
    }
    if let Some(v) = args.q {
        cfg.q = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.k_max {
        cfg.k_max = v;
    }
    if let Some(text) = &args.function {
        cfg.function = parse_function(text)?;
    }
    if let Some(v) = args.norm_cap {
        cfg.norm_cap = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.d_scale {
        cfg.d_scale = v;
    }
    if let Some(v) = args.orders {
        cfg.orders = v;
    }
    if let Some(v) = args.tuples {
        cfg.tuples = v;
    }
    if let Some(v) = args.jobs {
        cfg.jobs = v;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let file_value: Value =
            serde_json::from_str(&text).map_err(|e| format!("bad config JSON: {e}"))?;
        // Config fields override the flags: merge the file over the flag view.
        let mut base = serde_json::to_value(&cfg).map_err(|e| e.to_string())?;
        merge(&mut base, &file_value);
        cfg = serde_json::from_value(base).map_err(|e| format!("bad config: {e}"))?;
    }
    Ok(cfg)
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn write_report<T: Serialize>(out: &Path, name: &str, report: &T) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let pretty = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    let path = out.join(name);
    std::fs::write(&path, pretty).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
    detail: String,
    exit_code: i32,
}

fn classify(err: &Error) -> i32 {
    match err {
        Error::GuardExceeded(_) => 3,
        Error::InvalidParameter(_)
        | Error::DimensionMismatch(_)
        | Error::NonFiniteEntry
        | Error::NotHermitian { .. }
        | Error::NotUnitary(_)
        | Error::UnboundGenerator(_) => 2,
        _ => 4,
    }
}

fn fail(err: Error) -> i32 {
    let code = classify(&err);
    let kind = match code {
        2 => "invalid-config",
        3 => "guard-violation",
        _ => "check-failure",
    };
    let report =
        ErrorReport { error: kind.to_string(), detail: err.to_string(), exit_code: code };
    println!("{}", serde_json::to_string(&report).unwrap());
    code
}

fn fail_config(detail: String) -> i32 {
    let report = ErrorReport { error: "invalid-config".into(), detail, exit_code: 2 };
    println!("{}", serde_json::to_string(&report).unwrap());
    2
}

fn dispatch(command: &Command) -> i32 {
    let args = match command {
        Command::Expand(a)
        | Command::CocycleCheck(a)
        | Command::BoundCheck(a)
        | Command::Pairing(a)
        | Command::MoiVerify(a)
        | Command::Bench(a) => a,
    };
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => return fail_config(e),
    };
    let out = &args.out;
    let csv_too = args.format == "csv";
    if !csv_too && args.format != "json" {
        return fail_config(format!("unknown format `{}`", args.format));
    }

    match command {
        Command::Expand(_) => match lab::run_expand(&cfg) {
            Ok(report) => {
                if let Err(e) = write_report(out, "expand.json", &report) {
                    return fail_config(e);
                }
                if csv_too {
                    for trial in &report.trials {
                        let name = format!("convergence_{:03}.csv", trial.trial);
                        if let Err(e) = std::fs::write(out.join(&name), convergence_csv(trial)) {
                            return fail_config(e.to_string());
                        }
                    }
                }
                println!("{}", serde_json::to_string(&report).unwrap());
                0
            }
            Err(e) => fail(e),
        },
        Command::CocycleCheck(_) => match lab::run_cocycle_check(&cfg) {
            Ok(report) => {
                if let Err(e) = write_report(out, "cocycle-check.json", &report) {
                    return fail_config(e);
                }
                println!("{}", serde_json::to_string(&report).unwrap());
                if report.all_pass {
                    0
                } else {
                    4
                }
            }
            Err(e) => fail(e),
        },
        Command::BoundCheck(_) => match lab::run_bound_check(&cfg) {
            Ok(report) => {
                if let Err(e) = write_report(out, "bound-check.json", &report) {
                    return fail_config(e);
                }
                if csv_too {
                    let mut csv = String::from("trial,dim,n,perturbed,trace_norm,bound,ratio\n");
                    for t in &report.schatten_trials {
                        csv.push_str(&format!(
                            "{},{},{},{},{:.17e},{:.17e},{:.17e}\n",
                            t.trial, t.dim, t.n, t.perturbed, t.trace_norm, t.bound, t.ratio
                        ));
                    }
                    if let Err(e) = std::fs::write(out.join("schatten_trials.csv"), csv) {
                        return fail_config(e.to_string());
                    }
                }
                println!("{}", serde_json::to_string(&report).unwrap());
                if report.all_hold {
                    0
                } else {
                    4
                }
            }
            Err(e) => fail(e),
        },
        Command::Pairing(_) => match lab::run_pairing(&cfg) {
            Ok(report) => {
                if let Err(e) = write_report(out, "pairing.json", &report) {
                    return fail_config(e);
                }
                println!("{}", serde_json::to_string(&report).unwrap());
                if report.below_tolerance {
                    0
                } else {
                    4
                }
            }
            Err(e) => fail(e),
        },
        Command::MoiVerify(_) => match lab::run_moi_verify(&cfg) {
            Ok(report) => {
                if let Err(e) = write_report(out, "moi-verify.json", &report) {
                    return fail_config(e);
                }
                println!("{}", serde_json::to_string(&report).unwrap());
                if report.all_pass {
                    0
                } else {
                    4
                }
            }
            Err(e) => fail(e),
        },
        Command::Bench(_) => match lab::run_bench(&cfg) {
            Ok(report) => {
                if let Err(e) = write_report(out, "bench.json", &report) {
                    return fail_config(e);
                }
                println!("{}", serde_json::to_string(&report).unwrap());
                if report.values_agree {
                    0
                } else {
                    4
                }
            }
            Err(e) => fail(e),
        },
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(dispatch(&cli.command));
}
