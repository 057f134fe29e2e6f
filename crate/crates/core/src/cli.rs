//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::export::{num, write_json, write_text, RunManifest};
use crate::extinction::{extinction_curve, mean_y_by_difference, phi_limit, psi_with};
use crate::model::{build_model, validate, ConfigDocument, ModelSpec};
use crate::renewal::{clt_variance_with, limit_functionals, malthusian, mean_measure, second_moment, ReproKernel};
use crate::sim::{ensemble, trajectories_csv, trajectory_rows};
use crate::verify::{self, CheckReport};

#[derive(Debug, Parser)]
#[command(name = "lifebranch", version, about = "Branching processes driven by remaining lifetime")]
struct Cli {
    /// Model configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of trajectories; overrides the config.
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Format of grid outputs.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model assumptions and print the report.
    Validate,
    /// Run an analytic solver.
    Solve {
        #[command(subcommand)]
        what: SolveWhat,
    },
    /// Simulate an ensemble and write one row per trajectory and time.
    Simulate,
    /// Compare simulations with the analytic results.
    Verify {
        #[command(subcommand)]
        what: VerifyWhat,
    },
    /// Bundle every artifact in the output directory into report.json.
    Report,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum SolveWhat {
    Malthusian,
    Mean,
    SecondMoment,
    Limits,
    Extinction,
    Phi,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum VerifyWhat {
    FirstMoments,
    Distributional,
    Variance,
    Clt,
    All,
}

impl SolveWhat {
    fn name(self) -> &'static str {
        match self {
            SolveWhat::Malthusian => "malthusian",
            SolveWhat::Mean => "mean",
            SolveWhat::SecondMoment => "second-moment",
            SolveWhat::Limits => "limits",
            SolveWhat::Extinction => "extinction",
            SolveWhat::Phi => "phi",
        }
    }
}

impl VerifyWhat {
    fn name(self) -> &'static str {
        match self {
            VerifyWhat::FirstMoments => "first-moments",
            VerifyWhat::Distributional => "distributional",
            VerifyWhat::Variance => "variance",
            VerifyWhat::Clt => "clt",
            VerifyWhat::All => "all",
        }
    }
}

/// Parse `argv` (program name first), run, and return the exit status:
/// 0 on success, 1 when a check fails, 2 on usage or input errors.
pub fn run_cli<I>(argv: I) -> i32
where
    I: IntoIterator<Item = OsString>,
{
    let args: Vec<OsString> = argv.into_iter().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let flags: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| run(&cli, flags)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

struct Context {
    doc: ConfigDocument,
    spec: ModelSpec,
    out: PathBuf,
    flags: Vec<String>,
    format: Option<Format>,
}

impl Context {
    fn hash(&self) -> String {
        self.doc.spec_hash()
    }

    /// Write a grid in the requested format and return its file name.
    fn grid(&self, stem: &str, csv: &str) -> Result<String> {
        match self.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                let name = format!("{stem}.csv");
                write_text(&self.out, &name, csv)?;
                Ok(name)
            }
            Format::Json => {
                let name = format!("{stem}.json");
                write_json(&self.out, &name, &csv_to_json(csv))?;
                Ok(name)
            }
        }
    }

    fn json<T: Serialize>(&self, stem: &str, value: &T) -> Result<String> {
        let name = format!("{stem}.json");
        write_json(&self.out, &name, value)?;
        Ok(name)
    }

    fn manifest(&self, subcommand: &str, outputs: Vec<String>) -> Result<()> {
        let m = RunManifest::new(&self.hash(), self.doc.sim.seed, subcommand, self.flags.clone(), outputs);
        let stem = format!("manifest_{}", subcommand.replace([' ', '-'], "_"));
        write_json(&self.out, &format!("{stem}.json"), &m)
    }
}

fn load(cli: &Cli, flags: Vec<String>) -> Result<Context> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut doc = ConfigDocument::from_json(&text)?;
    if let Some(s) = cli.seed {
        doc.sim.seed = s;
    }
    if let Some(n) = cli.trajectories {
        doc.sim.trajectories = n;
    }
    let spec = build_model(&doc)?;
    Ok(Context { doc, spec, out: cli.out.clone(), flags, format: cli.format })
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("output directory {}: {e}", dir.display())))
}

fn run(cli: &Cli, flags: Vec<String>) -> Result<i32> {
    let ctx = load(cli, flags)?;
    match cli.command {
        Command::Validate => {
            let report = validate(&ctx.spec);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::Solve { what } => {
            ensure_out(&ctx.out)?;
            let outputs = solve(&ctx, what)?;
            ctx.manifest(&format!("solve {}", what.name()), outputs)?;
            Ok(0)
        }
        Command::Simulate => {
            ensure_out(&ctx.out)?;
            let name = simulate(&ctx)?;
            ctx.manifest("simulate", vec![name])?;
            Ok(0)
        }
        Command::Verify { what } => {
            ensure_out(&ctx.out)?;
            let reports = run_verify(&ctx, what)?;
            let name = ctx.json(&format!("verify_{}", what.name().replace('-', "_")), &reports)?;
            ctx.manifest(&format!("verify {}", what.name()), vec![name])?;
            for r in &reports {
                eprintln!(
                    "{:<6} {:<44} estimate={} target={} statistic={}",
                    status(r),
                    r.name,
                    num(r.estimate),
                    r.target.map(num).unwrap_or_else(|| "-".into()),
                    num(r.statistic)
                );
            }
            Ok(if reports.iter().any(CheckReport::fails) { 1 } else { 0 })
        }
        Command::Report => {
            ensure_out(&ctx.out)?;
            let report = bundle(&ctx.out)?;
            write_json(&ctx.out, "report.json", &report)?;
            Ok(0)
        }
    }
}

fn status(r: &CheckReport) -> &'static str {
    match (r.kind, r.pass) {
        (verify::CheckKind::Pass, true) => "PASS",
        (verify::CheckKind::Pass, false) => "FAIL",
        (verify::CheckKind::Diagnostic, _) => "DIAG",
        (verify::CheckKind::Skipped, _) => "SKIP",
    }
}

fn solve(ctx: &Context, what: SolveWhat) -> Result<Vec<String>> {
    let spec = &ctx.spec;
    let sol = malthusian(spec)?;
    let mut out = Vec::new();
    match what {
        SolveWhat::Malthusian => out.push(ctx.json("malthusian", &sol)?),
        SolveWhat::Mean => out.push(ctx.grid("mean", &mean_measure(spec).to_csv())?),
        SolveWhat::SecondMoment => {
            let grid = mean_measure(spec);
            let sm = second_moment(spec, &sol, &grid)?;
            out.push(ctx.grid("second_moment", &sm.to_csv())?);
            let lf = limit_functionals(spec, &sol);
            let cv = clt_variance_with(spec, &sol, &lf, &sm, ctx.doc.sim.clt_s0)?;
            out.push(ctx.json("clt_variance", &cv)?);
        }
        SolveWhat::Limits => {
            let lf = limit_functionals(spec, &sol);
            out.push(ctx.json("limits", &lf.summary())?);
            out.push(ctx.grid("limit_curves", &lf.curves_csv(0.05, spec.x_max()))?);
        }
        SolveWhat::Extinction => {
            let ext = extinction_curve(spec)?;
            out.push(ctx.json("extinction", &ext)?);
            if let Some(c) = ext.curve_csv() {
                out.push(ctx.grid("q_curve", &c)?);
            }
        }
        SolveWhat::Phi => {
            let curve = phi_limit(spec, &sol, &ctx.doc.sim.thetas)?;
            out.push(ctx.grid("phi", &curve.to_csv())?);
            let kernel = ReproKernel::new(spec);
            let psi = (-12..=4)
                .map(|k| {
                    let u = 10f64.powf(k as f64 / 2.0);
                    psi_with(spec, &sol, &kernel, u).map(|p| (u, p))
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = json!({
                "c_slope": curve.c_slope,
                "slope_at_min": curve.slope_at_min,
                "q": curve.q,
                "mean_Y_by_difference": mean_y_by_difference(spec, &sol, 1e-4),
                "psi": psi,
            });
            out.push(ctx.json("phi_summary", &summary)?);
        }
    }
    Ok(out)
}

fn simulate(ctx: &Context) -> Result<String> {
    let spec = &ctx.spec;
    let sim = &ctx.doc.sim;
    let sol = malthusian(spec)?;
    let a = sol.alpha_tilde;
    let rows = ensemble(spec, &sol, sim.seed, 0, sim.trajectories, &sim.obs_times, sim.max_pop, |i, r| {
        trajectory_rows(i, &r, &spec.f, a)
    });
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    ctx.grid("trajectories", &trajectories_csv(&rows))
}

fn run_verify(ctx: &Context, what: VerifyWhat) -> Result<Vec<CheckReport>> {
    let spec = &ctx.spec;
    let s = &ctx.doc.sim;
    let sol = malthusian(spec)?;
    match what {
        VerifyWhat::FirstMoments => verify::check_first_moments_with(
            spec,
            &sol,
            &s.first_moment_times,
            s.trajectories,
            s.y_samples,
            s.seed,
            s.max_pop,
        ),
        VerifyWhat::Distributional => verify::check_distributional_with(
            spec,
            &sol,
            s.distributional_time,
            &s.thetas,
            s.trajectories,
            s.seed,
            s.max_pop,
        ),
        VerifyWhat::Variance => {
            verify::check_variance_with(spec, &sol, s.variance_time, s.trajectories, s.seed, s.max_pop).map(|r| vec![r])
        }
        VerifyWhat::Clt => verify::check_clt_with(
            spec,
            &sol,
            s.clt_time,
            s.clt_s0,
            s.clt_compare_time,
            s.clt_samples,
            s.seed,
            s.max_pop,
        ),
        VerifyWhat::All => verify::verify_all(spec, &sol, s),
    }
}

/// CSV text as an array of objects, numbers where cells parse.
fn csv_to_json(text: &str) -> Value {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let rows = lines
        .map(|line| {
            let obj: Map<String, Value> = header
                .iter()
                .zip(line.split(','))
                .map(|(k, v)| {
                    let val = match v.parse::<f64>() {
                        Ok(x) if x.is_finite() => json!(x),
                        _ if v.is_empty() => Value::Null,
                        _ => json!(v),
                    };
                    (k.to_string(), val)
                })
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

/// Every JSON artifact inline and a digest of every CSV, keyed by file name.
fn bundle(dir: &Path) -> Result<Value> {
    use sha2::{Digest, Sha256};
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "report.json")
        .collect();
    names.sort();
    let mut artifacts = Map::new();
    let mut failures = Vec::new();
    for name in names {
        let text = std::fs::read_to_string(dir.join(&name))?;
        let entry = if name.ends_with(".json") {
            let v: Value = serde_json::from_str(&text)?;
            if name.starts_with("verify_") {
                if let Some(arr) = v.as_array() {
                    for r in arr {
                        if r["kind"] == "pass" && r["pass"] == false {
                            failures.push(json!({"file": name, "check": r["name"]}));
                        }
                    }
                }
            }
            v
        } else if name.ends_with(".csv") {
            let mut lines = text.lines();
            json!({
                "header": lines.next().unwrap_or_default(),
                "rows": lines.count(),
                "sha256": hex::encode(Sha256::digest(text.as_bytes())),
            })
        } else {
            continue;
        };
        artifacts.insert(name, entry);
    }
    Ok(json!({ "failed_checks": failures, "artifacts": artifacts }))
}
