//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 estimation or
//! fit failure, 4 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_overrides, EstimationPlan, RunConfig};
use crate::error::Error;
use crate::estimator::{estimate, fit_curve, EstimationResult};
use crate::io::{
    read_dataset, read_manifest, read_results, with_extension, write_columns, write_dataset,
    write_manifest, write_results, Manifest, ResultRow,
};
use crate::recovery::{fit_recovery, RecoverySample};
use crate::simulator::{simulate_indentation, simulate_repeated_palpation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "mdr-indent",
    version,
    about = "Simulate indentation tests and estimate foam elasticity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic indentation dataset (or a repeated-palpation series).
    Simulate(SimulateArgs),
    /// Estimate elasticity and surface height from one or more datasets.
    Estimate(EstimateArgs),
    /// Fit the two-exponential recovery law to estimates with rest times.
    FitRecovery(FitRecoveryArgs),
    /// Summarise a results table grouped by specimen and tip.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(required = true)]
    datasets: Vec<PathBuf>,
    /// Configuration applied to every dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-dataset manifest, in the same order as the datasets. Defaults to
    /// `<dataset>.manifest` when that file exists.
    #[arg(long)]
    manifest: Vec<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct FitRecoveryArgs {
    /// Results table written by `estimate`.
    results: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Points on the exported fitted curve.
    #[arg(long, default_value_t = 200)]
    curve_points: usize,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Results table written by `estimate`.
    #[arg(long)]
    results: PathBuf,
    /// Manifests supplying ground truth for rows that lack it, matched by label.
    #[arg(long)]
    manifest: Vec<PathBuf>,
    /// Also write the table to `<out-dir>/report.txt`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Failure of a subcommand, carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn config(errors: Vec<String>) -> Self {
        let mut message = String::from("invalid configuration:");
        for e in errors {
            message.push_str("\n  - ");
            message.push_str(&e);
        }
        Self::usage(message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            Error::Format { .. } => EXIT_IO,
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_ESTIMATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand,
/// printing to the process stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    // Unlocked handles: worker threads may log to stderr while we run.
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// As [`run`], writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Estimate(a) => estimate_cmd(a, out, err),
        Command::FitRecovery(a) => fit_recovery_cmd(a, out),
        Command::Report(a) => report(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let rc = RunConfig::load(args.config.as_deref(), &args.set)?;
    let plan = rc.simulation().map_err(Failure::config)?;
    create_dir(&args.out_dir)?;
    let base = plan.manifest(rc.manifest());

    let runs: Vec<(String, Manifest, Vec<_>)> = match &plan.palpation {
        None => {
            let records = simulate_indentation(&plan.experiment)?;
            vec![(plan.label.clone(), base, records)]
        }
        Some((rests, law)) => simulate_repeated_palpation(&plan.experiment, rests, law)?
            .into_iter()
            .enumerate()
            .map(|(k, p)| {
                let label = format!("{}_p{k}", plan.label);
                let mut m = base.clone();
                m.set("label", label.clone());
                m.set_f64("e_f", p.material.e_f());
                m.set_f64("e_true", p.material.e_f());
                m.set_f64("rest_s", p.rest);
                m.set("seed", p.seed.to_string());
                m.remove("rest_intervals");
                (label, m, p.records)
            })
            .collect(),
    };

    for (label, mut manifest, records) in runs {
        let csv = with_extension(&args.out_dir, &label, "csv");
        manifest.set(
            "dataset",
            csv.file_name().unwrap_or_default().to_string_lossy(),
        );
        write_dataset(&records, &csv)?;
        write_manifest(
            &manifest,
            &with_extension(&args.out_dir, &label, "manifest"),
        )?;
        let f_max = records
            .iter()
            .map(|r| r.f_z)
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            out,
            "{label}: {} samples, max depth {:.3} mm, max force {:.4} N",
            records.len(),
            plan.experiment.max_depth() * 1e3,
            f_max
        );
    }
    Ok(())
}

struct Job {
    dataset: PathBuf,
    label: String,
    plan: EstimationPlan,
}

fn estimate_one(
    job: &Job,
) -> std::result::Result<(Vec<crate::simulator::IndentationRecord>, EstimationResult), Error> {
    let records = read_dataset(&job.dataset)?;
    let result = estimate(&records, &job.plan.model, job.plan.f_unc)?;
    Ok((records, result))
}

fn estimate_cmd(args: EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if !args.manifest.is_empty() && args.manifest.len() != args.datasets.len() {
        return Err(Failure::usage(format!(
            "got {} --manifest files for {} datasets",
            args.manifest.len(),
            args.datasets.len()
        )));
    }
    if args.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let base = match &args.config {
        Some(p) => read_manifest(p)?,
        None => Manifest::new(),
    };
    let overrides = parse_overrides(&args.set)?;

    let mut jobs = Vec::with_capacity(args.datasets.len());
    for (i, dataset) in args.datasets.iter().enumerate() {
        let mut rc = RunConfig::from_manifest(base.clone());
        let sidecar = dataset.with_extension("manifest");
        match args.manifest.get(i) {
            Some(p) => rc.overlay(&read_manifest(p)?),
            None if sidecar.is_file() => rc.overlay(&read_manifest(&sidecar)?),
            None => {}
        }
        rc.overlay(&overrides);
        let plan = rc.estimation().map_err(|errs| {
            Failure::config(
                errs.into_iter()
                    .map(|e| format!("{}: {e}", dataset.display()))
                    .collect(),
            )
        })?;
        let label = dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| plan.label.clone());
        jobs.push(Job {
            dataset: dataset.clone(),
            label,
            plan,
        });
    }

    let workers = args.jobs.min(jobs.len()).max(1);
    let chunk = jobs.len().div_ceil(workers);
    let outcomes: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(estimate_one).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("estimation worker panicked"))
            .collect()
    });

    create_dir(&args.out_dir)?;
    let mut rows = Vec::new();
    let mut failure: Option<Failure> = None;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let (records, r) = match outcome {
            Ok(v) => v,
            Err(e) => {
                let f = Failure::from(e);
                let _ = writeln!(err, "{}: {}", job.dataset.display(), f.message);
                // I/O problems outrank estimation failures.
                if failure.as_ref().is_none_or(|prev| f.code > prev.code) {
                    failure = Some(f);
                }
                continue;
            }
        };
        let _ = writeln!(
            out,
            "{}: E = {:.2} kPa, sigma = {:.2} kPa, z_surf = {:.6} m, residual = {:.4e} N^2 ({:.4e} kPa^2), {} samples",
            job.label,
            r.e_f / 1e3,
            r.sigma_e / 1e3,
            r.z_surf,
            r.residual_n2,
            r.residual_kpa2,
            r.n_used
        );
        if r.discard_fraction > 0.0 {
            let _ = writeln!(
                out,
                "  discard fraction {} applied: samples shallower than {}% of the deepest penetration were excluded",
                r.discard_fraction,
                r.discard_fraction * 100.0
            );
        }
        let row = ResultRow {
            label: job.label.clone(),
            specimen: job.plan.specimen.clone(),
            tip: job.plan.tip.name.to_string(),
            rest_s: job.plan.rest_s,
            e_true_pa: job.plan.e_true,
            e_f_pa: r.e_f,
            sigma_e_pa: r.sigma_e,
            kappa: r.kappa,
            z_surf_m: r.z_surf,
            residual_n2: r.residual_n2,
            residual_kpa2: r.residual_kpa2,
            n_used: r.n_used,
        };
        let mut m = row.to_manifest();
        m.set("dataset", job.dataset.to_string_lossy());
        m.set_f64("sigma_e_fixed_surface_pa", r.sigma_e_fixed_surface);
        m.set_f64("discard_fraction", r.discard_fraction);
        m.set("feasible_intervals", r.feasible_intervals.to_string());
        write_manifest(&m, &with_extension(&args.out_dir, &job.label, "result"))?;
        write_columns(
            &args.out_dir.join(format!("{}.fit.csv", job.label)),
            &["z_ee_m", "d_m", "f_measured_n", "f_model_n"],
            fit_curve(&records, &r, &job.plan.model)
                .into_iter()
                .map(|p| vec![p.z_ee, p.d, p.f_measured, p.f_model]),
        )?;
        rows.push(row);
    }
    write_results(&rows, &args.out_dir.join("results.csv"))?;
    match failure {
        Some(f) => Err(Failure {
            code: f.code,
            message: format!(
                "{} of {} datasets failed",
                jobs.len() - rows.len(),
                jobs.len()
            ),
        }),
        None => Ok(()),
    }
}

fn fit_recovery_cmd(args: FitRecoveryArgs, out: &mut dyn Write) -> CmdResult {
    let rows = read_results(&args.results)?;
    let samples: Vec<RecoverySample> = rows
        .iter()
        .filter_map(|r| {
            r.rest_s.map(|t| RecoverySample {
                t,
                e: r.e_f_pa,
                sigma: (r.sigma_e_pa > 0.0).then_some(r.sigma_e_pa),
            })
        })
        .collect();
    if samples.len() < 4 {
        return Err(Failure::usage(format!(
            "need ≥ 4 samples with a rest time to fit the recovery law, got {}",
            samples.len()
        )));
    }
    let fit = fit_recovery(&samples)?;
    let p = fit.params;
    create_dir(&args.out_dir)?;

    let mut m = Manifest::new();
    m.set_f64("c1", p.c1);
    m.set_f64("c2", p.c2);
    m.set_f64("c3", p.c3);
    m.set_f64("c4", p.c4);
    m.set_f64("loss", fit.loss);
    m.set("samples", samples.len().to_string());
    write_manifest(&m, &args.out_dir.join("recovery.params"))?;

    let t_lo = samples.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    let t_hi = samples
        .iter()
        .map(|s| s.t)
        .fold(f64::NEG_INFINITY, f64::max);
    let n = args.curve_points.max(2);
    write_columns(
        &args.out_dir.join("recovery_curve.csv"),
        &["t_s", "e_fit_pa"],
        (0..n).map(|i| {
            let t = t_lo + (t_hi - t_lo) * i as f64 / (n - 1) as f64;
            vec![t, p.eval(t)]
        }),
    )?;

    let _ = writeln!(
        out,
        "E(t) = {:.6e} exp({:.6e} t) + {:.6e} exp({:.6e} t)  [Pa, t in s]",
        p.c1, p.c2, p.c3, p.c4
    );
    let _ = writeln!(
        out,
        "weighted loss {:.6e} over {} samples",
        fit.loss,
        samples.len()
    );
    Ok(())
}

struct Group {
    specimen: String,
    tip: String,
    e_true: Option<f64>,
    estimates: Vec<f64>,
    sigmas: Vec<f64>,
}

fn report(args: ReportArgs, out: &mut dyn Write) -> CmdResult {
    let mut rows = read_results(&args.results)?;
    for path in &args.manifest {
        let m = read_manifest(path)?;
        let truth = m
            .get("e_true")
            .or(m.get("e_f"))
            .and_then(|v| v.parse::<f64>().ok());
        let label = m.get("label").unwrap_or("");
        for row in rows
            .iter_mut()
            .filter(|r| r.label == label && r.e_true_pa.is_none())
        {
            row.e_true_pa = truth;
        }
    }

    let mut groups: Vec<Group> = Vec::new();
    for r in &rows {
        let idx = match groups
            .iter()
            .position(|g| g.specimen == r.specimen && g.tip == r.tip)
        {
            Some(i) => i,
            None => {
                groups.push(Group {
                    specimen: r.specimen.clone(),
                    tip: r.tip.clone(),
                    e_true: None,
                    estimates: Vec::new(),
                    sigmas: Vec::new(),
                });
                groups.len() - 1
            }
        };
        let g = &mut groups[idx];
        g.e_true = g.e_true.or(r.e_true_pa);
        g.estimates.push(r.e_f_pa);
        g.sigmas.push(r.sigma_e_pa);
    }

    let mut text = format!(
        "{:<12} {:<11} {:>12} {:>12} {:>12} {:>9} {:>4}\n",
        "specimen", "tip", "E_true[kPa]", "E[kPa]", "sigma[kPa]", "err[%]", "n"
    );
    for g in &groups {
        let n = g.estimates.len() as f64;
        let mean = g.estimates.iter().sum::<f64>() / n;
        // Spread across repeats when there are any, otherwise the fit's own uncertainty.
        let sigma = if g.estimates.len() > 1 {
            (g.estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            g.sigmas[0]
        };
        let (truth, err) = match g.e_true {
            Some(t) => (
                format!("{:.2}", t / 1e3),
                format!("{:.2}", (t - mean) / t * 100.0),
            ),
            None => ("-".into(), "-".into()),
        };
        text.push_str(&format!(
            "{:<12} {:<11} {:>12} {:>12.2} {:>12.2} {:>9} {:>4}\n",
            if g.specimen.is_empty() {
                "-"
            } else {
                &g.specimen
            },
            g.tip,
            truth,
            mean / 1e3,
            sigma / 1e3,
            err,
            g.estimates.len()
        ));
    }
    let _ = write!(out, "{text}");
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        let path = dir.join("report.txt");
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
