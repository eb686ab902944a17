//! `quads`: batch driver for instance generation, runtime campaigns, scaling
//! fits and analysis reports.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 runtime or campaign
//! failure.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quads_core::decoherence::{empirical_dephasing_check, DecoherenceReport, DephasingParams};
use quads_core::ec3::write_instances_jsonl;
use quads_core::engine::{build_spec, spectral_report, DriverConvention, EigenConfig, StepControl};
use quads_core::experiments::{
    campaign_instances, group_summary, read_summary_csv, run_noiseless_campaign,
    run_noisy_campaign, CampaignConfig, SummaryRow,
};
use quads_core::fits::{
    fit, format_fit_table, write_fit_csv, FitFamily, FitPoint, FitRow, ScalingFit,
};
use quads_core::noise::{NoiseParams, Polarization, PowerSplit};
use quads_core::protocol::{EngineSettings, HuntConfig};
use quads_core::{Error, Result, Seed};
use serde_json::json;

use config::{parse_range, Settings};

#[derive(Parser, Debug)]
#[command(
    name = "quads",
    version,
    about = "Noisy adiabatic search on Exact Cover 3"
)]
struct Cli {
    /// Flat key = value file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "QUADS_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Progress messages on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct NoiseArgs {
    /// none, x, y, z or three.
    #[arg(long)]
    noise: Option<String>,
    /// Mean noise power.
    #[arg(long)]
    power: Option<f64>,
    /// Pulse amplitude standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Pulse half-width.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate unique-solution instances as JSON lines.
    Gen {
        /// Qubit count or range `lo..hi`.
        #[arg(long)]
        n: Option<String>,
        /// Instances per N.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Run a noiseless or noisy runtime campaign.
    Run {
        #[arg(long)]
        n: Option<String>,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Same as `--noise none`.
        #[arg(long, conflicts_with = "noise")]
        noiseless: bool,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Fit scaling laws to a summary.csv.
    Fit {
        summary: PathBuf,
        /// power, exp or both.
        #[arg(long)]
        family: Option<String>,
    },
    /// Plot-ready exports, fits and decoherence estimates for a run directory.
    Report {
        records: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Minimum spectral gaps along the schedule.
    Gap {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        instances: Option<usize>,
        /// Schedule points in [0, 1].
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Decoherence factor and bound for one scenario.
    Decohere {
        #[command(flatten)]
        noise: NoiseArgs,
        /// Total run time; the effective time applies the polarization's
        /// non-commuting fraction.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long)]
        delta_sigma: Option<i32>,
        /// Also run a Monte Carlo check with this many raw realizations.
        #[arg(long)]
        empirical: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Contract(_)
        | Error::Capability(_)
        | Error::Generation { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::Parse(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quads: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut s = match &cli.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    s.overlay("seed", &cli.seed)?;
    s.overlay("workers", &cli.workers)?;
    s.overlay("out", &cli.out.as_ref().map(|p| p.display()))?;
    let verbose = cli.verbose > 0;
    match &cli.command {
        Command::Gen { n, count } => {
            s.overlay("n", n)?;
            s.overlay("count", count)?;
            cmd_gen(&s)
        }
        Command::Run {
            n,
            noise,
            noiseless,
            instances,
            realizations,
        } => {
            s.overlay("n", n)?;
            overlay_noise(&mut s, noise)?;
            if *noiseless {
                s.set("noise", "none")?;
            }
            s.overlay("instances", instances)?;
            s.overlay("realizations", realizations)?;
            cmd_run(&s, verbose)
        }
        Command::Fit { summary, family } => {
            s.overlay("family", family)?;
            cmd_fit(&s, summary)
        }
        Command::Report {
            records,
            sigma,
            tau,
        } => {
            s.overlay("sigma", sigma)?;
            s.overlay("tau", tau)?;
            cmd_report(&s, records)
        }
        Command::Gap {
            n,
            instances,
            samples,
        } => {
            s.overlay("n", n)?;
            s.overlay("instances", instances)?;
            s.overlay("samples", samples)?;
            cmd_gap(&s, verbose)
        }
        Command::Decohere {
            noise,
            time,
            delta_sigma,
            empirical,
        } => {
            overlay_noise(&mut s, noise)?;
            s.overlay("time", time)?;
            s.overlay("delta_sigma", delta_sigma)?;
            s.overlay("empirical", empirical)?;
            cmd_decohere(&s)
        }
    }
}

fn overlay_noise(s: &mut Settings, a: &NoiseArgs) -> Result<()> {
    s.overlay("noise", &a.noise)?;
    s.overlay("power", &a.power)?;
    s.overlay("sigma", &a.sigma)?;
    s.overlay("tau", &a.tau)
}

fn seed(s: &Settings) -> Result<Seed> {
    Ok(Seed(s.get_or("seed", 0u64)?))
}

fn n_range(s: &Settings, default: &str) -> Result<(usize, usize)> {
    parse_range(s.raw("n").unwrap_or(default))
}

fn out_path(s: &Settings, default: &str) -> PathBuf {
    PathBuf::from(s.raw("out").unwrap_or(default))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn manifest(command: &str, s: &Settings, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "quads",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "settings": s.resolved(),
        "outputs": extra,
    })
}

/// `None` for noiseless runs.
fn noise_params(s: &Settings) -> Result<Option<NoiseParams>> {
    let kind = s.raw("noise").unwrap_or("none");
    if kind.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let pol: Polarization = kind.parse()?;
    let sigma: f64 = s.get_or("sigma", 0.2)?;
    let mut p = NoiseParams::new(
        s.get_or("power", 0.005)?,
        sigma * sigma,
        s.get_or("tau", 1.0)?,
        pol,
    )?;
    p.power_split = match s.raw("power_split").unwrap_or("total") {
        "total" => PowerSplit::Total,
        "per_axis" | "per-axis" => PowerSplit::PerAxis,
        other => {
            return Err(Error::Parse(format!(
                "power_split {other:?} is not total or per_axis"
            )))
        }
    };
    Ok(Some(p))
}

fn engine_settings(s: &Settings) -> Result<EngineSettings> {
    let d = EngineSettings::default();
    let driver = match s.raw("driver").unwrap_or("shifted") {
        "shifted" => DriverConvention::Shifted,
        "pauli" => DriverConvention::Pauli,
        other => {
            return Err(Error::Parse(format!(
                "driver {other:?} is not shifted or pauli"
            )))
        }
    };
    Ok(EngineSettings {
        coupling: s.get_or("coupling", d.coupling)?,
        driver,
        step: StepControl {
            max_step: s.get_or("max_step", d.step.max_step)?,
            cheb_tol: s.get_or("cheb_tol", d.step.cheb_tol)?,
            ..d.step
        },
    })
}

fn cmd_gen(s: &Settings) -> Result<()> {
    let (lo, hi) = n_range(s, "8")?;
    let count: usize = s.get_or("count", 1)?;
    let master = seed(s)?;
    let mut all = Vec::new();
    for n in lo..=hi {
        all.extend(campaign_instances(master, n, count)?);
    }
    let out = out_path(s, "instances.jsonl");
    let mut w = BufWriter::new(File::create(&out)?);
    write_instances_jsonl(&mut w, &all)?;
    w.flush()?;
    write_json(
        &out.with_extension("manifest.json"),
        &manifest("gen", s, json!({ "instances": out, "count": all.len() })),
    )?;
    println!("wrote {} instances to {}", all.len(), out.display());
    Ok(())
}

fn campaign_config(s: &Settings) -> Result<CampaignConfig> {
    let d = CampaignConfig::default();
    let (n_min, n_max) = n_range(s, "7..14")?;
    let noise = noise_params(s)?;
    let h = HuntConfig::default();
    Ok(CampaignConfig {
        n_min,
        n_max,
        instances_per_n: s.get_or("instances", d.instances_per_n)?,
        realizations_per_instance: if noise.is_some() {
            s.get_or("realizations", 10)?
        } else {
            0
        },
        noise,
        master_seed: seed(s)?,
        workers: s.get_or("workers", 0)?,
        output_dir: Some(out_path(s, "runs")),
        hunt: HuntConfig {
            window_low: s.get_or("window_low", h.window_low)?,
            window_high: s.get_or("window_high", h.window_high)?,
            initial_guess: s.get_or("initial_guess", h.initial_guess)?,
            growth: s.get_or("growth", h.growth)?,
            max_integrations: s.get_or("max_integrations", h.max_integrations)?,
            max_time_factor: s.get_or("max_time_factor", h.max_time_factor)?,
            engine: engine_settings(s)?,
        },
        max_failure_fraction: s.get_or("max_failure_fraction", d.max_failure_fraction)?,
    })
}

fn cmd_run(s: &Settings, verbose: bool) -> Result<()> {
    let cfg = campaign_config(s)?;
    if verbose {
        eprintln!(
            "campaign {} N={}..{} instances={} realizations={}",
            cfg.label(),
            cfg.n_min,
            cfg.n_max,
            cfg.instances_per_n,
            cfg.realizations_per_instance
        );
    }
    let result = if cfg.noise.is_some() {
        run_noisy_campaign(&cfg)?
    } else {
        run_noiseless_campaign(&cfg)?
    };
    println!("N,noise_type,mean_power,n_samples,median_T,ci_low,ci_high");
    for m in &result.estimates {
        let r = SummaryRow::new(&result.noise_type, result.mean_power, m);
        println!(
            "{},{},{},{},{},{},{}",
            r.n, r.noise_type, r.mean_power, r.n_samples, r.median_t, r.ci_low, r.ci_high
        );
    }
    if verbose {
        eprintln!(
            "mean integrations per hunt: {:.2}",
            result.mean_integrations()
        );
    }
    Ok(())
}

fn families(s: &Settings) -> Result<Vec<FitFamily>> {
    match s.raw("family").unwrap_or("both") {
        "both" => Ok(vec![FitFamily::PowerLaw, FitFamily::Exponential]),
        f => Ok(vec![f.parse()?]),
    }
}

fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let f = File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    read_summary_csv(BufReader::new(f))
}

fn fit_group(family: FitFamily, rows: &[SummaryRow]) -> Result<ScalingFit> {
    let pts: Vec<FitPoint> = rows
        .iter()
        .map(|r| FitPoint::from_median(&r.estimate()))
        .collect::<Result<_>>()?;
    fit(family, &pts)
}

fn cmd_fit(s: &Settings, summary: &Path) -> Result<()> {
    let rows = read_summary(summary)?;
    let fams = families(s)?;
    let mut out = Vec::new();
    for ((noise_type, power), group) in group_summary(&rows) {
        for &f in &fams {
            out.push(FitRow::new(&noise_type, power, &fit_group(f, &group)?));
        }
    }
    print!("{}", format_fit_table(&out));
    if let Some(path) = s.raw("out") {
        let path = PathBuf::from(path);
        write_fit_csv(BufWriter::new(File::create(&path)?), &out)?;
        write_json(
            &path.with_extension("manifest.json"),
            &manifest("fit", s, json!({ "summary": summary, "fits": path })),
        )?;
    }
    Ok(())
}

fn group_label(noise_type: &str, power: f64) -> String {
    if noise_type == "none" {
        "none".into()
    } else {
        format!("{noise_type}_p{power}")
    }
}

/// Points per unit N in the fitted-curve columns.
const CURVE_DENSITY: usize = 10;

fn figure_csv(rows: &[SummaryRow], fits: &[ScalingFit]) -> String {
    let mut text = String::from("N,median,ci_low,ci_high");
    for f in fits {
        text.push_str(&format!(",fit_{}", f.family.label()));
    }
    text.push('\n');
    let (lo, hi) = (rows[0].n, rows[rows.len() - 1].n);
    for k in 0..=(hi - lo) * CURVE_DENSITY {
        let n = lo as f64 + k as f64 / CURVE_DENSITY as f64;
        text.push_str(&format!("{n}"));
        match rows
            .iter()
            .find(|r| k % CURVE_DENSITY == 0 && r.n == lo + k / CURVE_DENSITY)
        {
            Some(r) => text.push_str(&format!(",{},{},{}", r.median_t, r.ci_low, r.ci_high)),
            None => text.push_str(",,,"),
        }
        for f in fits {
            text.push_str(&format!(",{}", f.eval(n)));
        }
        text.push('\n');
    }
    text
}

fn cmd_report(s: &Settings, records: &Path) -> Result<()> {
    let summary_path = records.join("summary.csv");
    if !summary_path.exists() {
        return Err(Error::Parse(format!(
            "no summary.csv under {}",
            records.display()
        )));
    }
    let rows = read_summary(&summary_path)?;
    if rows.is_empty() {
        return Err(Error::Parse(format!(
            "{} has no rows",
            summary_path.display()
        )));
    }
    let out = s
        .raw("out")
        .map_or_else(|| records.join("report"), PathBuf::from);
    fs::create_dir_all(&out)?;
    let sigma: f64 = s.get_or("sigma", 0.2)?;
    let tau: f64 = s.get_or("tau", 1.0)?;

    let mut fit_rows = Vec::new();
    let mut figures = Vec::new();
    let mut scenarios = vec![
        DecoherenceReport::new(
            "x_T22",
            DephasingParams::for_polarization(Polarization::X, 22.0, 1.0, 1.0, 0.04),
        )?,
        DecoherenceReport::new(
            "y_T35",
            DephasingParams::for_polarization(Polarization::Y, 35.0, 1.0, 1.0, 0.04),
        )?,
    ];
    for ((noise_type, power), group) in group_summary(&rows) {
        let label = group_label(&noise_type, power);
        let fits: Vec<ScalingFit> = if group.len() >= 3 {
            [FitFamily::PowerLaw, FitFamily::Exponential]
                .iter()
                .map(|&f| fit_group(f, &group))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        fit_rows.extend(fits.iter().map(|f| FitRow::new(&noise_type, power, f)));
        let name = format!("fig_{label}.csv");
        fs::write(out.join(&name), figure_csv(&group, &fits))?;
        figures.push(name);

        if let Ok(pol) = noise_type.parse::<Polarization>() {
            let last = &group[group.len() - 1];
            let params =
                DephasingParams::for_polarization(pol, last.median_t, 1.0, tau, sigma * sigma);
            scenarios.push(DecoherenceReport::new(
                &format!("{label}_N{}", last.n),
                params,
            )?);
        }
    }
    write_fit_csv(
        BufWriter::new(File::create(out.join("fits.csv"))?),
        &fit_rows,
    )?;
    write_json(
        &out.join("decoherence.json"),
        &serde_json::to_value(&scenarios)?,
    )?;
    write_json(
        &out.join("manifest.json"),
        &manifest(
            "report",
            s,
            json!({ "records": records, "figures": figures, "fits": "fits.csv", "decoherence": "decoherence.json" }),
        ),
    )?;
    print!("{}", format_fit_table(&fit_rows));
    println!("wrote {} figure files to {}", figures.len(), out.display());
    Ok(())
}

fn cmd_gap(s: &Settings, verbose: bool) -> Result<()> {
    let (lo, hi) = n_range(s, "6..8")?;
    let count: usize = s.get_or("instances", 5)?;
    let samples: usize = s.get_or("samples", 101)?;
    let master = seed(s)?;
    let engine = engine_settings(s)?;
    let out = out_path(s, "gap");
    fs::create_dir_all(&out)?;
    let mut text = String::from("N,instance,min_gap,min_gap_s,epsilon,adiabatic_time\n");
    for n in lo..=hi {
        for (i, inst) in campaign_instances(master, n, count)?.iter().enumerate() {
            let spec = build_spec(inst, engine.coupling, 1.0)?.with_driver(engine.driver);
            let cfg = EigenConfig {
                seed: master.derive("gap", n as u64).derive("instance", i as u64),
                ..EigenConfig::default()
            };
            let r = spectral_report(&spec, samples, &cfg)?;
            if verbose {
                eprintln!(
                    "N={n} instance {i}: min gap {:.6} at s = {:.3}",
                    r.min_gap, r.min_gap_s
                );
            }
            text.push_str(&format!(
                "{n},{i},{},{},{},{}\n",
                r.min_gap, r.min_gap_s, r.epsilon, r.adiabatic_time
            ));
        }
    }
    fs::write(out.join("gap.csv"), &text)?;
    write_json(
        &out.join("manifest.json"),
        &manifest("gap", s, json!({ "gaps": "gap.csv" })),
    )?;
    print!("{text}");
    Ok(())
}

fn cmd_decohere(s: &Settings) -> Result<()> {
    let pol: Polarization = match s.raw("noise").unwrap_or("x") {
        "none" => return Err(Error::Parse("decohere needs a noise polarization".into())),
        p => p.parse()?,
    };
    let sigma: f64 = s.get_or("sigma", 0.2)?;
    let tau: f64 = s.get_or("tau", 1.0)?;
    let time: f64 = s.get_or("time", 22.0)?;
    let coupling: f64 = s.get_or("coupling", 1.0)?;
    let mut params = DephasingParams::for_polarization(pol, time, coupling, tau, sigma * sigma);
    params.delta_sigma = s.get_or("delta_sigma", 1)?;
    params.validate()?;
    let mut report = DecoherenceReport::new(pol.label(), params)?;
    if let Some(n) = s.get::<usize>("empirical")? {
        let noise = NoiseParams::new(s.get_or("power", 0.005)?, sigma * sigma, tau, pol)?;
        report.empirical = Some(empirical_dephasing_check(
            &noise,
            time,
            coupling,
            params.delta_sigma,
            n,
            seed(s)?,
        )?);
    }
    let value = serde_json::to_value(&report)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    if let Some(path) = s.raw("out") {
        write_json(Path::new(path), &value)?;
    }
    Ok(())
}
