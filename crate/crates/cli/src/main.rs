//! `loadcast` command-line driver.
//!
//! Every command writes into a fresh output directory that holds a
//! `manifest.json` with the resolved configuration, input digests and output
//! digests. Without `--load` the commands run on the synthetic building from
//! the `[gen]` section.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 run failure
//! (including a run in which no forecaster issued).

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use loadcast::calendar::HolidaySet;
use loadcast::engine::{adaptation_report, run_configured, Dataset, EngineConfig, ForecasterSpec, KeepForecasts};
use loadcast::ev::{ev_study, ForecastSource, PerfectForecast, StoredForecasts, WeeklyPersistence};
use loadcast::io::{
    export_simulation, gen_building_load, gen_temperature, ingest, load_stats, write_series_csv, Manifest, RunDir,
    LOAD_HEADER, TEMPERATURE_HEADER,
};
use loadcast::sweep::{architecture_sweep, sweep_csv, sweep_table, timings_csv};
use loadcast::timeseries::{build_features, monthly_correlation_report, SECONDS_PER_WEEK};
use loadcast::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "loadcast",
    version,
    about = "Sliding-window load forecasting and EV charging simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic building load, temperature and holiday set.
    GenData(Common),
    /// Monthly correlation of every input feature with the load.
    Correlate(Common),
    /// Rolling day-ahead forecasts with metrics for every configured forecaster.
    SimulateForecast(Common),
    /// Grid search over network depth and width.
    Sweep(Common),
    /// Controlled and uncontrolled EV charging against the grid limit.
    EvStudy(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; must be absent or empty unless --overwrite is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    overwrite: bool,
    /// Load CSV (`timestamp,power_w`); overrides `[data] load`.
    #[arg(long)]
    load: Option<PathBuf>,
    /// Temperature CSV (`timestamp,temp_c`).
    #[arg(long)]
    temperature: Option<PathBuf>,
    /// Holiday file with one `YYYY-MM-DD` per line.
    #[arg(long)]
    holidays: Option<PathBuf>,
}

/// A run that finished without producing results.
#[derive(Debug)]
struct EmptyRun(String);

impl std::fmt::Display for EmptyRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for EmptyRun {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Config(_) | Error::StepRatio { .. } => 2,
                Error::Parse { .. }
                | Error::Io { .. }
                | Error::Coverage { .. }
                | Error::AllMissing
                | Error::EmptyInput(_) => 3,
                _ => 4,
            };
        }
    }
    4
}

fn execute(command: Command) -> anyhow::Result<()> {
    let (name, common) = match &command {
        Command::GenData(c) => ("gen-data", c),
        Command::Correlate(c) => ("correlate", c),
        Command::SimulateForecast(c) => ("simulate-forecast", c),
        Command::Sweep(c) => ("sweep", c),
        Command::EvStudy(c) => ("ev-study", c),
    };
    let mut config = RunConfig::load(common.config.as_deref())?;
    config.apply_seed(common.seed);
    for (flag, slot) in [
        (&common.load, &mut config.data.load),
        (&common.temperature, &mut config.data.temperature),
        (&common.holidays, &mut config.data.holidays),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    config.engine.validate()?;
    config.gen.validate()?;

    let mut out = RunDir::create(&common.out, common.overwrite)?;
    let echo = serde_json::to_value(&config).context("serializing the configuration")?;
    let mut manifest = Manifest::new(name, config.seed(), echo);
    if let Some(path) = &common.config {
        manifest.add_input(path)?;
    }

    let result = match command {
        Command::GenData(_) => gen_data(&config, &mut out, &mut manifest),
        Command::Correlate(_) => correlate(&config, &mut out, &mut manifest),
        Command::SimulateForecast(_) => simulate_forecast(&config, &mut out, &mut manifest),
        Command::Sweep(_) => sweep(&config, &mut out, &mut manifest),
        Command::EvStudy(_) => ev(&config, &mut out, &mut manifest),
    };
    match result {
        Ok(()) => {
            let dir = out.commit(manifest)?;
            println!("wrote {}", dir.display());
            Ok(())
        }
        Err(e) if e.downcast_ref::<EmptyRun>().is_some() => {
            manifest.notes.push(e.to_string());
            out.commit(manifest)?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

fn generated_holidays(config: &RunConfig) -> HolidaySet {
    if config.data.national_holidays {
        HolidaySet::german_national(config.gen_years())
    } else {
        HolidaySet::default()
    }
}

/// Reads the configured files or generates the synthetic building.
fn dataset(config: &RunConfig, out: &mut RunDir, manifest: &mut Manifest) -> anyhow::Result<Dataset> {
    let data = &config.data;
    match &data.load {
        Some(load) => {
            let (dataset, report) = ingest(load, data.temperature.as_deref(), data.holidays.as_deref(), data.step_s)?;
            for path in [Some(load), data.temperature.as_ref(), data.holidays.as_ref()]
                .into_iter()
                .flatten()
            {
                manifest.add_input(path)?;
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            manifest.notes.extend(report.warnings.iter().cloned());
            out.write_json("quality.json", &report)?;
            Ok(dataset)
        }
        None => {
            if data.temperature.is_some() || data.holidays.is_some() {
                return Err(Error::Config("temperature or holiday files need a load file".into()).into());
            }
            let holidays = generated_holidays(config);
            let load = gen_building_load(&config.gen, &holidays)?;
            let temperature = gen_temperature(config.gen.start, config.gen.days, config.gen.step_s, config.gen.seed)?;
            manifest.notes.push("synthetic input from the [gen] section".into());
            Ok(Dataset::new(load, temperature, holidays)?)
        }
    }
}

fn gen_data(config: &RunConfig, out: &mut RunDir, _: &mut Manifest) -> anyhow::Result<()> {
    let holidays = generated_holidays(config);
    let load = gen_building_load(&config.gen, &holidays)?;
    let temperature = gen_temperature(config.gen.start, config.gen.days, config.gen.step_s, config.gen.seed)?;
    let mut buf = Vec::new();
    write_series_csv(&mut buf, LOAD_HEADER, &load)?;
    out.write("load.csv", &buf)?;
    buf.clear();
    write_series_csv(&mut buf, TEMPERATURE_HEADER, &temperature)?;
    out.write("temperature.csv", &buf)?;
    out.write("holidays.txt", holidays.to_text().as_bytes())?;
    let stats = load_stats(&load);
    out.write_json("stats.json", &stats)?;
    println!(
        "{} steps, mean {:.2} kW, max {:.2} kW, base {:.2} kW",
        load.len(),
        stats.mean_kw,
        stats.max_kw,
        stats.base_kw
    );
    Ok(())
}

fn correlate(config: &RunConfig, out: &mut RunDir, manifest: &mut Manifest) -> anyhow::Result<()> {
    let data = dataset(config, out, manifest)?;
    let from = data.load.start.plus(SECONDS_PER_WEEK);
    let steps = data
        .load
        .len()
        .checked_sub((SECONDS_PER_WEEK / data.load.step_seconds) as usize)
        .filter(|&n| n > 1)
        .ok_or(Error::EmptyInput("load series shorter than eight days"))?;
    let features = build_features(&data.load, &data.temperature, &data.holidays, from, steps)?;
    let report = monthly_correlation_report(&features)?;
    out.write("correlation.csv", report.to_csv().as_bytes())?;
    out.write_json("correlation.json", &report)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn simulate_forecast(config: &RunConfig, out: &mut RunDir, manifest: &mut Manifest) -> anyhow::Result<()> {
    let data = dataset(config, out, manifest)?;
    let run = run_configured(&data, &config.engine)?;
    let active = export_simulation(out, &run, &data)?;
    if !config.adaptation.events.is_empty() && active > 0 {
        let report = adaptation_report(&run, &config.adaptation.events, &config.adaptation.thresholds)?;
        out.write_json("adaptation.json", &report)?;
    }
    for log in &run.forecasters {
        match loadcast::metrics::aggregate(&log.reports) {
            Ok(a) => println!(
                "{:<12} issued {:>6}  MAE {:>8.1} W  RMSE {:>8.1} W  MASE {}",
                log.name,
                a.issuances,
                a.mae_w,
                a.rmse_w,
                a.mase.map_or("-".into(), |m| format!("{m:.3}"))
            ),
            Err(_) => println!("{:<12} never issued", log.name),
        }
    }
    if active == 0 {
        return Err(EmptyRun("no forecaster issued a forecast".into()).into());
    }
    Ok(())
}

fn sweep(config: &RunConfig, out: &mut RunDir, manifest: &mut Manifest) -> anyhow::Result<()> {
    let data = dataset(config, out, manifest)?;
    let cells = architecture_sweep(&data, &config.engine, &config.sweep)?;
    out.write("sweep.csv", sweep_csv(&cells).as_bytes())?;
    let table = sweep_table(&cells);
    out.write("sweep_table.txt", table.as_bytes())?;
    out.write_unstable("sweep_timings.csv", timings_csv(&cells).as_bytes())?;
    print!("{table}");
    if cells
        .iter()
        .all(|c| matches!(c.outcome, loadcast::sweep::CellOutcome::Failed { .. }))
    {
        return Err(EmptyRun("every sweep cell failed".into()).into());
    }
    Ok(())
}

fn ev(config: &RunConfig, out: &mut RunDir, manifest: &mut Manifest) -> anyhow::Result<()> {
    let data = dataset(config, out, manifest)?;
    let stored;
    let source: &dyn ForecastSource = match config.ev.forecast.as_str() {
        "perfect" => &PerfectForecast(&data.load),
        "persistence" => &WeeklyPersistence(&data.load),
        spec => {
            let spec: ForecasterSpec = spec.parse().map_err(|e| anyhow!("[ev] forecast: {e}"))?;
            let engine = EngineConfig {
                forecasters: vec![spec],
                keep_forecasts: KeepForecasts::All,
                ..config.engine.clone()
            };
            let run = run_configured(&data, &engine)?;
            stored = StoredForecasts::from_log(&run.forecasters[0]);
            if stored.is_empty() {
                return Err(EmptyRun(format!("{spec} issued no forecast to schedule with")).into());
            }
            manifest
                .notes
                .push(format!("{} stored forecasts from {spec}", stored.len()));
            &stored
        }
    };
    let study = ev_study(&data.load, &data.holidays, source, &config.ev.study)?;
    out.write("ev_scenarios.csv", study.scenarios_csv().as_bytes())?;
    out.write("ev_table.csv", study.table_csv().as_bytes())?;
    let text = study.table_text();
    out.write("ev_table.txt", text.as_bytes())?;
    out.write("ev_sessions.csv", study.sessions_csv().as_bytes())?;
    out.write("ev_outcomes.csv", study.outcomes_csv().as_bytes())?;
    print!("{text}");
    Ok(())
}
