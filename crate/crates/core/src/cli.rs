//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{with_axis, ScenarioConfig};
use crate::error::{Error, Result};
use crate::planning::{self, Search3dSpace};
use crate::sim::{self, Summary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lissajous-swarm",
    version,
    about = "Plan, validate, run and sweep swarm monitoring scenarios"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the sensing and collision bounds of a scenario.
    Plan {
        config: PathBuf,
        /// Also search vertical amplitude, frequency and phase for a 3D knot.
        #[arg(long)]
        search_3d: bool,
        /// Print JSON only.
        #[arg(long)]
        json: bool,
    },
    /// Check a scenario file and report every problem found.
    Validate { config: PathBuf },
    /// Simulate a scenario and write trace.csv, events.json and summary.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario over a grid of values of one numeric field and seeds.
    Sweep {
        config: PathBuf,
        /// Dotted field path, e.g. `swarm.inactive`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        /// Comma-separated seeds or an inclusive range `a..b`.
        #[arg(long, default_value = "0")]
        seeds: String,
        /// Directory for runs.csv and aggregate.csv; the aggregate goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `"1..5"` (inclusive) or `"1,2,7"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || {
        Error::Config(vec![format!(
            "seeds: expected `a..b` or a comma list (got `{text}`)"
        )])
    };
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::GuaranteeRefused(_) => EXIT_REFUSED,
        _ => EXIT_INVALID,
    }
}

/// Runs the parsed command, writing human output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Plan {
            config,
            search_3d,
            json,
        } => plan(config, *search_3d, *json, out),
        Command::Validate { config } => {
            ScenarioConfig::from_path(config)?;
            writeln!(out, "{}: ok", config.display())?;
            Ok(())
        }
        Command::Run {
            config,
            out: dir,
            seed,
        } => {
            let mut cfg = ScenarioConfig::from_path(config)?;
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            ensure_writable(dir)?;
            let output = sim::run(&cfg)?;
            output.write(dir)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&output.summary)?)?;
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            out: dir,
        } => {
            let cfg = ScenarioConfig::from_path(config)?;
            let seeds = parse_seeds(seeds)?;
            if let Some(d) = dir {
                ensure_writable(d)?;
            }
            let rows = sweep(&cfg, axis, values, &seeds)?;
            let runs_csv = runs_table(&rows)?;
            let agg_csv = aggregate_table(&rows)?;
            match dir {
                Some(d) => {
                    fs::write(d.join("runs.csv"), runs_csv)?;
                    fs::write(d.join("aggregate.csv"), &agg_csv)?;
                    writeln!(out, "{}", String::from_utf8_lossy(&agg_csv))?;
                }
                None => out.write_all(&agg_csv)?,
            }
            Ok(())
        }
    }
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PlanReport {
    #[serde(flatten)]
    guarantees: planning::GuaranteeReport,
    r_s: f64,
    encumbrance_2d: f64,
    p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    search_3d: Option<planning::Search3dResult>,
}

fn plan(path: &Path, search: bool, json: bool, out: &mut dyn Write) -> Result<()> {
    let cfg = ScenarioConfig::from_path(path)?;
    let g = sim::guarantee_report(&cfg);
    let c = &cfg.curve;
    let m = &cfg.mission;
    let search_3d = if search {
        Some(planning::search_3d_params(
            c.amp_x,
            c.amp_y,
            c.freq_x,
            c.freq_y,
            cfg.n(),
            &Search3dSpace::default(),
        )?)
    } else {
        None
    };
    let report = PlanReport {
        r_s: cfg.r_s(),
        encumbrance_2d: planning::max_encumbrance_2d(c.amp_x, c.amp_y, c.freq_x, c.freq_y, cfg.n()),
        p: cfg.p(),
        guarantees: g,
        search_3d,
    };
    if !json {
        let g = &report.guarantees;
        writeln!(out, "scenario        {}", cfg.name)?;
        writeln!(
            out,
            "robots          {} (p = {}, kappa = {})",
            cfg.n(),
            report.p,
            m.kappa
        )?;
        writeln!(out, "coverage bound  {:.3} m", g.coverage_bound)?;
        writeln!(
            out,
            "detection bound {:.3} m (inflated {:.3} m)",
            g.detection_bound, g.detection_bound_inflated
        )?;
        writeln!(out, "sensing radius  {:.3} m", report.r_s)?;
        writeln!(out, "encumbrance 2D  {:.3} m", report.encumbrance_2d)?;
        if let Some(r3) = g.collision_bound_3d {
            writeln!(out, "encumbrance 3D  {r3:.3} m")?;
        }
        writeln!(out, "T_max           {:.2} s", g.t_max)?;
        match g.min_robots {
            Some(k) => writeln!(out, "min robots      {k}")?,
            None => writeln!(out, "min robots      n/a")?,
        }
        writeln!(out, "stable p        {:?}", g.stable_p)?;
        if let Some(s) = &report.search_3d {
            writeln!(
                out,
                "3D search       C = {}, c = {}, phi = {:.4}, separation {:.3} m ({} knots evaluated)",
                s.params.amp_z, s.params.freq_z, s.params.phase, s.separation, s.evaluated
            )?;
        }
        if g.ok() {
            writeln!(out, "guarantees      ok")?;
        } else {
            for v in &g.violated {
                writeln!(out, "violated        {v}")?;
            }
        }
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub summary: Summary,
}

/// Summary fields reported per run and aggregated per value.
const SWEEP_FIELDS: [&str; 12] = [
    "min_distance",
    "min_distance_xy",
    "min_adjacent_xy",
    "max_adjacent_xy",
    "max_cos",
    "final_spacing_error",
    "max_tracking_error",
    "final_coverage",
    "detected",
    "mean_detection_time",
    "max_detection_time",
    "safety_engagements",
];

fn field(s: &Summary, name: &str) -> f64 {
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    match name {
        "min_distance" => s.min_distance,
        "min_distance_xy" => s.min_distance_xy,
        "min_adjacent_xy" => s.min_adjacent_xy,
        "max_adjacent_xy" => s.max_adjacent_xy,
        "max_cos" => s.max_cos,
        "final_spacing_error" => s.final_spacing_error,
        "max_tracking_error" => s.max_tracking_error,
        "final_coverage" => s.final_coverage,
        "detected" => s.detected as f64,
        "mean_detection_time" => opt(s.mean_detection_time),
        "max_detection_time" => opt(s.max_detection_time),
        "safety_engagements" => s.safety_engagements as f64,
        _ => unreachable!("unknown sweep field {name}"),
    }
}

/// Runs every (value, seed) pair in parallel; rows come back sorted by
/// (value, seed).
pub fn sweep(
    base: &ScenarioConfig,
    axis: &str,
    values: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    // validate the axis once up front so a bad name fails fast
    let configs: Vec<(f64, ScenarioConfig)> = values
        .iter()
        .map(|&v| with_axis(base, axis, v).map(|c| (v, c)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(f64, u64, &ScenarioConfig)> = configs
        .iter()
        .flat_map(|(v, c)| seeds.iter().map(move |&s| (*v, s, c)))
        .collect();
    let mut rows = jobs
        .into_par_iter()
        .map(|(value, seed, cfg)| {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            sim::run(&cfg).map(|o| SweepRow {
                value,
                seed,
                summary: o.summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

pub fn runs_table(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["value".to_string(), "seed".to_string()];
    header.extend(SWEEP_FIELDS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![format!("{:?}", r.value), r.seed.to_string()];
        rec.extend(
            SWEEP_FIELDS
                .iter()
                .map(|f| format!("{:?}", field(&r.summary, f))),
        );
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Mean and sample standard deviation, ignoring NaN entries.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

pub fn aggregate_table(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["value".to_string(), "runs".to_string()];
    for f in SWEEP_FIELDS {
        header.push(format!("{f}_mean"));
        header.push(format!("{f}_std"));
    }
    w.write_record(&header)?;
    for group in rows.chunk_by(|a, b| a.value == b.value) {
        let mut rec = vec![format!("{:?}", group[0].value), group.len().to_string()];
        for f in SWEEP_FIELDS {
            let xs: Vec<f64> = group.iter().map(|r| field(&r.summary, f)).collect();
            let (m, s) = mean_std(&xs);
            rec.push(format!("{m:?}"));
            rec.push(format!("{s:?}"));
        }
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                Error::Config(list) | Error::GuaranteeRefused(list) => {
                    let head = if matches!(e, Error::GuaranteeRefused(_)) {
                        "guarantee check failed (set overrides.allow_guarantee_violation to run anyway):"
                    } else {
                        "invalid configuration:"
                    };
                    let _ = writeln!(err, "{head}");
                    for m in list {
                        let _ = writeln!(err, "  {m}");
                    }
                }
                other => {
                    let _ = writeln!(err, "error: {other}");
                }
            }
            exit_code(&e)
        }
    }
}
