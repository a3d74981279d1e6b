//! Run execution and on-disk artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use platoon_core::metrics::{default_window, MetricsReport};
use platoon_core::scenario::{self, ScenarioSpec};
use platoon_core::trace::SimTrace;
use toml::{Table, Value};

use crate::config::{render_config, OutputFormat, RunPlan};
use crate::CliError;

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const PLOT_DIR: &str = "plot";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub dir: PathBuf,
    pub report: MetricsReport,
    pub collision_t: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn run_dir(out: &Path, plan: &RunPlan) -> PathBuf {
    let dir = out.join(&plan.spec.name);
    match &plan.label {
        Some(label) => dir.join(label),
        None => dir,
    }
}

/// Simulate one plan and write the requested artifacts into `dir`.
pub fn execute(plan: &RunPlan, dir: &Path, formats: &[OutputFormat]) -> Result<RunOutcome, CliError> {
    let trace = scenario::run(&plan.spec)?;
    let report = MetricsReport::compute(&trace, default_window(&trace))?;

    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(SCENARIO_FILE);
    fs::write(&path, render_config(&plan.spec)).map_err(io_err(&path))?;

    for format in formats {
        match format {
            OutputFormat::TraceCsv => {
                let path = dir.join(TRACE_FILE);
                let out = create(&path)?;
                trace.write_csv(out).map_err(|source| CliError::Trace { path: path.clone(), source })?;
            }
            OutputFormat::Summary => {
                let path = dir.join(SUMMARY_FILE);
                fs::write(&path, summary_text(&plan.spec, &trace, &report)).map_err(io_err(&path))?;
            }
            OutputFormat::PlotData => write_plot_data(&dir.join(PLOT_DIR), &trace)?,
        }
    }

    Ok(RunOutcome {
        name: plan.label.clone().map_or_else(|| plan.spec.name.clone(), |l| format!("{}/{l}", plan.spec.name)),
        dir: dir.to_path_buf(),
        report,
        collision_t: trace.collision.map(|c| c.t),
    })
}

/// Run every plan, at most `workers` at a time. Results keep plan order.
pub fn execute_all(
    plans: &[RunPlan],
    out: &Path,
    formats: &[OutputFormat],
    workers: usize,
) -> Vec<Result<RunOutcome, CliError>> {
    let next = AtomicUsize::new(0);
    let mut results: Vec<(usize, Result<RunOutcome, CliError>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers.clamp(1, plans.len().max(1)))
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(plan) = plans.get(i) else { break };
                        done.push((i, execute(plan, &run_dir(out, plan), formats)));
                    }
                    done
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("run worker panicked")).collect()
    });
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

fn float_array(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(Value::Float).collect())
}

pub fn summary_text(spec: &ScenarioSpec, trace: &SimTrace, report: &MetricsReport) -> String {
    let mut t = Table::new();
    t.insert("name".into(), Value::String(spec.name.clone()));
    t.insert("controller".into(), Value::String(spec.controller.label().into()));
    t.insert("h".into(), Value::Float(spec.acc.h));
    t.insert("mu".into(), Value::Float(spec.mu));
    t.insert("seed".into(), Value::Integer(spec.seed as i64));
    t.insert("window".into(), float_array([report.window.0, report.window.1]));
    t.insert("collision".into(), Value::Boolean(report.collision));
    if let Some(c) = trace.collision {
        t.insert("collision_t".into(), Value::Float(c.t));
        t.insert("collision_vehicle".into(), Value::Integer(c.follower as i64));
    }
    t.insert("min_range".into(), Value::Float(report.min_range()));
    t.insert("string_stable".into(), Value::Boolean(report.string_stable));
    t.insert(
        "accel_ratios".into(),
        float_array(report.accel_amplification.ratios.iter().map(|r| r.unwrap_or(f64::NAN))),
    );
    t.insert(
        "velocity_ratios".into(),
        float_array(report.velocity_amplification.ratios.iter().map(|r| r.unwrap_or(f64::NAN))),
    );
    t.insert("tfc".into(), Value::Float(report.tfc));
    t.insert("messages_sent".into(), Value::Integer(trace.messages_sent as i64));
    t.insert("messages_penalized".into(), Value::Integer(trace.messages_penalized as i64));

    let mut vehicles = Table::new();
    for m in &report.vehicles {
        let mut v = Table::new();
        v.insert("rms_accel".into(), Value::Float(m.rms_accel));
        v.insert("min_range".into(), Value::Float(m.min_range));
        v.insert("min_spacing_error".into(), Value::Float(m.min_spacing_error));
        v.insert("accel_amplitude".into(), Value::Float(m.accel_amplitude));
        v.insert("velocity_amplitude".into(), Value::Float(m.velocity_amplitude));
        vehicles.insert(m.vehicle.to_string(), Value::Table(v));
    }
    t.insert("vehicle".into(), Value::Table(vehicles));
    toml::to_string(&t).expect("summary table serializes")
}

fn write_series(path: &Path, column: &str, t: &[f64], x: &[f64]) -> Result<(), CliError> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "# t {column}")?;
        for (t, x) in t.iter().zip(x) {
            writeln!(out, "{t} {x}")?;
        }
        out.flush()
    };
    write().map_err(io_err(path))
}

/// Two-column `t value` files, one per plotted quantity and vehicle.
pub fn write_plot_data(dir: &Path, trace: &SimTrace) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, s) in trace.vehicles.iter().enumerate() {
        write_series(&dir.join(format!("accel_v{i}.dat")), "a", &trace.t, &s.a)?;
        write_series(&dir.join(format!("velocity_v{i}.dat")), "v", &trace.t, &s.v)?;
        if i > 0 {
            write_series(&dir.join(format!("range_v{i}.dat")), "R", &trace.t, &s.range)?;
            write_series(&dir.join(format!("spacing_error_v{i}.dat")), "spacing_error", &trace.t, &s.spacing_error)?;
        }
    }
    Ok(())
}
