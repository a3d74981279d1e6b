//! Side-by-side comparison of finished runs.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use platoon_core::metrics::{default_window, MetricsReport};
use platoon_core::scenario::ScenarioSpec;
use platoon_core::trace::{SimTrace, TraceMeta};

use crate::config::parse_config;
use crate::output::{SCENARIO_FILE, TRACE_FILE};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub source: PathBuf,
    pub spec: ScenarioSpec,
    pub report: MetricsReport,
}

/// Accepts either a run directory or the trace file inside one.
fn locate(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join(TRACE_FILE), path.join(SCENARIO_FILE))
    } else {
        let dir = path.parent().unwrap_or(Path::new("."));
        (path.to_path_buf(), dir.join(SCENARIO_FILE))
    }
}

pub fn load(path: &Path) -> Result<ReportRow, CliError> {
    let (trace_path, scenario_path) = locate(path);
    let text = fs::read_to_string(&scenario_path).map_err(|source| CliError::Io { path: scenario_path.clone(), source })?;
    let spec = parse_config(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", scenario_path.display())))?
        .base;
    let file = File::open(&trace_path).map_err(|source| CliError::Io { path: trace_path.clone(), source })?;
    let trace = SimTrace::read_csv(BufReader::new(file), TraceMeta::from_spec(&spec))
        .map_err(|source| CliError::Trace { path: trace_path.clone(), source })?;
    let report = MetricsReport::compute(&trace, default_window(&trace))?;
    Ok(ReportRow { source: trace_path, spec, report })
}

/// Warnings for rows whose scenario differs from the first row's.
pub fn compatibility_warnings(rows: &[ReportRow]) -> Vec<String> {
    let Some(first) = rows.first() else { return Vec::new() };
    rows.iter()
        .skip(1)
        .filter(|r| r.spec.kind != first.spec.kind || r.spec.lead != first.spec.lead || r.spec.n_vehicles != first.spec.n_vehicles)
        .map(|r| {
            format!(
                "warning: {} is a different scenario from {}; compared anyway",
                r.source.display(),
                first.source.display()
            )
        })
        .collect()
}

pub fn render_table(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:<28} {:>6} {:>5} {:>10} {:>10} {:>9} {:>8} {:>9}\n",
        "control logic", "h [s]", "mu", "RMS a", "min R [m]", "max ratio", "stable", "TFC [v/h]"
    );
    for r in rows {
        let rep = &r.report;
        let ratio = rep.accel_amplification.max_ratio().map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let stable = match (rep.collision, rep.string_stable) {
            (true, _) => "CRASH",
            (false, true) => "yes",
            (false, false) => "no",
        };
        out += &format!(
            "{:<28} {:>6.2} {:>5.2} {:>10.3} {:>10.2} {:>9} {:>8} {:>9.0}\n",
            r.spec.controller.label(),
            r.spec.acc.h,
            r.spec.mu,
            rep.last_vehicle().rms_accel,
            rep.min_range(),
            ratio,
            stable,
            rep.tfc
        );
    }
    out
}
