//! Per-step simulation traces and their CSV form.
//!
//! Column order is fixed:
//! `t,vehicle,x,v,a,a_des,mode,R,Rdot,Rdot_mod,RH,h_eff,spacing_error`.
//! One row per vehicle per step, steps in time order and vehicles in
//! platoon order within a step. Quantities that do not apply to the lead
//! vehicle are left empty.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::controller::{ControlMode, RangeMeasurement};
use crate::dynamics::VehicleState;
use crate::scenario::{CollisionEvent, ControllerKind, ScenarioKind, ScenarioSpec};

pub const CSV_HEADER: [&str; 13] = [
    "t",
    "vehicle",
    "x",
    "v",
    "a",
    "a_des",
    "mode",
    "R",
    "Rdot",
    "Rdot_mod",
    "RH",
    "h_eff",
    "spacing_error",
];

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: u64, reason: String },
}

/// Scenario facts needed to interpret a trace on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub name: String,
    pub kind: ScenarioKind,
    pub controller: ControllerKind,
    pub h: f64,
    pub mu: f64,
    pub seed: u64,
    pub dt: f64,
    pub d_min: f64,
    pub vehicle_len: f64,
    /// Time the lead manoeuvre starts (s).
    pub onset: f64,
}

impl TraceMeta {
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        TraceMeta {
            name: spec.name.clone(),
            kind: spec.kind,
            controller: spec.controller,
            h: spec.acc.h,
            mu: spec.mu,
            seed: spec.seed,
            dt: spec.dt,
            d_min: spec.acc.d_min,
            vehicle_len: spec.vehicle_len,
            onset: spec.lead.onset(),
        }
    }
}

/// One vehicle at one step. Follower-only fields are NaN for the lead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub x: f64,
    pub v: f64,
    pub a: f64,
    pub a_des: f64,
    pub mode: Option<ControlMode>,
    pub range: f64,
    pub range_rate: f64,
    pub rdot_mod: f64,
    pub headway: f64,
    pub h_eff: f64,
    pub spacing_error: f64,
}

impl Default for TraceRow {
    fn default() -> Self {
        TraceRow {
            x: f64::NAN,
            v: f64::NAN,
            a: f64::NAN,
            a_des: f64::NAN,
            mode: None,
            range: f64::NAN,
            range_rate: f64::NAN,
            rdot_mod: f64::NAN,
            headway: f64::NAN,
            h_eff: f64::NAN,
            spacing_error: f64::NAN,
        }
    }
}

impl TraceRow {
    pub fn lead(s: &VehicleState) -> Self {
        TraceRow { x: s.x, v: s.v, a: s.a, a_des: s.a, ..Default::default() }
    }

    pub fn follower(
        s: &VehicleState,
        a_des: f64,
        mode: ControlMode,
        meas: &RangeMeasurement,
        rdot_mod: f64,
        d_min: f64,
        h_eff: f64,
    ) -> Self {
        let headway = d_min + h_eff * s.v;
        TraceRow {
            x: s.x,
            v: s.v,
            a: s.a,
            a_des,
            mode: Some(mode),
            range: meas.range,
            range_rate: meas.range_rate,
            rdot_mod,
            headway,
            h_eff,
            spacing_error: meas.range - headway,
        }
    }
}

/// Column store for one vehicle.
#[derive(Debug, Clone, Default)]
pub struct VehicleSeries {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub a_des: Vec<f64>,
    pub mode: Vec<Option<ControlMode>>,
    pub range: Vec<f64>,
    pub range_rate: Vec<f64>,
    pub rdot_mod: Vec<f64>,
    pub headway: Vec<f64>,
    pub h_eff: Vec<f64>,
    pub spacing_error: Vec<f64>,
}

impl VehicleSeries {
    fn with_capacity(n: usize) -> Self {
        VehicleSeries {
            x: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            a_des: Vec::with_capacity(n),
            mode: Vec::with_capacity(n),
            range: Vec::with_capacity(n),
            range_rate: Vec::with_capacity(n),
            rdot_mod: Vec::with_capacity(n),
            headway: Vec::with_capacity(n),
            h_eff: Vec::with_capacity(n),
            spacing_error: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, r: &TraceRow) {
        self.x.push(r.x);
        self.v.push(r.v);
        self.a.push(r.a);
        self.a_des.push(r.a_des);
        self.mode.push(r.mode);
        self.range.push(r.range);
        self.range_rate.push(r.range_rate);
        self.rdot_mod.push(r.rdot_mod);
        self.headway.push(r.headway);
        self.h_eff.push(r.h_eff);
        self.spacing_error.push(r.spacing_error);
    }

    pub fn row(&self, k: usize) -> TraceRow {
        TraceRow {
            x: self.x[k],
            v: self.v[k],
            a: self.a[k],
            a_des: self.a_des[k],
            mode: self.mode[k],
            range: self.range[k],
            range_rate: self.range_rate[k],
            rdot_mod: self.rdot_mod[k],
            headway: self.headway[k],
            h_eff: self.h_eff[k],
            spacing_error: self.spacing_error[k],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub meta: TraceMeta,
    pub t: Vec<f64>,
    pub vehicles: Vec<VehicleSeries>,
    pub collision: Option<CollisionEvent>,
    pub messages_sent: u64,
    pub messages_penalized: u64,
}

fn same_f64(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

impl SimTrace {
    pub fn new(meta: TraceMeta, n_vehicles: usize, capacity: usize) -> Self {
        SimTrace {
            meta,
            t: Vec::with_capacity(capacity),
            vehicles: (0..n_vehicles).map(|_| VehicleSeries::with_capacity(capacity)).collect(),
            collision: None,
            messages_sent: 0,
            messages_penalized: 0,
        }
    }

    pub fn push_step(&mut self, t: f64, rows: &[TraceRow]) {
        debug_assert_eq!(rows.len(), self.vehicles.len());
        self.t.push(t);
        for (series, row) in self.vehicles.iter_mut().zip(rows) {
            series.push(row);
        }
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    /// Bit-for-bit equality of every recorded sample.
    pub fn same_bits(&self, other: &SimTrace) -> bool {
        self.meta == other.meta
            && self.collision == other.collision
            && same_f64(&self.t, &other.t)
            && self.vehicles.len() == other.vehicles.len()
            && self.vehicles.iter().zip(&other.vehicles).all(|(a, b)| {
                same_f64(&a.x, &b.x)
                    && same_f64(&a.v, &b.v)
                    && same_f64(&a.a, &b.a)
                    && same_f64(&a.a_des, &b.a_des)
                    && a.mode == b.mode
                    && same_f64(&a.range, &b.range)
                    && same_f64(&a.range_rate, &b.range_rate)
                    && same_f64(&a.rdot_mod, &b.rdot_mod)
                    && same_f64(&a.headway, &b.headway)
                    && same_f64(&a.h_eff, &b.h_eff)
                    && same_f64(&a.spacing_error, &b.spacing_error)
            })
    }

    /// Step indices with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let eps = 1e-9;
        let start = self.t.partition_point(|&t| t < t0 - eps);
        let end = self.t.partition_point(|&t| t <= t1 + eps);
        start..end.max(start)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(CSV_HEADER)?;
        let mut record: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
        for (k, &t) in self.t.iter().enumerate() {
            for (i, series) in self.vehicles.iter().enumerate() {
                let r = series.row(k);
                record.clear();
                record.push(fmt_f64(t));
                record.push(i.to_string());
                record.push(fmt_f64(r.x));
                record.push(fmt_f64(r.v));
                record.push(fmt_f64(r.a));
                record.push(fmt_f64(r.a_des));
                record.push(r.mode.map(|m| m.as_str().to_string()).unwrap_or_default());
                record.push(fmt_f64(r.range));
                record.push(fmt_f64(r.range_rate));
                record.push(fmt_f64(r.rdot_mod));
                record.push(fmt_f64(r.headway));
                record.push(fmt_f64(r.h_eff));
                record.push(fmt_f64(r.spacing_error));
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parse a trace written by [`SimTrace::write_csv`]. Collision and
    /// channel counters are not part of the CSV and come back empty.
    pub fn read_csv<R: Read>(input: R, meta: TraceMeta) -> Result<SimTrace, TraceError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(TraceError::Format { line: 1, reason: format!("unexpected header {header:?}") });
        }
        let mut trace = SimTrace::new(meta, 0, 0);
        for (n, record) in reader.records().enumerate() {
            let record = record?;
            let line = n as u64 + 2;
            let bad = |reason: String| TraceError::Format { line, reason };
            let num = |idx: usize| -> Result<f64, TraceError> {
                parse_f64(&record[idx]).ok_or_else(|| bad(format!("bad number {:?} in {}", &record[idx], CSV_HEADER[idx])))
            };
            let t = num(0)?;
            let vehicle: usize = record[1].parse().map_err(|_| bad(format!("bad vehicle index {:?}", &record[1])))?;
            let mode = match &record[6] {
                "" => None,
                s => Some(s.parse::<ControlMode>().map_err(bad)?),
            };
            let row = TraceRow {
                x: num(2)?,
                v: num(3)?,
                a: num(4)?,
                a_des: num(5)?,
                mode,
                range: num(7)?,
                range_rate: num(8)?,
                rdot_mod: num(9)?,
                headway: num(10)?,
                h_eff: num(11)?,
                spacing_error: num(12)?,
            };
            if vehicle == 0 {
                trace.t.push(t);
            } else if trace.t.last().is_none_or(|&last| last != t) {
                return Err(bad(format!("vehicle {vehicle} row out of step order")));
            }
            if vehicle == trace.vehicles.len() && trace.t.len() == 1 {
                trace.vehicles.push(VehicleSeries::default());
            }
            let Some(series) = trace.vehicles.get_mut(vehicle) else {
                return Err(bad(format!("unexpected vehicle index {vehicle}")));
            };
            if series.x.len() + 1 != trace.t.len() {
                return Err(bad(format!("vehicle {vehicle} row out of step order")));
            }
            series.push(&row);
        }
        if trace.vehicles.iter().any(|s| s.x.len() != trace.t.len()) {
            return Err(TraceError::Format { line: 0, reason: "truncated final step".into() });
        }
        Ok(trace)
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    if s.is_empty() {
        Some(f64::NAN)
    } else {
        s.parse().ok()
    }
}
