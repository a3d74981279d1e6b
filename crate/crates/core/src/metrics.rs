//! Comfort, safety and throughput figures derived from traces.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scenario::ScenarioKind;
use crate::trace::SimTrace;

/// Slack on amplification ratios before a platoon is called string unstable.
pub const STRING_STABILITY_SLACK: f64 = 0.02;

/// Oscillatory analysis window (s).
pub const OSCILLATORY_WINDOW: (f64, f64) = (130.0, 210.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Velocity,
    Acceleration,
}

pub fn rms(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let sum: f64 = samples.iter().map(|a| a * a).sum();
    Some((sum / samples.len() as f64).sqrt())
}

/// Half the peak-to-peak excursion.
pub fn half_range(samples: &[f64]) -> Option<f64> {
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    (lo <= hi).then_some(0.5 * (hi - lo))
}

fn series(trace: &SimTrace, vehicle: usize, signal: Signal) -> Result<&[f64]> {
    let s = trace.vehicles.get(vehicle).ok_or(SimError::NoSuchVehicle(vehicle))?;
    Ok(match signal {
        Signal::Velocity => &s.v,
        Signal::Acceleration => &s.a,
    })
}

fn windowed<'a>(trace: &SimTrace, samples: &'a [f64], t0: f64, t1: f64) -> Result<&'a [f64]> {
    let w = trace.window(t0, t1);
    if w.is_empty() {
        return Err(SimError::EmptyWindow { t0, t1 });
    }
    Ok(&samples[w])
}

/// RMS of actual acceleration over `[t0, t1]`.
pub fn rms_acceleration(trace: &SimTrace, vehicle: usize, t0: f64, t1: f64) -> Result<f64> {
    let a = series(trace, vehicle, Signal::Acceleration)?;
    Ok(rms(windowed(trace, a, t0, t1)?).expect("non-empty window"))
}

/// `R - RH` at every step, RH taken at the active time gap. Positive means
/// more room than desired.
pub fn spacing_error(trace: &SimTrace, vehicle: usize) -> Result<Vec<f64>> {
    if vehicle == 0 {
        return Err(SimError::InvalidState("the lead vehicle has no predecessor".into()));
    }
    let s = trace.vehicles.get(vehicle).ok_or(SimError::NoSuchVehicle(vehicle))?;
    Ok(s.range.iter().zip(&s.headway).map(|(r, rh)| r - rh).collect())
}

pub fn oscillation_amplitude(trace: &SimTrace, vehicle: usize, signal: Signal, t0: f64, t1: f64) -> Result<f64> {
    let x = series(trace, vehicle, signal)?;
    Ok(half_range(windowed(trace, x, t0, t1)?).expect("non-empty window"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Amplification {
    /// `ratios[k]` compares vehicle `k + 1` with vehicle `k`; `None` when
    /// the upstream amplitude is zero.
    pub ratios: Vec<Option<f64>>,
    pub string_stable: bool,
    pub warnings: Vec<String>,
}

impl Amplification {
    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().flatten().copied().reduce(f64::max)
    }
}

/// Amplitude ratio of each vehicle over the one ahead of it.
pub fn string_stability_ratios(trace: &SimTrace, signal: Signal, t0: f64, t1: f64) -> Result<Amplification> {
    let amplitudes = (0..trace.n_vehicles())
        .map(|i| oscillation_amplitude(trace, i, signal, t0, t1))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let ratios: Vec<Option<f64>> = amplitudes
        .windows(2)
        .enumerate()
        .map(|(k, pair)| {
            if pair[0] > 0.0 {
                Some(pair[1] / pair[0])
            } else {
                warnings.push(format!("vehicle {k} does not oscillate; ratio {}/{k} skipped", k + 1));
                None
            }
        })
        .collect();
    let string_stable = ratios.iter().flatten().all(|&r| r <= 1.0 + STRING_STABILITY_SLACK);
    Ok(Amplification { ratios, string_stable, warnings })
}

/// Lane throughput in vehicles per hour at speed `v` under a constant time
/// gap policy with car length `car_len`.
pub fn traffic_flow_capacity(v: f64, h: f64, d_min: f64, car_len: f64) -> f64 {
    3600.0 * v / (d_min + h * v + car_len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleMetrics {
    pub vehicle: usize,
    pub rms_accel: f64,
    /// Minimum range over the window; NaN for the lead.
    pub min_range: f64,
    pub min_spacing_error: f64,
    pub accel_amplitude: f64,
    pub velocity_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub window: (f64, f64),
    pub vehicles: Vec<VehicleMetrics>,
    pub accel_amplification: Amplification,
    pub velocity_amplification: Amplification,
    pub string_stable: bool,
    /// Throughput at the lead's pre-manoeuvre speed (veh/lane/h).
    pub tfc: f64,
    pub collision: bool,
}

/// Default analysis window for a trace: the oscillatory plot window, or from
/// braking onset to the end of the run.
pub fn default_window(trace: &SimTrace) -> (f64, f64) {
    match trace.meta.kind {
        ScenarioKind::Oscillatory => OSCILLATORY_WINDOW,
        ScenarioKind::Braking => (trace.meta.onset, trace.t.last().copied().unwrap_or(trace.meta.onset)),
    }
}

fn fold_min(xs: &[f64]) -> f64 {
    xs.iter().copied().filter(|x| !x.is_nan()).fold(f64::INFINITY, f64::min)
}

impl MetricsReport {
    pub fn compute(trace: &SimTrace, window: (f64, f64)) -> Result<Self> {
        let (t0, t1) = window;
        let w = trace.window(t0, t1);
        if w.is_empty() {
            return Err(SimError::EmptyWindow { t0, t1 });
        }
        let vehicles = (0..trace.n_vehicles())
            .map(|i| {
                let s = &trace.vehicles[i];
                let (min_range, min_spacing_error) = if i == 0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let e = spacing_error(trace, i)?;
                    (fold_min(&s.range[w.clone()]), fold_min(&e[w.clone()]))
                };
                Ok(VehicleMetrics {
                    vehicle: i,
                    rms_accel: rms_acceleration(trace, i, t0, t1)?,
                    min_range,
                    min_spacing_error,
                    accel_amplitude: oscillation_amplitude(trace, i, Signal::Acceleration, t0, t1)?,
                    velocity_amplitude: oscillation_amplitude(trace, i, Signal::Velocity, t0, t1)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let accel_amplification = string_stability_ratios(trace, Signal::Acceleration, t0, t1)?;
        let velocity_amplification = string_stability_ratios(trace, Signal::Velocity, t0, t1)?;

        let cruise_idx = trace.window(0.0, trace.meta.onset).end.saturating_sub(1);
        let cruise = trace.vehicles[0].v[cruise_idx];
        let tfc = traffic_flow_capacity(cruise, trace.meta.h, trace.meta.d_min, trace.meta.vehicle_len);

        let collision = trace.collision.is_some()
            || trace.vehicles.iter().skip(1).any(|s| s.range.iter().any(|&r| r <= 0.0));

        Ok(MetricsReport {
            window,
            string_stable: accel_amplification.string_stable,
            vehicles,
            accel_amplification,
            velocity_amplification,
            tfc,
            collision,
        })
    }

    pub fn last_vehicle(&self) -> &VehicleMetrics {
        self.vehicles.last().expect("at least two vehicles")
    }

    /// Smallest range of any follower inside the window.
    pub fn min_range(&self) -> f64 {
        self.vehicles.iter().skip(1).map(|v| v.min_range).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_oscillatory_scenario, ControllerKind};
    use crate::trace::{TraceMeta, TraceRow};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn synthetic(dt: f64, duration: f64, f: impl Fn(usize, f64) -> (f64, f64)) -> SimTrace {
        let spec = build_oscillatory_scenario(1, ControllerKind::Acc, 1.1).unwrap();
        let n = 3;
        let steps = (duration / dt).round() as usize;
        let mut trace = SimTrace::new(TraceMeta::from_spec(&spec), n, steps + 1);
        for k in 0..=steps {
            let t = k as f64 * dt;
            let rows: Vec<TraceRow> = (0..n)
                .map(|i| {
                    let (v, a) = f(i, t);
                    TraceRow {
                        x: -(i as f64) * 30.0,
                        v,
                        a,
                        a_des: a,
                        range: if i == 0 { f64::NAN } else { 25.0 },
                        headway: if i == 0 { f64::NAN } else { 29.5 },
                        ..Default::default()
                    }
                })
                .collect();
            trace.push_step(t, &rows);
        }
        trace
    }

    #[test]
    fn rms_of_constant_zero() {
        let trace = synthetic(0.01, 20.0, |_, _| (20.0, 0.0));
        assert_eq!(rms_acceleration(&trace, 1, 0.0, 20.0).unwrap(), 0.0);
        assert_eq!(oscillation_amplitude(&trace, 1, Signal::Velocity, 0.0, 20.0).unwrap(), 0.0);
    }

    #[test]
    fn rms_of_sinusoid() {
        let amp = 0.3;
        let w = 2.0 * PI / 10.0;
        let trace = synthetic(0.01, 40.0, |_, t| (20.0, amp * (w * t).sin()));
        // two whole periods, half-open
        let r = rms_acceleration(&trace, 0, 0.0, 19.995).unwrap();
        assert!((r - amp / 2f64.sqrt()).abs() < 1e-4, "{r}");
        let a = oscillation_amplitude(&trace, 0, Signal::Acceleration, 0.0, 20.0).unwrap();
        assert!((a - amp).abs() < 1e-6);
    }

    #[test]
    fn spacing_error_sign() {
        let trace = synthetic(0.1, 1.0, |_, _| (20.0, 0.0));
        let e = spacing_error(&trace, 1).unwrap();
        assert!(e.iter().all(|&x| (x + 4.5).abs() < 1e-12));
        assert!(spacing_error(&trace, 0).is_err());
        assert!(spacing_error(&trace, 9).is_err());
    }

    #[test]
    fn empty_window_is_an_error() {
        let trace = synthetic(0.1, 1.0, |_, _| (20.0, 0.0));
        assert!(matches!(rms_acceleration(&trace, 1, 5.0, 6.0), Err(SimError::EmptyWindow { .. })));
        assert!(oscillation_amplitude(&trace, 1, Signal::Acceleration, 5.0, 6.0).is_err());
    }

    #[test]
    fn identical_motion_has_unit_ratios() {
        let trace = synthetic(0.01, 30.0, |_, t| (20.0 + (0.5 * t).sin(), 0.5 * (0.5 * t).cos()));
        let amp = string_stability_ratios(&trace, Signal::Acceleration, 0.0, 30.0).unwrap();
        assert!(amp.ratios.iter().all(|r| (r.unwrap() - 1.0).abs() < 1e-12));
        assert!(amp.string_stable);
    }

    #[test]
    fn growing_motion_is_unstable_and_flat_lead_is_skipped() {
        let trace = synthetic(0.01, 30.0, |i, t| (20.0, 1.1f64.powi(i as i32) * t.sin()));
        let amp = string_stability_ratios(&trace, Signal::Acceleration, 0.0, 30.0).unwrap();
        assert!(!amp.string_stable);
        assert!((amp.max_ratio().unwrap() - 1.1).abs() < 1e-3);

        let trace = synthetic(0.01, 30.0, |i, t| (20.0, if i == 0 { 0.0 } else { t.sin() }));
        let amp = string_stability_ratios(&trace, Signal::Acceleration, 0.0, 30.0).unwrap();
        assert_eq!(amp.ratios[0], None);
        assert_eq!(amp.warnings.len(), 1);
    }

    #[test]
    fn tfc_examples() {
        let v = 22.22;
        let acc = traffic_flow_capacity(v, 1.1, 2.0, 4.3);
        let cacc = traffic_flow_capacity(v, 0.6, 2.0, 4.3);
        assert!((acc - 2602.0).abs() < 1.0, "{acc}");
        assert!((cacc - 4074.0).abs() < 1.0, "{cacc}");
        let bound = traffic_flow_capacity(v, 0.0, 2.0, 4.3);
        assert!((bound - 12697.0).abs() < 1.0, "{bound}");
    }

    proptest! {
        #[test]
        fn tfc_decreasing_in_time_gap(v in 1.0f64..40.0, h1 in 0.1f64..3.0, dh in 0.01f64..1.0) {
            prop_assert!(traffic_flow_capacity(v, h1, 2.0, 4.3) > traffic_flow_capacity(v, h1 + dh, 2.0, 4.3));
        }

        #[test]
        fn periodic_metrics_shift_invariant(period in 5.0f64..20.0, amp in 0.05f64..1.0, shift in 1usize..3) {
            let w = 2.0 * PI / period;
            let trace = synthetic(0.01, 100.0, |_, t| (20.0, amp * (w * t).sin()));
            let base_rms = rms_acceleration(&trace, 0, 0.0, 2.0 * period).unwrap();
            let s = shift as f64 * period;
            let shifted_rms = rms_acceleration(&trace, 0, s, s + 2.0 * period).unwrap();
            prop_assert!((base_rms - shifted_rms).abs() <= 0.01 * base_rms);
            let base_amp = oscillation_amplitude(&trace, 0, Signal::Acceleration, 0.0, 2.0 * period).unwrap();
            let shifted_amp = oscillation_amplitude(&trace, 0, Signal::Acceleration, s, s + 2.0 * period).unwrap();
            prop_assert!((base_amp - shifted_amp).abs() <= 0.01 * base_amp);
        }
    }
}
