//! Connected add-ons layered on the unmodified ACC.
//!
//! V2V data from the two nearest predecessors reshapes the range rate fed to
//! spacing control, and a road-grip estimate tightens the acceleration
//! bounds and can lengthen the time gap.

use serde::{Deserialize, Serialize};

use crate::connectivity::Snapshot;
use crate::controller::{RangeMeasurement, G};
use crate::dynamics::VehicleState;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AddOnConfig {
    /// Time-to-collision threshold against the leading vehicle (s).
    pub ttc_lim: f64,
    /// Range-rate normalization, the road speed limit (m/s).
    pub n1: f64,
    /// Inverse-TTC normalization (1/s). Defaults to `1 / ttc_lim`.
    pub n2: Option<f64>,
    /// Dead-reckon V2V snapshots forward by their age.
    pub extrapolate: bool,
}

impl Default for AddOnConfig {
    fn default() -> Self {
        AddOnConfig { ttc_lim: 6.0, n1: 100.0 / 3.6, n2: None, extrapolate: false }
    }
}

impl AddOnConfig {
    pub fn ttc_inv_lim(&self) -> f64 {
        1.0 / self.ttc_lim
    }

    pub fn n2(&self) -> f64 {
        self.n2.unwrap_or_else(|| self.ttc_inv_lim())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ttc_lim.is_finite() && self.ttc_lim > 0.0) {
            return Err(SimError::config("ttc_lim", "ttc_lim must be positive"));
        }
        if !(self.n1.is_finite() && self.n1 > 0.0) {
            return Err(SimError::config("n1", "n1 must be positive"));
        }
        if !(self.n2().is_finite() && self.n2() > 0.0) {
            return Err(SimError::config("n2", "n2 must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripConfig {
    pub mu_min: f64,
    pub mu_norm: f64,
    pub f_at_min: f64,
    pub f_at_norm: f64,
    /// Estimated brake actuation delay (s).
    pub tau_s_delay: f64,
    pub g: f64,
    /// Whether the grip estimate exists from the first step.
    pub known_at_start: bool,
    /// Otherwise, the deceleration (m/s², positive) that must be exceeded
    /// once before an estimate appears.
    pub estimate_decel_threshold: f64,
}

impl Default for GripConfig {
    fn default() -> Self {
        GripConfig {
            mu_min: 0.2,
            mu_norm: 0.9,
            f_at_min: 4.5,
            f_at_norm: 1.0,
            tau_s_delay: 0.2,
            g: G,
            known_at_start: true,
            estimate_decel_threshold: 2.0,
        }
    }
}

impl GripConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_min > 0.0 && self.mu_min < self.mu_norm) {
            return Err(SimError::config("mu_min", "need 0 < mu_min < mu_norm"));
        }
        if !(self.f_at_norm > 0.0 && self.f_at_min > self.f_at_norm) {
            return Err(SimError::config("f_at_min", "need f_at_min > f_at_norm > 0"));
        }
        if !(self.tau_s_delay.is_finite() && self.tau_s_delay >= 0.0) {
            return Err(SimError::config("tau_s_delay", "tau_s_delay must be non-negative"));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(SimError::config("g", "g must be positive"));
        }
        if !(self.estimate_decel_threshold.is_finite() && self.estimate_decel_threshold >= 0.0) {
            return Err(SimError::config("estimate_decel_threshold", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripEstimate {
    pub mu: f64,
    pub available: bool,
}

impl GripEstimate {
    pub fn known(mu: f64) -> Self {
        GripEstimate { mu, available: true }
    }

    pub fn unknown() -> Self {
        GripEstimate { mu: f64::NAN, available: false }
    }
}

/// Inverse time-to-collision of the ego against the leading vehicle.
///
/// `dv_el = v_ego - v_lead`, `dx_el` is the distance from ego to leading.
pub fn ttc_inverse(dv_el: f64, dx_el: f64) -> Result<f64> {
    if !(dx_el > 0.0) {
        return Err(SimError::Geometry(format!("ego must be behind the leading vehicle, dx = {dx_el}")));
    }
    Ok(dv_el / dx_el)
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Range-rate modification below the TTC threshold.
pub fn rdot_mod_basic(rdot: f64, dv_el: f64, cfg: &AddOnConfig) -> f64 {
    (1.0 - sgn(rdot) * dv_el / cfg.n1) * rdot
}

/// Range-rate modification above the TTC threshold, with the extra
/// inverse-TTC excess term.
pub fn rdot_mod_ttc(rdot: f64, dv_el: f64, ttc_inv: f64, cfg: &AddOnConfig) -> f64 {
    (1.0 - sgn(rdot) * dv_el / cfg.n1 + (ttc_inv - cfg.ttc_inv_lim()) / cfg.n2()) * rdot
}

/// Worst case of radar and V2V range rate; ties go to the radar.
pub fn select_rdot_single_predecessor(radar_rdot: f64, v2v_rdot: f64) -> f64 {
    if v2v_rdot.abs() > radar_rdot.abs() {
        v2v_rdot
    } else {
        radar_rdot
    }
}

/// Piecewise-linear friction scaling, non-increasing in `mu`.
pub fn friction_scaling(mu: f64, cfg: &GripConfig) -> f64 {
    if mu <= cfg.mu_min {
        cfg.f_at_min
    } else if mu >= cfg.mu_norm {
        cfg.f_at_norm
    } else {
        cfg.f_at_min + (cfg.f_at_norm - cfg.f_at_min) / (cfg.mu_norm - cfg.mu_min) * (mu - cfg.mu_min)
    }
}

/// Friction-scaled braking distance needed to cancel `rdot_mod`.
pub fn braking_critical_distance(v_ego: f64, rdot_mod: f64, mu: f64, a_min_eff: f64, cfg: &GripConfig) -> f64 {
    let closing = v_ego * v_ego - (v_ego + rdot_mod).powi(2);
    friction_scaling(mu, cfg) * closing / (2.0 * a_min_eff.abs()) - cfg.tau_s_delay * rdot_mod
}

/// Time gap stretched so the set distance covers `d_brak`.
///
/// `d_brak == rh` stays on the nominal branch; at standstill the nominal gap
/// is kept as well.
pub fn modified_time_gap(d_brak: f64, rh: f64, v_ego: f64, h: f64, d_min: f64) -> f64 {
    if d_brak <= rh || v_ego <= 0.0 {
        h
    } else {
        (d_brak - d_min) / v_ego
    }
}

/// Acceleration bounds tightened to the friction limit `mu * g`.
pub fn grip_accel_limits(grip: &GripEstimate, cfg: &GripConfig, a_min: f64, a_max: f64) -> (f64, f64) {
    if grip.available {
        let limit = grip.mu * cfg.g;
        (a_min.max(-limit), a_max.min(limit))
    } else {
        (a_min, a_max)
    }
}

/// Tracks when the grip estimate becomes available to one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripTracker {
    mu: f64,
    available: bool,
}

impl GripTracker {
    pub fn new(mu: f64, cfg: &GripConfig) -> Self {
        GripTracker { mu, available: cfg.known_at_start }
    }

    /// Feed the vehicle's actual acceleration; returns the current estimate.
    pub fn observe(&mut self, a: f64, cfg: &GripConfig) -> GripEstimate {
        if !self.available && -a > cfg.estimate_decel_threshold {
            self.available = true;
        }
        self.estimate()
    }

    pub fn estimate(&self) -> GripEstimate {
        if self.available {
            GripEstimate::known(self.mu)
        } else {
            GripEstimate::unknown()
        }
    }
}

/// Position and speed carried by a snapshot, optionally dead-reckoned.
fn project(snapshot: &Snapshot, extrapolate: bool) -> (f64, f64) {
    let m = &snapshot.msg;
    if extrapolate {
        let age = snapshot.age;
        let v = (m.v + m.a * age).max(0.0);
        (m.x + 0.5 * (m.v + v) * age, v)
    } else {
        (m.x, m.v)
    }
}

/// What the connected layer knows about the vehicles ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predecessors {
    /// Only the preceding vehicle exists.
    One { preceding: Option<Snapshot> },
    /// Preceding and leading vehicles exist.
    Two { leading: Option<Snapshot> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectedRate {
    pub rdot_mod: f64,
    /// Inverse TTC against the leading vehicle, when it was computed.
    pub ttc_inv: Option<f64>,
}

/// Range rate handed to spacing control by the connected layer.
pub fn connected_rdot(
    ego: &VehicleState,
    predecessors: &Predecessors,
    radar: &RangeMeasurement,
    cfg: &AddOnConfig,
) -> ConnectedRate {
    let rdot = radar.range_rate;
    let untouched = ConnectedRate { rdot_mod: rdot, ttc_inv: None };
    match predecessors {
        Predecessors::One { preceding: Some(snap) } => {
            let (_, v_prec) = project(snap, cfg.extrapolate);
            ConnectedRate { rdot_mod: select_rdot_single_predecessor(rdot, v_prec - ego.v), ttc_inv: None }
        }
        Predecessors::Two { leading: Some(snap) } => {
            let (x_lead, v_lead) = project(snap, cfg.extrapolate);
            let dv_el = ego.v - v_lead;
            let dx_el = x_lead - snap.msg.len - ego.x;
            match ttc_inverse(dv_el, dx_el) {
                Ok(ttc_inv) if ttc_inv > cfg.ttc_inv_lim() => ConnectedRate {
                    rdot_mod: rdot_mod_ttc(rdot, dv_el, ttc_inv, cfg),
                    ttc_inv: Some(ttc_inv),
                },
                Ok(ttc_inv) => ConnectedRate { rdot_mod: rdot_mod_basic(rdot, dv_el, cfg), ttc_inv: Some(ttc_inv) },
                Err(_) => untouched,
            }
        }
        _ => untouched,
    }
}
