//! Upper-level ACC controller.
//!
//! Four modes share one desired-acceleration output: PI speed control,
//! linear and parabolic transitional manoeuvres in the range / range-rate
//! plane, and constant-time-gap spacing control.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const G: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccConfig {
    /// Driver set speed (m/s).
    pub v_user: f64,
    /// Time gap of the constant-time-gap policy (s).
    pub h: f64,
    /// Standstill distance (m).
    pub d_min: f64,
    pub a_min_des: f64,
    pub a_max_des: f64,
    pub kp_vc: f64,
    pub ki_vc: f64,
    pub kp_lin: f64,
    pub kp_par: f64,
    pub tol_speed_linear: f64,
    pub tol_linear_parabolic: f64,
    pub tol_transitional_spacing: f64,
    /// Radar range (m).
    pub radar_range: f64,
    /// Coasting deceleration magnitude (m/s²).
    pub coast_decel: f64,
    /// Cut-in distance deficit that maps to 1 m/s² of braking (m).
    pub gamma: f64,
    /// Vertex range of the parabolic trajectory (m).
    pub r_amn: f64,
    /// Spacing control is left once the gap exceeds the active set distance
    /// by this much (m, on top of `tol_speed_linear`)...
    pub spacing_exit_margin: f64,
    /// ...continuously for this long (s).
    pub spacing_exit_hold: f64,
    /// Below this speed the controller disengages. Off when `None`.
    pub min_active_speed: Option<f64>,
}

impl Default for AccConfig {
    fn default() -> Self {
        AccConfig {
            v_user: 100.0 / 3.6,
            h: 1.1,
            d_min: 2.0,
            a_min_des: -5.0,
            a_max_des: 2.0,
            kp_vc: 0.4,
            ki_vc: 0.05,
            kp_lin: 0.3,
            kp_par: 0.5,
            tol_speed_linear: 0.5,
            tol_linear_parabolic: -30.0,
            tol_transitional_spacing: 0.5,
            radar_range: 150.0,
            coast_decel: 0.04 * G,
            gamma: 20.0,
            r_amn: 5.0,
            spacing_exit_margin: 2.0,
            spacing_exit_hold: 1.0,
            min_active_speed: None,
        }
    }
}

impl AccConfig {
    pub fn with_time_gap(h: f64) -> Self {
        AccConfig { h, ..Default::default() }
    }

    /// Range-rate time constant of the spacing law; equal to the time gap.
    pub fn tau_v(&self) -> f64 {
        self.h
    }

    /// Distance time constant of the spacing law, `gamma / tau_v`.
    pub fn tau_d(&self) -> f64 {
        self.gamma / self.tau_v()
    }

    /// Copy with the acceleration bounds replaced.
    pub fn with_limits(&self, a_min: f64, a_max: f64) -> Self {
        AccConfig { a_min_des: a_min, a_max_des: a_max, ..*self }
    }

    pub fn clamp(&self, a: f64) -> f64 {
        a.clamp(self.a_min_des, self.a_max_des)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("v_user", self.v_user),
            ("h", self.h),
            ("d_min", self.d_min),
            ("a_min_des", self.a_min_des),
            ("a_max_des", self.a_max_des),
            ("kp_vc", self.kp_vc),
            ("ki_vc", self.ki_vc),
            ("kp_lin", self.kp_lin),
            ("kp_par", self.kp_par),
            ("tol_speed_linear", self.tol_speed_linear),
            ("tol_linear_parabolic", self.tol_linear_parabolic),
            ("tol_transitional_spacing", self.tol_transitional_spacing),
            ("radar_range", self.radar_range),
            ("coast_decel", self.coast_decel),
            ("gamma", self.gamma),
            ("r_amn", self.r_amn),
            ("spacing_exit_margin", self.spacing_exit_margin),
            ("spacing_exit_hold", self.spacing_exit_hold),
        ];
        for (key, value) in finite {
            if !value.is_finite() {
                return Err(SimError::config(key, "must be finite"));
            }
        }
        let positive = [
            ("v_user", self.v_user),
            ("h", self.h),
            ("d_min", self.d_min),
            ("coast_decel", self.coast_decel),
            ("gamma", self.gamma),
            ("r_amn", self.r_amn),
        ];
        for (key, value) in positive {
            if value <= 0.0 {
                return Err(SimError::config(key, format!("{key} must be positive")));
            }
        }
        if self.a_min_des >= 0.0 {
            return Err(SimError::config("a_min_des", "a_min_des must be negative"));
        }
        if self.a_max_des <= 0.0 {
            return Err(SimError::config("a_max_des", "a_max_des must be positive"));
        }
        if self.radar_range <= self.d_min {
            return Err(SimError::config("radar_range", "radar_range must exceed d_min"));
        }
        if self.spacing_exit_hold < 0.0 {
            return Err(SimError::config("spacing_exit_hold", "must be non-negative"));
        }
        if let Some(v) = self.min_active_speed {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::config("min_active_speed", "must be a non-negative speed"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlMode {
    VelocityControl,
    LinearTransition,
    ParabolicTransition,
    SpacingControl,
}

impl ControlMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlMode::VelocityControl => "velocity",
            ControlMode::LinearTransition => "linear",
            ControlMode::ParabolicTransition => "parabolic",
            ControlMode::SpacingControl => "spacing",
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "velocity" => Ok(ControlMode::VelocityControl),
            "linear" => Ok(ControlMode::LinearTransition),
            "parabolic" => Ok(ControlMode::ParabolicTransition),
            "spacing" => Ok(ControlMode::SpacingControl),
            other => Err(format!("unknown control mode {other:?}")),
        }
    }
}

/// Radar reading of the vehicle ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    /// Bumper-to-bumper range (m).
    pub range: f64,
    /// Range rate, preceding speed minus own speed (m/s).
    pub range_rate: f64,
    pub valid: bool,
}

impl RangeMeasurement {
    pub fn no_target() -> Self {
        RangeMeasurement { range: f64::INFINITY, range_rate: 0.0, valid: false }
    }

    /// Measurement of a target at `range`, valid only inside `(0, radar_range]`.
    pub fn observe(range: f64, range_rate: f64, radar_range: f64) -> Self {
        let valid = range > 0.0 && range <= radar_range;
        RangeMeasurement { range, range_rate, valid }
    }
}

/// PI speed control with conditional-integration anti-windup.
///
/// Returns the clamped command and the updated error integral. The integral
/// is left untouched whenever the command saturates.
pub fn speed_control(v: f64, cfg: &AccConfig, integral: f64, dt: f64) -> (f64, f64) {
    let err = cfg.v_user - v;
    let raw = cfg.kp_vc * err + cfg.ki_vc * integral;
    let a_des = cfg.clamp(raw);
    let integral = if a_des == raw { integral + err * dt } else { integral };
    (a_des, integral)
}

/// Desired headway RH of the constant-time-gap policy.
pub fn desired_headway(v: f64, cfg: &AccConfig) -> f64 {
    cfg.d_min + cfg.h * v
}

/// Slope T of the switching line.
pub fn switching_line_slope(cfg: &AccConfig, rh: f64) -> Result<f64> {
    if cfg.radar_range <= rh {
        return Err(SimError::Geometry(format!(
            "radar range {} m does not exceed desired headway {rh} m",
            cfg.radar_range
        )));
    }
    Ok(((cfg.radar_range - rh) / (2.0 * cfg.coast_decel)).sqrt())
}

pub fn switching_line(range_rate: f64, rh: f64, slope: f64) -> f64 {
    -slope * range_rate + rh
}

/// P law pulling the operating point onto the switching line: positive when
/// the gap is larger than the line asks for at the current range rate.
pub fn linear_transition_accel(range: f64, r_line: f64, cfg: &AccConfig) -> f64 {
    cfg.clamp(cfg.kp_lin * (range - r_line))
}

/// Range on the constant-deceleration parabola for a given range rate.
/// Uses the magnitude of the deceleration floor so the vertex sits at
/// `range_rate == 0`.
pub fn parabola_range(range_rate: f64, cfg: &AccConfig) -> f64 {
    cfg.r_amn + range_rate * range_rate / (2.0 * cfg.a_min_des.abs())
}

/// Constant deceleration at the floor, corrected by a P term on the distance
/// to the parabola.
pub fn parabolic_transition_accel(range: f64, r_parabola: f64, cfg: &AccConfig) -> f64 {
    cfg.clamp(cfg.a_min_des + cfg.kp_par * (range - r_parabola))
}

/// Spacing law on range and range rate with set distance `d_min + h_eff * v`.
pub fn spacing_control_accel(range: f64, range_rate: f64, v: f64, cfg: &AccConfig, h_eff: f64) -> f64 {
    let d_set = cfg.d_min + h_eff * v;
    let tau_v = cfg.tau_v();
    let tau_d = cfg.tau_d();
    cfg.clamp(range_rate / tau_v - (d_set - range) / (tau_v * tau_d))
}

/// Switching-line range for the current operating point. Falls back to the
/// headway itself when the geometry is degenerate.
fn line_range(meas: &RangeMeasurement, v: f64, cfg: &AccConfig) -> f64 {
    let rh = desired_headway(v, cfg);
    let slope = switching_line_slope(cfg, rh).unwrap_or(0.0);
    switching_line(meas.range_rate, rh, slope)
}

/// One mode transition. `drop_target` is the spacing-exit hysteresis verdict,
/// tracked by [`ModeMachine`].
pub fn mode_transition(
    mode: ControlMode,
    meas: &RangeMeasurement,
    v: f64,
    cfg: &AccConfig,
    drop_target: bool,
) -> ControlMode {
    use ControlMode::*;

    if !meas.valid {
        return VelocityControl;
    }
    let rh = desired_headway(v, cfg);
    let off_line = meas.range - line_range(meas, v, cfg);
    let near_set_point = (meas.range - rh).abs() < cfg.tol_transitional_spacing;

    match mode {
        VelocityControl => {
            if off_line < cfg.tol_speed_linear {
                LinearTransition
            } else {
                VelocityControl
            }
        }
        LinearTransition => {
            if off_line < cfg.tol_linear_parabolic {
                ParabolicTransition
            } else if near_set_point {
                SpacingControl
            } else {
                LinearTransition
            }
        }
        ParabolicTransition => {
            if near_set_point {
                SpacingControl
            } else if off_line >= 0.0 && meas.range_rate > 0.0 {
                LinearTransition
            } else {
                ParabolicTransition
            }
        }
        SpacingControl => {
            if drop_target {
                VelocityControl
            } else {
                SpacingControl
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringStabilityVerdict {
    /// `tau_v <= h (1 + h / (2 tau_d))`.
    pub spacing_law_stable: bool,
    pub spacing_law_margin: f64,
    /// `h >= 2 tau_lag`.
    pub time_gap_stable: bool,
    pub time_gap_margin: f64,
}

impl StringStabilityVerdict {
    pub fn is_stable(&self) -> bool {
        self.spacing_law_stable && self.time_gap_stable
    }
}

pub fn string_stability_check(cfg: &AccConfig, tau_lag: f64) -> StringStabilityVerdict {
    string_stability_of(cfg.tau_v(), cfg.tau_d(), cfg.h, tau_lag)
}

/// Design-time check with explicit spacing-law time constants.
pub fn string_stability_of(tau_v: f64, tau_d: f64, h: f64, tau_lag: f64) -> StringStabilityVerdict {
    let bound = h * (1.0 + h / (2.0 * tau_d));
    let time_gap_margin = h - 2.0 * tau_lag;
    StringStabilityVerdict {
        spacing_law_stable: tau_v <= bound,
        spacing_law_margin: bound - tau_v,
        time_gap_stable: time_gap_margin >= 0.0,
        time_gap_margin,
    }
}

/// Mode state plus the spacing-exit hysteresis timer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMachine {
    pub mode: ControlMode,
    far_for: f64,
}

impl Default for ModeMachine {
    fn default() -> Self {
        ModeMachine { mode: ControlMode::VelocityControl, far_for: 0.0 }
    }
}

impl ModeMachine {
    /// Advance one step. `h_eff` sets the spacing the exit hysteresis is
    /// measured against.
    pub fn advance(&mut self, meas: &RangeMeasurement, v: f64, cfg: &AccConfig, h_eff: f64, dt: f64) -> ControlMode {
        let mut drop_target = false;
        if self.mode == ControlMode::SpacingControl && meas.valid {
            let d_set = cfg.d_min + h_eff * v;
            if meas.range - d_set > cfg.tol_speed_linear + cfg.spacing_exit_margin {
                self.far_for += dt;
            } else {
                self.far_for = 0.0;
            }
            drop_target = self.far_for >= cfg.spacing_exit_hold - 1e-9;
        }
        let next = mode_transition(self.mode, meas, v, cfg, drop_target);
        if next != self.mode {
            self.far_for = 0.0;
        }
        self.mode = next;
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub a_des: f64,
    pub mode: ControlMode,
    /// Desired headway at the nominal time gap (m).
    pub headway: f64,
}

/// Per-vehicle controller state: mode machine and PI integral.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AccController {
    pub machine: ModeMachine,
    integral: f64,
}

impl AccController {
    pub fn mode(&self) -> ControlMode {
        self.machine.mode
    }

    /// Run the mode machine and the active control law for one step.
    ///
    /// `spacing_rate` is the range rate fed to the spacing law; it differs
    /// from the radar value only when connected add-ons modify it.
    pub fn update(
        &mut self,
        meas: &RangeMeasurement,
        v: f64,
        cfg: &AccConfig,
        h_eff: f64,
        spacing_rate: f64,
        dt: f64,
    ) -> ControlOutput {
        let headway = desired_headway(v, cfg);
        if let Some(v_min) = cfg.min_active_speed {
            if v < v_min {
                self.machine = ModeMachine::default();
                self.integral = 0.0;
                return ControlOutput { a_des: 0.0, mode: ControlMode::VelocityControl, headway };
            }
        }

        let previous = self.machine.mode;
        let mode = self.machine.advance(meas, v, cfg, h_eff, dt);
        if mode == ControlMode::VelocityControl && previous != ControlMode::VelocityControl {
            self.integral = 0.0;
        }

        let a_des = match mode {
            ControlMode::VelocityControl => {
                let (a, integral) = speed_control(v, cfg, self.integral, dt);
                self.integral = integral;
                a
            }
            ControlMode::LinearTransition => {
                let r_line = line_range(meas, v, cfg);
                linear_transition_accel(meas.range, r_line, cfg)
            }
            ControlMode::ParabolicTransition => {
                let r_parabola = parabola_range(meas.range_rate, cfg);
                parabolic_transition_accel(meas.range, r_parabola, cfg)
            }
            ControlMode::SpacingControl => spacing_control_accel(meas.range, spacing_rate, v, cfg, h_eff),
        };
        ControlOutput { a_des, mode, headway }
    }
}
