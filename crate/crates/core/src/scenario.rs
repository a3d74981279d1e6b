//! Closed-loop platoon runs.
//!
//! Vehicle 0 follows an imposed speed profile; every other vehicle runs the
//! selected controller behind it. Connected vehicles additionally receive
//! V2V broadcasts from their two nearest predecessors.

use serde::{Deserialize, Serialize};

use crate::cacc::{
    braking_critical_distance, connected_rdot, grip_accel_limits, modified_time_gap, AddOnConfig, GripConfig,
    GripTracker, Predecessors,
};
use crate::connectivity::{Channel, ChannelConfig, DelayedInbox, V2vMessage};
use crate::controller::{AccConfig, AccController, ControlMode, RangeMeasurement};
use crate::dynamics::{self, LagModel, VehicleState};
use crate::error::{Result, SimError};
use crate::trace::{SimTrace, TraceMeta, TraceRow};

const KMH: f64 = 1.0 / 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Braking,
    Oscillatory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    /// Radar-only commercial ACC.
    Acc,
    /// ACC plus V2V and grip add-ons.
    Cacc,
}

impl ControllerKind {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerKind::Acc => "Commercial ACC",
            ControllerKind::Cacc => "Connected ACC with Add-Ons",
        }
    }

    pub fn is_connected(&self) -> bool {
        matches!(self, ControllerKind::Cacc)
    }
}

/// Imposed motion of the platoon head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase", deny_unknown_fields)]
pub enum LeadProfile {
    /// Cruise, then brake at constant deceleration down to a lower speed.
    Braking {
        cruise_speed: f64,
        t_braking: f64,
        target_speed: f64,
        deceleration: f64,
    },
    /// Constant speed until `t_start`, then a sine wave around it.
    Oscillatory {
        mean_speed: f64,
        amplitude: f64,
        period: f64,
        t_start: f64,
    },
}

impl LeadProfile {
    pub fn braking() -> Self {
        LeadProfile::Braking {
            cruise_speed: 90.0 * KMH,
            t_braking: 150.0,
            target_speed: 30.0 * KMH,
            deceleration: -4.5,
        }
    }

    pub fn oscillatory(period: f64) -> Self {
        LeadProfile::Oscillatory { mean_speed: 80.0 * KMH, amplitude: 4.0 * KMH, period, t_start: 130.0 }
    }

    pub fn initial_speed(&self) -> f64 {
        match *self {
            LeadProfile::Braking { cruise_speed, .. } => cruise_speed,
            LeadProfile::Oscillatory { mean_speed, .. } => mean_speed,
        }
    }

    /// Time at which the lead stops cruising.
    pub fn onset(&self) -> f64 {
        match *self {
            LeadProfile::Braking { t_braking, .. } => t_braking,
            LeadProfile::Oscillatory { t_start, .. } => t_start,
        }
    }

    /// Distance travelled, speed and acceleration at time `t`.
    pub fn kinematics(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            LeadProfile::Braking { cruise_speed: v0, t_braking, target_speed, deceleration } => {
                if t <= t_braking {
                    return (v0 * t, v0, 0.0);
                }
                let t_stop = (target_speed - v0) / deceleration;
                let x_brake = v0 * t_braking;
                let tau = t - t_braking;
                if tau < t_stop {
                    (x_brake + v0 * tau + 0.5 * deceleration * tau * tau, v0 + deceleration * tau, deceleration)
                } else {
                    let x_end = x_brake + 0.5 * (v0 + target_speed) * t_stop;
                    (x_end + target_speed * (tau - t_stop), target_speed, 0.0)
                }
            }
            LeadProfile::Oscillatory { mean_speed, amplitude, period, t_start } => {
                if t <= t_start {
                    return (mean_speed * t, mean_speed, 0.0);
                }
                let w = 2.0 * std::f64::consts::PI / period;
                let phase = w * (t - t_start);
                let x = mean_speed * t + amplitude / w * (1.0 - phase.cos());
                (x, mean_speed + amplitude * phase.sin(), amplitude * w * phase.cos())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LeadProfile::Braking { cruise_speed, t_braking, target_speed, deceleration } => {
                if !(deceleration < 0.0) {
                    return Err(SimError::config("deceleration", "braking deceleration must be negative"));
                }
                if !(cruise_speed > 0.0 && target_speed >= 0.0 && target_speed <= cruise_speed) {
                    return Err(SimError::config(
                        "target_speed",
                        "need 0 <= target_speed <= cruise_speed and cruise_speed > 0",
                    ));
                }
                if !(t_braking >= 0.0) {
                    return Err(SimError::config("t_braking", "t_braking must be non-negative"));
                }
            }
            LeadProfile::Oscillatory { mean_speed, amplitude, period, t_start } => {
                if !(amplitude >= 0.0) {
                    return Err(SimError::config("amplitude", "amplitude must be non-negative"));
                }
                if !(period > 0.0) {
                    return Err(SimError::config("period", "period must be positive"));
                }
                if !(mean_speed - amplitude >= 0.0) {
                    return Err(SimError::config("mean_speed", "speed must stay non-negative"));
                }
                if !(t_start >= 0.0) {
                    return Err(SimError::config("t_start", "t_start must be non-negative"));
                }
            }
        }
        Ok(())
    }
}

/// Declarative description of one platoon run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    /// Platoon size including the lead.
    pub n_vehicles: usize,
    pub controller: ControllerKind,
    /// Road friction coefficient.
    pub mu: f64,
    /// Initial bumper-to-bumper gap between consecutive vehicles (m).
    pub initial_gap: f64,
    pub duration: f64,
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_len")]
    pub vehicle_len: f64,
    #[serde(default = "default_tau_lag")]
    pub tau_lag: f64,
    pub lead: LeadProfile,
    #[serde(default)]
    pub acc: AccConfig,
    #[serde(default)]
    pub addons: AddOnConfig,
    #[serde(default)]
    pub grip: GripConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
}

fn default_dt() -> f64 {
    0.01
}

fn default_len() -> f64 {
    4.3
}

fn default_tau_lag() -> f64 {
    LagModel::default().tau_lag
}

impl ScenarioSpec {
    pub fn h(&self) -> f64 {
        self.acc.h
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles < 2 {
            return Err(SimError::config("n_vehicles", "need at least 2 vehicles"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SimError::config("duration", "duration must be positive"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.duration) {
            return Err(SimError::config("dt", "dt must be positive and not exceed duration"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(SimError::config("mu", "mu must be positive"));
        }
        if !(self.initial_gap.is_finite() && self.initial_gap > 0.0) {
            return Err(SimError::config("initial_gap", "initial_gap must be positive"));
        }
        if !(self.vehicle_len.is_finite() && self.vehicle_len > 0.0) {
            return Err(SimError::config("vehicle_len", "vehicle_len must be positive"));
        }
        LagModel::new(self.tau_lag)?;
        self.lead.validate()?;
        self.acc.validate()?;
        self.addons.validate()?;
        self.grip.validate()?;
        self.channel.validate()?;
        Ok(())
    }
}

/// The three-vehicle approach-and-brake run.
pub fn build_braking_scenario(mu: f64, controller: ControllerKind, h: f64) -> ScenarioSpec {
    let wet = if mu < 0.65 { "wet" } else { "dry" };
    ScenarioSpec {
        name: format!("braking-{wet}-{}-h{h}", controller_slug(controller)),
        kind: ScenarioKind::Braking,
        n_vehicles: 3,
        controller,
        mu,
        initial_gap: 140.0,
        duration: 200.0,
        seed: 1,
        dt: default_dt(),
        vehicle_len: default_len(),
        tau_lag: default_tau_lag(),
        lead: LeadProfile::braking(),
        acc: AccConfig::with_time_gap(h),
        addons: AddOnConfig::default(),
        grip: GripConfig::default(),
        channel: ChannelConfig::default(),
    }
}

/// The eight-vehicle sine-wave run; `variant` 1 has a 40 s period, 2 has 20 s.
pub fn build_oscillatory_scenario(variant: u8, controller: ControllerKind, h: f64) -> Result<ScenarioSpec> {
    let period = match variant {
        1 => 40.0,
        2 => 20.0,
        _ => return Err(SimError::config("variant", format!("unknown oscillatory variant {variant}"))),
    };
    Ok(ScenarioSpec {
        name: format!("oscillatory-{variant}-{}-h{h}", controller_slug(controller)),
        kind: ScenarioKind::Oscillatory,
        n_vehicles: 8,
        controller,
        mu: 0.8,
        initial_gap: 40.0,
        duration: 210.0,
        seed: 1,
        dt: default_dt(),
        vehicle_len: default_len(),
        tau_lag: default_tau_lag(),
        lead: LeadProfile::oscillatory(period),
        acc: AccConfig::with_time_gap(h),
        addons: AddOnConfig::default(),
        grip: GripConfig::default(),
        channel: ChannelConfig::default(),
    })
}

fn controller_slug(kind: ControllerKind) -> &'static str {
    match kind {
        ControllerKind::Acc => "acc",
        ControllerKind::Cacc => "cacc",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    /// Index of the rear vehicle of the colliding pair.
    pub follower: usize,
    pub range: f64,
}

/// Per-follower state carried across steps.
struct Follower {
    ctrl: AccController,
    grip: GripTracker,
    inbox: DelayedInbox,
}

fn radar(ahead: &VehicleState, ego: &VehicleState, radar_range: f64) -> RangeMeasurement {
    RangeMeasurement::observe(ahead.rear() - ego.x, ahead.v - ego.v, radar_range)
}

/// Run a scenario to completion or to the first collision.
pub fn run(spec: &ScenarioSpec) -> Result<SimTrace> {
    spec.validate()?;
    let n = spec.n_vehicles;
    let dt = spec.dt;
    let lag = LagModel::new(spec.tau_lag)?;
    let steps = (spec.duration / dt).round() as usize;
    let connected = spec.controller.is_connected();

    let v0 = spec.lead.initial_speed();
    let mut states = Vec::with_capacity(n);
    let mut x = 0.0;
    for i in 0..n {
        if i > 0 {
            x -= spec.vehicle_len + spec.initial_gap;
        }
        states.push(VehicleState::new(x, v0, spec.vehicle_len)?);
    }
    let lead_origin = states[0].x;

    let mut followers: Vec<Follower> = (0..n)
        .map(|_| Follower {
            ctrl: AccController::default(),
            grip: GripTracker::new(spec.mu, &spec.grip),
            inbox: DelayedInbox::new(),
        })
        .collect();
    let mut channel = Channel::new(spec.channel, spec.seed)?;
    let mut next_broadcast = vec![0.0f64; n];

    let mut trace = SimTrace::new(TraceMeta::from_spec(spec), n, steps + 1);
    let mut collision = None;
    let mut commands = vec![0.0; n];
    let mut rows = vec![TraceRow::default(); n];

    for k in 0..=steps {
        let t = k as f64 * dt;

        // Lead row.
        let (_, _, a_lead) = spec.lead.kinematics(t);
        commands[0] = a_lead;
        rows[0] = TraceRow::lead(&states[0]);

        for i in 1..n {
            let ego = states[i];
            let meas = radar(&states[i - 1], &ego, spec.acc.radar_range);
            let f = &mut followers[i];

            let (cfg, h_eff, rdot_mod) = if connected {
                let grip = f.grip.observe(ego.a, &spec.grip);
                let (lo, hi) = grip_accel_limits(&grip, &spec.grip, spec.acc.a_min_des, spec.acc.a_max_des);
                let cfg = spec.acc.with_limits(lo, hi);

                let predecessors = if i == 1 {
                    Predecessors::One { preceding: f.inbox.latest_snapshot(0, t) }
                } else {
                    Predecessors::Two { leading: f.inbox.latest_snapshot(i - 2, t) }
                };
                let rate = connected_rdot(&ego, &predecessors, &meas, &spec.addons).rdot_mod;

                let mut h_eff = spec.acc.h;
                if meas.valid {
                    let in_spacing = f.ctrl.mode() == ControlMode::SpacingControl;
                    let brake_rate = if in_spacing { rate } else { meas.range_rate };
                    let mu = if grip.available { grip.mu } else { spec.grip.mu_norm };
                    let d_brak = braking_critical_distance(ego.v, brake_rate, mu, lo, &spec.grip);
                    let rh = spec.acc.d_min + spec.acc.h * ego.v;
                    h_eff = modified_time_gap(d_brak, rh, ego.v, spec.acc.h, spec.acc.d_min);
                }
                (cfg, h_eff, rate)
            } else {
                (spec.acc, spec.acc.h, meas.range_rate)
            };

            let out = f.ctrl.update(&meas, ego.v, &cfg, h_eff, rdot_mod, dt);
            commands[i] = out.a_des;
            let applied_rate = if out.mode == ControlMode::SpacingControl { rdot_mod } else { meas.range_rate };
            rows[i] = TraceRow::follower(&ego, out.a_des, out.mode, &meas, applied_rate, spec.acc.d_min, h_eff);
        }

        if connected {
            for j in 0..n {
                if t + 1e-9 < next_broadcast[j] {
                    continue;
                }
                next_broadcast[j] = t + spec.channel.msg_period;
                let s = states[j];
                let msg = V2vMessage { sender: j, t_sent: t, x: s.x, v: s.v, a: s.a, len: s.len };
                for receiver in &mut followers[(j + 1)..n.min(j + 3)] {
                    channel.send(msg, &mut receiver.inbox);
                }
            }
        }

        trace.push_step(t, &rows);

        if k == steps || collision.is_some() {
            break;
        }

        // Advance.
        let t_next = (k + 1) as f64 * dt;
        let (dx, v, a) = spec.lead.kinematics(t_next);
        states[0] = VehicleState { x: lead_origin + dx, v, a, len: states[0].len };
        for i in 1..n {
            states[i] = dynamics::step(&states[i], commands[i], &lag, dt)?;
        }
        for i in 1..n {
            let range = states[i - 1].rear() - states[i].x;
            if range <= 0.0 {
                collision = Some(CollisionEvent { t: t_next, follower: i, range });
                break;
            }
        }
    }

    trace.collision = collision;
    trace.messages_sent = channel.sent();
    trace.messages_penalized = channel.penalized();
    Ok(trace)
}
