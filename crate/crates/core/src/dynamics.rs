//! First-order lag vehicle model.
//!
//! Commanded acceleration reaches the wheels through a lag with time constant
//! `tau_lag`. The lag is discretized exactly, and speed/position are advanced
//! with the trapezoidal rule.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Front-bumper position along the lane (m).
    pub x: f64,
    /// Speed (m/s), never negative.
    pub v: f64,
    /// Actual acceleration (m/s²).
    pub a: f64,
    /// Vehicle length (m).
    pub len: f64,
}

impl VehicleState {
    pub fn new(x: f64, v: f64, len: f64) -> Result<Self> {
        let state = VehicleState { x, v, a: 0.0, len };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.v.is_finite() && self.a.is_finite() && self.len.is_finite())
        {
            return Err(SimError::InvalidState(format!("non-finite state {self:?}")));
        }
        if self.v < 0.0 {
            return Err(SimError::InvalidState(format!("negative speed {}", self.v)));
        }
        if self.len <= 0.0 {
            return Err(SimError::InvalidState(format!("vehicle length {} must be positive", self.len)));
        }
        Ok(())
    }

    /// Rear-bumper position.
    pub fn rear(&self) -> f64 {
        self.x - self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagModel {
    pub tau_lag: f64,
}

impl Default for LagModel {
    fn default() -> Self {
        LagModel { tau_lag: 0.5 }
    }
}

impl LagModel {
    pub fn new(tau_lag: f64) -> Result<Self> {
        if !(tau_lag.is_finite() && tau_lag > 0.0) {
            return Err(SimError::config("tau_lag", "must be positive"));
        }
        Ok(LagModel { tau_lag })
    }
}

/// Advance one vehicle by `dt` under commanded acceleration `a_des`.
pub fn step(state: &VehicleState, a_des: f64, model: &LagModel, dt: f64) -> Result<VehicleState> {
    if !(a_des.is_finite() && dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidState(format!("a_des={a_des}, dt={dt}")));
    }
    state.validate()?;

    let decay = (-dt / model.tau_lag).exp();
    let mut a_next = a_des + (state.a - a_des) * decay;
    let a_mid = 0.5 * (state.a + a_next);
    let mut v_next = state.v + a_mid * dt;
    if v_next <= 0.0 {
        v_next = 0.0;
        if a_next < 0.0 {
            a_next = 0.0;
        }
    }
    let v_mid = 0.5 * (state.v + v_next);

    Ok(VehicleState {
        x: state.x + v_mid * dt,
        v: v_next,
        a: a_next,
        len: state.len,
    })
}
