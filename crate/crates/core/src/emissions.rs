//! Instantaneous CO2 emission: HBEFA-style polynomial in speed and acceleration.
//!
//! `rate = max(0, c0 + c1·v·a + c2·v·a² + c3·v + c4·v² + c5·v³)` in mg/s,
//! with `v` in m/s and `a` in m/s².

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Default for EmissionCoefficients {
    /// Average gasoline passenger car (~1.2 t).
    ///
    /// Fitted to round physical figures rather than a published table: idle
    /// around 0.52 g/s, roughly 125 g/km cruising at 50 km/h, and the
    /// inertial term sized from a ~25 % tank-to-wheel efficiency.
    fn default() -> Self {
        EmissionCoefficients {
            c0: 520.0,
            c1: 330.0,
            c2: 15.0,
            c3: 55.0,
            c4: 0.9,
            c5: 0.1,
        }
    }
}

impl EmissionCoefficients {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.c0, self.c1, self.c2, self.c3, self.c4, self.c5];
        if all.iter().any(|c| !c.is_finite()) {
            return Err("emission coefficients must be finite".into());
        }
        if self.c0 < 0.0 {
            return Err("emission coefficient c0 (idle rate) must be >= 0".into());
        }
        Ok(())
    }
}

/// CO2 emission rate in mg/s.
pub fn co2_rate(v: f64, a: f64, c: &EmissionCoefficients) -> f64 {
    let poly = c.c0 + c.c1 * v * a + c.c2 * v * a * a + c.c3 * v + c.c4 * v * v + c.c5 * v * v * v;
    poly.max(0.0)
}

/// Adds the CO2 emitted over `dt` seconds at `(v, a)` to the vehicle's total (g).
pub fn accumulate(state: &mut VehicleState, v: f64, a: f64, dt: f64, c: &EmissionCoefficients) {
    debug_assert!(dt > 0.0);
    state.cumulative_co2 += co2_rate(v, a, c) * dt / 1000.0;
}
