//! Vehicle-to-infrastructure layer: who is equipped and who hears whom.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::Point;
use crate::rng::{substream, Substream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommConfig {
    /// Radio range (m), inclusive.
    pub range_m: f64,
    /// SPaT broadcast period (s).
    pub broadcast_period_s: f64,
    /// Fraction of equipped vehicles.
    pub vehicle_penetration: f64,
    /// Fraction of equipped traffic lights.
    pub light_penetration: f64,
}

impl Default for CommConfig {
    fn default() -> Self {
        CommConfig {
            range_m: 300.0,
            broadcast_period_s: 1.0,
            vehicle_penetration: 1.0,
            light_penetration: 1.0,
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.vehicle_penetration) {
            return Err(Error::Config(format!(
                "vehicle penetration out of range: {} not in [0, 1]",
                self.vehicle_penetration
            )));
        }
        if !(0.0..=1.0).contains(&self.light_penetration) {
            return Err(Error::Config(format!(
                "light penetration out of range: {} not in [0, 1]",
                self.light_penetration
            )));
        }
        if !(self.range_m.is_finite() && self.range_m > 0.0) {
            return Err(Error::Config("comm range_m must be > 0".into()));
        }
        if !(self.broadcast_period_s.is_finite() && self.broadcast_period_s > 0.0) {
            return Err(Error::Config("comm broadcast_period_s must be > 0".into()));
        }
        Ok(())
    }
}

/// Flags exactly `round(rate * n)` of `n` items, chosen uniformly.
///
/// The chosen set for a higher rate always contains the set for a lower
/// rate under the same generator state.
pub fn assign_flags<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<bool> {
    let k = ((rate.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut flags = vec![false; n];
    for &i in &order[..k] {
        flags[i] = true;
    }
    flags
}

/// Equipment flags for vehicles and lights, each from its own substream of `seed`.
pub fn assign_equipment(
    n_vehicles: usize,
    n_lights: usize,
    config: &CommConfig,
    seed: u64,
) -> (Vec<bool>, Vec<bool>) {
    let vehicles = assign_flags(
        n_vehicles,
        config.vehicle_penetration,
        &mut substream(seed, Substream::VehicleEquipment),
    );
    let lights = assign_flags(
        n_lights,
        config.light_penetration,
        &mut substream(seed, Substream::LightEquipment),
    );
    (vehicles, lights)
}

/// Whether a SPaT broadcast from the light reaches the vehicle.
pub fn deliver_spat(
    vehicle_position: Point,
    light_position: Point,
    light_equipped: bool,
    vehicle_equipped: bool,
    config: &CommConfig,
) -> bool {
    light_equipped
        && vehicle_equipped
        && vehicle_position.distance(light_position) <= config.range_m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(veh: f64, light: f64) -> CommConfig {
        CommConfig {
            vehicle_penetration: veh,
            light_penetration: light,
            ..CommConfig::default()
        }
    }

    #[test]
    fn extreme_rates() {
        let (v, l) = assign_equipment(10, 4, &cfg(0.0, 0.0), 1);
        assert!(v.iter().chain(&l).all(|f| !f));
        let (v, l) = assign_equipment(10, 4, &cfg(1.0, 1.0), 1);
        assert!(v.iter().chain(&l).all(|f| *f));
    }

    #[test]
    fn exact_count_and_deterministic() {
        let (a, _) = assign_equipment(10, 0, &cfg(0.4, 0.0), 99);
        let (b, _) = assign_equipment(10, 0, &cfg(0.4, 0.0), 99);
        assert_eq!(a.iter().filter(|f| **f).count(), 4);
        assert_eq!(a, b);
    }

    #[test]
    fn higher_rate_is_superset() {
        let (low, _) = assign_equipment(50, 0, &cfg(0.3, 0.0), 5);
        let (high, _) = assign_equipment(50, 0, &cfg(0.7, 0.0), 5);
        assert!(low.iter().zip(&high).all(|(l, h)| !*l || *h));
    }

    #[test]
    fn vehicle_flags_independent_of_light_count() {
        let (a, _) = assign_equipment(20, 2, &cfg(0.5, 0.5), 3);
        let (b, _) = assign_equipment(20, 9, &cfg(0.5, 1.0), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn delivery_rules() {
        let c = CommConfig::default();
        let o = Point::new(0.0, 0.0);
        assert!(!deliver_spat(Point::new(10.0, 0.0), o, true, false, &c));
        assert!(!deliver_spat(Point::new(10.0, 0.0), o, false, true, &c));
        assert!(deliver_spat(Point::new(300.0, 0.0), o, true, true, &c));
        assert!(!deliver_spat(Point::new(300.1, 0.0), o, true, true, &c));
    }

    #[test]
    fn out_of_range_rates_rejected() {
        assert!(cfg(1.5, 0.0).validate().is_err());
        assert!(cfg(0.5, -0.1).validate().is_err());
        assert!(cfg(0.5, 0.5).validate().is_ok());
    }
}
