//! Fixed-cycle signal programs and SPaT (signal phase and timing) messages.
//!
//! A program cycles Green → Amber → Red. Cycle-local time is
//! `(t - offset) mod cycle`, so Green occupies `[0, green)`, Amber
//! `[green, green + amber)` and Red the remainder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{Node, NodeKind, SignalId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Green,
    Amber,
    Red,
}

/// Phase durations without identity or offset; the shape carried in scenario documents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDurations {
    pub green_s: f64,
    pub amber_s: f64,
    pub red_s: f64,
}

impl PhaseDurations {
    pub const fn new(green_s: f64, amber_s: f64, red_s: f64) -> Self {
        PhaseDurations {
            green_s,
            amber_s,
            red_s,
        }
    }

    pub fn cycle(&self) -> f64 {
        self.green_s + self.amber_s + self.red_s
    }
}

impl Default for PhaseDurations {
    /// Red 30 s / Amber 2 s / Green 25 s.
    fn default() -> Self {
        PhaseDurations::new(25.0, 2.0, 30.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalProgram {
    pub signal_id: SignalId,
    pub green_s: f64,
    pub amber_s: f64,
    pub red_s: f64,
    /// Shift of the cycle start, in `[0, cycle)`.
    pub offset_s: f64,
}

/// Half-open absolute time interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Shrinks both ends by `margin`; `None` if nothing is left.
    pub fn shrink(&self, margin: f64) -> Option<Window> {
        let w = Window {
            start: self.start + margin,
            end: self.end - margin,
        };
        (!w.is_empty()).then_some(w)
    }
}

impl SignalProgram {
    pub fn new(signal_id: SignalId, durations: PhaseDurations, offset_s: f64) -> Result<Self> {
        let program = SignalProgram {
            signal_id,
            green_s: durations.green_s,
            amber_s: durations.amber_s,
            red_s: durations.red_s,
            offset_s,
        };
        program.validate()?;
        Ok(program)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.green_s, self.amber_s, self.red_s, self.offset_s]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation(format!(
                "signal {}: durations must be finite",
                self.signal_id
            )));
        }
        if self.green_s <= 0.0 || self.red_s <= 0.0 || self.amber_s < 0.0 {
            return Err(Error::Validation(format!(
                "signal {}: green and red must be > 0 and amber >= 0",
                self.signal_id
            )));
        }
        if !(0.0..self.cycle()).contains(&self.offset_s) {
            return Err(Error::Validation(format!(
                "signal {}: offset {} outside [0, {})",
                self.signal_id,
                self.offset_s,
                self.cycle()
            )));
        }
        Ok(())
    }

    pub fn durations(&self) -> PhaseDurations {
        PhaseDurations::new(self.green_s, self.amber_s, self.red_s)
    }

    pub fn cycle(&self) -> f64 {
        self.green_s + self.amber_s + self.red_s
    }

    pub fn duration(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Green => self.green_s,
            Phase::Amber => self.amber_s,
            Phase::Red => self.red_s,
        }
    }

    /// Cycle-local start of `phase`.
    pub fn phase_start(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Green => 0.0,
            Phase::Amber => self.green_s,
            Phase::Red => self.green_s + self.amber_s,
        }
    }

    fn local_time(&self, t: f64) -> f64 {
        let cycle = self.cycle();
        let local = (t - self.offset_s).rem_euclid(cycle);
        // rem_euclid may round a tiny negative up to exactly `cycle`.
        if local >= cycle {
            0.0
        } else {
            local
        }
    }

    /// Phase shown at absolute time `t` and the time left until it ends.
    pub fn phase_at(&self, t: f64) -> (Phase, f64) {
        let local = self.local_time(t);
        let amber_end = self.green_s + self.amber_s;
        if local < self.green_s {
            (Phase::Green, self.green_s - local)
        } else if local < amber_end {
            (Phase::Amber, amber_end - local)
        } else {
            (Phase::Red, self.cycle() - local)
        }
    }

    /// Green intervals intersecting `[t_now, t_now + horizon_s)`, clipped to it.
    pub fn green_windows(&self, t_now: f64, horizon_s: f64) -> Vec<Window> {
        let cycle = self.cycle();
        let t_end = t_now + horizon_s;
        let mut k = ((t_now - self.offset_s) / cycle).floor();
        let mut out = Vec::new();
        loop {
            let start = self.offset_s + k * cycle;
            if start >= t_end {
                break;
            }
            let w = Window {
                start: start.max(t_now),
                end: (start + self.green_s).min(t_end),
            };
            if !w.is_empty() {
                out.push(w);
            }
            k += 1.0;
        }
        out
    }

    /// Absolute times in `(t_from, t_to)` at which the phase changes, ascending.
    pub fn phase_boundaries(&self, t_from: f64, t_to: f64) -> Vec<f64> {
        let cycle = self.cycle();
        let locals = [0.0, self.green_s, self.green_s + self.amber_s];
        let mut k = ((t_from - self.offset_s) / cycle).floor();
        let mut out = Vec::new();
        loop {
            let base = self.offset_s + k * cycle;
            if base >= t_to {
                break;
            }
            for l in locals {
                let t = base + l;
                if t > t_from && t < t_to && out.last() != Some(&t) {
                    out.push(t);
                }
            }
            k += 1.0;
        }
        out
    }
}

/// Anchor of the local planar frame on the globe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoOrigin {
    pub latitude: f64,
    pub longitude: f64,
}

impl Default for GeoOrigin {
    fn default() -> Self {
        // Bobigny, Seine-Saint-Denis.
        GeoOrigin {
            latitude: 48.9086,
            longitude: 2.4395,
        }
    }
}

const METERS_PER_DEGREE: f64 = 111_320.0;

impl GeoOrigin {
    /// Equirectangular projection of a local point to (latitude, longitude).
    pub fn to_lat_lon(&self, x: f64, y: f64) -> (f64, f64) {
        let lat = self.latitude + y / METERS_PER_DEGREE;
        let lon = self.longitude + x / (METERS_PER_DEGREE * self.latitude.to_radians().cos());
        (lat, lon)
    }
}

/// Broadcast snapshot of a signal head.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatMessage {
    pub identity: SignalId,
    pub timestamp: f64,
    pub latitude: f64,
    pub longitude: f64,
    pub current_phase: Phase,
    pub remaining_s: f64,
    pub green_s: f64,
    pub amber_s: f64,
    pub red_s: f64,
}

impl SpatMessage {
    pub fn duration(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Green => self.green_s,
            Phase::Amber => self.amber_s,
            Phase::Red => self.red_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.duration(self.current_phase);
        if !(self.remaining_s > 0.0 && self.remaining_s <= d + 1e-9) {
            return Err(Error::Validation(format!(
                "SPaT {}: remaining {} outside (0, {d}] for {:?}",
                self.identity, self.remaining_s, self.current_phase
            )));
        }
        if self.green_s <= 0.0 || self.red_s <= 0.0 || self.amber_s < 0.0 {
            return Err(Error::Validation(format!(
                "SPaT {}: invalid phase durations",
                self.identity
            )));
        }
        Ok(())
    }

    /// Rebuilds the program the message was taken from, with the offset
    /// implied by the timestamp and the remaining time.
    pub fn to_program(&self) -> Result<SignalProgram> {
        self.validate()?;
        let probe = SignalProgram {
            signal_id: self.identity,
            green_s: self.green_s,
            amber_s: self.amber_s,
            red_s: self.red_s,
            offset_s: 0.0,
        };
        let remaining = self.remaining_s.min(self.duration(self.current_phase));
        let local = probe.phase_start(self.current_phase) + probe.duration(self.current_phase)
            - remaining;
        let cycle = probe.cycle();
        let mut offset = (self.timestamp - local).rem_euclid(cycle);
        if offset >= cycle {
            offset = 0.0;
        }
        Ok(SignalProgram {
            offset_s: offset,
            ..probe
        })
    }
}

/// Snapshot of `program` at `t_now`, located at `node`.
pub fn make_spat(
    program: &SignalProgram,
    node: &Node,
    t_now: f64,
    origin: GeoOrigin,
) -> Result<SpatMessage> {
    if let NodeKind::Plain = node.kind {
        return Err(Error::Logic(format!(
            "node {} carries no traffic light",
            node.id
        )));
    }
    let (phase, remaining) = program.phase_at(t_now);
    let (latitude, longitude) = origin.to_lat_lon(node.position.x, node.position.y);
    Ok(SpatMessage {
        identity: program.signal_id,
        timestamp: t_now,
        latitude,
        longitude,
        current_phase: phase,
        remaining_s: remaining,
        green_s: program.green_s,
        amber_s: program.amber_s,
        red_s: program.red_s,
    })
}
