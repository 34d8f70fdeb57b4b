//! Green light optimal speed advisory.
//!
//! From a SPaT message and the ego vehicle's distance and speed, pick a
//! speed that reaches the stop line inside a green window (shrunk by a
//! safety margin at both ends), and partition the admissible speed range
//! into bands by the phase the vehicle would meet on arrival.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};
use crate::signalctl::{Phase, SignalProgram, SpatMessage, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvisoryReason {
    /// Arrival at the current speed already falls inside a green window.
    Keep,
    /// A different speed reaches a green window.
    SpeedChange,
    /// No admissible speed reaches green within the horizon.
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advisory {
    pub target_speed: Option<f64>,
    pub chosen_window: Option<Window>,
    pub reason: AdvisoryReason,
}

impl Advisory {
    fn infeasible() -> Self {
        Advisory {
            target_speed: None,
            chosen_window: None,
            reason: AdvisoryReason::Infeasible,
        }
    }
}

/// Tunables of the advisory computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvisorySettings {
    /// Safety margin removed from both ends of each green window (s).
    pub margin_s: f64,
    /// Look-ahead horizon in cycles of the advertised program.
    pub horizon_cycles: f64,
}

impl Default for AdvisorySettings {
    fn default() -> Self {
        AdvisorySettings {
            margin_s: 2.0,
            horizon_cycles: 2.0,
        }
    }
}

impl AdvisorySettings {
    pub fn horizon_for(&self, spat: &SpatMessage) -> f64 {
        self.horizon_cycles * (spat.green_s + spat.amber_s + spat.red_s)
    }
}

fn check_inputs(spat: &SpatMessage, distance: f64) -> Result<SignalProgram> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::Input(format!("distance must be > 0, got {distance}")));
    }
    spat.to_program()
}

/// Green intervals shrunk by `margin_s` at both ends, then clipped to
/// `[t_now, t_now + horizon_s)`. The margin applies to the full green phase,
/// so a green already under way keeps its true start.
fn guarded_windows(program: &SignalProgram, t_now: f64, horizon_s: f64, margin_s: f64) -> Vec<Window> {
    let t_end = t_now + horizon_s;
    program
        .green_windows(t_now - program.green_s, horizon_s + 2.0 * program.green_s)
        .iter()
        .filter_map(|w| w.shrink(margin_s))
        .map(|w| Window {
            start: w.start.max(t_now),
            end: w.end.min(t_end),
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Advised speed for a vehicle `distance` meters before the stop line,
/// evaluated at the SPaT timestamp.
pub fn compute_advisory(
    spat: &SpatMessage,
    distance: f64,
    v_now: f64,
    speed_limit: f64,
    params: &VehicleParams,
    horizon_s: f64,
    margin_s: f64,
) -> Result<Advisory> {
    let program = check_inputs(spat, distance)?;
    if !(horizon_s > 0.0) {
        return Err(Error::Input(format!("horizon must be > 0, got {horizon_s}")));
    }
    if !(margin_s >= 0.0) {
        return Err(Error::Input(format!("margin must be >= 0, got {margin_s}")));
    }
    let v_min = params.v_min_adv;
    if speed_limit < v_min {
        return Ok(Advisory::infeasible());
    }
    let t_now = spat.timestamp;
    let windows = guarded_windows(&program, t_now, horizon_s, margin_s);

    let v_keep = v_now.clamp(v_min, speed_limit);
    let eta = t_now + distance / v_keep;
    if let Some(w) = windows.iter().find(|w| w.contains(eta)) {
        return Ok(Advisory {
            target_speed: Some(v_keep),
            chosen_window: Some(*w),
            reason: AdvisoryReason::Keep,
        });
    }

    for w in &windows {
        if w.end <= t_now {
            continue;
        }
        let slowest = distance / (w.end - t_now);
        let fastest = if w.start > t_now {
            distance / (w.start - t_now)
        } else {
            f64::INFINITY
        };
        let lower = slowest.max(v_min);
        let upper = fastest.min(speed_limit);
        // Arriving exactly at `end` is outside the half-open window.
        if upper >= lower && upper > slowest {
            return Ok(Advisory {
                target_speed: Some(upper),
                chosen_window: Some(*w),
                reason: AdvisoryReason::SpeedChange,
            });
        }
    }
    Ok(Advisory::infeasible())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedBand {
    /// Phase met at the stop line when driving at any speed inside the band.
    pub phase: Phase,
    pub v_lo: f64,
    pub v_hi: f64,
}

/// Partition of `[v_min_adv, speed_limit]` into maximal constant-phase bands,
/// sorted by speed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeedRangeSet {
    pub bands: Vec<SpeedBand>,
}

impl SpeedRangeSet {
    /// Phase of the band containing `v`, if any.
    pub fn phase_for(&self, v: f64) -> Option<Phase> {
        self.bands
            .iter()
            .find(|b| b.v_lo <= v && v <= b.v_hi)
            .map(|b| b.phase)
    }
}

/// Speed ranges for the HMI: which phase each constant speed meets on arrival.
pub fn speed_ranges(
    spat: &SpatMessage,
    distance: f64,
    speed_limit: f64,
    params: &VehicleParams,
) -> Result<SpeedRangeSet> {
    let program = check_inputs(spat, distance)?;
    let v_min = params.v_min_adv;
    if speed_limit <= v_min {
        return Ok(SpeedRangeSet::default());
    }
    let t_now = spat.timestamp;
    let t_early = t_now + distance / speed_limit;
    let t_late = t_now + distance / v_min;

    // Phase boundaries map to speed boundaries; later arrival = lower speed.
    let mut cuts: Vec<f64> = program
        .phase_boundaries(t_early, t_late)
        .into_iter()
        .map(|t| distance / (t - t_now))
        .filter(|v| *v > v_min && *v < speed_limit)
        .collect();
    cuts.push(v_min);
    cuts.push(speed_limit);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut bands: Vec<SpeedBand> = Vec::new();
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let mid = 0.5 * (lo + hi);
        let phase = program.phase_at(t_now + distance / mid).0;
        match bands.last_mut() {
            Some(last) if last.phase == phase => last.v_hi = hi,
            _ => bands.push(SpeedBand {
                phase,
                v_lo: lo,
                v_hi: hi,
            }),
        }
    }
    Ok(SpeedRangeSet { bands })
}
