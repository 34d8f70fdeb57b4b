//! Longitudinal vehicle dynamics: Krauss car-following (no driver
//! imperfection), stop-line handling for amber/red, and advisory tracking.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::netgraph::{LinkId, RoadNetwork, Route};
use crate::signalctl::Phase;

/// Speeds below this count as waiting.
pub const WAITING_SPEED: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Vehicle length (m).
    pub length: f64,
    /// Maximum acceleration (m/s²).
    pub a_max: f64,
    /// Comfortable deceleration (m/s², positive).
    pub b_max: f64,
    /// Reaction time (s).
    pub tau: f64,
    /// Lowest speed the advisory will ever recommend (m/s).
    pub v_min_adv: f64,
    /// Standstill gap kept to the leader or stop line (m).
    pub min_gap: f64,
}

impl Default for VehicleParams {
    /// A passenger car with Krauss defaults of common microsimulators.
    fn default() -> Self {
        VehicleParams {
            length: 5.0,
            a_max: 2.6,
            b_max: 4.5,
            tau: 1.0,
            v_min_adv: 5.0,
            min_gap: 2.5,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("length", self.length),
            ("a_max", self.a_max),
            ("b_max", self.b_max),
            ("tau", self.tau),
            ("v_min_adv", self.v_min_adv),
            ("min_gap", self.min_gap),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("vehicle parameter {name} must be > 0"));
            }
        }
        Ok(())
    }

    /// Distance needed to stop from `speed` at comfortable deceleration.
    pub fn braking_distance(&self, speed: f64) -> f64 {
        speed * speed / (2.0 * self.b_max)
    }
}

/// Kinematic, route and bookkeeping state of one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    pub route: Arc<Route>,
    /// Index into `route.links()` of the current link.
    pub link_index: usize,
    /// Front-bumper position on the current link (m).
    pub position: f64,
    pub speed: f64,
    /// Speed change over the last step divided by dt.
    pub acceleration: f64,
    pub equipped: bool,
    /// Vehicle's own cruising ceiling (m/s).
    pub desired_speed: f64,
    pub cumulative_co2: f64,
    pub waiting_time: f64,
    pub depart_time: f64,
    pub arrive_time: Option<f64>,
    /// Route distance covered since departure (m).
    pub odometer: f64,
}

impl VehicleState {
    pub fn link(&self) -> LinkId {
        self.route.links()[self.link_index]
    }

    pub fn on_last_link(&self) -> bool {
        self.link_index + 1 == self.route.len()
    }

    pub fn has_arrived(&self, net: &RoadNetwork) -> bool {
        self.on_last_link() && self.position >= net.link(self.link()).length
    }
}

/// The nearest vehicle ahead along the route.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leader {
    /// Bumper-to-bumper distance (m).
    pub gap: f64,
    pub speed: f64,
}

/// The next stop line ahead and the phase its signal currently shows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalAhead {
    pub distance_to_stop_line: f64,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInputs {
    pub leader: Option<Leader>,
    pub signal: Option<SignalAhead>,
    /// Advised speed, honored only by equipped vehicles.
    pub advisory: Option<f64>,
    pub dt: f64,
}

/// Krauss safe speed behind a leader `gap` meters ahead.
pub fn safe_speed(gap: f64, v_leader: f64, v_ego: f64, params: &VehicleParams) -> f64 {
    let denom = (v_ego + v_leader) / (2.0 * params.b_max) + params.tau;
    (v_leader + (gap - v_leader * params.tau) / denom).max(0.0)
}

/// Whether a signal showing `phase` at `distance` acts as a stationary obstacle.
///
/// Red always does. Amber does only when the vehicle can still stop at
/// comfortable deceleration; otherwise it proceeds.
pub fn signal_blocks(phase: Phase, distance: f64, speed: f64, params: &VehicleParams) -> bool {
    match phase {
        Phase::Green => false,
        Phase::Red => true,
        Phase::Amber => params.braking_distance(speed) <= distance,
    }
}

/// Speed for the next step.
pub fn next_speed(
    state: &VehicleState,
    speed_limit: f64,
    inputs: &StepInputs,
    params: &VehicleParams,
) -> f64 {
    let dt = inputs.dt;
    let v = state.speed;
    let mut desired = speed_limit.min(state.desired_speed);
    if state.equipped {
        if let Some(adv) = inputs.advisory {
            desired = desired.min(adv);
        }
    }
    let lo = (v - params.b_max * dt).max(0.0);
    let hi = v + params.a_max * dt;
    let mut next = desired.clamp(lo, hi);

    if let Some(leader) = inputs.leader {
        let effective = (leader.gap - params.min_gap).max(0.0);
        next = next.min(safe_speed(effective, leader.speed, v, params));
        // Never close more than the remaining bumper gap in one step.
        next = next.min(leader.gap.max(0.0) / dt);
    }
    if let Some(sig) = inputs.signal {
        if signal_blocks(sig.phase, sig.distance_to_stop_line, v, params) {
            let effective = (sig.distance_to_stop_line - params.min_gap).max(0.0);
            next = next.min(safe_speed(effective, 0.0, v, params));
        }
    }
    next.max(0.0)
}

/// Advances `state` by one step of `inputs.dt` seconds.
///
/// Moves the vehicle along its route, carrying overshoot onto the next link.
/// Emissions are accumulated separately by the engine.
pub fn step_vehicle(
    state: &VehicleState,
    net: &RoadNetwork,
    inputs: &StepInputs,
    params: &VehicleParams,
) -> VehicleState {
    debug_assert!(inputs.dt > 0.0 && inputs.dt <= params.tau + 1e-12);
    let limit = net.link(state.link()).speed_limit;
    let speed = next_speed(state, limit, inputs, params);
    let mut out = state.clone();
    out.acceleration = (speed - state.speed) / inputs.dt;
    out.speed = speed;
    if speed < WAITING_SPEED {
        out.waiting_time += inputs.dt;
    }
    let mut travel = speed * inputs.dt;
    out.odometer += travel;
    loop {
        let len = net.link(out.link()).length;
        let room = len - out.position;
        if travel < room || out.on_last_link() {
            out.position = (out.position + travel).min(len);
            break;
        }
        travel -= room;
        out.link_index += 1;
        out.position = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_network, Link, NetworkSpec, Node, NodeId, NodeKind, Point};

    fn straight(lengths: &[f64], limit: f64) -> RoadNetwork {
        let mut x = 0.0;
        let mut nodes = vec![Node {
            id: NodeId(0),
            position: Point::new(0.0, 0.0),
            kind: NodeKind::Plain,
        }];
        let mut links = Vec::new();
        for (i, len) in lengths.iter().enumerate() {
            x += len;
            nodes.push(Node {
                id: NodeId(i as u32 + 1),
                position: Point::new(x, 0.0),
                kind: NodeKind::Plain,
            });
            links.push(Link {
                id: LinkId(i as u32),
                from: NodeId(i as u32),
                to: NodeId(i as u32 + 1),
                length: *len,
                speed_limit: limit,
                stop_line_offset: 0.0,
                signal: None,
            });
        }
        build_network(NetworkSpec { nodes, links }).unwrap()
    }

    fn vehicle(net: &RoadNetwork, speed: f64, equipped: bool) -> VehicleState {
        let links = net.links().iter().map(|l| l.id).collect();
        VehicleState {
            id: VehicleId(0),
            route: Arc::new(Route::new(net, links).unwrap()),
            link_index: 0,
            position: 10.0,
            speed,
            acceleration: 0.0,
            equipped,
            desired_speed: 50.0,
            cumulative_co2: 0.0,
            waiting_time: 0.0,
            depart_time: 0.0,
            arrive_time: None,
            odometer: 0.0,
        }
    }

    fn params() -> VehicleParams {
        VehicleParams {
            b_max: 4.5,
            tau: 1.0,
            ..VehicleParams::default()
        }
    }

    #[test]
    fn safe_speed_examples() {
        let p = params();
        assert!((safe_speed(10.0, 10.0, 10.0, &p) - 10.0).abs() < 1e-12);
        assert_eq!(safe_speed(0.0, 0.0, 0.0, &p), 0.0);
        // 10 + 40 / (10/4.5 + 1), evaluated by hand.
        let expected = 10.0 + 40.0 / (20.0 / 9.0 + 1.0);
        assert!((safe_speed(50.0, 10.0, 10.0, &p) - expected).abs() < 1e-12);
        assert!((expected - 22.4138).abs() < 1e-4);
    }

    #[test]
    fn free_road_cruise() {
        let net = straight(&[1000.0], 10.0);
        let s = vehicle(&net, 10.0, false);
        let inputs = StepInputs { dt: 0.1, ..Default::default() };
        let n = step_vehicle(&s, &net, &inputs, &params());
        assert_eq!(n.speed, 10.0);
        assert!((n.position - 11.0).abs() < 1e-12);
        assert_eq!(n.waiting_time, 0.0);
    }

    #[test]
    fn stopped_at_red_stays_and_waits() {
        let net = straight(&[1000.0], 13.9);
        let mut s = vehicle(&net, 0.0, false);
        s.position = 998.0;
        let inputs = StepInputs {
            signal: Some(SignalAhead {
                distance_to_stop_line: 2.0,
                phase: Phase::Red,
            }),
            dt: 0.1,
            ..Default::default()
        };
        let n = step_vehicle(&s, &net, &inputs, &params());
        assert_eq!(n.speed, 0.0);
        assert_eq!(n.position, 998.0);
        assert!((n.waiting_time - 0.1).abs() < 1e-12);
    }

    #[test]
    fn advisory_is_deceleration_limited() {
        let net = straight(&[1000.0], 13.9);
        let s = vehicle(&net, 13.9, true);
        let inputs = StepInputs {
            advisory: Some(7.25),
            dt: 0.1,
            ..Default::default()
        };
        let n = step_vehicle(&s, &net, &inputs, &params());
        assert!((n.speed - 13.45).abs() < 1e-12);
    }

    #[test]
    fn unequipped_ignores_advisory() {
        let net = straight(&[1000.0], 13.9);
        let s = vehicle(&net, 13.9, false);
        let inputs = StepInputs {
            advisory: Some(7.25),
            dt: 0.1,
            ..Default::default()
        };
        assert_eq!(step_vehicle(&s, &net, &inputs, &params()).speed, 13.9);
    }

    #[test]
    fn amber_crossable_when_too_close() {
        let p = params();
        // 13.9 m/s needs ~21.5 m to stop.
        assert!(!signal_blocks(Phase::Amber, 15.0, 13.9, &p));
        assert!(signal_blocks(Phase::Amber, 30.0, 13.9, &p));
        assert!(signal_blocks(Phase::Red, 1.0, 13.9, &p));
        assert!(!signal_blocks(Phase::Green, 30.0, 13.9, &p));
    }

    #[test]
    fn overshoot_carries_to_next_link() {
        let net = straight(&[10.5, 100.0], 10.0);
        let s = vehicle(&net, 10.0, false);
        let inputs = StepInputs { dt: 0.1, ..Default::default() };
        let n = step_vehicle(&s, &net, &inputs, &params());
        assert_eq!(n.link_index, 1);
        assert!((n.position - 0.5).abs() < 1e-9);
    }

    #[test]
    fn permanent_red_stops_before_line() {
        let net = straight(&[500.0], 13.9);
        let p = params();
        let mut s = vehicle(&net, 13.9, false);
        for _ in 0..2000 {
            let inputs = StepInputs {
                signal: Some(SignalAhead {
                    distance_to_stop_line: 500.0 - s.position,
                    phase: Phase::Red,
                }),
                dt: 0.1,
                ..Default::default()
            };
            s = step_vehicle(&s, &net, &inputs, &p);
            assert!(s.position <= 500.0);
        }
        assert!(s.speed < WAITING_SPEED);
        assert!(500.0 - s.position >= p.min_gap - 1e-6);
        assert!(s.waiting_time > 100.0);
    }

    #[test]
    fn reaches_end_of_route() {
        let net = straight(&[20.0], 10.0);
        let mut s = vehicle(&net, 10.0, false);
        let inputs = StepInputs { dt: 0.1, ..Default::default() };
        for _ in 0..20 {
            s = step_vehicle(&s, &net, &inputs, &params());
        }
        assert!(s.has_arrived(&net));
        assert_eq!(s.position, 20.0);
    }
}
