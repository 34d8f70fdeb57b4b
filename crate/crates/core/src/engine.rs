//! Time-stepped simulation loop.
//!
//! Each step of `dt` seconds: insert due vehicles, broadcast SPaT on the
//! broadcast period, refresh advisories, then move vehicles one by one in
//! id order. A vehicle always sees the already-updated state of vehicles
//! stepped before it, which keeps merges onto a shared link collision-free.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    safe_speed, signal_blocks, step_vehicle, Leader, SignalAhead, StepInputs, VehicleId,
    VehicleParams, VehicleState,
};
use crate::emissions::{accumulate, co2_rate, EmissionCoefficients};
use crate::error::{Error, Result};
use crate::glosa::{compute_advisory, Advisory, AdvisorySettings};
use crate::netgraph::{LinkId, SignalId};
use crate::scenarios::{ScenarioInstance, VehicleClass};
use crate::signalctl::{make_spat, GeoOrigin, Window};
use crate::v2i::{assign_equipment, deliver_spat, CommConfig};

/// Vehicles further ahead than this are ignored by car-following (m).
const LEADER_LOOKAHEAD: f64 = 300.0;
/// Stop lines further ahead than this are ignored (m).
const SIGNAL_LOOKAHEAD: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleClasses {
    pub car: VehicleParams,
    pub shuttle: VehicleParams,
}

impl Default for VehicleClasses {
    fn default() -> Self {
        VehicleClasses {
            car: VehicleParams::default(),
            shuttle: VehicleParams {
                length: 8.0,
                a_max: 1.5,
                b_max: 4.0,
                ..VehicleParams::default()
            },
        }
    }
}

impl VehicleClasses {
    pub fn get(&self, class: VehicleClass) -> &VehicleParams {
        match class {
            VehicleClass::Car => &self.car,
            VehicleClass::Shuttle => &self.shuttle,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub comm: CommConfig,
    pub vehicles: VehicleClasses,
    pub emissions: EmissionCoefficients,
    pub advisory: AdvisorySettings,
    /// When false no advisory is ever computed, whatever the equipment.
    pub glosa_enabled: bool,
    pub geo_origin: GeoOrigin,
    /// Insertion speed; `None` inserts at the link speed limit.
    pub depart_speed: Option<f64>,
    /// Record a per-step trace.
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            duration_s: 3600.0,
            seed: 0,
            comm: CommConfig::default(),
            vehicles: VehicleClasses::default(),
            emissions: EmissionCoefficients::default(),
            advisory: AdvisorySettings::default(),
            glosa_enabled: true,
            geo_origin: GeoOrigin::default(),
            depart_speed: None,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.comm.validate()?;
        for (name, p) in [("car", &self.vehicles.car), ("shuttle", &self.vehicles.shuttle)] {
            p.validate().map_err(|e| Error::Config(format!("vehicles.{name}: {e}")))?;
            if !(self.dt > 0.0 && self.dt <= p.tau) {
                return Err(Error::Config(format!(
                    "sim.dt must lie in (0, tau = {}], got {}",
                    p.tau, self.dt
                )));
            }
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config("sim.duration_s must be > 0".into()));
        }
        self.emissions.validate().map_err(Error::Config)?;
        if !(self.advisory.margin_s >= 0.0) {
            return Err(Error::Config("advisory.margin_s must be >= 0".into()));
        }
        if !(self.advisory.horizon_cycles > 0.0) {
            return Err(Error::Config("advisory.horizon_cycles must be > 0".into()));
        }
        if let Some(v) = self.depart_speed {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config("sim.depart_speed must be >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: u32,
    pub class: VehicleClass,
    pub equipped: bool,
    pub depart: Option<f64>,
    pub arrive: Option<f64>,
    pub travel_time_s: Option<f64>,
    pub waiting_time_s: f64,
    pub co2_g: f64,
    pub distance_m: f64,
}

impl VehicleRecord {
    pub fn finished(&self) -> bool {
        self.arrive.is_some()
    }
}

/// Means over finished vehicles; `None` when there are none.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean_co2_g: Option<f64>,
    pub mean_wait_s: Option<f64>,
    pub mean_travel_s: Option<f64>,
}

impl Aggregate {
    pub fn over<'a>(records: impl IntoIterator<Item = &'a VehicleRecord>) -> Aggregate {
        let (mut n, mut co2, mut wait, mut travel) = (0usize, 0.0, 0.0, 0.0);
        for r in records {
            if let Some(tt) = r.travel_time_s {
                n += 1;
                co2 += r.co2_g;
                wait += r.waiting_time_s;
                travel += tt;
            }
        }
        if n == 0 {
            return Aggregate::default();
        }
        let k = n as f64;
        Aggregate {
            count: n,
            mean_co2_g: Some(co2 / k),
            mean_wait_s: Some(wait / k),
            mean_travel_s: Some(travel / k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub vehicle: u32,
    /// Distance along the route (m).
    pub position: f64,
    pub speed: f64,
    /// mg/s
    pub co2_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub scenario: String,
    pub seed: u64,
    pub vehicles: Vec<VehicleRecord>,
    pub all: Aggregate,
    pub equipped: Aggregate,
    pub unequipped: Aggregate,
    pub n_inserted: usize,
    pub n_finished: usize,
    /// Inserted but still driving when the run ended; excluded from means.
    pub n_unfinished: usize,
    /// Never inserted before the run ended.
    pub n_not_inserted: usize,
    /// Vehicle ids in insertion order.
    pub insertion_order: Vec<u32>,
    /// Smallest bumper-to-bumper gap seen between a vehicle and its leader (m).
    pub min_gap_m: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRow>,
}

impl SimulationResult {
    pub fn write_vehicle_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id",
            "class",
            "equipped",
            "depart_s",
            "arrive_s",
            "travel_time_s",
            "waiting_time_s",
            "co2_g",
            "distance_m",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "NA".into());
        for r in &self.vehicles {
            w.write_record([
                r.id.to_string(),
                match r.class {
                    VehicleClass::Car => "car".into(),
                    VehicleClass::Shuttle => "shuttle".into(),
                },
                (r.equipped as u8).to_string(),
                opt(r.depart),
                opt(r.arrive),
                opt(r.travel_time_s),
                format!("{:.3}", r.waiting_time_s),
                format!("{:.4}", r.co2_g),
                format!("{:.2}", r.distance_m),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "vehicle", "position", "speed", "co2_rate"])?;
        for row in &self.trace {
            w.write_record([
                format!("{:.1}", row.t),
                row.vehicle.to_string(),
                format!("{:.3}", row.position),
                format!("{:.4}", row.speed),
                format!("{:.3}", row.co2_rate),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Advisory a vehicle is currently following, tied to one stop-line crossing.
#[derive(Clone, Copy, Debug)]
struct Guidance {
    signal: SignalId,
    /// Route index of the link whose stop line the advisory targets.
    crossing: usize,
    window: Window,
}

struct Active {
    state: VehicleState,
    params: VehicleParams,
    guidance: Option<Guidance>,
}

/// Next signal-controlled stop line on a vehicle's route.
#[derive(Clone, Copy, Debug)]
struct Crossing {
    signal: SignalId,
    route_index: usize,
    distance: f64,
}

struct Simulation<'a> {
    scenario: &'a ScenarioInstance,
    config: &'a SimConfig,
    vehicle_equipped: Vec<bool>,
    light_equipped: Vec<bool>,
    vehicles: Vec<Option<Active>>,
    /// Per link, vehicle ids from most downstream to most upstream.
    occupancy: Vec<VecDeque<u32>>,
    active: Vec<u32>,
    pending: VecDeque<u32>,
    records: Vec<VehicleRecord>,
    insertion_order: Vec<u32>,
    min_gap: Option<f64>,
    trace: Vec<TraceRow>,
    n_finished: usize,
}

/// Runs `scenario` under `config` and collects per-vehicle metrics.
pub fn run(scenario: &ScenarioInstance, config: &SimConfig) -> Result<SimulationResult> {
    config.validate()?;
    if scenario.trips.len() > u32::MAX as usize {
        return Err(Error::Config("insertion schedule exceeds the vehicle id space".into()));
    }
    scenario.validate()?;
    let mut sim = Simulation::new(scenario, config);
    let steps = (config.duration_s / config.dt).round() as u64;
    let period = ((config.comm.broadcast_period_s / config.dt).round() as u64).max(1);
    for k in 0..steps {
        let t = k as f64 * config.dt;
        sim.insert_due(t);
        if k % period == 0 {
            sim.broadcast(t)?;
        }
        sim.advance_all(t);
        debug_assert_eq!(sim.insertion_order.len(), sim.n_finished + sim.active.len());
        if sim.pending.is_empty() && sim.active.is_empty() {
            break;
        }
    }
    Ok(sim.finish())
}

/// Runs the scenario twice: once with no equipped lights, once as configured.
pub fn collect_baseline_pair(
    scenario: &ScenarioInstance,
    config: &SimConfig,
) -> Result<(SimulationResult, SimulationResult)> {
    let mut base = config.clone();
    base.comm.light_penetration = 0.0;
    Ok((run(scenario, &base)?, run(scenario, config)?))
}

impl<'a> Simulation<'a> {
    fn new(scenario: &'a ScenarioInstance, config: &'a SimConfig) -> Self {
        let n = scenario.trips.len();
        let (vehicle_equipped, light_equipped) =
            assign_equipment(n, scenario.lights.len(), &config.comm, config.seed);
        let records = scenario
            .trips
            .iter()
            .map(|t| VehicleRecord {
                id: t.id,
                class: t.class,
                equipped: vehicle_equipped[t.id as usize],
                depart: None,
                arrive: None,
                travel_time_s: None,
                waiting_time_s: 0.0,
                co2_g: 0.0,
                distance_m: 0.0,
            })
            .collect();
        Simulation {
            scenario,
            config,
            vehicle_equipped,
            light_equipped,
            vehicles: (0..n).map(|_| None).collect(),
            occupancy: vec![VecDeque::new(); scenario.network.links().len()],
            active: Vec::new(),
            pending: (0..n as u32).collect(),
            records,
            insertion_order: Vec::new(),
            min_gap: None,
            trace: Vec::new(),
            n_finished: 0,
        }
    }

    fn vehicle(&self, id: u32) -> &Active {
        self.vehicles[id as usize].as_ref().expect("active vehicle")
    }

    fn note_gap(&mut self, gap: f64) {
        self.min_gap = Some(self.min_gap.map_or(gap, |g| g.min(gap)));
    }

    /// Leader of a vehicle at `position` on route index `route_index`.
    fn leader_of(&self, state: &VehicleState, ego: Option<u32>) -> Option<Leader> {
        let net = &self.scenario.network;
        let links = state.route.links();
        let here = links[state.link_index];
        let queue = &self.occupancy[here.index()];
        if let Some(ego) = ego {
            let at = queue.iter().position(|&v| v == ego).expect("vehicle is on its link");
            if at > 0 {
                let lead = &self.vehicle(queue[at - 1]).state;
                let len = self.vehicle(queue[at - 1]).params.length;
                return Some(Leader {
                    gap: lead.position - len - state.position,
                    speed: lead.speed,
                });
            }
        } else if let Some(&back) = queue.back() {
            // Prospective vehicle: everything already on the link is ahead.
            let lead = self.vehicle(back);
            return Some(Leader {
                gap: lead.state.position - lead.params.length - state.position,
                speed: lead.state.speed,
            });
        }
        let mut dist = net.link(here).length - state.position;
        for (k, &next) in links.iter().enumerate().skip(state.link_index + 1) {
            if dist > LEADER_LOOKAHEAD {
                break;
            }
            if let Some(&back) = self.occupancy[next.index()].back() {
                if Some(back) != ego {
                    let lead = self.vehicle(back);
                    let ls = &lead.state;
                    let mut rear = ls.position - lead.params.length;
                    // A tail still in the junction but from another approach is not on our path.
                    let came_from = ls.link_index.checked_sub(1).map(|k| ls.route.links()[k]);
                    if rear < 0.0 && came_from != Some(links[k - 1]) {
                        rear = 0.0;
                    }
                    return Some(Leader {
                        gap: dist + rear,
                        speed: ls.speed,
                    });
                }
            }
            dist += net.link(next).length;
        }
        None
    }

    /// Vehicle on another approach that reaches the same next link first.
    ///
    /// Merging vehicles are ordered by distance to the node (ties by id); the
    /// one ahead in that order is followed as if already on the shared link.
    /// Vehicles held by their own signal do not claim the merge.
    fn merge_leader(&self, state: &VehicleState, ego: u32, t: f64) -> Option<Leader> {
        let net = &self.scenario.network;
        let links = state.route.links();
        let here = net.link(links[state.link_index]);
        let target = *links.get(state.link_index + 1)?;
        let d_ego = here.length - state.position;
        if d_ego > LEADER_LOOKAHEAD {
            return None;
        }
        let mut best: Option<(f64, Leader)> = None;
        for &feeder in net.incoming(here.to) {
            if feeder == here.id {
                continue;
            }
            let flink = net.link(feeder);
            for &other in &self.occupancy[feeder.index()] {
                let o = self.vehicle(other);
                if o.state.route.links().get(o.state.link_index + 1) != Some(&target) {
                    continue;
                }
                let d_other = flink.length - o.state.position;
                if d_other > d_ego || (d_other == d_ego && other > ego) {
                    continue;
                }
                if let Some(sig) = flink.signal {
                    let phase = self.scenario.signal(sig).program.phase_at(t).0;
                    let to_line = flink.stop_line() - o.state.position;
                    if to_line >= 0.0 && signal_blocks(phase, to_line, o.state.speed, &o.params) {
                        continue;
                    }
                }
                if best.map_or(true, |(d, _)| d_other > d) {
                    best = Some((
                        d_other,
                        Leader {
                            gap: d_ego - d_other - o.params.length,
                            speed: o.state.speed,
                        },
                    ));
                }
            }
        }
        best.map(|(_, l)| l)
    }

    /// First signal-controlled stop line still ahead on the route.
    fn next_crossing(&self, state: &VehicleState, lookahead: f64) -> Option<Crossing> {
        let net = &self.scenario.network;
        let links = state.route.links();
        let mut base = -state.position;
        // The last link's end is the destination, not a crossing.
        for (j, &lid) in links.iter().enumerate().take(links.len() - 1).skip(state.link_index) {
            let link = net.link(lid);
            if base > lookahead {
                break;
            }
            if let Some(signal) = link.signal {
                let distance = base + link.stop_line();
                if distance >= 0.0 {
                    return Some(Crossing {
                        signal,
                        route_index: j,
                        distance,
                    });
                }
            }
            base += link.length;
        }
        None
    }

    fn insert_due(&mut self, t: f64) {
        let mut blocked: Vec<LinkId> = Vec::new();
        let mut still_pending = VecDeque::new();
        while let Some(id) = self.pending.pop_front() {
            let trip = &self.scenario.trips[id as usize];
            if trip.depart_time > t {
                still_pending.push_back(id);
                still_pending.extend(self.pending.drain(..));
                break;
            }
            let entry = trip.route.links()[0];
            if blocked.contains(&entry) || !self.try_insert(id, t) {
                blocked.push(entry);
                still_pending.push_back(id);
            }
        }
        self.pending = still_pending;
    }

    fn try_insert(&mut self, id: u32, t: f64) -> bool {
        let net = &self.scenario.network;
        let trip = &self.scenario.trips[id as usize];
        let params = *self.config.vehicles.get(trip.class);
        let entry = trip.route.links()[0];
        let link = net.link(entry);
        let desired = link.speed_limit;
        let mut speed = self.config.depart_speed.unwrap_or(desired).min(desired);
        let state = VehicleState {
            id: VehicleId(id),
            route: trip.route.clone(),
            link_index: 0,
            position: params.length.min(link.length),
            speed,
            acceleration: 0.0,
            equipped: self.vehicle_equipped[id as usize],
            desired_speed: desired,
            cumulative_co2: 0.0,
            waiting_time: 0.0,
            depart_time: t,
            arrive_time: None,
            odometer: 0.0,
        };

        if let Some(leader) = self.leader_of(&state, None) {
            if leader.gap < params.min_gap {
                return false;
            }
            speed = speed.min(safe_speed(leader.gap - params.min_gap, leader.speed, speed, &params));
        }
        if let Some(c) = self.next_crossing(&state, SIGNAL_LOOKAHEAD) {
            let phase = self.scenario.signal(c.signal).program.phase_at(t).0;
            if signal_blocks(phase, c.distance, speed, &params) {
                speed = speed.min(safe_speed((c.distance - params.min_gap).max(0.0), 0.0, speed, &params));
            }
        }
        // Vehicles about to enter the same link must not be forced to brake hard.
        let back_of_new = state.position - params.length;
        for &feeder in net.incoming(link.from) {
            for &other in &self.occupancy[feeder.index()] {
                let o = self.vehicle(other);
                let links = o.state.route.links();
                if links.get(o.state.link_index + 1) != Some(&entry) {
                    continue;
                }
                let gap = net.link(feeder).length - o.state.position + back_of_new;
                if gap < o.params.min_gap
                    || o.state.speed > safe_speed(gap - o.params.min_gap, speed, o.state.speed, &o.params)
                {
                    return false;
                }
            }
        }

        let state = VehicleState { speed, ..state };
        self.occupancy[entry.index()].push_back(id);
        let at = self.active.partition_point(|&a| a < id);
        self.active.insert(at, id);
        self.insertion_order.push(id);
        self.records[id as usize].depart = Some(t);
        self.vehicles[id as usize] = Some(Active {
            state,
            params,
            guidance: None,
        });
        true
    }

    /// SPaT delivery and advisory refresh.
    fn broadcast(&mut self, t: f64) -> Result<()> {
        if !self.config.glosa_enabled {
            return Ok(());
        }
        let net = &self.scenario.network;
        let comm = &self.config.comm;
        let settings = self.config.advisory;
        for i in 0..self.active.len() {
            let id = self.active[i];
            let active = self.vehicle(id);
            if !active.state.equipped {
                continue;
            }
            let Some(crossing) = self.next_crossing(&active.state, f64::INFINITY) else {
                continue;
            };
            if crossing.distance <= 0.0 {
                continue;
            }
            let head = self.scenario.signal(crossing.signal);
            let node = net.node(head.node);
            let here = net.position_on(active.state.link(), active.state.position);
            if !deliver_spat(
                here,
                node.position,
                self.light_equipped[head.light.index()],
                active.state.equipped,
                comm,
            ) {
                continue;
            }
            let spat = make_spat(&head.program, node, t, self.config.geo_origin)?;
            let limit = net.link(active.state.link()).speed_limit.min(active.state.desired_speed);
            let advisory: Advisory = compute_advisory(
                &spat,
                crossing.distance,
                active.state.speed,
                limit,
                &active.params,
                settings.horizon_for(&spat),
                settings.margin_s,
            )?;
            let previous = active.guidance.filter(|g| {
                g.signal == crossing.signal && g.crossing == crossing.route_index && g.window.end > t
            });
            let guidance = match advisory.chosen_window {
                Some(window) => Some(Guidance {
                    signal: crossing.signal,
                    crossing: crossing.route_index,
                    window,
                }),
                None => previous,
            };
            self.vehicles[id as usize].as_mut().expect("active").guidance = guidance;
        }
        Ok(())
    }

    /// Speed cap that keeps arrival inside the guided window.
    fn advised_speed(&self, active: &Active, t: f64) -> Option<f64> {
        let g = active.guidance?;
        assert!(active.state.equipped, "unequipped vehicle holds an advisory");
        if t >= g.window.start {
            return None;
        }
        let crossing = self.next_crossing(&active.state, f64::INFINITY)?;
        if crossing.route_index != g.crossing {
            return None;
        }
        let limit = self
            .scenario
            .network
            .link(active.state.link())
            .speed_limit
            .min(active.state.desired_speed);
        let cap = crossing.distance / (g.window.start - t);
        Some(cap.clamp(active.params.v_min_adv.min(limit), limit))
    }

    fn advance_all(&mut self, t: f64) {
        let dt = self.config.dt;
        let t_end = t + dt;
        let net = &self.scenario.network;
        let mut i = 0;
        while i < self.active.len() {
            let id = self.active[i];
            let active = self.vehicle(id);
            let real = self.leader_of(&active.state, Some(id));
            let leader = match (real, self.merge_leader(&active.state, id, t)) {
                (Some(a), Some(b)) => {
                    let v = active.state.speed;
                    let sa = safe_speed((a.gap - active.params.min_gap).max(0.0), a.speed, v, &active.params);
                    let sb = safe_speed((b.gap - active.params.min_gap).max(0.0), b.speed, v, &active.params);
                    Some(if sb < sa || (sb == sa && b.gap < a.gap) { b } else { a })
                }
                (a, b) => a.or(b),
            };
            let signal = self.next_crossing(&active.state, SIGNAL_LOOKAHEAD).map(|c| SignalAhead {
                distance_to_stop_line: c.distance,
                phase: self.scenario.signal(c.signal).program.phase_at(t).0,
            });
            let advisory = self.advised_speed(active, t);
            let inputs = StepInputs {
                leader,
                signal,
                advisory,
                dt,
            };
            let mut next = step_vehicle(&active.state, net, &inputs, &active.params);
            // Mean speed over the step keeps the v·a term exact for any dt.
            let (v, a) = (0.5 * (active.state.speed + next.speed), next.acceleration);
            accumulate(&mut next, v, a, dt, &self.config.emissions);
            let old_index = active.state.link_index;
            let links = active.state.route.clone();
            if let Some(l) = real {
                self.note_gap(l.gap);
            }
            for j in old_index..next.link_index {
                let front = self.occupancy[links.links()[j].index()].pop_front();
                debug_assert_eq!(front, Some(id));
                self.occupancy[links.links()[j + 1].index()].push_back(id);
            }
            if self.config.trace {
                self.trace.push(TraceRow {
                    t: t_end,
                    vehicle: id,
                    position: next.odometer,
                    speed: next.speed,
                    co2_rate: co2_rate(v, a, &self.config.emissions),
                });
            }

            let slot = self.vehicles[id as usize].as_mut().expect("active");
            if slot.guidance.is_some_and(|g| next.link_index > g.crossing) {
                slot.guidance = None;
            }
            if next.has_arrived(net) {
                let front = self.occupancy[next.link().index()].pop_front();
                debug_assert_eq!(front, Some(id));
                next.arrive_time = Some(t_end);
                let rec = &mut self.records[id as usize];
                rec.arrive = Some(t_end);
                rec.travel_time_s = Some(t_end - next.depart_time);
                rec.waiting_time_s = next.waiting_time;
                rec.co2_g = next.cumulative_co2;
                rec.distance_m = next.odometer;
                self.vehicles[id as usize] = None;
                self.active.remove(i);
                self.n_finished += 1;
                continue;
            }
            slot.state = next;
            i += 1;
        }
    }

    fn finish(mut self) -> SimulationResult {
        for &id in &self.active {
            let s = &self.vehicles[id as usize].as_ref().expect("active").state;
            let rec = &mut self.records[id as usize];
            rec.waiting_time_s = s.waiting_time;
            rec.co2_g = s.cumulative_co2;
            rec.distance_m = s.odometer;
        }
        let all = Aggregate::over(&self.records);
        let equipped = Aggregate::over(self.records.iter().filter(|r| r.equipped));
        let unequipped = Aggregate::over(self.records.iter().filter(|r| !r.equipped));
        let n_inserted = self.insertion_order.len();
        SimulationResult {
            scenario: self.scenario.name.clone(),
            seed: self.config.seed,
            n_finished: self.n_finished,
            n_unfinished: n_inserted - self.n_finished,
            n_not_inserted: self.records.len() - n_inserted,
            n_inserted,
            vehicles: self.records,
            all,
            equipped,
            unequipped,
            insertion_order: self.insertion_order,
            min_gap_m: self.min_gap,
            trace: self.trace,
        }
    }
}
