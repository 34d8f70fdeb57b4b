use std::sync::Arc;

use proptest::prelude::*;

use glosa_sim::config::builtin;
use glosa_sim::dynamics::{step_vehicle, Leader, StepInputs, VehicleId, VehicleParams, VehicleState};
use glosa_sim::emissions::{co2_rate, EmissionCoefficients};
use glosa_sim::engine::run;
use glosa_sim::glosa::{compute_advisory, speed_ranges};
use glosa_sim::netgraph::{
    build_network, Link, LinkId, LightId, NetworkSpec, Node, NodeId, NodeKind, Point, Route,
    RoadNetwork, SignalId,
};
use glosa_sim::signalctl::{make_spat, Phase, PhaseDurations, SignalProgram, SpatMessage};

fn program() -> impl Strategy<Value = SignalProgram> {
    (1.0..60.0f64, 0.5..5.0f64, 1.0..60.0f64, 0.0..1.0f64).prop_map(|(g, a, r, frac)| {
        let d = PhaseDurations::new(g, a, r);
        SignalProgram::new(SignalId(0), d, frac * d.cycle()).unwrap()
    })
}

fn oracle_phase(p: &SignalProgram, t: f64) -> Phase {
    // Step through whole cycles from the offset; slow but obviously right.
    let cycle = p.green_s + p.amber_s + p.red_s;
    let mut start = p.offset_s;
    while start > t {
        start -= cycle;
    }
    while start + cycle <= t {
        start += cycle;
    }
    let local = t - start;
    if local < p.green_s {
        Phase::Green
    } else if local < p.green_s + p.amber_s {
        Phase::Amber
    } else {
        Phase::Red
    }
}

fn clear_of_boundaries(p: &SignalProgram, t: f64) -> bool {
    let local = (t - p.offset_s).rem_euclid(p.cycle());
    [0.0, p.green_s, p.green_s + p.amber_s, p.cycle()]
        .iter()
        .all(|b| (local - b).abs() > 1e-6)
}

fn light_node() -> Node {
    Node {
        id: NodeId(0),
        position: Point::new(0.0, 0.0),
        kind: NodeKind::Signalized(LightId(0)),
    }
}

fn spat_for(p: &SignalProgram, t: f64) -> SpatMessage {
    make_spat(p, &light_node(), t, Default::default()).unwrap()
}

fn straight(len: f64, limit: f64) -> RoadNetwork {
    build_network(NetworkSpec {
        nodes: vec![
            Node { id: NodeId(0), position: Point::new(0.0, 0.0), kind: NodeKind::Plain },
            Node { id: NodeId(1), position: Point::new(len, 0.0), kind: NodeKind::Plain },
        ],
        links: vec![Link {
            id: LinkId(0),
            from: NodeId(0),
            to: NodeId(1),
            length: len,
            speed_limit: limit,
            stop_line_offset: 0.0,
            signal: None,
        }],
    })
    .unwrap()
}

fn vehicle(route: &Arc<Route>, id: u32, position: f64, speed: f64) -> VehicleState {
    VehicleState {
        id: VehicleId(id),
        route: route.clone(),
        link_index: 0,
        position,
        speed,
        acceleration: 0.0,
        equipped: false,
        desired_speed: 30.0,
        cumulative_co2: 0.0,
        waiting_time: 0.0,
        depart_time: 0.0,
        arrive_time: None,
        odometer: 0.0,
    }
}

/// Integrates the CO2 of a speed profile given as a function of time (g).
fn integrate(profile: impl Fn(f64) -> f64, duration: f64, dt: f64) -> f64 {
    let c = EmissionCoefficients::default();
    let steps = (duration / dt).round() as usize;
    (0..steps)
        .map(|k| {
            let t = k as f64 * dt;
            let (v0, v1) = (profile(t), profile(t + dt));
            co2_rate(0.5 * (v0 + v1), (v1 - v0) / dt, &c) * dt / 1000.0
        })
        .sum()
}

/// Stop-and-go profile: cruise at `vp`, brake to a halt, wait, re-accelerate.
fn stop_and_go(vp: f64, t_brake: f64, b: f64, wait: f64, a: f64) -> impl Fn(f64) -> f64 {
    let t_stop = t_brake + vp / b;
    let t_go = t_stop + wait;
    let t_back = t_go + vp / a;
    move |t| {
        if t < t_brake {
            vp
        } else if t < t_stop {
            vp - b * (t - t_brake)
        } else if t < t_go {
            0.0
        } else if t < t_back {
            a * (t - t_go)
        } else {
            vp
        }
    }
}

/// Every simple path from `from` to `to`, with its free-flow time.
fn all_paths(net: &RoadNetwork, from: NodeId, to: NodeId) -> Vec<f64> {
    fn walk(net: &RoadNetwork, at: NodeId, to: NodeId, seen: &mut Vec<NodeId>, cost: f64, out: &mut Vec<f64>) {
        if at == to {
            out.push(cost);
            return;
        }
        for &l in net.outgoing(at) {
            let link = net.link(l);
            if seen.contains(&link.to) {
                continue;
            }
            seen.push(link.to);
            walk(net, link.to, to, seen, cost + link.free_flow_time(), out);
            seen.pop();
        }
    }
    let mut out = Vec::new();
    walk(net, from, to, &mut vec![from], 0.0, &mut out);
    out
}

fn random_network() -> impl Strategy<Value = RoadNetwork> {
    (3usize..=8)
        .prop_flat_map(|n| {
            let edges = proptest::collection::vec((0..n, 0..n, 50.0..800.0f64, 5.0..20.0f64), 1..20);
            (Just(n), edges)
        })
        .prop_map(|(n, edges)| {
            let nodes = (0..n)
                .map(|i| Node {
                    id: NodeId(i as u32),
                    position: Point::new(i as f64 * 100.0, 0.0),
                    kind: NodeKind::Plain,
                })
                .collect();
            // A directed cycle keeps the network connected.
            let links: Vec<Link> = (0..n)
                .map(|i| (i, (i + 1) % n, 1000.0, 10.0))
                .chain(edges.into_iter().filter(|(a, b, _, _)| a != b))
                .enumerate()
                .map(|(k, (a, b, len, v))| Link {
                    id: LinkId(k as u32),
                    from: NodeId(a as u32),
                    to: NodeId(b as u32),
                    length: len,
                    speed_limit: v,
                    stop_line_offset: 0.0,
                    signal: None,
                })
                .collect();
            build_network(NetworkSpec { nodes, links }).unwrap()
        })
}

proptest! {
    #[test]
    fn phase_matches_oracle(p in program(), t in -5000.0..5000.0f64, k in -20i32..20) {
        prop_assume!(clear_of_boundaries(&p, t));
        let (phase, remaining) = p.phase_at(t);
        prop_assert_eq!(phase, oracle_phase(&p, t));
        prop_assert!(remaining > 0.0 && remaining <= p.duration(phase) + 1e-9);
        let shifted = t + k as f64 * p.cycle();
        prop_assert_eq!(p.phase_at(shifted).0, phase);
    }

    #[test]
    fn green_windows_partition_the_horizon(p in program(), t in 0.0..2000.0f64, s in 0.0..1.0f64) {
        let horizon = 3.0 * p.cycle();
        let windows = p.green_windows(t, horizon);
        for pair in windows.windows(2) {
            prop_assert!(pair[0].end < pair[1].start);
        }
        for w in &windows {
            prop_assert!(w.start >= t - 1e-9 && w.end <= t + horizon + 1e-9);
        }
        let probe = t + s * horizon;
        prop_assume!(clear_of_boundaries(&p, probe));
        prop_assert_eq!(windows.iter().any(|w| w.contains(probe)), oracle_phase(&p, probe) == Phase::Green);
    }

    #[test]
    fn spat_reconstructs_program(p in program(), t in 0.0..2000.0f64, s in 0.0..500.0f64) {
        prop_assume!(clear_of_boundaries(&p, t));
        let back = spat_for(&p, t).to_program().unwrap();
        let probe = t + s;
        prop_assume!(clear_of_boundaries(&p, probe));
        prop_assert_eq!(back.phase_at(probe).0, p.phase_at(probe).0);
    }

    #[test]
    fn advised_arrival_is_green(
        p in program(),
        t in 0.0..1000.0f64,
        d in 1.0..1500.0f64,
        limit in 6.0..20.0f64,
        frac in 0.0..1.0f64,
    ) {
        let params = VehicleParams::default();
        let margin = 2.0;
        let adv = compute_advisory(&spat_for(&p, t), d, frac * limit, limit, &params, 2.0 * p.cycle(), margin).unwrap();
        prop_assert_eq!(adv.target_speed.is_some(), adv.chosen_window.is_some());
        if let (Some(v), Some(w)) = (adv.target_speed, adv.chosen_window) {
            prop_assert!(v >= params.v_min_adv - 1e-9 && v <= limit + 1e-9);
            let arrival = t + d / v;
            prop_assert!(w.contains(arrival) || (arrival - w.start).abs() < 1e-9);
            prop_assert_eq!(oracle_phase(&p, arrival), Phase::Green);
            prop_assert!(p.phase_at(arrival).1 >= margin - 1e-6);
        }
    }

    #[test]
    fn speed_ranges_partition(p in program(), t in 0.0..1000.0f64, d in 1.0..1500.0f64, limit in 6.0..20.0f64) {
        let params = VehicleParams::default();
        let set = speed_ranges(&spat_for(&p, t), d, limit, &params).unwrap();
        prop_assert!(!set.bands.is_empty());
        prop_assert!((set.bands[0].v_lo - params.v_min_adv).abs() < 1e-12);
        prop_assert!((set.bands.last().unwrap().v_hi - limit).abs() < 1e-12);
        for pair in set.bands.windows(2) {
            prop_assert_eq!(pair[0].v_hi, pair[1].v_lo);
            prop_assert!(pair[0].phase != pair[1].phase);
        }
        for b in &set.bands {
            prop_assert!(b.v_lo < b.v_hi);
            let mid = 0.5 * (b.v_lo + b.v_hi);
            let arrival = t + d / mid;
            if clear_of_boundaries(&p, arrival) {
                prop_assert_eq!(set.phase_for(mid), Some(oracle_phase(&p, arrival)));
            }
        }
    }

    #[test]
    fn chosen_window_start_is_monotone_in_distance(
        p in program(),
        t in 0.0..1000.0f64,
        d in 1.0..1000.0f64,
        extra in 0.0..500.0f64,
        limit in 6.0..20.0f64,
    ) {
        let params = VehicleParams::default();
        let spat = spat_for(&p, t);
        let horizon = 2.0 * p.cycle();
        let near = compute_advisory(&spat, d, limit, limit, &params, horizon, 2.0).unwrap();
        let far = compute_advisory(&spat, d + extra, limit, limit, &params, horizon, 2.0).unwrap();
        if let (Some(a), Some(b)) = (near.chosen_window, far.chosen_window) {
            prop_assert!(b.start >= a.start - 1e-9, "near {:?} far {:?}", a, b);
        }
    }

    #[test]
    fn follower_never_collides(
        gap0 in 2.5..80.0f64,
        v_lead in 0.0..20.0f64,
        v_follow in 0.0..20.0f64,
        targets in proptest::collection::vec(0.0..20.0f64, 10),
    ) {
        let net = straight(100_000.0, 20.0);
        let route = Arc::new(Route::new(&net, vec![LinkId(0)]).unwrap());
        let params = VehicleParams::default();
        let dt = 0.1;
        let mut follower = vehicle(&route, 1, 10.0, v_follow);
        let mut leader = vehicle(&route, 0, 10.0 + params.length + gap0, v_lead);
        for step in 0..1000 {
            if step % 100 == 0 {
                leader.desired_speed = targets[step / 100];
            }
            leader = step_vehicle(&leader, &net, &StepInputs { dt, ..Default::default() }, &params);
            let gap = leader.position - params.length - follower.position;
            let inputs = StepInputs { leader: Some(Leader { gap, speed: leader.speed }), dt, ..Default::default() };
            follower = step_vehicle(&follower, &net, &inputs, &params);
            prop_assert!(leader.position - params.length - follower.position >= 0.0);
            prop_assert!(follower.speed >= 0.0);
        }
    }

    #[test]
    fn dijkstra_matches_exhaustive_search(net in random_network(), a in 0usize..8, b in 0usize..8) {
        let n = net.nodes().len();
        let (from, to) = (NodeId((a % n) as u32), NodeId((b % n) as u32));
        prop_assume!(from != to);
        let best = all_paths(&net, from, to).into_iter().fold(f64::INFINITY, f64::min);
        let route = net.shortest_path(from, to).unwrap().expect("strongly connected");
        prop_assert!((route.free_flow_time(&net) - best).abs() < 1e-9);
        prop_assert_eq!(route.origin(&net), from);
        prop_assert_eq!(route.destination(&net), to);
    }

    #[test]
    fn emission_integration_converges(base in 4.0..12.0f64, amp in 0.0..4.0f64, period in 8.0..40.0f64) {
        let w = std::f64::consts::TAU / period;
        let profile = |t: f64| base + amp * (w * t).sin();
        let coarse = integrate(profile, 120.0, 0.1);
        let fine = integrate(profile, 120.0, 0.01);
        prop_assert!((coarse - fine).abs() <= 0.01 * fine, "coarse {} fine {}", coarse, fine);
    }

    #[test]
    fn co2_rate_is_nonnegative(v in 0.0..40.0f64, a in -10.0..5.0f64) {
        prop_assert!(co2_rate(v, a, &EmissionCoefficients::default()) >= 0.0);
    }

    #[test]
    fn cruising_beats_stop_and_go(v in 5.0..14.0f64, wait in 0.0..30.0f64, frac in 0.1..0.9f64) {
        // Same distance in the same time: the stop-and-go profile needs a higher peak.
        let (b, a, distance) = (3.0, 1.5, 1000.0);
        let duration = distance / v;
        let time_for = |vp: f64| distance / vp + vp / (2.0 * b) + vp / (2.0 * a) + wait;
        let (mut lo, mut hi) = (v, 40.0);
        prop_assume!(time_for(hi) <= duration);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if time_for(mid) > duration { lo = mid } else { hi = mid }
        }
        let vp = hi;
        let cruise_before = frac * (distance - vp * vp / (2.0 * b) - vp * vp / (2.0 * a));
        prop_assume!(cruise_before >= 0.0);
        let dt = 0.01;
        let steady = integrate(|_| v, duration, dt);
        let stopping = integrate(stop_and_go(vp, cruise_before / vp, b, wait, a), duration, dt);
        prop_assert!(steady <= stopping, "steady {} stop-and-go {}", steady, stopping);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn engine_is_deterministic_and_conserves_vehicles(
        seed in 0u64..1000,
        veh in 0.0..1.0f64,
        tls in 0.0..1.0f64,
        name in prop::sample::select(vec!["ring-traffic", "grid", "corridor-low"]),
    ) {
        let doc = builtin(name).unwrap();
        let inst = doc.build(seed).unwrap();
        let mut cfg = doc.sim_config(seed);
        cfg.comm.vehicle_penetration = veh;
        cfg.comm.light_penetration = tls;
        let a = run(&inst, &cfg).unwrap();
        let b = run(&inst, &cfg).unwrap();
        prop_assert!(a == b);
        prop_assert_eq!(a.n_inserted + a.n_not_inserted, inst.trips.len());
        prop_assert_eq!(a.n_inserted, a.n_finished + a.n_unfinished);
        prop_assert!(a.min_gap_m.map_or(true, |g| g >= 0.0));
        for r in a.vehicles.iter().filter(|r| r.finished()) {
            let travel = r.arrive.unwrap() - r.depart.unwrap();
            prop_assert!((r.travel_time_s.unwrap() - travel).abs() < 1e-9);
            prop_assert!(r.waiting_time_s >= 0.0 && r.waiting_time_s <= travel + 1e-9);
            prop_assert!(r.co2_g >= 0.0);
        }
    }
}
