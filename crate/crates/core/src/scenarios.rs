//! Builders for the three experiment families: a signalized ring track,
//! a Manhattan grid, and a shuttle corridor embedded in a background grid.
//!
//! A [`ScenarioSpec`] is the serializable description; [`build`] turns it
//! into a [`ScenarioInstance`] for one seed (signal offsets, origins,
//! destinations and departure times all come from seeded substreams).

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{
    build_network, LightId, Link, LinkId, NetworkSpec, Node, NodeId, NodeKind, Point,
    RoadNetwork, Route, SignalId,
};
use crate::rng::{substream, Substream};
use crate::signalctl::{PhaseDurations, SignalProgram};

pub const URBAN_SPEED_LIMIT: f64 = 13.9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    #[default]
    Car,
    Shuttle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Ring(RingSpec),
    Grid(GridSpec),
    Corridor(CorridorSpec),
}

/// Closed loop of equally spaced signalized nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub spacing_m: f64,
    pub n_lights: usize,
    pub program: PhaseDurations,
    pub synchronized: bool,
    /// Explicit per-light offsets; overrides `synchronized` and the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets_s: Option<Vec<f64>>,
    pub speed_limit: f64,
    /// Number of vehicles entering at node 0.
    pub vehicles: usize,
    /// Time between consecutive entries (s).
    pub headway_s: f64,
    /// Links each vehicle drives before leaving the track.
    pub route_links: usize,
}

impl Default for RingSpec {
    /// The single test vehicle: one lap, crossing the far light once.
    fn default() -> Self {
        RingSpec {
            spacing_m: 1500.0,
            n_lights: 2,
            program: PhaseDurations::default(),
            synchronized: false,
            offsets_s: None,
            speed_limit: URBAN_SPEED_LIMIT,
            vehicles: 1,
            headway_s: 10.0,
            route_links: 2,
        }
    }
}

impl RingSpec {
    /// One vehicle every 10 s up to 100, each driving one and a half laps.
    pub fn with_traffic() -> Self {
        RingSpec {
            vehicles: 100,
            route_links: 3,
            ..RingSpec::default()
        }
    }
}

/// `n × n` grid with a signalized `core × core` center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub link_m: f64,
    pub core: usize,
    pub program: PhaseDurations,
    pub synchronized: bool,
    pub speed_limit: f64,
    pub vehicles: usize,
    /// Departures are spread as a Poisson process over `[0, insertion_window_s)`.
    pub insertion_window_s: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 5,
            link_m: 900.0,
            core: 3,
            program: PhaseDurations::default(),
            synchronized: false,
            speed_limit: URBAN_SPEED_LIMIT,
            vehicles: 200,
            insertion_window_s: 600.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Low,
    Medium,
    High,
}

/// Demand row of one density level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorridorDemand {
    pub shuttle_period_s: f64,
    pub corridor_period_s: f64,
    pub background_vehicles: usize,
}

impl Density {
    pub fn demand(self) -> CorridorDemand {
        let (shuttle_period_s, corridor_period_s, background_vehicles) = match self {
            Density::Low => (200.0, 60.0, 128),
            Density::Medium => (100.0, 30.0, 257),
            Density::High => (50.0, 15.0, 408),
        };
        CorridorDemand {
            shuttle_period_s,
            corridor_period_s,
            background_vehicles,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Density::Low => "low",
            Density::Medium => "medium",
            Density::High => "high",
        }
    }
}

/// Shuttle route between two terminals along the middle of a background grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorSpec {
    pub density: Density,
    /// Nodes along the corridor, terminals included.
    pub columns: usize,
    pub column_spacing_m: f64,
    pub rows: usize,
    pub row_spacing_m: f64,
    /// Row index carrying the shuttle route.
    pub corridor_row: usize,
    pub program: PhaseDurations,
    pub synchronized: bool,
    pub speed_limit: f64,
    /// Window during which shuttles and corridor vehicles depart (s).
    pub demand_window_s: f64,
    /// Seconds between background departures.
    pub background_period_s: f64,
}

impl CorridorSpec {
    pub fn new(density: Density) -> Self {
        CorridorSpec {
            density,
            columns: 8,
            column_spacing_m: 2500.0 / 7.0,
            rows: 3,
            row_spacing_m: 1000.0,
            corridor_row: 1,
            program: PhaseDurations::default(),
            synchronized: false,
            speed_limit: URBAN_SPEED_LIMIT,
            demand_window_s: 600.0,
            background_period_s: 1.0,
        }
    }
}

/// A signal head: one program governing the stop lines of some approaches of a light.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalHead {
    pub program: SignalProgram,
    pub node: NodeId,
    pub light: LightId,
}

/// A scheduled trip.
#[derive(Clone, Debug, PartialEq)]
pub struct Trip {
    pub id: u32,
    pub depart_time: f64,
    pub route: Arc<Route>,
    pub class: VehicleClass,
}

/// A fully resolved scenario for one seed.
#[derive(Clone, Debug)]
pub struct ScenarioInstance {
    pub name: String,
    pub network: RoadNetwork,
    /// Indexed by [`SignalId`].
    pub signals: Vec<SignalHead>,
    /// Node of each light, indexed by [`LightId`].
    pub lights: Vec<NodeId>,
    /// Sorted by departure time; `trips[i].id == i`.
    pub trips: Vec<Trip>,
}

impl ScenarioInstance {
    /// Checks cross-references between network, signals and trips.
    pub fn validate(&self) -> Result<()> {
        for (i, head) in self.signals.iter().enumerate() {
            if head.program.signal_id.index() != i {
                return Err(Error::Validation(format!("signal {i} has mismatched id")));
            }
            head.program.validate()?;
            if head.light.index() >= self.lights.len() {
                return Err(Error::Validation(format!("signal {i} references unknown light")));
            }
        }
        for link in self.network.links() {
            if let Some(sig) = link.signal {
                let head = self.signals.get(sig.index()).ok_or_else(|| {
                    Error::Validation(format!("link {} references unknown signal {sig}", link.id))
                })?;
                if head.node != link.to {
                    return Err(Error::Validation(format!(
                        "signal {sig} on link {} is not at its downstream node",
                        link.id
                    )));
                }
            }
        }
        for (i, trip) in self.trips.iter().enumerate() {
            if trip.id as usize != i {
                return Err(Error::Validation(format!("trip at index {i} has id {}", trip.id)));
            }
            if !(trip.depart_time.is_finite() && trip.depart_time >= 0.0) {
                return Err(Error::Validation(format!("trip {} has invalid departure", trip.id)));
            }
            Route::new(&self.network, trip.route.links().to_vec())?;
        }
        Ok(())
    }

    pub fn signal(&self, id: SignalId) -> &SignalHead {
        &self.signals[id.index()]
    }

    pub fn count_class(&self, class: VehicleClass) -> usize {
        self.trips.iter().filter(|t| t.class == class).count()
    }
}

impl ScenarioSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ScenarioSpec::Ring(_) => "ring",
            ScenarioSpec::Grid(_) => "grid",
            ScenarioSpec::Corridor(_) => "corridor",
        }
    }
}

/// Resolves `spec` for `seed`.
pub fn build(spec: &ScenarioSpec, seed: u64) -> Result<ScenarioInstance> {
    let instance = match spec {
        ScenarioSpec::Ring(s) => build_ring(s, seed)?,
        ScenarioSpec::Grid(s) => build_grid(s, seed)?,
        ScenarioSpec::Corridor(s) => build_corridor(s, seed)?,
    };
    instance.validate()?;
    Ok(instance)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be > 0, got {v}")))
    }
}

/// Cycle offsets per light: zero when synchronized, otherwise uniform in `[0, cycle)`.
fn light_offsets(n: usize, program: &PhaseDurations, synchronized: bool, seed: u64) -> Vec<f64> {
    if synchronized {
        return vec![0.0; n];
    }
    let cycle = program.cycle();
    let mut rng = substream(seed, Substream::Offsets);
    (0..n).map(|_| rng.gen_range(0.0..cycle)).collect()
}

fn program_for(id: usize, durations: PhaseDurations, offset: f64) -> Result<SignalProgram> {
    let cycle = durations.cycle();
    SignalProgram::new(SignalId(id as u32), durations, offset.rem_euclid(cycle) % cycle)
}

/// Timing of the cross-street head: its green sits inside the main head's red,
/// with equal all-red clearance on both sides.
fn cross_offset(durations: &PhaseDurations, main_offset: f64) -> Result<f64> {
    let needed = durations.green_s + durations.amber_s;
    if durations.red_s < needed {
        return Err(Error::Validation(format!(
            "red ({}) must cover the cross street's green + amber ({needed})",
            durations.red_s
        )));
    }
    let clearance = (durations.red_s - needed) / 2.0;
    Ok(main_offset + durations.green_s + durations.amber_s + clearance)
}

pub fn build_ring(spec: &RingSpec, seed: u64) -> Result<ScenarioInstance> {
    if spec.n_lights == 0 {
        return Err(Error::Validation("ring needs at least one light".into()));
    }
    positive("ring spacing_m", spec.spacing_m)?;
    positive("ring speed_limit", spec.speed_limit)?;
    if spec.vehicles > 0 {
        positive("ring headway_s", spec.headway_s)?;
        if spec.route_links == 0 {
            return Err(Error::Validation("ring route_links must be > 0".into()));
        }
    }
    let n = spec.n_lights;
    let circumference = spacing_total(spec);
    let radius = circumference / (2.0 * std::f64::consts::PI);
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Node {
                id: NodeId(i as u32),
                position: Point::new(radius * angle.cos(), radius * angle.sin()),
                kind: NodeKind::Signalized(LightId(i as u32)),
            }
        })
        .collect();
    let links: Vec<Link> = (0..n)
        .map(|i| Link {
            id: LinkId(i as u32),
            from: NodeId(i as u32),
            to: NodeId(((i + 1) % n) as u32),
            length: spec.spacing_m,
            speed_limit: spec.speed_limit,
            stop_line_offset: 0.0,
            signal: Some(SignalId(((i + 1) % n) as u32)),
        })
        .collect();
    let network = build_network(NetworkSpec { nodes, links })?;

    let offsets = match &spec.offsets_s {
        Some(o) if o.len() != n => {
            return Err(Error::Validation(format!(
                "ring offsets_s has {} entries for {n} lights",
                o.len()
            )))
        }
        Some(o) => o.clone(),
        None => light_offsets(n, &spec.program, spec.synchronized, seed),
    };
    let signals = offsets
        .iter()
        .enumerate()
        .map(|(i, off)| {
            Ok(SignalHead {
                program: program_for(i, spec.program, *off)?,
                node: NodeId(i as u32),
                light: LightId(i as u32),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let route_links: Vec<LinkId> = (0..spec.route_links).map(|k| LinkId((k % n) as u32)).collect();
    let trips = if spec.vehicles == 0 {
        Vec::new()
    } else {
        let route = Arc::new(Route::new(&network, route_links)?);
        (0..spec.vehicles)
            .map(|i| Trip {
                id: i as u32,
                depart_time: i as f64 * spec.headway_s,
                route: Arc::clone(&route),
                class: VehicleClass::Car,
            })
            .collect()
    };
    Ok(ScenarioInstance {
        name: "ring".into(),
        network,
        signals,
        lights: (0..n).map(|i| NodeId(i as u32)).collect(),
        trips,
    })
}

fn spacing_total(spec: &RingSpec) -> f64 {
    spec.spacing_m * spec.n_lights as f64
}

/// Rectangular lattice shared by the grid and corridor scenarios.
struct Lattice {
    cols: usize,
    rows: usize,
}

impl Lattice {
    fn id(&self, col: usize, row: usize) -> NodeId {
        NodeId((row * self.cols + col) as u32)
    }

    fn col_row(&self, node: NodeId) -> (usize, usize) {
        (node.index() % self.cols, node.index() / self.cols)
    }

    fn is_boundary(&self, node: NodeId) -> bool {
        let (c, r) = self.col_row(node);
        c == 0 || r == 0 || c + 1 == self.cols || r + 1 == self.rows
    }

    /// Nodes, two-way links and signal heads. `light_at` says which nodes carry lights.
    fn build(
        &self,
        dx: f64,
        dy: f64,
        speed_limit: f64,
        program: PhaseDurations,
        offsets: &dyn Fn(usize) -> f64,
        light_at: &dyn Fn(usize, usize) -> bool,
    ) -> Result<(RoadNetwork, Vec<SignalHead>, Vec<NodeId>)> {
        let mut nodes = Vec::new();
        let mut lights = Vec::new();
        let mut heads = Vec::new();
        // (main head, cross head) per node
        let mut node_heads: Vec<Option<(SignalId, SignalId)>> = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let id = self.id(c, r);
                let kind = if light_at(c, r) {
                    let light = LightId(lights.len() as u32);
                    let main_off = offsets(lights.len());
                    let main = SignalId(heads.len() as u32);
                    heads.push(SignalHead {
                        program: program_for(heads.len(), program, main_off)?,
                        node: id,
                        light,
                    });
                    let cross = SignalId(heads.len() as u32);
                    heads.push(SignalHead {
                        program: program_for(heads.len(), program, cross_offset(&program, main_off)?)?,
                        node: id,
                        light,
                    });
                    lights.push(id);
                    node_heads.push(Some((main, cross)));
                    NodeKind::Signalized(light)
                } else {
                    node_heads.push(None);
                    NodeKind::Plain
                };
                nodes.push(Node {
                    id,
                    position: Point::new(c as f64 * dx, r as f64 * dy),
                    kind,
                });
            }
        }
        let mut links = Vec::new();
        let mut add = |from: NodeId, to: NodeId, length: f64, vertical: bool| {
            let signal = node_heads[to.index()].map(|(main, cross)| if vertical { main } else { cross });
            links.push(Link {
                id: LinkId(links.len() as u32),
                from,
                to,
                length,
                speed_limit,
                stop_line_offset: 0.0,
                signal,
            });
        };
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c + 1 < self.cols {
                    add(self.id(c, r), self.id(c + 1, r), dx, false);
                    add(self.id(c + 1, r), self.id(c, r), dx, false);
                }
                if r + 1 < self.rows {
                    add(self.id(c, r), self.id(c, r + 1), dy, true);
                    add(self.id(c, r + 1), self.id(c, r), dy, true);
                }
            }
        }
        let network = build_network(NetworkSpec { nodes, links })?;
        Ok((network, heads, lights))
    }
}

fn random_trip_route<R: Rng>(
    net: &RoadNetwork,
    origins: &[NodeId],
    rng: &mut R,
) -> Result<Route> {
    let n = net.nodes().len();
    loop {
        let o = origins[rng.gen_range(0..origins.len())];
        let d = NodeId(rng.gen_range(0..n) as u32);
        if let Some(route) = net.shortest_path(o, d)? {
            return Ok(route);
        }
    }
}

pub fn build_grid(spec: &GridSpec, seed: u64) -> Result<ScenarioInstance> {
    if spec.n < 3 {
        return Err(Error::Validation(format!("grid n must be >= 3, got {}", spec.n)));
    }
    if spec.core == 0 || spec.core > spec.n - 2 {
        return Err(Error::Validation(format!(
            "grid core must be in [1, n - 2], got {}",
            spec.core
        )));
    }
    positive("grid link_m", spec.link_m)?;
    positive("grid speed_limit", spec.speed_limit)?;
    positive("grid insertion_window_s", spec.insertion_window_s)?;
    let lattice = Lattice {
        cols: spec.n,
        rows: spec.n,
    };
    let lo = (spec.n - spec.core) / 2;
    let hi = lo + spec.core;
    let offsets = light_offsets(spec.core * spec.core, &spec.program, spec.synchronized, seed);
    let (network, signals, lights) = lattice.build(
        spec.link_m,
        spec.link_m,
        spec.speed_limit,
        spec.program,
        &|i| offsets[i],
        &|c, r| (lo..hi).contains(&c) && (lo..hi).contains(&r),
    )?;

    let boundary: Vec<NodeId> = network
        .nodes()
        .iter()
        .map(|n| n.id)
        .filter(|id| lattice.is_boundary(*id))
        .collect();
    let mut route_rng = substream(seed, Substream::Routes);
    let mut depart_rng = substream(seed, Substream::Departures);
    let mut departs: Vec<f64> = (0..spec.vehicles)
        .map(|_| depart_rng.gen_range(0.0..spec.insertion_window_s))
        .collect();
    departs.sort_by(f64::total_cmp);
    let trips = departs
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(Trip {
                id: i as u32,
                depart_time: t,
                route: Arc::new(random_trip_route(&network, &boundary, &mut route_rng)?),
                class: VehicleClass::Car,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioInstance {
        name: "grid".into(),
        network,
        signals,
        lights,
        trips,
    })
}

pub fn build_corridor(spec: &CorridorSpec, seed: u64) -> Result<ScenarioInstance> {
    if spec.columns < 3 || spec.rows < 1 || spec.corridor_row >= spec.rows {
        return Err(Error::Validation(
            "corridor needs >= 3 columns and a corridor row inside the grid".into(),
        ));
    }
    positive("corridor column_spacing_m", spec.column_spacing_m)?;
    positive("corridor row_spacing_m", spec.row_spacing_m)?;
    positive("corridor speed_limit", spec.speed_limit)?;
    positive("corridor demand_window_s", spec.demand_window_s)?;
    positive("corridor background_period_s", spec.background_period_s)?;
    let lattice = Lattice {
        cols: spec.columns,
        rows: spec.rows,
    };
    let n_lights = spec.columns - 2;
    let offsets = light_offsets(n_lights, &spec.program, spec.synchronized, seed);
    let row = spec.corridor_row;
    let (network, signals, lights) = lattice.build(
        spec.column_spacing_m,
        spec.row_spacing_m,
        spec.speed_limit,
        spec.program,
        &|i| offsets[i],
        &|c, r| r == row && c > 0 && c + 1 < spec.columns,
    )?;

    let station = lattice.id(0, row);
    let site = lattice.id(spec.columns - 1, row);
    let outbound = Arc::new(corridor_route(&network, station, site)?);
    let inbound = Arc::new(corridor_route(&network, site, station)?);

    let demand = spec.density.demand();
    let mut trips = Vec::new();
    let push_periodic = |period: f64, class: VehicleClass, trips: &mut Vec<Trip>| {
        let count = (spec.demand_window_s / period).round() as usize;
        for k in 0..count {
            for route in [&outbound, &inbound] {
                trips.push(Trip {
                    id: 0,
                    depart_time: k as f64 * period,
                    route: Arc::clone(route),
                    class,
                });
            }
        }
    };
    push_periodic(demand.shuttle_period_s, VehicleClass::Shuttle, &mut trips);
    push_periodic(demand.corridor_period_s, VehicleClass::Car, &mut trips);

    let all_nodes: Vec<NodeId> = network.nodes().iter().map(|n| n.id).collect();
    let mut route_rng = substream(seed, Substream::Routes);
    for k in 0..demand.background_vehicles {
        trips.push(Trip {
            id: 0,
            depart_time: k as f64 * spec.background_period_s,
            route: Arc::new(random_trip_route(&network, &all_nodes, &mut route_rng)?),
            class: VehicleClass::Car,
        });
    }
    trips.sort_by(|a, b| a.depart_time.total_cmp(&b.depart_time));
    for (i, t) in trips.iter_mut().enumerate() {
        t.id = i as u32;
    }
    Ok(ScenarioInstance {
        name: format!("corridor-{}", spec.density.name()),
        network,
        signals,
        lights,
        trips,
    })
}

fn corridor_route(net: &RoadNetwork, from: NodeId, to: NodeId) -> Result<Route> {
    net.shortest_path(from, to)?
        .ok_or_else(|| Error::Validation("corridor terminals are not connected".into()))
}
