//! Road network graph and free-flow shortest-path routing.
//!
//! Networks are single-lane directed graphs in a local planar frame (meters).
//! Node and link ids are dense: the `i`-th node has id `i`, likewise for links.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Identifier of a network node.
    NodeId
);
id_type!(
    /// Identifier of a directed link.
    LinkId
);
id_type!(
    /// Identifier of a signal head (one program governing one or more stop lines).
    SignalId
);
id_type!(
    /// Identifier of a traffic-light installation at a node; the unit of V2I equipment.
    LightId
);

/// Planar position in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeKind {
    Plain,
    /// Node hosts a traffic-light installation.
    Signalized(LightId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: LinkId,
    pub from: NodeId,
    pub to: NodeId,
    /// Length in meters.
    pub length: f64,
    /// Speed limit in m/s.
    pub speed_limit: f64,
    /// Distance of the stop line from the downstream end of the link.
    #[serde(default)]
    pub stop_line_offset: f64,
    /// Signal head governing this link's stop line, if any.
    #[serde(default)]
    pub signal: Option<SignalId>,
}

impl Link {
    /// Free-flow traversal time, the routing weight.
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.speed_limit
    }

    /// Position of the stop line measured from the link start.
    pub fn stop_line(&self) -> f64 {
        self.length - self.stop_line_offset
    }
}

/// Declarative network description; validated into a [`RoadNetwork`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

/// Ordered, connected, non-empty sequence of links.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route {
    links: Vec<LinkId>,
}

impl Route {
    /// Builds a route, checking that consecutive links share a node.
    pub fn new(net: &RoadNetwork, links: Vec<LinkId>) -> Result<Route> {
        if links.is_empty() {
            return Err(Error::Validation("route must contain at least one link".into()));
        }
        for id in &links {
            net.try_link(*id)?;
        }
        for pair in links.windows(2) {
            let (a, b) = (net.link(pair[0]), net.link(pair[1]));
            if a.to != b.from {
                return Err(Error::Validation(format!(
                    "route links {} and {} are not connected",
                    a.id, b.id
                )));
            }
        }
        Ok(Route { links })
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn origin(&self, net: &RoadNetwork) -> NodeId {
        net.link(self.links[0]).from
    }

    pub fn destination(&self, net: &RoadNetwork) -> NodeId {
        net.link(*self.links.last().expect("route is non-empty")).to
    }

    pub fn length(&self, net: &RoadNetwork) -> f64 {
        self.links.iter().map(|l| net.link(*l).length).sum()
    }

    pub fn free_flow_time(&self, net: &RoadNetwork) -> f64 {
        self.links.iter().map(|l| net.link(*l).free_flow_time()).sum()
    }
}

/// Validated, immutable road network.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    links: Vec<Link>,
    outgoing: Vec<Vec<LinkId>>,
    incoming: Vec<Vec<LinkId>>,
}

/// Validates `spec` and builds the network.
pub fn build_network(spec: NetworkSpec) -> Result<RoadNetwork> {
    RoadNetwork::new(spec)
}

impl RoadNetwork {
    pub fn new(spec: NetworkSpec) -> Result<RoadNetwork> {
        let NetworkSpec { nodes, links } = spec;
        if nodes.is_empty() {
            return Err(Error::Validation("network has no nodes".into()));
        }
        if links.is_empty() {
            return Err(Error::Validation("network has no links".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id.index() != i {
                return Err(Error::Validation(format!(
                    "node ids must be unique and dense: expected {i}, found {}",
                    node.id
                )));
            }
            if !(node.position.x.is_finite() && node.position.y.is_finite()) {
                return Err(Error::Validation(format!("node {} has a non-finite position", node.id)));
            }
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for (i, link) in links.iter().enumerate() {
            if link.id.index() != i {
                return Err(Error::Validation(format!(
                    "link ids must be unique and dense: expected {i}, found {}",
                    link.id
                )));
            }
            for end in [link.from, link.to] {
                if end.index() >= nodes.len() {
                    return Err(Error::Validation(format!(
                        "link {} references unknown node {end}",
                        link.id
                    )));
                }
            }
            if !(link.length.is_finite() && link.length > 0.0) {
                return Err(Error::Validation(format!("link {} length must be > 0", link.id)));
            }
            if !(link.speed_limit.is_finite() && link.speed_limit > 0.0) {
                return Err(Error::Validation(format!(
                    "link {} speed limit must be > 0",
                    link.id
                )));
            }
            if !(link.stop_line_offset >= 0.0 && link.stop_line_offset <= link.length) {
                return Err(Error::Validation(format!(
                    "link {} stop line offset must lie within [0, length]",
                    link.id
                )));
            }
            // Self-loops only occur in the one-light ring.
            if link.from == link.to && links.len() > 1 {
                return Err(Error::Validation(format!(
                    "link {} starts and ends at node {}",
                    link.id, link.from
                )));
            }
            outgoing[link.from.index()].push(link.id);
            incoming[link.to.index()].push(link.id);
        }
        for out in &mut outgoing {
            out.sort_by_key(|l| (links[l.index()].to, *l));
        }
        Ok(RoadNetwork {
            nodes,
            links,
            outgoing,
            incoming,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    #[inline]
    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn try_node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id.index())
            .ok_or_else(|| Error::Input(format!("unknown node id {id}")))
    }

    pub fn try_link(&self, id: LinkId) -> Result<&Link> {
        self.links
            .get(id.index())
            .ok_or_else(|| Error::Input(format!("unknown link id {id}")))
    }

    /// Outgoing links of `node`, sorted by destination node id.
    pub fn outgoing(&self, node: NodeId) -> &[LinkId] {
        &self.outgoing[node.index()]
    }

    pub fn incoming(&self, node: NodeId) -> &[LinkId] {
        &self.incoming[node.index()]
    }

    pub fn total_length(&self) -> f64 {
        self.links.iter().map(|l| l.length).sum()
    }

    /// Planar position of a point `offset` meters along `link`.
    pub fn position_on(&self, link: LinkId, offset: f64) -> Point {
        let l = self.link(link);
        let (a, b) = (self.node(l.from).position, self.node(l.to).position);
        a.lerp(b, (offset / l.length).clamp(0.0, 1.0))
    }

    pub fn signalized_nodes(&self) -> impl Iterator<Item = (&Node, LightId)> {
        self.nodes.iter().filter_map(|n| match n.kind {
            NodeKind::Signalized(light) => Some((n, light)),
            NodeKind::Plain => None,
        })
    }

    /// Minimum free-flow-time route from `origin` to `dest`.
    ///
    /// Returns `Ok(None)` when `dest` is unreachable or equals `origin`.
    pub fn shortest_path(&self, origin: NodeId, dest: NodeId) -> Result<Option<Route>> {
        self.try_node(origin)?;
        self.try_node(dest)?;
        if origin == dest {
            return Ok(None);
        }
        let n = self.nodes.len();
        let mut cost = vec![f64::INFINITY; n];
        let mut via: Vec<Option<LinkId>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        cost[origin.index()] = 0.0;
        heap.push(Reverse((Cost(0.0), origin)));

        while let Some(Reverse((Cost(c), node))) = heap.pop() {
            if settled[node.index()] {
                continue;
            }
            settled[node.index()] = true;
            if node == dest {
                break;
            }
            for &lid in self.outgoing(node) {
                let link = self.link(lid);
                let next = link.to.index();
                if settled[next] {
                    continue;
                }
                let candidate = c + link.free_flow_time();
                let better = candidate < cost[next]
                    || (candidate == cost[next]
                        && via[next].is_some_and(|v| self.link(v).from > node));
                if better {
                    cost[next] = candidate;
                    via[next] = Some(lid);
                    heap.push(Reverse((Cost(candidate), link.to)));
                }
            }
        }

        if !settled[dest.index()] {
            return Ok(None);
        }
        let mut links = Vec::new();
        let mut at = dest;
        while at != origin {
            let lid = via[at.index()].expect("settled node has a predecessor");
            links.push(lid);
            at = self.link(lid).from;
        }
        links.reverse();
        Ok(Some(Route { links }))
    }
}

/// Free function form of [`RoadNetwork::shortest_path`].
pub fn shortest_path(net: &RoadNetwork, origin: NodeId, dest: NodeId) -> Result<Option<Route>> {
    net.shortest_path(origin, dest)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
