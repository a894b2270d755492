//! Network geometry: helper/user positions on a torus, pathloss gains and the
//! bipartite helper-user graph.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Euclidean distance on a `side` x `side` torus.
pub fn torus_distance(a: Point, b: Point, side: f64) -> Result<f64> {
    if !(side > 0.0) {
        return Err(Error::config("topology.side", format!("must be positive, got {side}")));
    }
    let wrap = |d: f64| {
        let d = d.abs() % side;
        d.min(side - d)
    };
    Ok(wrap(a.x - b.x).hypot(wrap(a.y - b.y)))
}

/// Large-scale power gain `1 / (1 + (d/40)^3.5)`.
pub fn pathloss_gain(d: f64) -> f64 {
    1.0 / (1.0 + (d / 40.0).powf(3.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Helper {
    pub position: Point,
    /// Linear transmit power, normalized so that noise power is 1.
    pub tx_power: f64,
}

/// The default five-helper layout: one at the center of an `side` square and
/// four at the quarter points.
pub fn default_helper_layout(side: f64, tx_power: f64) -> Vec<Helper> {
    let c = side / 2.0;
    let q = side / 4.0;
    [
        (c, c),
        (c - q, c - q),
        (c + q, c - q),
        (c - q, c + q),
        (c + q, c + q),
    ]
    .into_iter()
    .map(|(x, y)| Helper {
        position: Point::new(x, y),
        tx_power,
    })
    .collect()
}

/// Stratified Poisson placement: a uniform background plus a square hotspot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPlacement {
    pub side: f64,
    pub hotspot_origin: Point,
    pub hotspot_side: f64,
    /// Users per square meter outside the hotspot.
    pub base_density: f64,
    /// Users per square meter inside the hotspot.
    pub hotspot_density: f64,
}

impl UserPlacement {
    /// Centered hotspot of side `side / 3` whose density is `ratio` times the
    /// background, with intensities scaled to an expected `mean_users`.
    pub fn centered(side: f64, mean_users: f64, ratio: f64) -> Self {
        let hs = side / 3.0;
        let hot_area = hs * hs;
        let cold_area = side * side - hot_area;
        let base = mean_users / (cold_area + ratio * hot_area);
        Self {
            side,
            hotspot_origin: Point::new((side - hs) / 2.0, (side - hs) / 2.0),
            hotspot_side: hs,
            base_density: base,
            hotspot_density: ratio * base,
        }
    }

    pub fn expected_users(&self) -> f64 {
        let hot = self.hotspot_side * self.hotspot_side;
        self.base_density * (self.side * self.side - hot) + self.hotspot_density * hot
    }

    fn in_hotspot(&self, p: Point) -> bool {
        let o = self.hotspot_origin;
        p.x >= o.x && p.x < o.x + self.hotspot_side && p.y >= o.y && p.y < o.y + self.hotspot_side
    }

    fn validate(&self) -> Result<()> {
        if !(self.side > 0.0) {
            return Err(Error::config("topology.side", "must be positive"));
        }
        if !(self.base_density >= 0.0 && self.hotspot_density >= 0.0) {
            return Err(Error::config("topology.users", "densities must be nonnegative"));
        }
        let o = self.hotspot_origin;
        if !(self.hotspot_side >= 0.0
            && o.x >= 0.0
            && o.y >= 0.0
            && o.x + self.hotspot_side <= self.side
            && o.y + self.hotspot_side <= self.side)
        {
            return Err(Error::config("topology.hotspot_side", "hotspot must lie inside the region"));
        }
        Ok(())
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    let k: f64 = d.sample(rng);
    k as usize
}

/// Draws user positions; deterministic in `seed`.
pub fn place_users(placement: &UserPlacement, seed: u64) -> Result<Vec<Point>> {
    placement.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hs = placement.hotspot_side;
    let hot_area = hs * hs;
    let cold_area = placement.side * placement.side - hot_area;

    let n_cold = poisson_count(&mut rng, placement.base_density * cold_area);
    let n_hot = poisson_count(&mut rng, placement.hotspot_density * hot_area);

    let mut users = Vec::with_capacity(n_cold + n_hot);
    while users.len() < n_cold {
        let p = Point::new(
            rng.random_range(0.0..placement.side),
            rng.random_range(0.0..placement.side),
        );
        if !placement.in_hotspot(p) {
            users.push(p);
        }
    }
    let o = placement.hotspot_origin;
    for _ in 0..n_hot {
        users.push(Point::new(
            o.x + rng.random_range(0.0..hs.max(f64::MIN_POSITIVE)),
            o.y + rng.random_range(0.0..hs.max(f64::MIN_POSITIVE)),
        ));
    }
    Ok(users)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EdgeRule {
    AllPairs,
    /// Edge iff `P_h * g_hu >= threshold`.
    SnrThreshold(f64),
}

/// G = (U, H, E) plus positions and the file-availability mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub side: f64,
    pub helpers: Vec<Helper>,
    pub users: Vec<Point>,
    helper_neighbors: Vec<Vec<usize>>,
    user_neighbors: Vec<Vec<usize>>,
    /// Row-major helper x user; only meaningful on edges.
    availability: Vec<bool>,
}

/// Builds the bipartite graph. A user that the threshold rule would isolate is
/// attached to its best-gain helper (lowest id on ties).
pub fn build_graph(
    helpers: Vec<Helper>,
    users: Vec<Point>,
    rule: EdgeRule,
    side: f64,
) -> Result<NetworkGraph> {
    if helpers.is_empty() {
        return Err(Error::config("topology.helpers", "no helpers"));
    }
    if users.is_empty() {
        return Err(Error::config("topology.users", "no users"));
    }
    let nh = helpers.len();
    let mut helper_neighbors = vec![Vec::new(); nh];
    let mut user_neighbors = vec![Vec::new(); users.len()];
    for (u, &pos) in users.iter().enumerate() {
        let rssi: Vec<f64> = helpers
            .iter()
            .map(|h| torus_distance(h.position, pos, side).map(|d| h.tx_power * pathloss_gain(d)))
            .collect::<Result<_>>()?;
        for (h, &r) in rssi.iter().enumerate() {
            let linked = match rule {
                EdgeRule::AllPairs => true,
                EdgeRule::SnrThreshold(th) => r >= th,
            };
            if linked {
                user_neighbors[u].push(h);
            }
        }
        if user_neighbors[u].is_empty() {
            let best = argmax_lowest(&rssi);
            user_neighbors[u].push(best);
        }
        for &h in &user_neighbors[u] {
            helper_neighbors[h].push(u);
        }
    }
    let mut availability = vec![false; nh * users.len()];
    for (u, hs) in user_neighbors.iter().enumerate() {
        for &h in hs {
            availability[h * users.len() + u] = true;
        }
    }
    Ok(NetworkGraph {
        side,
        helpers,
        users,
        helper_neighbors,
        user_neighbors,
        availability,
    })
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl NetworkGraph {
    pub fn num_helpers(&self) -> usize {
        self.helpers.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// N(h), ascending user ids.
    pub fn helper_neighbors(&self, h: usize) -> &[usize] {
        &self.helper_neighbors[h]
    }

    /// N(u), ascending helper ids.
    pub fn user_neighbors(&self, u: usize) -> &[usize] {
        &self.user_neighbors[u]
    }

    pub fn is_edge(&self, h: usize, u: usize) -> bool {
        self.helper_neighbors[h].binary_search(&u).is_ok()
    }

    pub fn num_edges(&self) -> usize {
        self.helper_neighbors.iter().map(Vec::len).sum()
    }

    /// 1_{hu}: helper `h` holds the file user `u` asks for. False off-edge.
    pub fn has_file(&self, h: usize, u: usize) -> bool {
        self.availability[h * self.users.len() + u]
    }

    /// Overrides 1_{hu} on an existing edge.
    pub fn set_file_availability(&mut self, h: usize, u: usize, available: bool) -> Result<()> {
        if !self.is_edge(h, u) {
            return Err(Error::Domain(format!("({h}, {u}) is not an edge")));
        }
        self.availability[h * self.users.len() + u] = available;
        Ok(())
    }

    /// Every user must be able to fetch its file from at least one neighbor.
    pub fn check_availability(&self) -> Result<()> {
        for u in 0..self.num_users() {
            if !self.user_neighbors[u].iter().any(|&h| self.has_file(h, u)) {
                return Err(Error::config(
                    "topology.availability",
                    format!("user {u} has no neighbor holding its file"),
                ));
            }
        }
        Ok(())
    }

    /// CSV rows `nodeType,id,x,y`.
    pub fn write_nodes_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["nodeType", "id", "x", "y"])?;
        for (i, h) in self.helpers.iter().enumerate() {
            w.write_record(["helper", &i.to_string(), &h.position.x.to_string(), &h.position.y.to_string()])?;
        }
        for (i, p) in self.users.iter().enumerate() {
            w.write_record(["user", &i.to_string(), &p.x.to_string(), &p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mobility {
    Static,
    /// Random waypoint at a constant speed in m/s.
    Waypoint { speed: f64 },
}

/// Current user positions under a mobility model.
#[derive(Debug, Clone)]
pub struct MobilityState {
    model: Mobility,
    positions: Vec<Point>,
    targets: Vec<Point>,
    side: f64,
    rng: ChaCha8Rng,
}

impl MobilityState {
    pub fn new(graph: &NetworkGraph, model: Mobility, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = graph.side;
        let targets = match model {
            Mobility::Static => Vec::new(),
            Mobility::Waypoint { .. } => (0..graph.num_users())
                .map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
                .collect(),
        };
        Self {
            model,
            positions: graph.users.clone(),
            targets,
            side,
            rng,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self.model, Mobility::Static)
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Moves every user `dt` seconds toward its waypoint, drawing a fresh
    /// waypoint on arrival.
    pub fn advance(&mut self, dt: f64) {
        let Mobility::Waypoint { speed } = self.model else {
            return;
        };
        let step = speed * dt;
        for (p, target) in self.positions.iter_mut().zip(self.targets.iter_mut()) {
            let (dx, dy) = (target.x - p.x, target.y - p.y);
            let dist = dx.hypot(dy);
            if dist <= step {
                *p = *target;
                *target = Point::new(
                    self.rng.random_range(0.0..self.side),
                    self.rng.random_range(0.0..self.side),
                );
            } else {
                p.x += dx / dist * step;
                p.y += dy / dist * step;
            }
        }
    }
}

/// omega(t): pathloss gains for every helper-user pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyState {
    pub slot: u64,
    num_users: usize,
    gains: Vec<f64>,
}

impl TopologyState {
    /// Gains from explicit user positions.
    pub fn from_positions(graph: &NetworkGraph, positions: &[Point], slot: u64) -> Result<Self> {
        let mut gains = Vec::with_capacity(graph.num_helpers() * positions.len());
        for h in &graph.helpers {
            for &p in positions {
                gains.push(pathloss_gain(torus_distance(h.position, p, graph.side)?));
            }
        }
        Ok(Self {
            slot,
            num_users: positions.len(),
            gains,
        })
    }

    /// Gains from raw values, row-major helper x user. Used by tests and
    /// bindings that bypass geometry.
    pub fn from_gains(num_helpers: usize, num_users: usize, gains: Vec<f64>) -> Result<Self> {
        if gains.len() != num_helpers * num_users {
            return Err(Error::Domain(format!(
                "expected {} gains, got {}",
                num_helpers * num_users,
                gains.len()
            )));
        }
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Domain("gains must be finite and nonnegative".into()));
        }
        Ok(Self {
            slot: 0,
            num_users,
            gains,
        })
    }

    pub fn gain(&self, h: usize, u: usize) -> f64 {
        self.gains[h * self.num_users + u]
    }

    /// CSV rows `helperId,userId,gainLinear`.
    pub fn write_gains_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["helperId", "userId", "gainLinear"])?;
        let nh = self.gains.len() / self.num_users.max(1);
        for h in 0..nh {
            for u in 0..self.num_users {
                w.write_record([h.to_string(), u.to_string(), self.gain(h, u).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// omega(t) for the graph's own positions (static model).
pub fn topology_state(graph: &NetworkGraph, t: u64, mobility: &MobilityState) -> Result<TopologyState> {
    TopologyState::from_positions(graph, mobility.positions(), t)
}
