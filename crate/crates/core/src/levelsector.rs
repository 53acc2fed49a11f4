//! Levelling-and-sectoring protocol over a geometric field.
//!
//! The base station grades its transmit power into concentric rings; a
//! node's ring index is its level (1 = innermost) and `K` equal angular
//! sectors around the base station give it a sector id. Route replies then
//! travel inward: an intermediate node forwards a packet only when the
//! sender's level is strictly greater and the sectors are circularly
//! adjacent (distance at most 1). Everyone in radio range still pays the
//! reception cost — the rule filters forwarding, not radio reception.

use std::collections::VecDeque;

use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::EnergyModel;
use crate::exact;
use crate::topology::{self, TopologySpec};

#[derive(Debug, Error, PartialEq)]
pub enum LevelSectorError {
    #[error("ring radii must be positive and strictly increasing, got {radii:?}")]
    InvalidRings { radii: Vec<f64> },
    #[error("sector count must be at least 1")]
    ZeroSectors,
    #[error("communication radius must be positive")]
    InvalidCommRadius,
    #[error("nodes beyond the outermost ring: {node_ids:?}")]
    OutOfRange { node_ids: Vec<u64> },
    #[error("node {node_id} coincides with the base station; its sector is undefined")]
    DegeneratePosition { node_id: u64 },
    #[error("duplicate node id {node_id}")]
    DuplicateNodeId { node_id: u64 },
    #[error("field is not connected to the base station; unreachable nodes: {node_ids:?}")]
    FieldDisconnected { node_ids: Vec<u64> },
    #[error("retransmission probability {p} is outside [0, 1]")]
    ProbabilityOutOfRange { p: String },
    #[error("probability {p} does not fit a u64/u64 ratio; cannot sample it exactly")]
    ProbabilityNotSampleable { p: String },
    #[error("unknown data operator {0:?}")]
    UnknownOperator(String),
    #[error("query must look like `<data_type><operator><threshold>`, got {0:?}")]
    MalformedQuery(String),
    #[error("series needs d > i (got i={i}, d={d}); deeper levels only exist below the broadcast")]
    DemoDepthTooShallow { i: u32, d: u32 },
    #[error("nested series needs s <= d (got s={s}, d={d})")]
    DemoRegionTooDeep { s: u32, d: u32 },
    #[error(transparent)]
    Topology(#[from] topology::TopologyError),
}

/// 2-D point, serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point(pub f64, pub f64);

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.0 - other.0).hypot(self.1 - other.1)
    }
}

/// Geometry of the deployment: base-station position, graded power rings
/// (ring `t` covers distances in `(r_{t-1}, r_t]` with `r_0 = 0`), the
/// number of equal angular sectors, and the node-to-node radio range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub bst_position: Point,
    pub ring_radii: Vec<f64>,
    pub sector_count: u32,
    pub comm_radius: f64,
}

impl Field {
    pub fn validate(&self) -> Result<(), LevelSectorError> {
        let increasing = self
            .ring_radii
            .windows(2)
            .all(|w| w[0] < w[1]);
        let positive = self.ring_radii.first().is_some_and(|&r| r > 0.0);
        if !positive || !increasing || self.ring_radii.iter().any(|r| !r.is_finite()) {
            return Err(LevelSectorError::InvalidRings {
                radii: self.ring_radii.clone(),
            });
        }
        if self.sector_count == 0 {
            return Err(LevelSectorError::ZeroSectors);
        }
        if !(self.comm_radius > 0.0) || !self.comm_radius.is_finite() {
            return Err(LevelSectorError::InvalidCommRadius);
        }
        Ok(())
    }
}

/// A sensor node: position plus the datum it would report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePlacement {
    pub id: u64,
    pub pos: Point,
    pub data_type: String,
    pub data_value: f64,
}

/// Field plus placements in the on-disk JSON shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldInput {
    pub bst: Point,
    pub rings: Vec<f64>,
    pub sectors: u32,
    pub comm_radius: f64,
    pub nodes: Vec<NodePlacement>,
}

impl FieldInput {
    pub fn into_parts(self) -> (Field, Vec<NodePlacement>) {
        (
            Field {
                bst_position: self.bst,
                ring_radii: self.rings,
                sector_count: self.sectors,
                comm_radius: self.comm_radius,
            },
            self.nodes,
        )
    }
}

/// Protocol identity of a provisioned node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeIdentity {
    pub node_id: u64,
    /// Ring index, 1-based; 1 is the innermost ring.
    pub level_id: u32,
    /// Angular sector index in `0..K`.
    pub sector_id: u32,
}

/// Ring index (1-based) of each placement, by distance from the base
/// station; the boundary belongs to the inner ring.
pub fn assign_levels(
    field: &Field,
    placements: &[NodePlacement],
) -> Result<Vec<u32>, LevelSectorError> {
    field.validate()?;
    let mut levels = Vec::with_capacity(placements.len());
    let mut out_of_range = Vec::new();
    for node in placements {
        let dist = node.pos.distance(&field.bst_position);
        match field.ring_radii.iter().position(|&r| dist <= r) {
            Some(t) => levels.push(t as u32 + 1),
            None => out_of_range.push(node.id),
        }
    }
    if !out_of_range.is_empty() {
        out_of_range.sort_unstable();
        return Err(LevelSectorError::OutOfRange {
            node_ids: out_of_range,
        });
    }
    Ok(levels)
}

/// Sector index of each placement: `floor(theta / (2*pi/K))` with `theta`
/// the counterclockwise angle from the positive x axis in `[0, 2*pi)`, so
/// a boundary belongs to the higher sector.
pub fn assign_sectors(
    field: &Field,
    placements: &[NodePlacement],
) -> Result<Vec<u32>, LevelSectorError> {
    field.validate()?;
    let k = field.sector_count;
    let width = std::f64::consts::TAU / f64::from(k);
    let mut sectors = Vec::with_capacity(placements.len());
    for node in placements {
        let dx = node.pos.0 - field.bst_position.0;
        let dy = node.pos.1 - field.bst_position.1;
        if dx == 0.0 && dy == 0.0 {
            return Err(LevelSectorError::DegeneratePosition { node_id: node.id });
        }
        let mut theta = dy.atan2(dx);
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        let sector = (theta / width) as u32;
        sectors.push(sector.min(k - 1));
    }
    Ok(sectors)
}

/// Levels and sectors combined into full identities.
pub fn assign_identities(
    field: &Field,
    placements: &[NodePlacement],
) -> Result<Vec<NodeIdentity>, LevelSectorError> {
    let levels = assign_levels(field, placements)?;
    let sectors = assign_sectors(field, placements)?;
    Ok(placements
        .iter()
        .zip(levels.iter().zip(&sectors))
        .map(|(node, (&level_id, &sector_id))| NodeIdentity {
            node_id: node.id,
            level_id,
            sector_id,
        })
        .collect())
}

fn circular_distance(a: u32, b: u32, k: u32) -> u32 {
    let diff = a.abs_diff(b);
    diff.min(k - diff)
}

/// The forwarding rule: a receiver accepts a packet only from a sender
/// with a strictly greater level whose sector is circularly within one of
/// its own.
pub fn accept(sender: &NodeIdentity, receiver: &NodeIdentity, sector_count: u32) -> bool {
    sender.level_id > receiver.level_id
        && circular_distance(sender.sector_id, receiver.sector_id, sector_count) <= 1
}

/// Comparison a query applies to a node's data value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataOperator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl DataOperator {
    pub fn symbol(&self) -> &'static str {
        match self {
            DataOperator::Lt => "<",
            DataOperator::Le => "<=",
            DataOperator::Eq => "=",
            DataOperator::Ge => ">=",
            DataOperator::Gt => ">",
            DataOperator::Ne => "!=",
        }
    }

    pub fn parse(text: &str) -> Result<Self, LevelSectorError> {
        match text {
            "<" => Ok(DataOperator::Lt),
            "<=" | "≤" => Ok(DataOperator::Le),
            "=" | "==" => Ok(DataOperator::Eq),
            ">=" | "≥" => Ok(DataOperator::Ge),
            ">" => Ok(DataOperator::Gt),
            "!=" | "≠" => Ok(DataOperator::Ne),
            other => Err(LevelSectorError::UnknownOperator(other.to_owned())),
        }
    }

    fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            DataOperator::Lt => value < threshold,
            DataOperator::Le => value <= threshold,
            DataOperator::Eq => value == threshold,
            DataOperator::Ge => value >= threshold,
            DataOperator::Gt => value > threshold,
            DataOperator::Ne => value != threshold,
        }
    }
}

/// Content-based query the base station broadcasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub data_type: String,
    pub data_operator: DataOperator,
    pub data_threshold: f64,
}

impl std::str::FromStr for Query {
    type Err = LevelSectorError;

    /// Parses compact query text such as `temp>30` or `humidity<=0.5`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let text = text.trim();
        let start = text
            .find(['<', '>', '=', '!'])
            .ok_or_else(|| LevelSectorError::MalformedQuery(text.to_owned()))?;
        let rest = &text[start..];
        let op_len = if rest.len() >= 2 && matches!(&rest[..2], "<=" | ">=" | "!=" | "==") {
            2
        } else {
            1
        };
        let data_type = text[..start].trim();
        let threshold = rest[op_len..].trim();
        if data_type.is_empty() || threshold.is_empty() {
            return Err(LevelSectorError::MalformedQuery(text.to_owned()));
        }
        Ok(Query {
            data_type: data_type.to_owned(),
            data_operator: DataOperator::parse(&rest[..op_len])?,
            data_threshold: threshold
                .parse()
                .map_err(|_| LevelSectorError::MalformedQuery(text.to_owned()))?,
        })
    }
}

/// Whether a node's datum satisfies a query.
pub fn match_query(query: &Query, node: &NodePlacement) -> bool {
    node.data_type == query.data_type
        && query.data_operator.holds(node.data_value, query.data_threshold)
}

/// Route-reply tuple a matching node originates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub node_id: u64,
    pub level_id: u32,
    pub sector_id: u32,
    pub data_type: String,
    pub data_value: f64,
}

/// Forwarding discipline for the route-reply phase.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryMode {
    /// Every node forwards each distinct reply once.
    PureFlood,
    /// Each node decides once per reply, with probability `p`, on first
    /// reception.
    Controlled { p: BigRational, seed: u64 },
    /// The acceptance rule gates forwarding.
    LevelSector,
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &u128, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<u128, D::Error> {
        String::deserialize(de)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-node share of the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLedger {
    pub node_id: u64,
    pub transmissions: u64,
    pub receptions: u64,
    #[serde(with = "u128_string")]
    pub energy_mj: u128,
}

/// Energy spent answering one query: every transmission and every
/// in-range reception, charged whether or not the receiver went on to
/// forward. `energy_mj = e_t * transmissions + e_r * receptions` exactly,
/// with base-station receptions included in `receptions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub transmissions: u64,
    pub receptions: u64,
    #[serde(with = "u128_string")]
    pub energy_mj: u128,
    pub bst_receptions: u64,
    pub per_node: Vec<NodeLedger>,
    pub delivered_replies: Vec<Reply>,
    pub undelivered_replies: Vec<Reply>,
}

fn coin_rng(seed: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[16..].copy_from_slice(b"ls.query.coin.v1");
    ChaCha8Rng::from_seed(bytes)
}

/// Simulates the route-reply phase of one query.
///
/// Every matching node originates its reply (one unconditional
/// transmission); packets then spread neighbor-to-neighbor under the
/// chosen discipline. A node forwards a given reply at most once in every
/// mode. The event loop is a FIFO queue over transmissions, receivers
/// visited in ascending node id, so runs are deterministic (controlled
/// mode additionally fixes its coin stream from `seed`).
pub fn run_query(
    field: &Field,
    placements: &[NodePlacement],
    em: &EnergyModel,
    query: &Query,
    mode: &QueryMode,
) -> Result<EnergyLedger, LevelSectorError> {
    field.validate()?;
    let identities = assign_identities(field, placements)?;

    // Deterministic internal order: ascending node id.
    let mut order: Vec<usize> = (0..placements.len()).collect();
    order.sort_by_key(|&idx| placements[idx].id);
    for pair in order.windows(2) {
        if placements[pair[0]].id == placements[pair[1]].id {
            return Err(LevelSectorError::DuplicateNodeId {
                node_id: placements[pair[0]].id,
            });
        }
    }
    let nodes: Vec<&NodePlacement> = order.iter().map(|&idx| &placements[idx]).collect();
    let ids: Vec<NodeIdentity> = order.iter().map(|&idx| identities[idx]).collect();
    let n = nodes.len();

    let in_range = |a: &Point, b: &Point| a.distance(b) <= field.comm_radius;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            (0..n)
                .filter(|&v| v != u && in_range(&nodes[u].pos, &nodes[v].pos))
                .collect()
        })
        .collect();
    let bst_in_range: Vec<bool> = (0..n)
        .map(|u| in_range(&nodes[u].pos, &field.bst_position))
        .collect();

    // The whole field must be able to reach the base station.
    let mut reachable = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| bst_in_range[u]).collect();
    for &u in &queue {
        reachable[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &neighbors[u] {
            if !reachable[v] {
                reachable[v] = true;
                queue.push_back(v);
            }
        }
    }
    if reachable.iter().any(|&r| !r) {
        let node_ids = (0..n).filter(|&u| !reachable[u]).map(|u| nodes[u].id).collect();
        return Err(LevelSectorError::FieldDisconnected { node_ids });
    }

    let origins: Vec<usize> = (0..n).filter(|&u| match_query(query, nodes[u])).collect();
    let replies: Vec<Reply> = origins
        .iter()
        .map(|&u| Reply {
            node_id: nodes[u].id,
            level_id: ids[u].level_id,
            sector_id: ids[u].sector_id,
            data_type: nodes[u].data_type.clone(),
            data_value: nodes[u].data_value,
        })
        .collect();

    let mut coin = match mode {
        QueryMode::Controlled { p, seed } => {
            if p.is_negative() || p > &BigRational::one() {
                return Err(LevelSectorError::ProbabilityOutOfRange { p: p.to_string() });
            }
            let ratio = exact::as_u64_ratio(p)
                .ok_or_else(|| LevelSectorError::ProbabilityNotSampleable { p: p.to_string() })?;
            Some((ratio, coin_rng(*seed)))
        }
        _ => None,
    };

    let mut forwarded = vec![vec![false; n]; replies.len()];
    let mut decided = vec![vec![false; n]; replies.len()];
    let mut tx = vec![0u64; n];
    let mut rx = vec![0u64; n];
    let mut bst_receptions = 0u64;
    let mut delivered = vec![false; replies.len()];
    let mut delivery_order: Vec<usize> = Vec::new();
    let mut events: VecDeque<(usize, usize)> = VecDeque::new();
    for (r, &u) in origins.iter().enumerate() {
        forwarded[r][u] = true;
        events.push_back((u, r));
    }

    while let Some((u, r)) = events.pop_front() {
        tx[u] += 1;
        if bst_in_range[u] {
            bst_receptions += 1;
            if !delivered[r] {
                delivered[r] = true;
                delivery_order.push(r);
            }
        }
        for &v in &neighbors[u] {
            rx[v] += 1;
            if forwarded[r][v] {
                continue;
            }
            let forwards = match mode {
                QueryMode::PureFlood => true,
                QueryMode::LevelSector => accept(&ids[u], &ids[v], field.sector_count),
                QueryMode::Controlled { .. } => {
                    if decided[r][v] {
                        false
                    } else {
                        decided[r][v] = true;
                        let ((num, den), rng) = coin.as_mut().expect("controlled mode has a coin");
                        if *den == 1 {
                            *num == 1
                        } else {
                            rng.random_range(0..*den) < *num
                        }
                    }
                }
            };
            if forwards {
                forwarded[r][v] = true;
                events.push_back((v, r));
            }
        }
    }

    let per_node: Vec<NodeLedger> = (0..n)
        .map(|u| NodeLedger {
            node_id: nodes[u].id,
            transmissions: tx[u],
            receptions: rx[u],
            energy_mj: u128::from(em.e_t) * u128::from(tx[u])
                + u128::from(em.e_r) * u128::from(rx[u]),
        })
        .collect();
    let transmissions: u64 = tx.iter().sum();
    let receptions: u64 = rx.iter().sum::<u64>() + bst_receptions;
    let energy_mj =
        u128::from(em.e_t) * u128::from(transmissions) + u128::from(em.e_r) * u128::from(receptions);
    let delivered_replies = delivery_order.iter().map(|&r| replies[r].clone()).collect();
    let undelivered_replies = (0..replies.len())
        .filter(|&r| !delivered[r])
        .map(|r| replies[r].clone())
        .collect();
    Ok(EnergyLedger {
        transmissions,
        receptions,
        energy_mj,
        bst_receptions,
        per_node,
        delivered_replies,
        undelivered_replies,
    })
}

/// Tree family for the constant-output series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoFamily {
    Binary,
    Nested { s: u32 },
}

/// One row of the constant-output series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoPoint {
    pub d: u32,
    pub involved: u64,
    #[serde(with = "u128_string")]
    pub energy_mj: u128,
}

/// Involvement and energy when the protocol is in force: a broadcast from
/// depth `i` reaches depth `i+1` and every deeper node drops it, so the
/// involved set is the depth-`i+1` receivers (plus the depth-`i`
/// transmitters on the energy side) no matter how deep the tree grows.
/// The returned series is therefore constant across `depths`.
pub fn constant_waste_demo(
    family: DemoFamily,
    i: u32,
    em: &EnergyModel,
    depths: &[u32],
) -> Result<Vec<DemoPoint>, LevelSectorError> {
    for &d in depths {
        if d <= i {
            return Err(LevelSectorError::DemoDepthTooShallow { i, d });
        }
        if let DemoFamily::Nested { s } = family {
            if s > d {
                return Err(LevelSectorError::DemoRegionTooDeep { s, d });
            }
        }
    }
    // Counts at depths i and i+1 do not depend on the total depth, so one
    // truncated realization serves every requested d.
    let spec = match family {
        DemoFamily::Binary => TopologySpec::Binary { d: i + 1 },
        DemoFamily::Nested { s } => TopologySpec::Nested {
            s: s.min(i + 1),
            d: i + 1,
        },
    };
    let tree = topology::build(&spec)?;
    let transmitters = tree.nodes_at_depth(i);
    let involved = tree.nodes_at_depth(i + 1);
    let energy_mj =
        u128::from(em.e_t) * u128::from(transmitters) + u128::from(em.e_r) * u128::from(involved);
    let mut sorted = depths.to_vec();
    sorted.sort_unstable();
    Ok(sorted
        .into_iter()
        .map(|d| DemoPoint {
            d,
            involved,
            energy_mj,
        })
        .collect())
}
