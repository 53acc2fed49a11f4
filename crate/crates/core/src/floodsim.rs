//! Structural flooding oracle: propagates broadcasts over explicit trees
//! instead of evaluating closed forms, so the two routes can be compared
//! exactly.
//!
//! Propagation model, fixed for the whole module: every node at the
//! broadcast depth `i` transmits with certainty; a node below receives iff
//! its parent transmitted; every receiver with children retransmits —
//! unconditionally under pure flooding, independently with probability `p`
//! under controlled flooding (leaves have nobody to forward to and never
//! transmit). Receptions at depth `i+1` are necessary; receptions at
//! depths `i+2` and beyond, and all transmissions by nodes below depth
//! `i`, are unnecessary.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::analytic::{EnergyModel, WastageReport};
use crate::exact;
use crate::topology::Tree;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FloodsimError {
    #[error("no nodes at broadcast depth {depth}")]
    EmptyBroadcastDepth { depth: u32 },
    #[error("no broadcasters given")]
    EmptyBroadcasterSet,
    #[error("broadcaster id {id} does not exist (tree has {nodes} nodes)")]
    UnknownBroadcaster { id: usize, nodes: usize },
    #[error("retransmission probability {p} is outside [0, 1]")]
    ProbabilityOutOfRange { p: String },
    #[error("probability {p} does not fit a u64/u64 ratio; cannot sample it exactly")]
    ProbabilityNotSampleable { p: String },
    #[error("trial count must be at least 1")]
    ZeroTrials,
}

/// How an outcome's per-node values are to be read.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeKind {
    /// Booleans (0 or 1): deterministic pure flood.
    Pure,
    /// Exact probabilities from the expectation recurrence.
    Expectation { p: BigRational },
    /// Empirical frequencies over seeded trials.
    MonteCarlo { p: BigRational, trials: u64, seed: u64 },
}

/// Per-node transmission/reception values plus per-depth aggregate sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOutcome {
    pub kind: OutcomeKind,
    /// Depth the broadcast started from (absent for explicit broadcaster
    /// sets spanning several depths).
    pub broadcast_depth: Option<u32>,
    pub broadcaster_count: u64,
    /// Transmission value per node id.
    pub transmit: Vec<BigRational>,
    /// Reception value per node id.
    pub receive: Vec<BigRational>,
    /// Sum of transmission values per depth.
    pub tx_by_depth: Vec<BigRational>,
    /// Sum of reception values per depth.
    pub rx_by_depth: Vec<BigRational>,
}

impl PropagationOutcome {
    fn from_per_node(
        tree: &Tree,
        kind: OutcomeKind,
        broadcast_depth: Option<u32>,
        broadcaster_count: u64,
        transmit: Vec<BigRational>,
        receive: Vec<BigRational>,
    ) -> Self {
        let depths = tree.max_depth() as usize + 1;
        let tx_by_depth = sum_by_depth(tree, &transmit, depths);
        let rx_by_depth = sum_by_depth(tree, &receive, depths);
        PropagationOutcome {
            kind,
            broadcast_depth,
            broadcaster_count,
            transmit,
            receive,
            tx_by_depth,
            rx_by_depth,
        }
    }

    /// JSON rendering with exact values as strings. Per-node detail is
    /// large on deep trees, so it is included only on request.
    pub fn to_json(&self, include_per_node: bool) -> serde_json::Value {
        let kind = match &self.kind {
            OutcomeKind::Pure => json!({ "model": "pure" }),
            OutcomeKind::Expectation { p } => {
                json!({ "model": "expectation", "p": p.to_string() })
            }
            OutcomeKind::MonteCarlo { p, trials, seed } => json!({
                "model": "monte_carlo",
                "p": p.to_string(),
                "trials": trials,
                "seed": seed,
            }),
        };
        let strings = |v: &[BigRational]| -> Vec<String> {
            v.iter().map(|x| x.to_string()).collect()
        };
        let mut value = json!({
            "kind": kind,
            "broadcast_depth": self.broadcast_depth,
            "broadcaster_count": self.broadcaster_count,
            "tx_by_depth": strings(&self.tx_by_depth),
            "rx_by_depth": strings(&self.rx_by_depth),
        });
        if include_per_node {
            value["nodes"] = (0..self.transmit.len())
                .map(|id| {
                    json!({
                        "id": id,
                        "transmit": self.transmit[id].to_string(),
                        "receive": self.receive[id].to_string(),
                    })
                })
                .collect();
        }
        value
    }
}

/// Sums `values` per depth. Consecutive equal values at one depth (the
/// common case: nodes arrive in breadth-first order and same-depth nodes
/// carry the same probability) collapse into a single multiply-add.
fn sum_by_depth(tree: &Tree, values: &[BigRational], depths: usize) -> Vec<BigRational> {
    let mut by_depth = vec![BigRational::zero(); depths];
    let mut run: Option<(usize, &BigRational, u64)> = None;
    let mut flush = |acc: &mut Vec<BigRational>, run: Option<(usize, &BigRational, u64)>| {
        if let Some((depth, value, count)) = run {
            if !value.is_zero() {
                acc[depth] += value * exact::int(count);
            }
        }
    };
    for node in &tree.nodes {
        let value = &values[node.id];
        let depth = node.depth as usize;
        match run {
            Some((d, v, count)) if d == depth && v == value => run = Some((d, v, count + 1)),
            prev => {
                flush(&mut by_depth, prev);
                run = Some((depth, value, 1));
            }
        }
    }
    flush(&mut by_depth, run);
    by_depth
}

fn broadcasters_at_depth(tree: &Tree, depth: u32) -> Result<Vec<usize>, FloodsimError> {
    let ids = tree.ids_at_depth(depth);
    if ids.is_empty() {
        return Err(FloodsimError::EmptyBroadcastDepth { depth });
    }
    Ok(ids)
}

fn check_broadcasters(tree: &Tree, broadcasters: &[usize]) -> Result<(), FloodsimError> {
    if broadcasters.is_empty() {
        return Err(FloodsimError::EmptyBroadcasterSet);
    }
    for &id in broadcasters {
        if id >= tree.len() {
            return Err(FloodsimError::UnknownBroadcaster {
                id,
                nodes: tree.len(),
            });
        }
    }
    Ok(())
}

fn check_probability(p: &BigRational) -> Result<(), FloodsimError> {
    if p.is_negative() || p > &BigRational::one() {
        return Err(FloodsimError::ProbabilityOutOfRange { p: p.to_string() });
    }
    Ok(())
}

/// Pure flood from every node at depth `i`.
pub fn flood_pure(tree: &Tree, i: u32) -> Result<PropagationOutcome, FloodsimError> {
    let broadcasters = broadcasters_at_depth(tree, i)?;
    let mut outcome = flood_pure_from(tree, &broadcasters)?;
    outcome.broadcast_depth = Some(i);
    Ok(outcome)
}

/// Pure flood from an explicit broadcaster set.
pub fn flood_pure_from(
    tree: &Tree,
    broadcasters: &[usize],
) -> Result<PropagationOutcome, FloodsimError> {
    check_broadcasters(tree, broadcasters)?;
    let n = tree.len();
    let mut transmit = vec![BigRational::zero(); n];
    let mut receive = vec![BigRational::zero(); n];
    let mut stack: Vec<usize> = broadcasters.to_vec();
    for &b in broadcasters {
        transmit[b] = BigRational::one();
    }
    while let Some(u) = stack.pop() {
        for &c in &tree.nodes[u].children {
            receive[c] = BigRational::one();
            if !tree.nodes[c].children.is_empty() {
                transmit[c] = BigRational::one();
                stack.push(c);
            }
        }
    }
    Ok(PropagationOutcome::from_per_node(
        tree,
        OutcomeKind::Pure,
        None,
        broadcasters.len() as u64,
        transmit,
        receive,
    ))
}

/// Exact per-node expectations of a controlled flood from depth `i`.
///
/// Reception events along a root-to-leaf path factor as independent
/// Bernoulli products in a tree, so a single top-down pass gives the
/// exact probabilities: a node `m` levels below the broadcast depth (in a
/// broadcaster's subtree) receives with probability `p^(m-1)` and, unless
/// it is a leaf, transmits with probability `p^m`.
pub fn flood_controlled_expectation(
    tree: &Tree,
    i: u32,
    p: &BigRational,
) -> Result<PropagationOutcome, FloodsimError> {
    check_probability(p)?;
    let broadcasters = broadcasters_at_depth(tree, i)?;
    let n = tree.len();
    let mut transmit = vec![BigRational::zero(); n];
    let mut receive = vec![BigRational::zero(); n];
    let mut stack: Vec<usize> = Vec::new();
    for &b in &broadcasters {
        transmit[b] = BigRational::one();
        stack.push(b);
    }
    while let Some(u) = stack.pop() {
        let parent_tx = transmit[u].clone();
        // Every child receives with the parent's transmission probability
        // and forwards it damped by p; one multiplication serves them all.
        let child_tx = &parent_tx * p;
        for &c in &tree.nodes[u].children {
            receive[c] = parent_tx.clone();
            if !tree.nodes[c].children.is_empty() {
                if !child_tx.is_zero() {
                    stack.push(c);
                }
                transmit[c] = child_tx.clone();
            }
        }
    }
    Ok(PropagationOutcome::from_per_node(
        tree,
        OutcomeKind::Expectation { p: p.clone() },
        Some(i),
        broadcasters.len() as u64,
        transmit,
        receive,
    ))
}

/// Generator for one Monte Carlo trial.
///
/// The seeding contract is a pure function of the master seed and the
/// trial index — the 32-byte ChaCha8 seed is the little-endian master
/// seed, then the little-endian trial index, then the fixed tag
/// `floodsim.trial.v1` — so trials are independent of execution order and
/// results are reproducible across runs and thread schedules.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&trial.to_le_bytes());
    bytes[16..].copy_from_slice(b"floodsim.trial.1");
    ChaCha8Rng::from_seed(bytes)
}

/// One sampled flood. Within a trial, nodes are expanded depth-first from
/// the broadcasters (ascending-id order, children in stored order) and one
/// uniform draw decides each non-leaf reception's retransmission.
fn run_trial(
    tree: &Tree,
    broadcasters: &[usize],
    num: u64,
    den: u64,
    rng: &mut ChaCha8Rng,
    transmitted: &mut [bool],
    received: &mut [bool],
    stack: &mut Vec<usize>,
) {
    transmitted.fill(false);
    received.fill(false);
    stack.clear();
    for &b in broadcasters {
        transmitted[b] = true;
        stack.push(b);
    }
    while let Some(u) = stack.pop() {
        for &c in &tree.nodes[u].children {
            received[c] = true;
            if !tree.nodes[c].children.is_empty() {
                let forwards = if den == 1 {
                    num == 1
                } else {
                    rng.random_range(0..den) < num
                };
                if forwards {
                    transmitted[c] = true;
                    stack.push(c);
                }
            }
        }
    }
}

/// Per-node flags of a single seeded trial; exposed so tests can check
/// trial-level invariants such as reception implying the parent's
/// transmission.
pub fn controlled_trial_flags(
    tree: &Tree,
    i: u32,
    p: &BigRational,
    seed: u64,
    trial: u64,
) -> Result<(Vec<bool>, Vec<bool>), FloodsimError> {
    check_probability(p)?;
    let (num, den) = exact::as_u64_ratio(p)
        .ok_or_else(|| FloodsimError::ProbabilityNotSampleable { p: p.to_string() })?;
    let broadcasters = broadcasters_at_depth(tree, i)?;
    let n = tree.len();
    let mut transmitted = vec![false; n];
    let mut received = vec![false; n];
    let mut stack = Vec::new();
    let mut rng = trial_rng(seed, trial);
    run_trial(
        tree,
        &broadcasters,
        num,
        den,
        &mut rng,
        &mut transmitted,
        &mut received,
        &mut stack,
    );
    Ok((transmitted, received))
}

/// Exact sample statistics of a per-trial count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleStats {
    pub trials: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl SampleStats {
    pub fn mean(&self) -> BigRational {
        exact::ratio(BigInt::from(self.sum), BigInt::from(self.trials))
    }

    /// Unbiased sample variance; zero for fewer than two trials.
    pub fn sample_variance(&self) -> BigRational {
        if self.trials < 2 {
            return BigRational::zero();
        }
        let n = BigInt::from(self.trials);
        let sum = BigInt::from(self.sum);
        let sum_sq = BigInt::from(self.sum_sq);
        exact::ratio(&n * sum_sq - &sum * &sum, &n * (&n - BigInt::one()))
    }

    /// Estimated standard error of the mean, `sqrt(variance / trials)`.
    pub fn std_error(&self) -> f64 {
        (exact::approx(&self.sample_variance()) / self.trials as f64).sqrt()
    }
}

/// Monte Carlo outcome: empirical frequencies plus sample statistics of
/// the unnecessary-involvement counts.
#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub outcome: PropagationOutcome,
    /// Stats of the per-trial count of unnecessary transmitters.
    pub unnecessary_tx: SampleStats,
    /// Stats of the per-trial count of unnecessary receivers.
    pub unnecessary_rx: SampleStats,
}

struct TrialAccumulator {
    tx_count: Vec<u64>,
    rx_count: Vec<u64>,
    trials: u64,
    tx_sum: u128,
    tx_sum_sq: u128,
    rx_sum: u128,
    rx_sum_sq: u128,
    transmitted: Vec<bool>,
    received: Vec<bool>,
    stack: Vec<usize>,
}

impl TrialAccumulator {
    fn new(n: usize) -> Self {
        TrialAccumulator {
            tx_count: vec![0; n],
            rx_count: vec![0; n],
            trials: 0,
            tx_sum: 0,
            tx_sum_sq: 0,
            rx_sum: 0,
            rx_sum_sq: 0,
            transmitted: vec![false; n],
            received: vec![false; n],
            stack: Vec::new(),
        }
    }

    fn absorb_trial(&mut self, tree: &Tree, i: u32) {
        let mut unnec_tx = 0u64;
        let mut unnec_rx = 0u64;
        for node in &tree.nodes {
            if self.transmitted[node.id] {
                self.tx_count[node.id] += 1;
                if node.depth > i {
                    unnec_tx += 1;
                }
            }
            if self.received[node.id] {
                self.rx_count[node.id] += 1;
                if node.depth > i + 1 {
                    unnec_rx += 1;
                }
            }
        }
        self.trials += 1;
        self.tx_sum += u128::from(unnec_tx);
        self.tx_sum_sq += u128::from(unnec_tx) * u128::from(unnec_tx);
        self.rx_sum += u128::from(unnec_rx);
        self.rx_sum_sq += u128::from(unnec_rx) * u128::from(unnec_rx);
    }

    // Plain sums, so merging is order-independent and the aggregate is
    // bitwise identical for any thread schedule.
    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.tx_count.iter_mut().zip(&other.tx_count) {
            *a += b;
        }
        for (a, b) in self.rx_count.iter_mut().zip(&other.rx_count) {
            *a += b;
        }
        self.trials += other.trials;
        self.tx_sum += other.tx_sum;
        self.tx_sum_sq += other.tx_sum_sq;
        self.rx_sum += other.rx_sum;
        self.rx_sum_sq += other.rx_sum_sq;
        self
    }
}

/// Seeded Monte Carlo estimate of a controlled flood from depth `i`.
///
/// Trial `t` draws from [`trial_rng`]`(seed, t)`, so the estimate is a
/// pure function of `(seed, trials)` no matter how trials are scheduled
/// across threads.
pub fn flood_controlled_mc(
    tree: &Tree,
    i: u32,
    p: &BigRational,
    trials: u64,
    seed: u64,
) -> Result<McOutcome, FloodsimError> {
    if trials == 0 {
        return Err(FloodsimError::ZeroTrials);
    }
    check_probability(p)?;
    let (num, den) = exact::as_u64_ratio(p)
        .ok_or_else(|| FloodsimError::ProbabilityNotSampleable { p: p.to_string() })?;
    let broadcasters = broadcasters_at_depth(tree, i)?;
    let n = tree.len();

    let acc = (0..trials)
        .into_par_iter()
        .fold(
            || TrialAccumulator::new(n),
            |mut acc, trial| {
                let mut rng = trial_rng(seed, trial);
                run_trial(
                    tree,
                    &broadcasters,
                    num,
                    den,
                    &mut rng,
                    &mut acc.transmitted,
                    &mut acc.received,
                    &mut acc.stack,
                );
                acc.absorb_trial(tree, i);
                acc
            },
        )
        .reduce(|| TrialAccumulator::new(n), TrialAccumulator::merge);

    let freq = |count: &[u64]| -> Vec<BigRational> {
        count.iter().map(|&c| exact::ratio(c, trials)).collect()
    };
    let outcome = PropagationOutcome::from_per_node(
        tree,
        OutcomeKind::MonteCarlo {
            p: p.clone(),
            trials,
            seed,
        },
        Some(i),
        broadcasters.len() as u64,
        freq(&acc.tx_count),
        freq(&acc.rx_count),
    );
    Ok(McOutcome {
        outcome,
        unnecessary_tx: SampleStats {
            trials,
            sum: acc.tx_sum,
            sum_sq: acc.tx_sum_sq,
        },
        unnecessary_rx: SampleStats {
            trials,
            sum: acc.rx_sum,
            sum_sq: acc.rx_sum_sq,
        },
    })
}

/// Wastage computed from a propagation outcome.
///
/// `t_x` charges every broadcaster's own transmission
/// (`e_t * broadcasters + e_t * b_t`); the closed forms charge a single
/// `e_t` instead, so that reading is carried alongside as `t_x_single`
/// and `e_total_single`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralWastage {
    pub b_t: BigRational,
    pub b_r: BigRational,
    pub t_x: BigRational,
    pub r_x: BigRational,
    pub n_total: BigRational,
    pub e_total: BigRational,
    pub t_x_single: BigRational,
    pub e_total_single: BigRational,
    pub broadcasters: u64,
    pub energy_model: EnergyModel,
}

impl StructuralWastage {
    /// The single-broadcast-term reading as a [`WastageReport`], for exact
    /// comparison against the closed forms.
    pub fn as_report(&self) -> WastageReport {
        WastageReport::from_counts(self.b_t.clone(), self.b_r.clone(), &self.energy_model)
    }
}

/// Classifies an outcome's involvement as necessary or wasted, for a
/// broadcast that started at depth `i`: transmitters below depth `i` and
/// receivers below depth `i+1` are unnecessary.
pub fn wastage_structural(
    outcome: &PropagationOutcome,
    i: u32,
    em: &EnergyModel,
) -> StructuralWastage {
    let sum_from = |per_depth: &[BigRational], from: u32| -> BigRational {
        per_depth
            .iter()
            .skip(from as usize)
            .fold(BigRational::zero(), |acc, x| acc + x)
    };
    let b_t = sum_from(&outcome.tx_by_depth, i + 1);
    let b_r = sum_from(&outcome.rx_by_depth, i + 2);
    let e_t = exact::int(em.e_t);
    let e_r = exact::int(em.e_r);
    let t_x = &e_t * exact::int(outcome.broadcaster_count) + &e_t * &b_t;
    let t_x_single = &e_t + &e_t * &b_t;
    let r_x = &e_r * &b_r;
    let n_total = &b_t + &b_r;
    let e_total = &t_x + &r_x;
    let e_total_single = &t_x_single + &r_x;
    StructuralWastage {
        b_t,
        b_r,
        t_x,
        r_x,
        n_total,
        e_total,
        t_x_single,
        e_total_single,
        broadcasters: outcome.broadcaster_count,
        energy_model: *em,
    }
}

/// Difference of one report field between the analytic and structural
/// routes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDiff {
    pub field: &'static str,
    pub analytic: BigRational,
    pub structural: BigRational,
    /// `analytic - structural`.
    pub difference: BigRational,
}

impl FieldDiff {
    pub fn is_zero(&self) -> bool {
        self.difference.is_zero()
    }
}

/// Field-by-field exact comparison of an analytic report against the
/// single-broadcast-term reading of a structural result.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyRecord {
    pub fields: Vec<FieldDiff>,
}

impl DiscrepancyRecord {
    pub fn all_zero(&self) -> bool {
        self.fields.iter().all(FieldDiff::is_zero)
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &FieldDiff> {
        self.fields.iter().filter(|f| !f.is_zero())
    }
}

pub fn compare(analytic: &WastageReport, structural: &StructuralWastage) -> DiscrepancyRecord {
    let report = structural.as_report();
    let pairs: [(&'static str, &BigRational, &BigRational); 6] = [
        ("b_t", &analytic.b_t, &report.b_t),
        ("b_r", &analytic.b_r, &report.b_r),
        ("t_x", &analytic.t_x, &report.t_x),
        ("r_x", &analytic.r_x, &report.r_x),
        ("n_total", &analytic.n_total, &report.n_total),
        ("e_total", &analytic.e_total, &report.e_total),
    ];
    let fields = pairs
        .into_iter()
        .map(|(field, a, s)| FieldDiff {
            field,
            analytic: a.clone(),
            structural: s.clone(),
            difference: a - s,
        })
        .collect();
    DiscrepancyRecord { fields }
}
