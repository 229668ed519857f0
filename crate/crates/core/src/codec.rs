//! Partial-Hadamard encoder and the analog successive-cancellation decoder.
//!
//! The decoder walks indices k = 1..N of the transform vector `y = fwht(x)`.
//! Reserved indices come straight from the measurements; the rest are
//! estimated as the MAP atom of the conditional distribution of `y_k` given
//! all previously fixed values. Conditionals are computed over a depth-n
//! binary tree: each node represents a sub-block of the recursion, combines
//! its two children with `f` (odd index) or `g` (even index, conditioning on
//! the buffered odd value), and after both values of a pair are fixed pushes
//! `(y_odd ± y_even)/sqrt(2)` down to the children. Each node performs one
//! `f` and one `g` per pair it sees, so a full pass costs at most
//! 2 N log2 N distribution operations, and every leaf bottoms out at the
//! source distribution.

use crate::hadamard::{self, HadamardError, IndexSet};
use crate::mixdist::{MixedDistribution, PrunePolicy, SourceModel};
use crate::polarops::{f_combine, g_condition, nearest_support_point, PolarOpsError};
use thiserror::Error;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error(transparent)]
    Hadamard(#[from] HadamardError),
    #[error(transparent)]
    PolarOps(#[from] PolarOpsError),
}

/// Outcome classification of one SC decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    /// Every unreserved index had an atomic MAP decision.
    Success,
    /// The conditional at this 1-based index had no atoms; the output is the
    /// least-squares fallback.
    FailedAt(usize),
    /// A conditional degenerated numerically (zero density at an observed
    /// value after pruning); the output is the least-squares fallback.
    FallbackUsed,
}

/// Distribution-operation counters for one SC pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub f_ops: usize,
    pub g_ops: usize,
    /// Largest atom count seen across all computed conditionals.
    pub max_atoms: usize,
    /// Largest Gaussian-component count seen across all computed conditionals.
    pub max_gaussians: usize,
    /// Conditionings that missed the pruned support and were re-anchored to
    /// the nearest surviving support point.
    pub resyncs: usize,
}

impl DecodeStats {
    fn observe(&mut self, d: &MixedDistribution) {
        self.max_atoms = self.max_atoms.max(d.atoms.len());
        self.max_gaussians = self.max_gaussians.max(d.gaussians.len());
    }
}

#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub status: DecodeStatus,
    pub stats: DecodeStats,
}

/// One node of the SC recursion tree; handles a sub-block of 2^level values.
#[derive(Debug)]
struct Node {
    level: u32,
    pending_odd: Option<f64>,
    /// Child distributions at the children's current positions, filled on
    /// demand and reused between the odd (`f`) and even (`g`) query of a pair.
    cache: Option<(MixedDistribution, MixedDistribution)>,
    children: Option<Box<(Node, Node)>>,
}

impl Node {
    fn new(level: u32) -> Node {
        Node {
            level,
            pending_odd: None,
            cache: None,
            children: if level > 1 {
                Some(Box::new((Node::new(level - 1), Node::new(level - 1))))
            } else {
                None
            },
        }
    }

    fn child_dists(
        &mut self,
        source: &MixedDistribution,
        policy: &PrunePolicy,
        stats: &mut DecodeStats,
    ) -> Result<&(MixedDistribution, MixedDistribution), PolarOpsError> {
        if self.cache.is_none() {
            let pair = match &mut self.children {
                Some(c) => (
                    c.0.next_dist(source, policy, stats)?,
                    c.1.next_dist(source, policy, stats)?,
                ),
                None => (source.clone(), source.clone()),
            };
            self.cache = Some(pair);
        }
        Ok(self.cache.as_ref().unwrap())
    }

    /// Conditional distribution of the next value this node will receive,
    /// given everything pushed so far.
    fn next_dist(
        &mut self,
        source: &MixedDistribution,
        policy: &PrunePolicy,
        stats: &mut DecodeStats,
    ) -> Result<MixedDistribution, PolarOpsError> {
        if self.level == 0 {
            return Ok(source.clone());
        }
        let pending = self.pending_odd;
        let (d1, d2) = self.child_dists(source, policy, stats)?;
        let out = match pending {
            None => {
                stats.f_ops += 1;
                f_combine(d1, d2, policy)
            }
            Some(y_odd) => {
                stats.g_ops += 1;
                match g_condition(d1, d2, y_odd, policy) {
                    Ok(d) => d,
                    Err(PolarOpsError::ConditioningUndefined { .. }) => {
                        // An exact conditional always contains the value that
                        // was actually fixed, so a miss means pruning dropped
                        // the matching support point. Re-condition on the
                        // nearest surviving one instead of giving up.
                        match nearest_support_point(d1, d2, y_odd) {
                            Some(y_near) => {
                                stats.resyncs += 1;
                                g_condition(d1, d2, y_near, policy)?
                            }
                            None => {
                                return Err(PolarOpsError::ConditioningUndefined { y: y_odd })
                            }
                        }
                    }
                }
            }
        };
        stats.observe(&out);
        Ok(out)
    }

    /// Fix the next value. After a complete (odd, even) pair the rotated pair
    /// propagates to the children and the cached child distributions expire.
    fn push(&mut self, y: f64) {
        if self.level == 0 {
            return;
        }
        match self.pending_odd.take() {
            None => self.pending_odd = Some(y),
            Some(y_odd) => {
                if let Some(c) = &mut self.children {
                    c.0.push((y_odd + y) / SQRT_2);
                    c.1.push((y_odd - y) / SQRT_2);
                }
                self.cache = None;
            }
        }
    }
}

/// Streaming interface over the SC recursion: alternate [`ScTree::next_dist`]
/// and [`ScTree::push`] for k = 1..N. Construction drives it genie-aided
/// (pushing true values); the decoder pushes decisions. The interface only
/// ever exposes the conditional of the *next* index, which enforces decoding
/// causality.
#[derive(Debug)]
pub struct ScTree {
    root: Node,
    source: MixedDistribution,
    policy: PrunePolicy,
    position: usize,
    len: usize,
    pub stats: DecodeStats,
}

impl ScTree {
    pub fn new(n_bits: u32, source: &SourceModel, policy: &PrunePolicy) -> ScTree {
        ScTree {
            root: Node::new(n_bits),
            source: source.distribution.clone(),
            policy: *policy,
            position: 0,
            len: 1usize << n_bits,
            stats: DecodeStats::default(),
        }
    }

    /// Conditional distribution of index `position + 1` (1-based) given the
    /// values pushed so far.
    pub fn next_dist(&mut self) -> Result<MixedDistribution, PolarOpsError> {
        assert!(self.position < self.len, "past end of block");
        self.root
            .next_dist(&self.source, &self.policy, &mut self.stats)
    }

    /// Fix the value of the next index and advance.
    pub fn push(&mut self, y: f64) {
        assert!(self.position < self.len, "past end of block");
        self.root.push(y);
        self.position += 1;
    }

    pub fn position(&self) -> usize {
        self.position
    }
}

/// `z = H_A x`: transform and keep the reserved coefficients.
pub fn encode(x: &[f64], set: &IndexSet) -> Result<Vec<f64>, CodecError> {
    let y = hadamard::fwht(x)?;
    Ok(hadamard::project_rows(&y, set)?)
}

/// Least-squares estimate `H_A^T z`; exact pseudo-inverse because the kept
/// rows are orthonormal.
pub fn ls_fallback(z: &[f64], set: &IndexSet, n: usize) -> Result<Vec<f64>, CodecError> {
    Ok(hadamard::embed_rows_transpose(z, set, n)?)
}

fn fallback_result(
    z: &[f64],
    set: &IndexSet,
    n: usize,
    status: DecodeStatus,
    stats: DecodeStats,
) -> Result<DecodeResult, CodecError> {
    let mut y_hat = vec![0.0; n];
    for (v, &i) in z.iter().zip(set.indices()) {
        y_hat[i - 1] = *v;
    }
    let x_hat = hadamard::fwht(&y_hat)?;
    Ok(DecodeResult {
        x_hat,
        y_hat,
        status,
        stats,
    })
}

/// Analog SC decoding of measurements `z` taken at the reserved set.
pub fn sc_decode(
    z: &[f64],
    set: &IndexSet,
    source: &SourceModel,
    policy: &PrunePolicy,
) -> Result<DecodeResult, CodecError> {
    let n = set.signal_len();
    if z.len() != set.len() {
        return Err(HadamardError::SizeMismatch {
            got: z.len(),
            expected: set.len(),
        }
        .into());
    }
    let n_bits = if n.is_power_of_two() && n > 0 {
        n.trailing_zeros()
    } else {
        return Err(HadamardError::NotPowerOfTwo(n).into());
    };

    let mut tree = ScTree::new(n_bits, source, policy);
    let mask = set.mask();
    let mut z_iter = z.iter();
    let mut y_hat = Vec::with_capacity(n);
    for k in 0..n {
        let y_k = if mask[k] {
            *z_iter.next().expect("|z| == |A| checked above")
        } else {
            let dist = match tree.next_dist() {
                Ok(d) => d,
                Err(PolarOpsError::ConditioningUndefined { .. }) => {
                    return fallback_result(z, set, n, DecodeStatus::FallbackUsed, tree.stats);
                }
            };
            match dist.map_estimate() {
                Some((location, _)) => location,
                None => {
                    return fallback_result(z, set, n, DecodeStatus::FailedAt(k + 1), tree.stats);
                }
            }
        };
        tree.push(y_k);
        y_hat.push(y_k);
    }
    let x_hat = hadamard::fwht(&y_hat)?;
    Ok(DecodeResult {
        x_hat,
        y_hat,
        status: DecodeStatus::Success,
        stats: tree.stats,
    })
}
