//! Value-typed algebra of nonsingular distributions restricted to the family
//! "finite point atoms + finite Gaussian mixture".
//!
//! The family is closed under the butterfly operations of [`crate::polarops`]:
//! sums of independent members stay in the family, and conditioning a jointly
//! Gaussian pair stays Gaussian. Component weights are carried in the linear
//! domain; density evaluations happen in the log domain (see `ln_normal_pdf`)
//! so far-tail conditioning does not underflow.

use crate::quadrature::{self, QuadratureError, QuadratureSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

pub const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("degenerate distribution: total weight {0} is not positive")]
    DegenerateWeight(f64),
    #[error("negative component weight {0}")]
    NegativeWeight(f64),
    #[error("gaussian variance must be strictly positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("invalid distribution JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// One Gaussian mixture component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

/// Finite atoms plus a finite Gaussian mixture; a nonsingular probability
/// measure once normalized. Atom locations are kept strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixedDistribution {
    pub atoms: Vec<Atom>,
    pub gaussians: Vec<GaussianComponent>,
}

/// Caps and tolerances that keep support sizes bounded along the SC recursion
/// (raw support grows doubly exponentially without pruning).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrunePolicy {
    /// Atoms within this absolute distance merge into one.
    pub eps_atom: f64,
    /// Components below this weight are dropped.
    pub eps_weight: f64,
    /// Maximum number of atoms kept.
    pub max_atoms: usize,
    /// Maximum number of Gaussian components kept.
    pub max_gaussians: usize,
}

impl Default for PrunePolicy {
    fn default() -> Self {
        PrunePolicy {
            eps_atom: 1e-9,
            eps_weight: 1e-12,
            max_atoms: 4096,
            max_gaussians: 64,
        }
    }
}

/// Natural-log density of N(mean, var) at x.
pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + (2.0 * std::f64::consts::PI * var).ln())
}

/// Binary entropy in bits; h2(0) = h2(1) = 0.
pub fn h2(x: f64) -> f64 {
    let mut s = 0.0;
    if x > 0.0 {
        s -= x * x.log2();
    }
    if x < 1.0 {
        s -= (1.0 - x) * (1.0 - x).log2();
    }
    s
}

/// Inverse of h2 on [0, 1/2], by bisection to 1e-14.
pub fn h2_inv(y: f64) -> f64 {
    assert!((0.0..=1.0).contains(&y), "h2_inv domain is [0,1], got {y}");
    if y >= 1.0 {
        // Flat top of h2: bisection would stall at ~sqrt(eps) accuracy.
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h2(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Numerically stable log(sum(exp(xs))).
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    // Terms more than 40 nats below the max underflow the sum.
    let s: f64 = xs
        .iter()
        .filter(|&&x| x > m - 40.0)
        .map(|x| (x - m).exp())
        .sum();
    m + s.ln()
}

impl MixedDistribution {
    /// Single point mass at `x`.
    pub fn delta(x: f64) -> Self {
        MixedDistribution {
            atoms: vec![Atom {
                location: x,
                weight: 1.0,
            }],
            gaussians: vec![],
        }
    }

    /// Pure Gaussian N(mean, var).
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        MixedDistribution {
            atoms: vec![],
            gaussians: vec![GaussianComponent {
                mean,
                variance,
                weight: 1.0,
            }],
        }
    }

    /// Bernoulli-Gaussian (1-rho) delta_0 + rho N(0, sigma2).
    pub fn bernoulli_gaussian(rho: f64, sigma2: f64) -> Self {
        let mut d = MixedDistribution::default();
        if rho < 1.0 {
            d.atoms.push(Atom {
                location: 0.0,
                weight: 1.0 - rho,
            });
        }
        if rho > 0.0 {
            d.gaussians.push(GaussianComponent {
                mean: 0.0,
                variance: sigma2,
                weight: rho,
            });
        }
        d
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>()
            + self.gaussians.iter().map(|g| g.weight).sum::<f64>()
    }

    /// Rescale weights to sum to 1 and canonicalize atom order.
    pub fn normalize(&self) -> Result<Self, DistError> {
        for a in &self.atoms {
            if a.weight < 0.0 {
                return Err(DistError::NegativeWeight(a.weight));
            }
        }
        for g in &self.gaussians {
            if g.weight < 0.0 {
                return Err(DistError::NegativeWeight(g.weight));
            }
            if g.variance <= 0.0 {
                return Err(DistError::NonPositiveVariance(g.variance));
            }
        }
        let total = self.total_weight();
        if !(total > 0.0) || !total.is_finite() {
            return Err(DistError::DegenerateWeight(total));
        }
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.weight /= total;
        }
        for g in &mut out.gaussians {
            g.weight /= total;
        }
        if !out.atoms.is_sorted_by(|a, b| a.location <= b.location) {
            out.atoms
                .sort_unstable_by(|x, y| x.location.total_cmp(&y.location));
        }
        Ok(out)
    }

    /// Renyi information dimension: the total Gaussian weight.
    pub fn rid(&self) -> f64 {
        self.gaussians.iter().map(|g| g.weight).sum()
    }

    /// Shannon entropy (bits) of the atom weights renormalized to mass 1.
    /// Returns 0 when there are no atoms.
    pub fn discrete_entropy(&self) -> f64 {
        let mass: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if mass <= 0.0 {
            return 0.0;
        }
        self.atoms
            .iter()
            .filter(|a| a.weight > 0.0)
            .map(|a| {
                let p = a.weight / mass;
                -p * p.log2()
            })
            .sum()
    }

    /// (1 - rid) * discrete_entropy.
    pub fn weighted_discrete_entropy(&self) -> f64 {
        (1.0 - self.rid()) * self.discrete_entropy()
    }

    /// Mixed entropy rho*h(C) + (1-rho)*H(D) + h2(rho), in bits. The
    /// differential entropy of the normalized Gaussian part is computed by
    /// adaptive quadrature over the union of +/-8 sigma intervals.
    pub fn mixed_entropy(&self, spec: &QuadratureSpec) -> Result<f64, DistError> {
        let rho = self.rid();
        let mut total = (1.0 - rho) * self.discrete_entropy() + h2(rho);
        if rho > 0.0 {
            total += rho * self.continuous_differential_entropy(spec)?;
        }
        Ok(total)
    }

    /// Differential entropy (bits) of the Gaussian-mixture part renormalized
    /// to mass 1. Caller must ensure rid > 0.
    pub fn continuous_differential_entropy(&self, spec: &QuadratureSpec) -> Result<f64, DistError> {
        let rho = self.rid();
        assert!(rho > 0.0, "no continuous component");
        let comps: Vec<GaussianComponent> = self
            .gaussians
            .iter()
            .filter(|g| g.weight > 0.0)
            .map(|g| GaussianComponent {
                weight: g.weight / rho,
                ..*g
            })
            .collect();
        let intervals = quadrature::merge_intervals(
            comps
                .iter()
                .map(|g| {
                    let s = g.variance.sqrt();
                    (g.mean - 8.0 * s, g.mean + 8.0 * s)
                })
                .collect(),
        );
        let ln_density = |x: f64| {
            let terms: Vec<f64> = comps
                .iter()
                .map(|g| g.weight.ln() + ln_normal_pdf(x, g.mean, g.variance))
                .collect();
            logsumexp(&terms)
        };
        let mut h_nats = 0.0;
        for (a, b) in intervals {
            h_nats += quadrature::integrate(
                |x| {
                    let lp = ln_density(x);
                    if lp.is_finite() {
                        -lp.exp() * lp
                    } else {
                        0.0
                    }
                },
                a,
                b,
                spec,
                "gaussian mixture differential entropy",
            )?;
        }
        Ok(h_nats / LN_2)
    }

    /// MAP estimate: the atom of maximum unnormalized mass, ties broken
    /// toward the smallest location. `None` when there are no atoms (the
    /// estimate of a continuous quantity fails by convention).
    pub fn map_estimate(&self) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for a in &self.atoms {
            match best {
                Some((_, w)) if a.weight <= w => {}
                _ => best = Some((a.location, a.weight)),
            }
        }
        // Atoms are location-sorted, so the first strict maximum wins ties.
        best
    }

    /// MAP error probability: 1 minus the largest atom mass; equals rid when
    /// there are no atoms.
    pub fn error_probability(&self) -> f64 {
        match self.map_estimate() {
            Some((_, w)) => 1.0 - w,
            None => self.rid(),
        }
    }

    /// Draw one variate. The caller owns the stream; everything else here is
    /// a pure function.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = self.total_weight();
        let mut u = rng.gen::<f64>() * total;
        for a in &self.atoms {
            if u < a.weight {
                return a.location;
            }
            u -= a.weight;
        }
        for g in &self.gaussians {
            if u < g.weight {
                return g.mean + g.variance.sqrt() * standard_normal(rng);
            }
            u -= g.weight;
        }
        // Rounding pushed u past the last component.
        match (self.gaussians.last(), self.atoms.last()) {
            (Some(g), _) => g.mean + g.variance.sqrt() * standard_normal(rng),
            (None, Some(a)) => a.location,
            (None, None) => f64::NAN,
        }
    }

    /// Mean of the mixture.
    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.location)
            .sum::<f64>()
            + self.gaussians.iter().map(|g| g.weight * g.mean).sum::<f64>()
    }

    /// Raw second moment of the mixture.
    pub fn second_moment(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.location * a.location)
            .sum::<f64>()
            + self
                .gaussians
                .iter()
                .map(|g| g.weight * (g.mean * g.mean + g.variance))
                .sum::<f64>()
    }

    /// Variance of the mixture.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    /// Distribution of -X.
    pub fn mirror(&self) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.location = -a.location;
        }
        for g in &mut out.gaussians {
            g.mean = -g.mean;
        }
        out.atoms.sort_by(|x, y| x.location.total_cmp(&y.location));
        out
    }

    /// Merge close atoms, drop negligible weights, enforce component caps and
    /// renormalize. Gaussian cap enforcement merges the two lowest-weight
    /// components by moment matching, which preserves the mixture mean and
    /// variance; atom drops lose their mass (logged) before renormalization.
    pub fn prune(&self, policy: &PrunePolicy) -> Self {
        let mut atoms = merge_close_atoms(&self.atoms, policy.eps_atom);
        atoms.retain(|a| a.weight >= policy.eps_weight);
        let mut gaussians: Vec<GaussianComponent> = self
            .gaussians
            .iter()
            .filter(|g| g.weight >= policy.eps_weight)
            .cloned()
            .collect();

        if atoms.len() > policy.max_atoms {
            atoms.select_nth_unstable_by(policy.max_atoms, |x, y| y.weight.total_cmp(&x.weight));
            let dropped: f64 = atoms[policy.max_atoms..].iter().map(|a| a.weight).sum();
            let bound = atoms[policy.max_atoms..]
                .iter()
                .map(|a| a.location.abs())
                .fold(0.0, f64::max);
            log::debug!(
                "prune: dropped {} atoms carrying mass {:.3e} (|location| <= {:.3e})",
                atoms.len() - policy.max_atoms,
                dropped,
                bound
            );
            atoms.truncate(policy.max_atoms);
            atoms.sort_unstable_by(|x, y| x.location.total_cmp(&y.location));
        }

        if gaussians.len() > policy.max_gaussians {
            merge_lowest_gaussians(&mut gaussians, policy.max_gaussians);
        }

        let mut out = MixedDistribution { atoms, gaussians };
        if let Ok(n) = out.normalize() {
            out = n;
        }
        out
    }

    /// Serialize as `{"atoms":[[loc,w],...],"gaussians":[[mean,var,w],...]}`
    /// with 17 significant digits on every float.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\"atoms\":[");
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "[{:.16e},{:.16e}]", a.location, a.weight).unwrap();
        }
        s.push_str("],\"gaussians\":[");
        for (i, g) in self.gaussians.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "[{:.16e},{:.16e},{:.16e}]", g.mean, g.variance, g.weight).unwrap();
        }
        s.push_str("]}");
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DistError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            atoms: Vec<(f64, f64)>,
            gaussians: Vec<(f64, f64, f64)>,
        }
        let w: Wire = serde_json::from_str(text)?;
        Ok(MixedDistribution {
            atoms: w
                .atoms
                .into_iter()
                .map(|(location, weight)| Atom { location, weight })
                .collect(),
            gaussians: w
                .gaussians
                .into_iter()
                .map(|(mean, variance, weight)| GaussianComponent {
                    mean,
                    variance,
                    weight,
                })
                .collect(),
        })
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; two uniforms per variate keeps the stream layout simple.
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 > 0.0 {
            let r = (-2.0 * u1.ln()).sqrt();
            return r * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

fn merge_close_atoms(atoms: &[Atom], eps: f64) -> Vec<Atom> {
    let mut sorted: Vec<Atom> = atoms.iter().filter(|a| a.weight > 0.0).cloned().collect();
    if !sorted.is_sorted_by(|a, b| a.location <= b.location) {
        sorted.sort_unstable_by(|x, y| x.location.total_cmp(&y.location));
    }
    let mut out: Vec<Atom> = Vec::with_capacity(sorted.len());
    for a in sorted {
        match out.last_mut() {
            Some(last) if (a.location - last.location).abs() < eps => {
                let w = last.weight + a.weight;
                last.location = (last.location * last.weight + a.location * a.weight) / w;
                last.weight = w;
            }
            _ => out.push(a),
        }
    }
    out
}

fn merge_lowest_gaussians(gaussians: &mut Vec<GaussianComponent>, cap: usize) {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    // Non-negative f64 bit patterns order like the floats themselves.
    let mut heap: BinaryHeap<(Reverse<u64>, usize)> = gaussians
        .iter()
        .enumerate()
        .map(|(i, g)| (Reverse(g.weight.to_bits()), i))
        .collect();
    let mut slots: Vec<Option<GaussianComponent>> = gaussians.drain(..).map(Some).collect();
    let mut live = slots.len();
    while live > cap {
        let a_idx = pop_live(&mut heap, &slots);
        let b_idx = pop_live(&mut heap, &slots);
        let a = slots[a_idx].take().unwrap();
        let b = slots[b_idx].take().unwrap();
        let w = a.weight + b.weight;
        let merged = if w > 0.0 {
            let mean = (a.weight * a.mean + b.weight * b.mean) / w;
            let var = (a.weight * (a.variance + (a.mean - mean).powi(2))
                + b.weight * (b.variance + (b.mean - mean).powi(2)))
                / w;
            GaussianComponent {
                mean,
                variance: var,
                weight: w,
            }
        } else {
            GaussianComponent {
                mean: 0.5 * (a.mean + b.mean),
                variance: 0.5 * (a.variance + b.variance),
                weight: 0.0,
            }
        };
        slots.push(Some(merged));
        heap.push((Reverse(merged.weight.to_bits()), slots.len() - 1));
        live -= 1;
    }
    gaussians.extend(slots.into_iter().flatten());
}

fn pop_live(
    heap: &mut std::collections::BinaryHeap<(std::cmp::Reverse<u64>, usize)>,
    slots: &[Option<GaussianComponent>],
) -> usize {
    loop {
        let (_, i) = heap.pop().expect("heap exhausted with live components");
        if slots[i].is_some() {
            return i;
        }
    }
}

/// A named i.i.d. source: the per-sample distribution plus a human-readable
/// descriptor recorded in output files.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub distribution: MixedDistribution,
    pub descriptor: String,
}

impl SourceModel {
    pub fn bernoulli_gaussian(rho: f64, sigma2: f64) -> Self {
        SourceModel {
            distribution: MixedDistribution::bernoulli_gaussian(rho, sigma2),
            descriptor: format!("BG(rho={rho}, sigma2={sigma2})"),
        }
    }

    /// Analytic E[X^2] of one sample.
    pub fn second_moment(&self) -> f64 {
        self.distribution.second_moment()
    }
}
