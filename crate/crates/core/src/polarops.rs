//! The convolution (`f`) and conditioning (`g`) operations that track how a
//! pair of independent nonsingular variables evolves through one butterfly
//! stage: `Y1 = (X1+X2)/sqrt(2)` and `Y2 = (X1-X2)/sqrt(2) | Y1 = y`.
//!
//! Over the atoms + Gaussian-mixture family both operations stay in closed
//! form: sums of component pairs are atoms or Gaussians, and conditioning a
//! jointly Gaussian pair on its sum is again Gaussian. All density weights
//! are combined in the log domain.

use crate::mixdist::{
    ln_normal_pdf, logsumexp, Atom, GaussianComponent, MixedDistribution, PrunePolicy,
};
use thiserror::Error;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2: f64 = 0.5 * std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum PolarOpsError {
    #[error("conditioning undefined at y={y}: zero density and no atom of the sum distribution")]
    ConditioningUndefined { y: f64 },
}

/// Density bookkeeping for the sum variable at a point `y`: the three
/// continuous contributions (atom+gaussian, gaussian+atom, gaussian+gaussian),
/// their total, and any point mass of the sum exactly at `y`.
#[derive(Debug, Clone, Copy)]
pub struct JointWeights {
    /// Density from P1 atoms paired with the continuous part of P2.
    pub f1: f64,
    /// Density from the continuous part of P1 paired with P2 atoms.
    pub f2: f64,
    /// Density from the two continuous parts.
    pub f3: f64,
    /// f1 + f2 + f3.
    pub f: f64,
    /// Mass of the discrete part of the sum at `y` (0 if `y` hits no atom).
    pub discrete_mass_at_y: f64,
}

/// Distribution of `(X1 + X2)/sqrt(2)`, unpruned. The continuous weight of
/// the result is exactly `1 - (1 - rid(p1))(1 - rid(p2))`.
pub fn f_combine_unpruned(p1: &MixedDistribution, p2: &MixedDistribution) -> MixedDistribution {
    let mut out = MixedDistribution::default();
    out.atoms.reserve(p1.atoms.len() * p2.atoms.len());
    for a1 in &p1.atoms {
        for a2 in &p2.atoms {
            out.atoms.push(Atom {
                location: (a1.location + a2.location) / SQRT_2,
                weight: a1.weight * a2.weight,
            });
        }
    }
    let n_gauss =
        p1.atoms.len() * p2.gaussians.len() + p1.gaussians.len() * p2.atoms.len()
            + p1.gaussians.len() * p2.gaussians.len();
    out.gaussians.reserve(n_gauss);
    for a1 in &p1.atoms {
        for g2 in &p2.gaussians {
            out.gaussians.push(GaussianComponent {
                mean: (a1.location + g2.mean) / SQRT_2,
                variance: g2.variance / 2.0,
                weight: a1.weight * g2.weight,
            });
        }
    }
    for g1 in &p1.gaussians {
        for a2 in &p2.atoms {
            out.gaussians.push(GaussianComponent {
                mean: (g1.mean + a2.location) / SQRT_2,
                variance: g1.variance / 2.0,
                weight: g1.weight * a2.weight,
            });
        }
    }
    for g1 in &p1.gaussians {
        for g2 in &p2.gaussians {
            out.gaussians.push(GaussianComponent {
                mean: (g1.mean + g2.mean) / SQRT_2,
                variance: (g1.variance + g2.variance) / 2.0,
                weight: g1.weight * g2.weight,
            });
        }
    }
    out.atoms
        .sort_by(|x, y| x.location.total_cmp(&y.location));
    out
}

/// Distribution of `(X1 + X2)/sqrt(2)`, pruned per `policy`.
///
/// Atom pairs whose product weight is already below the policy's weight floor
/// are skipped up front: atom counts multiply under `f`, and generating
/// sub-floor products only for `prune` to drop them dominates the cost at
/// deep recursion levels.
pub fn f_combine(
    p1: &MixedDistribution,
    p2: &MixedDistribution,
    policy: &PrunePolicy,
) -> MixedDistribution {
    let atom_w1 = sorted_weights(p1.atoms.iter().map(|a| a.weight));
    let atom_w2 = sorted_weights(p2.atoms.iter().map(|a| a.weight));
    let gauss_w1 = sorted_weights(p1.gaussians.iter().map(|g| g.weight));
    let gauss_w2 = sorted_weights(p2.gaussians.iter().map(|g| g.weight));

    let mut out = MixedDistribution::default();
    for (i, j, w) in top_products(&atom_w1, &atom_w2, policy.eps_weight, policy.max_atoms) {
        out.atoms.push(Atom {
            location: (p1.atoms[i].location + p2.atoms[j].location) / SQRT_2,
            weight: w,
        });
    }
    let gauss_budget = policy.max_gaussians.saturating_mul(4);
    for (i, j, w) in top_products(&atom_w1, &gauss_w2, policy.eps_weight, gauss_budget) {
        out.gaussians.push(GaussianComponent {
            mean: (p1.atoms[i].location + p2.gaussians[j].mean) / SQRT_2,
            variance: p2.gaussians[j].variance / 2.0,
            weight: w,
        });
    }
    for (i, j, w) in top_products(&gauss_w1, &atom_w2, policy.eps_weight, gauss_budget) {
        out.gaussians.push(GaussianComponent {
            mean: (p1.gaussians[i].mean + p2.atoms[j].location) / SQRT_2,
            variance: p1.gaussians[i].variance / 2.0,
            weight: w,
        });
    }
    for (i, j, w) in top_products(&gauss_w1, &gauss_w2, policy.eps_weight, gauss_budget) {
        out.gaussians.push(GaussianComponent {
            mean: (p1.gaussians[i].mean + p2.gaussians[j].mean) / SQRT_2,
            variance: (p1.gaussians[i].variance + p2.gaussians[j].variance) / 2.0,
            weight: w,
        });
    }
    out.prune(policy)
}

/// (weight, original index) pairs in descending weight order.
fn sorted_weights(weights: impl Iterator<Item = f64>) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = weights
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .map(|(i, w)| (w, i))
        .collect();
    v.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    v
}

/// Up to `budget` heaviest pairwise weight products no smaller than `eps`,
/// without materializing the full cross product. Inputs are in descending
/// weight order; the frontier heap enumerates positions heaviest-first,
/// generating each position exactly once: popping (i, j) yields (i, j+1),
/// and (i+1, 0) when j = 0.
fn top_products(
    w1: &[(f64, usize)],
    w2: &[(f64, usize)],
    eps: f64,
    budget: usize,
) -> Vec<(usize, usize, f64)> {
    use std::collections::BinaryHeap;
    if w1.is_empty() || w2.is_empty() {
        return vec![];
    }
    let mut heap: BinaryHeap<(u64, usize, usize)> = BinaryHeap::new();
    heap.push(((w1[0].0 * w2[0].0).to_bits(), 0, 0));
    let mut out = Vec::new();
    while let Some((bits, i, j)) = heap.pop() {
        let w = f64::from_bits(bits);
        if w < eps || out.len() >= budget {
            break;
        }
        out.push((w1[i].1, w2[j].1, w));
        if j + 1 < w2.len() {
            heap.push(((w1[i].0 * w2[j + 1].0).to_bits(), i, j + 1));
        }
        if j == 0 && i + 1 < w1.len() {
            heap.push(((w1[i + 1].0 * w2[0].0).to_bits(), i + 1, 0));
        }
    }
    out
}

fn log_f_terms(p1: &MixedDistribution, p2: &MixedDistribution, y: f64) -> (f64, f64, f64) {
    let log_terms = |atoms: &[Atom], gaussians: &[GaussianComponent]| -> f64 {
        let mut terms = Vec::with_capacity(atoms.len() * gaussians.len());
        for a in atoms {
            if a.weight <= 0.0 {
                continue;
            }
            let t = SQRT_2 * y - a.location;
            for g in gaussians {
                if g.weight <= 0.0 {
                    continue;
                }
                terms.push(
                    a.weight.ln() + g.weight.ln() + LN_SQRT_2 + ln_normal_pdf(t, g.mean, g.variance),
                );
            }
        }
        logsumexp(&terms)
    };
    let log_f1 = log_terms(&p1.atoms, &p2.gaussians);
    let log_f2 = log_terms(&p2.atoms, &p1.gaussians);
    let mut cc = Vec::with_capacity(p1.gaussians.len() * p2.gaussians.len());
    for g1 in &p1.gaussians {
        for g2 in &p2.gaussians {
            if g1.weight <= 0.0 || g2.weight <= 0.0 {
                continue;
            }
            cc.push(
                g1.weight.ln()
                    + g2.weight.ln()
                    + ln_normal_pdf(
                        y,
                        (g1.mean + g2.mean) / SQRT_2,
                        (g1.variance + g2.variance) / 2.0,
                    ),
            );
        }
    }
    let log_f3 = logsumexp(&cc);
    (log_f1, log_f2, log_f3)
}

/// Precomputed constants for evaluating the log-density of a Gaussian
/// mixture at many points: per component, `term(t) = logconst - (t-mean)^2 *
/// inv2v`. The summation over components skips terms more than 40 nats below
/// the maximum, whose exp underflows the sum anyway.
struct GaussEvaluator {
    comps: Vec<(f64, f64, f64)>, // (mean, inv2v, logconst)
}

impl GaussEvaluator {
    fn new(gaussians: &[GaussianComponent]) -> Self {
        let comps = gaussians
            .iter()
            .filter(|g| g.weight > 0.0)
            .map(|g| {
                let logconst =
                    g.weight.ln() - 0.5 * (2.0 * std::f64::consts::PI * g.variance).ln();
                (g.mean, 0.5 / g.variance, logconst)
            })
            .collect();
        GaussEvaluator { comps }
    }

    /// `ln` of the mixture density at `t`; `None` when the mixture is empty
    /// or the density underflows to zero.
    fn log_density(&self, t: f64) -> Option<f64> {
        let mut terms = [0.0f64; 256];
        let mut max = f64::NEG_INFINITY;
        let mut heap_terms;
        let buf: &mut [f64] = if self.comps.len() <= 256 {
            &mut terms
        } else {
            heap_terms = vec![0.0; self.comps.len()];
            &mut heap_terms
        };
        for (slot, &(mean, inv2v, logconst)) in buf.iter_mut().zip(&self.comps) {
            let d = t - mean;
            let term = logconst - d * d * inv2v;
            *slot = term;
            if term > max {
                max = term;
            }
        }
        if !max.is_finite() {
            return None;
        }
        let mut sum = 0.0;
        for &term in &buf[..self.comps.len()] {
            if term > max - 40.0 {
                sum += (term - max).exp();
            }
        }
        Some(max + sum.ln())
    }
}

/// Indices into `atoms` (location-sorted) whose location lies within
/// `sqrt(2) * eps` of `target`; candidates for an exact-sum match.
fn matching_range(atoms: &[Atom], target: f64, eps: f64) -> std::ops::Range<usize> {
    let slack = SQRT_2 * eps;
    let lo = atoms.partition_point(|a| a.location < target - slack);
    let hi = atoms.partition_point(|a| a.location <= target + slack);
    lo..hi
}

fn sum_atom_mass_at(p1: &MixedDistribution, p2: &MixedDistribution, y: f64, eps: f64) -> f64 {
    let (outer, inner) = if p1.atoms.len() <= p2.atoms.len() {
        (&p1.atoms, &p2.atoms)
    } else {
        (&p2.atoms, &p1.atoms)
    };
    let mut mass = 0.0;
    for a1 in outer {
        let target = SQRT_2 * y - a1.location;
        for a2 in &inner[matching_range(inner, target, eps)] {
            if ((a1.location + a2.location) / SQRT_2 - y).abs() <= eps {
                mass += a1.weight * a2.weight;
            }
        }
    }
    mass
}

/// Evaluate the density decomposition of the sum variable at `y`.
pub fn joint_weights(
    p1: &MixedDistribution,
    p2: &MixedDistribution,
    y: f64,
    eps_atom: f64,
) -> JointWeights {
    let (l1, l2, l3) = log_f_terms(p1, p2, y);
    let (f1, f2, f3) = (l1.exp(), l2.exp(), l3.exp());
    JointWeights {
        f1,
        f2,
        f3,
        f: f1 + f2 + f3,
        discrete_mass_at_y: sum_atom_mass_at(p1, p2, y, eps_atom),
    }
}

/// Purely atomic conditional of `(D1 - D2)/sqrt(2)` given
/// `(D1 + D2)/sqrt(2) = y`, over atom pairs whose sum matches `y` within
/// `eps_atom`.
pub fn discrete_conditional(
    d1: &[Atom],
    d2: &[Atom],
    y: f64,
    eps_atom: f64,
) -> Result<MixedDistribution, PolarOpsError> {
    let sorted: Vec<Atom>;
    let d2_sorted: &[Atom] = if d2.is_sorted_by(|a, b| a.location <= b.location) {
        d2
    } else {
        let mut v = d2.to_vec();
        v.sort_unstable_by(|a, b| a.location.total_cmp(&b.location));
        sorted = v;
        &sorted
    };
    let mut out = MixedDistribution::default();
    for a1 in d1 {
        let target = SQRT_2 * y - a1.location;
        for a2 in &d2_sorted[matching_range(d2_sorted, target, eps_atom)] {
            if ((a1.location + a2.location) / SQRT_2 - y).abs() <= eps_atom {
                out.atoms.push(Atom {
                    location: (a1.location - a2.location) / SQRT_2,
                    weight: a1.weight * a2.weight,
                });
            }
        }
    }
    if out.atoms.is_empty() {
        return Err(PolarOpsError::ConditioningUndefined { y });
    }
    // Colliding differences merge exactly; floating point may separate them
    // by tiny offsets, which eps_atom absorbs.
    let merged = MixedDistribution {
        atoms: out.atoms,
        gaussians: vec![],
    }
    .prune(&PrunePolicy {
        eps_atom,
        eps_weight: 0.0,
        max_atoms: usize::MAX,
        max_gaussians: 1,
    });
    Ok(merged.normalize().expect("non-empty atomic conditional"))
}

/// Conditional distribution of `(X1 - X2)/sqrt(2)` given
/// `(X1 + X2)/sqrt(2) = y`.
///
/// If `y` hits an atom of the discrete part of the sum (within
/// `policy.eps_atom`), the conditional is the purely discrete one: the
/// continuous branch is a probability-zero event and is discarded. Otherwise
/// the result mixes per-pair Gaussian conditionals (weight `f3/f`) with
/// deterministic atoms contributed by atom-plus-continuous pairs.
pub fn g_condition(
    p1: &MixedDistribution,
    p2: &MixedDistribution,
    y: f64,
    policy: &PrunePolicy,
) -> Result<MixedDistribution, PolarOpsError> {
    if sum_atom_mass_at(p1, p2, y, policy.eps_atom) > 0.0 {
        let cond = discrete_conditional(&p1.atoms, &p2.atoms, y, policy.eps_atom)?;
        return Ok(cond.prune(policy));
    }
    g_condition_continuous(p1, p2, y, policy)
}

/// Nearest point of the discrete support of `(X1 + X2)/sqrt(2)` to `y`, if
/// the support is non-empty.
///
/// Conditioning on an observed value can only be undefined when both inputs
/// are purely discrete and `y` misses every pairwise sum; since exact
/// conditionals always contain the value actually observed, such a miss is a
/// pruning artifact, and the nearest surviving support point is the natural
/// surrogate to condition on.
pub fn nearest_support_point(
    p1: &MixedDistribution,
    p2: &MixedDistribution,
    y: f64,
) -> Option<f64> {
    if p1.atoms.is_empty() || p2.atoms.is_empty() {
        return None;
    }
    debug_assert!(p2.atoms.windows(2).all(|w| w[0].location <= w[1].location));
    let mut best: Option<f64> = None;
    for a1 in &p1.atoms {
        if a1.weight <= 0.0 {
            continue;
        }
        let target = SQRT_2 * y - a1.location;
        let idx = p2
            .atoms
            .partition_point(|a| a.location < target)
            .min(p2.atoms.len() - 1);
        for a2 in &p2.atoms[idx.saturating_sub(1)..(idx + 2).min(p2.atoms.len())] {
            if a2.weight <= 0.0 {
                continue;
            }
            let cand = (a1.location + a2.location) / SQRT_2;
            if best.map_or(true, |b| (cand - y).abs() < (b - y).abs()) {
                best = Some(cand);
            }
        }
    }
    best
}

/// The continuous branch of [`g_condition`]: the conditional given that the
/// sum came from its absolutely continuous part, ignoring any atom at `y`.
/// This is the almost-everywhere value of the conditional, which entropy
/// integrals over `y` need at grid points that happen to hit atoms.
pub fn g_condition_continuous(
    p1: &MixedDistribution,
    p2: &MixedDistribution,
    y: f64,
    policy: &PrunePolicy,
) -> Result<MixedDistribution, PolarOpsError> {
    // Log-weights and the component each one belongs to. Each atom of one
    // side pairs with the whole continuous part of the other side at a
    // single conditional location, so its terms aggregate into one atom.
    let mut log_ws: Vec<f64> = Vec::new();
    let mut atoms: Vec<(f64, usize)> = Vec::new(); // (location, log-weight index)
    let mut gaussians: Vec<(f64, f64, usize)> = Vec::new(); // (mean, var, idx)

    let eval1 = GaussEvaluator::new(&p2.gaussians);
    for a in &p1.atoms {
        if a.weight <= 0.0 {
            continue;
        }
        if let Some(lw) = eval1.log_density(SQRT_2 * y - a.location) {
            log_ws.push(a.weight.ln() + LN_SQRT_2 + lw);
            atoms.push((SQRT_2 * a.location - y, log_ws.len() - 1));
        }
    }
    let eval2 = GaussEvaluator::new(&p1.gaussians);
    for a in &p2.atoms {
        if a.weight <= 0.0 {
            continue;
        }
        if let Some(lw) = eval2.log_density(SQRT_2 * y - a.location) {
            log_ws.push(a.weight.ln() + LN_SQRT_2 + lw);
            atoms.push((y - SQRT_2 * a.location, log_ws.len() - 1));
        }
    }
    let gauss_w1 = sorted_weights(p1.gaussians.iter().map(|g| g.weight));
    let gauss_w2 = sorted_weights(p2.gaussians.iter().map(|g| g.weight));
    for (i, j, w) in top_products(
        &gauss_w1,
        &gauss_w2,
        policy.eps_weight,
        policy.max_gaussians.saturating_mul(4),
    ) {
        let (g1, g2) = (&p1.gaussians[i], &p2.gaussians[j]);
        let (v1, v2) = (g1.variance, g2.variance);
        let sum_mean = (g1.mean + g2.mean) / SQRT_2;
        let sum_var = (v1 + v2) / 2.0;
        log_ws.push(w.ln() + ln_normal_pdf(y, sum_mean, sum_var));
        // Bivariate-normal conditioning of the difference on the sum:
        // Cov(T, S) = (v1 - v2)/2.
        let cond_mean = (g1.mean - g2.mean) / SQRT_2 + (v1 - v2) / (v1 + v2) * (y - sum_mean);
        let cond_var = 2.0 * v1 * v2 / (v1 + v2);
        gaussians.push((cond_mean, cond_var, log_ws.len() - 1));
    }

    let log_z = logsumexp(&log_ws);
    if !log_z.is_finite() {
        return Err(PolarOpsError::ConditioningUndefined { y });
    }

    let out = MixedDistribution {
        atoms: atoms
            .into_iter()
            .map(|(location, i)| Atom {
                location,
                weight: (log_ws[i] - log_z).exp(),
            })
            .collect(),
        gaussians: gaussians
            .into_iter()
            .map(|(mean, variance, i)| GaussianComponent {
                mean,
                variance,
                weight: (log_ws[i] - log_z).exp(),
            })
            .collect(),
    };
    Ok(out.prune(policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn bg(rho: f64, sigma2: f64) -> MixedDistribution {
        MixedDistribution::bernoulli_gaussian(rho, sigma2)
    }

    fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
        ln_normal_pdf(x, mean, var).exp()
    }

    #[test]
    fn f_of_two_deltas() {
        let out = f_combine(
            &MixedDistribution::delta(1.0),
            &MixedDistribution::delta(2.0),
            &PrunePolicy::default(),
        );
        assert_eq!(out.gaussians.len(), 0);
        assert_eq!(out.atoms.len(), 1);
        assert!((out.atoms[0].location - 3.0 / SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn f_rid_recursion_exact() {
        let out = f_combine_unpruned(&bg(0.2, 1.0), &bg(0.2, 1.0));
        assert!((out.rid() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn f_of_bg_pair_components() {
        let out = f_combine_unpruned(&bg(0.5, 1.0), &bg(0.5, 1.0));
        let atom_mass: f64 = out.atoms.iter().map(|a| a.weight).sum();
        assert!((atom_mass - 0.25).abs() < 1e-15);
        assert_eq!(out.atoms[0].location, 0.0);
        let half_var: f64 = out
            .gaussians
            .iter()
            .filter(|g| (g.variance - 0.5).abs() < 1e-15)
            .map(|g| g.weight)
            .sum();
        let unit_var: f64 = out
            .gaussians
            .iter()
            .filter(|g| (g.variance - 1.0).abs() < 1e-15)
            .map(|g| g.weight)
            .sum();
        assert!((half_var - 0.5).abs() < 1e-15);
        assert!((unit_var - 0.25).abs() < 1e-15);
    }

    #[test]
    fn joint_weights_pure_gaussians() {
        let p = MixedDistribution::gaussian(0.0, 1.0);
        let jw = joint_weights(&p, &p, 0.7, 1e-9);
        assert_eq!(jw.f1, 0.0);
        assert_eq!(jw.f2, 0.0);
        assert!((jw.f3 - normal_pdf(0.7, 0.0, 1.0)).abs() < 1e-14);
        assert_eq!(jw.discrete_mass_at_y, 0.0);
    }

    #[test]
    fn joint_weights_bg_pair() {
        let p = bg(0.5, 1.0);
        let jw = joint_weights(&p, &p, 1.0, 1e-9);
        let expect_f1 = 0.25 * SQRT_2 * normal_pdf(SQRT_2, 0.0, 1.0);
        let expect_f3 = 0.25 * normal_pdf(1.0, 0.0, 1.0);
        assert!((jw.f1 - expect_f1).abs() < 1e-14);
        assert!((jw.f2 - expect_f1).abs() < 1e-14);
        assert!((jw.f3 - expect_f3).abs() < 1e-14);
        // Spec reference values.
        assert!((jw.f1 - 0.051890).abs() < 1e-5);
        assert!((jw.f3 - 0.060493).abs() < 1e-5);
        let rho1 = jw.f3 / jw.f;
        assert!((rho1 - 0.368).abs() < 1e-3);
        assert!((jw.f - (jw.f1 + jw.f2 + jw.f3)).abs() <= 1e-12 * jw.f);

        let at_zero = joint_weights(&p, &p, 0.0, 1e-9);
        assert!((at_zero.discrete_mass_at_y - 0.25).abs() < 1e-15);
    }

    #[test]
    fn g_pure_gaussian_rotation_invariance() {
        let p = MixedDistribution::gaussian(0.0, 1.0);
        for &y in &[-3.0, 0.0, 0.5, 10.0] {
            let out = g_condition(&p, &p, y, &PrunePolicy::default()).unwrap();
            assert_eq!(out.atoms.len(), 0);
            assert_eq!(out.gaussians.len(), 1);
            let g = out.gaussians[0];
            assert!(g.mean.abs() < 1e-12);
            assert!((g.variance - 1.0).abs() < 1e-12);
            assert!((g.weight - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn g_at_sum_atom_is_discrete() {
        let p = bg(0.5, 1.0);
        let out = g_condition(&p, &p, 0.0, &PrunePolicy::default()).unwrap();
        assert_eq!(out.gaussians.len(), 0);
        assert_eq!(out.atoms.len(), 1);
        assert_eq!(out.atoms[0].location, 0.0);
        assert!((out.atoms[0].weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn g_off_atom_weights() {
        let p = bg(0.5, 1.0);
        let out = g_condition(&p, &p, 1.0, &PrunePolicy::default()).unwrap();
        let jw = joint_weights(&p, &p, 1.0, 1e-9);
        let rho1 = jw.f3 / jw.f;
        assert_eq!(out.atoms.len(), 2);
        let w_at = |loc: f64| -> f64 {
            out.atoms
                .iter()
                .find(|a| (a.location - loc).abs() < 1e-12)
                .unwrap()
                .weight
        };
        assert!((w_at(-1.0) - jw.f1 / jw.f).abs() < 1e-12);
        assert!((w_at(1.0) - jw.f2 / jw.f).abs() < 1e-12);
        assert!((w_at(-1.0) - 0.316).abs() < 1e-3);
        assert_eq!(out.gaussians.len(), 1);
        let g = out.gaussians[0];
        assert!((g.weight - rho1).abs() < 1e-12);
        assert!(g.mean.abs() < 1e-12);
        assert!((g.variance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn g_outside_support_errors() {
        let d = MixedDistribution::delta(0.0);
        assert!(matches!(
            g_condition(&d, &d, 1.0, &PrunePolicy::default()),
            Err(PolarOpsError::ConditioningUndefined { .. })
        ));
    }

    #[test]
    fn discrete_conditional_examples() {
        let single = discrete_conditional(
            &[Atom {
                location: 1.0,
                weight: 1.0,
            }],
            &[Atom {
                location: 2.0,
                weight: 1.0,
            }],
            3.0 / SQRT_2,
            1e-9,
        )
        .unwrap();
        assert_eq!(single.atoms.len(), 1);
        assert!((single.atoms[0].location - (-1.0 / SQRT_2)).abs() < 1e-12);

        let uniform = [
            Atom {
                location: 0.0,
                weight: 0.5,
            },
            Atom {
                location: 1.0,
                weight: 0.5,
            },
        ];
        let two = discrete_conditional(&uniform, &uniform, 1.0 / SQRT_2, 1e-9).unwrap();
        assert_eq!(two.atoms.len(), 2);
        for a in &two.atoms {
            assert!((a.weight - 0.5).abs() < 1e-12);
            assert!((a.location.abs() - 1.0 / SQRT_2).abs() < 1e-12);
        }

        let zero = discrete_conditional(&uniform, &uniform, 0.0, 1e-9).unwrap();
        assert_eq!(zero.atoms.len(), 1);
        assert_eq!(zero.atoms[0].location, 0.0);

        assert!(discrete_conditional(&uniform, &uniform, 0.3, 1e-9).is_err());
    }

    #[test]
    fn g_support_growth_bound() {
        // |atoms(g)| <= |atoms(P1)| + |atoms(P2)| pre-merge.
        let p1 = MixedDistribution {
            atoms: vec![
                Atom {
                    location: -1.0,
                    weight: 0.2,
                },
                Atom {
                    location: 0.5,
                    weight: 0.2,
                },
            ],
            gaussians: vec![GaussianComponent {
                mean: 0.0,
                variance: 1.0,
                weight: 0.6,
            }],
        };
        let p2 = bg(0.5, 2.0);
        let out = g_condition(&p1, &p2, 0.33, &PrunePolicy::default()).unwrap();
        assert!(out.atoms.len() <= p1.atoms.len() + p2.atoms.len());
        let fc = f_combine_unpruned(&p1, &p2);
        assert!(fc.atoms.len() <= p1.atoms.len() * p2.atoms.len());
    }

    #[test]
    fn f_moment_conservation() {
        let p1 = MixedDistribution {
            atoms: vec![Atom {
                location: 2.0,
                weight: 0.3,
            }],
            gaussians: vec![GaussianComponent {
                mean: -1.0,
                variance: 0.5,
                weight: 0.7,
            }],
        };
        let p2 = bg(0.4, 3.0);
        let out = f_combine_unpruned(&p1, &p2);
        assert!((out.mean() - (p1.mean() + p2.mean()) / SQRT_2).abs() < 1e-12);
        assert!((out.variance() - (p1.variance() + p2.variance()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn g_rid_average_matches_product() {
        // E_y[rid(g)] = rid(P1) rid(P2) over y drawn from the sum.
        let p1 = bg(0.3, 1.0);
        let p2 = bg(0.6, 2.0);
        let sum = f_combine_unpruned(&p1, &p2);
        let policy = PrunePolicy::default();
        let mut rng = stream(11, Purpose::Test, 0);
        let trials = 4000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..trials {
            let y = sum.sample(&mut rng);
            let r = g_condition(&p1, &p2, y, &policy).unwrap().rid();
            acc += r;
            acc2 += r * r;
        }
        let mean = acc / trials as f64;
        let var = (acc2 / trials as f64 - mean * mean).max(0.0);
        let se = (var / trials as f64).sqrt();
        let target = p1.rid() * p2.rid();
        assert!(
            (mean - target).abs() <= 3.0 * se + 1e-3,
            "mean {mean}, target {target}, se {se}"
        );
    }

    #[test]
    fn g_marginal_mixture_matches_difference_distribution() {
        // Mixing g outputs over y from the sum reproduces (X1 - X2)/sqrt(2):
        // check the first three moments by Monte Carlo.
        let p1 = bg(0.4, 1.0);
        let p2 = MixedDistribution {
            atoms: vec![Atom {
                location: 1.0,
                weight: 0.5,
            }],
            gaussians: vec![GaussianComponent {
                mean: -0.5,
                variance: 0.8,
                weight: 0.5,
            }],
        };
        let diff = f_combine_unpruned(&p1, &p2.mirror());
        let sum = f_combine_unpruned(&p1, &p2);
        let policy = PrunePolicy::default();
        let mut rng = stream(12, Purpose::Test, 0);
        let trials = 20000;
        let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
        for _ in 0..trials {
            let y = sum.sample(&mut rng);
            let cond = g_condition(&p1, &p2, y, &policy).unwrap();
            let t = cond.sample(&mut rng);
            m1 += t;
            m2 += t * t;
            m3 += t * t * t;
        }
        let n = trials as f64;
        let (m1, m2, m3) = (m1 / n, m2 / n, m3 / n);
        assert!((m1 - diff.mean()).abs() < 0.05, "m1 {m1} vs {}", diff.mean());
        assert!(
            (m2 - diff.second_moment()).abs() < 0.1,
            "m2 {m2} vs {}",
            diff.second_moment()
        );
        let third: f64 = {
            let a: f64 = diff
                .atoms
                .iter()
                .map(|a| a.weight * a.location.powi(3))
                .sum();
            let g: f64 = diff
                .gaussians
                .iter()
                .map(|g| g.weight * (g.mean.powi(3) + 3.0 * g.mean * g.variance))
                .sum();
            a + g
        };
        assert!((m3 - third).abs() < 0.3, "m3 {m3} vs {third}");
    }

    #[test]
    fn gaussian_conditioning_matches_2d_monte_carlo() {
        // Unequal-variance conditional validated against sampling (X1, X2)
        // and keeping pairs whose sum lands near y.
        let (m1, v1, m2, v2) = (0.7, 1.3, -0.4, 0.6);
        let y = 0.9;
        let p1 = MixedDistribution::gaussian(m1, v1);
        let p2 = MixedDistribution::gaussian(m2, v2);
        let cond = g_condition(&p1, &p2, y, &PrunePolicy::default()).unwrap();
        let g = cond.gaussians[0];

        let mut rng = stream(13, Purpose::Test, 0);
        let mut kept = Vec::new();
        let band = 0.01;
        for _ in 0..4_000_000 {
            let x1 = p1.sample(&mut rng);
            let x2 = p2.sample(&mut rng);
            if ((x1 + x2) / SQRT_2 - y).abs() < band {
                kept.push((x1 - x2) / SQRT_2);
            }
        }
        assert!(kept.len() > 5000, "only {} kept", kept.len());
        let n = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / n;
        let var = kept.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        let se_mean = (var / n).sqrt();
        assert!(
            (mean - g.mean).abs() < 4.0 * se_mean + band,
            "mean {mean} vs {}",
            g.mean
        );
        assert!((var - g.variance).abs() < 0.05, "var {var} vs {}", g.variance);
    }
}
