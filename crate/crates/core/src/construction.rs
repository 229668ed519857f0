//! Reserved-set construction: genie-aided Monte-Carlo estimation of the
//! per-index MAP error probabilities, with the analytic RID tree as
//! diagnostic and tie-breaker.

use crate::codec::ScTree;
use crate::hadamard::{self, HadamardError, IndexSet};
use crate::mixdist::{PrunePolicy, SourceModel};
use crate::rng::{self, Purpose};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// On-disk profile format version.
pub const PROFILE_VERSION: u32 = 1;

/// Relative tolerance for declaring a MAP atom equal to the true value.
/// Transform round-off on finite sums of source samples is far below this.
pub const EPS_MATCH_REL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("unsupported profile version {got} (expected {expected})")]
    UnsupportedVersion { got: u32, expected: u32 },
    #[error("profile parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("profile I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown source kind {0:?}")]
    UnknownSource(String),
    #[error(transparent)]
    Index(#[from] HadamardError),
    #[error("malformed profile: {0}")]
    Malformed(String),
}

/// Serializable description of the source model recorded in a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: String,
    pub rho: f64,
    pub sigma2: f64,
}

impl SourceSpec {
    pub fn bernoulli_gaussian(rho: f64, sigma2: f64) -> Self {
        SourceSpec {
            kind: "bernoulli_gaussian".into(),
            rho,
            sigma2,
        }
    }

    pub fn model(&self) -> Result<SourceModel, ConstructionError> {
        match self.kind.as_str() {
            "bernoulli_gaussian" => Ok(SourceModel::bernoulli_gaussian(self.rho, self.sigma2)),
            other => Err(ConstructionError::UnknownSource(other.to_string())),
        }
    }
}

/// Per-index error-probability estimates for one (source, n) pair, plus the
/// reserved set once a measurement budget M has been chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionProfile {
    pub version: u32,
    pub n: u32,
    pub source: SourceSpec,
    pub trials: u64,
    pub seed: u64,
    /// Monte-Carlo estimate of Q_n(k), indexed by k-1.
    pub q_hat: Vec<f64>,
    /// Analytic RID of each conditional, indexed by k-1.
    pub d_theory: Vec<f64>,
    /// Binomial standard error of each q_hat entry.
    pub stderr: Vec<f64>,
    /// 1-based reserved indices, if a budget was selected.
    pub reserved: Option<Vec<usize>>,
}

impl ConstructionProfile {
    /// Structural checks a trustworthy profile must satisfy.
    pub fn validate(&self) -> Result<(), ConstructionError> {
        if self.n > 30 {
            return Err(ConstructionError::Malformed(format!(
                "n={} exceeds the supported maximum of 30",
                self.n
            )));
        }
        let n = 1usize << self.n;
        for (name, v) in [("q_hat", &self.q_hat), ("d_theory", &self.d_theory)] {
            if v.len() != n {
                return Err(ConstructionError::Malformed(format!(
                    "{name} has {} entries, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(ConstructionError::Malformed(format!(
                    "{name} entries must lie in [0, 1]"
                )));
            }
        }
        if self.stderr.len() != n {
            return Err(ConstructionError::Malformed(format!(
                "stderr has {} entries, expected {n}",
                self.stderr.len()
            )));
        }
        Ok(())
    }

    pub fn reserved_set(&self) -> Result<Option<IndexSet>, ConstructionError> {
        match &self.reserved {
            Some(idx) => Ok(Some(IndexSet::new(idx.clone(), 1usize << self.n)?)),
            None => Ok(None),
        }
    }
}

/// Analytic RID of every conditional at depth `n`: leaf k follows the binary
/// expansion of k-1 (most significant bit first), applying `d -> 2d - d^2`
/// for a 0 bit and `d -> d^2` for a 1 bit.
pub fn rid_tree(d0: f64, n: u32) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&d0), "d0 must be a probability");
    let mut v = vec![d0];
    for _ in 0..n {
        let mut next = Vec::with_capacity(v.len() * 2);
        for d in v {
            next.push(2.0 * d - d * d);
            next.push(d * d);
        }
        v = next;
    }
    v
}

/// Genie-aided Monte Carlo estimate of Q_n(k) for k = 1..2^n.
///
/// Each trial draws a source block, transforms it, and walks the SC
/// recursion feeding the TRUE value at every index; index k counts as an
/// error when its conditional has no atoms or the MAP atom misses the true
/// value by more than the match tolerance. Trials run in parallel on
/// deterministic per-trial substreams of `seed`.
pub fn estimate_error_profile(
    source: &SourceModel,
    n_bits: u32,
    trials: u64,
    policy: &PrunePolicy,
    seed: u64,
) -> Vec<f64> {
    let n = 1usize << n_bits;
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(seed, Purpose::Construction, trial);
            let x: Vec<f64> = (0..n).map(|_| source.distribution.sample(&mut rng)).collect();
            let y = hadamard::fwht(&x).expect("power-of-two block");
            let mut errs = vec![0u64; n];
            let mut tree = ScTree::new(n_bits, source, policy);
            for (k, &y_k) in y.iter().enumerate() {
                match tree.next_dist() {
                    Ok(dist) => {
                        let miss = match dist.map_estimate() {
                            Some((loc, _)) => {
                                (loc - y_k).abs() > EPS_MATCH_REL * y_k.abs().max(1.0)
                            }
                            None => true,
                        };
                        if miss {
                            errs[k] = 1;
                        }
                        tree.push(y_k);
                    }
                    Err(e) => {
                        // Pruning destroyed the density at a true value; the
                        // rest of this trial's conditionals are undefined.
                        log::warn!("construction trial {trial}: {e}; counting remaining indices as errors");
                        for slot in errs.iter_mut().skip(k) {
                            *slot = 1;
                        }
                        break;
                    }
                }
            }
            errs
        })
        .reduce(
            || vec![0u64; n],
            |mut acc, errs| {
                for (a, e) in acc.iter_mut().zip(&errs) {
                    *a += e;
                }
                acc
            },
        );
    counts.iter().map(|&c| c as f64 / trials as f64).collect()
}

/// Indices of the `m` largest error probabilities; ties broken by larger
/// analytic RID, then by smaller index.
pub fn select_reserved(
    q_hat: &[f64],
    d_theory: &[f64],
    m: usize,
) -> Result<IndexSet, HadamardError> {
    let n = q_hat.len();
    if m > n {
        return Err(HadamardError::IndexOutOfRange { index: m, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        q_hat[b]
            .total_cmp(&q_hat[a])
            .then(d_theory[b].total_cmp(&d_theory[a]))
            .then(a.cmp(&b))
    });
    IndexSet::from_unsorted(order[..m].iter().map(|&i| i + 1).collect(), n)
}

/// Run the full construction: q_hat, d_theory and standard errors.
pub fn build_profile(
    spec: &SourceSpec,
    n_bits: u32,
    trials: u64,
    policy: &PrunePolicy,
    seed: u64,
) -> Result<ConstructionProfile, ConstructionError> {
    let source = spec.model()?;
    let q_hat = estimate_error_profile(&source, n_bits, trials, policy, seed);
    let d_theory = rid_tree(source.distribution.rid(), n_bits);
    let stderr = q_hat
        .iter()
        .map(|&q| (q * (1.0 - q) / trials as f64).sqrt())
        .collect();
    Ok(ConstructionProfile {
        version: PROFILE_VERSION,
        n: n_bits,
        source: spec.clone(),
        trials,
        seed,
        q_hat,
        d_theory,
        stderr,
        reserved: None,
    })
}

pub fn save_profile(p: &ConstructionProfile, path: &Path) -> Result<(), ConstructionError> {
    let text = serde_json::to_string_pretty(p)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_profile(path: &Path) -> Result<ConstructionProfile, ConstructionError> {
    let text = std::fs::read_to_string(path)?;
    parse_profile(&text)
}

/// Parse and validate a profile from its JSON text.
pub fn parse_profile(text: &str) -> Result<ConstructionProfile, ConstructionError> {
    let p: ConstructionProfile = serde_json::from_str(text)?;
    if p.version != PROFILE_VERSION {
        return Err(ConstructionError::UnsupportedVersion {
            got: p.version,
            expected: PROFILE_VERSION,
        });
    }
    p.validate()?;
    Ok(p)
}

/// Draw a source block for sweep trial `index` (shared by the harness and
/// the acceptance suite so the two always agree on the data).
pub fn sample_block<R: rand::Rng>(source: &SourceModel, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| source.distribution.sample(rng)).collect()
}

/// Kahan-compensated mean, exact enough to check mean-preservation at n=20.
pub fn mean_compensated(v: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in v {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixdist::MixedDistribution;

    #[test]
    fn rid_tree_examples() {
        let v = rid_tree(0.2, 1);
        assert!((v[0] - 0.36).abs() < 1e-15);
        assert!((v[1] - 0.04).abs() < 1e-15);

        assert!(rid_tree(0.0, 5).iter().all(|&d| d == 0.0));
        assert!(rid_tree(1.0, 5).iter().all(|&d| d == 1.0));

        let v2 = rid_tree(0.5, 2);
        let expect = [0.9375, 0.5625, 0.4375, 0.0625];
        for (a, b) in v2.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rid_tree_preserves_mean() {
        for &d0 in &[0.1, 0.2, 0.5, 0.8] {
            for n in [1u32, 5, 10, 20] {
                let v = rid_tree(d0, n);
                let m = mean_compensated(&v);
                assert!((m - d0).abs() < 1e-12, "d0={d0} n={n}: mean {m}");
            }
        }
    }

    #[test]
    fn q_hat_n1_example() {
        // Distribution of y_1 has atom mass 0.25 at zero, so Q_1(1) = 0.75.
        let source = SourceModel::bernoulli_gaussian(0.5, 1.0);
        let trials = 4000;
        let q = estimate_error_profile(&source, 1, trials, &PrunePolicy::default(), 77);
        let se = (0.75f64 * 0.25 / trials as f64).sqrt();
        assert!((q[0] - 0.75).abs() < 4.0 * se, "q1 = {}", q[0]);
        assert!(q[1] <= q[0]);
    }

    #[test]
    fn pure_continuous_source_always_errs() {
        let source = SourceModel {
            distribution: MixedDistribution::gaussian(0.0, 1.0),
            descriptor: "N(0,1)".into(),
        };
        let q = estimate_error_profile(&source, 2, 10, &PrunePolicy::default(), 5);
        assert!(q.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn q_hat_dominates_rid_lower_bound() {
        let source = SourceModel::bernoulli_gaussian(0.2, 1.0);
        let trials = 500;
        let q = estimate_error_profile(&source, 4, trials, &PrunePolicy::default(), 9);
        let d = rid_tree(0.2, 4);
        for (k, (&qk, &dk)) in q.iter().zip(&d).enumerate() {
            let se = (qk * (1.0 - qk) / trials as f64).sqrt();
            assert!(qk >= dk - 3.0 * se - 0.05, "k={k}: q={qk} d={dk}");
        }
    }

    #[test]
    fn profile_is_deterministic() {
        let source = SourceModel::bernoulli_gaussian(0.3, 1.0);
        let a = estimate_error_profile(&source, 3, 50, &PrunePolicy::default(), 123);
        let b = estimate_error_profile(&source, 3, 50, &PrunePolicy::default(), 123);
        assert_eq!(a, b);
    }

    #[test]
    fn select_reserved_examples() {
        let q = [0.9, 0.1, 0.5, 0.0];
        let d = [0.5, 0.5, 0.5, 0.5];
        let set = select_reserved(&q, &d, 2).unwrap();
        assert_eq!(set.indices(), &[1, 3]);

        let full = select_reserved(&q, &d, 4).unwrap();
        assert_eq!(full.indices(), &[1, 2, 3, 4]);

        let tied_q = [0.5, 0.5, 0.5];
        let distinct_d = [0.2, 0.9, 0.4];
        let one = select_reserved(&tied_q, &distinct_d, 1).unwrap();
        assert_eq!(one.indices(), &[2]);

        let all_tied = select_reserved(&[0.5; 3], &[0.5; 3], 2).unwrap();
        assert_eq!(all_tied.indices(), &[1, 2]);

        assert!(select_reserved(&q, &d, 5).is_err());
    }

    #[test]
    fn profile_round_trip() {
        let spec = SourceSpec::bernoulli_gaussian(0.5, 1.0);
        let mut p = build_profile(&spec, 2, 20, &PrunePolicy::default(), 42).unwrap();
        p.reserved = Some(
            select_reserved(&p.q_hat, &p.d_theory, 2)
                .unwrap()
                .indices()
                .to_vec(),
        );
        let dir = std::env::temp_dir().join("anacomp-profile-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("profile.json");
        save_profile(&p, &path).unwrap();
        let back = load_profile(&path).unwrap();
        assert_eq!(p, back);

        // Truncated file fails to parse.
        let text = std::fs::read_to_string(&path).unwrap();
        let trunc = dir.join("truncated.json");
        std::fs::write(&trunc, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            load_profile(&trunc),
            Err(ConstructionError::Parse(_))
        ));

        // Version mismatch is an explicit error.
        let bumped = text.replacen("\"version\": 1", "\"version\": 99", 1);
        let vpath = dir.join("versioned.json");
        std::fs::write(&vpath, bumped).unwrap();
        assert!(matches!(
            load_profile(&vpath),
            Err(ConstructionError::UnsupportedVersion { got: 99, .. })
        ));
    }

    #[test]
    fn source_spec_round_trip() {
        let spec = SourceSpec::bernoulli_gaussian(0.2, 1.0);
        let model = spec.model().unwrap();
        assert!((model.distribution.rid() - 0.2).abs() < 1e-15);
        assert!(SourceSpec {
            kind: "cauchy".into(),
            rho: 0.0,
            sigma2: 0.0
        }
        .model()
        .is_err());
    }
}
