//! Reference decoders: Bayesian AMP with a Bernoulli-Gaussian denoiser and
//! Basis Pursuit via ADMM. Both exploit the orthonormality of the kept
//! transform rows (`H_A H_A^T = I`), which makes the affine projection onto
//! `{x : H_A x = z}` exact and costs two transforms per application.

use crate::hadamard::{self, HadamardError, IndexSet};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Hadamard(#[from] HadamardError),
}

#[derive(Debug, Clone, Copy)]
pub struct AmpConfig {
    pub max_iters: usize,
    /// Fraction of the previous iterate retained on each update.
    pub damping: f64,
    /// Number of initializations (first is all-zero, rest random); the run
    /// with the smallest final residual wins.
    pub restarts: usize,
    /// Relative residual threshold for convergence.
    pub tol: f64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            max_iters: 200,
            damping: 0.0,
            restarts: 10,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdmmConfig {
    pub penalty: f64,
    pub max_iters: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            penalty: 1.0,
            max_iters: 5000,
            primal_tol: 1e-8,
            dual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmpStatus {
    Converged,
    MaxIters,
    /// Residual overflowed; callers should fall back to least squares.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct AmpResult {
    pub x_hat: Vec<f64>,
    pub status: AmpStatus,
    /// Final measurement-domain residual norm ||z - H_A x_hat||.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Converged,
    /// Iteration cap hit; the best (last) iterate is returned.
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct BpResult {
    pub x_hat: Vec<f64>,
    pub status: BpStatus,
    /// Final splitting gap ||x - w|| (the constraint H_A x = z holds exactly
    /// by construction).
    pub primal_residual: f64,
    pub iterations: usize,
}

/// Posterior mean and its derivative in `v` for `X ~ (1-rho) d_0 +
/// rho N(0, sigma2)` observed as `v = X + sqrt(tau2) Z`. The spike/slab
/// responsibility is computed in the log domain.
pub fn bg_denoiser(v: f64, tau2: f64, rho: f64, sigma2: f64) -> (f64, f64) {
    assert!(tau2 > 0.0, "noise variance must be positive");
    let shrink = sigma2 / (sigma2 + tau2);
    if rho <= 0.0 {
        return (0.0, 0.0);
    }
    if rho >= 1.0 {
        return (v * shrink, shrink);
    }
    let ln_slab = rho.ln() - 0.5 * (v * v / (sigma2 + tau2) + (sigma2 + tau2).ln());
    let ln_spike = (1.0 - rho).ln() - 0.5 * (v * v / tau2 + tau2.ln());
    let pi = 1.0 / (1.0 + (ln_spike - ln_slab).exp());
    let dpi = pi * (1.0 - pi) * v * (1.0 / tau2 - 1.0 / (sigma2 + tau2));
    (pi * shrink * v, shrink * (pi + v * dpi))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn amp_single(
    z: &[f64],
    set: &IndexSet,
    rho: f64,
    sigma2: f64,
    cfg: &AmpConfig,
    x0: Vec<f64>,
) -> Result<AmpResult, BaselineError> {
    let n = set.signal_len();
    let m = set.len().max(1) as f64;
    let z_norm = norm2(z).max(1e-300);

    let mut x = x0;
    let mut r: Vec<f64> = {
        let ax = hadamard::project_rows(&hadamard::fwht(&x)?, set)?;
        z.iter().zip(&ax).map(|(a, b)| a - b).collect()
    };
    let mut eta_prime_sum = 0.0;
    let mut iterations = 0;
    for t in 0..cfg.max_iters {
        iterations = t + 1;
        let r_norm = norm2(&r);
        if !r_norm.is_finite() || r_norm > 1e9 * z_norm {
            return Ok(AmpResult {
                x_hat: x,
                status: AmpStatus::Diverged,
                residual: r_norm,
                iterations,
            });
        }
        if r_norm <= cfg.tol * z_norm {
            return Ok(AmpResult {
                x_hat: x,
                status: AmpStatus::Converged,
                residual: r_norm,
                iterations,
            });
        }
        let tau2 = (r_norm * r_norm / m).max(1e-300);
        let back = hadamard::embed_rows_transpose(&r, set, n)?;
        let mut next = vec![0.0; n];
        let mut dsum = 0.0;
        for i in 0..n {
            let (mean, deriv) = bg_denoiser(back[i] + x[i], tau2, rho, sigma2);
            next[i] = mean;
            dsum += deriv;
        }
        if cfg.damping > 0.0 {
            for i in 0..n {
                next[i] = (1.0 - cfg.damping) * next[i] + cfg.damping * x[i];
            }
        }
        x = next;
        let ax = hadamard::project_rows(&hadamard::fwht(&x)?, set)?;
        let onsager = eta_prime_sum / m;
        r = z
            .iter()
            .zip(&ax)
            .zip(&r)
            .map(|((zi, axi), ri)| zi - axi + ri * onsager)
            .collect();
        eta_prime_sum = dsum;
    }
    let residual = {
        let ax = hadamard::project_rows(&hadamard::fwht(&x)?, set)?;
        norm2(&z.iter().zip(&ax).map(|(a, b)| a - b).collect::<Vec<_>>())
    };
    Ok(AmpResult {
        x_hat: x,
        status: AmpStatus::MaxIters,
        residual,
        iterations,
    })
}

/// Bayesian AMP for a Bernoulli-Gaussian source, best of `cfg.restarts`
/// initializations by final residual. The first initialization is all-zero;
/// the rest draw i.i.d. N(0, rho*sigma2) entries from `rng`.
pub fn amp_decode<R: Rng>(
    z: &[f64],
    set: &IndexSet,
    rho: f64,
    sigma2: f64,
    cfg: &AmpConfig,
    rng: &mut R,
) -> Result<AmpResult, BaselineError> {
    let n = set.signal_len();
    if z.len() != set.len() {
        return Err(HadamardError::SizeMismatch {
            got: z.len(),
            expected: set.len(),
        }
        .into());
    }
    let energy = (rho * sigma2).max(1e-12);
    let mut best: Option<AmpResult> = None;
    for restart in 0..cfg.restarts.max(1) {
        let x0 = if restart == 0 {
            vec![0.0; n]
        } else {
            (0..n)
                .map(|_| {
                    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                    let u2: f64 = rng.gen();
                    energy.sqrt()
                        * (-2.0 * u1.ln()).sqrt()
                        * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect()
        };
        let run = amp_single(z, set, rho, sigma2, cfg, x0)?;
        let better = match &best {
            None => true,
            Some(b) => {
                // Prefer non-diverged runs, then smaller residual.
                (run.status != AmpStatus::Diverged && b.status == AmpStatus::Diverged)
                    || (run.status != AmpStatus::Diverged) == (b.status != AmpStatus::Diverged)
                        && run.residual < b.residual
            }
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Basis Pursuit `min ||x||_1 s.t. H_A x = z` by ADMM. The x-update is the
/// exact projection `v + H_A^T (z - H_A v)` onto the constraint set, so
/// every returned iterate is feasible to round-off.
pub fn bp_decode(z: &[f64], set: &IndexSet, cfg: &AdmmConfig) -> Result<BpResult, BaselineError> {
    let n = set.signal_len();
    if z.len() != set.len() {
        return Err(HadamardError::SizeMismatch {
            got: z.len(),
            expected: set.len(),
        }
        .into());
    }
    assert!(cfg.penalty > 0.0, "ADMM penalty must be positive");

    let project = |v: &[f64]| -> Result<Vec<f64>, BaselineError> {
        let av = hadamard::project_rows(&hadamard::fwht(v)?, set)?;
        let diff: Vec<f64> = z.iter().zip(&av).map(|(a, b)| a - b).collect();
        let corr = hadamard::embed_rows_transpose(&diff, set, n)?;
        Ok(v.iter().zip(&corr).map(|(a, b)| a + b).collect())
    };

    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut x = project(&w)?;
    let mut primal = f64::INFINITY;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        iterations = k + 1;
        let vw: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a - b).collect();
        x = project(&vw)?;
        let thresh = 1.0 / cfg.penalty;
        let w_next: Vec<f64> = x
            .iter()
            .zip(&u)
            .map(|(xi, ui)| soft_threshold(xi + ui, thresh))
            .collect();
        let dual = cfg.penalty
            * norm2(&w_next.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
        w = w_next;
        for i in 0..n {
            u[i] += x[i] - w[i];
        }
        primal = norm2(&x.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            return Ok(BpResult {
                x_hat: x,
                status: BpStatus::Converged,
                primal_residual: primal,
                iterations,
            });
        }
    }
    log::warn!("bp_decode hit the iteration cap ({}); returning best iterate", cfg.max_iters);
    Ok(BpResult {
        x_hat: x,
        status: BpStatus::MaxIters,
        primal_residual: primal,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn denoiser_edge_cases() {
        assert_eq!(bg_denoiser(1.3, 0.5, 0.0, 1.0), (0.0, 0.0));
        let (m, d) = bg_denoiser(1.3, 0.5, 1.0, 2.0);
        assert!((m - 1.3 * 2.0 / 2.5).abs() < 1e-15);
        assert!((d - 2.0 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn denoiser_matches_direct_bayes() {
        // Direct Bayes-rule evaluation at rho=0.2, sigma2=1, tau2=0.25, v=1.
        let (rho, sigma2, tau2, v): (f64, f64, f64, f64) = (0.2, 1.0, 0.25, 1.0);
        let slab = rho * (-0.5 * v * v / (sigma2 + tau2)).exp()
            / (2.0 * std::f64::consts::PI * (sigma2 + tau2)).sqrt();
        let spike = (1.0 - rho) * (-0.5 * v * v / tau2).exp()
            / (2.0 * std::f64::consts::PI * tau2).sqrt();
        let pi = slab / (slab + spike);
        let expect = pi * v * sigma2 / (sigma2 + tau2);
        let (m, _) = bg_denoiser(v, tau2, rho, sigma2);
        assert!((m - expect).abs() < 1e-12, "{m} vs {expect}");
    }

    #[test]
    fn denoiser_derivative_matches_finite_differences() {
        let h = 1e-6;
        for &rho in &[0.1, 0.5, 0.9] {
            for &tau2 in &[0.05, 0.25, 1.0, 4.0] {
                for &v in &[-3.0, -1.0, -0.1, 0.0, 0.4, 2.0, 5.0] {
                    let (_, d) = bg_denoiser(v, tau2, rho, 1.0);
                    let (p, _) = bg_denoiser(v + h, tau2, rho, 1.0);
                    let (m, _) = bg_denoiser(v - h, tau2, rho, 1.0);
                    let fd = (p - m) / (2.0 * h);
                    assert!(
                        (d - fd).abs() < 1e-6,
                        "rho={rho} tau2={tau2} v={v}: {d} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn amp_zero_fixed_point() {
        let n = 64;
        let set = IndexSet::new((1..=n).step_by(2).collect(), n).unwrap();
        let z = vec![0.0; set.len()];
        let mut rng = stream(30, Purpose::AmpInit, 0);
        let out = amp_decode(&z, &set, 0.2, 1.0, &AmpConfig::default(), &mut rng).unwrap();
        assert_eq!(out.status, AmpStatus::Converged);
        assert!(out.x_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn amp_single_step_oracle() {
        // One iteration from x = 0 with damping 0: x1 = eta(A^T z; tau0).
        let n = 8;
        let set = IndexSet::new(vec![1, 3, 4, 7], n).unwrap();
        let (rho, sigma2) = (0.3, 1.0);
        let z = vec![0.7, -0.2, 0.5, 0.1];
        let cfg = AmpConfig {
            max_iters: 1,
            restarts: 1,
            ..AmpConfig::default()
        };
        let mut rng = stream(31, Purpose::AmpInit, 0);
        let out = amp_decode(&z, &set, rho, sigma2, &cfg, &mut rng).unwrap();

        let m = set.len() as f64;
        let tau2 = z.iter().map(|v| v * v).sum::<f64>() / m;
        let back = hadamard::embed_rows_transpose(&z, &set, n).unwrap();
        for i in 0..n {
            let (mean, _) = bg_denoiser(back[i], tau2, rho, sigma2);
            assert!((out.x_hat[i] - mean).abs() < 1e-14, "index {i}");
        }
    }

    #[test]
    fn amp_recovers_sparse_signal() {
        let n = 128;
        let (rho, sigma2) = (0.05, 1.0);
        let mut rng = stream(32, Purpose::Test, 0);
        let dist = crate::mixdist::MixedDistribution::bernoulli_gaussian(rho, sigma2);
        let x: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mut rows: Vec<usize> = (1..=n).collect();
        for i in (1..rows.len()).rev() {
            let j = rng.gen_range(0..=i);
            rows.swap(i, j);
        }
        let set = IndexSet::from_unsorted(rows[..n / 2].to_vec(), n).unwrap();
        let y = hadamard::fwht(&x).unwrap();
        let z = hadamard::project_rows(&y, &set).unwrap();
        let mut amp_rng = stream(32, Purpose::AmpInit, 0);
        let out = amp_decode(&z, &set, rho, sigma2, &AmpConfig::default(), &mut amp_rng).unwrap();
        let err = norm2(&x.iter().zip(&out.x_hat).map(|(a, b)| a - b).collect::<Vec<_>>());
        let scale = norm2(&x).max(1e-12);
        assert!(err <= 1e-3 * scale, "relative error {}", err / scale);
    }

    #[test]
    fn amp_is_deterministic() {
        let n = 32;
        let set = IndexSet::new((1..=n / 2).collect(), n).unwrap();
        let z: Vec<f64> = (0..n / 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let run = |seed| {
            let mut rng = stream(seed, Purpose::AmpInit, 0);
            amp_decode(&z, &set, 0.2, 1.0, &AmpConfig::default(), &mut rng)
                .unwrap()
                .x_hat
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn bp_full_rate_exact() {
        let n = 16;
        let set = IndexSet::full(n);
        let mut rng = stream(33, Purpose::Test, 0);
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let z = hadamard::project_rows(&hadamard::fwht(&x).unwrap(), &set).unwrap();
        let out = bp_decode(&z, &set, &AdmmConfig::default()).unwrap();
        let err = norm2(&x.iter().zip(&out.x_hat).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err < 1e-7, "err {err}");
    }

    #[test]
    fn bp_zero_signal() {
        let set = IndexSet::new(vec![1, 2], 4).unwrap();
        let out = bp_decode(&[0.0, 0.0], &set, &AdmmConfig::default()).unwrap();
        assert_eq!(out.status, BpStatus::Converged);
        assert!(out.x_hat.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn bp_recovers_8_sparse_from_half_measurements() {
        let n = 128;
        let mut rng = stream(34, Purpose::Test, 0);
        let mut x = vec![0.0; n];
        let mut placed = 0;
        while placed < 8 {
            let i = rng.gen_range(0..n);
            if x[i] == 0.0 {
                x[i] = if rng.gen::<bool>() { 1.0 } else { -1.0 } * (0.5 + rng.gen::<f64>());
                placed += 1;
            }
        }
        let mut rows: Vec<usize> = (1..=n).collect();
        for i in (1..rows.len()).rev() {
            let j = rng.gen_range(0..=i);
            rows.swap(i, j);
        }
        let set = IndexSet::from_unsorted(rows[..64].to_vec(), n).unwrap();
        let z = hadamard::project_rows(&hadamard::fwht(&x).unwrap(), &set).unwrap();
        let out = bp_decode(&z, &set, &AdmmConfig::default()).unwrap();
        let err = norm2(&x.iter().zip(&out.x_hat).map(|(a, b)| a - b).collect::<Vec<_>>());
        let scale = norm2(&x);
        assert!(err <= 1e-6 * scale, "relative error {}", err / scale);
        // Feasibility is exact by construction.
        let zc = hadamard::project_rows(&hadamard::fwht(&out.x_hat).unwrap(), &set).unwrap();
        let feas = norm2(&z.iter().zip(&zc).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(feas < 1e-10, "constraint violation {feas}");
    }
}
