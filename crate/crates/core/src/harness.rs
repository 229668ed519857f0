//! Experiment runner: rate sweeps with BLER/NMSE metrics, polarization
//! reports, the chain-rule diagnostic, and signal file I/O for the CLI.

use crate::baselines::{self, AdmmConfig, AmpConfig, AmpStatus, BaselineError};
use crate::codec::{self, CodecError, DecodeStatus};
use crate::construction::{self, ConstructionError, ConstructionProfile};
use crate::hadamard::HadamardError;
use crate::mixdist::{DistError, MixedDistribution, PrunePolicy};
use crate::polarops::{self, PolarOpsError};
use crate::quadrature::{self, QuadratureError, QuadratureSpec};
use crate::rng::{self, Purpose};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    PolarOps(#[from] PolarOpsError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Hadamard(#[from] HadamardError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown decoder '{0}' (expected sc, amp, bp, or ls)")]
    UnknownDecoder(String),
    #[error("no construction profile at '{path}': run `anacomp construct --n {n} --rho <rho> --sigma2 <sigma2> --trials <trials> --out {path}` first")]
    MissingProfile { path: String, n: u32 },
    #[error("signal parse error at line {line}: {message}")]
    SignalParse { line: usize, message: String },
    #[error("raw signal length {0} is not a multiple of 8 bytes")]
    RawLength(usize),
}

/// Which reconstruction algorithms a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Sc,
    Amp,
    Bp,
    Ls,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 4] = [
        DecoderKind::Sc,
        DecoderKind::Amp,
        DecoderKind::Bp,
        DecoderKind::Ls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Sc => "sc",
            DecoderKind::Amp => "amp",
            DecoderKind::Bp => "bp",
            DecoderKind::Ls => "ls",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "sc" => Ok(DecoderKind::Sc),
            "amp" => Ok(DecoderKind::Amp),
            "bp" => Ok(DecoderKind::Bp),
            "ls" => Ok(DecoderKind::Ls),
            other => Err(HarnessError::UnknownDecoder(other.to_string())),
        }
    }
}

/// The rate grid used when none is given: 0.20 to 0.60 in steps of 0.02.
pub fn default_rate_grid() -> Vec<f64> {
    (10..=30).map(|i| i as f64 / 50.0).collect()
}

/// One sweep: which rates, how many trials per (decoder, rate) cell, and
/// which decoders to run. The block length and source come from the
/// construction profile the sweep is pointed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rates: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub decoders: Vec<DecoderKind>,
    /// Block-error tolerance: an error when ||x_hat - x||^2 > eta * N * E[X^2].
    pub eta: f64,
    pub policy: PrunePolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rates: default_rate_grid(),
            trials: 500,
            seed: 0,
            decoders: vec![DecoderKind::Sc],
            eta: 1e-2,
            policy: PrunePolicy::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.rates.is_empty() {
            return Err(HarnessError::InvalidConfig("empty rate list".into()));
        }
        for &r in &self.rates {
            if !(r > 0.0 && r <= 1.0) {
                return Err(HarnessError::InvalidConfig(format!(
                    "rate {r} outside (0, 1]"
                )));
            }
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.decoders.is_empty() {
            return Err(HarnessError::InvalidConfig("empty decoder list".into()));
        }
        if !(self.eta > 0.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "eta {} must be positive",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Aggregated metrics for one (decoder, rate) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub decoder: DecoderKind,
    pub rate: f64,
    pub measurements: usize,
    pub trials: u64,
    pub bler: f64,
    pub nmse: f64,
    /// Mean wall-clock decode time per trial, milliseconds.
    pub runtime_ms: f64,
    /// Trials where the decoder reported failure (SC: no atomic decision;
    /// AMP: divergence).
    pub failures: u64,
    /// Trials finished by the least-squares fallback path.
    pub fallbacks: u64,
}

/// Block-error indicator: 1 when the squared error exceeds `eta` times the
/// analytic block energy `energy = N * E[X^2]`.
pub fn bler(x_hat: &[f64], x: &[f64], eta: f64, energy: f64) -> u64 {
    assert_eq!(x_hat.len(), x.len(), "length mismatch");
    let se: f64 = x_hat
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    u64::from(se > eta * energy)
}

/// Sample-mean NMSE over reconstruction pairs, with the analytic block
/// energy as denominator.
pub fn nmse_estimate(pairs: &[(&[f64], &[f64])], energy: f64) -> f64 {
    assert!(!pairs.is_empty(), "need at least one pair");
    let mean_se: f64 = pairs
        .iter()
        .map(|(a, b)| {
            assert_eq!(a.len(), b.len(), "length mismatch");
            a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .sum::<f64>()
        / pairs.len() as f64;
    mean_se / energy
}

struct CellAccum {
    block_errors: u64,
    sq_err_sum: f64,
    runtime_ms_sum: f64,
    failures: u64,
    fallbacks: u64,
}

/// Run every (decoder, rate) cell of the sweep against `profile` and return
/// one row per cell, decoders outermost in config order.
///
/// Trial `t` of every cell decodes the same source block (drawn from the
/// sweep substream at index `t`), so decoders and rates are compared on
/// identical data.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    profile: &ConstructionProfile,
) -> Result<Vec<MetricRow>, HarnessError> {
    cfg.validate()?;
    let source = profile.source.model()?;
    let n = 1usize << profile.n;
    let energy = n as f64 * source.second_moment();
    let amp_cfg = AmpConfig::default();
    let admm_cfg = AdmmConfig::default();

    let mut rows = Vec::with_capacity(cfg.decoders.len() * cfg.rates.len());
    for &decoder in &cfg.decoders {
        for &rate in &cfg.rates {
            let m = (rate * n as f64).ceil() as usize;
            let set = construction::select_reserved(&profile.q_hat, &profile.d_theory, m)?;
            let acc = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| -> Result<CellAccum, HarnessError> {
                    let mut rng = rng::stream(cfg.seed, Purpose::Sweep, trial);
                    let x = construction::sample_block(&source, n, &mut rng);
                    let z = codec::encode(&x, &set)?;
                    let start = Instant::now();
                    let (x_hat, failure, fallback) = match decoder {
                        DecoderKind::Sc => {
                            let r = codec::sc_decode(&z, &set, &source, &cfg.policy)?;
                            let (fail, fb) = match r.status {
                                DecodeStatus::Success => (0, 0),
                                DecodeStatus::FailedAt(_) => (1, 1),
                                DecodeStatus::FallbackUsed => (0, 1),
                            };
                            (r.x_hat, fail, fb)
                        }
                        DecoderKind::Amp => {
                            let mut amp_rng = rng::stream(cfg.seed, Purpose::AmpInit, trial);
                            let r = baselines::amp_decode(
                                &z,
                                &set,
                                profile.source.rho,
                                profile.source.sigma2,
                                &amp_cfg,
                                &mut amp_rng,
                            )?;
                            if r.status == AmpStatus::Diverged {
                                (codec::ls_fallback(&z, &set, n)?, 1, 1)
                            } else {
                                (r.x_hat, 0, 0)
                            }
                        }
                        DecoderKind::Bp => {
                            let r = baselines::bp_decode(&z, &set, &admm_cfg)?;
                            (r.x_hat, 0, 0)
                        }
                        DecoderKind::Ls => (codec::ls_fallback(&z, &set, n)?, 0, 0),
                    };
                    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                    let sq_err: f64 = x_hat
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    Ok(CellAccum {
                        block_errors: u64::from(sq_err > cfg.eta * energy),
                        sq_err_sum: sq_err,
                        runtime_ms_sum: runtime_ms,
                        failures: failure,
                        fallbacks: fallback,
                    })
                })
                .try_reduce(
                    || CellAccum {
                        block_errors: 0,
                        sq_err_sum: 0.0,
                        runtime_ms_sum: 0.0,
                        failures: 0,
                        fallbacks: 0,
                    },
                    |a, b| {
                        Ok(CellAccum {
                            block_errors: a.block_errors + b.block_errors,
                            sq_err_sum: a.sq_err_sum + b.sq_err_sum,
                            runtime_ms_sum: a.runtime_ms_sum + b.runtime_ms_sum,
                            failures: a.failures + b.failures,
                            fallbacks: a.fallbacks + b.fallbacks,
                        })
                    },
                )?;
            rows.push(MetricRow {
                decoder,
                rate,
                measurements: m,
                trials: cfg.trials,
                bler: acc.block_errors as f64 / cfg.trials as f64,
                nmse: acc.sq_err_sum / cfg.trials as f64 / energy,
                runtime_ms: acc.runtime_ms_sum / cfg.trials as f64,
                failures: acc.failures,
                fallbacks: acc.fallbacks,
            });
        }
    }
    Ok(rows)
}

/// Render sweep rows as CSV. Everything except `runtime_ms` is a
/// deterministic function of (config, seed).
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("decoder,R,M,trials,bler,nmse,runtime_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.4},{},{},{:.6},{:.10e},{:.3}\n",
            r.decoder, r.rate, r.measurements, r.trials, r.bler, r.nmse, r.runtime_ms
        ));
    }
    out
}

/// `run_sweep` plus CSV emission to `path`.
pub fn run_sweep_to_csv(
    cfg: &ExperimentConfig,
    profile: &ConstructionProfile,
    path: &Path,
) -> Result<Vec<MetricRow>, HarnessError> {
    let rows = run_sweep(cfg, profile)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(metrics_csv(&rows).as_bytes())?;
    Ok(rows)
}

/// Plot-ready polarization profile: one row per transform index with the
/// Monte-Carlo error estimate, its binomial standard error, and the analytic
/// RID.
pub fn polarization_csv(profile: &ConstructionProfile) -> String {
    let mut out = String::from("k,q_hat,stderr,d_theory\n");
    for (i, ((q, s), d)) in profile
        .q_hat
        .iter()
        .zip(&profile.stderr)
        .zip(&profile.d_theory)
        .enumerate()
    {
        out.push_str(&format!("{},{:.6},{:.6},{:.10}\n", i + 1, q, s, d));
    }
    out
}

/// Load the profile for a sweep, mapping absence to an actionable error.
pub fn load_profile_for_sweep(path: &Path, n_hint: u32) -> Result<ConstructionProfile, HarnessError> {
    if !path.exists() {
        return Err(HarnessError::MissingProfile {
            path: path.display().to_string(),
            n: n_hint,
        });
    }
    Ok(construction::load_profile(path)?)
}

/// Numeric check of the two-variable chain rule for mixed entropy: with
/// `Y1 = (X1+X2)/sqrt(2)` and `Y2 = (X1-X2)/sqrt(2)`,
///
/// `H(Y1) + E_y[H(Y2 | Y1 = y)] = H(X1) + H(X2) - [rho1(1-rho2) + rho2(1-rho1)]/2`
///
/// (entropies in bits). Returns the left side minus the right side; the
/// target is 0 up to quadrature error.
pub fn chain_rule_check(
    p1: &MixedDistribution,
    p2: &MixedDistribution,
    spec: &QuadratureSpec,
) -> Result<f64, HarnessError> {
    let p1 = p1.normalize()?;
    let p2 = p2.normalize()?;
    // Effectively unbounded policy: exact up to deduplication of identical
    // locations, which entropy computations require.
    let exact = PrunePolicy {
        eps_atom: 1e-12,
        eps_weight: 0.0,
        max_atoms: usize::MAX,
        max_gaussians: usize::MAX,
    };
    // Conditionals keep eps_atom = 0: merging near-coincident conditional
    // atoms (e.g. at +/-y for y near 0) creates a spurious entropy
    // discontinuity that stalls the outer quadrature.
    let cond_policy = PrunePolicy {
        eps_atom: 0.0,
        ..exact
    };
    let sum = polarops::f_combine_unpruned(&p1, &p2).prune(&exact);
    let h_y1 = sum.mixed_entropy(spec)?;
    let (rho1, rho2) = (p1.rid(), p2.rid());

    // Discrete part of the conditional-entropy expectation: Y1 lands on atom
    // `a` with its mass, and the conditional there is purely discrete.
    let mut expected_h_cond = 0.0;
    for a in &sum.atoms {
        if a.weight <= 0.0 {
            continue;
        }
        let cond =
            polarops::discrete_conditional(&p1.atoms, &p2.atoms, a.location, exact.eps_atom)?;
        expected_h_cond += a.weight * cond.discrete_entropy();
    }

    // Continuous part: integrate F(y) * H(Y2 | Y1 = y) over the continuous
    // density F of Y1 (total mass rho1 + rho2 - rho1*rho2).
    if !sum.gaussians.is_empty() {
        let intervals = quadrature::merge_intervals(
            sum.gaussians
                .iter()
                .map(|g| {
                    let s = g.variance.sqrt();
                    (g.mean - 10.0 * s, g.mean + 10.0 * s)
                })
                .collect(),
        );
        let integrand = |y: f64| {
            let w = polarops::joint_weights(&p1, &p2, y, exact.eps_atom);
            if !(w.f > 0.0) {
                return 0.0;
            }
            let cond = polarops::g_condition_continuous(&p1, &p2, y, &cond_policy)
                .expect("positive density implies a well-defined conditional");
            let h = cond
                .mixed_entropy(spec)
                .expect("conditional entropy quadrature");
            w.f * h
        };
        for (a, b) in intervals {
            expected_h_cond +=
                quadrature::integrate(integrand, a, b, spec, "chain-rule outer integral")?;
        }
    }

    let correction = (rho1 * (1.0 - rho2) + rho2 * (1.0 - rho1)) / 2.0;
    Ok(h_y1 + expected_h_cond - p1.mixed_entropy(spec)? - p2.mixed_entropy(spec)? + correction)
}

/// Parse a one-float-per-line text signal. Blank lines are ignored.
pub fn parse_signal_text(text: &str) -> Result<Vec<f64>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|e| HarnessError::SignalParse {
            line: i + 1,
            message: format!("{e}: '{t}'"),
        })?;
        if !v.is_finite() {
            return Err(HarnessError::SignalParse {
                line: i + 1,
                message: format!("non-finite value '{t}'"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Render a signal as one float per line, round-trip exact.
pub fn format_signal_text(x: &[f64]) -> String {
    let mut out = String::new();
    for v in x {
        // {:?} prints the shortest representation that parses back exactly.
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

/// Decode a raw little-endian f64 signal.
pub fn parse_signal_raw(bytes: &[u8]) -> Result<Vec<f64>, HarnessError> {
    if bytes.len() % 8 != 0 {
        return Err(HarnessError::RawLength(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Encode a signal as raw little-endian f64 bytes.
pub fn format_signal_raw(x: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(x.len() * 8);
    for v in x {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// File format for `encode`/`decode` signal vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Text,
    Raw,
}

impl FromStr for SignalFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "text" => Ok(SignalFormat::Text),
            "raw" => Ok(SignalFormat::Raw),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown signal format '{other}' (expected text or raw)"
            ))),
        }
    }
}

/// Read a signal file in the given format.
pub fn read_signal(path: &Path, format: SignalFormat) -> Result<Vec<f64>, HarnessError> {
    let bytes = std::fs::read(path)?;
    match format {
        SignalFormat::Text => parse_signal_text(&String::from_utf8_lossy(&bytes)),
        SignalFormat::Raw => parse_signal_raw(&bytes),
    }
}

/// Write a signal file in the given format.
pub fn write_signal(path: &Path, x: &[f64], format: SignalFormat) -> Result<(), HarnessError> {
    match format {
        SignalFormat::Text => std::fs::write(path, format_signal_text(x))?,
        SignalFormat::Raw => std::fs::write(path, format_signal_raw(x))?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixdist::Atom;

    fn bg(rho: f64, sigma2: f64) -> MixedDistribution {
        MixedDistribution::bernoulli_gaussian(rho, sigma2)
    }

    #[test]
    fn bler_indicator_edges() {
        let x = vec![1.0, -1.0, 0.5];
        assert_eq!(bler(&x, &x, 1e-2, 3.0), 0);
        // Zero estimate against a full-energy block is always an error.
        let zero = vec![0.0; 3];
        let energy: f64 = x.iter().map(|v| v * v).sum();
        assert_eq!(bler(&zero, &x, 1e-2, energy), 1);
    }

    #[test]
    fn nmse_hand_computed() {
        let x = vec![1.0, 2.0];
        let x_hat = vec![1.5, 1.0];
        // squared error 0.25 + 1.0 = 1.25 against energy 10.
        let v = nmse_estimate(&[(&x_hat, &x)], 10.0);
        assert!((v - 0.125).abs() < 1e-15);
        assert_eq!(nmse_estimate(&[(&x, &x)], 10.0), 0.0);
    }

    #[test]
    fn default_rate_grid_covers_paper_region() {
        let g = default_rate_grid();
        assert_eq!(g.len(), 21);
        assert!((g[0] - 0.20).abs() < 1e-15);
        assert!((g[20] - 0.60).abs() < 1e-15);
        assert!((g[1] - g[0] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut cfg = ExperimentConfig::default();
        cfg.rates = vec![1.5];
        assert!(cfg.validate().is_err());
        cfg.rates = vec![0.5];
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 10;
        cfg.decoders.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn chain_rule_pure_gaussians() {
        let spec = QuadratureSpec::default();
        let p1 = MixedDistribution::gaussian(0.0, 1.0);
        let p2 = MixedDistribution::gaussian(0.5, 2.0);
        let r = chain_rule_check(&p1, &p2, &spec).unwrap();
        assert!(r.abs() < 1e-6, "residual {r}");
    }

    #[test]
    fn chain_rule_pure_discretes() {
        let spec = QuadratureSpec::default();
        let two = MixedDistribution {
            atoms: vec![
                Atom {
                    location: 0.0,
                    weight: 0.3,
                },
                Atom {
                    location: 1.0,
                    weight: 0.7,
                },
            ],
            gaussians: vec![],
        };
        let r = chain_rule_check(&two, &two, &spec).unwrap();
        assert!(r.abs() < 1e-9, "residual {r}");
    }

    #[test]
    fn chain_rule_mixed_bg() {
        let spec = QuadratureSpec {
            abs_tol: 1e-7,
            ..QuadratureSpec::default()
        };
        let r = chain_rule_check(&bg(0.5, 1.0), &bg(0.5, 1.0), &spec).unwrap();
        assert!(r.abs() < 1e-3, "residual {r}");
    }

    #[test]
    fn signal_text_round_trip() {
        let x = vec![0.1, -3.25, 1e-300, 12345.6789, 0.0];
        let parsed = parse_signal_text(&format_signal_text(&x)).unwrap();
        assert_eq!(parsed, x);
        assert!(parse_signal_text("1.0\nnot-a-number\n").is_err());
        assert!(parse_signal_text("inf\n").is_err());
        assert_eq!(parse_signal_text("\n \n").unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn signal_raw_round_trip() {
        let x = vec![0.1, -3.25, f64::MIN_POSITIVE, 0.0];
        let parsed = parse_signal_raw(&format_signal_raw(&x)).unwrap();
        assert_eq!(parsed, x);
        assert!(matches!(
            parse_signal_raw(&[0u8; 7]),
            Err(HarnessError::RawLength(7))
        ));
    }

    #[test]
    fn decoder_kind_round_trip() {
        for d in DecoderKind::ALL {
            assert_eq!(d.as_str().parse::<DecoderKind>().unwrap(), d);
        }
        assert!("viterbi".parse::<DecoderKind>().is_err());
    }

    #[test]
    fn metrics_csv_has_contract_header() {
        let rows = vec![MetricRow {
            decoder: DecoderKind::Sc,
            rate: 0.5,
            measurements: 256,
            trials: 10,
            bler: 0.1,
            nmse: 0.01,
            runtime_ms: 3.5,
            failures: 0,
            fallbacks: 1,
        }];
        let csv = metrics_csv(&rows);
        assert!(csv.starts_with("decoder,R,M,trials,bler,nmse,runtime_ms\n"));
        assert!(csv.contains("sc,0.5000,256,10,"));
    }

    #[test]
    fn sweep_at_rate_one_is_exact() {
        let profile = construction::build_profile(
            &construction::SourceSpec::bernoulli_gaussian(0.2, 1.0),
            4,
            40,
            &PrunePolicy::default(),
            9,
        )
        .unwrap();
        let cfg = ExperimentConfig {
            rates: vec![1.0],
            trials: 20,
            seed: 3,
            decoders: vec![DecoderKind::Sc, DecoderKind::Ls],
            ..ExperimentConfig::default()
        };
        let rows = run_sweep(&cfg, &profile).unwrap();
        for row in &rows {
            assert_eq!(row.measurements, 16);
            assert_eq!(row.bler, 0.0, "decoder {}", row.decoder);
            assert!(row.nmse <= 1e-16, "decoder {} nmse {}", row.decoder, row.nmse);
        }
    }

    #[test]
    fn sweep_is_deterministic_modulo_runtime() {
        let profile = construction::build_profile(
            &construction::SourceSpec::bernoulli_gaussian(0.3, 1.0),
            3,
            30,
            &PrunePolicy::default(),
            11,
        )
        .unwrap();
        let cfg = ExperimentConfig {
            rates: vec![0.5, 0.75],
            trials: 15,
            seed: 42,
            decoders: vec![DecoderKind::Sc, DecoderKind::Amp],
            ..ExperimentConfig::default()
        };
        let a = run_sweep(&cfg, &profile).unwrap();
        let b = run_sweep(&cfg, &profile).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.bler, rb.bler);
            assert_eq!(ra.nmse, rb.nmse);
            assert_eq!(ra.failures, rb.failures);
            assert_eq!(ra.fallbacks, rb.fallbacks);
        }
    }

    proptest::proptest! {
        #[test]
        fn signal_text_round_trips(x in proptest::collection::vec(-1e12f64..1e12, 0..64)) {
            let parsed = parse_signal_text(&format_signal_text(&x)).unwrap();
            proptest::prop_assert_eq!(parsed, x);
        }

        #[test]
        fn signal_raw_round_trips(x in proptest::collection::vec(
            proptest::num::f64::ANY, 0..64,
        )) {
            let bytes = format_signal_raw(&x);
            let parsed = parse_signal_raw(&bytes).unwrap();
            proptest::prop_assert_eq!(format_signal_raw(&parsed), bytes);
        }

        #[test]
        fn raw_parser_rejects_ragged_lengths(mut bytes in proptest::collection::vec(
            proptest::num::u8::ANY, 0..256,
        )) {
            if bytes.len() % 8 == 0 {
                bytes.push(0);
            }
            proptest::prop_assert!(parse_signal_raw(&bytes).is_err());
        }
    }
}
