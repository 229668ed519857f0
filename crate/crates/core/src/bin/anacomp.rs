//! Command-line front end: construction, rate sweeps, polarization reports,
//! single-vector encode/decode, and numeric diagnostics.

use anacomp::codec;
use anacomp::construction::{self, SourceSpec};
use anacomp::harness::{
    self, DecoderKind, ExperimentConfig, SignalFormat,
};
use anacomp::mixdist::{MixedDistribution, PrunePolicy};
use anacomp::quadrature::QuadratureSpec;
use anacomp::rng::{self, Purpose};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "anacomp",
    about = "Lossless analog compression: partial Hadamard encoding with analog successive-cancellation decoding",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// log2 of the block length N.
    #[arg(long)]
    n: u32,
    /// Continuous (Gaussian) weight of the Bernoulli-Gaussian source.
    #[arg(long)]
    rho: f64,
    /// Variance of the Gaussian component.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
}

#[derive(Args)]
struct PolicyArgs {
    /// Maximum atoms kept per conditional.
    #[arg(long, default_value_t = PrunePolicy::default().max_atoms)]
    max_atoms: usize,
    /// Maximum Gaussian components kept per conditional.
    #[arg(long, default_value_t = PrunePolicy::default().max_gaussians)]
    max_gaussians: usize,
}

impl PolicyArgs {
    fn policy(&self) -> PrunePolicy {
        PrunePolicy {
            max_atoms: self.max_atoms,
            max_gaussians: self.max_gaussians,
            ..PrunePolicy::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the per-index error profile and write it as a JSON profile.
    Construct {
        #[command(flatten)]
        source: SourceArgs,
        /// Genie-aided Monte-Carlo trials.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Output profile path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a rate sweep against a construction profile and write metrics CSV.
    Simulate {
        /// Construction profile from `construct`.
        #[arg(long)]
        profile: PathBuf,
        /// Comma-separated measurement rates in (0, 1]; default 0.20..0.60 step 0.02.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        /// Comma-separated decoders: sc, amp, bp, ls.
        #[arg(long, value_delimiter = ',', default_value = "sc")]
        decoders: Vec<String>,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Block-error energy tolerance.
        #[arg(long, default_value_t = 1e-2)]
        eta: f64,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Construct and emit the plot-ready polarization CSV (k, q_hat, stderr, d_theory).
    Polarize {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compress a signal file to its reserved-set measurements.
    Encode {
        /// Construction profile fixing N and the reserved-set ranking.
        #[arg(long)]
        profile: PathBuf,
        /// Measurement rate; M = ceil(R * N) reserved rows.
        #[arg(long)]
        rate: f64,
        /// Input signal (length N).
        #[arg(long)]
        input: PathBuf,
        /// Output measurement vector (length M).
        #[arg(long)]
        output: PathBuf,
        /// Signal file format: text (one float per line) or raw (little-endian f64).
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Reconstruct a signal from its measurements.
    Decode {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        rate: f64,
        /// Input measurement vector (length M).
        #[arg(long)]
        input: PathBuf,
        /// Output reconstructed signal (length N).
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
        /// Decoder: sc, amp, bp, or ls.
        #[arg(long, default_value = "sc")]
        decoder: String,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Numeric diagnostics.
    Diag {
        #[command(subcommand)]
        diag: DiagCommand,
    },
}

#[derive(Subcommand)]
enum DiagCommand {
    /// Check the two-variable mixed-entropy chain rule; prints the residual.
    ChainRule {
        /// Continuous weight of the first Bernoulli-Gaussian input.
        #[arg(long, default_value_t = 0.5)]
        rho1: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma21: f64,
        /// Continuous weight of the second input.
        #[arg(long, default_value_t = 0.5)]
        rho2: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma22: f64,
        /// Quadrature tolerance.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
}

fn reserved_for_rate(
    profile: &construction::ConstructionProfile,
    rate: f64,
) -> Result<anacomp::hadamard::IndexSet, harness::HarnessError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(harness::HarnessError::InvalidConfig(format!(
            "rate {rate} outside (0, 1]"
        )));
    }
    let n = 1usize << profile.n;
    let m = (rate * n as f64).ceil() as usize;
    Ok(construction::select_reserved(
        &profile.q_hat,
        &profile.d_theory,
        m,
    )?)
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Construct {
            source,
            trials,
            seed,
            policy,
            out,
        } => {
            let spec = SourceSpec::bernoulli_gaussian(source.rho, source.sigma2);
            let profile =
                construction::build_profile(&spec, source.n, trials, &policy.policy(), seed)?;
            construction::save_profile(&profile, &out)?;
            println!(
                "wrote profile: n={} N={} trials={} seed={} -> {}",
                profile.n,
                1usize << profile.n,
                profile.trials,
                profile.seed,
                out.display()
            );
        }
        Command::Simulate {
            profile,
            rates,
            decoders,
            trials,
            seed,
            eta,
            policy,
            out,
        } => {
            let prof = harness::load_profile_for_sweep(&profile, 9)?;
            let decoders = decoders
                .iter()
                .map(|d| d.parse::<DecoderKind>())
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = ExperimentConfig {
                rates: if rates.is_empty() {
                    harness::default_rate_grid()
                } else {
                    rates
                },
                trials,
                seed,
                decoders,
                eta,
                policy: policy.policy(),
            };
            let rows = harness::run_sweep_to_csv(&cfg, &prof, &out)?;
            println!(
                "wrote {} metric rows (seed={}) -> {}",
                rows.len(),
                seed,
                out.display()
            );
        }
        Command::Polarize {
            source,
            trials,
            seed,
            policy,
            out,
        } => {
            let spec = SourceSpec::bernoulli_gaussian(source.rho, source.sigma2);
            let profile =
                construction::build_profile(&spec, source.n, trials, &policy.policy(), seed)?;
            std::fs::write(&out, harness::polarization_csv(&profile))?;
            println!(
                "wrote polarization report: n={} trials={} seed={} -> {}",
                profile.n,
                trials,
                seed,
                out.display()
            );
        }
        Command::Encode {
            profile,
            rate,
            input,
            output,
            format,
        } => {
            let prof = harness::load_profile_for_sweep(&profile, 9)?;
            let format: SignalFormat = format.parse()?;
            let set = reserved_for_rate(&prof, rate)?;
            let x = harness::read_signal(&input, format)?;
            let z = codec::encode(&x, &set)?;
            harness::write_signal(&output, &z, format)?;
            println!(
                "encoded N={} -> M={} measurements -> {}",
                x.len(),
                z.len(),
                output.display()
            );
        }
        Command::Decode {
            profile,
            rate,
            input,
            output,
            format,
            decoder,
            policy,
            seed,
        } => {
            let prof = harness::load_profile_for_sweep(&profile, 9)?;
            let format: SignalFormat = format.parse()?;
            let decoder: DecoderKind = decoder.parse()?;
            let set = reserved_for_rate(&prof, rate)?;
            let z = harness::read_signal(&input, format)?;
            let n = 1usize << prof.n;
            let x_hat = match decoder {
                DecoderKind::Sc => {
                    let source = prof.source.model()?;
                    let r = codec::sc_decode(&z, &set, &source, &policy.policy())?;
                    println!("sc status: {:?}", r.status);
                    r.x_hat
                }
                DecoderKind::Amp => {
                    let mut amp_rng = rng::stream(seed, Purpose::AmpInit, 0);
                    anacomp::baselines::amp_decode(
                        &z,
                        &set,
                        prof.source.rho,
                        prof.source.sigma2,
                        &anacomp::baselines::AmpConfig::default(),
                        &mut amp_rng,
                    )?
                    .x_hat
                }
                DecoderKind::Bp => anacomp::baselines::bp_decode(
                    &z,
                    &set,
                    &anacomp::baselines::AdmmConfig::default(),
                )?
                .x_hat,
                DecoderKind::Ls => codec::ls_fallback(&z, &set, n)?,
            };
            harness::write_signal(&output, &x_hat, format)?;
            println!(
                "decoded M={} -> N={} samples -> {}",
                z.len(),
                x_hat.len(),
                output.display()
            );
        }
        Command::Diag { diag } => match diag {
            DiagCommand::ChainRule {
                rho1,
                sigma21,
                rho2,
                sigma22,
                tol,
            } => {
                let spec = QuadratureSpec {
                    abs_tol: tol,
                    ..QuadratureSpec::default()
                };
                let p1 = MixedDistribution::bernoulli_gaussian(rho1, sigma21);
                let p2 = MixedDistribution::bernoulli_gaussian(rho2, sigma22);
                let r = harness::chain_rule_check(&p1, &p2, &spec)?;
                println!("chain-rule residual: {r:.6e}");
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
