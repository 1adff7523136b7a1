//! Command-line front end: `simulate` runs a config file, `sweep` runs a
//! grid with flag overrides, `calibrate-threshold` tabulates energy
//! thresholds, and `info` prints derived quantities.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 for runtime
//! failures.

use clap::{Args, Parser, Subcommand, ValueEnum};
use dqmimo::detect_dapsk::{amplitude_threshold, calibrate_threshold_mc, EnergyModel};
use dqmimo::diffcode::Mode;
use dqmimo::harness::{self, load_config, point_info, ChannelParams, Detector, Scheme, SimConfig};
use dqmimo::quantize::{bussgang_calibrate, dapsk_two_bit_spec, QuantizerSpec};
use dqmimo::statmath::RandomSource;
use dqmimo::Error;
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dqmimo",
    version,
    about = "Differential modulation link simulator for quantized massive-MIMO uplinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Ml,
    Decoupled,
    Id,
    Multibit,
    Energy,
    Vql,
    Coherent,
}

impl From<DetectorArg> for Detector {
    fn from(d: DetectorArg) -> Self {
        match d {
            DetectorArg::Ml => Detector::Ml,
            DetectorArg::Decoupled => Detector::Decoupled,
            DetectorArg::Id => Detector::Id,
            DetectorArg::Multibit => Detector::Multibit,
            DetectorArg::Energy => Detector::Energy,
            DetectorArg::Vql => Detector::Vql,
            DetectorArg::Coherent => Detector::Coherent,
        }
    }
}

#[derive(Args)]
struct RunFlags {
    /// SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    /// Monte-Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<u64>,
    /// Run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
    /// Detector override.
    #[arg(long, value_enum)]
    detector: Option<DetectorArg>,
    /// Run trials on a single thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a configuration file.
    Simulate {
        /// Configuration file (TOML).
        #[arg(long)]
        config: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a sweep with flag overrides on top of a config file or the
    /// built-in default configuration.
    Sweep {
        /// Configuration file (TOML); a default DPSK setup when omitted.
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Tabulate energy-detection thresholds against antenna count and SNR.
    CalibrateThreshold {
        /// Antenna counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "42,84,126")]
        u: Vec<usize>,
        /// SNR grid in dB, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,10,20")]
        snr_db: Vec<f64>,
        /// Calibration trials per hypothesis.
        #[arg(long, default_value_t = 50_000)]
        trials: usize,
        /// Ring ratio.
        #[arg(long, default_value_t = 2.0)]
        a: f64,
        /// ADC bits per real dimension.
        #[arg(long, default_value_t = 2)]
        q_b: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<String>,
    },
    /// Print derived quantities (taps, PDP, Bussgang pair, SNR sets) for a
    /// configuration.
    Info {
        #[arg(long)]
        config: String,
    },
}

fn default_config() -> SimConfig {
    SimConfig {
        mode: Mode::Sc,
        scheme: Scheme::Dpsk,
        u: 64,
        k: 2,
        n: 256,
        n_s: 2,
        n_d: 2,
        n_cp: None,
        m: 4,
        a: 2.0,
        q_b: 1,
        vql: None,
        channel: ChannelParams {
            ts: 50e-9,
            tau_rms: 50e-9,
            doppler_hz: 0.0,
        },
        snr_grid_db: vec![0.0, 5.0, 10.0],
        trials: 1000,
        seed: 1,
        xi: None,
        ser_threshold: 0.05,
        coherence_uses: None,
        min_bit_errors: 100,
        detector: None,
    }
}

fn apply_flags(config: &mut SimConfig, flags: &RunFlags) {
    if let Some(snr) = &flags.snr_db {
        config.snr_grid_db = snr.clone();
    }
    if let Some(trials) = flags.trials {
        config.trials = trials;
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(d) = flags.detector {
        config.detector = Some(d.into());
    }
}

fn run_sweep_command(mut config: SimConfig, flags: &RunFlags) -> Result<(), Error> {
    apply_flags(&mut config, flags);
    config.validate()?;
    let records = harness::sweep(&config, !flags.serial)?;
    match &flags.out {
        Some(path) => harness::emit_csv(&records, path)?,
        None => {
            let stdout = std::io::stdout();
            harness::write_csv(&records, stdout.lock()).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    for r in &records {
        eprintln!(
            "snr {:>6.2} dB: ber {:.3e} ser {:.3e} se {:.1} ({} trials, {:.1}s)",
            r.snr_db, r.ber, r.ser, r.spectral_efficiency, r.trials_run, r.wall_time_s
        );
    }
    Ok(())
}

fn run_calibrate(
    u_list: &[usize],
    snr_list: &[f64],
    trials: usize,
    a: f64,
    q_b: u32,
    seed: u64,
    out: Option<&str>,
) -> Result<(), Error> {
    let spec = match q_b {
        1 => QuantizerSpec::one_bit(),
        2 => dapsk_two_bit_spec(a)?,
        other => return Err(Error::Config(format!("q_b must be 1 or 2, got {other}"))),
    };
    let mut rows = String::from("u,snr_db,gamma_mc,gamma_analytic,calibration_error_rate\n");
    for &u in u_list {
        for &snr in snr_list {
            let noise_var = 10f64.powf(-snr / 10.0);
            let mut rng = RandomSource::new(seed, u64::MAX - 2);
            let cal = calibrate_threshold_mc(u, a, noise_var, Some(&spec), &mut rng, trials)?;
            if !cal.separated {
                eprintln!(
                    "warning: U={u}, {snr} dB: energy histograms do not separate; \
                     threshold fell back to the midpoint of means"
                );
            }
            let pair = bussgang_calibrate(
                &spec,
                1.0,
                &mut RandomSource::new(seed, u64::MAX - 1),
                200_000,
            )?;
            let model = EnergyModel::new(pair, a, noise_var, 1.0, u)?;
            let analytic = amplitude_threshold(&model)?;
            rows.push_str(&format!(
                "{u},{snr},{},{},{}\n",
                cal.gamma, analytic, cal.error_rate
            ));
        }
    }
    match out {
        Some(path) => std::fs::write(path, rows).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?,
        None => print!("{rows}"),
    }
    Ok(())
}

fn run_info(config: &SimConfig) -> Result<(), Error> {
    config.validate()?;
    let spec = config.channel_spec()?;
    println!("channel taps L = {}", spec.num_taps());
    let head: Vec<String> = spec.pdp.iter().take(8).map(|p| format!("{p:.4}")).collect();
    println!(
        "pdp = [{}{}] (sum = 1)",
        head.join(", "),
        if spec.num_taps() > 8 { ", ..." } else { "" }
    );
    println!("detector = {:?}", config.detector());
    println!("coherence interval = {} uses", config.coherence());
    for &snr in &config.snr_grid_db {
        let info = point_info(config, snr)?;
        println!("snr {snr} dB:");
        println!(
            "  sigma_z^2 = {:.6}, agc scale = {:.6}",
            info.noise_var, info.agc_scale
        );
        println!(
            "  bussgang eta = {:.6}, sigma_eps^2 = {:.6}",
            info.eta, info.sigma_eps_sq
        );
        println!("  rho (dpsk composite) = {:.6}", info.rho_dpsk);
        println!(
            "  rho set (dapsk transitions 1, a, 1/a) = [{:.6}, {:.6}, {:.6}]",
            info.rho_set[0], info.rho_set[1], info.rho_set[2]
        );
        if let Some(gamma) = info.gamma_analytic {
            println!("  analytic energy threshold gamma = {gamma:.6}");
        }
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { config, flags } => {
            load_config(config).and_then(|c| run_sweep_command(c, flags))
        }
        Command::Sweep { config, flags } => {
            let base = match config {
                Some(path) => load_config(path),
                None => Ok(default_config()),
            };
            base.and_then(|c| run_sweep_command(c, flags))
        }
        Command::CalibrateThreshold {
            u,
            snr_db,
            trials,
            a,
            q_b,
            seed,
            out,
        } => run_calibrate(u, snr_db, *trials, *a, *q_b, *seed, out.as_deref()),
        Command::Info { config } => load_config(config).and_then(|c| run_info(&c)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let _ = writeln!(std::io::stderr(), "error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
