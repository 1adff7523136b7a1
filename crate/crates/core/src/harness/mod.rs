//! Monte-Carlo engine: configuration, per-trial simulation of every scheme
//! and detector, SNR sweeps with deterministic parallelism, metrics, and
//! CSV output.
//!
//! Every trial owns random stream `trial_index` of the run seed, so trial
//! `k` is reproducible without generating the preceding trials and the
//! aggregate counts are identical under any scheduling. Calibration draws
//! (Bussgang pairs, energy thresholds) use dedicated high streams.

mod config;
mod csv;

pub use config::{load_config, parse_config};
pub use csv::{emit_csv, write_csv};

use crate::coherent::{
    coherent_euclidean_detect, coherent_ml_detect, coherent_multibit_detect, ls_channel_estimate,
    PilotPlan,
};
use crate::detect_dapsk::{
    amplitude_threshold, calibrate_threshold_mc_with, dapsk_rho_set, detect_amplitude,
    energy_statistic, inverse_decode, inverse_estimate, ml_one_bit_dapsk, multibit_ml,
    recover_bits, vql_detect, DapskObservation, EnergyModel, PhaseRule,
};
use crate::detect_dpsk::{decoupled_detect, ml_one_bit_detect, QuantizedBlockPair};
use crate::diffcode::{
    diff_encode, to_transmit, DapskState, DispersionSet, Mode, PskConstellation, Ring,
};
use crate::linalg::CMat;
use crate::propagation::{
    group_blocks, ofdm_demodulate, receive_frame, ChannelRealization, ChannelSpec,
};
use crate::quantize::{
    agc_scale, bussgang_calibrate, dapsk_two_bit_spec, quantize_complex, vql_partition, Bussgang,
    QuantizerSpec, VqlPartition,
};
use crate::statmath::RandomSource;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

const BUSSGANG_SAMPLES: usize = 200_000;
const THRESHOLD_TRIALS: usize = 50_000;
const BATCH: u64 = 256;

/// Modulation/detection scheme of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Dpsk,
    Dapsk,
    Coherent,
}

/// Receiver selection; each scheme has a natural default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    /// One-bit joint ML (DPSK or DAPSK).
    Ml,
    /// Reduced-complexity decoupled detector (DPSK).
    Decoupled,
    /// Inverse decoding (DAPSK).
    Id,
    /// Exact-quantization-model ML (DAPSK).
    Multibit,
    /// Energy-threshold amplitude detection with ID phase (DAPSK).
    Energy,
    /// Variable quantization levels across antenna groups (DAPSK).
    Vql,
    /// Pilot-aided coherent ML.
    Coherent,
}

/// Propagation parameters of the run; tap count and PDP derive from the
/// exponential profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Sample period in seconds.
    pub ts: f64,
    /// RMS delay spread in seconds.
    pub tau_rms: f64,
    /// Maximum Doppler in hertz (OFDM fast fading).
    #[serde(default)]
    pub doppler_hz: f64,
}

fn default_ring_ratio() -> f64 {
    2.0
}

fn default_ser_threshold() -> f64 {
    0.05
}

fn default_min_bit_errors() -> u64 {
    100
}

/// Full description of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    pub scheme: Scheme,
    /// Receive antennas.
    pub u: usize,
    /// Transmit antennas.
    pub k: usize,
    /// Channel uses (or subcarriers) per frame.
    pub n: usize,
    /// Symbols per differential block.
    pub n_s: usize,
    /// Uses per differential block.
    pub n_d: usize,
    /// Cyclic prefix length; defaults to the channel memory.
    #[serde(default)]
    pub n_cp: Option<usize>,
    /// PSK constellation size.
    pub m: usize,
    /// DAPSK ring ratio.
    #[serde(default = "default_ring_ratio")]
    pub a: f64,
    /// ADC bits per real dimension (1 or 2).
    pub q_b: u32,
    /// VQL group sizes; presence selects per-group one-bit quantizers.
    #[serde(default)]
    pub vql: Option<[usize; 3]>,
    pub channel: ChannelParams,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Pilot fraction (coherent scheme only).
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default = "default_ser_threshold")]
    pub ser_threshold: f64,
    /// Channel refresh interval in uses; defaults to the whole frame.
    #[serde(default)]
    pub coherence_uses: Option<usize>,
    /// Early-stop error budget per sweep point; 0 disables early stopping.
    #[serde(default = "default_min_bit_errors")]
    pub min_bit_errors: u64,
    /// Detector override; set from the command line, not the file.
    #[serde(skip)]
    pub detector: Option<Detector>,
}

impl SimConfig {
    pub fn detector(&self) -> Detector {
        self.detector.unwrap_or(match self.scheme {
            Scheme::Dpsk => Detector::Decoupled,
            Scheme::Dapsk => Detector::Energy,
            Scheme::Coherent => Detector::Coherent,
        })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m.trailing_zeros() as usize
    }

    /// Channel refresh interval in uses.
    pub fn coherence(&self) -> usize {
        self.coherence_uses.unwrap_or(self.n)
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec> {
        ChannelSpec::new(
            self.channel.ts,
            self.channel.tau_rms,
            self.channel.doppler_hz,
            self.k,
            self.u,
            self.n,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.u == 0 || self.k == 0 || self.n == 0 {
            return fail("antenna and use counts must be positive".into());
        }
        if self.m < 2 || !self.m.is_power_of_two() {
            return fail(format!("m must be a power of two >= 2, got {}", self.m));
        }
        if !matches!(self.q_b, 1 | 2) {
            return fail(format!("q_b must be 1 or 2, got {}", self.q_b));
        }
        if self.n_d == 0 || self.n % self.n_d != 0 {
            return fail(format!(
                "n = {} must divide into blocks of n_d = {}",
                self.n, self.n_d
            ));
        }
        if self.snr_grid_db.is_empty() {
            return fail("snr_grid_db must not be empty".into());
        }
        let coherence = self.coherence();
        if coherence == 0 || self.n % coherence != 0 {
            return fail(format!(
                "coherence interval {coherence} must divide the frame length {}",
                self.n
            ));
        }
        let spec = self.channel_spec()?;
        match self.scheme {
            Scheme::Dpsk => {
                if self.k != self.n_d || self.n_s != self.n_d {
                    return fail(format!(
                        "square differential codes need k = n_d = n_s, got k={} n_d={} n_s={}",
                        self.k, self.n_d, self.n_s
                    ));
                }
                if !matches!(self.n_d, 1 | 2) {
                    return fail("differential block dimension must be 1 or 2".into());
                }
            }
            Scheme::Dapsk => {
                if self.k != 1 || self.n_s != 1 || self.n_d != 1 {
                    return fail(
                        "DAPSK runs single-antenna per-use encoding (k = n_s = n_d = 1)".into(),
                    );
                }
                if self.mode != Mode::Sc {
                    return fail("DAPSK detection is defined for single-carrier mode".into());
                }
                if !(self.a > 1.0) {
                    return fail(format!("ring ratio must exceed 1, got {}", self.a));
                }
            }
            Scheme::Coherent => {
                let xi = self.xi.ok_or_else(|| {
                    Error::Config("coherent scheme needs a pilot fraction xi".into())
                })?;
                PilotPlan::preamble(xi, coherence, self.k)?;
            }
        }
        match (self.scheme, self.detector()) {
            (Scheme::Dpsk, Detector::Decoupled) => {}
            (Scheme::Dpsk, Detector::Ml) => {
                if self.q_b != 1 {
                    return fail("the one-bit ML detector needs q_b = 1".into());
                }
                if self.mode != Mode::Sc {
                    return fail(
                        "the one-bit ML detector needs sign labels, which OFDM demodulation destroys"
                            .into(),
                    );
                }
            }
            (Scheme::Dapsk, Detector::Ml | Detector::Id) => {
                if self.q_b != 1 {
                    return fail("one-bit DAPSK detectors need q_b = 1".into());
                }
            }
            (Scheme::Dapsk, Detector::Multibit) => {}
            (Scheme::Dapsk, Detector::Energy) => {
                if self.q_b != 2 {
                    return fail(
                        "the energy detector needs q_b = 2; one-bit labels have constant power"
                            .into(),
                    );
                }
            }
            (Scheme::Dapsk, Detector::Vql) => {
                let sizes = self
                    .vql
                    .ok_or_else(|| Error::Config("VQL detection needs vql group sizes".into()))?;
                if sizes.iter().sum::<usize>() != self.u {
                    return fail(format!(
                        "VQL group sizes {sizes:?} must sum to u = {}",
                        self.u
                    ));
                }
                if self.q_b != 1 {
                    return fail("VQL uses one-bit quantizers per group".into());
                }
            }
            (Scheme::Coherent, Detector::Coherent) => {}
            (scheme, det) => {
                return fail(format!(
                    "detector {det:?} does not apply to scheme {scheme:?}"
                ));
            }
        }
        if self.mode == Mode::Ofdm {
            let min_cp = spec.num_taps() - 1;
            if let Some(cp) = self.n_cp {
                if cp < min_cp {
                    return fail(format!(
                        "cyclic prefix {cp} is shorter than the channel memory {min_cp}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Exact error counts of one or more trials; addition is associative and
/// commutative, so parallel scheduling cannot change totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialCounts {
    pub bits: u64,
    pub bit_errors: u64,
    pub symbols: u64,
    pub symbol_errors: u64,
    pub amp_bits: u64,
    pub amp_bit_errors: u64,
}

impl TrialCounts {
    pub fn add(&mut self, other: &TrialCounts) {
        self.bits += other.bits;
        self.bit_errors += other.bit_errors;
        self.symbols += other.symbols;
        self.symbol_errors += other.symbol_errors;
        self.amp_bits += other.amp_bits;
        self.amp_bit_errors += other.amp_bit_errors;
    }
}

/// Aggregated metrics of one sweep point.
#[derive(Debug, Clone)]
pub struct MetricRecord {
    pub snr_db: f64,
    pub seed: u64,
    pub trials_run: u64,
    pub counts: TrialCounts,
    pub ber: f64,
    pub ser: f64,
    pub spectral_efficiency: f64,
    pub wall_time_s: f64,
}

/// Spectral efficiency `ξ_data·N·N_b·(1 - SER)` gated on the SER
/// threshold; the leading factor is the fraction of uses that carry data.
pub fn spectral_efficiency(ser: f64, config: &SimConfig) -> f64 {
    if !(0.0..=1.0).contains(&ser) || ser > config.ser_threshold {
        return 0.0;
    }
    let bits_per_use = match config.scheme {
        Scheme::Dpsk => config.n_s * config.bits_per_symbol() / config.n_d,
        Scheme::Dapsk => 1 + config.bits_per_symbol(),
        Scheme::Coherent => config.k * config.bits_per_symbol(),
    };
    let data_fraction = match config.scheme {
        Scheme::Dpsk | Scheme::Dapsk => (config.n - config.n_d) as f64 / config.n as f64,
        Scheme::Coherent => 1.0 - config.xi.unwrap_or(0.0),
    };
    data_fraction * config.n as f64 * bits_per_use as f64 * (1.0 - ser)
}

/// Per-antenna quantization map of the array.
enum ArrayQuantizer {
    Uniform(QuantizerSpec),
    Vql(VqlPartition),
}

impl ArrayQuantizer {
    fn quantize(&self, antenna: usize, y: Complex64) -> Complex64 {
        match self {
            ArrayQuantizer::Uniform(spec) => quantize_complex(y, spec),
            ArrayQuantizer::Vql(part) => quantize_complex(y, part.spec_of_antenna(antenna)),
        }
    }
}

/// Precomputed per-sweep-point state: calibrations, SNR bookkeeping and
/// the shared code/constellation objects.
pub struct PointContext {
    noise_var: f64,
    scale: f64,
    spec: ChannelSpec,
    constellation: PskConstellation,
    dispersion: Option<DispersionSet>,
    quantizer: ArrayQuantizer,
    bussgang: Bussgang,
    rho_dpsk: f64,
    rho_set: [f64; 3],
    rho_coherent: f64,
    rho_vql_phase: f64,
    gamma: Option<f64>,
    pilots: Option<PilotPlan>,
    cp_len: usize,
}

impl PointContext {
    pub fn build(config: &SimConfig, snr_db: f64) -> Result<Self> {
        let noise_var = 10f64.powf(-snr_db / 10.0);
        let scale = agc_scale(noise_var);
        let spec = config.channel_spec()?;
        let constellation = PskConstellation::new(config.m)?;
        let dispersion = match config.scheme {
            Scheme::Dpsk => Some(match config.n_d {
                1 => DispersionSet::scalar(),
                _ => DispersionSet::alamouti(),
            }),
            _ => None,
        };

        let mut calib_rng = RandomSource::new(config.seed, u64::MAX - 1);
        let uniform_spec = match config.q_b {
            1 => QuantizerSpec::one_bit(),
            _ => dapsk_two_bit_spec(config.a)?,
        };
        let bussgang = bussgang_calibrate(&uniform_spec, 1.0, &mut calib_rng, BUSSGANG_SAMPLES)?;
        let quantizer = match (config.detector(), config.vql) {
            (Detector::Vql, Some(sizes)) => {
                ArrayQuantizer::Vql(vql_partition(config.u, config.a, sizes)?)
            }
            _ => ArrayQuantizer::Uniform(uniform_spec),
        };

        let sigma_z_eff = scale * scale * noise_var;
        let base = bussgang.eta * bussgang.eta * sigma_z_eff + bussgang.noise_var;
        let rho_dpsk = 1.0 / (2.0 * base);
        let rho_set = dapsk_rho_set(bussgang, sigma_z_eff, config.a);
        let rho_coherent = 1.0 / base;
        let sgn_pair = bussgang_calibrate(
            &QuantizerSpec::one_bit(),
            1.0,
            &mut calib_rng,
            BUSSGANG_SAMPLES,
        )?;
        let rho_vql_phase =
            1.0 / (2.0 * (sgn_pair.eta * sgn_pair.eta * sigma_z_eff + sgn_pair.noise_var));

        let gamma = match (config.scheme, config.detector()) {
            (Scheme::Dapsk, Detector::Energy | Detector::Vql) => {
                let mut rng = RandomSource::new(config.seed, u64::MAX - 2);
                let cal = calibrate_threshold_mc_with(
                    config.u,
                    config.a,
                    noise_var,
                    |u, y| quantizer.quantize(u, y),
                    &mut rng,
                    THRESHOLD_TRIALS,
                )?;
                Some(cal.gamma)
            }
            _ => None,
        };

        let pilots = match config.scheme {
            Scheme::Coherent => Some(PilotPlan::preamble(
                config.xi.unwrap_or(0.0),
                config.coherence(),
                config.k,
            )?),
            _ => None,
        };
        let cp_len = config.n_cp.unwrap_or(spec.num_taps() - 1);

        Ok(Self {
            noise_var,
            scale,
            spec,
            constellation,
            dispersion,
            quantizer,
            bussgang,
            rho_dpsk,
            rho_set,
            rho_coherent,
            rho_vql_phase,
            gamma,
            pilots,
            cp_len,
        })
    }

    /// Analytic energy model at this operating point.
    pub fn energy_model(&self, config: &SimConfig) -> Result<EnergyModel> {
        EnergyModel::new(self.bussgang, config.a, self.noise_var, 1.0, config.u)
    }

    /// The empirically calibrated energy threshold, when the detector uses
    /// one.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }
}

/// Applies the channel segment by segment (one realization per coherence
/// interval), scales, quantizes, and returns the per-antenna label
/// sequences in the detection domain (time for SC, subcarriers for OFDM).
fn propagate_and_quantize(
    config: &SimConfig,
    ctx: &PointContext,
    x: &CMat,
    rng: &mut RandomSource,
) -> Result<Vec<Vec<Complex64>>> {
    let mut labels: Vec<Vec<Complex64>> = vec![Vec::with_capacity(config.n); config.u];
    match config.mode {
        Mode::Sc => {
            let seg = config.coherence();
            for start in (0..config.n).step_by(seg) {
                let real = ChannelRealization::generate(&ctx.spec, rng);
                let cols = CMat::new(
                    config.k,
                    seg,
                    (0..config.k)
                        .flat_map(|k| (start..start + seg).map(move |c| (k, c)))
                        .map(|(k, c)| x.get(k, c))
                        .collect(),
                );
                let y =
                    receive_frame(&ctx.spec, &real, &cols, Mode::Sc, start, ctx.noise_var, rng)?;
                for u in 0..config.u {
                    for i in 0..seg {
                        labels[u].push(ctx.quantizer.quantize(u, ctx.scale * y.get(u, i)));
                    }
                }
            }
        }
        Mode::Ofdm => {
            // One OFDM symbol per frame: prefix the tail, convolve through
            // the time-varying taps, quantize time samples, then FFT.
            let cp = ctx.cp_len;
            let mut frame = CMat::zeros(config.k, config.n + cp);
            for k in 0..config.k {
                for c in 0..cp {
                    frame.set(k, c, x.get(k, config.n - cp + c));
                }
                for c in 0..config.n {
                    frame.set(k, cp + c, x.get(k, c));
                }
            }
            let real = ChannelRealization::generate(&ctx.spec, rng);
            let y = receive_frame(&ctx.spec, &real, &frame, Mode::Ofdm, 0, ctx.noise_var, rng)?;
            for u in 0..config.u {
                let time: Vec<Complex64> = (0..config.n + cp)
                    .map(|i| ctx.quantizer.quantize(u, ctx.scale * y.get(u, i)))
                    .collect();
                labels[u] = ofdm_demodulate(&time, cp)?;
            }
        }
    }
    Ok(labels)
}

fn run_dpsk_trial(
    config: &SimConfig,
    ctx: &PointContext,
    rng: &mut RandomSource,
) -> Result<TrialCounts> {
    let disp = ctx.dispersion.as_ref().expect("dpsk context");
    let bits_per_symbol = config.bits_per_symbol();
    let n_blocks = config.n / config.n_d;
    let data_blocks = n_blocks - 1;
    let bits: Vec<u8> = (0..data_blocks * config.n_s * bits_per_symbol)
        .map(|_| rng.random_range(0..2u8))
        .collect();

    let mut blocks: Vec<Vec<Complex64>> = Vec::with_capacity(n_blocks);
    blocks.push(vec![ctx.constellation.point(0); config.n_s]);
    for b in 0..data_blocks {
        let mut symbols = Vec::with_capacity(config.n_s);
        for s in 0..config.n_s {
            let at = (b * config.n_s + s) * bits_per_symbol;
            symbols.push(
                ctx.constellation
                    .map_bits(&bits[at..at + bits_per_symbol])?,
            );
        }
        blocks.push(symbols);
    }

    let code = diff_encode(&blocks, disp)?;
    let x = to_transmit(&code, config.mode);
    let labels = propagate_and_quantize(config, ctx, &x, rng)?;
    let grouped: Vec<Vec<Vec<Complex64>>> = labels
        .iter()
        .map(|seq| group_blocks(seq, config.n_d))
        .collect::<Result<_>>()?;

    let mut counts = TrialCounts::default();
    for v in 1..n_blocks {
        let prev: Vec<Vec<Complex64>> = (0..config.u).map(|u| grouped[u][v - 1].clone()).collect();
        let curr: Vec<Vec<Complex64>> = (0..config.u).map(|u| grouped[u][v].clone()).collect();
        let pair = QuantizedBlockPair::new(prev, curr, ctx.rho_dpsk)?;
        let decided = match config.detector() {
            Detector::Ml => ml_one_bit_detect(&pair, disp, &ctx.constellation)?,
            _ => decoupled_detect(&pair, disp, &ctx.constellation)?,
        };
        for (s, decided_symbol) in decided.iter().enumerate() {
            let truth = blocks[v][s];
            counts.symbols += 1;
            if *decided_symbol != truth {
                counts.symbol_errors += 1;
            }
            let got_bits = ctx.constellation.unmap(*decided_symbol);
            let at = ((v - 1) * config.n_s + s) * bits_per_symbol;
            for (i, b) in got_bits.iter().enumerate() {
                counts.bits += 1;
                if *b != bits[at + i] {
                    counts.bit_errors += 1;
                }
            }
        }
    }
    Ok(counts)
}

fn run_dapsk_trial(
    config: &SimConfig,
    ctx: &PointContext,
    rng: &mut RandomSource,
) -> Result<TrialCounts> {
    let bits_per_use = 1 + config.bits_per_symbol();
    let uses = config.n;
    let bits: Vec<u8> = (0..(uses - 1) * bits_per_use)
        .map(|_| rng.random_range(0..2u8))
        .collect();

    let mut state = DapskState::new(config.a)?;
    let mut tx = Vec::with_capacity(uses);
    tx.push(state.reference_symbol());
    for v in 0..uses - 1 {
        let at = v * bits_per_use;
        tx.push(
            state
                .encode(&bits[at..at + bits_per_use], &ctx.constellation)?
                .x,
        );
    }
    let x = CMat::new(1, uses, tx);
    let labels = propagate_and_quantize(config, ctx, &x, rng)?;

    let mut counts = TrialCounts::default();
    let mut ring_hat = Ring::Lo; // the reference symbol sits on the inner ring
    for v in 1..uses {
        let q_prev: Vec<Complex64> = (0..config.u).map(|u| labels[u][v - 1]).collect();
        let q_curr: Vec<Complex64> = (0..config.u).map(|u| labels[u][v]).collect();
        let at = (v - 1) * bits_per_use;
        let truth = &bits[at..at + bits_per_use];
        let decided_bits: Vec<u8> = match config.detector() {
            Detector::Ml => {
                let obs = DapskObservation::new(q_prev, q_curr, ctx.rho_set)?;
                let (ratio, s) = ml_one_bit_dapsk(&obs, &ctx.constellation, config.a)?;
                recover_bits(ratio, s, &ctx.constellation)
            }
            Detector::Id => {
                let obs = DapskObservation::new(q_prev, q_curr, ctx.rho_set)?;
                match inverse_decode(&obs, &ctx.constellation, config.a) {
                    Ok((ratio, s)) => recover_bits(ratio, s, &ctx.constellation),
                    Err(Error::Detection(_)) => {
                        // Rank-deficient reference: flag a symbol error.
                        let mut flipped = truth.to_vec();
                        flipped[0] = 1 - flipped[0];
                        flipped
                    }
                    Err(e) => return Err(e),
                }
            }
            Detector::Multibit => {
                let spec = match &ctx.quantizer {
                    ArrayQuantizer::Uniform(s) => s,
                    ArrayQuantizer::Vql(_) => unreachable!("validated"),
                };
                let obs = DapskObservation::new(q_prev, q_curr, ctx.rho_set)?;
                let d = multibit_ml(&obs, spec, &ctx.constellation, config.a)?;
                recover_bits(d.ratio, d.s, &ctx.constellation)
            }
            Detector::Energy => {
                let gamma = ctx.gamma.expect("energy context");
                let (ring, amp_bit) = detect_amplitude(energy_statistic(&q_curr), gamma, ring_hat);
                ring_hat = ring;
                let obs = DapskObservation::new(q_prev, q_curr, ctx.rho_set)?;
                let s = match inverse_estimate(&obs) {
                    Ok(xr) => {
                        let xc = Complex64::new(xr[0], xr[1]);
                        ctx.constellation.point(ctx.constellation.nearest_index(xc))
                    }
                    Err(_) => ctx.constellation.point(0),
                };
                let mut b = vec![amp_bit];
                b.extend(ctx.constellation.unmap(s));
                b
            }
            Detector::Vql => {
                let part = match &ctx.quantizer {
                    ArrayQuantizer::Vql(p) => p,
                    ArrayQuantizer::Uniform(_) => unreachable!("validated"),
                };
                let gamma = ctx.gamma.expect("vql context");
                let d = vql_detect(
                    part,
                    &q_prev,
                    &q_curr,
                    gamma,
                    ring_hat,
                    ctx.rho_vql_phase,
                    &ctx.constellation,
                    PhaseRule::Ml,
                )?;
                ring_hat = d.ring;
                let mut b = vec![d.amp_bit];
                b.extend(ctx.constellation.unmap(d.s));
                b
            }
            other => {
                return Err(Error::Config(format!(
                    "detector {other:?} is not a DAPSK receiver"
                )))
            }
        };
        counts.symbols += 1;
        if decided_bits != truth {
            counts.symbol_errors += 1;
        }
        counts.amp_bits += 1;
        if decided_bits[0] != truth[0] {
            counts.amp_bit_errors += 1;
        }
        for (got, want) in decided_bits.iter().zip(truth) {
            counts.bits += 1;
            if got != want {
                counts.bit_errors += 1;
            }
        }
    }
    Ok(counts)
}

fn run_coherent_trial(
    config: &SimConfig,
    ctx: &PointContext,
    rng: &mut RandomSource,
) -> Result<TrialCounts> {
    let plan = ctx.pilots.as_ref().expect("coherent context");
    let bits_per_symbol = config.bits_per_symbol();
    let seg = config.coherence();
    let segments = config.n / seg;
    let pilots = plan.num_pilots();
    let data_uses_per_seg = seg - pilots;
    let bits: Vec<u8> = (0..segments * data_uses_per_seg * config.k * bits_per_symbol)
        .map(|_| rng.random_range(0..2u8))
        .collect();

    let amp = 1.0 / (config.k as f64).sqrt();
    let mut x = CMat::zeros(config.k, config.n);
    let mut truth: Vec<Vec<Complex64>> = Vec::with_capacity(segments * data_uses_per_seg);
    let mut bit_at = 0usize;
    for s in 0..segments {
        for p in 0..pilots {
            for k in 0..config.k {
                x.set(k, s * seg + p, plan.symbols().get(k, p));
            }
        }
        for d in 0..data_uses_per_seg {
            let mut symbols = Vec::with_capacity(config.k);
            for k in 0..config.k {
                let sym = ctx
                    .constellation
                    .map_bits(&bits[bit_at..bit_at + bits_per_symbol])?;
                bit_at += bits_per_symbol;
                x.set(k, s * seg + pilots + d, amp * sym);
                symbols.push(sym);
            }
            truth.push(symbols);
        }
    }

    let labels = propagate_and_quantize(config, ctx, &x, rng)?;
    let mut counts = TrialCounts::default();
    let mut data_idx = 0usize;
    for s in 0..segments {
        let mut q_pilots = CMat::zeros(config.u, pilots);
        for u in 0..config.u {
            for p in 0..pilots {
                q_pilots.set(u, p, labels[u][s * seg + p]);
            }
        }
        let h_est = ls_channel_estimate(&q_pilots, plan)?;
        for d in 0..data_uses_per_seg {
            let use_idx = s * seg + pilots + d;
            let q: Vec<Complex64> = (0..config.u).map(|u| labels[u][use_idx]).collect();
            let decided = match (config.mode, config.q_b) {
                (Mode::Ofdm, _) => coherent_euclidean_detect(&q, &h_est, &ctx.constellation)?,
                (Mode::Sc, 1) => {
                    coherent_ml_detect(&q, &h_est, ctx.rho_coherent, &ctx.constellation)?
                }
                (Mode::Sc, _) => {
                    let spec = match &ctx.quantizer {
                        ArrayQuantizer::Uniform(s) => s,
                        ArrayQuantizer::Vql(_) => unreachable!("validated"),
                    };
                    coherent_multibit_detect(
                        &q,
                        &h_est,
                        spec,
                        ctx.rho_coherent,
                        &ctx.constellation,
                    )?
                }
            };
            for (k, got) in decided.iter().enumerate() {
                let want = truth[data_idx][k];
                counts.symbols += 1;
                if *got != want {
                    counts.symbol_errors += 1;
                }
                let got_bits = ctx.constellation.unmap(*got);
                let want_bits = ctx.constellation.unmap(want);
                for (g, w) in got_bits.iter().zip(&want_bits) {
                    counts.bits += 1;
                    if g != w {
                        counts.bit_errors += 1;
                    }
                }
            }
            data_idx += 1;
        }
    }
    Ok(counts)
}

/// Runs one trial; the outcome is fully determined by `(config, snr point,
/// trial_index)`.
pub fn run_trial(config: &SimConfig, ctx: &PointContext, trial_index: u64) -> Result<TrialCounts> {
    let mut rng = RandomSource::new(config.seed, trial_index);
    match config.scheme {
        Scheme::Dpsk => run_dpsk_trial(config, ctx, &mut rng),
        Scheme::Dapsk => run_dapsk_trial(config, ctx, &mut rng),
        Scheme::Coherent => run_coherent_trial(config, ctx, &mut rng),
    }
}

/// Runs one sweep point: batched trials with optional early stopping once
/// the configured bit-error budget is reached.
pub fn run_point(config: &SimConfig, snr_db: f64, parallel: bool) -> Result<MetricRecord> {
    let started = Instant::now();
    let ctx = PointContext::build(config, snr_db)?;
    let mut counts = TrialCounts::default();
    let mut trials_run = 0u64;
    let mut start = 0u64;
    while start < config.trials {
        let end = (start + BATCH).min(config.trials);
        let batch: Vec<TrialCounts> = if parallel {
            (start..end)
                .into_par_iter()
                .map(|t| run_trial(config, &ctx, t))
                .collect::<Result<_>>()?
        } else {
            (start..end)
                .map(|t| run_trial(config, &ctx, t))
                .collect::<Result<_>>()?
        };
        for b in &batch {
            counts.add(b);
        }
        trials_run += end - start;
        start = end;
        if config.min_bit_errors > 0 && counts.bit_errors >= config.min_bit_errors {
            break;
        }
    }
    let ber = counts.bit_errors as f64 / counts.bits.max(1) as f64;
    let ser = counts.symbol_errors as f64 / counts.symbols.max(1) as f64;
    Ok(MetricRecord {
        snr_db,
        seed: config.seed,
        trials_run,
        counts,
        ber,
        ser,
        spectral_efficiency: spectral_efficiency(ser, config),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Runs every SNR point of the grid, ascending, and returns one record per
/// point.
pub fn sweep(config: &SimConfig, parallel: bool) -> Result<Vec<MetricRecord>> {
    config.validate()?;
    let mut grid = config.snr_grid_db.clone();
    grid.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&snr| run_point(config, snr, parallel))
        .collect()
}

/// Derived quantities of a configuration at one SNR point, as reported by
/// the `info` command.
pub struct PointInfo {
    pub snr_db: f64,
    pub noise_var: f64,
    pub agc_scale: f64,
    pub eta: f64,
    pub sigma_eps_sq: f64,
    pub rho_dpsk: f64,
    pub rho_set: [f64; 3],
    pub gamma_analytic: Option<f64>,
}

pub fn point_info(config: &SimConfig, snr_db: f64) -> Result<PointInfo> {
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let scale = agc_scale(noise_var);
    let mut calib_rng = RandomSource::new(config.seed, u64::MAX - 1);
    let uniform_spec = match config.q_b {
        1 => QuantizerSpec::one_bit(),
        _ => dapsk_two_bit_spec(config.a)?,
    };
    let pair = bussgang_calibrate(&uniform_spec, 1.0, &mut calib_rng, BUSSGANG_SAMPLES)?;
    let sigma_z_eff = scale * scale * noise_var;
    let base = pair.eta * pair.eta * sigma_z_eff + pair.noise_var;
    let gamma_analytic = if config.scheme == Scheme::Dapsk && config.q_b == 2 {
        let model = EnergyModel::new(pair, config.a, noise_var, 1.0, config.u)?;
        Some(amplitude_threshold(&model)?)
    } else {
        None
    };
    Ok(PointInfo {
        snr_db,
        noise_var,
        agc_scale: scale,
        eta: pair.eta,
        sigma_eps_sq: pair.noise_var,
        rho_dpsk: 1.0 / (2.0 * base),
        rho_set: dapsk_rho_set(pair, sigma_z_eff, config.a),
        gamma_analytic,
    })
}
