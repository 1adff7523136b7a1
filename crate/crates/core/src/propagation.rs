//! Frequency-selective, time-varying MIMO channel generation, transmit
//! framing (single-carrier and OFDM with cyclic prefix), reception with
//! additive noise, and block grouping.
//!
//! Tap powers follow an exponential delay profile normalized to unit total
//! power; the per-tap channel is `sqrt(p[l])·g·e^{j2πν_l n/N}` so that
//! `E|h|² = p[l]` and the SNR definition `ρ = 1/σ_z²` stays meaningful.
//! Single-carrier reception multiplies each use by its per-use flat
//! subchannel; OFDM reception convolves the time-varying taps sample by
//! sample, so inter-carrier interference from Doppler is present in the
//! simulation even though the detectors ignore it.

use crate::diffcode::Mode;
use crate::linalg::{unitary_fft, unitary_ifft, CMat};
use crate::statmath::{complex_gaussian, RandomSource};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Static description of the propagation environment and array geometry.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    /// Sample period `Ts` in seconds.
    pub sample_period: f64,
    /// RMS delay spread in seconds.
    pub tau_rms: f64,
    /// Per-tap power fractions, summing to one.
    pub pdp: Vec<f64>,
    /// Maximum Doppler spread in hertz; per-tap Doppler is `f_d·cos θ_l`.
    pub doppler_hz: f64,
    /// Transmit antennas `K`.
    pub num_tx: usize,
    /// Receive antennas `U`.
    pub num_rx: usize,
    /// Channel uses (or subcarriers) per frame `N`.
    pub num_uses: usize,
}

impl ChannelSpec {
    pub fn new(
        sample_period: f64,
        tau_rms: f64,
        doppler_hz: f64,
        num_tx: usize,
        num_rx: usize,
        num_uses: usize,
    ) -> Result<Self> {
        let pdp = exp_pdp(sample_period, tau_rms)?;
        if num_tx == 0 || num_rx == 0 || num_uses == 0 {
            return Err(Error::Config(
                "antenna and use counts must be positive".into(),
            ));
        }
        Ok(Self {
            sample_period,
            tau_rms,
            pdp,
            doppler_hz,
            num_tx,
            num_rx,
            num_uses,
        })
    }

    pub fn num_taps(&self) -> usize {
        self.pdp.len()
    }

    /// Per-tap Doppler converted to cycles per frame of `N` uses.
    fn doppler_cycles_per_frame(&self, tap_doppler_hz: f64) -> f64 {
        tap_doppler_hz * self.sample_period * self.num_uses as f64
    }
}

/// Exponential power delay profile truncated at `L = round(10·τ/Ts) + 1`
/// taps and renormalized; `τ = 0` collapses to a single flat tap.
pub fn exp_pdp(sample_period: f64, tau_rms: f64) -> Result<Vec<f64>> {
    if !(sample_period > 0.0) {
        return Err(Error::Domain(format!(
            "sample period must be positive, got {sample_period}"
        )));
    }
    if tau_rms < 0.0 {
        return Err(Error::Domain(format!(
            "delay spread must be non-negative, got {tau_rms}"
        )));
    }
    if tau_rms == 0.0 {
        return Ok(vec![1.0]);
    }
    let taps = (10.0 * tau_rms / sample_period).round() as usize + 1;
    let mut pdp: Vec<f64> = (0..taps)
        .map(|l| (-(l as f64) * sample_period / tau_rms).exp())
        .collect();
    let total: f64 = pdp.iter().sum();
    for p in pdp.iter_mut() {
        *p /= total;
    }
    Ok(pdp)
}

/// One draw of the fading process: unit-variance complex tap gains plus the
/// per-tap Doppler shift and angle of arrival.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    num_tx: usize,
    num_rx: usize,
    num_taps: usize,
    /// `g[u][k][l]`, flattened row-major.
    gains: Vec<Complex64>,
    tap_doppler_hz: Vec<f64>,
    tap_aoa: Vec<f64>,
}

impl ChannelRealization {
    pub fn generate(spec: &ChannelSpec, rng: &mut RandomSource) -> Self {
        let taps = spec.num_taps();
        let mut tap_aoa = Vec::with_capacity(taps);
        let mut tap_doppler_hz = Vec::with_capacity(taps);
        for _ in 0..taps {
            let theta = rng.uniform_angle();
            tap_aoa.push(theta);
            tap_doppler_hz.push(spec.doppler_hz * theta.cos());
        }
        let gains = (0..spec.num_rx * spec.num_tx * taps)
            .map(|_| rng.standard_complex())
            .collect();
        Self {
            num_tx: spec.num_tx,
            num_rx: spec.num_rx,
            num_taps: taps,
            gains,
            tap_doppler_hz,
            tap_aoa,
        }
    }

    #[inline]
    pub fn gain(&self, u: usize, k: usize, l: usize) -> Complex64 {
        debug_assert!(u < self.num_rx && k < self.num_tx && l < self.num_taps);
        self.gains[(u * self.num_tx + k) * self.num_taps + l]
    }

    pub fn tap_doppler_hz(&self) -> &[f64] {
        &self.tap_doppler_hz
    }

    pub fn tap_aoa(&self) -> &[f64] {
        &self.tap_aoa
    }
}

/// Time-domain taps at use `n`: `h[u][k][l] = sqrt(p[l])·g·e^{j2πν_l n/N}`,
/// flattened as `(u, k, l)`.
pub fn channel_at_use(
    spec: &ChannelSpec,
    real: &ChannelRealization,
    n: usize,
) -> Result<Vec<Complex64>> {
    if n >= spec.num_uses {
        return Err(Error::Index(format!(
            "use index {n} out of range (N = {})",
            spec.num_uses
        )));
    }
    let taps = spec.num_taps();
    let phase_of = |l: usize| {
        let cycles = spec.doppler_cycles_per_frame(real.tap_doppler_hz[l]);
        Complex64::from_polar(1.0, 2.0 * PI * cycles * n as f64 / spec.num_uses as f64)
    };
    let rot: Vec<Complex64> = (0..taps).map(phase_of).collect();
    let mut out = Vec::with_capacity(spec.num_rx * spec.num_tx * taps);
    for u in 0..spec.num_rx {
        for k in 0..spec.num_tx {
            for l in 0..taps {
                out.push(spec.pdp[l].sqrt() * real.gain(u, k, l) * rot[l]);
            }
        }
    }
    Ok(out)
}

/// Flat subchannel at use (or subcarrier) `v`:
/// `h[u][k] = Σ_l sqrt(p[l])·g·e^{-j2πlv/N}`, flattened as `(u, k)`.
pub fn freq_response(
    spec: &ChannelSpec,
    real: &ChannelRealization,
    v: usize,
) -> Result<Vec<Complex64>> {
    if v >= spec.num_uses {
        return Err(Error::Index(format!(
            "subcarrier index {v} out of range (N = {})",
            spec.num_uses
        )));
    }
    let taps = spec.num_taps();
    let twiddle: Vec<Complex64> = (0..taps)
        .map(|l| {
            Complex64::from_polar(
                spec.pdp[l].sqrt(),
                -2.0 * PI * (l * v) as f64 / spec.num_uses as f64,
            )
        })
        .collect();
    let mut out = Vec::with_capacity(spec.num_rx * spec.num_tx);
    for u in 0..spec.num_rx {
        for k in 0..spec.num_tx {
            let h: Complex64 = (0..taps).map(|l| twiddle[l] * real.gain(u, k, l)).sum();
            out.push(h);
        }
    }
    Ok(out)
}

/// Unitary inverse DFT of one antenna's subcarrier symbols with a cyclic
/// prefix attached in front. Errors when the prefix is shorter than the
/// channel memory, since trailing ISI would then leak between symbols.
pub fn ofdm_modulate(
    freq_symbols: &[Complex64],
    cp_len: usize,
    num_taps: usize,
) -> Result<Vec<Complex64>> {
    if cp_len + 1 < num_taps {
        return Err(Error::Config(format!(
            "cyclic prefix {cp_len} shorter than channel memory {} would leak ISI",
            num_taps - 1
        )));
    }
    let n = freq_symbols.len();
    let mut core = freq_symbols.to_vec();
    unitary_ifft(&mut core);
    let mut out = Vec::with_capacity(n + cp_len);
    out.extend_from_slice(&core[n - cp_len..]);
    out.extend_from_slice(&core);
    Ok(out)
}

/// Drops the cyclic prefix and returns the unitary DFT of the core samples.
pub fn ofdm_demodulate(time_samples: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    if time_samples.len() <= cp_len {
        return Err(Error::Shape(format!(
            "frame of {} samples cannot hold a {cp_len}-sample prefix",
            time_samples.len()
        )));
    }
    let mut core = time_samples[cp_len..].to_vec();
    unitary_fft(&mut core);
    Ok(core)
}

/// Applies the channel to a transmit segment and adds receiver noise.
///
/// Single carrier: `y_u[i] = Σ_k h_{u,k}[start+i]·x_k[i] + z`, with the
/// per-use flat subchannel from [`freq_response`]. OFDM: tap convolution
/// with per-sample Doppler rotation over the whole segment (cyclic prefix
/// included), so the linear frequency-domain model only holds exactly at
/// zero Doppler.
pub fn receive_frame(
    spec: &ChannelSpec,
    real: &ChannelRealization,
    x: &CMat,
    mode: Mode,
    start_use: usize,
    noise_var: f64,
    rng: &mut RandomSource,
) -> Result<CMat> {
    if x.rows != spec.num_tx {
        return Err(Error::Shape(format!(
            "transmit matrix has {} rows, spec says K = {}",
            x.rows, spec.num_tx
        )));
    }
    if noise_var < 0.0 {
        return Err(Error::Domain(format!(
            "noise variance must be non-negative, got {noise_var}"
        )));
    }
    let len = x.cols;
    let mut y = CMat::zeros(spec.num_rx, len);
    match mode {
        Mode::Sc => {
            for i in 0..len {
                let h = freq_response(spec, real, start_use + i)?;
                for u in 0..spec.num_rx {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..spec.num_tx {
                        acc += h[u * spec.num_tx + k] * x.get(k, i);
                    }
                    y.set(u, i, acc);
                }
            }
        }
        Mode::Ofdm => {
            let taps = spec.num_taps();
            for i in 0..len {
                // Doppler phase advances with the absolute sample clock.
                let rot: Vec<Complex64> = (0..taps)
                    .map(|l| {
                        let cycles = spec.doppler_cycles_per_frame(real.tap_doppler_hz[l]);
                        Complex64::from_polar(
                            1.0,
                            2.0 * PI * cycles * (start_use + i) as f64 / spec.num_uses as f64,
                        )
                    })
                    .collect();
                for u in 0..spec.num_rx {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in 0..taps.min(i + 1) {
                        let amp = spec.pdp[l].sqrt();
                        for k in 0..spec.num_tx {
                            acc += amp * real.gain(u, k, l) * rot[l] * x.get(k, i - l);
                        }
                    }
                    y.set(u, i, acc);
                }
            }
        }
    }
    if noise_var > 0.0 {
        for u in 0..spec.num_rx {
            for i in 0..len {
                let z = complex_gaussian(rng, noise_var)?;
                y.set(u, i, y.get(u, i) + z);
            }
        }
    }
    Ok(y)
}

/// Splits one antenna's received sequence into `N/N_d` blocks of `N_d`
/// adjacent uses.
pub fn group_blocks(seq: &[Complex64], block_len: usize) -> Result<Vec<Vec<Complex64>>> {
    if block_len == 0 || seq.len() % block_len != 0 {
        return Err(Error::Config(format!(
            "sequence of {} uses does not divide into blocks of {block_len}",
            seq.len()
        )));
    }
    Ok(seq.chunks(block_len).map(|c| c.to_vec()).collect())
}
