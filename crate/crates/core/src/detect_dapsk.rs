//! DAPSK receivers: the one-bit maximum likelihood detector over the joint
//! amplitude/phase candidate grid, the inverse-decoding (pseudo-inverse)
//! detector, the exact-quantization-model multi-bit ML, the energy-based
//! amplitude detector with its closed-form threshold, and the VQL
//! antenna-grouping receiver.
//!
//! The amplitude transition changes the composite noise power, so genie
//! detectors carry a three-hypothesis SNR set `{ρ(1), ρ(a), ρ(1/a)}`; the
//! likelihood of each candidate is maximized over the set before the
//! candidate argmax, mirroring how the receiver copes with not knowing the
//! transition in advance.

use crate::diffcode::{AmpRatio, PskConstellation, Ring};
use crate::quantize::{agc_scale, quantize_complex, Bussgang, QuantizerSpec, VqlPartition};
use crate::statmath::{complex_gaussian, log_std_normal_cdf, std_normal_cdf, RandomSource};
use crate::{Error, Result};
use num_complex::Complex64;

// ---------------------------------------------------------------------------
// Observations and candidate grid
// ---------------------------------------------------------------------------

/// Quantized observations of two adjacent uses across the array, plus the
/// composite SNR hypothesis for each amplitude transition, ordered as
/// `[ρ(1), ρ(a), ρ(1/a)]`.
#[derive(Debug, Clone)]
pub struct DapskObservation {
    q_prev: Vec<Complex64>,
    q_curr: Vec<Complex64>,
    rho_set: [f64; 3],
}

impl DapskObservation {
    pub fn new(q_prev: Vec<Complex64>, q_curr: Vec<Complex64>, rho_set: [f64; 3]) -> Result<Self> {
        if q_prev.len() != q_curr.len() || q_prev.is_empty() {
            return Err(Error::Shape(
                "previous and current uses must cover the same antennas".into(),
            ));
        }
        if rho_set.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Domain(format!(
                "SNR hypotheses must be positive, got {rho_set:?}"
            )));
        }
        Ok(Self {
            q_prev,
            q_curr,
            rho_set,
        })
    }

    pub fn antennas(&self) -> usize {
        self.q_prev.len()
    }

    pub fn prev(&self) -> &[Complex64] {
        &self.q_prev
    }

    pub fn curr(&self) -> &[Complex64] {
        &self.q_curr
    }

    pub fn rho_set(&self) -> [f64; 3] {
        self.rho_set
    }
}

/// Composite SNR hypotheses from the calibrated quantizer and the post-AGC
/// thermal noise: the differential noise for transition `a'` has power
/// `(1 + a'²)·(η²σ_z² + σ_ε²)`.
pub fn dapsk_rho_set(bussgang: Bussgang, sigma_z_eff_sq: f64, ring_ratio: f64) -> [f64; 3] {
    let base = bussgang.eta * bussgang.eta * sigma_z_eff_sq + bussgang.noise_var;
    let a2 = ring_ratio * ring_ratio;
    [
        1.0 / (2.0 * base),
        1.0 / ((1.0 + a2) * base),
        1.0 / ((1.0 + 1.0 / a2) * base),
    ]
}

/// The `|A|·M` joint candidates in decision order: amplitude-ratio major
/// (`1`, `a`, `1/a`), constellation index minor.
pub fn dapsk_candidates(
    constellation: &PskConstellation,
    ring_ratio: f64,
) -> Vec<(AmpRatio, Complex64, f64)> {
    let mut out = Vec::with_capacity(3 * constellation.size());
    for ratio in AmpRatio::ALL {
        for k in 0..constellation.size() {
            out.push((ratio, constellation.point(k), ratio.value(ring_ratio)));
        }
    }
    out
}

/// Unrefined real rows of one antenna: `f_1 = (ℜq, -ℑq)`, `f_2 = (ℑq, ℜq)`
/// built from the previous use.
#[inline]
fn scalar_rows(q_prev: Complex64) -> [[f64; 2]; 2] {
    [[q_prev.re, -q_prev.im], [q_prev.im, q_prev.re]]
}

#[inline]
fn dot2(row: [f64; 2], s: Complex64) -> f64 {
    row[0] * s.re + row[1] * s.im
}

// ---------------------------------------------------------------------------
// One-bit ML and inverse decoding
// ---------------------------------------------------------------------------

/// One-bit joint ML over the `3M` amplitude/phase candidates. Each
/// candidate's log likelihood `Σ log Φ(a'·√ρ·f̃ᵀ s_R)` is maximized over
/// the SNR hypothesis set first; ties resolve to the lowest candidate
/// index.
pub fn ml_one_bit_dapsk(
    obs: &DapskObservation,
    constellation: &PskConstellation,
    ring_ratio: f64,
) -> Result<(AmpRatio, Complex64)> {
    let mut best = f64::NEG_INFINITY;
    let mut pick = (AmpRatio::Unit, constellation.point(0));
    for (ratio, s, a_val) in dapsk_candidates(constellation, ring_ratio) {
        let mut cand_best = f64::NEG_INFINITY;
        for rho in obs.rho_set {
            let sqrt_rho = rho.sqrt();
            let mut metric = 0.0;
            for u in 0..obs.antennas() {
                let rows = scalar_rows(obs.q_prev[u]);
                let signs = [obs.q_curr[u].re.signum(), obs.q_curr[u].im.signum()];
                for i in 0..2 {
                    let m = a_val * dot2(rows[i], s);
                    metric += log_std_normal_cdf(signs[i] * (sqrt_rho * m))?;
                }
            }
            if metric > cand_best {
                cand_best = metric;
            }
        }
        if cand_best > best {
            best = cand_best;
            pick = (ratio, s);
        }
    }
    Ok(pick)
}

/// Least-squares inversion of the stacked `2U × 2` real system built from
/// the previous quantized use: `x̂_R = F_R^† q_R`.
pub fn inverse_estimate(obs: &DapskObservation) -> Result<[f64; 2]> {
    // F^T F accumulates to (Σ|q_prev|²)·I for rotation-structured rows, but
    // solve the general 2×2 normal equations anyway.
    let mut g = [[0.0f64; 2]; 2];
    let mut b = [0.0f64; 2];
    for u in 0..obs.antennas() {
        let rows = scalar_rows(obs.q_prev[u]);
        let q = [obs.q_curr[u].re, obs.q_curr[u].im];
        for (i, row) in rows.iter().enumerate() {
            g[0][0] += row[0] * row[0];
            g[0][1] += row[0] * row[1];
            g[1][1] += row[1] * row[1];
            b[0] += row[0] * q[i];
            b[1] += row[1] * q[i];
        }
    }
    g[1][0] = g[0][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let scale = g[0][0].max(g[1][1]);
    if !(det.abs() > 1e-12 * scale * scale) {
        return Err(Error::Detection(
            "rank-deficient reference block: inverse decoding undefined".into(),
        ));
    }
    Ok([
        (g[1][1] * b[0] - g[0][1] * b[1]) / det,
        (g[0][0] * b[1] - g[1][0] * b[0]) / det,
    ])
}

/// Inverse-decoding detector: pseudo-inverse estimate followed by the
/// nearest point of the `3M`-point amplitude/phase grid.
pub fn inverse_decode(
    obs: &DapskObservation,
    constellation: &PskConstellation,
    ring_ratio: f64,
) -> Result<(AmpRatio, Complex64)> {
    let xr = inverse_estimate(obs)?;
    let x = Complex64::new(xr[0], xr[1]);
    let mut best = f64::INFINITY;
    let mut pick = (AmpRatio::Unit, constellation.point(0));
    for (ratio, s, a_val) in dapsk_candidates(constellation, ring_ratio) {
        let d = (x - a_val * s).norm_sqr();
        if d < best {
            best = d;
            pick = (ratio, s);
        }
    }
    Ok(pick)
}

// ---------------------------------------------------------------------------
// Multi-bit exact-model ML
// ---------------------------------------------------------------------------

/// Decision of the multi-bit detector; `erasure` marks an observation whose
/// probability underflowed for every candidate.
#[derive(Debug, Clone, Copy)]
pub struct MultibitDecision {
    pub ratio: AmpRatio,
    pub s: Complex64,
    pub erasure: bool,
}

/// `log(Φ(hi) - Φ(lo))` for standardized bin edges, keeping accuracy when
/// both edges sit in the same tail.
pub(crate) fn log_gauss_bin(lo_arg: f64, hi_arg: f64) -> Result<f64> {
    debug_assert!(lo_arg < hi_arg);
    if lo_arg == f64::NEG_INFINITY {
        return log_std_normal_cdf(hi_arg);
    }
    if hi_arg == f64::INFINITY {
        return log_std_normal_cdf(-lo_arg);
    }
    let diff_of_logs = |lb: f64, la: f64| -> f64 {
        // log(e^lb - e^la) with lb > la
        if la >= lb {
            return f64::NEG_INFINITY;
        }
        lb + (-((la - lb).exp())).ln_1p()
    };
    if hi_arg <= 0.0 {
        let la = log_std_normal_cdf(lo_arg)?;
        let lb = log_std_normal_cdf(hi_arg)?;
        Ok(diff_of_logs(lb, la))
    } else if lo_arg >= 0.0 {
        let la = log_std_normal_cdf(-hi_arg)?;
        let lb = log_std_normal_cdf(-lo_arg)?;
        Ok(diff_of_logs(lb, la))
    } else {
        let p = std_normal_cdf(hi_arg)? - std_normal_cdf(lo_arg)?;
        Ok(p.ln())
    }
}

/// Exact-quantization-model ML: per dimension the probability of the
/// observed label is the CDF difference across its bin, centered on the
/// candidate mean `a'·fᵀs_R` and scaled by the hypothesis noise.
///
/// With a one-bit spec the bin difference collapses to a single `Φ` of a
/// sign-refined argument, reproducing [`ml_one_bit_dapsk`] decisions
/// exactly.
pub fn multibit_ml(
    obs: &DapskObservation,
    spec: &QuantizerSpec,
    constellation: &PskConstellation,
    ring_ratio: f64,
) -> Result<MultibitDecision> {
    let mut best = f64::NEG_INFINITY;
    let mut pick = (AmpRatio::Unit, constellation.point(0));
    let mut any_finite = false;
    for (ratio, s, a_val) in dapsk_candidates(constellation, ring_ratio) {
        let mut cand_best = f64::NEG_INFINITY;
        for rho in obs.rho_set {
            let sqrt_rho = rho.sqrt();
            let mut metric = 0.0;
            'antennas: for u in 0..obs.antennas() {
                let rows = scalar_rows(obs.q_prev[u]);
                let labels = [obs.q_curr[u].re, obs.q_curr[u].im];
                for i in 0..2 {
                    let m = a_val * dot2(rows[i], s);
                    let (lo, hi) = spec.bin_edges(spec.label_index(labels[i]));
                    let lo_arg = if lo == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        sqrt_rho * (lo - m)
                    };
                    let hi_arg = if hi == f64::INFINITY {
                        f64::INFINITY
                    } else {
                        sqrt_rho * (hi - m)
                    };
                    metric += log_gauss_bin(lo_arg, hi_arg)?;
                    if metric == f64::NEG_INFINITY {
                        break 'antennas;
                    }
                }
            }
            if metric > cand_best {
                cand_best = metric;
            }
        }
        if cand_best > best {
            best = cand_best;
            pick = (ratio, s);
        }
        if cand_best > f64::NEG_INFINITY {
            any_finite = true;
        }
    }
    Ok(MultibitDecision {
        ratio: pick.0,
        s: pick.1,
        erasure: !any_finite,
    })
}

// ---------------------------------------------------------------------------
// Energy detection
// ---------------------------------------------------------------------------

/// Array-average power of the quantized use: `Λ = (1/U)·Σ_u |q_u|²`.
pub fn energy_statistic(q_curr: &[Complex64]) -> f64 {
    if q_curr.is_empty() {
        return 0.0;
    }
    q_curr.iter().map(|q| q.norm_sqr()).sum::<f64>() / q_curr.len() as f64
}

/// Gaussian model of the energy statistic under one ring hypothesis.
#[derive(Debug, Clone, Copy)]
pub struct RingEnergy {
    /// Mean of `Λ`: `x̃²η²α² + σ̃_ε²` (the channel term carries the AGC
    /// scale).
    pub mean: f64,
    /// Variance of `Λ`: `(2σ̃_ε²/U)·(2σ̃_ε² + 2x̃²η²α²)`.
    pub var: f64,
}

/// Channel-hardened Gaussian model of the energy statistic for both rings,
/// built from a single Bussgang pair calibrated at the array's average
/// input power (the quantizer gain is treated as constant over the whole
/// transmission).
#[derive(Debug, Clone)]
pub struct EnergyModel {
    pub antennas: usize,
    pub alpha_sq: f64,
    pub psi: [f64; 2],
    /// Bussgang pair at unit post-AGC input power.
    pub bussgang: Bussgang,
    /// Composite noise power `σ̃_ε² = η²σ_z² + σ_ε²` (post-AGC).
    pub comp_noise: f64,
    pub ring: [RingEnergy; 2],
}

impl EnergyModel {
    pub fn new(
        bussgang: Bussgang,
        ring_ratio: f64,
        noise_var: f64,
        alpha_sq: f64,
        antennas: usize,
    ) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::Config(
                "energy model needs at least one antenna".into(),
            ));
        }
        if !(ring_ratio > 1.0) {
            return Err(Error::Domain(format!(
                "ring ratio must exceed 1, got {ring_ratio}"
            )));
        }
        let psi0 = (2.0 / (ring_ratio * ring_ratio + 1.0)).sqrt();
        let psi = [psi0, ring_ratio * psi0];
        let scale_sq = agc_scale(noise_var).powi(2);
        let eta_sq = bussgang.eta * bussgang.eta;
        let comp_noise = eta_sq * scale_sq * noise_var + bussgang.noise_var;
        let u = antennas as f64;
        let ring = psi.map(|amp| {
            let signal = amp * amp * eta_sq * scale_sq * alpha_sq;
            RingEnergy {
                mean: signal + comp_noise,
                var: (2.0 * comp_noise / u) * (2.0 * comp_noise + 2.0 * signal),
            }
        });
        Ok(Self {
            antennas,
            alpha_sq,
            psi,
            bussgang,
            comp_noise,
            ring,
        })
    }

    /// Calibrates the Bussgang pair at unit post-AGC power and builds the
    /// model.
    pub fn from_quantizer(
        spec: &QuantizerSpec,
        ring_ratio: f64,
        noise_var: f64,
        alpha_sq: f64,
        antennas: usize,
        rng: &mut RandomSource,
        n_samples: usize,
    ) -> Result<Self> {
        let pair = crate::quantize::bussgang_calibrate(spec, 1.0, rng, n_samples)?;
        Self::new(pair, ring_ratio, noise_var, alpha_sq, antennas)
    }

    /// Model with explicitly supplied moments.
    pub fn from_moments(psi: [f64; 2], means: [f64; 2], vars: [f64; 2], antennas: usize) -> Self {
        Self {
            antennas,
            alpha_sq: 1.0,
            psi,
            bussgang: Bussgang {
                eta: f64::NAN,
                noise_var: f64::NAN,
            },
            comp_noise: f64::NAN,
            ring: [
                RingEnergy {
                    mean: means[0],
                    var: vars[0],
                },
                RingEnergy {
                    mean: means[1],
                    var: vars[1],
                },
            ],
        }
    }
}

fn gaussian_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean) * (x - mean) / var + var.ln())
}

/// Decision threshold between the two ring hypotheses: the root of the
/// Gaussian pdf-equality quadratic that lies between the two means, with a
/// deterministic bisection fallback on the log-pdf difference.
pub fn amplitude_threshold(model: &EnergyModel) -> Result<f64> {
    let (m0, v0) = (model.ring[0].mean, model.ring[0].var);
    let (m1, v1) = (model.ring[1].mean, model.ring[1].var);
    if !(m0 < m1) {
        return Err(Error::Domain(format!(
            "ring means must be ordered, got {m0} and {m1}"
        )));
    }
    if !(v0 > 0.0) || !(v1 > 0.0) {
        return Err(Error::Domain("ring variances must be positive".into()));
    }
    let a = 1.0 / v1 - 1.0 / v0;
    let b = -2.0 * (m1 / v1 - m0 / v0);
    let c = m1 * m1 / v1 - m0 * m0 / v0 + (v1 / v0).ln();
    if a.abs() < 1e-14 * (1.0 / v0) {
        // Equal variances: the pdfs cross midway.
        return Ok(0.5 * (m0 + m1));
    }
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        for root in [(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)] {
            if root > m0 && root < m1 {
                return Ok(root);
            }
        }
    }
    // Bisection on the log-pdf difference across (m0, m1).
    let f = |x: f64| gaussian_log_pdf(x, m1, v1) - gaussian_log_pdf(x, m0, v0);
    let (mut lo, mut hi) = (m0, m1);
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Ok(0.5 * (m0 + m1));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Result of an empirical threshold calibration.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdCalibration {
    pub gamma: f64,
    /// Fraction of calibration samples misclassified at `gamma`.
    pub error_rate: f64,
    /// False when the two histograms were inseparable and `gamma` fell
    /// back to the midpoint of the sample means.
    pub separated: bool,
}

/// Empirical threshold: simulates the array energy statistic under both
/// ring hypotheses and picks the boundary minimizing misclassification.
/// `quantizer = None` runs the unquantized receiver.
pub fn calibrate_threshold_mc(
    antennas: usize,
    ring_ratio: f64,
    noise_var: f64,
    quantizer: Option<&QuantizerSpec>,
    rng: &mut RandomSource,
    trials: usize,
) -> Result<ThresholdCalibration> {
    calibrate_threshold_mc_with(
        antennas,
        ring_ratio,
        noise_var,
        |_, y| match quantizer {
            Some(spec) => quantize_complex(y, spec),
            None => y,
        },
        rng,
        trials,
    )
}

/// [`calibrate_threshold_mc`] with an arbitrary per-antenna quantization
/// map, which is how VQL antenna groups are calibrated.
pub fn calibrate_threshold_mc_with(
    antennas: usize,
    ring_ratio: f64,
    noise_var: f64,
    quantize: impl Fn(usize, Complex64) -> Complex64,
    rng: &mut RandomSource,
    trials: usize,
) -> Result<ThresholdCalibration> {
    if trials < 2 {
        return Err(Error::Config(
            "threshold calibration needs trials >= 2".into(),
        ));
    }
    let psi0 = (2.0 / (ring_ratio * ring_ratio + 1.0)).sqrt();
    let scale = agc_scale(noise_var);
    let mut samples = [Vec::with_capacity(trials), Vec::with_capacity(trials)];
    for (idx, amp) in [psi0, ring_ratio * psi0].into_iter().enumerate() {
        for _ in 0..trials {
            let x = Complex64::from_polar(amp, rng.uniform_angle());
            let mut acc = 0.0;
            for u in 0..antennas {
                let h = rng.standard_complex();
                let z = if noise_var > 0.0 {
                    complex_gaussian(rng, noise_var)?
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let y = scale * (h * x + z);
                acc += quantize(u, y).norm_sqr();
            }
            samples[idx].push(acc / antennas as f64);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, m1) = (mean(&samples[0]), mean(&samples[1]));
    samples[0].sort_by(f64::total_cmp);
    samples[1].sort_by(f64::total_cmp);

    // Candidate boundaries: midpoints between adjacent distinct values of
    // the merged sample set.
    let mut merged: Vec<f64> = samples[0].iter().chain(&samples[1]).copied().collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup();
    let count_ge = |v: &[f64], x: f64| v.len() - v.partition_point(|&s| s < x);
    let count_lt = |v: &[f64], x: f64| v.partition_point(|&s| s < x);
    let mut best_err = usize::MAX;
    let mut best_gamma = 0.5 * (m0 + m1);
    for w in merged.windows(2) {
        let gamma = 0.5 * (w[0] + w[1]);
        let err = count_ge(&samples[0], gamma) + count_lt(&samples[1], gamma);
        if err < best_err {
            best_err = err;
            best_gamma = gamma;
        }
    }
    let error_rate = best_err as f64 / (2 * trials) as f64;
    if error_rate >= 0.45 {
        return Ok(ThresholdCalibration {
            gamma: 0.5 * (m0 + m1),
            error_rate,
            separated: false,
        });
    }
    Ok(ThresholdCalibration {
        gamma: best_gamma,
        error_rate,
        separated: true,
    })
}

/// Energy decision: inner ring below the threshold, outer ring at or above
/// it; the amplitude bit flags a ring change relative to the previous
/// decision.
pub fn detect_amplitude(lambda: f64, gamma: f64, prev_ring: Ring) -> (Ring, u8) {
    let ring = if lambda < gamma { Ring::Lo } else { Ring::Hi };
    let bit = u8::from(ring != prev_ring);
    (ring, bit)
}

// ---------------------------------------------------------------------------
// VQL detection
// ---------------------------------------------------------------------------

/// Phase rule used alongside the energy/VQL amplitude decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRule {
    Ml,
    Id,
}

/// One decoded VQL use.
#[derive(Debug, Clone, Copy)]
pub struct VqlDecision {
    pub ring: Ring,
    pub amp_bit: u8,
    pub s: Complex64,
}

/// VQL receiver: the energy statistic runs over all antennas with their
/// group quantizers; the phase decision fixes `a' = 1` and uses only the
/// sign group.
pub fn vql_detect(
    partition: &VqlPartition,
    q_prev: &[Complex64],
    q_curr: &[Complex64],
    gamma: f64,
    prev_ring: Ring,
    rho_unit: f64,
    constellation: &PskConstellation,
    rule: PhaseRule,
) -> Result<VqlDecision> {
    if q_prev.len() != partition.total_antennas() || q_curr.len() != q_prev.len() {
        return Err(Error::Shape(format!(
            "expected {} antennas, got {}",
            partition.total_antennas(),
            q_prev.len()
        )));
    }
    let sgn = partition.antennas_in_group(partition.sgn_group());
    if sgn.is_empty() {
        return Err(Error::Config(
            "VQL phase detection needs a non-empty sign group".into(),
        ));
    }
    let (ring, amp_bit) = detect_amplitude(energy_statistic(q_curr), gamma, prev_ring);

    let s = match rule {
        PhaseRule::Ml => {
            let sqrt_rho = rho_unit.sqrt();
            let mut best = f64::NEG_INFINITY;
            let mut pick = constellation.point(0);
            for k in 0..constellation.size() {
                let cand = constellation.point(k);
                let mut metric = 0.0;
                for u in sgn.clone() {
                    let rows = scalar_rows(q_prev[u]);
                    let signs = [q_curr[u].re.signum(), q_curr[u].im.signum()];
                    for i in 0..2 {
                        metric += log_std_normal_cdf(signs[i] * (sqrt_rho * dot2(rows[i], cand)))?;
                    }
                }
                if metric > best {
                    best = metric;
                    pick = cand;
                }
            }
            pick
        }
        PhaseRule::Id => {
            let obs = DapskObservation::new(
                sgn.clone().map(|u| q_prev[u]).collect(),
                sgn.clone().map(|u| q_curr[u]).collect(),
                [rho_unit; 3],
            )?;
            let xr = inverse_estimate(&obs)?;
            constellation.point(constellation.nearest_index(Complex64::new(xr[0], xr[1])))
        }
    };
    Ok(VqlDecision { ring, amp_bit, s })
}

/// Bit recovery: the amplitude bit flags a non-unit ratio, the remaining
/// bits come from the inverse phase map.
pub fn recover_bits(ratio: AmpRatio, s: Complex64, constellation: &PskConstellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(1 + constellation.bits_per_symbol());
    bits.push(u8::from(ratio != AmpRatio::Unit));
    bits.extend(constellation.unmap(s));
    bits
}
