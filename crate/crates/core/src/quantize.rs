//! Per-dimension scalar quantization, Bussgang gain/noise calibration, the
//! two-bit threshold set used for DAPSK amplitude detection, and the
//! variable-quantization-level (VQL) antenna grouping.
//!
//! Real and imaginary parts are quantized independently by identical
//! quantizers. Labels for multi-bit quantizers are the per-bin centroids of
//! a Gaussian prior at the calibrated input power; fixed thresholds are
//! meaningful because received samples are scaled to unit average power
//! before quantization (see [`agc_scale`]).

use crate::statmath::{std_normal_cdf, RandomSource};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Bussgang decomposition of a quantizer: `q = η·x + ε` with `ε`
/// uncorrelated with the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bussgang {
    /// Linear gain `η`.
    pub eta: f64,
    /// Distortion power `σ_ε²` per complex sample.
    pub noise_var: f64,
}

/// A scalar quantizer applied independently to each real dimension:
/// strictly increasing bin boundaries flanked by `±∞` and one output label
/// per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    bits: u32,
    boundaries: Vec<f64>,
    labels: Vec<f64>,
    bussgang: Option<Bussgang>,
}

impl QuantizerSpec {
    pub fn new(bits: u32, boundaries: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let levels = 1usize << bits;
        if labels.len() != levels {
            return Err(Error::Domain(format!(
                "{bits}-bit quantizer needs {levels} labels, got {}",
                labels.len()
            )));
        }
        if boundaries.len() != levels + 1 {
            return Err(Error::Domain(format!(
                "{bits}-bit quantizer needs {} boundaries, got {}",
                levels + 1,
                boundaries.len()
            )));
        }
        if boundaries[0] != f64::NEG_INFINITY || *boundaries.last().unwrap() != f64::INFINITY {
            return Err(Error::Domain(
                "boundary list must start at -inf and end at +inf".into(),
            ));
        }
        if !boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain(
                "boundaries must be strictly increasing".into(),
            ));
        }
        if !labels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain("labels must be strictly increasing".into()));
        }
        Ok(Self {
            bits,
            boundaries,
            labels,
            bussgang: None,
        })
    }

    /// Sign quantizer: one bit per real dimension, labels `±1`.
    pub fn one_bit() -> Self {
        Self::new(
            1,
            vec![f64::NEG_INFINITY, 0.0, f64::INFINITY],
            vec![-1.0, 1.0],
        )
        .expect("static spec")
    }

    /// One-bit quantizer with an offset threshold and explicit output pair.
    pub fn one_bit_offset(threshold: f64, low: f64, high: f64) -> Result<Self> {
        Self::new(
            1,
            vec![f64::NEG_INFINITY, threshold, f64::INFINITY],
            vec![low, high],
        )
    }

    /// Uniform mid-rise quantizer covering `[-limit, limit]`; handy as a
    /// near-transparent reference at high bit counts.
    pub fn uniform(bits: u32, limit: f64) -> Result<Self> {
        let levels = 1usize << bits;
        let step = 2.0 * limit / levels as f64;
        let mut boundaries = Vec::with_capacity(levels + 1);
        boundaries.push(f64::NEG_INFINITY);
        for i in 1..levels {
            boundaries.push(-limit + step * i as f64);
        }
        boundaries.push(f64::INFINITY);
        let labels = (0..levels)
            .map(|i| -limit + step * (i as f64 + 0.5))
            .collect();
        Self::new(bits, boundaries, labels)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn bussgang(&self) -> Option<Bussgang> {
        self.bussgang
    }

    /// Bin edges `(ζ_l, ζ_{l+1})` of label `l`.
    pub fn bin_edges(&self, l: usize) -> (f64, f64) {
        (self.boundaries[l], self.boundaries[l + 1])
    }

    /// Index of the bin containing `x`; boundary hits resolve upward.
    pub fn bin_index(&self, x: f64) -> usize {
        let mut l = 0;
        while l + 1 < self.labels.len() && x >= self.boundaries[l + 1] {
            l += 1;
        }
        l
    }

    pub fn quantize_real(&self, x: f64) -> f64 {
        self.labels[self.bin_index(x)]
    }

    /// Recovers the bin index of an emitted label value.
    pub fn label_index(&self, value: f64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, l) in self.labels.iter().enumerate() {
            let d = (l - value).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Estimates the Bussgang pair over complex Gaussian input of power
    /// `input_var` and attaches it to the spec.
    pub fn calibrated(
        mut self,
        input_var: f64,
        rng: &mut RandomSource,
        n_samples: usize,
    ) -> Result<Self> {
        let pair = bussgang_calibrate(&self, input_var, rng, n_samples)?;
        self.bussgang = Some(pair);
        Ok(self)
    }
}

/// Quantizes a complex sample one real dimension at a time.
pub fn quantize_complex(s: Complex64, spec: &QuantizerSpec) -> Complex64 {
    Complex64::new(spec.quantize_real(s.re), spec.quantize_real(s.im))
}

/// One-bit fast path: `sgn(ℜs) + j·sgn(ℑs)` with the `≥ 0 → +1` rule.
pub fn one_bit(s: Complex64) -> Complex64 {
    let sgn = |x: f64| if x >= 0.0 { 1.0 } else { -1.0 };
    Complex64::new(sgn(s.re), sgn(s.im))
}

/// Receiver gain normalization: received samples carry unit signal power
/// plus noise, so dividing by `sqrt(1 + σ_z²)` presents unit average power
/// to the quantizer and keeps fixed thresholds meaningful.
pub fn agc_scale(noise_var: f64) -> f64 {
    1.0 / (1.0 + noise_var).sqrt()
}

/// Monte-Carlo estimate of the Bussgang pair `(η, σ_ε²)` for complex
/// Gaussian input of power `input_var`: `η = E[x*q]/E[|x|²]` and
/// `σ_ε² = E[|q - ηx|²]`.
pub fn bussgang_calibrate(
    spec: &QuantizerSpec,
    input_var: f64,
    rng: &mut RandomSource,
    n_samples: usize,
) -> Result<Bussgang> {
    if !(input_var > 0.0) {
        return Err(Error::Domain(format!(
            "calibration input variance must be positive, got {input_var}"
        )));
    }
    if spec.labels.len() < 2 {
        return Err(Error::Calibration("quantizer emits a single label".into()));
    }
    let n = n_samples.max(1);
    let mut xs = Vec::with_capacity(n);
    let mut qs = Vec::with_capacity(n);
    let mut cross = 0.0;
    let mut in_power = 0.0;
    for _ in 0..n {
        let x = rng.standard_complex() * input_var.sqrt();
        let q = quantize_complex(x, spec);
        cross += (x.conj() * q).re;
        in_power += x.norm_sqr();
        xs.push(x);
        qs.push(q);
    }
    let eta = cross / in_power;
    let noise_var = xs
        .iter()
        .zip(&qs)
        .map(|(x, q)| (q - eta * x).norm_sqr())
        .sum::<f64>()
        / n as f64;
    Ok(Bussgang { eta, noise_var })
}

/// Two bits per real dimension with the ring-ratio-dependent thresholds
/// `{-ζ4, 0, ζ4}`, `ζ4 = cos(π/4)·sqrt(2a²/(a²+1))`. Output labels are the
/// bin centroids under a unit-power complex Gaussian prior.
pub fn dapsk_two_bit_spec(ring_ratio: f64) -> Result<QuantizerSpec> {
    if !(ring_ratio > 1.0) {
        return Err(Error::Domain(format!(
            "ring ratio must exceed 1, got {ring_ratio}"
        )));
    }
    let a2 = ring_ratio * ring_ratio;
    let zeta4 = (PI / 4.0).cos() * (2.0 * a2 / (a2 + 1.0)).sqrt();
    let boundaries = vec![f64::NEG_INFINITY, -zeta4, 0.0, zeta4, f64::INFINITY];
    let sigma = FRAC_1_SQRT_2; // per-dimension std at unit complex power
    let inner = gaussian_bin_centroid(0.0, zeta4, sigma);
    let outer = gaussian_bin_centroid(zeta4, f64::INFINITY, sigma);
    QuantizerSpec::new(2, boundaries, vec![-outer, -inner, inner, outer])
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Mean of a `N(0, σ²)` variable conditioned on `lo ≤ X < hi`.
fn gaussian_bin_centroid(lo: f64, hi: f64, sigma: f64) -> f64 {
    let (zl, zh) = (lo / sigma, hi / sigma);
    let (pl, ph) = (
        if zl.is_finite() { normal_pdf(zl) } else { 0.0 },
        if zh.is_finite() { normal_pdf(zh) } else { 0.0 },
    );
    let (cl, ch) = (
        if zl == f64::NEG_INFINITY {
            0.0
        } else {
            std_normal_cdf(zl).expect("finite")
        },
        if zh == f64::INFINITY {
            1.0
        } else {
            std_normal_cdf(zh).expect("finite")
        },
    );
    sigma * (pl - ph) / (ch - cl)
}

/// Three antenna groups with staggered one-bit thresholds. The middle group
/// is the plain sign quantizer used for phase detection; the offset groups
/// emit asymmetric levels so the array-average power carries amplitude
/// information.
#[derive(Debug, Clone)]
pub struct VqlPartition {
    sizes: [usize; 3],
    specs: [QuantizerSpec; 3],
    sgn_group: usize,
}

impl VqlPartition {
    pub fn sizes(&self) -> [usize; 3] {
        self.sizes
    }

    pub fn total_antennas(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn sgn_group(&self) -> usize {
        self.sgn_group
    }

    pub fn group_of(&self, antenna: usize) -> usize {
        if antenna < self.sizes[0] {
            0
        } else if antenna < self.sizes[0] + self.sizes[1] {
            1
        } else {
            2
        }
    }

    pub fn spec_of_group(&self, group: usize) -> &QuantizerSpec {
        &self.specs[group]
    }

    pub fn spec_of_antenna(&self, antenna: usize) -> &QuantizerSpec {
        &self.specs[self.group_of(antenna)]
    }

    pub fn antennas_in_group(&self, group: usize) -> std::ops::Range<usize> {
        let start: usize = self.sizes[..group].iter().sum();
        start..start + self.sizes[group]
    }

    /// True when every group reduces to the plain sign quantizer, which
    /// makes the array energy statistic constant and amplitude detection
    /// impossible.
    pub fn is_amplitude_degenerate(&self) -> bool {
        self.specs
            .iter()
            .all(|s| s.boundaries()[1] == 0.0 && s.labels() == [-1.0, 1.0])
    }

    pub fn calibrate(
        mut self,
        input_var: f64,
        rng: &mut RandomSource,
        n_samples: usize,
    ) -> Result<Self> {
        for spec in self.specs.iter_mut() {
            *spec = spec.clone().calibrated(input_var, rng, n_samples)?;
        }
        Ok(self)
    }
}

/// Builds the three-group VQL partition: thresholds `{ζ2, 0, ζ4}` from the
/// two-bit DAPSK set, the zero-threshold group acting as the sign group.
pub fn vql_partition(total: usize, ring_ratio: f64, sizes: [usize; 3]) -> Result<VqlPartition> {
    if sizes.iter().sum::<usize>() != total {
        return Err(Error::Config(format!(
            "VQL group sizes {sizes:?} must sum to the antenna count {total}"
        )));
    }
    let two_bit = dapsk_two_bit_spec(ring_ratio)?;
    let zeta4 = two_bit.boundaries()[3];
    let sigma = FRAC_1_SQRT_2;
    let make_offset = |threshold: f64| -> Result<QuantizerSpec> {
        let low = gaussian_bin_centroid(f64::NEG_INFINITY, threshold, sigma);
        let high = gaussian_bin_centroid(threshold, f64::INFINITY, sigma);
        QuantizerSpec::one_bit_offset(threshold, low, high)
    };
    let specs = [
        make_offset(-zeta4)?,
        QuantizerSpec::one_bit(),
        make_offset(zeta4)?,
    ];
    Ok(VqlPartition {
        sizes,
        specs,
        sgn_group: 1,
    })
}
