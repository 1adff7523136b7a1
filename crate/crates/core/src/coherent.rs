//! Pilot-aided coherent baseline: quantized pilot transmission,
//! least-squares channel estimation on the quantized sequences, and
//! channel-conditioned quantized ML detection.
//!
//! Pilots occupy a contiguous preamble of each coherence block and the
//! estimate is held until the next preamble. Least squares runs on the
//! quantized labels directly, so the estimate absorbs the Bussgang gain of
//! the quantizer, which is exactly the scale the detection rows need.

use crate::detect_dapsk::log_gauss_bin;
use crate::diffcode::PskConstellation;
use crate::linalg::CMat;
use crate::quantize::QuantizerSpec;
use crate::statmath::log_std_normal_cdf;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Pilot layout for one coherence block: a preamble of known unit-power
/// symbols, orthogonal across transmit antennas.
#[derive(Debug, Clone)]
pub struct PilotPlan {
    fraction: f64,
    positions: Vec<usize>,
    /// `K × P` pilot matrix; per-antenna symbol power `1/K`.
    symbols: CMat,
}

impl PilotPlan {
    /// Preamble plan: `round(ξ·B)` pilot uses at the head of a coherence
    /// block of `B` uses, pilot symbols drawn from cycled DFT columns.
    pub fn preamble(fraction: f64, block_len: usize, num_tx: usize) -> Result<Self> {
        if !(0.0 < fraction && fraction < 1.0) {
            return Err(Error::Config(format!(
                "pilot fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let count = (fraction * block_len as f64).round() as usize;
        if count < num_tx {
            return Err(Error::Config(format!(
                "{count} pilot uses cannot sound {num_tx} transmit antennas"
            )));
        }
        if count >= block_len {
            return Err(Error::Config(format!(
                "pilot preamble of {count} uses fills the whole {block_len}-use block"
            )));
        }
        let amp = 1.0 / (num_tx as f64).sqrt();
        let mut symbols = CMat::zeros(num_tx, count);
        for k in 0..num_tx {
            for p in 0..count {
                let phase = 2.0 * PI * (k * (p % num_tx)) as f64 / num_tx as f64;
                symbols.set(k, p, Complex64::from_polar(amp, phase));
            }
        }
        Ok(Self {
            fraction,
            positions: (0..count).collect(),
            symbols,
        })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    /// Pilot positions relative to the start of the coherence block.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn symbols(&self) -> &CMat {
        &self.symbols
    }

    pub fn num_pilots(&self) -> usize {
        self.positions.len()
    }
}

/// Solves the small complex system `G·x = b` by Gaussian elimination with
/// partial pivoting.
fn solve_small(mut g: CMat, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = g.rows;
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, g.get(r, col).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if mag < 1e-12 {
            return Err(Error::Estimation("rank-deficient pilot matrix".into()));
        }
        if pivot != col {
            for c in 0..n {
                let tmp = g.get(col, c);
                g.set(col, c, g.get(pivot, c));
                g.set(pivot, c, tmp);
            }
            b.swap(col, pivot);
        }
        for r in col + 1..n {
            let factor = g.get(r, col) / g.get(col, col);
            for c in col..n {
                let v = g.get(r, c) - factor * g.get(col, c);
                g.set(r, c, v);
            }
            b[r] = b[r] - factor * b[col];
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= g.get(row, c) * x[c];
        }
        x[row] = acc / g.get(row, row);
    }
    Ok(x)
}

/// Least-squares channel estimate from the quantized pilot observations:
/// `ĥ_u = argmin ‖q_u - X_p^T h‖²` solved through the normal equations.
/// `q_pilots` is `U × P` in pilot order.
pub fn ls_channel_estimate(q_pilots: &CMat, plan: &PilotPlan) -> Result<CMat> {
    let x = plan.symbols();
    if q_pilots.cols != x.cols {
        return Err(Error::Shape(format!(
            "{} observations per antenna vs {} pilot uses",
            q_pilots.cols, x.cols
        )));
    }
    let k = x.rows;
    // G = X* X^T (K×K), b_u = X* q_u.
    let mut gram = CMat::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..x.cols {
                acc += x.get(a, p).conj() * x.get(b, p);
            }
            gram.set(a, b, acc);
        }
    }
    let mut est = CMat::zeros(q_pilots.rows, k);
    for u in 0..q_pilots.rows {
        let rhs: Vec<Complex64> = (0..k)
            .map(|a| {
                (0..x.cols)
                    .map(|p| x.get(a, p).conj() * q_pilots.get(u, p))
                    .sum()
            })
            .collect();
        let h = solve_small(gram.clone(), rhs)?;
        for (c, v) in h.into_iter().enumerate() {
            est.set(u, c, v);
        }
    }
    Ok(est)
}

fn joint_candidate(c: usize, num_tx: usize, constellation: &PskConstellation) -> Vec<Complex64> {
    let m = constellation.size();
    (0..num_tx)
        .map(|k| constellation.point((c / m.pow(k as u32)) % m))
        .collect()
}

/// Predicted unquantized mean at antenna `u` for a joint candidate; data
/// symbols carry per-antenna power `1/K` like the pilots.
fn predicted_mean(h_est: &CMat, u: usize, symbols: &[Complex64]) -> Complex64 {
    let amp = 1.0 / (symbols.len() as f64).sqrt();
    symbols
        .iter()
        .enumerate()
        .map(|(k, s)| h_est.get(u, k) * (amp * s))
        .sum()
}

/// One-bit coherent ML for a single use: the refined-row likelihood with
/// rows built from the channel estimate instead of a previous quantized
/// block. Returns the joint `K`-stream decision.
pub fn coherent_ml_detect(
    q_use: &[Complex64],
    h_est: &CMat,
    rho: f64,
    constellation: &PskConstellation,
) -> Result<Vec<Complex64>> {
    if q_use.len() != h_est.rows {
        return Err(Error::Shape(format!(
            "{} observations vs {} estimate rows",
            q_use.len(),
            h_est.rows
        )));
    }
    let num_tx = h_est.cols;
    let total = constellation.size().pow(num_tx as u32);
    let sqrt_rho = rho.sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0usize;
    for c in 0..total {
        let cand = joint_candidate(c, num_tx, constellation);
        let mut metric = 0.0;
        for (u, q) in q_use.iter().enumerate() {
            let mean = predicted_mean(h_est, u, &cand);
            metric += log_std_normal_cdf(q.re.signum() * (sqrt_rho * mean.re))?;
            metric += log_std_normal_cdf(q.im.signum() * (sqrt_rho * mean.im))?;
        }
        if metric > best {
            best = metric;
            best_idx = c;
        }
    }
    Ok(joint_candidate(best_idx, num_tx, constellation))
}

/// Multi-bit coherent ML: per-dimension bin probabilities around the
/// estimated mean.
pub fn coherent_multibit_detect(
    q_use: &[Complex64],
    h_est: &CMat,
    spec: &QuantizerSpec,
    rho: f64,
    constellation: &PskConstellation,
) -> Result<Vec<Complex64>> {
    let num_tx = h_est.cols;
    let total = constellation.size().pow(num_tx as u32);
    let sqrt_rho = rho.sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0usize;
    for c in 0..total {
        let cand = joint_candidate(c, num_tx, constellation);
        let mut metric = 0.0;
        for (u, q) in q_use.iter().enumerate() {
            let mean = predicted_mean(h_est, u, &cand);
            for (label, m) in [(q.re, mean.re), (q.im, mean.im)] {
                let (lo, hi) = spec.bin_edges(spec.label_index(label));
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
            }
        }
        if metric > best {
            best = metric;
            best_idx = c;
        }
    }
    Ok(joint_candidate(best_idx, num_tx, constellation))
}

/// Euclidean decision on unquantized-style observations (post-FFT OFDM
/// labels): joint argmin of `Σ_u |q_u - ĥ_u^T x|²`.
pub fn coherent_euclidean_detect(
    q_use: &[Complex64],
    h_est: &CMat,
    constellation: &PskConstellation,
) -> Result<Vec<Complex64>> {
    let num_tx = h_est.cols;
    let total = constellation.size().pow(num_tx as u32);
    let mut best = f64::INFINITY;
    let mut best_idx = 0usize;
    for c in 0..total {
        let cand = joint_candidate(c, num_tx, constellation);
        let metric: f64 = q_use
            .iter()
            .enumerate()
            .map(|(u, q)| (q - predicted_mean(h_est, u, &cand)).norm_sqr())
            .sum();
        if metric < best {
            best = metric;
            best_idx = c;
        }
    }
    Ok(joint_candidate(best_idx, num_tx, constellation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect_dpsk::{ml_one_bit_detect, QuantizedBlockPair};
    use crate::diffcode::DispersionSet;
    use crate::quantize::one_bit;
    use crate::statmath::{complex_gaussian, RandomSource};
    use rand::RngCore;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn preamble_pilot_counts() {
        let plan = PilotPlan::preamble(0.125, 256, 2).unwrap();
        assert_eq!(plan.num_pilots(), 32);
        assert_eq!(plan.positions()[0], 0);
        assert_eq!(*plan.positions().last().unwrap(), 31);
        for xi in [0.125, 0.25, 0.5] {
            let plan = PilotPlan::preamble(xi, 256, 2).unwrap();
            assert_eq!(plan.num_pilots(), (xi * 256.0).round() as usize);
        }
        assert!(PilotPlan::preamble(0.0, 256, 2).is_err());
        assert!(PilotPlan::preamble(1.0, 256, 2).is_err());
        assert!(PilotPlan::preamble(0.01, 256, 4).is_err());
    }

    #[test]
    fn pilot_symbols_have_per_antenna_power() {
        let plan = PilotPlan::preamble(0.25, 64, 2).unwrap();
        for k in 0..2 {
            for p in 0..plan.num_pilots() {
                assert!((plan.symbols().get(k, p).norm_sqr() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ls_recovers_channel_without_noise_or_quantization() {
        let plan = PilotPlan::preamble(0.25, 64, 2).unwrap();
        let mut rng = RandomSource::new(51, 0);
        let h_true = CMat::new(4, 2, (0..8).map(|_| rng.standard_complex()).collect());
        let mut q = CMat::zeros(4, plan.num_pilots());
        for u in 0..4 {
            for p in 0..plan.num_pilots() {
                let mut acc = c(0.0, 0.0);
                for k in 0..2 {
                    acc += plan.symbols().get(k, p) * h_true.get(u, k);
                }
                q.set(u, p, acc);
            }
        }
        let est = ls_channel_estimate(&q, &plan).unwrap();
        assert!(est.max_abs_diff(&h_true) < 1e-10);
    }

    #[test]
    fn ls_residual_orthogonal_to_pilot_rows() {
        let plan = PilotPlan::preamble(0.5, 32, 2).unwrap();
        let mut rng = RandomSource::new(52, 0);
        let mut q = CMat::zeros(3, plan.num_pilots());
        for u in 0..3 {
            for p in 0..plan.num_pilots() {
                q.set(u, p, rng.standard_complex());
            }
        }
        let est = ls_channel_estimate(&q, &plan).unwrap();
        for u in 0..3 {
            for k in 0..2 {
                let mut acc = c(0.0, 0.0);
                for p in 0..plan.num_pilots() {
                    let fitted: Complex64 = (0..2)
                        .map(|kk| plan.symbols().get(kk, p) * est.get(u, kk))
                        .sum();
                    acc += plan.symbols().get(k, p).conj() * (q.get(u, p) - fitted);
                }
                assert!(acc.norm() < 1e-9, "antenna {u} column {k}: {acc}");
            }
        }
    }

    #[test]
    fn ls_unbiased_under_noise() {
        let plan = PilotPlan::preamble(0.25, 64, 1).unwrap();
        let mut rng = RandomSource::new(53, 0);
        let h_true = c(0.8, -0.4);
        let mut acc = c(0.0, 0.0);
        let reps = 10_000;
        for _ in 0..reps {
            let mut q = CMat::zeros(1, plan.num_pilots());
            for p in 0..plan.num_pilots() {
                let y =
                    plan.symbols().get(0, p) * h_true + complex_gaussian(&mut rng, 0.2).unwrap();
                q.set(0, p, y);
            }
            acc += ls_channel_estimate(&q, &plan).unwrap().get(0, 0);
        }
        let mean = acc / reps as f64;
        assert!((mean - h_true).norm() / h_true.norm() < 0.01, "mean {mean}");
    }

    #[test]
    fn rank_deficient_pilots_error() {
        // Two identical pilot rows across antennas: K = 2 but rank 1.
        let amp = 1.0 / 2.0f64.sqrt();
        let mut symbols = CMat::zeros(2, 4);
        for k in 0..2 {
            for p in 0..4 {
                symbols.set(k, p, c(amp, 0.0));
            }
        }
        let plan = PilotPlan {
            fraction: 0.5,
            positions: (0..4).collect(),
            symbols,
        };
        let q = CMat::zeros(1, 4);
        assert!(ls_channel_estimate(&q, &plan).is_err());
    }

    #[test]
    fn perfect_estimate_zero_noise_detects_exactly() {
        let qpsk = crate::diffcode::PskConstellation::new(4).unwrap();
        let mut rng = RandomSource::new(54, 0);
        let u = 64;
        let mut errors = 0usize;
        for _ in 0..1000 {
            let h = CMat::new(u, 1, (0..u).map(|_| rng.standard_complex()).collect());
            let s = qpsk.point((rng.next_u64() % 4) as usize);
            let q: Vec<Complex64> = (0..u).map(|i| one_bit(h.get(i, 0) * s)).collect();
            let got = coherent_ml_detect(&q, &h, 10.0, &qpsk).unwrap();
            if got[0] != s {
                errors += 1;
            }
        }
        assert_eq!(errors, 0);
    }

    #[test]
    fn decision_invariant_to_common_row_scale_with_compensated_rho() {
        let qpsk = crate::diffcode::PskConstellation::new(4).unwrap();
        let mut rng = RandomSource::new(55, 0);
        for _ in 0..100 {
            let u = 8;
            let h = CMat::new(u, 1, (0..u).map(|_| rng.standard_complex()).collect());
            let q: Vec<Complex64> = (0..u).map(|_| one_bit(rng.standard_complex())).collect();
            let base = coherent_ml_detect(&q, &h, 4.0, &qpsk).unwrap();
            let scaled_h = h.scale(c(3.0, 0.0));
            let scaled = coherent_ml_detect(&q, &scaled_h, 4.0 / 9.0, &qpsk).unwrap();
            assert_eq!(base, scaled);
        }
    }

    #[test]
    fn coincides_with_degenerate_differential_ml() {
        // Rows built from the previous quantized use play the same role as
        // a channel estimate: decisions must coincide with the scalar-code
        // one-bit DPSK ML.
        let qpsk = crate::diffcode::PskConstellation::new(4).unwrap();
        let disp = DispersionSet::scalar();
        let mut rng = RandomSource::new(56, 0);
        for _ in 0..300 {
            let u = 6;
            let prev: Vec<Complex64> = (0..u).map(|_| one_bit(rng.standard_complex())).collect();
            let curr: Vec<Complex64> = (0..u).map(|_| one_bit(rng.standard_complex())).collect();
            let rho = 2.5;
            let pair = QuantizedBlockPair::new(
                prev.iter().map(|&p| vec![p]).collect(),
                curr.iter().map(|&q| vec![q]).collect(),
                rho,
            )
            .unwrap();
            let dpsk = ml_one_bit_detect(&pair, &disp, &qpsk).unwrap();
            // K = 1 estimate whose entries are the previous labels; the data
            // amplitude 1/sqrt(K) = 1 matches the scalar code.
            let h = CMat::new(u, 1, prev);
            let coh = coherent_ml_detect(&curr, &h, rho, &qpsk).unwrap();
            assert_eq!(dpsk[0], coh[0]);
        }
    }

    #[test]
    fn multibit_and_euclidean_paths_run() {
        let qpsk = crate::diffcode::PskConstellation::new(4).unwrap();
        let spec = crate::quantize::dapsk_two_bit_spec(2.0).unwrap();
        let mut rng = RandomSource::new(57, 0);
        let u = 16;
        let mut mb_err = 0;
        let mut eu_err = 0;
        let n_trials = 500;
        for _ in 0..n_trials {
            let h = CMat::new(u, 1, (0..u).map(|_| rng.standard_complex()).collect());
            let s = qpsk.point((rng.next_u64() % 4) as usize);
            let q2: Vec<Complex64> = (0..u)
                .map(|i| {
                    let y = h.get(i, 0) * s + complex_gaussian(&mut rng, 0.05).unwrap();
                    crate::quantize::quantize_complex(y, &spec)
                })
                .collect();
            let got = coherent_multibit_detect(&q2, &h, &spec, 10.0, &qpsk);
            let got = match got {
                Ok(v) => v,
                Err(e) => panic!("multibit failed: {e}"),
            };
            if got[0] != s {
                mb_err += 1;
            }
            let soft: Vec<Complex64> = (0..u)
                .map(|i| h.get(i, 0) * s + complex_gaussian(&mut rng, 0.05).unwrap())
                .collect();
            let got = coherent_euclidean_detect(&soft, &h, &qpsk).unwrap();
            if got[0] != s {
                eu_err += 1;
            }
        }
        assert!(mb_err < n_trials / 20, "multibit errors {mb_err}");
        assert_eq!(eu_err, 0);
    }
}
