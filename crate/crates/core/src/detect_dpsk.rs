//! DPSK detection from two adjacent quantized blocks: the one-bit maximum
//! likelihood detector and the reduced-complexity decoupled detector that
//! exploits the orthogonality of the dispersion matrices.
//!
//! Both work on a [`QuantizedBlockPair`]: the detector never sees the
//! channel, only the quantized previous block (which plays the role the
//! channel estimate plays in coherent detection) and the quantized current
//! block.

use crate::diffcode::DispersionSet;
use crate::statmath::log_std_normal_cdf;
use crate::{Error, Result};
use num_complex::Complex64;

/// Quantized observations of two adjacent blocks across the array, plus the
/// composite SNR `ρ = 1/σ_w²` of the differential model.
#[derive(Debug, Clone)]
pub struct QuantizedBlockPair {
    q_prev: Vec<Vec<Complex64>>,
    q_curr: Vec<Vec<Complex64>>,
    rho: f64,
}

impl QuantizedBlockPair {
    pub fn new(q_prev: Vec<Vec<Complex64>>, q_curr: Vec<Vec<Complex64>>, rho: f64) -> Result<Self> {
        if q_prev.len() != q_curr.len() || q_prev.is_empty() {
            return Err(Error::Shape(
                "previous and current blocks must cover the same antennas".into(),
            ));
        }
        let block_len = q_prev[0].len();
        if block_len == 0
            || q_prev.iter().any(|b| b.len() != block_len)
            || q_curr.iter().any(|b| b.len() != block_len)
        {
            return Err(Error::Shape("ragged block lengths".into()));
        }
        if !(rho > 0.0) {
            return Err(Error::Domain(format!(
                "composite SNR must be positive, got {rho}"
            )));
        }
        Ok(Self {
            q_prev,
            q_curr,
            rho,
        })
    }

    pub fn antennas(&self) -> usize {
        self.q_prev.len()
    }

    pub fn block_len(&self) -> usize {
        self.q_prev[0].len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn prev(&self, u: usize) -> &[Complex64] {
        &self.q_prev[u]
    }

    pub fn curr(&self, u: usize) -> &[Complex64] {
        &self.q_curr[u]
    }
}

/// Real-valued likelihood rows built from the previous block and
/// sign-refined by the current one. Row `(u, l, i)` has length `4·N_s`.
#[derive(Debug, Clone)]
pub struct RefinedRows {
    rows: Vec<Vec<f64>>,
    antennas: usize,
    block_len: usize,
}

impl RefinedRows {
    pub fn row(&self, u: usize, l: usize, i: usize) -> &[f64] {
        &self.rows[(u * self.block_len + l) * 2 + i]
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.rows.iter()
    }
}

fn is_sign_label(q: Complex64) -> bool {
    q.re != 0.0 && q.im != 0.0 && q.re.abs() == q.im.abs()
}

/// Builds the stacked real rows `f_{R,u,i}[l]` from the previous quantized
/// block and flips each row's sign to match the current one-bit label, so
/// the one-bit likelihood collapses to a product of `Φ` terms.
pub fn refine_rows(pair: &QuantizedBlockPair, disp: &DispersionSet) -> Result<RefinedRows> {
    let n_d = disp.block_dim();
    let n_s = disp.symbols_per_block();
    if pair.block_len() != n_d {
        return Err(Error::Shape(format!(
            "block length {} does not match dispersion dimension {n_d}",
            pair.block_len()
        )));
    }
    for u in 0..pair.antennas() {
        for &q in pair.curr(u) {
            if !is_sign_label(q) {
                return Err(Error::Domain(
                    "sign refinement needs one-bit labels in the current block".into(),
                ));
            }
        }
    }
    let mut rows = Vec::with_capacity(pair.antennas() * n_d * 2);
    for u in 0..pair.antennas() {
        let (at, bt) = disp.dispersed_products(pair.prev(u));
        for l in 0..n_d {
            // f = [ã row l, b̃ row l] ∈ C^{2Ns}
            let f: Vec<Complex64> = at.row(l).iter().chain(bt.row(l)).copied().collect();
            let mut f1 = Vec::with_capacity(4 * n_s);
            let mut f2 = Vec::with_capacity(4 * n_s);
            f1.extend(f.iter().map(|v| v.re));
            f1.extend(f.iter().map(|v| -v.im));
            f2.extend(f.iter().map(|v| v.im));
            f2.extend(f.iter().map(|v| v.re));
            let s1 = pair.curr(u)[l].re.signum();
            let s2 = pair.curr(u)[l].im.signum();
            rows.push(f1.into_iter().map(|v| s1 * v).collect());
            rows.push(f2.into_iter().map(|v| s2 * v).collect());
        }
    }
    Ok(RefinedRows {
        rows,
        antennas: pair.antennas(),
        block_len: n_d,
    })
}

/// Real stacking of a candidate block: `s̃ = [s; s*]`,
/// `s̃_R = [Re s̃; Im s̃] ∈ R^{4Ns}`.
pub fn stacked_real_symbol(s_block: &[Complex64]) -> Vec<f64> {
    let n_s = s_block.len();
    let mut out = Vec::with_capacity(4 * n_s);
    out.extend(s_block.iter().map(|s| s.re));
    out.extend(s_block.iter().map(|s| s.re));
    out.extend(s_block.iter().map(|s| s.im));
    out.extend(s_block.iter().map(|s| -s.im));
    out
}

/// Expands candidate index `c ∈ [0, M^{N_s})` into its symbol block;
/// position `ns` carries constellation point `(c / M^{ns}) % M`.
fn candidate_block(
    c: usize,
    n_s: usize,
    constellation: &crate::diffcode::PskConstellation,
) -> Vec<Complex64> {
    let m = constellation.size();
    (0..n_s)
        .map(|ns| constellation.point((c / m.pow(ns as u32)) % m))
        .collect()
}

/// One-bit joint ML over all `M^{N_s}` candidate blocks: maximizes the sum
/// of `log Φ(√ρ · f̃ᵀ s̃_R)` over rows. Ties resolve to the lowest
/// candidate index.
pub fn ml_one_bit_detect(
    pair: &QuantizedBlockPair,
    disp: &DispersionSet,
    constellation: &crate::diffcode::PskConstellation,
) -> Result<Vec<Complex64>> {
    let n_s = disp.symbols_per_block();
    let total = constellation
        .size()
        .checked_pow(n_s as u32)
        .ok_or_else(|| {
            Error::Config(format!(
                "candidate set M^Ns = {}^{n_s} overflows",
                constellation.size()
            ))
        })?;
    if total == 0 {
        return Err(Error::Config("empty candidate set".into()));
    }
    let rows = refine_rows(pair, disp)?;
    let sqrt_rho = pair.rho().sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0usize;
    for c in 0..total {
        let block = candidate_block(c, n_s, constellation);
        let srv = stacked_real_symbol(&block);
        let mut metric = 0.0;
        for row in rows.iter() {
            let dot: f64 = row.iter().zip(&srv).map(|(a, b)| a * b).sum();
            metric += log_std_normal_cdf(sqrt_rho * dot)?;
        }
        if metric > best {
            best = metric;
            best_idx = c;
        }
    }
    Ok(candidate_block(best_idx, n_s, constellation))
}

/// Matched combining `r_u = Γ_u^H q̃_u` accumulated across antennas,
/// followed by `N_s` independent nearest-point decisions. Works for any
/// label resolution, including post-FFT OFDM observations.
pub fn decoupled_detect(
    pair: &QuantizedBlockPair,
    disp: &DispersionSet,
    constellation: &crate::diffcode::PskConstellation,
) -> Result<Vec<Complex64>> {
    let n_d = disp.block_dim();
    let n_s = disp.symbols_per_block();
    if pair.block_len() != n_d {
        return Err(Error::Shape(format!(
            "block length {} does not match dispersion dimension {n_d}",
            pair.block_len()
        )));
    }
    let mut combined = vec![Complex64::new(0.0, 0.0); n_s];
    let mut ref_energy = 0.0;
    for u in 0..pair.antennas() {
        let (at, bt) = disp.dispersed_products(pair.prev(u));
        let q = pair.curr(u);
        for ns in 0..n_s {
            let mut r = Complex64::new(0.0, 0.0);
            for d in 0..n_d {
                r += at.get(d, ns).conj() * q[d] + bt.get(d, ns) * q[d].conj();
            }
            combined[ns] += r;
        }
        ref_energy += pair.prev(u).iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    let scale = ref_energy / (n_s as f64).sqrt();
    let decisions = combined
        .iter()
        .map(|r| {
            let mut best = f64::INFINITY;
            let mut pick = constellation.point(0);
            for k in 0..constellation.size() {
                let s = constellation.point(k);
                let d = (r - scale * s).norm_sqr();
                if d < best {
                    best = d;
                    pick = s;
                }
            }
            pick
        })
        .collect();
    Ok(decisions)
}
