//! Differential encoding: orthogonal space-time block codes for DPSK and
//! the dual-ring amplitude/phase recursion for DAPSK, plus the Gray
//! bit-to-symbol maps.

use crate::linalg::{unitary_ifft, CMat};
use crate::statmath::RandomSource;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Single-carrier or OFDM framing of the transmit codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sc,
    Ofdm,
}

// ---------------------------------------------------------------------------
// PSK constellation and Gray map
// ---------------------------------------------------------------------------

/// M-ary PSK constellation with Gray bit labels. Point `k` sits at
/// `e^{j2πk/M}` and carries the Gray code of `k`; the all-zero pattern maps
/// to `e^{j0}`.
#[derive(Debug, Clone)]
pub struct PskConstellation {
    m: usize,
    points: Vec<Complex64>,
}

fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    g ^= g >> 1;
    g ^= g >> 2;
    g ^= g >> 4;
    g ^= g >> 8;
    g ^= g >> 16;
    g ^= g >> 32;
    g
}

impl PskConstellation {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::Domain(format!(
                "constellation size must be a power of two >= 2, got {m}"
            )));
        }
        let points = (0..m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        Ok(Self { m, points })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m.trailing_zeros() as usize
    }

    pub fn point(&self, k: usize) -> Complex64 {
        self.points[k]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Υ: bit pattern (MSB first) to constellation point.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Complex64> {
        if bits.len() != self.bits_per_symbol() {
            return Err(Error::Domain(format!(
                "expected {} bits, got {}",
                self.bits_per_symbol(),
                bits.len()
            )));
        }
        let v = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        Ok(self.points[gray_inverse(v)])
    }

    /// Υ⁻¹: nearest constellation point, returned as its bit pattern.
    /// Never fails; off-constellation inputs resolve to the closest point.
    pub fn unmap(&self, s: Complex64) -> Vec<u8> {
        let k = self.nearest_index(s);
        let g = gray(k);
        let nb = self.bits_per_symbol();
        (0..nb).map(|i| ((g >> (nb - 1 - i)) & 1) as u8).collect()
    }

    pub fn nearest_index(&self, s: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Dispersion matrices and the differential recursion
// ---------------------------------------------------------------------------

/// The orthogonal dispersion matrices `A[n_s]`, `B[n_s]` that combine a
/// symbol block and its conjugates into a square codeword. Construction
/// verifies the orthogonality identities the detectors rely on, so any set
/// that passes is usable.
#[derive(Debug, Clone)]
pub struct DispersionSet {
    n_s: usize,
    n_d: usize,
    a: Vec<CMat>,
    b: Vec<CMat>,
}

impl DispersionSet {
    pub fn new(a: Vec<CMat>, b: Vec<CMat>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Shape(
                "dispersion set needs matching non-empty A and B lists".into(),
            ));
        }
        let n_s = a.len();
        let n_d = a[0].rows;
        for m in a.iter().chain(b.iter()) {
            if m.rows != n_d || m.cols != n_d {
                return Err(Error::Shape(
                    "dispersion matrices must be square N_d×N_d".into(),
                ));
            }
        }
        let set = Self { n_s, n_d, a, b };
        set.check_orthogonality()?;
        Ok(set)
    }

    /// The rate-1 two-antenna set: builds `S = (1/√2) [[s1, s2], [-s2*, s1*]]`.
    pub fn alamouti() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let a1 = CMat::new(2, 2, vec![one, z, z, z]);
        let a2 = CMat::new(2, 2, vec![z, one, z, z]);
        let b1 = CMat::new(2, 2, vec![z, z, z, one]);
        let b2 = CMat::new(2, 2, vec![z, z, -one, z]);
        Self::new(vec![a1, a2], vec![b1, b2]).expect("alamouti set is orthogonal")
    }

    /// Degenerate one-symbol code (`A = [1]`, `B = [0]`): the per-use
    /// differential recursion used by DAPSK and the coherent baseline.
    pub fn scalar() -> Self {
        let a = CMat::new(1, 1, vec![Complex64::new(1.0, 0.0)]);
        let b = CMat::new(1, 1, vec![Complex64::new(0.0, 0.0)]);
        Self::new(vec![a], vec![b]).expect("scalar set is orthogonal")
    }

    pub fn symbols_per_block(&self) -> usize {
        self.n_s
    }

    pub fn block_dim(&self) -> usize {
        self.n_d
    }

    /// `Ã = [A_0^T q, …]`, `B̃ = [B_0^T q, …]`, one column per symbol.
    pub fn dispersed_products(&self, q: &[Complex64]) -> (CMat, CMat) {
        assert_eq!(q.len(), self.n_d);
        let mut at = CMat::zeros(self.n_d, self.n_s);
        let mut bt = CMat::zeros(self.n_d, self.n_s);
        for ns in 0..self.n_s {
            let av = self.a[ns].transpose().mul_vec(q);
            let bv = self.b[ns].transpose().mul_vec(q);
            for l in 0..self.n_d {
                at.set(l, ns, av[l]);
                bt.set(l, ns, bv[l]);
            }
        }
        (at, bt)
    }

    /// The composite `Γ = [[Ã, B̃], [B̃*, Ã*]]` built from a previous block.
    pub fn gamma_matrix(&self, q: &[Complex64]) -> CMat {
        let (at, bt) = self.dispersed_products(q);
        let mut g = CMat::zeros(2 * self.n_d, 2 * self.n_s);
        for r in 0..self.n_d {
            for c in 0..self.n_s {
                g.set(r, c, at.get(r, c));
                g.set(r, self.n_s + c, bt.get(r, c));
                g.set(self.n_d + r, c, bt.get(r, c).conj());
                g.set(self.n_d + r, self.n_s + c, at.get(r, c).conj());
            }
        }
        g
    }

    fn check_orthogonality(&self) -> Result<()> {
        let mut rng = RandomSource::new(0x0d15_7e55, 0);
        for probe in 0..16 {
            let q: Vec<Complex64> = (0..self.n_d).map(|_| rng.standard_complex()).collect();
            let norm_sq: f64 = q.iter().map(|v| v.norm_sqr()).sum();
            let g = self.gamma_matrix(&q);
            let gram = g.hermitian().mul(&g);
            let target = CMat::identity(2 * self.n_s).scale(Complex64::new(norm_sq, 0.0));
            if gram.max_abs_diff(&target) > 1e-10 * norm_sq.max(1.0) {
                return Err(Error::Domain(format!(
                    "dispersion matrices fail the orthogonality identity (probe {probe})"
                )));
            }
        }
        Ok(())
    }
}

/// `S = N_s^{-1/2} Σ (A_ns s[ns] + B_ns s*[ns])`; unitary for unit-modulus
/// blocks.
pub fn build_data_matrix(s_block: &[Complex64], disp: &DispersionSet) -> Result<CMat> {
    if s_block.len() != disp.n_s {
        return Err(Error::Shape(format!(
            "block carries {} symbols, dispersion set expects {}",
            s_block.len(),
            disp.n_s
        )));
    }
    for s in s_block {
        if (s.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "DPSK data symbols must be unit modulus, got |s| = {}",
                s.norm()
            )));
        }
    }
    let mut m = CMat::zeros(disp.n_d, disp.n_d);
    for (ns, s) in s_block.iter().enumerate() {
        m = m.add(&disp.a[ns].scale(*s));
        m = m.add(&disp.b[ns].scale(s.conj()));
    }
    Ok(m.scale(Complex64::new(1.0 / (disp.n_s as f64).sqrt(), 0.0)))
}

/// Differential recursion `C[v'] = C[v'-1] S[v']` from `C[-1] = I`,
/// concatenated into the `K × N` codeword.
pub fn diff_encode(blocks: &[Vec<Complex64>], disp: &DispersionSet) -> Result<CMat> {
    let k = disp.n_d;
    let n = blocks.len() * disp.n_d;
    let mut code = CMat::zeros(k, n);
    let mut prev = CMat::identity(k);
    for (v, block) in blocks.iter().enumerate() {
        let s = build_data_matrix(block, disp)?;
        let cur = prev.mul(&s);
        for r in 0..k {
            for c in 0..disp.n_d {
                code.set(r, v * disp.n_d + c, cur.get(r, c));
            }
        }
        prev = cur;
    }
    Ok(code)
}

/// Maps the codeword onto the air interface: identity for single carrier,
/// per-antenna unitary inverse DFT for OFDM.
pub fn to_transmit(code: &CMat, mode: Mode) -> CMat {
    match mode {
        Mode::Sc => code.clone(),
        Mode::Ofdm => {
            let mut out = code.clone();
            for r in 0..out.rows {
                let mut row: Vec<Complex64> = out.row(r).to_vec();
                unitary_ifft(&mut row);
                for (c, v) in row.into_iter().enumerate() {
                    out.set(r, c, v);
                }
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// DAPSK
// ---------------------------------------------------------------------------

/// Which of the two concentric amplitude rings a symbol sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ring {
    Lo,
    Hi,
}

/// Per-use amplitude transition: stay, step up to the outer ring, or step
/// down to the inner ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmpRatio {
    Unit,
    Up,
    Down,
}

impl AmpRatio {
    pub const ALL: [AmpRatio; 3] = [AmpRatio::Unit, AmpRatio::Up, AmpRatio::Down];

    pub fn value(self, ring_ratio: f64) -> f64 {
        match self {
            AmpRatio::Unit => 1.0,
            AmpRatio::Up => ring_ratio,
            AmpRatio::Down => 1.0 / ring_ratio,
        }
    }

    pub fn index(self) -> usize {
        match self {
            AmpRatio::Unit => 0,
            AmpRatio::Up => 1,
            AmpRatio::Down => 2,
        }
    }
}

/// One encoded DAPSK use.
#[derive(Debug, Clone, Copy)]
pub struct DapskSymbol {
    /// Transmitted value `x[v]`.
    pub x: Complex64,
    /// Amplitude transition applied at this use.
    pub amp_ratio: AmpRatio,
    /// Phase increment `s[v]`.
    pub s: Complex64,
}

/// Running state of the dual-ring differential encoder: the unit-modulus
/// phase accumulator and the current ring.
#[derive(Debug, Clone)]
pub struct DapskState {
    ring_ratio: f64,
    psi: [f64; 2],
    code: Complex64,
    ring: Ring,
}

impl DapskState {
    /// Starts on the inner ring with zero phase; the first transmitted use
    /// is the reference symbol `ψ0`.
    pub fn new(ring_ratio: f64) -> Result<Self> {
        if !(ring_ratio > 1.0) {
            return Err(Error::Domain(format!(
                "ring ratio must exceed 1, got {ring_ratio}"
            )));
        }
        let psi0 = (2.0 / (ring_ratio * ring_ratio + 1.0)).sqrt();
        Ok(Self {
            ring_ratio,
            psi: [psi0, ring_ratio * psi0],
            code: Complex64::new(1.0, 0.0),
            ring: Ring::Lo,
        })
    }

    pub fn ring_ratio(&self) -> f64 {
        self.ring_ratio
    }

    pub fn psi(&self, ring: Ring) -> f64 {
        match ring {
            Ring::Lo => self.psi[0],
            Ring::Hi => self.psi[1],
        }
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn amplitude(&self) -> f64 {
        self.psi(self.ring)
    }

    /// The known first transmission before any data bits.
    pub fn reference_symbol(&self) -> Complex64 {
        self.code * self.psi(self.ring)
    }

    /// Encodes one block of `1 + log2(M)` bits. The first bit drives the
    /// ring transition, the rest select the phase increment.
    pub fn encode(&mut self, bits: &[u8], constellation: &PskConstellation) -> Result<DapskSymbol> {
        if bits.len() != 1 + constellation.bits_per_symbol() {
            return Err(Error::Domain(format!(
                "DAPSK expects {} bits per use, got {}",
                1 + constellation.bits_per_symbol(),
                bits.len()
            )));
        }
        let s = constellation.map_bits(&bits[1..])?;
        let amp_ratio = match (bits[0], self.ring) {
            (0, _) => AmpRatio::Unit,
            (1, Ring::Lo) => AmpRatio::Up,
            (1, Ring::Hi) => AmpRatio::Down,
            _ => return Err(Error::Domain("bits must be 0 or 1".into())),
        };
        self.ring = match amp_ratio {
            AmpRatio::Unit => self.ring,
            AmpRatio::Up => Ring::Hi,
            AmpRatio::Down => Ring::Lo,
        };
        self.code *= s;
        Ok(DapskSymbol {
            x: self.code * self.amplitude(),
            amp_ratio,
            s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn alamouti_matrix_for_real_pair() {
        let disp = DispersionSet::alamouti();
        let s = vec![c(1.0, 0.0), c(1.0, 0.0)];
        let m = build_data_matrix(&s, &disp).unwrap();
        let r = 1.0 / 2.0f64.sqrt();
        let want = CMat::new(2, 2, vec![c(r, 0.0), c(r, 0.0), c(-r, 0.0), c(r, 0.0)]);
        assert!(m.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn alamouti_matrix_for_complex_pair() {
        let disp = DispersionSet::alamouti();
        let m = build_data_matrix(&[c(1.0, 0.0), c(0.0, 1.0)], &disp).unwrap();
        let r = 1.0 / 2.0f64.sqrt();
        let want = CMat::new(2, 2, vec![c(r, 0.0), c(0.0, r), c(0.0, r), c(r, 0.0)]);
        assert!(m.max_abs_diff(&want) < 1e-12);
        let gram = m.hermitian().mul(&m);
        assert!(gram.max_abs_diff(&CMat::identity(2)) < 1e-12);

        let m2 = build_data_matrix(&[c(0.0, 1.0), c(0.0, -1.0)], &disp).unwrap();
        let want2 = CMat::new(2, 2, vec![c(0.0, r), c(0.0, -r), c(0.0, -r), c(0.0, -r)]);
        assert!(m2.max_abs_diff(&want2) < 1e-12);
    }

    #[test]
    fn gamma_gram_is_scaled_identity() {
        let disp = DispersionSet::alamouti();
        let mut rng = RandomSource::new(3, 0);
        for _ in 0..1000 {
            let q: Vec<Complex64> = (0..2).map(|_| rng.standard_complex()).collect();
            let norm_sq: f64 = q.iter().map(|v| v.norm_sqr()).sum();
            let g = disp.gamma_matrix(&q);
            let gram = g.hermitian().mul(&g);
            let want = CMat::identity(4).scale(c(norm_sq, 0.0));
            assert!(gram.max_abs_diff(&want) < 1e-10);
        }
    }

    #[test]
    fn data_matrix_is_unitary_for_random_qpsk() {
        let disp = DispersionSet::alamouti();
        let qpsk = PskConstellation::new(4).unwrap();
        let mut rng = RandomSource::new(11, 0);
        for _ in 0..50 {
            let s: Vec<Complex64> = (0..2)
                .map(|_| qpsk.point((rng.next_u64() % 4) as usize))
                .collect();
            let m = build_data_matrix(&s, &disp).unwrap();
            let x: Vec<Complex64> = (0..2).map(|_| rng.standard_complex()).collect();
            let y = m.mul_vec(&x);
            let nx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let ny: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            assert!((nx - ny).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_unit_modulus_symbols() {
        let disp = DispersionSet::alamouti();
        assert!(build_data_matrix(&[c(2.0, 0.0), c(1.0, 0.0)], &disp).is_err());
    }

    #[test]
    fn first_codeword_block_equals_first_data_matrix() {
        let disp = DispersionSet::alamouti();
        let code = diff_encode(&[vec![c(1.0, 0.0), c(1.0, 0.0)]], &disp).unwrap();
        let r = 1.0 / 2.0f64.sqrt();
        assert!((code.get(0, 0) - c(r, 0.0)).norm() < 1e-12);
        assert!((code.get(1, 0) - c(-r, 0.0)).norm() < 1e-12);
        assert!((code.get(0, 1) - c(r, 0.0)).norm() < 1e-12);
        assert!((code.get(1, 1) - c(r, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn recursion_stays_unitary_after_many_blocks() {
        let disp = DispersionSet::alamouti();
        let qpsk = PskConstellation::new(4).unwrap();
        let mut rng = RandomSource::new(5, 1);
        let blocks: Vec<Vec<Complex64>> = (0..128)
            .map(|_| {
                (0..2)
                    .map(|_| qpsk.point((rng.next_u64() % 4) as usize))
                    .collect()
            })
            .collect();
        let code = diff_encode(&blocks, &disp).unwrap();
        for v in 0..128 {
            let mut blk = CMat::zeros(2, 2);
            for r in 0..2 {
                for cidx in 0..2 {
                    blk.set(r, cidx, code.get(r, v * 2 + cidx));
                }
            }
            let gram = blk.hermitian().mul(&blk);
            assert!(gram.max_abs_diff(&CMat::identity(2)) < 1e-10, "block {v}");
        }
    }

    #[test]
    fn transmit_mapping_preserves_power_and_inverts() {
        let disp = DispersionSet::alamouti();
        let qpsk = PskConstellation::new(4).unwrap();
        let mut rng = RandomSource::new(8, 0);
        let blocks: Vec<Vec<Complex64>> = (0..8)
            .map(|_| {
                (0..2)
                    .map(|_| qpsk.point((rng.next_u64() % 4) as usize))
                    .collect()
            })
            .collect();
        let code = diff_encode(&blocks, &disp).unwrap();
        assert_eq!(to_transmit(&code, Mode::Sc), code);

        let x = to_transmit(&code, Mode::Ofdm);
        for r in 0..2 {
            let pc: f64 = code.row(r).iter().map(|v| v.norm_sqr()).sum();
            let px: f64 = x.row(r).iter().map(|v| v.norm_sqr()).sum();
            assert!((pc - px).abs() < 1e-12);
            let mut row = x.row(r).to_vec();
            crate::linalg::unitary_fft(&mut row);
            for (a, b) in row.iter().zip(code.row(r)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gray_map_anchor_and_round_trip() {
        let m8 = PskConstellation::new(8).unwrap();
        assert!((m8.map_bits(&[0, 0, 0]).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        for v in 0..8usize {
            let bits: Vec<u8> = (0..3).map(|i| ((v >> (2 - i)) & 1) as u8).collect();
            let s = m8.map_bits(&bits).unwrap();
            assert_eq!(m8.unmap(s), bits);
        }
    }

    #[test]
    fn gray_labels_of_adjacent_points_differ_in_one_bit() {
        let m16 = PskConstellation::new(16).unwrap();
        for k in 0..16usize {
            let a = gray(k);
            let b = gray((k + 1) % 16);
            assert_eq!((a ^ b).count_ones(), 1, "k={k}");
        }
        let _ = m16;
    }

    #[test]
    fn dapsk_ring_amplitudes() {
        let st = DapskState::new(2.0).unwrap();
        assert!((st.psi(Ring::Lo) - (2.0f64 / 5.0).sqrt()).abs() < 1e-12);
        assert!((st.psi(Ring::Hi) - 1.264911).abs() < 1e-6);
        let p0 = st.psi(Ring::Lo);
        let p1 = st.psi(Ring::Hi);
        assert!((p0 * p0 + p1 * p1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dapsk_amplitude_rule() {
        let qpsk = PskConstellation::new(4).unwrap();
        let mut st = DapskState::new(2.0).unwrap();
        assert_eq!(st.ring(), Ring::Lo);

        // b1 = 0: amplitude unchanged.
        let sym = st.encode(&[0, 0, 0], &qpsk).unwrap();
        assert_eq!(sym.amp_ratio, AmpRatio::Unit);
        assert!((sym.x.norm() - st.psi(Ring::Lo)).abs() < 1e-12);

        // b1 = 1 from the inner ring: ratio a, amplitude ψ1.
        let sym = st.encode(&[1, 0, 1], &qpsk).unwrap();
        assert_eq!(sym.amp_ratio, AmpRatio::Up);
        assert!((sym.amp_ratio.value(2.0) - 2.0).abs() < 1e-12);
        assert!((sym.x.norm() - 1.264911).abs() < 1e-6);

        // b1 = 1 from the outer ring: ratio 1/a.
        let sym = st.encode(&[1, 1, 1], &qpsk).unwrap();
        assert_eq!(sym.amp_ratio, AmpRatio::Down);
        assert!((sym.amp_ratio.value(2.0) - 0.5).abs() < 1e-12);
        assert_eq!(st.ring(), Ring::Lo);
    }

    #[test]
    fn dapsk_amplitudes_stay_on_the_two_rings() {
        let qpsk = PskConstellation::new(4).unwrap();
        let mut st = DapskState::new(2.0).unwrap();
        let mut rng = RandomSource::new(17, 0);
        for _ in 0..500 {
            let bits: Vec<u8> = (0..3).map(|_| (rng.next_u64() & 1) as u8).collect();
            let sym = st.encode(&bits, &qpsk).unwrap();
            let amp = sym.x.norm();
            let on_ring =
                (amp - st.psi(Ring::Lo)).abs() < 1e-9 || (amp - st.psi(Ring::Hi)).abs() < 1e-9;
            assert!(on_ring, "amplitude {amp} off both rings");
        }
    }

    #[test]
    fn dapsk_rejects_bad_ring_ratio_and_bit_width() {
        assert!(DapskState::new(1.0).is_err());
        let qpsk = PskConstellation::new(4).unwrap();
        let mut st = DapskState::new(2.0).unwrap();
        assert!(st.encode(&[0, 0], &qpsk).is_err());
    }
}
