//! Minimal dense complex-matrix helpers and unitary FFT wrappers.
//!
//! Everything in this simulator is small (2×2 codewords, `2U × 2` stacked
//! real systems), so a row-major `Vec` matrix with hand-written products is
//! simpler and faster than pulling in a linear-algebra stack.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Mutex;

/// Complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn hermitian(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum::<Complex64>()
            })
            .collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Largest entry-wise absolute deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

static PLANNER: Mutex<Option<FftPlanner<f64>>> = Mutex::new(None);

fn run_fft(buf: &mut [Complex64], inverse: bool) {
    let fft = {
        let mut guard = PLANNER.lock().unwrap();
        let planner = guard.get_or_insert_with(FftPlanner::new);
        if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        }
    };
    fft.process(buf);
}

/// In-place unitary DFT: `X[v] = N^{-1/2} Σ_n x[n] e^{-j2πnv/N}`.
pub fn unitary_fft(buf: &mut [Complex64]) {
    run_fft(buf, false);
    let s = 1.0 / (buf.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// In-place unitary inverse DFT: `x[n] = N^{-1/2} Σ_v X[v] e^{+j2πnv/N}`.
pub fn unitary_ifft(buf: &mut [Complex64]) {
    run_fft(buf, true);
    let s = 1.0 / (buf.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
}
