//! Square Gray-mapped QAM with unit average energy, and the known preamble.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub order: usize,
    /// `points[label]` for labels `0..order`.
    pub points: Vec<Complex64>,
    side: usize,
    scale: f64,
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

fn binary_to_gray(b: usize) -> usize {
    b ^ (b >> 1)
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(Error::InvalidConfig(format!("unsupported QAM order {order}")));
        }
        let side = (order as f64).sqrt().round() as usize;
        let half_bits = side.trailing_zeros();
        let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |g: usize| (2 * gray_to_binary(g)) as f64 - (side as f64 - 1.0);
        let points = (0..order)
            .map(|label| {
                let i_bits = label >> half_bits;
                let q_bits = label & (side - 1);
                Complex64::new(level(i_bits), level(q_bits)) / scale
            })
            .collect();
        Ok(Self {
            order,
            points,
            side,
            scale,
        })
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    /// Nearest point by per-axis slicing (exact ML for a square grid).
    pub fn decide(&self, r: Complex64) -> usize {
        let half_bits = self.side.trailing_zeros();
        let slice = |x: f64| {
            let idx = ((x * self.scale + (self.side as f64 - 1.0)) / 2.0).round();
            binary_to_gray(idx.clamp(0.0, (self.side - 1) as f64) as usize)
        };
        (slice(r.re) << half_bits) | slice(r.im)
    }

    /// Nearest point by exhaustive search.
    pub fn decide_exhaustive(&self, r: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (r - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Bit differences between two labels.
    pub fn bit_errors(&self, a: usize, b: usize) -> u32 {
        ((a ^ b) as u32).count_ones()
    }
}

/// Random symbols on an `n x m` grid; returns the symbols and their labels.
pub fn generate_qam_symbols<R: Rng + ?Sized>(
    constellation: &Constellation,
    n: usize,
    m: usize,
    rng: &mut R,
) -> (CMatrix, Vec<usize>) {
    let labels: Vec<usize> = (0..n * m)
        .map(|_| rng.random_range(0..constellation.order))
        .collect();
    let symbols = CMatrix::from_fn(n, m, |i, j| constellation.points[labels[i + j * n]]);
    (symbols, labels)
}

/// Deterministic unit-modulus chirp `exp(-j pi (n + m)^2 / N)`.
pub fn generate_preamble(n: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(n, m, |i, j| {
        let k = ((i + j) % (2 * n)) as f64;
        Complex64::from_polar(1.0, -PI * k * k / n as f64)
    })
}
