//! Least-squares CSI, noise variance estimation, the sensing-aided Kalman
//! filter along subcarriers, and hard-decision demodulation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_cols, hermitian_eigen, CMatrix};
use crate::qam::Constellation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsiKind {
    True,
    LsEstimate,
    Enhanced,
}

#[derive(Debug, Clone)]
pub struct CsiSequence {
    pub values: CMatrix,
    pub kind: CsiKind,
    pub noise_var: f64,
}

/// `h = y / (sqrt(P_t) d)`.
pub fn ls_csi(y_preamble: &CMatrix, preamble: &CMatrix, p_t: f64, noise_var: f64) -> Result<CsiSequence> {
    if y_preamble.shape() != preamble.shape() {
        return Err(Error::Dimension("received block and preamble differ in shape".into()));
    }
    let amp = p_t.sqrt();
    let (n_c, m_s) = preamble.shape();
    let mut values = CMatrix::zeros(n_c, m_s);
    for m in 0..m_s {
        for n in 0..n_c {
            let d = preamble[(n, m)];
            if d.norm_sqr() == 0.0 {
                return Err(Error::ZeroSymbol {
                    subcarrier: n,
                    symbol: m,
                });
            }
            values[(n, m)] = y_preamble[(n, m)] / (amp * d);
        }
    }
    Ok(CsiSequence {
        values,
        kind: CsiKind::LsEstimate,
        noise_var,
    })
}

/// Mean of the trailing `N_c - 1` eigenvalues of `H H^H / M_s`.
///
/// Only the `min(N_c, M_s)` nonzero eigenvalues are computed; the rest are
/// zero and enter the mean as such.
pub fn estimate_sigma_p(h: &CMatrix) -> f64 {
    let (n_c, m_s) = h.shape();
    if n_c < 2 {
        return 0.0;
    }
    let scale = 1.0 / m_s as f64;
    let values = if n_c <= m_s {
        hermitian_eigen(crate::linalg::gram_rows(h, scale)).values
    } else {
        hermitian_eigen(gram_cols(h, scale)).values
    };
    let total: f64 = values.iter().skip(1).map(|v| v.max(0.0)).sum();
    total / (n_c - 1) as f64
}

/// Phase rotation per subcarrier `exp(-j 2 pi delta_f tau)`.
pub fn transfer_factor(delta_f: f64, tau: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * delta_f * tau)
}

/// Mean of `|exp(j 2 pi n delta_f tau) h_n - h_0|^2` over `n = 1..N_c-1`.
pub fn initial_obs_variance(column: &[Complex64], delta_f: f64, tau: f64) -> f64 {
    let n_c = column.len();
    if n_c < 2 {
        return 0.0;
    }
    let h0 = column[0];
    let sum: f64 = (1..n_c)
        .map(|n| {
            let rot = Complex64::from_polar(1.0, 2.0 * PI * n as f64 * delta_f * tau);
            (rot * column[n] - h0).norm_sqr()
        })
        .sum();
    sum / (n_c - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub transfer: Complex64,
    pub prior_var: f64,
    pub gain: Complex64,
    pub initial_var: f64,
}

impl KalmanState {
    pub fn new(transfer: Complex64, initial_var: f64) -> Self {
        Self {
            transfer,
            prior_var: initial_var,
            gain: Complex64::new(1.0, 0.0),
            initial_var,
        }
    }

    /// One predict/update step; returns the filtered value.
    pub fn step(&mut self, previous: Complex64, observation: Complex64, obs_var: f64) -> Complex64 {
        let a = self.transfer;
        let predicted = a * previous;
        let prior = (a * self.prior_var * a.conj()).re;
        let denom = prior + obs_var;
        self.gain = if denom == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(prior / denom, 0.0)
        };
        self.prior_var = ((Complex64::new(1.0, 0.0) - self.gain) * prior).re.max(0.0);
        predicted + (observation - predicted) * self.gain
    }
}

/// Runs the filter along one symbol column.
pub fn kalman_column(obs: &[Complex64], transfer: Complex64, obs_var: f64, initial_var: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(obs.len());
    let Some(&first) = obs.first() else {
        return out;
    };
    out.push(first);
    let mut state = KalmanState::new(transfer, initial_var);
    for &y in &obs[1..] {
        let prev = *out.last().unwrap();
        out.push(state.step(prev, y, obs_var));
    }
    out
}

/// Initial state variance for each column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialVariance {
    /// Estimated from the column itself.
    PerColumn,
    Fixed(f64),
}

/// Enhanced CSI using the sensed LoS delay `tau`.
pub fn kalman_enhance(
    h_ls: &CMatrix,
    tau: f64,
    delta_f: f64,
    obs_var: f64,
    initial: InitialVariance,
) -> CsiSequence {
    let (n_c, m_s) = h_ls.shape();
    let a = transfer_factor(delta_f, tau);
    let mut values = CMatrix::zeros(n_c, m_s);
    for m in 0..m_s {
        let col: Vec<Complex64> = h_ls.column(m).iter().copied().collect();
        let p0 = match initial {
            InitialVariance::PerColumn => initial_obs_variance(&col, delta_f, tau),
            InitialVariance::Fixed(v) => v,
        };
        let out = kalman_column(&col, a, obs_var, p0);
        values.column_mut(m).copy_from_slice(&out);
    }
    CsiSequence {
        values,
        kind: CsiKind::Enhanced,
        noise_var: obs_var,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    /// Decided labels, `None` where the equalizer denominator vanished.
    pub labels: Vec<Option<usize>>,
    pub bit_errors: u64,
    pub bits: u64,
}

impl Demodulated {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits.max(1) as f64
    }
}

/// `r = y / (sqrt(P_t) h)` then nearest-point decisions, scored against the
/// transmitted labels (column-major over the grid).
pub fn equalize_and_demodulate(
    y: &CMatrix,
    csi: &CMatrix,
    p_t: f64,
    constellation: &Constellation,
    sent: &[usize],
) -> Demodulated {
    let amp = p_t.sqrt();
    let bps = constellation.bits_per_symbol();
    let mut labels = Vec::with_capacity(y.len());
    let mut bit_errors = 0u64;
    for (i, (yv, hv)) in y.iter().zip(csi.iter()).enumerate() {
        let den = amp * hv;
        if den.norm_sqr() == 0.0 || !den.is_finite() {
            labels.push(None);
            bit_errors += bps as u64;
            continue;
        }
        let d = constellation.decide(yv / den);
        bit_errors += constellation.bit_errors(d, sent[i]) as u64;
        labels.push(Some(d));
    }
    Demodulated {
        labels,
        bit_errors,
        bits: bps as u64 * y.len() as u64,
    }
}

/// Mean squared entrywise error between two channel matrices.
pub fn csi_mse(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>() / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_obs_var_copies_observations() {
        let obs: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let out = kalman_column(&obs, Complex64::from_polar(1.0, 0.3), 0.0, 0.5);
        for (a, b) in obs.iter().zip(&out) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_gain_is_one() {
        let mut s = KalmanState::new(Complex64::new(1.0, 0.0), 0.0);
        let out = s.step(Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), 0.0);
        assert_eq!(s.gain, Complex64::new(1.0, 0.0));
        assert_eq!(out, Complex64::new(2.0, 0.0));
    }

    #[test]
    fn perfect_model_tracks_truth() {
        let a = transfer_factor(480e3, 1.3e-7);
        let truth: Vec<Complex64> = (0..32).map(|n| Complex64::new(0.7, 0.2) * a.powu(n)).collect();
        let noisy: Vec<Complex64> = truth
            .iter()
            .enumerate()
            .map(|(n, t)| if n == 0 { *t } else { t + Complex64::new(0.3, -0.1) })
            .collect();
        let out = kalman_column(&noisy, a, 1.0, 0.0);
        for (t, o) in truth.iter().zip(&out) {
            assert!((t - o).norm() < 1e-12);
        }
    }
}
