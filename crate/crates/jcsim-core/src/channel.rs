//! Beamformers, transmit power calibration and received-signal synthesis.
//!
//! Echo snapshots are stored as a `PQ x (N_c M_s)` matrix whose column
//! `n + m N_c` holds subcarrier `n` of symbol `m`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::array::{spatial_steering, Angle2D, ArrayConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::scenario::{complex_gaussian, db_to_linear, Fading, NoiseInterferenceConfig, Scenario, WaveformConfig};

/// Unit-norm LS transmit beam towards `angle`: the normalized pseudo-inverse
/// of `a^T`, i.e. `conj(a) / sqrt(PQ)`.
pub fn transmit_beam(cfg: &ArrayConfig, angle: &Angle2D) -> CVector {
    let a = spatial_steering(cfg, angle).entries;
    let s = (cfg.len() as f64).sqrt();
    a.map(|z| z.conj() / s)
}

/// Unit-norm LS receive beam `a / sqrt(PQ)`, applied as `w^H y`.
pub fn receive_beam(cfg: &ArrayConfig, angle: &Angle2D) -> CVector {
    let a = spatial_steering(cfg, angle).entries;
    let s = (cfg.len() as f64).sqrt();
    a / Complex64::new(s, 0.0)
}

/// Transmit gain `a^T(p) w`.
pub fn transmit_gain(cfg: &ArrayConfig, w: &CVector, angle: &Angle2D) -> Complex64 {
    let a = spatial_steering(cfg, angle).entries;
    a.iter().zip(w.iter()).map(|(x, y)| x * y).sum()
}

/// Receive gain `w^H a(p)`.
pub fn receive_gain(cfg: &ArrayConfig, w: &CVector, angle: &Angle2D) -> Complex64 {
    let a = spatial_steering(cfg, angle).entries;
    w.dotc(&a)
}

#[derive(Debug, Clone)]
pub struct Beamformers {
    /// BS transmit beam.
    pub tx: CVector,
    /// MUE receive beam.
    pub rx: CVector,
    /// BS receive beams, one per sensing direction.
    pub sensing: Vec<CVector>,
    /// `chi_TX,l` for every path.
    pub chi: Vec<Complex64>,
    /// `varpi_RX,l` at the MUE for every path.
    pub varpi: Vec<Complex64>,
}

/// Beams aligned with the line of sight; sensing beams point at every path.
pub fn build_beamformers(scenario: &Scenario, bs: &ArrayConfig, mue: &ArrayConfig) -> Beamformers {
    let los = scenario.los();
    build_beamformers_towards(scenario, bs, mue, &los.aoa_tx, &los.aoa_rx_comm)
}

/// Beams aligned with given departure and arrival directions.
pub fn build_beamformers_towards(
    scenario: &Scenario,
    bs: &ArrayConfig,
    mue: &ArrayConfig,
    tx_angle: &Angle2D,
    rx_angle: &Angle2D,
) -> Beamformers {
    let tx = transmit_beam(bs, tx_angle);
    let rx = receive_beam(mue, rx_angle);
    let chi = scenario
        .paths
        .iter()
        .map(|p| transmit_gain(bs, &tx, &p.aoa_tx))
        .collect();
    let varpi = scenario
        .paths
        .iter()
        .map(|p| receive_gain(mue, &rx, &p.aoa_rx_comm))
        .collect();
    let sensing = scenario
        .paths
        .iter()
        .map(|p| receive_beam(bs, &p.aoa_tx))
        .collect();
    Beamformers {
        tx,
        rx,
        sensing,
        chi,
        varpi,
    }
}

/// Per-element echo gain `h_S,l = b_S,l chi_TX,l` (without the Doppler and delay phases).
pub fn echo_gains(scenario: &Scenario, wf: &WaveformConfig, beams: &Beamformers, fading: &Fading) -> Vec<Complex64> {
    let lambda = wf.wavelength();
    scenario
        .paths
        .iter()
        .zip(&fading.beta_sense)
        .zip(&beams.chi)
        .map(|((p, beta), chi)| p.echo_path_loss(lambda).sqrt() * beta * chi)
        .collect()
}

/// Post-beamforming communication gain per path, `b_C,l varpi_l chi_l`.
pub fn comm_gains(scenario: &Scenario, wf: &WaveformConfig, beams: &Beamformers, fading: &Fading) -> Vec<Complex64> {
    let lambda = wf.wavelength();
    scenario
        .paths
        .iter()
        .enumerate()
        .map(|(l, p)| {
            let beta = if l == 0 { Complex64::new(1.0, 0.0) } else { fading.beta_comm[l] };
            p.comm_path_loss(lambda).sqrt() * beta * beams.varpi[l] * beams.chi[l]
        })
        .collect()
}

/// Inverts `gamma = P_t |h|^2 / floor` for `P_t`.
pub fn calibrate_power(gain_sq: f64, target_sinr_db: f64, floor: f64) -> Result<f64> {
    if !(gain_sq > 0.0) || !gain_sq.is_finite() {
        return Err(Error::ZeroPathGain);
    }
    Ok(db_to_linear(target_sinr_db) * floor / gain_sq)
}

/// Transmit power giving the target sensing SINR on the line-of-sight echo.
pub fn calibrate_sensing_power(
    echo_gains: &[Complex64],
    noise: &NoiseInterferenceConfig,
    target_db: f64,
) -> Result<f64> {
    calibrate_power(echo_gains[0].norm_sqr(), target_db, noise.sense_floor())
}

/// Transmit power giving the target communication SINR on the line of sight.
pub fn calibrate_comm_power(
    comm_gains: &[Complex64],
    noise: &NoiseInterferenceConfig,
    target_db: f64,
) -> Result<f64> {
    calibrate_power(comm_gains[0].norm_sqr(), target_db, noise.comm_floor())
}

/// Phase factors `exp(j 2 pi m T f)` and `exp(-j 2 pi n delta_f tau)`.
fn phasors(len: usize, step: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| Complex64::from_polar(1.0, step * i as f64))
        .collect()
}

/// Echo model parameters with everything that does not vary over the frame folded in.
#[derive(Debug, Clone)]
pub struct EchoModel {
    pub steering: Vec<CVector>,
    pub gains: Vec<Complex64>,
    pub doppler: Vec<Vec<Complex64>>,
    pub delay: Vec<Vec<Complex64>>,
}

impl EchoModel {
    pub fn new(
        scenario: &Scenario,
        bs: &ArrayConfig,
        wf: &WaveformConfig,
        gains: Vec<Complex64>,
    ) -> Self {
        let lambda = wf.wavelength();
        let t = wf.symbol_duration();
        let steering = scenario
            .paths
            .iter()
            .map(|p| spatial_steering(bs, &p.aoa_tx).entries)
            .collect();
        let doppler = scenario
            .paths
            .iter()
            .map(|p| phasors(wf.symbols, 2.0 * PI * t * p.echo_doppler(lambda)))
            .collect();
        let delay = scenario
            .paths
            .iter()
            .map(|p| phasors(wf.subcarriers, -2.0 * PI * wf.subcarrier_spacing * p.echo_delay(wf.c)))
            .collect();
        Self {
            steering,
            gains,
            doppler,
            delay,
        }
    }

    /// `H_S,n,m w_TX`: the per-element echo response of one resource element.
    pub fn response(&self, n: usize, m: usize) -> CVector {
        let mut out = CVector::zeros(self.steering[0].len());
        self.accumulate(n, m, Complex64::new(1.0, 0.0), out.as_mut_slice());
        out
    }

    fn accumulate(&self, n: usize, m: usize, scale: Complex64, out: &mut [Complex64]) {
        for l in 0..self.steering.len() {
            let c = scale * self.gains[l] * self.doppler[l][m] * self.delay[l][n];
            for (o, a) in out.iter_mut().zip(self.steering[l].iter()) {
                *o += c * a;
            }
        }
    }

    /// Noiseless snapshots `sqrt(P_t) d_{n,m} H_S,n,m w_TX`.
    pub fn signal(&self, symbols: &CMatrix, p_t: f64) -> CMatrix {
        let (n_c, m_s) = symbols.shape();
        let rows = self.steering[0].len();
        let amp = p_t.sqrt();
        let mut y = CMatrix::zeros(rows, n_c * m_s);
        for m in 0..m_s {
            for n in 0..n_c {
                let mut col = y.column_mut(n + m * n_c);
                self.accumulate(n, m, amp * symbols[(n, m)], col.as_mut_slice());
            }
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct EchoRealization {
    pub symbols: CMatrix,
    /// Received snapshots.
    pub y: CMatrix,
    /// Noise plus interference; `y == signal + impairment` entrywise.
    pub impairment: CMatrix,
    pub p_t: f64,
}

/// Independent complex Gaussian noise and interference samples.
pub fn draw_noise_interference<R: Rng + ?Sized>(
    count: usize,
    noise_power: f64,
    interference_power: f64,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut noise = Vec::with_capacity(count);
    let mut interf = Vec::with_capacity(count);
    for _ in 0..count {
        noise.push(complex_gaussian(rng, noise_power));
        interf.push(complex_gaussian(rng, interference_power));
    }
    (noise, interf)
}

fn impairment_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    noise_power: f64,
    interference_power: f64,
    rng: &mut R,
) -> CMatrix {
    let (noise, interf) = draw_noise_interference(rows * cols, noise_power, interference_power, rng);
    CMatrix::from_iterator(rows, cols, noise.iter().zip(&interf).map(|(a, b)| a + b))
}

/// Echo snapshots `Y_S = A_S S + N` for the given symbols.
pub fn synthesize_echo<R: Rng + ?Sized>(
    model: &EchoModel,
    symbols: &CMatrix,
    p_t: f64,
    noise: &NoiseInterferenceConfig,
    rng: &mut R,
) -> EchoRealization {
    let signal = model.signal(symbols, p_t);
    let impairment = impairment_matrix(
        signal.nrows(),
        signal.ncols(),
        noise.noise_power,
        noise.interference_sense(),
        rng,
    );
    let y = &signal + &impairment;
    EchoRealization {
        symbols: symbols.clone(),
        y,
        impairment,
        p_t,
    }
}

/// Post-beamforming communication channel `h_C[n, m]`.
pub fn comm_channel(scenario: &Scenario, wf: &WaveformConfig, gains: &[Complex64]) -> CMatrix {
    let lambda = wf.wavelength();
    let t = wf.symbol_duration();
    let dopp: Vec<Vec<Complex64>> = scenario
        .paths
        .iter()
        .map(|p| phasors(wf.symbols, 2.0 * PI * t * p.comm_doppler(lambda)))
        .collect();
    let delay: Vec<Vec<Complex64>> = scenario
        .paths
        .iter()
        .map(|p| phasors(wf.subcarriers, -2.0 * PI * wf.subcarrier_spacing * p.comm_delay(wf.c)))
        .collect();
    CMatrix::from_fn(wf.subcarriers, wf.symbols, |n, m| {
        (0..gains.len())
            .map(|l| gains[l] * dopp[l][m] * delay[l][n])
            .sum()
    })
}

#[derive(Debug, Clone)]
pub struct CommRealization {
    pub symbols: CMatrix,
    pub h: CMatrix,
    pub y: CMatrix,
    pub impairment: CMatrix,
    pub p_t: f64,
}

/// `y_C = sqrt(P_t) h_C d + w` at the MUE.
pub fn synthesize_comm<R: Rng + ?Sized>(
    h: &CMatrix,
    symbols: &CMatrix,
    p_t: f64,
    noise: &NoiseInterferenceConfig,
    rng: &mut R,
) -> CommRealization {
    let (n_c, m_s) = h.shape();
    let impairment = impairment_matrix(n_c, m_s, noise.noise_power, noise.interference_comm(), rng);
    let amp = p_t.sqrt();
    let y = CMatrix::from_fn(n_c, m_s, |n, m| amp * h[(n, m)] * symbols[(n, m)] + impairment[(n, m)]);
    CommRealization {
        symbols: symbols.clone(),
        h: h.clone(),
        y,
        impairment,
        p_t,
    }
}

/// Echo and communication parts of one frame.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub echo: EchoRealization,
    pub comm: CommRealization,
}
