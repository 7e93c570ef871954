//! First-order perturbation predictions of the MUSIC estimation error and the
//! closed-form Cramér–Rao bounds.
//!
//! For noiseless data `X = U_s S_s V_s^H` with noise projector
//! `P_0 = I - U_s U_s^H`, the error of a one-parameter MUSIC minimum at `x` is
//!
//! ```text
//! dx = Re[a'(x)^H P_0 W V_s S_s^-1 U_s^H a(x)] / Re[a'(x)^H P_0 a'(x)]
//! ```
//!
//! and the two-parameter angle error solves the 2x2 analogue. Expectations
//! are averages over explicit noise draws.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{spatial_steering, spatial_steering_derivs, Angle2D, ArrayConfig, PhaseRamp};
use crate::error::{Error, Result};
use crate::linalg::{gram_cols, gram_rows, hermitian_eigen, project_out, CMatrix, CVector};
use crate::qam::Constellation;
use crate::scenario::{complex_gaussian, WaveformConfig};

/// Relative eigenvalue level below which a noiseless component is treated as absent.
const RANK_TOL: f64 = 1e-12;

/// Thin SVD `X = U diag(s) V^H` restricted to the numerically nonzero part.
#[derive(Debug, Clone)]
pub struct SignalFactorization {
    pub u: CMatrix,
    pub singular: Vec<f64>,
    /// Right singular vectors; empty when only the left side was needed.
    pub v: CMatrix,
}

impl SignalFactorization {
    /// Full thin SVD through the smaller Gram matrix.
    pub fn new(x: &CMatrix) -> Self {
        let (n, k) = x.shape();
        if k <= n {
            let eig = hermitian_eigen(gram_cols(x, 1.0));
            let rank = numerical_rank(&eig.values);
            let singular: Vec<f64> = eig.values[..rank].iter().map(|v| v.sqrt()).collect();
            let v = eig.vectors.columns(0, rank).into_owned();
            let mut u = CMatrix::zeros(n, rank);
            for i in 0..rank {
                u.set_column(i, &(x * v.column(i) / Complex64::new(singular[i], 0.0)));
            }
            Self { u, singular, v }
        } else {
            let eig = hermitian_eigen(gram_rows(x, 1.0));
            let rank = numerical_rank(&eig.values);
            let singular: Vec<f64> = eig.values[..rank].iter().map(|v| v.sqrt()).collect();
            let u = eig.vectors.columns(0, rank).into_owned();
            let mut v = CMatrix::zeros(k, rank);
            for i in 0..rank {
                v.set_column(i, &(x.adjoint() * u.column(i) / Complex64::new(singular[i], 0.0)));
            }
            Self { u, singular, v }
        }
    }

    /// Left factor only, from `X X^H`.
    pub fn left_only(x: &CMatrix) -> Self {
        let eig = hermitian_eigen(gram_rows(x, 1.0));
        let rank = numerical_rank(&eig.values);
        Self {
            u: eig.vectors.columns(0, rank).into_owned(),
            singular: eig.values[..rank].iter().map(|v| v.sqrt()).collect(),
            v: CMatrix::zeros(0, 0),
        }
    }

    pub fn rank(&self) -> usize {
        self.singular.len()
    }

    /// Keeps the components a subspace estimator can separate from white
    /// noise of variance `noise_var`: covariance eigenvalue `s^2 / cols`
    /// above `noise_var * sqrt(rows / cols)`.
    pub fn detectable(mut self, rows: usize, cols: usize, noise_var: f64) -> Self {
        let level = noise_var * (rows as f64 / cols as f64).sqrt() * cols as f64;
        let keep = self.singular.iter().take_while(|&&s| s * s > level).count();
        self.singular.truncate(keep);
        self.u = self.u.columns(0, keep).into_owned();
        if self.v.ncols() > 0 {
            self.v = self.v.columns(0, keep).into_owned();
        }
        self
    }

    /// `P_0 a`.
    pub fn noise_part(&self, a: &[Complex64]) -> CVector {
        let mut out = CVector::zeros(a.len());
        project_out(&self.u, a, out.as_mut_slice());
        out
    }

    /// `S^-1 U^H a`.
    pub fn whitened_coeffs(&self, a: &CVector) -> CVector {
        let c = self.u.adjoint() * a;
        CVector::from_fn(c.len(), |i, _| c[i] / self.singular[i])
    }
}

fn numerical_rank(values: &[f64]) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    values.iter().take_while(|&&v| v > top * RANK_TOL).count()
}

/// Linear map from the noise matrix to the error of one range or Doppler minimum.
#[derive(Debug, Clone)]
pub struct RampPerturbation {
    /// `P_0 a'`.
    pub b: CVector,
    /// `V_s S^-1 U_s^H a`.
    pub q: CVector,
    pub denominator: f64,
    /// `||P_0 a||` at the true parameter.
    pub residual: f64,
}

impl RampPerturbation {
    /// `signal` is the noiseless `N x K` data matrix whose columns are
    /// snapshots of the ramp model; `x` is the true parameter.
    pub fn new(signal: &CMatrix, ramp: &PhaseRamp, x: f64) -> Result<Self> {
        Self::from_factorization(&SignalFactorization::new(signal), ramp, x)
    }

    pub fn from_factorization(f: &SignalFactorization, ramp: &PhaseRamp, x: f64) -> Result<Self> {
        let a = ramp.steering(x).entries;
        let (a1, _) = ramp.derivs(x);
        let b = f.noise_part(a1.as_slice());
        let denominator = b.norm_squared();
        if !(denominator > 0.0) {
            return Err(Error::Degenerate("zero curvature of the noise-subspace projection".into()));
        }
        let q = &f.v * f.whitened_coeffs(&a);
        let residual = f.noise_part(a.as_slice()).norm();
        Ok(Self {
            b,
            q,
            denominator,
            residual,
        })
    }

    /// Error for one noise matrix `W` (`N x K`).
    pub fn delta(&self, w: &CMatrix) -> f64 {
        let wq = w * &self.q;
        self.b.dotc(&wq).re / self.denominator
    }

    /// `E[delta^2]` for i.i.d. `CN(0, var)` noise entries.
    pub fn closed_form_mse(&self, var: f64) -> f64 {
        var * self.b.norm_squared() * self.q.norm_squared() / (2.0 * self.denominator.powi(2))
    }
}

/// Linear map from `N V_s` to the (azimuth, elevation) error.
#[derive(Debug, Clone)]
pub struct AoaPerturbation {
    pub b: [CVector; 2],
    /// `S^-1 U_s^H a`.
    pub q: CVector,
    pub hessian_inv: [[f64; 2]; 2],
    pub residual: f64,
    pub rank: usize,
}

impl AoaPerturbation {
    pub fn new(f: &SignalFactorization, cfg: &ArrayConfig, angle: &Angle2D) -> Result<Self> {
        let a = spatial_steering(cfg, angle).entries;
        let d = spatial_steering_derivs(cfg, angle);
        let b = [f.noise_part(d.d_azimuth.as_slice()), f.noise_part(d.d_elevation.as_slice())];
        let h = [
            [b[0].dotc(&b[0]).re, b[0].dotc(&b[1]).re],
            [b[1].dotc(&b[0]).re, b[1].dotc(&b[1]).re],
        ];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let scale = h[0][0].abs().max(h[1][1].abs());
        if !(det.abs() > 1e-12 * scale * scale) {
            return Err(Error::Degenerate("singular angle Hessian".into()));
        }
        let hessian_inv = [[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]];
        Ok(Self {
            q: f.whitened_coeffs(&a),
            residual: f.noise_part(a.as_slice()).norm(),
            rank: f.rank(),
            b,
            hessian_inv,
        })
    }

    /// Error for one draw of `Z = N V_s` (`PQ x rank`).
    pub fn delta(&self, z: &CMatrix) -> [f64; 2] {
        let zq = z * &self.q;
        let g = [self.b[0].dotc(&zq).re, self.b[1].dotc(&zq).re];
        let hi = &self.hessian_inv;
        [hi[0][0] * g[0] + hi[0][1] * g[1], hi[1][0] * g[0] + hi[1][1] * g[1]]
    }
}

/// First-order location error in the array frame from distance and angle errors.
pub fn location_perturbation(dd: f64, d_az: f64, d_el: f64, distance: f64, angle: &Angle2D) -> [f64; 3] {
    let (se, ce) = angle.elevation.sin_cos();
    let (sa, ca) = angle.azimuth.sin_cos();
    [
        dd * se * ca + distance * ce * ca * d_el - distance * se * sa * d_az,
        dd * se * sa + distance * ce * sa * d_el + distance * se * ca * d_az,
        dd * ce - distance * se * d_el,
    ]
}

/// Mean of `||dp||^2` over paired draws `(dd, d_az, d_el)`.
pub fn location_mse(samples: &[(f64, f64, f64)], distance: f64, angle: &Angle2D) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|&(dd, da, de)| {
            let p = location_perturbation(dd, da, de, distance, angle);
            p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
        })
        .sum();
    total / samples.len().max(1) as f64
}

/// Everything needed to evaluate the predictions for one target.
#[derive(Debug, Clone)]
pub struct PerturbationInputs {
    pub aoa: AoaPerturbation,
    pub range: RampPerturbation,
    pub doppler: RampPerturbation,
    /// `sigma_W^2 = P_IS + sigma_N^2`.
    pub noise_var: f64,
    pub wavelength: f64,
    pub distance: f64,
    pub angle: Angle2D,
    pub qam_order: usize,
    pub subcarriers: usize,
    pub symbols: usize,
}

impl PerturbationInputs {
    /// `spatial` is the noiseless `PQ x N_c M_s` snapshot matrix, `erased` the
    /// noiseless beamformed and erased `N_c x M_s` matrix of the target beam.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        spatial: &CMatrix,
        erased: &CMatrix,
        cfg: &ArrayConfig,
        wf: &WaveformConfig,
        angle: &Angle2D,
        range: f64,
        doppler: f64,
        noise_var: f64,
    ) -> Result<Self> {
        let (n_c, m_s) = erased.shape();
        let fs = SignalFactorization::left_only(spatial).detectable(spatial.nrows(), spatial.ncols(), noise_var);
        let fr = SignalFactorization::new(erased).detectable(n_c, m_s, noise_var);
        let ff = SignalFactorization::new(&erased.transpose()).detectable(m_s, n_c, noise_var);
        let aoa = AoaPerturbation::new(&fs, cfg, angle)?;
        let range_p = RampPerturbation::from_factorization(&fr, &wf.range_ramp(), range)?;
        let doppler_p = RampPerturbation::from_factorization(&ff, &wf.doppler_ramp(), doppler)?;
        Ok(Self {
            aoa,
            range: range_p,
            doppler: doppler_p,
            noise_var,
            wavelength: wf.wavelength(),
            distance: range / 2.0,
            angle: *angle,
            qam_order: wf.qam_order,
            subcarriers: wf.subcarriers,
            symbols: wf.symbols,
        })
    }

    /// Erased-domain noise `w^H N / d` for fresh symbols.
    pub fn draw_erased_noise<R: Rng + ?Sized>(&self, constellation: &Constellation, rng: &mut R) -> CMatrix {
        CMatrix::from_fn(self.subcarriers, self.symbols, |_, _| {
            let d = constellation.points[rng.random_range(0..constellation.order)];
            complex_gaussian(rng, self.noise_var) / d
        })
    }

    /// `N V_s`, i.i.d. because `V_s` has orthonormal columns.
    pub fn draw_projected_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> CMatrix {
        CMatrix::from_fn(rows, self.aoa.rank, |_, _| complex_gaussian(rng, self.noise_var))
    }
}

/// Per-draw errors: `(distance, doppler, azimuth, elevation)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationDraw {
    pub distance: f64,
    pub doppler: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

pub fn perturbation_draw<R: Rng + ?Sized>(
    inputs: &PerturbationInputs,
    constellation: &Constellation,
    array_len: usize,
    rng: &mut R,
) -> PerturbationDraw {
    let w = inputs.draw_erased_noise(constellation, rng);
    let dr = inputs.range.delta(&w);
    let df = inputs.doppler.delta(&w.transpose());
    let z = inputs.draw_projected_noise(array_len, rng);
    let [da, de] = inputs.aoa.delta(&z);
    PerturbationDraw {
        distance: dr / 2.0,
        doppler: df,
        azimuth: da,
        elevation: de,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crb {
    /// Distance, m^2.
    pub range: f64,
    /// (m/s)^2.
    pub velocity: f64,
    /// rad^2.
    pub azimuth: f64,
    /// rad^2.
    pub elevation: f64,
    /// Angle bounds are infinite because the angle weights vanish.
    pub angle_unbounded: bool,
}

impl Crb {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            range: self.range * factor,
            velocity: self.velocity * factor,
            azimuth: self.azimuth * factor,
            elevation: self.elevation * factor,
            angle_unbounded: self.angle_unbounded,
        }
    }
}

/// Closed-form bounds for one target at linear per-element SINR `gamma`.
pub fn crb(cfg: &ArrayConfig, wf: &WaveformConfig, angle: &Angle2D, gamma: f64) -> Result<Crb> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig("SINR must be positive".into()));
    }
    let n_c = wf.subcarriers as f64;
    let m_s = wf.symbols as f64;
    let pq = cfg.len() as f64;
    let lambda = wf.wavelength();
    let t = wf.symbol_duration();
    let sum_n2: f64 = (0..wf.subcarriers).map(|n| (n * n) as f64).sum();
    let sum_m2: f64 = (0..wf.symbols).map(|m| (m * m) as f64).sum();
    let range = wf.c.powi(2)
        / (32.0 * PI * PI * gamma * m_s * pq * sum_n2 * wf.subcarrier_spacing.powi(2));
    let velocity = lambda.powi(2) / (32.0 * PI * PI * gamma * n_c * pq * sum_m2 * t * t);
    let (se, ce) = angle.elevation.sin_cos();
    let (sa, ca) = angle.azimuth.sin_cos();
    let mut w_az = 0.0;
    let mut w_el = 0.0;
    for p in 0..cfg.rows {
        for q in 0..cfg.cols {
            let (p, q) = (p as f64, q as f64);
            w_az += (q * ca * se - p * sa * se).powi(2);
            w_el += (p * ca * ce + q * sa * ce).powi(2);
        }
    }
    let base = 8.0 * PI * PI * cfg.spacing.powi(2) * gamma * n_c * m_s / lambda.powi(2);
    let azimuth = 1.0 / (base * w_az);
    let elevation = 1.0 / (base * w_el);
    Ok(Crb {
        range,
        velocity,
        azimuth,
        elevation,
        angle_unbounded: !(azimuth.is_finite() && elevation.is_finite()),
    })
}

/// Predicted MSEs and bounds for one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub mse_azimuth: f64,
    pub mse_elevation: f64,
    /// Distance, m^2.
    pub mse_range: f64,
    pub mse_doppler: f64,
    pub mse_velocity: f64,
    pub mse_location: f64,
    pub crb: Crb,
    pub draws: usize,
}

/// Averages the perturbation errors over `draws` noise realizations.
pub fn theory_report<R: Rng + ?Sized>(
    inputs: &PerturbationInputs,
    cfg: &ArrayConfig,
    wf: &WaveformConfig,
    gamma: f64,
    draws: usize,
    rng: &mut R,
) -> Result<TheoryReport> {
    let constellation = Constellation::new(inputs.qam_order)?;
    let samples: Vec<PerturbationDraw> = (0..draws)
        .map(|_| perturbation_draw(inputs, &constellation, cfg.len(), rng))
        .collect();
    Ok(summarize(inputs, &samples, crb(cfg, wf, &inputs.angle, gamma)?))
}

pub fn summarize(inputs: &PerturbationInputs, samples: &[PerturbationDraw], bound: Crb) -> TheoryReport {
    let n = samples.len().max(1) as f64;
    let mean = |f: &dyn Fn(&PerturbationDraw) -> f64| samples.iter().map(f).sum::<f64>() / n;
    let mse_doppler = mean(&|s| s.doppler * s.doppler);
    let loc: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|s| (s.distance, s.azimuth, s.elevation))
        .collect();
    TheoryReport {
        mse_azimuth: mean(&|s| s.azimuth * s.azimuth),
        mse_elevation: mean(&|s| s.elevation * s.elevation),
        mse_range: mean(&|s| s.distance * s.distance),
        mse_doppler,
        mse_velocity: velocity_mse_from_doppler(mse_doppler, inputs.wavelength),
        mse_location: location_mse(&loc, inputs.distance, &inputs.angle),
        crb: bound,
        draws: samples.len(),
    }
}

/// `v = lambda f / 2`, so velocity errors scale by `(lambda / 2)^2`.
pub fn velocity_mse_from_doppler(mse_doppler: f64, wavelength: f64) -> f64 {
    (wavelength / 2.0).powi(2) * mse_doppler
}
