//! One frame end to end: scenario, synthesis, sensing and CSI enhancement.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{Angle2D, ArrayConfig};
use crate::channel::{
    build_beamformers, calibrate_comm_power, calibrate_sensing_power, comm_channel, comm_gains,
    echo_gains, receive_beam, synthesize_comm, synthesize_echo, Beamformers, EchoModel,
    EchoRealization,
};
use crate::csi::{
    equalize_and_demodulate, estimate_sigma_p, kalman_enhance, ls_csi, InitialVariance,
};
use crate::error::Result;
use crate::fft_baseline::{fft_range_doppler, PeriodogramResult, Window};
use crate::linalg::CMatrix;
use crate::music::{
    beamform_and_erase, fold_angle, music_aoa, music_doppler, music_range, AoaResult, LineResult,
    MusicOptions, TargetEstimate,
};
use crate::qam::{generate_preamble, generate_qam_symbols, Constellation};
use crate::scenario::{Fading, GeometryConfig, NoiseInterferenceConfig, Scenario, WaveformConfig};

/// Static system description shared by every trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub bs_array: ArrayConfig,
    pub mue_array: ArrayConfig,
    pub waveform: WaveformConfig,
    pub noise: NoiseInterferenceConfig,
    pub geometry: GeometryConfig,
    pub music: MusicOptions,
    pub fft_window: Window,
}

impl SystemConfig {
    /// 8x8 BS array, single-element MUE, reference numerology and geometry.
    pub fn reference() -> Self {
        let waveform = WaveformConfig::reference();
        let lambda = waveform.wavelength();
        Self {
            bs_array: ArrayConfig::half_wavelength(8, 8, lambda).expect("valid array"),
            mue_array: ArrayConfig::half_wavelength(1, 1, lambda).expect("valid array"),
            waveform,
            noise: NoiseInterferenceConfig::reference(),
            geometry: GeometryConfig::reference(),
            music: MusicOptions::default(),
            fft_window: Window::Rectangular,
        }
    }

    /// Switches the propagation speed and rescales wavelength-derived sizes.
    pub fn with_c(mut self, c: f64) -> Self {
        let old = self.waveform.wavelength();
        self.waveform.c = c;
        let new = self.waveform.wavelength();
        for a in [&mut self.bs_array, &mut self.mue_array] {
            a.spacing *= new / old;
            a.wavelength = new;
        }
        self
    }
}

/// Truth of the line-of-sight target as seen by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    /// Folded onto the searched half space.
    pub angle: Angle2D,
    pub range: f64,
    pub distance: f64,
    pub doppler: f64,
    pub velocity: f64,
}

impl TargetTruth {
    pub fn los(scenario: &Scenario, wf: &WaveformConfig) -> Self {
        let p = scenario.los();
        let lambda = wf.wavelength();
        Self {
            angle: fold_angle(p.aoa_tx.azimuth, p.aoa_tx.elevation),
            range: p.echo_range(),
            distance: p.d1,
            doppler: p.echo_doppler(lambda),
            velocity: p.v1,
        }
    }
}

/// A synthesized sensing frame.
#[derive(Debug, Clone)]
pub struct SensingFrame {
    pub scenario: Scenario,
    pub beams: Beamformers,
    pub model: EchoModel,
    pub echo: EchoRealization,
    pub truth: TargetTruth,
}

/// Draws the frame for a given scenario at the target sensing SINR.
pub fn sensing_frame<R: Rng + ?Sized>(
    sys: &SystemConfig,
    scenario: Scenario,
    fading: &Fading,
    sinr_db: f64,
    symbol_order: Option<usize>,
    rng: &mut R,
) -> Result<SensingFrame> {
    let wf = &sys.waveform;
    let beams = build_beamformers(&scenario, &sys.bs_array, &sys.mue_array);
    let gains = echo_gains(&scenario, wf, &beams, fading);
    let p_t = calibrate_sensing_power(&gains, &sys.noise, sinr_db)?;
    let model = EchoModel::new(&scenario, &sys.bs_array, wf, gains);
    let symbols = match symbol_order {
        Some(order) => generate_qam_symbols(&Constellation::new(order)?, wf.subcarriers, wf.symbols, rng).0,
        None => generate_preamble(wf.subcarriers, wf.symbols),
    };
    let echo = synthesize_echo(&model, &symbols, p_t, &sys.noise, rng);
    let truth = TargetTruth::los(&scenario, wf);
    Ok(SensingFrame {
        scenario,
        beams,
        model,
        echo,
        truth,
    })
}

/// Range and Doppler processing of one receive beam.
#[derive(Debug, Clone)]
pub struct BeamResult {
    pub angle: Angle2D,
    pub erased: CMatrix,
    pub range: LineResult,
    pub doppler: LineResult,
    pub fft: PeriodogramResult,
}

impl BeamResult {
    /// Range estimate whose one-way delay best matches the phase slope of a
    /// channel estimate across subcarriers.
    pub fn range_matching_csi(&self, csi: &CMatrix, delta_f: f64, c: f64) -> Option<f64> {
        self.range
            .estimates
            .iter()
            .map(|e| (e.value, delay_fit(csi, delta_f, e.value / (2.0 * c))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(r, _)| r)
    }

    pub fn target_estimates(&self, wavelength: f64) -> Vec<TargetEstimate> {
        self.range
            .estimates
            .iter()
            .zip(&self.doppler.estimates)
            .map(|(r, f)| TargetEstimate::new(self.angle, r.value, f.value, wavelength))
            .collect()
    }
}

/// Beamforms towards `angle`, erases the symbols and runs both range-Doppler estimators.
pub fn process_beam(sys: &SystemConfig, y_s: &CMatrix, symbols: &CMatrix, angle: Angle2D) -> Result<BeamResult> {
    let w = receive_beam(&sys.bs_array, &angle);
    let erased = beamform_and_erase(y_s, w.as_slice(), symbols)?;
    let wf = &sys.waveform;
    let range = music_range(&erased, &wf.range_ramp(), &sys.music)?;
    let count = range.decomposition.source_count;
    let doppler = music_doppler(&erased, &wf.doppler_ramp(), count, &sys.music)?;
    let fft = fft_range_doppler(&erased, wf, 1, sys.fft_window, count);
    Ok(BeamResult {
        angle,
        erased,
        range,
        doppler,
        fft,
    })
}

/// `sum_m |sum_n exp(j 2 pi n delta_f tau) h[n, m]|^2`.
pub fn delay_fit(h: &CMatrix, delta_f: f64, tau: f64) -> f64 {
    let rot: Vec<Complex64> = (0..h.nrows())
        .map(|n| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * n as f64 * delta_f * tau))
        .collect();
    h.column_iter()
        .map(|col| {
            col.iter()
                .zip(&rot)
                .map(|(v, r)| v * r)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum()
}

/// The angle estimate closest to `reference`.
pub fn nearest_angle(aoa: &AoaResult, reference: &Angle2D) -> Option<Angle2D> {
    aoa.estimates
        .iter()
        .map(|e| e.value)
        .min_by(|a, b| a.separation(reference).total_cmp(&b.separation(reference)))
}

fn circular_error(x: f64, truth: f64, period: f64) -> f64 {
    let d = (x - truth).rem_euclid(period);
    if d > period / 2.0 {
        d - period
    } else {
        d
    }
}

/// Squared errors of one trial for the line-of-sight target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingErrors {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub velocity: f64,
    pub location: f64,
    pub fft_distance: f64,
    pub fft_velocity: f64,
    /// Number of angle estimates and range sources found.
    pub angle_sources: usize,
    pub range_sources: usize,
}

/// Full MUSIC and FFT sensing of the line-of-sight target in one frame.
pub fn sense_los(sys: &SystemConfig, frame: &SensingFrame) -> Result<(SensingErrors, AoaResult, BeamResult)> {
    let aoa = music_aoa(&frame.echo.y, &sys.bs_array, &sys.music)?;
    let truth = &frame.truth;
    let angle = nearest_angle(&aoa, &truth.angle).unwrap_or(truth.angle);
    let beam = process_beam(sys, &frame.echo.y, &frame.echo.symbols, angle)?;
    let wf = &sys.waveform;
    let range_period = wf.range_ramp().period();
    let doppler_period = wf.doppler_ramp().period();
    let range_err = beam
        .range
        .estimates
        .iter()
        .map(|e| circular_error(e.value, truth.range, range_period))
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(f64::NAN);
    let doppler_err = beam
        .doppler
        .estimates
        .iter()
        .map(|e| circular_error(e.value, truth.doppler, doppler_period))
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(f64::NAN);
    let lambda = wf.wavelength();
    let dd = range_err / 2.0;
    let dv = lambda * doppler_err / 2.0;
    let az_err = crate::array::wrap_angle(angle.azimuth - truth.angle.azimuth);
    let el_err = angle.elevation - truth.angle.elevation;
    let est_loc = crate::music::location_local(truth.distance + dd, &angle);
    let true_loc = crate::music::location_local(truth.distance, &truth.angle);
    let location = (0..3).map(|k| (est_loc[k] - true_loc[k]).powi(2)).sum();

    let dr_bin = wf.range_resolution();
    let dv_bin = wf.velocity_resolution();
    let v_span = dv_bin * wf.symbols as f64;
    let d_span = dr_bin * wf.subcarriers as f64;
    let (fft_d, fft_v) = beam
        .fft
        .peaks
        .iter()
        .map(|p| {
            (
                circular_error(p.distance, truth.distance, d_span),
                circular_error(p.velocity, truth.velocity, v_span),
            )
        })
        .min_by(|a, b| {
            let na = (a.0 / dr_bin).powi(2) + (a.1 / dv_bin).powi(2);
            let nb = (b.0 / dr_bin).powi(2) + (b.1 / dv_bin).powi(2);
            na.total_cmp(&nb)
        })
        .unwrap_or((f64::NAN, f64::NAN));
    let errors = SensingErrors {
        azimuth: az_err * az_err,
        elevation: el_err * el_err,
        distance: dd * dd,
        velocity: dv * dv,
        location,
        fft_distance: fft_d * fft_d,
        fft_velocity: fft_v * fft_v,
        angle_sources: aoa.decomposition.source_count,
        range_sources: beam.range.decomposition.source_count,
    };
    Ok((errors, aoa, beam))
}

/// Bit error rates of the four CSI cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerOutcome {
    /// Perfect CSI.
    pub a: f64,
    /// Raw LS CSI.
    pub b: f64,
    /// LS CSI refined with the MUSIC delay.
    pub c: f64,
    /// LS CSI refined with the FFT delay.
    pub d: f64,
    pub bits: u64,
    pub csi_mse_ls: f64,
    pub csi_mse_music: f64,
    pub csi_mse_fft: f64,
    pub tau_music: f64,
    pub tau_fft: f64,
    pub tau_true: f64,
}

/// One communication frame: preamble for LS CSI, a data block for
/// demodulation, and echo sensing of the data block.
pub fn ber_trial<R: Rng + ?Sized>(
    sys: &SystemConfig,
    scenario: &Scenario,
    fading: &Fading,
    comm_sinr_db: f64,
    data_order: usize,
    rng: &mut R,
) -> Result<BerOutcome> {
    let wf = &sys.waveform;
    let beams = build_beamformers(scenario, &sys.bs_array, &sys.mue_array);
    let cg = comm_gains(scenario, wf, &beams, fading);
    let p_t = calibrate_comm_power(&cg, &sys.noise, comm_sinr_db)?;
    let h = comm_channel(scenario, wf, &cg);
    let constellation = Constellation::new(data_order)?;
    let preamble = generate_preamble(wf.subcarriers, wf.symbols);
    let pre = synthesize_comm(&h, &preamble, p_t, &sys.noise, rng);
    let (data, labels) = generate_qam_symbols(&constellation, wf.subcarriers, wf.symbols, rng);
    let rx = synthesize_comm(&h, &data, p_t, &sys.noise, rng);

    let model = EchoModel::new(scenario, &sys.bs_array, wf, echo_gains(scenario, wf, &beams, fading));
    let echo = synthesize_echo(&model, &data, p_t, &sys.noise, rng);
    let aoa = music_aoa(&echo.y, &sys.bs_array, &sys.music)?;
    let los = scenario.los();
    let aligned = fold_angle(los.aoa_tx.azimuth, los.aoa_tx.elevation);
    let angle = nearest_angle(&aoa, &aligned).unwrap_or(aligned);
    let beam = process_beam(sys, &echo.y, &echo.symbols, angle)?;

    let obs_var = sys.noise.comm_floor() / p_t;
    let ls = ls_csi(&pre.y, &preamble, p_t, obs_var)?;
    let delta_f = wf.subcarrier_spacing;
    let tau_music = beam.range_matching_csi(&ls.values, delta_f, wf.c).unwrap_or(0.0) / (2.0 * wf.c);
    let tau_fft = beam
        .fft
        .peaks
        .iter()
        .map(|p| p.distance / wf.c)
        .max_by(|a, b| delay_fit(&ls.values, delta_f, *a).total_cmp(&delay_fit(&ls.values, delta_f, *b)))
        .unwrap_or(0.0);
    let sigma_p = estimate_sigma_p(&ls.values);
    let enhanced = |tau: f64| {
        kalman_enhance(&ls.values, tau, wf.subcarrier_spacing, sigma_p, InitialVariance::PerColumn)
    };
    let c_csi = enhanced(tau_music);
    let d_csi = enhanced(tau_fft);
    let demod = |csi: &CMatrix| equalize_and_demodulate(&rx.y, csi, p_t, &constellation, &labels);
    let ra = demod(&h);
    let rb = demod(&ls.values);
    let rc = demod(&c_csi.values);
    let rd = demod(&d_csi.values);
    let mse = |x: &CMatrix| crate::csi::csi_mse(x, &h);
    Ok(BerOutcome {
        a: ra.ber(),
        b: rb.ber(),
        c: rc.ber(),
        d: rd.ber(),
        bits: ra.bits,
        csi_mse_ls: mse(&ls.values),
        csi_mse_music: mse(&c_csi.values),
        csi_mse_fft: mse(&d_csi.values),
        tau_music,
        tau_fft,
        tau_true: los.comm_delay(wf.c),
    })
}

/// Noiseless erased matrix of the beam pointed at `angle`.
pub fn noiseless_erased(sys: &SystemConfig, model: &EchoModel, p_t: f64, angle: &Angle2D) -> CMatrix {
    let wf = &sys.waveform;
    let w = receive_beam(&sys.bs_array, angle);
    let amp = Complex64::new(p_t.sqrt(), 0.0);
    CMatrix::from_fn(wf.subcarriers, wf.symbols, |n, m| amp * w.dotc(&model.response(n, m)))
}
