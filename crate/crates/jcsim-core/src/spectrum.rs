//! Normalized range and velocity spectra of one frame, with their PSLRs.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fft_baseline::{map_peaks, power_map, pslr_db};
use crate::music::ramp_spectrum;
use crate::pipeline::{sense_los, BeamResult, SensingFrame, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Distance in meters.
    Range,
    /// Radial velocity in m/s.
    Velocity,
}

/// One spectrum cut normalized to 0 dB at its peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCut {
    pub axis: Axis,
    pub estimator: String,
    pub x: Vec<f64>,
    pub level_db: Vec<f64>,
    pub pslr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSnapshot {
    pub cuts: Vec<SpectrumCut>,
}

impl SpectrumSnapshot {
    pub fn cut(&self, estimator: &str, axis: Axis) -> Option<&SpectrumCut> {
        self.cuts.iter().find(|c| c.estimator == estimator && c.axis == axis)
    }
}

fn normalized_db(profile: &[f64]) -> Vec<f64> {
    let peak = profile.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
    profile.iter().map(|v| 10.0 * (v / peak).log10()).collect()
}

fn argmax(profile: &[f64]) -> usize {
    profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Spectra in the beam of the line-of-sight target.
pub fn spectrum_snapshot(
    sys: &SystemConfig,
    frame: &SensingFrame,
    oversample: usize,
    fft_pad: usize,
) -> Result<SpectrumSnapshot> {
    let (_, _, beam) = sense_los(sys, frame)?;
    Ok(beam_spectra(sys, &beam, oversample, fft_pad))
}

/// MUSIC spectra sampled `oversample` times per resolution cell over the
/// whole unambiguous span, and FFT cuts with `fft_pad` zero padding. The
/// sidelobe is the largest value outside the main lobe of the global peak.
pub fn beam_spectra(sys: &SystemConfig, beam: &BeamResult, oversample: usize, fft_pad: usize) -> SpectrumSnapshot {
    let wf = &sys.waveform;
    let lambda = wf.wavelength();
    let oversample = oversample.max(1);
    let mut cuts = Vec::with_capacity(4);

    for (axis, ramp, line, to_x) in [
        (
            Axis::Range,
            wf.range_ramp(),
            &beam.range,
            Box::new(|r: f64| r / 2.0) as Box<dyn Fn(f64) -> f64>,
        ),
        (
            Axis::Velocity,
            wf.doppler_ramp(),
            &beam.doppler,
            Box::new(move |f: f64| lambda * f / 2.0) as Box<dyn Fn(f64) -> f64>,
        ),
    ] {
        let period = ramp.period();
        let count = ramp.len * oversample;
        let start = if axis == Axis::Velocity { -period / 2.0 } else { 0.0 };
        let params: Vec<f64> = (0..count).map(|i| start + period * i as f64 / count as f64).collect();
        let profile = ramp_spectrum(&ramp, &line.decomposition, &params);
        let peak = argmax(&profile);
        cuts.push(SpectrumCut {
            axis,
            estimator: "music".into(),
            x: params.iter().map(|&p| to_x(p)).collect(),
            level_db: normalized_db(&profile),
            pslr_db: pslr_db(&profile, peak, &[]),
        });
    }

    let pad = fft_pad.max(1);
    let map = power_map(&beam.erased, pad, sys.fft_window);
    let (rows, cols) = map.shape();
    if let Some(&(pi, pj)) = map_peaks(&map, 1).first() {
        let dr = wf.range_resolution() / pad as f64;
        let dv = wf.velocity_resolution() / pad as f64;
        let range_cut: Vec<f64> = map.column(pj).iter().copied().collect();
        let vel_cut: Vec<f64> = map.row(pi).iter().copied().collect();
        let signed = |j: usize| if j >= cols.div_ceil(2) { j as f64 - cols as f64 } else { j as f64 };
        cuts.push(SpectrumCut {
            axis: Axis::Range,
            estimator: "fft".into(),
            x: (0..rows).map(|i| i as f64 * dr).collect(),
            level_db: normalized_db(&range_cut),
            pslr_db: pslr_db(&range_cut, pi, &[]),
        });
        cuts.push(SpectrumCut {
            axis: Axis::Velocity,
            estimator: "fft".into(),
            x: (0..cols).map(|j| signed(j) * dv).collect(),
            level_db: normalized_db(&vel_cut),
            pslr_db: pslr_db(&vel_cut, pj, &[]),
        });
    }
    SpectrumSnapshot { cuts }
}
