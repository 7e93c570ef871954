//! Periodogram baseline: IDFT over subcarriers and DFT over symbols of the
//! erased channel matrix, with on-grid peak picking.
//!
//! The map is `|X|^2` with unnormalized transforms, so its total equals
//! `(p N_c)(p M_s)` times the energy of the input for padding factor `p`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::scenario::WaveformConfig;
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FftPeak {
    pub range_bin: usize,
    /// Signed Doppler bin in `[-M_s/2, M_s/2)`.
    pub doppler_bin: i64,
    /// Distance `range_bin * c / (2 N_c delta_f)`.
    pub distance: f64,
    pub velocity: f64,
    pub power: f64,
}

#[derive(Debug, Clone)]
pub struct PeriodogramResult {
    /// Power map, rows are range bins and columns Doppler bins (unshifted).
    pub map: DMatrix<f64>,
    pub pad: usize,
    /// Peaks at the unpadded bins, strongest first.
    pub peaks: Vec<FftPeak>,
    /// Range and velocity cuts through the strongest padded peak, dB.
    pub pslr_range_db: f64,
    pub pslr_velocity_db: f64,
}

/// Complex range-Doppler transform with zero padding.
pub fn range_doppler_transform(hbar: &CMatrix, pad: usize, window: Window) -> CMatrix {
    let (n_c, m_s) = hbar.shape();
    let pad = pad.max(1);
    let (nr, nv) = (n_c * pad, m_s * pad);
    let wr = window_weights(n_c, window);
    let wv = window_weights(m_s, window);
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(nr);
    let fft = planner.plan_fft_forward(nv);
    let mut x = CMatrix::zeros(nr, nv);
    for m in 0..m_s {
        let mut col: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); nr];
        for n in 0..n_c {
            col[n] = hbar[(n, m)] * wr[n] * wv[m];
        }
        ifft.process(&mut col);
        x.column_mut(m).copy_from_slice(&col);
    }
    let mut row = vec![Complex64::new(0.0, 0.0); nv];
    for k in 0..nr {
        for (j, r) in row.iter_mut().enumerate() {
            *r = x[(k, j)];
        }
        fft.process(&mut row);
        for (j, r) in row.iter().enumerate() {
            x[(k, j)] = *r;
        }
    }
    x
}

fn window_weights(n: usize, window: Window) -> Vec<f64> {
    match window {
        Window::Rectangular => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
    }
}

pub fn power_map(hbar: &CMatrix, pad: usize, window: Window) -> DMatrix<f64> {
    range_doppler_transform(hbar, pad, window).map(|z| z.norm_sqr())
}

/// Strict local maxima over the 8 circular neighbours, strongest first.
pub fn map_peaks(map: &DMatrix<f64>, count: usize) -> Vec<(usize, usize)> {
    let (r, c) = map.shape();
    let mut out = Vec::new();
    for i in 0..r {
        for j in 0..c {
            let v = map[(i, j)];
            let mut ok = true;
            'nb: for di in [r - 1, 0, 1] {
                for dj in [c - 1, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    if map[((i + di) % r, (j + dj) % c)] >= v {
                        ok = false;
                        break 'nb;
                    }
                }
            }
            if ok {
                out.push((i, j));
            }
        }
    }
    out.sort_by(|a, b| map[*b].total_cmp(&map[*a]));
    out.truncate(count);
    out
}

fn signed_bin(k: usize, n: usize) -> i64 {
    if k >= n.div_ceil(2) {
        k as i64 - n as i64
    } else {
        k as i64
    }
}

/// Runs the baseline and reports `count` peaks at the unpadded bins.
pub fn fft_range_doppler(
    hbar: &CMatrix,
    wf: &WaveformConfig,
    pad: usize,
    window: Window,
    count: usize,
) -> PeriodogramResult {
    let pad = pad.max(1);
    let base = power_map(hbar, 1, window);
    let dr = wf.range_resolution();
    let dv = wf.velocity_resolution();
    let m_s = hbar.ncols();
    let peaks = map_peaks(&base, count.max(1))
        .into_iter()
        .map(|(i, j)| {
            let kv = signed_bin(j, m_s);
            FftPeak {
                range_bin: i,
                doppler_bin: kv,
                distance: i as f64 * dr,
                velocity: kv as f64 * dv,
                power: base[(i, j)],
            }
        })
        .collect();
    let map = if pad == 1 { base } else { power_map(hbar, pad, window) };
    let (pslr_range_db, pslr_velocity_db) = match map_peaks(&map, 1).first() {
        Some(&(i, j)) => {
            let range_cut: Vec<f64> = map.column(j).iter().copied().collect();
            let vel_cut: Vec<f64> = map.row(i).iter().copied().collect();
            (pslr_db(&range_cut, i, &[]), pslr_db(&vel_cut, j, &[]))
        }
        None => (f64::NAN, f64::NAN),
    };
    PeriodogramResult {
        map,
        pad,
        peaks,
        pslr_range_db,
        pslr_velocity_db,
    }
}

/// Indices `[lo, hi]` (circular, may wrap) of the main lobe around `peak`,
/// extending to the first local minimum on each side.
pub fn main_lobe(profile: &[f64], peak: usize) -> (usize, usize) {
    let n = profile.len();
    let mut hi = peak;
    for _ in 0..n - 1 {
        let next = (hi + 1) % n;
        if profile[next] < profile[hi] {
            hi = next;
        } else {
            break;
        }
    }
    let mut lo = peak;
    for _ in 0..n - 1 {
        let prev = (lo + n - 1) % n;
        if profile[prev] < profile[lo] {
            lo = prev;
        } else {
            break;
        }
    }
    (lo, hi)
}

fn in_lobe(i: usize, lobe: (usize, usize)) -> bool {
    let (lo, hi) = lobe;
    if lo <= hi {
        i >= lo && i <= hi
    } else {
        i >= lo || i <= hi
    }
}

/// Peak-to-sidelobe ratio of a circular power profile in dB. Main lobes
/// around `peak` and around every index in `others` are excluded.
pub fn pslr_db(profile: &[f64], peak: usize, others: &[usize]) -> f64 {
    let mut lobes = vec![main_lobe(profile, peak)];
    lobes.extend(others.iter().map(|&o| main_lobe(profile, o)));
    let side = profile
        .iter()
        .enumerate()
        .filter(|(i, _)| !lobes.iter().any(|&l| in_lobe(*i, l)))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    10.0 * (profile[peak] / side).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobe_walks_to_minima() {
        let p = [1.0, 3.0, 9.0, 4.0, 0.5, 2.0, 0.2];
        assert_eq!(main_lobe(&p, 2), (6, 4));
        let db = pslr_db(&p, 2, &[]);
        assert!((db - 10.0 * (9.0f64 / 2.0).log10()).abs() < 1e-12);
    }

    #[test]
    fn signed_bins() {
        assert_eq!(signed_bin(0, 64), 0);
        assert_eq!(signed_bin(31, 64), 31);
        assert_eq!(signed_bin(32, 64), -32);
        assert_eq!(signed_bin(63, 64), -1);
    }
}
