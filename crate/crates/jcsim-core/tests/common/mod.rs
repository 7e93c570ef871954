#![allow(dead_code)]

use jcsim_core::array::{doppler_steering, range_steering, spatial_steering, Angle2D, ArrayConfig};
use jcsim_core::linalg::CMatrix;
use jcsim_core::pipeline::SystemConfig;
use jcsim_core::scenario::{generate_scenario, GeometryConfig, Scenario, WaveformConfig};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sys() -> SystemConfig {
    SystemConfig::reference()
}

pub fn los_only() -> GeometryConfig {
    GeometryConfig {
        scatterers: 0,
        ..GeometryConfig::reference()
    }
}

pub fn scenario(seed: u64) -> Scenario {
    generate_scenario(seed, &GeometryConfig::reference()).unwrap()
}

/// Noiseless erased matrix `sum_k g_k a_r(r_k) a_f(f_k)^T`.
pub fn erased_targets(wf: &WaveformConfig, targets: &[(f64, f64, Complex64)]) -> CMatrix {
    let mut h = CMatrix::zeros(wf.subcarriers, wf.symbols);
    for &(r, f, g) in targets {
        let ar = range_steering(wf.subcarriers, wf.subcarrier_spacing, wf.c, r).entries;
        let af = doppler_steering(wf.symbols, wf.symbol_duration(), f).entries;
        h += (ar * af.transpose()) * g;
    }
    h
}

/// Numerical rank with singular values above `rel * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rel: f64) -> usize {
    let s = m.clone().singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > rel * max).count()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Diagonal of the Fisher information for (azimuth, elevation, distance,
/// velocity) from central differences of the noiseless model.
pub fn fisher_diagonal(cfg: &ArrayConfig, wf: &WaveformConfig, gamma: f64, theta: [f64; 4]) -> [f64; 4] {
    let model = |t: [f64; 4]| -> Vec<Complex64> {
        let a = spatial_steering(cfg, &Angle2D::new(t[0], t[1])).entries;
        let r = range_steering(wf.subcarriers, wf.subcarrier_spacing, wf.c, 2.0 * t[2]).entries;
        let f = doppler_steering(wf.symbols, wf.symbol_duration(), 2.0 * t[3] / wf.wavelength()).entries;
        let mut out = Vec::with_capacity(a.len() * r.len() * f.len());
        for ai in a.iter() {
            for ri in r.iter() {
                for fi in f.iter() {
                    out.push(gamma.sqrt() * ai * ri * fi);
                }
            }
        }
        out
    };
    let steps = [1e-6, 1e-6, 1e-5, 1e-3];
    let mut fim = [0.0; 4];
    for i in 0..4 {
        let (mut up, mut dn) = (theta, theta);
        up[i] += steps[i];
        dn[i] -= steps[i];
        let (mu_up, mu_dn) = (model(up), model(dn));
        fim[i] = 2.0
            * mu_up
                .iter()
                .zip(&mu_dn)
                .map(|(u, d)| ((u - d) / (2.0 * steps[i])).norm_sqr())
                .sum::<f64>();
    }
    fim
}
