//! Steering vectors for the uniform planar array and for the OFDM range and
//! Doppler dimensions, with analytic first and second derivatives.
//!
//! The planar vector stacks element `(p, q)` at index `p * cols + q`
//! (row-major, `p` is the row index). Range and Doppler steering are both
//! uniform phase ramps `exp(j * slope * i * x)` and share [`PhaseRamp`].

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Rounded value used by the published numerology.
pub const LEGACY_SPEED_OF_LIGHT: f64 = 3.0e8;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Direction as (azimuth, elevation) in radians. Elevation is measured from
/// the array boresight, so `elevation = 0` is broadside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle2D {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angle2D {
    /// Builds an angle, wrapping azimuth into `[-pi, pi)`.
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self {
            azimuth: wrap_angle(azimuth),
            elevation,
        }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// Direction cosines `(u, v, w)` along the row axis, column axis and boresight.
    pub fn direction_cosines(&self) -> [f64; 3] {
        let (ss, cs) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [ss * ca, ss * sa, cs]
    }

    /// Inverse of [`Angle2D::direction_cosines`]; the input need not be normalized.
    pub fn from_direction(d: [f64; 3]) -> Self {
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let w = (d[2] / n).clamp(-1.0, 1.0);
        Self::new(d[1].atan2(d[0]), w.acos())
    }

    /// Great-circle separation in radians.
    pub fn separation(&self, other: &Angle2D) -> f64 {
        let a = self.direction_cosines();
        let b = other.direction_cosines();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        dot.clamp(-1.0, 1.0).acos()
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub wavelength: f64,
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("array must have at least one row and column".into()));
        }
        if !(spacing > 0.0 && wavelength > 0.0) {
            return Err(Error::InvalidConfig("element spacing and wavelength must be positive".into()));
        }
        Ok(Self {
            rows,
            cols,
            spacing,
            wavelength,
        })
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(rows: usize, cols: usize, wavelength: f64) -> Result<Self> {
        Self::new(rows, cols, wavelength / 2.0, wavelength)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `2 pi d_a / lambda`.
    pub fn phase_scale(&self) -> f64 {
        2.0 * PI * self.spacing / self.wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteeringKind {
    Spatial,
    Range,
    Doppler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: DVector<Complex64>,
    pub kind: SteeringKind,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Element phase `psi` with `a = exp(j psi)` and its partials in (azimuth, elevation).
#[derive(Debug, Clone, Copy)]
struct PhaseTerms {
    psi: f64,
    d_az: f64,
    d_el: f64,
    d_az_az: f64,
    d_az_el: f64,
    d_el_el: f64,
}

fn element_phase(cfg: &ArrayConfig, p: usize, q: usize, angle: &Angle2D) -> PhaseTerms {
    let k = cfg.phase_scale();
    let (pf, qf) = (p as f64, q as f64);
    let (ss, cs) = angle.elevation.sin_cos();
    let (sa, ca) = angle.azimuth.sin_cos();
    PhaseTerms {
        psi: -k * (pf * ca * ss + qf * sa * ss),
        d_az: -k * (-pf * sa * ss + qf * ca * ss),
        d_el: -k * (pf * ca * cs + qf * sa * cs),
        d_az_az: k * (pf * ca * ss + qf * sa * ss),
        d_az_el: -k * (-pf * sa * cs + qf * ca * cs),
        d_el_el: k * (pf * ca * ss + qf * sa * ss),
    }
}

/// Planar steering vector `a(p)`.
pub fn spatial_steering(cfg: &ArrayConfig, angle: &Angle2D) -> SteeringVector {
    let [u, v, _] = angle.direction_cosines();
    let k = cfg.phase_scale();
    let row: Vec<Complex64> = (0..cfg.rows)
        .map(|p| Complex64::from_polar(1.0, -k * p as f64 * u))
        .collect();
    let col: Vec<Complex64> = (0..cfg.cols)
        .map(|q| Complex64::from_polar(1.0, -k * q as f64 * v))
        .collect();
    let entries = DVector::from_fn(cfg.len(), |i, _| row[i / cfg.cols] * col[i % cfg.cols]);
    SteeringVector {
        entries,
        kind: SteeringKind::Spatial,
    }
}

/// First and second partial derivatives of the planar steering vector.
#[derive(Debug, Clone)]
pub struct SpatialDerivatives {
    pub d_azimuth: DVector<Complex64>,
    pub d_elevation: DVector<Complex64>,
    /// Ordered `[[az az, az el], [el az, el el]]`.
    pub hessian: [[DVector<Complex64>; 2]; 2],
}

pub fn spatial_steering_derivs(cfg: &ArrayConfig, angle: &Angle2D) -> SpatialDerivatives {
    let n = cfg.len();
    let mut d_az = DVector::zeros(n);
    let mut d_el = DVector::zeros(n);
    let mut h_aa = DVector::zeros(n);
    let mut h_ae = DVector::zeros(n);
    let mut h_ee = DVector::zeros(n);
    for p in 0..cfg.rows {
        for q in 0..cfg.cols {
            let t = element_phase(cfg, p, q, angle);
            let a = Complex64::from_polar(1.0, t.psi);
            let i = p * cfg.cols + q;
            d_az[i] = J * t.d_az * a;
            d_el[i] = J * t.d_el * a;
            h_aa[i] = (J * t.d_az_az - t.d_az * t.d_az) * a;
            h_ae[i] = (J * t.d_az_el - t.d_az * t.d_el) * a;
            h_ee[i] = (J * t.d_el_el - t.d_el * t.d_el) * a;
        }
    }
    SpatialDerivatives {
        d_azimuth: d_az,
        d_elevation: d_el,
        hessian: [[h_aa, h_ae.clone()], [h_ae, h_ee]],
    }
}

/// Uniform phase ramp `a[i] = exp(j * slope * i * x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRamp {
    pub len: usize,
    pub slope: f64,
    pub kind: SteeringKind,
}

impl PhaseRamp {
    /// Range ramp over `n_c` subcarriers; `x` is the round-trip range in meters.
    pub fn range(n_c: usize, delta_f: f64, c: f64) -> Self {
        Self {
            len: n_c,
            slope: -2.0 * PI * delta_f / c,
            kind: SteeringKind::Range,
        }
    }

    /// Doppler ramp over `m_s` symbols of duration `t_sym`; `x` is in Hz.
    pub fn doppler(m_s: usize, t_sym: f64) -> Self {
        Self {
            len: m_s,
            slope: 2.0 * PI * t_sym,
            kind: SteeringKind::Doppler,
        }
    }

    /// Parameter span after which the ramp repeats.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.slope.abs()
    }

    pub fn steering(&self, x: f64) -> SteeringVector {
        let mut entries = DVector::zeros(self.len);
        self.fill(x, entries.as_mut_slice());
        SteeringVector {
            entries,
            kind: self.kind,
        }
    }

    /// Writes `a(x)` into `out` using a stable recurrence-free evaluation.
    pub fn fill(&self, x: f64, out: &mut [Complex64]) {
        let w = self.slope * x;
        for (i, o) in out.iter_mut().enumerate() {
            *o = Complex64::from_polar(1.0, w * i as f64);
        }
    }

    /// First and second derivatives with respect to `x`.
    pub fn derivs(&self, x: f64) -> (DVector<Complex64>, DVector<Complex64>) {
        let a = self.steering(x).entries;
        let d1 = DVector::from_fn(self.len, |i, _| J * (self.slope * i as f64) * a[i]);
        let d2 = DVector::from_fn(self.len, |i, _| {
            let w = self.slope * i as f64;
            -(w * w) * a[i]
        });
        (d1, d2)
    }
}

/// `a_r(r)[n] = exp(-j 2 pi n delta_f r / c)` with `r` the round-trip range.
pub fn range_steering(n_c: usize, delta_f: f64, c: f64, r: f64) -> SteeringVector {
    PhaseRamp::range(n_c, delta_f, c).steering(r)
}

/// `a_f(f)[m] = exp(j 2 pi m T f)`.
pub fn doppler_steering(m_s: usize, t_sym: f64, f: f64) -> SteeringVector {
    PhaseRamp::doppler(m_s, t_sym).steering(f)
}

/// `(a_r', a_r'', a_f', a_f'')` at range `r` and Doppler `f`.
pub fn range_doppler_steering_derivs(
    range: &PhaseRamp,
    doppler: &PhaseRamp,
    r: f64,
    f: f64,
) -> [DVector<Complex64>; 4] {
    let (r1, r2) = range.derivs(r);
    let (f1, f2) = doppler.derivs(f);
    [r1, r2, f1, f2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn direction_round_trip() {
        let a = Angle2D::new(-2.1, 1.2);
        let b = Angle2D::from_direction(a.direction_cosines());
        assert!((a.azimuth - b.azimuth).abs() < 1e-12);
        assert!((a.elevation - b.elevation).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(ArrayConfig::new(0, 2, 0.5, 1.0).is_err());
        assert!(ArrayConfig::new(2, 2, 0.0, 1.0).is_err());
        assert!(ArrayConfig::new(2, 2, 0.5, -1.0).is_err());
    }

    #[test]
    fn ramp_period() {
        let r = PhaseRamp::range(64, 480e3, SPEED_OF_LIGHT);
        assert!((r.period() - SPEED_OF_LIGHT / 480e3).abs() < 1e-6);
    }
}
