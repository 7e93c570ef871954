mod common;

use std::f64::consts::PI;

use jcsim_core::array::*;
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

const H: f64 = 1e-6;

fn rel_err(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn array() -> ArrayConfig {
    ArrayConfig::half_wavelength(8, 8, 0.3 / 63.0).unwrap()
}

proptest! {
    #[test]
    fn spatial_entries_unit_modulus(az in -PI..PI, el in 0.0..PI / 2.0, rows in 1usize..9, cols in 1usize..9) {
        let cfg = ArrayConfig::half_wavelength(rows, cols, 0.005).unwrap();
        let a = spatial_steering(&cfg, &Angle2D::new(az, el));
        prop_assert_eq!(a.len(), rows * cols);
        for z in a.entries.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_entries_unit_modulus(r in 0.0..600.0f64, f in -3e4..3e4f64) {
        for z in range_steering(256, 480e3, SPEED_OF_LIGHT, r).entries.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        for z in doppler_steering(64, 1.0 / 480e3, f).entries.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_column_array_is_even_in_azimuth(az in -PI..PI, el in 0.0..PI / 2.0, rows in 1usize..9) {
        let cfg = ArrayConfig::half_wavelength(rows, 1, 0.005).unwrap();
        let a = spatial_steering(&cfg, &Angle2D::new(az, el)).entries;
        let b = spatial_steering(&cfg, &Angle2D::new(-az, el)).entries;
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn ramp_is_periodic(x in 0.0..300.0f64) {
        let ramp = PhaseRamp::range(256, 480e3, SPEED_OF_LIGHT);
        let a = ramp.steering(x).entries;
        let b = ramp.steering(x + ramp.period()).entries;
        prop_assert!((a - b).norm() < 1e-8);
    }
}

#[test]
fn first_entry_is_one() {
    let a = spatial_steering(&array(), &Angle2D::new(0.3, 0.9));
    assert_eq!(a.kind, SteeringKind::Spatial);
    assert!((a.entries[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn row_major_stacking() {
    let cfg = ArrayConfig::half_wavelength(3, 5, 0.005).unwrap();
    let ang = Angle2D::new(0.4, 0.7);
    let a = spatial_steering(&cfg, &ang).entries;
    let [u, v, _] = ang.direction_cosines();
    let k = cfg.phase_scale();
    for p in 0..3 {
        for q in 0..5 {
            let expect = Complex64::from_polar(1.0, -k * (p as f64 * u + q as f64 * v));
            assert!((a[p * 5 + q] - expect).norm() < 1e-12);
        }
    }
}

#[test]
fn spatial_derivatives_match_finite_differences() {
    let cfg = array();
    let mut rng = common::rng(11);
    for _ in 0..100 {
        let az = rng.random_range(-PI..PI);
        let el = rng.random_range(0.05..1.5);
        let d = spatial_steering_derivs(&cfg, &Angle2D::new(az, el));
        let at = |a: f64, e: f64| spatial_steering(&cfg, &Angle2D::new(a, e)).entries;
        let fd_az = (at(az + H, el) - at(az - H, el)) / Complex64::new(2.0 * H, 0.0);
        let fd_el = (at(az, el + H) - at(az, el - H)) / Complex64::new(2.0 * H, 0.0);
        assert!(rel_err(&d.d_azimuth, &fd_az) < 1e-5);
        assert!(rel_err(&d.d_elevation, &fd_el) < 1e-5);
        let dd = |a: f64, e: f64| spatial_steering_derivs(&cfg, &Angle2D::new(a, e));
        let two_h = Complex64::new(2.0 * H, 0.0);
        let h_aa = (dd(az + H, el).d_azimuth - dd(az - H, el).d_azimuth) / two_h;
        let h_ae = (dd(az, el + H).d_azimuth - dd(az, el - H).d_azimuth) / two_h;
        let h_ea = (dd(az + H, el).d_elevation - dd(az - H, el).d_elevation) / two_h;
        let h_ee = (dd(az, el + H).d_elevation - dd(az, el - H).d_elevation) / two_h;
        assert!(rel_err(&d.hessian[0][0], &h_aa) < 1e-5);
        assert!(rel_err(&d.hessian[0][1], &h_ae) < 1e-5);
        assert!(rel_err(&d.hessian[1][0], &h_ea) < 1e-5);
        assert!(rel_err(&d.hessian[1][1], &h_ee) < 1e-5);
    }
}

#[test]
fn ramp_derivatives_match_finite_differences() {
    let range = PhaseRamp::range(256, 480e3, SPEED_OF_LIGHT);
    let doppler = PhaseRamp::doppler(64, 1.0 / 480e3);
    let mut rng = common::rng(12);
    for _ in 0..100 {
        let r = rng.random_range(0.0..range.period());
        let f = rng.random_range(-doppler.period() / 2.0..doppler.period() / 2.0);
        let [r1, r2, f1, f2] = range_doppler_steering_derivs(&range, &doppler, r, f);
        // step scaled to each parameter's natural unit
        let check = |ramp: &PhaseRamp, x: f64, d1: &DVector<Complex64>, d2: &DVector<Complex64>| {
            let h = H * ramp.period();
            let two_h = Complex64::new(2.0 * h, 0.0);
            let fd1 = (ramp.steering(x + h).entries - ramp.steering(x - h).entries) / two_h;
            let fd2 = (ramp.derivs(x + h).0 - ramp.derivs(x - h).0) / two_h;
            assert!(rel_err(d1, &fd1) < 1e-5);
            assert!(rel_err(d2, &fd2) < 1e-5);
        };
        check(&range, r, &r1, &r2);
        check(&doppler, f, &f1, &f2);
    }
}

#[test]
fn folded_angles_give_same_steering() {
    // the planar array cannot separate the two hemispheres
    let cfg = array();
    let a = spatial_steering(&cfg, &Angle2D::new(0.4, 0.3)).entries;
    let b = spatial_steering(&cfg, &Angle2D::new(0.4, PI - 0.3)).entries;
    assert!((a - b).norm() < 1e-12);
}
