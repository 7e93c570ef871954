mod common;

use jcsim_core::array::{spatial_steering, Angle2D};
use jcsim_core::channel::*;
use jcsim_core::linalg::CMatrix;
use jcsim_core::qam::{generate_preamble, generate_qam_symbols, Constellation};
use jcsim_core::scenario::*;
use jcsim_core::Error;
use num_complex::Complex64;

fn mue_at(position: [f64; 3], velocity: [f64; 3], scatterers: Vec<Body>) -> jcsim_core::Result<Scenario> {
    let g = GeometryConfig::reference();
    Scenario::from_bodies(
        g.bs_pose(),
        Body { position, velocity },
        scatterers,
        g.reflect_var_sense,
        g.reflect_var_comm,
        g.min_scatterer_distance,
    )
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[test]
fn hand_geometry_distance() {
    let s = mue_at([100.0, 0.0, 2.0], [0.0; 3], vec![]).unwrap();
    let expect = (50.0f64 * 50.0 + 4.75 * 4.75 + 5.0 * 5.0).sqrt();
    assert!((s.los().d1 - expect).abs() < 1e-12);
    assert!(s.los().d2.is_none() && s.los().v2.is_none());
}

#[test]
fn boresight_static_mue_has_zero_velocity() {
    let pose = GeometryConfig::reference().bs_pose();
    let b = pose.axes[2];
    let p = [50.0 + 30.0 * b[0], 4.75 + 30.0 * b[1], 7.0 + 30.0 * b[2]];
    let s = mue_at(p, [0.0; 3], vec![]).unwrap();
    assert_eq!(s.los().v1, 0.0);
    assert!(s.los().aoa_tx.elevation.abs() < 1e-7);
    assert!((s.los().d1 - 30.0).abs() < 1e-9);
}

#[test]
fn moving_mue_closing_speed() {
    // MUE moving straight at the BS along the line of sight
    let p = [100.0, 0.0, 2.0];
    let los: [f64; 3] = [50.0 - 100.0, 4.75, 5.0];
    let n = (los[0] * los[0] + los[1] * los[1] + los[2] * los[2]).sqrt();
    let v = [7.0 * los[0] / n, 7.0 * los[1] / n, 7.0 * los[2] / n];
    let s = mue_at(p, v, vec![]).unwrap();
    assert!((s.los().v1 - 7.0).abs() < 1e-12);
}

#[test]
fn seeded_scenarios_replay() {
    let g = GeometryConfig::reference();
    assert_eq!(generate_scenario(42, &g).unwrap(), generate_scenario(42, &g).unwrap());
    assert_ne!(generate_scenario(42, &g).unwrap(), generate_scenario(43, &g).unwrap());
    let s = generate_scenario(42, &g).unwrap();
    assert_eq!(s.path_count(), g.scatterers + 1);
    for p in &s.paths[1..] {
        assert!(p.d1 >= g.min_scatterer_distance && p.d1 <= g.scatterer_radius);
    }
    let x = s.mue.position[0];
    assert!(x >= g.mue_x_range[0] && x <= g.mue_x_range[1]);
}

#[test]
fn rejects_scatterer_near_bs() {
    let near = Body {
        position: [50.5, 4.75, 7.0],
        velocity: [0.0; 3],
    };
    let err = mue_at([100.0, 0.0, 2.0], [0.0; 3], vec![near]).unwrap_err();
    assert!(matches!(err, Error::ScattererTooClose { index: 0, .. }));
}

#[test]
fn echo_is_twice_comm_for_los() {
    let wf = WaveformConfig::reference();
    for seed in 0..20 {
        let s = common::scenario(seed);
        let p = s.los();
        assert!((p.echo_delay(wf.c) - 2.0 * p.comm_delay(wf.c)).abs() < 1e-20);
        let lambda = wf.wavelength();
        assert!((p.echo_doppler(lambda) - 2.0 * p.comm_doppler(lambda)).abs() < 1e-9);
    }
}

#[test]
fn echo_arrival_equals_departure() {
    let sys = common::sys();
    let s = common::scenario(3);
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    let gains = echo_gains(&s, &sys.waveform, &beams, &Fading::rms(&s));
    let model = EchoModel::new(&s, &sys.bs_array, &sys.waveform, gains);
    for (l, p) in s.paths.iter().enumerate() {
        let a = spatial_steering(&sys.bs_array, &p.aoa_tx).entries;
        assert_eq!(model.steering[l], a);
        let w = &beams.sensing[l];
        assert!((receive_gain(&sys.bs_array, w, &p.aoa_tx).norm() - 8.0).abs() < 1e-12);
    }
}

#[test]
fn beamformer_norms_and_gains() {
    let sys = common::sys();
    let s = common::scenario(5);
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    assert!((beams.tx.norm() - 1.0).abs() < 1e-12);
    assert!((beams.rx.norm() - 1.0).abs() < 1e-12);
    assert_eq!(beams.rx.len(), 1);
    assert!((beams.rx[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    for w in &beams.sensing {
        assert!((w.norm() - 1.0).abs() < 1e-12);
    }
    assert!((beams.chi[0].norm() - 8.0).abs() < 1e-12);

    let boresight = Angle2D::new(0.0, 0.0);
    let w = transmit_beam(&sys.bs_array, &boresight);
    let aligned = transmit_gain(&sys.bs_array, &w, &boresight).norm();
    for az in [0.0, 1.0, 2.0, 3.0] {
        let off = Angle2D::new(az, 30f64.to_radians());
        assert!(transmit_gain(&sys.bs_array, &w, &off).norm() < aligned);
    }
}

#[test]
fn power_calibration() {
    let g = 3.7e-9;
    let p1 = calibrate_power(g, 3.0, 2.0).unwrap();
    let p2 = calibrate_power(g, 3.0 + db(2.0), 2.0).unwrap();
    assert!((p2 / p1 - 2.0).abs() < 1e-12);
    let p0 = calibrate_power(g, 0.0, 1e-11).unwrap();
    assert!((p0 - 1e-11 / g).abs() < 1e-12 * p0);
    assert!(matches!(calibrate_power(0.0, 0.0, 1.0), Err(Error::ZeroPathGain)));
}

#[test]
fn empirical_sinr_matches_target() {
    let sys = common::sys();
    let s = common::scenario(8);
    let fading = Fading::rms(&s);
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    let gains = echo_gains(&s, &sys.waveform, &beams, &fading);
    let target = 5.0;
    let p_t = calibrate_sensing_power(&gains, &sys.noise, target).unwrap();
    let mut rng = common::rng(9);
    let (n, i) = draw_noise_interference(1000 * 64, sys.noise.noise_power, sys.noise.interference_sense(), &mut rng);
    let floor = n.iter().zip(&i).map(|(a, b)| (a + b).norm_sqr()).sum::<f64>() / n.len() as f64;
    let measured = db(p_t * gains[0].norm_sqr() / floor);
    assert!((measured - target).abs() < 0.5, "{measured}");
}

#[test]
fn noiseless_single_path_is_rank_one() {
    let sys = common::sys();
    let s = generate_scenario(4, &common::los_only()).unwrap();
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    let model = EchoModel::new(&s, &sys.bs_array, &sys.waveform, echo_gains(&s, &sys.waveform, &beams, &Fading::rms(&s)));
    let wf = &sys.waveform;
    let sym = generate_qam_symbols(&Constellation::new(64).unwrap(), wf.subcarriers, 8, &mut common::rng(1)).0;
    let y = model.signal(&sym, 1.0);
    assert_eq!(common::numerical_rank(&y, 1e-9), 1);
    let a = spatial_steering(&sys.bs_array, &s.los().aoa_tx).entries;
    for col in y.column_iter().take(20) {
        let proj = &a * (a.dotc(&col) / Complex64::new(a.norm_squared(), 0.0));
        assert!((col - proj).norm() < 1e-9 * col.norm());
    }
}

#[test]
fn path_loss_laws() {
    let wf = WaveformConfig::reference();
    let lambda = wf.wavelength();
    let near = mue_at([100.0, 0.0, 2.0], [0.0; 3], vec![]).unwrap();
    // same direction, twice as far
    let dir = [50.0, -4.75, -5.0];
    let far = mue_at([50.0 + 2.0 * dir[0], 4.75 + 2.0 * dir[1], 7.0 + 2.0 * dir[2]], [0.0; 3], vec![]).unwrap();
    let echo = db(far.los().echo_path_loss(lambda) / near.los().echo_path_loss(lambda));
    let comm = db(far.los().comm_path_loss(lambda) / near.los().comm_path_loss(lambda));
    assert!((echo + 40.0 * 2f64.log10()).abs() < 1e-9 && (echo + 12.0).abs() < 0.05);
    assert!((comm + 20.0 * 2f64.log10()).abs() < 1e-9 && (comm + 6.0).abs() < 0.05);
}

#[test]
fn empirical_echo_power() {
    let sys = common::sys();
    let s = generate_scenario(6, &common::los_only()).unwrap();
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    let gains = echo_gains(&s, &sys.waveform, &beams, &Fading::rms(&s));
    let p_t = 2.5;
    let model = EchoModel::new(&s, &sys.bs_array, &sys.waveform, gains.clone());
    let wf = &sys.waveform;
    // 256 x 40 > 10^4 symbols
    let sym = generate_qam_symbols(&Constellation::new(64).unwrap(), wf.subcarriers, 40, &mut common::rng(2)).0;
    let y = model.signal(&sym, p_t);
    let power = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
    let expect = p_t * gains[0].norm_sqr();
    assert!((power / expect - 1.0).abs() < 0.03, "{}", power / expect);
}

#[test]
fn static_los_comm_has_constant_modulus() {
    let sys = common::sys();
    let mut g = common::los_only();
    g.mue_velocity = [0.0; 3];
    let s = generate_scenario(7, &g).unwrap();
    let wf = &sys.waveform;
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    let h = comm_channel(&s, wf, &comm_gains(&s, wf, &beams, &Fading::rms(&s)));
    let pre = generate_preamble(wf.subcarriers, wf.symbols);
    let quiet = NoiseInterferenceConfig {
        noise_power: 0.0,
        inr_comm_db: 0.0,
        inr_sense_db: 0.0,
    };
    let rx = synthesize_comm(&h, &pre, 3.0, &quiet, &mut common::rng(0));
    let m0 = rx.y[(0, 0)].norm();
    assert!(rx.y.iter().all(|z| (z.norm() - m0).abs() < 1e-12 * m0));
}

#[test]
fn comm_phase_slope() {
    let sys = common::sys();
    let s = generate_scenario(10, &common::los_only()).unwrap();
    let wf = &sys.waveform;
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    let h = comm_channel(&s, wf, &comm_gains(&s, wf, &beams, &Fading::rms(&s)));
    // least-squares slope of the unwrapped phase over subcarriers
    let mut phase = Vec::with_capacity(wf.subcarriers);
    let mut prev = 0.0;
    for n in 0..wf.subcarriers {
        let p = h[(n, 0)].arg();
        let mut u = p;
        if n > 0 {
            let d = jcsim_core::array::wrap_angle(p - prev);
            u = phase[n - 1] + d;
        }
        prev = p;
        phase.push(u);
    }
    let nf = wf.subcarriers as f64;
    let xm = (nf - 1.0) / 2.0;
    let ym = phase.iter().sum::<f64>() / nf;
    let sxy: f64 = phase.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
    let sxx: f64 = (0..wf.subcarriers).map(|i| (i as f64 - xm).powi(2)).sum();
    let slope = sxy / sxx;
    let expect = -2.0 * std::f64::consts::PI * wf.subcarrier_spacing * s.los().comm_delay(wf.c);
    assert!((slope / expect - 1.0).abs() < 1e-6, "{slope} vs {expect}");
}

#[test]
fn constellations() {
    let c = Constellation::new(4).unwrap();
    let s = 1.0 / 2f64.sqrt();
    for p in &c.points {
        assert!((p.re.abs() - s).abs() < 1e-15 && (p.im.abs() - s).abs() < 1e-15);
    }
    let c64 = Constellation::new(64).unwrap();
    let (sym, _) = generate_qam_symbols(&c64, 1000, 100, &mut common::rng(3));
    let power = sym.iter().map(|z| z.norm_sqr()).sum::<f64>() / sym.len() as f64;
    assert!((power - 1.0).abs() < 0.01, "{power}");
    assert_eq!(generate_preamble(256, 64), generate_preamble(256, 64));
    assert!(generate_preamble(16, 4).iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    assert!(Constellation::new(8).is_err());
}

#[test]
fn snapshot_bookkeeping() {
    let sys = common::sys();
    let s = common::scenario(12);
    let fading = Fading::draw(&s, &mut common::rng(4));
    let beams = build_beamformers(&s, &sys.bs_array, &sys.mue_array);
    let model = EchoModel::new(&s, &sys.bs_array, &sys.waveform, echo_gains(&s, &sys.waveform, &beams, &fading));
    let wf = &sys.waveform;
    let sym = generate_qam_symbols(&Constellation::new(4).unwrap(), wf.subcarriers, wf.symbols, &mut common::rng(5)).0;
    let echo = synthesize_echo(&model, &sym, 0.7, &sys.noise, &mut common::rng(6));
    let regenerated = model.signal(&echo.symbols, echo.p_t);
    assert!((&regenerated + &echo.impairment) == echo.y, "regenerated signal plus impairment differs from the snapshots");
    let diff: CMatrix = &echo.y - &regenerated - &echo.impairment;
    let peak = echo.y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(diff.iter().all(|z| z.norm() <= 4.0 * f64::EPSILON * peak));
}

#[test]
fn interference_to_noise_ratio() {
    let cfg = NoiseInterferenceConfig {
        noise_power: 2e-12,
        inr_comm_db: 7.0,
        inr_sense_db: -3.0,
    };
    let mut rng = common::rng(13);
    for inr in [cfg.inr_comm_db, cfg.inr_sense_db] {
        let (n, i) = draw_noise_interference(100_000, cfg.noise_power, cfg.noise_power * db_to_linear(inr), &mut rng);
        let pn = n.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let pi = i.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!((db(pi / pn) - inr).abs() < 0.2);
    }
    assert!((cfg.interference_comm() / cfg.noise_power - db_to_linear(7.0)).abs() < 1e-12);
}
