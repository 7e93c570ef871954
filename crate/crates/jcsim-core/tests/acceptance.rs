//! One PASS/FAIL line per acceptance criterion.
//!
//! `cargo test --release --test acceptance` runs everything; extra arguments
//! such as `C1 C7` select criteria. Set `JCSIM_ACCEPT_STRICT=1` to exit
//! nonzero when a criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use jcsim_core::array::*;
use jcsim_core::channel::EchoModel;
use jcsim_core::config::{CsiCase, Metric, SimConfig};
use jcsim_core::csi::{kalman_enhance, InitialVariance};
use jcsim_core::linalg::CMatrix;
use jcsim_core::music::{detect_source_count, doppler_decomposition, range_decomposition, spatial_decomposition};
use jcsim_core::par::Execution;
use jcsim_core::pipeline::BerOutcome;
use jcsim_core::qam::{generate_qam_symbols, Constellation};
use jcsim_core::scenario::{complex_gaussian, WaveformConfig};
use jcsim_core::sweep::*;
use jcsim_core::table::ResultTable;
use jcsim_core::theory::crb;
use num_complex::Complex64;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn value(table: &ResultTable, sinr: f64, metric: Metric, series: &str) -> f64 {
    table.get(sinr, metric, series).map_or(f64::NAN, |r| r.value)
}

fn c1() -> Verdict {
    let cfg = SimConfig {
        legacy_c: true,
        ..SimConfig::default()
    };
    let sys = cfg.system().unwrap();
    let h = RunHeader::new(&sys, 0, 0);
    let dr = format!("{:.2}", h.range_resolution);
    let dv = format!("{:.4}", h.velocity_resolution);
    verdict(
        dr == "1.22" && dv == "17.8571",
        format!("delta_r = {:.4} m ({dr}), delta_v = {dv} m/s", h.range_resolution),
    )
}

/// Default sweep grid, shared by the super-resolution and bound checks.
fn sensing_grid() -> (SimConfig, ResultTable) {
    let cfg = SimConfig::default();
    let table = sweep_mse(&cfg, Execution::default()).unwrap();
    (cfg, table)
}

fn c2(table: &ResultTable) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [0.0, 10.0] {
        let mr = value(table, s, Metric::RangeMse, "music");
        let mv = value(table, s, Metric::VelocityMse, "music");
        let fr = value(table, s, Metric::RangeMse, "fft");
        let fv = value(table, s, Metric::VelocityMse, "fft");
        pass &= mr < 1e-2 && mv < 1e-2 && (0.1..=3.0).contains(&fr) && (30.0..=320.0).contains(&fv);
        parts.push(format!("{s} dB: MUSIC {mr:.2e} m^2 {mv:.2e} (m/s)^2, FFT {fr:.3} m^2 {fv:.1} (m/s)^2"));
    }
    verdict(pass, parts.join("; "))
}

fn c3() -> Verdict {
    let mut cfg = SimConfig::default();
    cfg.sweep.sinr_db = vec![-20.0];
    cfg.sweep.trials = 20;
    cfg.sweep.metrics = vec![Metric::Pslr];
    let t = sweep_mse(&cfg, Execution::default()).unwrap();
    let p = |s: &str| value(&t, -20.0, Metric::Pslr, s);
    let (mr, mv, fr, fv) = (p("music_range"), p("music_velocity"), p("fft_range"), p("fft_velocity"));
    let fft_ok = |x: f64| (x - 10.0).abs() <= 4.0;
    verdict(
        mr >= 20.0 && mv >= 25.0 && fft_ok(fr) && fft_ok(fv),
        format!("mean over 20 frames: MUSIC range {mr:.1} dB, velocity {mv:.1} dB; FFT range {fr:.1} dB, velocity {fv:.1} dB"),
    )
}

fn c4() -> Verdict {
    let cfg = SimConfig::default();
    let sys = cfg.system().unwrap();
    let points = theory_points(&cfg, &sys, Execution::default()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for pt in &points {
        let r = db(pt.theory.mse_range / pt.simulated.distance);
        let v = db(pt.theory.mse_velocity / pt.simulated.velocity);
        pass &= r.abs() <= 3.0 && v.abs() <= 3.0;
        parts.push(format!("{} dB: range {r:+.2} dB, velocity {v:+.2} dB", pt.sinr_db));
    }
    verdict(pass, parts.join("; "))
}

fn c5(cfg: &SimConfig, table: &ResultTable) -> Verdict {
    let pairs = [
        (Metric::AoaMse, "music_azimuth", "crb_azimuth"),
        (Metric::AoaMse, "music_elevation", "crb_elevation"),
        (Metric::RangeMse, "music", "crb"),
        (Metric::VelocityMse, "music", "crb"),
    ];
    let mut checked = 0;
    let mut violations = Vec::new();
    for &s in &cfg.sweep.sinr_db {
        for (metric, sim, bound) in pairs {
            checked += 1;
            if value(table, s, metric, sim) < value(table, s, metric, bound) {
                violations.push(format!("{metric}/{sim} at {s} dB"));
            }
        }
    }

    let wf = WaveformConfig {
        subcarriers: 32,
        symbols: 16,
        ..cfg.system().unwrap().waveform
    };
    let arr = ArrayConfig::half_wavelength(4, 6, wf.wavelength()).unwrap();
    let ang = Angle2D::new(0.6, 0.9);
    let b = crb(&arr, &wf, &ang, 3.0).unwrap();
    let fim = common::fisher_diagonal(&arr, &wf, 3.0, [ang.azimuth, ang.elevation, 20.0, 15.0]);
    let worst = [(b.azimuth, fim[0]), (b.elevation, fim[1]), (b.range, fim[2]), (b.velocity, fim[3])]
        .iter()
        .map(|(bound, info)| (bound * info - 1.0).abs())
        .fold(0.0, f64::max);
    verdict(
        violations.len() * 20 <= checked && worst < 0.01,
        format!(
            "{} of {checked} points below the bound {violations:?}; Fisher oracle max rel err {worst:.1e}",
            violations.len()
        ),
    )
}

fn c6() -> Verdict {
    let cfg = SimConfig::default();
    let sys = cfg.system().unwrap();
    let points = ber_trials(&cfg, &sys, Execution::default()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (&s, trials) in cfg.sweep.comm_sinr_db.iter().zip(&points) {
        let m = |c| mean(trials.iter().map(|o: &BerOutcome| case_ber(o, c)));
        let med = |c| common::median(trials.iter().map(|o| case_ber(o, c)).collect());
        let (b, c, d) = (m(CsiCase::B), m(CsiCase::C), m(CsiCase::D));
        if s > 20.0 {
            pass &= c < b;
        }
        pass &= d > b;
        parts.push(format!(
            "{s} dB: mean B {b:.3e} C {c:.3e} D {d:.3e} (median B {:.3e} C {:.3e})",
            med(CsiCase::B),
            med(CsiCase::C)
        ));
    }
    verdict(pass, parts.join("; "))
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn c7() -> Verdict {
    let sys = common::sys();
    let wf = sys.waveform;
    let lambda = wf.wavelength();
    let mut failures = Vec::new();

    // noiseless orthogonality with unit path gains
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let s = common::scenario(1000 + seed);
        let mut rng = common::rng(seed);
        let gains: Vec<Complex64> = s.paths.iter().map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..6.3))).collect();
        let model = EchoModel::new(&s, &sys.bs_array, &wf, gains.clone());
        let sym = generate_qam_symbols(&Constellation::new(4).unwrap(), wf.subcarriers, wf.symbols, &mut rng).0;
        let dec = spatial_decomposition(&model.signal(&sym, 1.0), None, 1.0);
        let targets: Vec<_> = s.paths.iter().zip(&gains).map(|(p, g)| (p.echo_range(), p.echo_doppler(lambda), *g)).collect();
        let hbar = common::erased_targets(&wf, &targets);
        let rdec = range_decomposition(&hbar, None, 1.0);
        let fdec = doppler_decomposition(&hbar, Some(rdec.source_count), 1.0);
        for p in &s.paths {
            let a = spatial_steering(&sys.bs_array, &p.aoa_tx).entries;
            let ar = wf.range_ramp().steering(p.echo_range()).entries;
            let af = wf.doppler_ramp().steering(p.echo_doppler(lambda)).entries;
            for v in [dec.objective(a.as_slice()), rdec.objective(ar.as_slice()), fdec.objective(af.as_slice())] {
                worst = worst.max(v.sqrt());
            }
        }
    }
    if worst >= 1e-8 {
        failures.push(format!("orthogonality {worst:.1e}"));
    }

    // analytic derivatives against central differences
    let h = 1e-6;
    let two_h = Complex64::new(2.0 * h, 0.0);
    let mut rng = common::rng(11);
    let mut dworst = 0.0f64;
    for _ in 0..100 {
        let (az, el) = (rng.random_range(-PI..PI), rng.random_range(0.05..1.5));
        let d = spatial_steering_derivs(&sys.bs_array, &Angle2D::new(az, el));
        let at = |a: f64, e: f64| spatial_steering(&sys.bs_array, &Angle2D::new(a, e)).entries;
        let fd_az = (at(az + h, el) - at(az - h, el)) / two_h;
        let fd_el = (at(az, el + h) - at(az, el - h)) / two_h;
        dworst = dworst.max(rel_err(d.d_azimuth.as_slice(), fd_az.as_slice()));
        dworst = dworst.max(rel_err(d.d_elevation.as_slice(), fd_el.as_slice()));
        for ramp in [wf.range_ramp(), wf.doppler_ramp()] {
            let x = rng.random_range(0.0..ramp.period());
            let step = h * ramp.period();
            let (d1, d2) = ramp.derivs(x);
            let span = Complex64::new(2.0 * step, 0.0);
            let fd1 = (ramp.steering(x + step).entries - ramp.steering(x - step).entries) / span;
            let fd2 = (ramp.derivs(x + step).0 - ramp.derivs(x - step).0) / span;
            dworst = dworst.max(rel_err(d1.as_slice(), fd1.as_slice()));
            dworst = dworst.max(rel_err(d2.as_slice(), fd2.as_slice()));
        }
    }
    if dworst >= 1e-5 {
        failures.push(format!("derivatives {dworst:.1e}"));
    }

    // zero process noise passes observations through
    let tau = 2.2e-7;
    let mut nrng = common::rng(5);
    let noisy = CMatrix::from_fn(64, 8, |_, _| complex_gaussian(&mut nrng, 1.0));
    let out = kalman_enhance(&noisy, tau, wf.subcarrier_spacing, 0.0, InitialVariance::PerColumn);
    if !(&out.values - &noisy).iter().all(|z| z.norm() < 1e-12) {
        failures.push("kalman identity".into());
    }

    let traces = [
        (detect_source_count(&[10.0, 9.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1], 1.0), (2, false)),
        (detect_source_count(&[100.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1.0), (1, false)),
        (detect_source_count(&[0.5; 8], 1.0), (1, true)),
    ];
    if traces.iter().any(|(c, want)| (c.count, c.fallback) != *want) {
        failures.push("source-count traces".into());
    }

    let mut cfg = SimConfig::default();
    cfg.sweep.sinr_db = vec![0.0];
    cfg.sweep.comm_sinr_db = vec![25.0];
    cfg.sweep.trials = 3;
    let seq = sweep_mse(&cfg, Execution::Sequential).unwrap();
    let same = seq == sweep_mse(&cfg, Execution::Parallel).unwrap()
        && seq == sweep_mse(&cfg, Execution::Sequential).unwrap()
        && sweep_ber(&cfg, Execution::Sequential).unwrap() == sweep_ber(&cfg, Execution::Parallel).unwrap();
    if !same {
        failures.push("determinism".into());
    }

    verdict(
        failures.is_empty(),
        format!("orthogonality {worst:.1e}, derivative rel err {dworst:.1e}, failures {failures:?}"),
    )
}

fn main() {
    let picks: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| picks.is_empty() || picks.iter().any(|p| p.eq_ignore_ascii_case(id));
    let mut grid: Option<(SimConfig, ResultTable)> = None;
    let mut failed = 0;
    let mut report = |id: &str, name: &str, run: &mut dyn FnMut() -> Verdict| {
        if !wanted(id) {
            return;
        }
        let start = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        let secs = start.elapsed().as_secs_f64();
        println!("{id} {} {name}: {} ({secs:.1} s)", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };

    // the sensing grid is shared; its runtime is charged to whichever runs first
    report("C1", "resolution constants", &mut c1);
    report("C2", "super-resolution gap", &mut || c2(&grid.get_or_insert_with(sensing_grid).1));
    report("C3", "PSLR at -20 dB", &mut c3);
    report("C4", "theory against simulation", &mut c4);
    report("C5", "CRB ordering", &mut || {
        let (cfg, table) = grid.get_or_insert_with(sensing_grid);
        c5(cfg, table)
    });
    report("C6", "BER crossover", &mut c6);
    report("C7", "property suites", &mut c7);

    if failed > 0 && std::env::var("JCSIM_ACCEPT_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
