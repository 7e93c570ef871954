//! Seeded Monte Carlo sweeps over SINR grids.
//!
//! Trial `t` of every grid point sees the same scenario and fading (stream
//! `(seed, Scenario, t)`); noise and symbols come from `(seed, Noise, p, t)`.
//! Per-trial results are collected in trial order before any reduction, so
//! tables are bit-identical for any number of workers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::array::Angle2D;
use crate::channel::{build_beamformers, calibrate_sensing_power, echo_gains, EchoModel};
use crate::config::{CsiCase, Estimator, Metric, SimConfig};
use crate::error::Result;
use crate::par::{try_map_indexed, Execution};
use crate::pipeline::{
    ber_trial, noiseless_erased, sense_los, sensing_frame, BerOutcome, SensingErrors, SystemConfig,
    TargetTruth,
};
use crate::qam::{generate_qam_symbols, Constellation};
use crate::rng::{noise_rng, scenario_rng, substream, Stream};
use crate::scenario::{db_to_linear, generate_scenario_with, Fading, Scenario};
use crate::spectrum::{beam_spectra, Axis};
use crate::table::{mean_ci, ResultRow, ResultTable};
use crate::theory::{crb, theory_report, Crb, PerturbationInputs, TheoryReport};

/// Resolution constants of the configured numerology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub c: f64,
    pub bandwidth: f64,
    /// Distance bin, m.
    pub range_resolution: f64,
    /// Velocity bin, m/s.
    pub velocity_resolution: f64,
    pub subcarriers: usize,
    pub symbols: usize,
    pub seed: u64,
    pub trials: usize,
}

impl RunHeader {
    pub fn new(sys: &SystemConfig, seed: u64, trials: usize) -> Self {
        let wf = &sys.waveform;
        Self {
            c: wf.c,
            bandwidth: wf.bandwidth(),
            range_resolution: wf.range_resolution(),
            velocity_resolution: wf.velocity_resolution(),
            subcarriers: wf.subcarriers,
            symbols: wf.symbols,
            seed,
            trials,
        }
    }
}

impl fmt::Display for RunHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "c = {} m/s, B = {:.4} MHz", self.c, self.bandwidth / 1e6)?;
        writeln!(
            f,
            "N_c = {}, M_s = {}, delta_r = {:.4} m, delta_v = {:.4} m/s",
            self.subcarriers, self.symbols, self.range_resolution, self.velocity_resolution
        )?;
        write!(f, "seed = {}, trials = {}", self.seed, self.trials)
    }
}

/// Scenario and fading of one trial.
pub fn trial_scenario(sys: &SystemConfig, seed: u64, trial: u64) -> Result<(Scenario, Fading)> {
    let mut rng = scenario_rng(seed, trial);
    let scenario = generate_scenario_with(&mut rng, &sys.geometry)?;
    let fading = Fading::draw(&scenario, &mut rng);
    Ok((scenario, fading))
}

/// PSLRs in dB of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pslr {
    pub music_range: f64,
    pub music_velocity: f64,
    pub fft_range: f64,
    pub fft_velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseTrial {
    pub errors: SensingErrors,
    pub crb: Crb,
    pub pslr: Option<Pslr>,
}

fn sense_trial(
    sys: &SystemConfig,
    scenario: Scenario,
    fading: &Fading,
    sinr_db: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
    pslr_oversample: Option<usize>,
) -> Result<MseTrial> {
    let frame = sensing_frame(sys, scenario, fading, sinr_db, Some(sys.waveform.qam_order), rng)?;
    let (errors, _, beam) = sense_los(sys, &frame)?;
    let bound = crb(&sys.bs_array, &sys.waveform, &frame.truth.angle, db_to_linear(sinr_db))?;
    let pslr = pslr_oversample.map(|k| {
        let snap = beam_spectra(sys, &beam, k, k);
        let get = |e: &str, a: Axis| snap.cut(e, a).map_or(f64::NAN, |c| c.pslr_db);
        Pslr {
            music_range: get("music", Axis::Range),
            music_velocity: get("music", Axis::Velocity),
            fft_range: get("fft", Axis::Range),
            fft_velocity: get("fft", Axis::Velocity),
        }
    });
    Ok(MseTrial {
        errors,
        crb: bound,
        pslr,
    })
}

/// Per-trial sensing results, indexed `[point][trial]`.
pub fn mse_trials(cfg: &SimConfig, sys: &SystemConfig, exec: Execution) -> Result<Vec<Vec<MseTrial>>> {
    let w = &cfg.sweep;
    let pslr = w.metrics.contains(&Metric::Pslr).then_some(w.pslr_oversample);
    w.sinr_db
        .iter()
        .enumerate()
        .map(|(p, &sinr)| {
            try_map_indexed(w.trials, exec, |t| {
                let (scenario, fading) = trial_scenario(sys, w.seed, t as u64)?;
                let mut rng = noise_rng(w.seed, p as u64, t as u64);
                sense_trial(sys, scenario, &fading, sinr, &mut rng, pslr)
            })
        })
        .collect()
}

fn rad2_to_deg2(x: f64) -> f64 {
    x * (180.0 / std::f64::consts::PI).powi(2)
}

struct Rows<'a> {
    table: ResultTable,
    sinr_db: f64,
    trials: usize,
    seed: u64,
    metrics: &'a [Metric],
}

impl Rows<'_> {
    fn sample(&mut self, metric: Metric, series: &str, samples: &[f64]) {
        if self.metrics.contains(&metric) {
            let (value, ci) = mean_ci(samples);
            self.exact(metric, series, value, ci);
        }
    }

    fn exact(&mut self, metric: Metric, series: &str, value: f64, ci: f64) {
        if self.metrics.contains(&metric) {
            self.table.push(ResultRow {
                sinr_db: self.sinr_db,
                metric,
                series: series.to_string(),
                value,
                ci,
                trials: self.trials,
                seed: self.seed,
            });
        }
    }
}

/// Sensing MSE rows (angles in deg^2, distance in m^2, velocity in (m/s)^2,
/// PSLR in dB) with the CRB alongside.
pub fn mse_table(cfg: &SimConfig, trials: &[Vec<MseTrial>]) -> ResultTable {
    let w = &cfg.sweep;
    let music = w.estimators.contains(&Estimator::Music);
    let fft = w.estimators.contains(&Estimator::Fft);
    let mut table = ResultTable::new();
    for (&sinr_db, point) in w.sinr_db.iter().zip(trials) {
        let mut rows = Rows {
            table: ResultTable::new(),
            sinr_db,
            trials: point.len(),
            seed: w.seed,
            metrics: &w.metrics,
        };
        let col = |f: &dyn Fn(&MseTrial) -> f64| point.iter().map(f).collect::<Vec<f64>>();
        let crb_mean = |f: &dyn Fn(&Crb) -> f64| mean_ci(&col(&|t| f(&t.crb))).0;
        if music {
            rows.sample(Metric::AoaMse, "music_azimuth", &col(&|t| rad2_to_deg2(t.errors.azimuth)));
            rows.sample(Metric::AoaMse, "music_elevation", &col(&|t| rad2_to_deg2(t.errors.elevation)));
        }
        rows.exact(Metric::AoaMse, "crb_azimuth", rad2_to_deg2(crb_mean(&|c| c.azimuth)), 0.0);
        rows.exact(Metric::AoaMse, "crb_elevation", rad2_to_deg2(crb_mean(&|c| c.elevation)), 0.0);
        if music {
            rows.sample(Metric::RangeMse, "music", &col(&|t| t.errors.distance));
        }
        if fft {
            rows.sample(Metric::RangeMse, "fft", &col(&|t| t.errors.fft_distance));
        }
        rows.exact(Metric::RangeMse, "crb", crb_mean(&|c| c.range), 0.0);
        if music {
            rows.sample(Metric::VelocityMse, "music", &col(&|t| t.errors.velocity));
        }
        if fft {
            rows.sample(Metric::VelocityMse, "fft", &col(&|t| t.errors.fft_velocity));
        }
        rows.exact(Metric::VelocityMse, "crb", crb_mean(&|c| c.velocity), 0.0);
        if music {
            rows.sample(Metric::LocationMse, "music", &col(&|t| t.errors.location));
        }
        if point.iter().all(|t| t.pslr.is_some()) {
            let p = |f: &dyn Fn(&Pslr) -> f64| col(&|t| t.pslr.as_ref().map_or(f64::NAN, f));
            if music {
                rows.sample(Metric::Pslr, "music_range", &p(&|x| x.music_range));
                rows.sample(Metric::Pslr, "music_velocity", &p(&|x| x.music_velocity));
            }
            if fft {
                rows.sample(Metric::Pslr, "fft_range", &p(&|x| x.fft_range));
                rows.sample(Metric::Pslr, "fft_velocity", &p(&|x| x.fft_velocity));
            }
        }
        table.extend(rows.table);
    }
    table
}

pub fn sweep_mse(cfg: &SimConfig, exec: Execution) -> Result<ResultTable> {
    let sys = cfg.system()?;
    Ok(mse_table(cfg, &mse_trials(cfg, &sys, exec)?))
}

/// Per-trial BER outcomes, indexed `[point][trial]`.
pub fn ber_trials(cfg: &SimConfig, sys: &SystemConfig, exec: Execution) -> Result<Vec<Vec<BerOutcome>>> {
    let w = &cfg.sweep;
    w.comm_sinr_db
        .iter()
        .enumerate()
        .map(|(p, &sinr)| {
            try_map_indexed(w.trials, exec, |t| {
                let (scenario, fading) = trial_scenario(sys, w.seed, t as u64)?;
                let mut rng = noise_rng(w.seed, p as u64, t as u64);
                ber_trial(sys, &scenario, &fading, sinr, w.data_qam_order, &mut rng)
            })
        })
        .collect()
}

pub fn case_ber(o: &BerOutcome, case: CsiCase) -> f64 {
    match case {
        CsiCase::A => o.a,
        CsiCase::B => o.b,
        CsiCase::C => o.c,
        CsiCase::D => o.d,
    }
}

/// Mean BER per selected case; `sinr_db` holds the communication SINR.
pub fn ber_table(cfg: &SimConfig, trials: &[Vec<BerOutcome>]) -> ResultTable {
    let w = &cfg.sweep;
    let mut table = ResultTable::new();
    for (&sinr_db, point) in w.comm_sinr_db.iter().zip(trials) {
        for &case in &w.cases {
            let samples: Vec<f64> = point.iter().map(|o| case_ber(o, case)).collect();
            let (value, ci) = mean_ci(&samples);
            table.push(ResultRow {
                sinr_db,
                metric: Metric::Ber,
                series: case.label().to_string(),
                value,
                ci,
                trials: point.len(),
                seed: w.seed,
            });
        }
    }
    table
}

pub fn sweep_ber(cfg: &SimConfig, exec: Execution) -> Result<ResultTable> {
    let sys = cfg.system()?;
    Ok(ber_table(cfg, &ber_trials(cfg, &sys, exec)?))
}

/// Theory and simulation for the fixed scenario at one SINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub sinr_db: f64,
    pub theory: TheoryReport,
    pub simulated: SensingErrors,
    pub simulated_ci: SensingErrors,
    pub trials: usize,
}

/// The scenario held fixed by the theory comparison, with every reflection
/// factor at its RMS value.
pub fn theory_scenario(cfg: &SimConfig, sys: &SystemConfig) -> Result<(Scenario, Fading)> {
    let (scenario, _) = trial_scenario(sys, cfg.sweep.seed, cfg.theory.scenario_trial)?;
    let fading = Fading::rms(&scenario);
    Ok((scenario, fading))
}

/// Perturbation-theory prediction for one target at one SINR.
pub fn theory_at(
    sys: &SystemConfig,
    scenario: &Scenario,
    fading: &Fading,
    sinr_db: f64,
    draws: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<TheoryReport> {
    let wf = &sys.waveform;
    let truth = TargetTruth::los(scenario, wf);
    let beams = build_beamformers(scenario, &sys.bs_array, &sys.mue_array);
    let gains = echo_gains(scenario, wf, &beams, fading);
    let p_t = calibrate_sensing_power(&gains, &sys.noise, sinr_db)?;
    let model = EchoModel::new(scenario, &sys.bs_array, wf, gains);
    let constellation = Constellation::new(wf.qam_order)?;
    let (symbols, _) = generate_qam_symbols(&constellation, wf.subcarriers, wf.symbols, rng);
    let spatial = model.signal(&symbols, p_t);
    let erased = noiseless_erased(sys, &model, p_t, &truth.angle);
    let inputs = PerturbationInputs::new(
        &spatial,
        &erased,
        &sys.bs_array,
        wf,
        &truth.angle,
        truth.range,
        truth.doppler,
        sys.noise.sense_floor(),
    )?;
    theory_report(&inputs, &sys.bs_array, wf, db_to_linear(sinr_db), draws, rng)
}

fn errors_stat(samples: &[SensingErrors], stat: impl Fn(&[f64]) -> f64) -> SensingErrors {
    let col = |f: fn(&SensingErrors) -> f64| stat(&samples.iter().map(f).collect::<Vec<_>>());
    SensingErrors {
        azimuth: col(|e| e.azimuth),
        elevation: col(|e| e.elevation),
        distance: col(|e| e.distance),
        velocity: col(|e| e.velocity),
        location: col(|e| e.location),
        fft_distance: col(|e| e.fft_distance),
        fft_velocity: col(|e| e.fft_velocity),
        angle_sources: 0,
        range_sources: 0,
    }
}

pub fn theory_points(cfg: &SimConfig, sys: &SystemConfig, exec: Execution) -> Result<Vec<TheoryPoint>> {
    let (scenario, fading) = theory_scenario(cfg, sys)?;
    let seed = cfg.sweep.seed;
    cfg.theory
        .sinr_db
        .iter()
        .enumerate()
        .map(|(p, &sinr_db)| {
            let mut rng = substream(seed, Stream::Theory, &[p as u64]);
            let theory = theory_at(sys, &scenario, &fading, sinr_db, cfg.theory.draws, &mut rng)?;
            let samples = try_map_indexed(cfg.sweep.trials, exec, |t| {
                let mut rng = noise_rng(seed, p as u64, t as u64);
                sense_trial(sys, scenario.clone(), &fading, sinr_db, &mut rng, None).map(|m| m.errors)
            })?;
            Ok(TheoryPoint {
                sinr_db,
                theory,
                simulated: errors_stat(&samples, |x| mean_ci(x).0),
                simulated_ci: errors_stat(&samples, |x| mean_ci(x).1),
                trials: samples.len(),
            })
        })
        .collect()
}

pub fn theory_table(cfg: &SimConfig, points: &[TheoryPoint]) -> ResultTable {
    let mut table = ResultTable::new();
    for pt in points {
        let mut rows = Rows {
            table: ResultTable::new(),
            sinr_db: pt.sinr_db,
            trials: pt.trials,
            seed: cfg.sweep.seed,
            metrics: &Metric::ALL,
        };
        let (s, ci, th) = (&pt.simulated, &pt.simulated_ci, &pt.theory);
        rows.exact(Metric::AoaMse, "music_azimuth", rad2_to_deg2(s.azimuth), rad2_to_deg2(ci.azimuth));
        rows.exact(Metric::AoaMse, "music_elevation", rad2_to_deg2(s.elevation), rad2_to_deg2(ci.elevation));
        rows.exact(Metric::AoaMse, "theory_azimuth", rad2_to_deg2(th.mse_azimuth), 0.0);
        rows.exact(Metric::AoaMse, "theory_elevation", rad2_to_deg2(th.mse_elevation), 0.0);
        rows.exact(Metric::AoaMse, "crb_azimuth", rad2_to_deg2(th.crb.azimuth), 0.0);
        rows.exact(Metric::AoaMse, "crb_elevation", rad2_to_deg2(th.crb.elevation), 0.0);
        rows.exact(Metric::RangeMse, "music", s.distance, ci.distance);
        rows.exact(Metric::RangeMse, "theory", th.mse_range, 0.0);
        rows.exact(Metric::RangeMse, "crb", th.crb.range, 0.0);
        rows.exact(Metric::VelocityMse, "music", s.velocity, ci.velocity);
        rows.exact(Metric::VelocityMse, "theory", th.mse_velocity, 0.0);
        rows.exact(Metric::VelocityMse, "crb", th.crb.velocity, 0.0);
        rows.exact(Metric::LocationMse, "music", s.location, ci.location);
        rows.exact(Metric::LocationMse, "theory", th.mse_location, 0.0);
        table.extend(rows.table);
    }
    table
}

pub fn validate_theory(cfg: &SimConfig, exec: Execution) -> Result<ResultTable> {
    let sys = cfg.system()?;
    Ok(theory_table(cfg, &theory_points(cfg, &sys, exec)?))
}

/// Closed-form bounds over the sensing grid for the line-of-sight direction
/// of the theory scenario.
pub fn crb_table(cfg: &SimConfig) -> Result<ResultTable> {
    let sys = cfg.system()?;
    let (scenario, _) = theory_scenario(cfg, &sys)?;
    let angle: Angle2D = TargetTruth::los(&scenario, &sys.waveform).angle;
    let mut table = ResultTable::new();
    for &sinr_db in &cfg.sweep.sinr_db {
        let b = crb(&sys.bs_array, &sys.waveform, &angle, db_to_linear(sinr_db))?;
        let mut rows = Rows {
            table: ResultTable::new(),
            sinr_db,
            trials: 0,
            seed: cfg.sweep.seed,
            metrics: &Metric::ALL,
        };
        rows.exact(Metric::AoaMse, "crb_azimuth", rad2_to_deg2(b.azimuth), 0.0);
        rows.exact(Metric::AoaMse, "crb_elevation", rad2_to_deg2(b.elevation), 0.0);
        rows.exact(Metric::RangeMse, "crb", b.range, 0.0);
        rows.exact(Metric::VelocityMse, "crb", b.velocity, 0.0);
        table.extend(rows.table);
    }
    Ok(table)
}
