//! JSON run configuration with a versioned schema key.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::{ArrayConfig, LEGACY_SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::fft_baseline::Window;
use crate::music::MusicOptions;
use crate::pipeline::SystemConfig;
use crate::scenario::{GeometryConfig, NoiseInterferenceConfig, WaveformConfig};

pub const SCHEMA: &str = "jcsim/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AoaMse,
    RangeMse,
    VelocityMse,
    LocationMse,
    Ber,
    Pslr,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::AoaMse,
        Metric::RangeMse,
        Metric::VelocityMse,
        Metric::LocationMse,
        Metric::Ber,
        Metric::Pslr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::AoaMse => "aoa_mse",
            Metric::RangeMse => "range_mse",
            Metric::VelocityMse => "velocity_mse",
            Metric::LocationMse => "location_mse",
            Metric::Ber => "ber",
            Metric::Pslr => "pslr",
        }
    }

    /// Comma-separated list of every metric name.
    pub fn available() -> String {
        Self::ALL.map(Metric::name).join(", ")
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric {
                name: s.to_string(),
                available: Self::available(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Music,
    Fft,
}

/// CSI used for demodulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CsiCase {
    /// Perfect.
    A,
    /// Raw LS.
    B,
    /// Kalman-enhanced with the MUSIC delay.
    C,
    /// Kalman-enhanced with the FFT delay.
    D,
}

impl CsiCase {
    pub const ALL: [CsiCase; 4] = [CsiCase::A, CsiCase::B, CsiCase::C, CsiCase::D];

    pub fn label(self) -> &'static str {
        match self {
            CsiCase::A => "A",
            CsiCase::B => "B",
            CsiCase::C => "C",
            CsiCase::D => "D",
        }
    }
}

/// Uniform planar array with spacing given in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "half")]
    pub spacing_wavelengths: f64,
}

fn half() -> f64 {
    0.5
}

impl ArraySpec {
    pub fn build(&self, wavelength: f64) -> Result<ArrayConfig> {
        ArrayConfig::new(self.rows, self.cols, self.spacing_wavelengths * wavelength, wavelength)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub waveform: WaveformConfig,
    pub noise: NoiseInterferenceConfig,
    pub geometry: GeometryConfig,
    pub bs_array: ArraySpec,
    pub mue_array: ArraySpec,
    pub music: MusicOptions,
    pub fft_window: Window,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            waveform: WaveformConfig::reference(),
            noise: NoiseInterferenceConfig::reference(),
            geometry: GeometryConfig::reference(),
            bs_array: ArraySpec {
                rows: 8,
                cols: 8,
                spacing_wavelengths: 0.5,
            },
            mue_array: ArraySpec {
                rows: 1,
                cols: 1,
                spacing_wavelengths: 0.5,
            },
            music: MusicOptions::default(),
            fft_window: Window::Rectangular,
        }
    }
}

/// Monte Carlo sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub seed: u64,
    pub trials: usize,
    /// Sensing SINR grid, dB.
    pub sinr_db: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub estimators: Vec<Estimator>,
    /// Communication SINR grid for BER, dB.
    pub comm_sinr_db: Vec<f64>,
    pub cases: Vec<CsiCase>,
    pub data_qam_order: usize,
    /// Spectrum samples per resolution cell when `pslr` is swept.
    pub pslr_oversample: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 200,
            sinr_db: (-6..=2).map(|k| 5.0 * k as f64).collect(),
            metrics: vec![
                Metric::AoaMse,
                Metric::RangeMse,
                Metric::VelocityMse,
                Metric::LocationMse,
            ],
            estimators: vec![Estimator::Music, Estimator::Fft],
            comm_sinr_db: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            cases: CsiCase::ALL.to_vec(),
            data_qam_order: 64,
            pslr_oversample: 4,
        }
    }
}

/// Perturbation-theory overlay on one fixed scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySpec {
    pub sinr_db: Vec<f64>,
    /// Noise draws for the perturbation average.
    pub draws: usize,
    /// Which trial's scenario to hold fixed.
    pub scenario_trial: u64,
}

impl Default for TheorySpec {
    fn default() -> Self {
        Self {
            sinr_db: vec![0.0, 5.0, 10.0],
            draws: 1000,
            scenario_trial: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSpec {
    pub sinr_db: f64,
    pub scenario_trial: u64,
    pub oversample: usize,
    pub fft_pad: usize,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            sinr_db: -20.0,
            scenario_trial: 0,
            oversample: 8,
            fft_pad: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub schema: String,
    /// Use `c = 3e8` instead of the exact value.
    pub legacy_c: bool,
    pub system: SystemSpec,
    pub sweep: SweepSpec,
    pub theory: TheorySpec,
    pub spectrum: SpectrumSpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA.to_string(),
            legacy_c: false,
            system: SystemSpec::default(),
            sweep: SweepSpec::default(),
            theory: TheorySpec::default(),
            spectrum: SpectrumSpec::default(),
        }
    }
}

fn at(path: &str, message: impl Into<String>) -> Error {
    Error::ConfigPath {
        path: path.to_string(),
        message: message.into(),
    }
}

fn check_grid(path: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(at(path, "grid must not be empty"));
    }
    if let Some(i) = grid.iter().position(|x| !x.is_finite()) {
        return Err(at(&format!("{path}[{i}]"), "must be finite"));
    }
    Ok(())
}

impl SimConfig {
    /// Parses and validates. The `schema` key is required; errors name the
    /// offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema") {
            Some(serde_json::Value::String(s)) if s == SCHEMA => {}
            Some(other) => return Err(at("schema", format!("expected \"{SCHEMA}\", found {other}"))),
            None => return Err(at("schema", format!("missing; expected \"{SCHEMA}\""))),
        }
        let cfg: SimConfig = serde_path_to_error::deserialize(value).map_err(|e| Error::ConfigPath {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(at("schema", format!("expected \"{SCHEMA}\"")));
        }
        let s = &self.system;
        s.waveform.validate().map_err(|e| at("system.waveform", e.to_string()))?;
        s.noise.validate().map_err(|e| at("system.noise", e.to_string()))?;
        s.geometry.validate().map_err(|e| at("system.geometry", e.to_string()))?;
        for (name, a) in [("system.bs_array", &s.bs_array), ("system.mue_array", &s.mue_array)] {
            a.build(1.0).map_err(|e| at(name, e.to_string()))?;
        }
        let m = &s.music;
        if !(m.epsilon >= 0.0) {
            return Err(at("system.music.epsilon", "must be nonnegative"));
        }
        for (name, v) in [
            ("system.music.range_grid_fraction", m.range_grid_fraction),
            ("system.music.doppler_grid_fraction", m.doppler_grid_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(at(name, "must lie in (0, 1]"));
            }
        }
        if !(m.angle_step > 0.0) {
            return Err(at("system.music.angle_step", "must be positive"));
        }

        let w = &self.sweep;
        if w.trials == 0 {
            return Err(at("sweep.trials", "must be at least 1"));
        }
        check_grid("sweep.sinr_db", &w.sinr_db)?;
        check_grid("sweep.comm_sinr_db", &w.comm_sinr_db)?;
        if w.metrics.is_empty() {
            return Err(at(
                "sweep.metrics",
                format!("no metric selected; available: {}", Metric::available()),
            ));
        }
        if w.estimators.is_empty() {
            return Err(at("sweep.estimators", "select at least one of music, fft"));
        }
        if w.cases.is_empty() {
            return Err(at("sweep.cases", "select at least one of A, B, C, D"));
        }
        if !matches!(w.data_qam_order, 4 | 16 | 64) {
            return Err(at("sweep.data_qam_order", "must be 4, 16 or 64"));
        }
        if w.pslr_oversample == 0 {
            return Err(at("sweep.pslr_oversample", "must be at least 1"));
        }

        check_grid("theory.sinr_db", &self.theory.sinr_db)?;
        if self.theory.draws == 0 {
            return Err(at("theory.draws", "must be at least 1"));
        }
        let sp = &self.spectrum;
        if !sp.sinr_db.is_finite() {
            return Err(at("spectrum.sinr_db", "must be finite"));
        }
        if sp.oversample == 0 || sp.fft_pad == 0 {
            return Err(at("spectrum", "oversample and fft_pad must be at least 1"));
        }
        Ok(())
    }

    /// The system description this configuration selects.
    pub fn system(&self) -> Result<SystemConfig> {
        let mut waveform = self.system.waveform;
        if self.legacy_c {
            waveform.c = LEGACY_SPEED_OF_LIGHT;
        }
        let lambda = waveform.wavelength();
        Ok(SystemConfig {
            bs_array: self.system.bs_array.build(lambda)?,
            mue_array: self.system.mue_array.build(lambda)?,
            waveform,
            noise: self.system.noise,
            geometry: self.system.geometry,
            music: self.system.music,
            fft_window: self.system.fft_window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_reference_system() {
        let sys = SimConfig::default().system().unwrap();
        assert_eq!(sys, SystemConfig::reference());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = SimConfig::default();
        let back = SimConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let cfg = SimConfig::from_json(r#"{"schema": "jcsim/v1", "sweep": {"trials": 3}}"#).unwrap();
        assert_eq!(cfg.sweep.trials, 3);
        assert_eq!(cfg.sweep.sinr_db, SweepSpec::default().sinr_db);
    }

    #[test]
    fn schema_key_is_required() {
        let err = SimConfig::from_json("{}").unwrap_err().to_string();
        assert!(err.contains("`schema`"), "{err}");
        let err = SimConfig::from_json(r#"{"schema": "jcsim/v0"}"#).unwrap_err().to_string();
        assert!(err.contains("jcsim/v1"), "{err}");
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let err = SimConfig::from_json(r#"{"schema": "jcsim/v1", "system": {"waveform": {"subcarrier": 3}}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("system.waveform"), "{err}");
        assert!(err.contains("subcarrier"), "{err}");
    }

    #[test]
    fn type_errors_report_their_path() {
        let err = SimConfig::from_json(r#"{"schema": "jcsim/v1", "sweep": {"sinr_db": [0, "x"]}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sweep.sinr_db[1]"), "{err}");
    }

    #[test]
    fn validation_failures_name_the_key() {
        let err = SimConfig::from_json(r#"{"schema": "jcsim/v1", "sweep": {"trials": 0}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sweep.trials"), "{err}");
        let err = SimConfig::from_json(r#"{"schema": "jcsim/v1", "sweep": {"metrics": []}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("aoa_mse") && err.contains("pslr"), "{err}");
        let err = SimConfig::from_json(r#"{"schema": "jcsim/v1", "sweep": {"metrics": ["snr"]}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sweep.metrics[0]"), "{err}");
    }

    #[test]
    fn legacy_c_rescales_wavelength() {
        let cfg = SimConfig {
            legacy_c: true,
            ..SimConfig::default()
        };
        let sys = cfg.system().unwrap();
        assert_eq!(sys.waveform.c, 3.0e8);
        assert!((sys.bs_array.spacing - sys.waveform.wavelength() / 2.0).abs() < 1e-18);
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!(matches!("snr".parse::<Metric>(), Err(Error::UnknownMetric { .. })));
    }
}
