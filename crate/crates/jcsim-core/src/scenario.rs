//! OFDM numerology, deployment geometry and per-path ground truth.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{Angle2D, PhaseRamp, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformConfig {
    pub subcarriers: usize,
    pub symbols: usize,
    /// Subcarrier spacing, Hz.
    pub subcarrier_spacing: f64,
    /// Guard interval, seconds.
    pub guard: f64,
    /// Carrier frequency, Hz.
    pub carrier: f64,
    pub qam_order: usize,
    /// Propagation speed, m/s.
    pub c: f64,
}

impl WaveformConfig {
    /// Validated numerology. `guard = None` selects `T_s / 8`.
    pub fn new(
        subcarriers: usize,
        symbols: usize,
        subcarrier_spacing: f64,
        guard: Option<f64>,
        carrier: f64,
        qam_order: usize,
    ) -> Result<Self> {
        let guard = guard.unwrap_or(1.0 / (8.0 * subcarrier_spacing));
        let cfg = Self {
            subcarriers,
            symbols,
            subcarrier_spacing,
            guard,
            carrier,
            qam_order,
            c: SPEED_OF_LIGHT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 256 subcarriers at 480 kHz, 64 symbols, 63 GHz carrier, no guard.
    pub fn reference() -> Self {
        Self {
            subcarriers: 256,
            symbols: 64,
            subcarrier_spacing: 480e3,
            guard: 0.0,
            carrier: 63e9,
            qam_order: 4,
            c: SPEED_OF_LIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarriers < 2 || self.symbols < 2 {
            return Err(Error::InvalidConfig("need at least 2 subcarriers and 2 symbols".into()));
        }
        if !(self.subcarrier_spacing > 0.0 && self.carrier > 0.0 && self.c > 0.0) {
            return Err(Error::InvalidConfig("spacing, carrier and c must be positive".into()));
        }
        if !(self.guard >= 0.0) {
            return Err(Error::InvalidConfig("guard interval must be nonnegative".into()));
        }
        if !matches!(self.qam_order, 4 | 16 | 64) {
            return Err(Error::InvalidConfig(format!(
                "qam_order {} not in {{4, 16, 64}}",
                self.qam_order
            )));
        }
        Ok(())
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// Useful symbol duration `1 / delta_f`.
    pub fn useful_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// Full symbol duration `T = T_s + T_g`.
    pub fn symbol_duration(&self) -> f64 {
        self.useful_duration() + self.guard
    }

    pub fn wavelength(&self) -> f64 {
        self.c / self.carrier
    }

    pub fn bandwidth(&self) -> f64 {
        self.subcarriers as f64 * self.subcarrier_spacing
    }

    /// Distance bin `c / (2B)`.
    pub fn range_resolution(&self) -> f64 {
        self.c / (2.0 * self.bandwidth())
    }

    /// Velocity bin `lambda / (2 M_s T)`.
    pub fn velocity_resolution(&self) -> f64 {
        self.wavelength() / (2.0 * self.symbols as f64 * self.symbol_duration())
    }

    pub fn range_ramp(&self) -> PhaseRamp {
        PhaseRamp::range(self.subcarriers, self.subcarrier_spacing, self.c)
    }

    pub fn doppler_ramp(&self) -> PhaseRamp {
        PhaseRamp::doppler(self.symbols, self.symbol_duration())
    }
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self::reference()
    }
}

/// Noise and interference powers. INRs are relative to the noise power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseInterferenceConfig {
    /// Watts.
    pub noise_power: f64,
    pub inr_comm_db: f64,
    pub inr_sense_db: f64,
}

impl NoiseInterferenceConfig {
    pub fn reference() -> Self {
        Self {
            noise_power: 4.9177e-12,
            inr_comm_db: 3.0,
            inr_sense_db: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power > 0.0) {
            return Err(Error::InvalidConfig("noise power must be positive".into()));
        }
        Ok(())
    }

    pub fn interference_comm(&self) -> f64 {
        self.noise_power * db_to_linear(self.inr_comm_db)
    }

    pub fn interference_sense(&self) -> f64 {
        self.noise_power * db_to_linear(self.inr_sense_db)
    }

    /// `P_IS + sigma_N^2`.
    pub fn sense_floor(&self) -> f64 {
        self.noise_power + self.interference_sense()
    }

    /// `P_IC + sigma_N^2`.
    pub fn comm_floor(&self) -> f64 {
        self.noise_power + self.interference_comm()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Array placement. `axes` are the row axis, column axis and boresight in
/// world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayPose {
    pub position: [f64; 3],
    pub axes: [[f64; 3]; 3],
}

impl ArrayPose {
    /// Boresight along +x, rows along +y, columns along +z; tilted down by
    /// `downtilt` then spun about the vertical by `spin`.
    pub fn new(position: [f64; 3], spin: f64, downtilt: f64) -> Self {
        let (st, ct) = downtilt.sin_cos();
        let (ss, cs) = spin.sin_cos();
        let rot = |v: [f64; 3]| {
            // about y by downtilt, then about z by spin
            let x1 = ct * v[0] + st * v[2];
            let z1 = -st * v[0] + ct * v[2];
            let y1 = v[1];
            [cs * x1 - ss * y1, ss * x1 + cs * y1, z1]
        };
        Self {
            position,
            axes: [rot([0.0, 1.0, 0.0]), rot([0.0, 0.0, 1.0]), rot([1.0, 0.0, 0.0])],
        }
    }

    /// Facing straight up with rows along +x.
    pub fn upward(position: [f64; 3]) -> Self {
        Self {
            position,
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn to_local(&self, world_dir: [f64; 3]) -> [f64; 3] {
        [
            dot(self.axes[0], world_dir),
            dot(self.axes[1], world_dir),
            dot(self.axes[2], world_dir),
        ]
    }

    pub fn to_world(&self, local: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = local[0] * self.axes[0][k] + local[1] * self.axes[1][k] + local[2] * self.axes[2][k];
        }
        out
    }

    /// Direction of a world point as seen from the array.
    pub fn angle_to(&self, point: [f64; 3]) -> Angle2D {
        Angle2D::from_direction(self.to_local(sub(point, self.position)))
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Closing speed of `b` relative to `a`; positive when they approach.
fn closing_speed(a_pos: [f64; 3], a_vel: [f64; 3], b_pos: [f64; 3], b_vel: [f64; 3]) -> f64 {
    let los = sub(b_pos, a_pos);
    let rel = sub(b_vel, a_vel);
    -dot(los, rel) / norm(los)
}

impl Default for NoiseInterferenceConfig {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub bs_position: [f64; 3],
    pub spin_deg: f64,
    pub downtilt_deg: f64,
    /// MUE x coordinate is drawn uniformly from this interval.
    pub mue_x_range: [f64; 2],
    pub mue_y: f64,
    pub mue_z: f64,
    pub mue_velocity: [f64; 3],
    /// Number of scatterers, `L - 1`.
    pub scatterers: usize,
    pub scatterer_radius: f64,
    pub min_scatterer_distance: f64,
    /// Scatterer speeds are uniform in `[0, max]` with a random horizontal heading.
    pub scatterer_speed_max: f64,
    pub reflect_var_sense: f64,
    pub reflect_var_comm: f64,
}

impl GeometryConfig {
    pub fn reference() -> Self {
        Self {
            bs_position: [50.0, 4.75, 7.0],
            spin_deg: 45.0,
            downtilt_deg: 20.0,
            mue_x_range: [50.0, 155.0],
            mue_y: 0.0,
            mue_z: 2.0,
            mue_velocity: [-11.11, 0.0, 0.0],
            scatterers: 2,
            scatterer_radius: 100.0,
            min_scatterer_distance: 1.0,
            scatterer_speed_max: 20.0,
            reflect_var_sense: 1.0,
            reflect_var_comm: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mue_x_range[1] >= self.mue_x_range[0]) {
            return Err(Error::InvalidConfig("mue_x_range must be ordered".into()));
        }
        if !(self.scatterer_radius > self.min_scatterer_distance && self.min_scatterer_distance >= 0.0) {
            return Err(Error::InvalidConfig("scatterer radius must exceed the minimum distance".into()));
        }
        if !(self.reflect_var_sense >= 0.0 && self.reflect_var_comm >= 0.0 && self.scatterer_speed_max >= 0.0) {
            return Err(Error::InvalidConfig("variances and speeds must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn bs_pose(&self) -> ArrayPose {
        ArrayPose::new(self.bs_position, self.spin_deg.to_radians(), self.downtilt_deg.to_radians())
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

/// Ground truth of one path. Path 0 is the line of sight to the MUE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub index: usize,
    /// Departure angle from the BS, equal to the echo arrival angle.
    pub aoa_tx: Angle2D,
    /// Arrival angle at the MUE array.
    pub aoa_rx_comm: Angle2D,
    /// BS to target (or scatterer) distance.
    pub d1: f64,
    /// Scatterer to MUE distance; `None` for the line of sight.
    pub d2: Option<f64>,
    pub v1: f64,
    pub v2: Option<f64>,
    pub reflect_var_sense: f64,
    pub reflect_var_comm: f64,
}

impl PathParams {
    pub fn echo_delay(&self, c: f64) -> f64 {
        2.0 * self.d1 / c
    }

    /// Round-trip range `2 d1`.
    pub fn echo_range(&self) -> f64 {
        2.0 * self.d1
    }

    pub fn echo_doppler(&self, wavelength: f64) -> f64 {
        2.0 * self.v1 / wavelength
    }

    pub fn comm_delay(&self, c: f64) -> f64 {
        (self.d1 + self.d2.unwrap_or(0.0)) / c
    }

    pub fn comm_doppler(&self, wavelength: f64) -> f64 {
        (self.v1 + self.v2.unwrap_or(0.0)) / wavelength
    }

    /// `|b_S|^2 / |beta_S|^2 = lambda^2 / ((4 pi)^3 d1^4)`.
    pub fn echo_path_loss(&self, wavelength: f64) -> f64 {
        wavelength * wavelength / ((4.0 * PI).powi(3) * self.d1.powi(4))
    }

    /// Line of sight `lambda^2 / (4 pi d)^2`; NLoS `lambda^2 / ((4 pi)^3 d1^2 d2^2)`.
    pub fn comm_path_loss(&self, wavelength: f64) -> f64 {
        match self.d2 {
            None => (wavelength / (4.0 * PI * self.d1)).powi(2),
            Some(d2) => wavelength * wavelength / ((4.0 * PI).powi(3) * self.d1.powi(2) * d2.powi(2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_pose: ArrayPose,
    pub mue_pose: ArrayPose,
    pub mue: Body,
    pub scatterers: Vec<Body>,
    pub paths: Vec<PathParams>,
}

impl Scenario {
    /// Builds path truth from explicit positions.
    pub fn from_bodies(
        bs_pose: ArrayPose,
        mue: Body,
        scatterers: Vec<Body>,
        reflect_var_sense: f64,
        reflect_var_comm: f64,
        min_scatterer_distance: f64,
    ) -> Result<Self> {
        let bs = Body {
            position: bs_pose.position,
            velocity: [0.0; 3],
        };
        let mue_pose = ArrayPose::upward(mue.position);
        let d0 = norm(sub(mue.position, bs.position));
        if d0 <= 0.0 {
            return Err(Error::Degenerate("MUE coincides with the base station".into()));
        }
        let mut paths = vec![PathParams {
            index: 0,
            aoa_tx: bs_pose.angle_to(mue.position),
            aoa_rx_comm: mue_pose.angle_to(bs.position),
            d1: d0,
            d2: None,
            v1: closing_speed(bs.position, bs.velocity, mue.position, mue.velocity),
            v2: None,
            reflect_var_sense,
            reflect_var_comm,
        }];
        for (i, s) in scatterers.iter().enumerate() {
            let d1 = norm(sub(s.position, bs.position));
            if d1 < min_scatterer_distance {
                return Err(Error::ScattererTooClose {
                    index: i,
                    distance: d1,
                });
            }
            let d2 = norm(sub(mue.position, s.position));
            if d2 <= 0.0 {
                return Err(Error::Degenerate(format!("scatterer {i} coincides with the MUE")));
            }
            paths.push(PathParams {
                index: i + 1,
                aoa_tx: bs_pose.angle_to(s.position),
                aoa_rx_comm: mue_pose.angle_to(s.position),
                d1,
                d2: Some(d2),
                v1: closing_speed(bs.position, bs.velocity, s.position, s.velocity),
                v2: Some(closing_speed(s.position, s.velocity, mue.position, mue.velocity)),
                reflect_var_sense,
                reflect_var_comm,
            });
        }
        Ok(Self {
            bs_pose,
            mue_pose,
            mue,
            scatterers,
            paths,
        })
    }

    pub fn los(&self) -> &PathParams {
        &self.paths[0]
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }
}

/// Draws a scenario from a seed.
pub fn generate_scenario(seed: u64, geom: &GeometryConfig) -> Result<Scenario> {
    generate_scenario_with(&mut ChaCha8Rng::seed_from_u64(seed), geom)
}

/// Draws a scenario from a caller-supplied generator. Scatterer positions
/// closer than the minimum distance are redrawn.
pub fn generate_scenario_with<R: Rng + ?Sized>(rng: &mut R, geom: &GeometryConfig) -> Result<Scenario> {
    geom.validate()?;
    let [lo, hi] = geom.mue_x_range;
    let x = lo + (hi - lo) * rng.random::<f64>();
    let mue = Body {
        position: [x, geom.mue_y, geom.mue_z],
        velocity: geom.mue_velocity,
    };
    let mut scatterers = Vec::with_capacity(geom.scatterers);
    while scatterers.len() < geom.scatterers {
        let dir = unit_vector(rng);
        let r = geom.scatterer_radius * rng.random::<f64>().cbrt();
        let heading = 2.0 * PI * rng.random::<f64>();
        let speed = geom.scatterer_speed_max * rng.random::<f64>();
        if r < geom.min_scatterer_distance {
            continue;
        }
        scatterers.push(Body {
            position: [
                geom.bs_position[0] + r * dir[0],
                geom.bs_position[1] + r * dir[1],
                geom.bs_position[2] + r * dir[2],
            ],
            velocity: [speed * heading.cos(), speed * heading.sin(), 0.0],
        });
    }
    Scenario::from_bodies(
        geom.bs_pose(),
        mue,
        scatterers,
        geom.reflect_var_sense,
        geom.reflect_var_comm,
        geom.min_scatterer_distance,
    )
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = norm(v);
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Circularly symmetric complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Reflection factors for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Fading {
    pub beta_sense: Vec<Complex64>,
    /// Entry 0 is unused (the line of sight has no scattering factor).
    pub beta_comm: Vec<Complex64>,
}

impl Fading {
    pub fn draw<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Self {
        let beta_sense = scenario
            .paths
            .iter()
            .map(|p| complex_gaussian(rng, p.reflect_var_sense))
            .collect();
        let beta_comm = scenario
            .paths
            .iter()
            .map(|p| {
                if p.index == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    complex_gaussian(rng, p.reflect_var_comm)
                }
            })
            .collect();
        Self {
            beta_sense,
            beta_comm,
        }
    }

    /// Every factor fixed at its RMS value with zero phase.
    pub fn rms(scenario: &Scenario) -> Self {
        Self {
            beta_sense: scenario
                .paths
                .iter()
                .map(|p| Complex64::new(p.reflect_var_sense.sqrt(), 0.0))
                .collect(),
            beta_comm: scenario
                .paths
                .iter()
                .map(|p| {
                    let v = if p.index == 0 { 1.0 } else { p.reflect_var_comm };
                    Complex64::new(v.sqrt(), 0.0)
                })
                .collect(),
        }
    }
}
