//! MUSIC estimation: covariance eigendecomposition, source counting, the 2D
//! angle search, symbol erasure and the range/Doppler searches.
//!
//! Every search follows the same two steps:
//! 1. evaluate `f(x) = ||P_N a(x)||^2` on a coarse grid and keep the strict
//!    local minima of `f` (maxima of `S = 1/f`) with the largest `S`;
//! 2. refine each with Newton's method on `f`.
//!
//! `P_N a` is formed as `a - U_s (U_s^H a)`, so the noise basis never needs to
//! be materialized.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{spatial_steering_derivs, wrap_angle, Angle2D, ArrayConfig, PhaseRamp};
use crate::error::{Error, Result};
use crate::linalg::{
    factor_eigen, gram_rows, norm_sqr, orthogonal_complement, project_out, re_dot, CMatrix,
    HermitianEigen,
};
use crate::newton::{newton_refine, newton_refine_2d, spectrum_of, NewtonOptions, SpectrumEstimate};

/// Relative eigenvalue level treated as numerical zero.
const ROUNDOFF: f64 = 1e-12;

/// Result of the differential eigenvalue test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceCount {
    pub count: usize,
    /// Threshold relative to the mean eigenvalue.
    pub alpha_t: f64,
    /// No gap passed the test and the count defaulted to one.
    pub fallback: bool,
}

/// Counts sources from descending eigenvalues.
///
/// Gaps `v[i] - v[i+1]` are compared to `(1 + eps)` times the mean of the
/// latter half of the gaps. The count starts at the largest passing gap and
/// extends over the run of passing gaps that follows it. Values below
/// `1e-12` of the largest are round-off and count as zero.
pub fn detect_source_count(eigenvalues: &[f64], eps: f64) -> SourceCount {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let cleaned: Vec<f64> = eigenvalues
        .iter()
        .map(|&v| if v > top * ROUNDOFF { v } else { 0.0 })
        .collect();
    let eigenvalues = cleaned.as_slice();
    let n = eigenvalues.len();
    let mean = eigenvalues.iter().sum::<f64>() / n.max(1) as f64;
    if n < 2 {
        return SourceCount {
            count: 1,
            alpha_t: if mean > 0.0 { 1.0 } else { 0.0 },
            fallback: true,
        };
    }
    let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[0] - w[1]).collect();
    // 1-based start index floor((n - 1) / 2), clamped to the first gap
    let start = ((n - 1) / 2).max(1) - 1;
    let tail = &gaps[start..];
    let vbar = tail.iter().sum::<f64>() / tail.len() as f64;
    let level = (1.0 + eps) * vbar;
    let mut best: Option<usize> = None;
    for (i, &g) in gaps.iter().enumerate() {
        if g > level && best.map_or(true, |b| g > gaps[b]) {
            best = Some(i);
        }
    }
    if let Some(b) = best.as_mut() {
        while *b + 1 < gaps.len() && gaps[*b + 1] > level {
            *b += 1;
        }
    }
    let (count, fallback) = match best {
        Some(i) => (i + 1, false),
        None => (1, true),
    };
    let alpha_t = if mean > 0.0 {
        eigenvalues[count - 1] / mean
    } else {
        0.0
    };
    SourceCount {
        count,
        alpha_t,
        fallback,
    }
}

/// Signal/noise split of a covariance matrix.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    /// Descending, length equal to the ambient dimension.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal `n x N_x` signal basis.
    pub signal_basis: CMatrix,
    pub source_count: usize,
    pub threshold: f64,
    pub fallback: bool,
}

impl SubspaceDecomposition {
    /// Splits an eigendecomposition; `count` overrides the differential test.
    ///
    /// The test only sees the first `rank_bound` values; past that the
    /// sample covariance is zero by construction, not by noise.
    pub fn from_eigen(eig: &HermitianEigen, count: Option<usize>, eps: f64) -> Self {
        let n = eig.values.len();
        let visible = eig.rank_bound.clamp(2.min(n), n);
        let detected = detect_source_count(&eig.values[..visible], eps);
        let (source_count, fallback) = match count {
            Some(k) => (k.min(n), false),
            None => (detected.count, detected.fallback),
        };
        let available = eig.vectors.ncols();
        let k = source_count.min(available);
        let mean = eig.values.iter().sum::<f64>() / n as f64;
        let threshold = if mean > 0.0 && source_count > 0 {
            eig.values[source_count - 1] / mean
        } else {
            detected.alpha_t
        };
        Self {
            eigenvalues: eig.values.clone(),
            signal_basis: eig.vectors.columns(0, k).into_owned(),
            source_count,
            threshold,
            fallback,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Explicit orthonormal noise basis `U_N`.
    pub fn noise_basis(&self) -> CMatrix {
        orthogonal_complement(&self.signal_basis)
    }

    /// `P_N a`.
    pub fn project_noise(&self, a: &[Complex64], out: &mut [Complex64]) {
        project_out(&self.signal_basis, a, out);
    }

    /// `||U_N^H a||^2`.
    pub fn objective(&self, a: &[Complex64]) -> f64 {
        let mut r = vec![Complex64::new(0.0, 0.0); a.len()];
        self.project_noise(a, &mut r);
        norm_sqr(&r)
    }
}

/// `scale * Y Y^H` as an explicit matrix.
pub fn covariance(snapshots: &CMatrix, scale: f64) -> CMatrix {
    gram_rows(snapshots, scale)
}

/// Spatial covariance `Y Y^H / (N_c M_s)` decomposed.
pub fn spatial_decomposition(y_s: &CMatrix, count: Option<usize>, eps: f64) -> SubspaceDecomposition {
    let eig = factor_eigen(y_s, 1.0 / y_s.ncols() as f64);
    SubspaceDecomposition::from_eigen(&eig, count, eps)
}

/// Range covariance `H H^H / M_s` decomposed.
pub fn range_decomposition(hbar: &CMatrix, count: Option<usize>, eps: f64) -> SubspaceDecomposition {
    let eig = factor_eigen(hbar, 1.0 / hbar.ncols() as f64);
    SubspaceDecomposition::from_eigen(&eig, count, eps)
}

/// Doppler covariance `H^T H^* / N_c` decomposed.
pub fn doppler_decomposition(hbar: &CMatrix, count: Option<usize>, eps: f64) -> SubspaceDecomposition {
    let eig = factor_eigen(&hbar.transpose(), 1.0 / hbar.nrows() as f64);
    SubspaceDecomposition::from_eigen(&eig, count, eps)
}

/// Estimator settings shared by the spatial, range and Doppler searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MusicOptions {
    pub epsilon: f64,
    /// Coarse angle grid step, radians.
    pub angle_step: f64,
    /// Upper end of the elevation search, radians.
    pub max_elevation: f64,
    /// Range grid step as a fraction of the range resolution.
    pub range_grid_fraction: f64,
    /// Doppler grid step as a fraction of the Doppler resolution.
    pub doppler_grid_fraction: f64,
    pub newton: NewtonOptions,
    /// Newton may move at most this many coarse cells from its start.
    pub max_excursion_cells: f64,
    /// Downhill step, in coarse cells, where the curvature is negative.
    pub descent_cells: f64,
}

impl Default for MusicOptions {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            angle_step: 1f64.to_radians(),
            max_elevation: PI / 2.0,
            range_grid_fraction: 0.125,
            doppler_grid_fraction: 0.125,
            newton: NewtonOptions::default(),
            max_excursion_cells: 2.0,
            descent_cells: 0.25,
        }
    }
}

impl MusicOptions {
    fn newton_for(&self, cell: f64) -> NewtonOptions {
        NewtonOptions {
            max_excursion: self.max_excursion_cells * cell,
            descent_step: self.descent_cells * cell,
            ..self.newton
        }
    }
}

/// Coarse grid over azimuth `[-pi, pi)` and elevation `[0, max_elevation]`.
#[derive(Debug, Clone)]
pub struct AngleGrid {
    pub azimuths: Vec<f64>,
    pub elevations: Vec<f64>,
}

impl AngleGrid {
    pub fn new(step: f64, max_elevation: f64) -> Self {
        let n_az = (2.0 * PI / step).round() as usize;
        let az_step = 2.0 * PI / n_az as f64;
        let n_el = (max_elevation / step).round() as usize + 1;
        let el_step = max_elevation / (n_el - 1) as f64;
        Self {
            azimuths: (0..n_az).map(|i| -PI + i as f64 * az_step).collect(),
            elevations: (0..n_el).map(|i| i as f64 * el_step).collect(),
        }
    }
}

/// Evaluates `f_a` over an angle grid; rows index elevation, columns azimuth.
pub fn spatial_objective_grid(
    cfg: &ArrayConfig,
    dec: &SubspaceDecomposition,
    grid: &AngleGrid,
) -> DMatrix<f64> {
    let k = cfg.phase_scale();
    let n = cfg.len();
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    let mut out = DMatrix::zeros(grid.elevations.len(), grid.azimuths.len());
    for (j, &az) in grid.azimuths.iter().enumerate() {
        let (sa, ca) = az.sin_cos();
        for (i, &el) in grid.elevations.iter().enumerate() {
            let se = el.sin();
            let (u, v) = (se * ca, se * sa);
            let row_step = Complex64::from_polar(1.0, -k * u);
            let col_step = Complex64::from_polar(1.0, -k * v);
            let mut rp = Complex64::new(1.0, 0.0);
            for p in 0..cfg.rows {
                let mut cq = rp;
                for q in 0..cfg.cols {
                    a[p * cfg.cols + q] = cq;
                    cq *= col_step;
                }
                rp *= row_step;
            }
            dec.project_noise(&a, &mut r);
            out[(i, j)] = norm_sqr(&r);
        }
    }
    out
}

/// `(f, gradient, hessian)` of the spatial objective.
pub fn spatial_objective_derivs(
    cfg: &ArrayConfig,
    dec: &SubspaceDecomposition,
    angle: &Angle2D,
) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let n = cfg.len();
    let a = crate::array::spatial_steering(cfg, angle).entries;
    let d = spatial_steering_derivs(cfg, angle);
    let proj = |v: &[Complex64]| {
        let mut o = vec![Complex64::new(0.0, 0.0); n];
        dec.project_noise(v, &mut o);
        o
    };
    let r = proj(a.as_slice());
    let r1 = [proj(d.d_azimuth.as_slice()), proj(d.d_elevation.as_slice())];
    let mut grad = [0.0; 2];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        grad[i] = 2.0 * re_dot(&r1[i], &r);
        for j in 0..2 {
            let rij = proj(d.hessian[i][j].as_slice());
            hess[i][j] = 2.0 * (re_dot(&rij, &r) + re_dot(&r1[i], &r1[j]));
        }
    }
    (norm_sqr(&r), grad, hess)
}

/// Strict local minima of a 2D objective. Azimuth (columns) wraps around;
/// elevation rows compare only with the rows that exist.
fn grid_minima_2d(f: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (rows, cols) = f.shape();
    let mut out = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let v = f[(i, j)];
            let mut is_min = true;
            'nb: for di in -1i64..=1 {
                let ii = i as i64 + di;
                if ii < 0 || ii >= rows as i64 {
                    continue;
                }
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(cols as i64) as usize;
                    if f[(ii as usize, jj)] <= v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                out.push((i, j));
            }
        }
    }
    out
}

/// Strict local minima of a circular 1D objective.
pub(crate) fn grid_minima_1d(f: &[f64]) -> Vec<usize> {
    let n = f.len();
    (0..n)
        .filter(|&i| {
            let prev = f[(i + n - 1) % n];
            let next = f[(i + 1) % n];
            f[i] < prev && f[i] < next
        })
        .collect()
}

/// Refines every grid candidate and keeps the `count` distinct results with
/// the smallest objective. A narrow peak can sample low on the coarse grid
/// while a ridge between two close sources samples high.
fn best_refined<C, T>(
    cands: Vec<C>,
    count: usize,
    refine: impl Fn(C) -> SpectrumEstimate<T>,
    same: impl Fn(&T, &T) -> bool,
) -> Vec<SpectrumEstimate<T>> {
    let mut refined: Vec<SpectrumEstimate<T>> = cands.into_iter().map(refine).collect();
    refined.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    let mut out: Vec<SpectrumEstimate<T>> = Vec::with_capacity(count);
    for est in refined {
        if out.len() == count {
            break;
        }
        if !out.iter().any(|o| same(&o.value, &est.value)) {
            out.push(est);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct AoaResult {
    pub estimates: Vec<SpectrumEstimate<Angle2D>>,
    pub decomposition: SubspaceDecomposition,
}

/// Spatial MUSIC on `PQ x (N_c M_s)` snapshots.
pub fn music_aoa(y_s: &CMatrix, cfg: &ArrayConfig, opts: &MusicOptions) -> Result<AoaResult> {
    if y_s.nrows() != cfg.len() || y_s.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "snapshots are {}x{}, array has {} elements",
            y_s.nrows(),
            y_s.ncols(),
            cfg.len()
        )));
    }
    let dec = spatial_decomposition(y_s, None, opts.epsilon);
    let estimates = aoa_from_decomposition(cfg, &dec, opts);
    Ok(AoaResult {
        estimates,
        decomposition: dec,
    })
}

/// Grid search plus Newton refinement on a given spatial decomposition.
pub fn aoa_from_decomposition(
    cfg: &ArrayConfig,
    dec: &SubspaceDecomposition,
    opts: &MusicOptions,
) -> Vec<SpectrumEstimate<Angle2D>> {
    let grid = AngleGrid::new(opts.angle_step, opts.max_elevation);
    let f = spatial_objective_grid(cfg, dec, &grid);
    let newton = opts.newton_for(opts.angle_step);
    let refine = |(i, j): (usize, usize)| {
        let x0 = [grid.azimuths[j], grid.elevations[i]];
        let est = newton_refine_2d(
            |x| spatial_objective_derivs(cfg, dec, &Angle2D { azimuth: x[0], elevation: x[1] }),
            x0,
            &newton,
        );
        SpectrumEstimate {
            value: fold_angle(est.value[0], est.value[1]),
            spectrum: est.spectrum,
            objective: est.objective,
            iterations: est.iterations,
            converged: est.converged,
        }
    };
    let half = opts.angle_step / 2.0;
    let same = |a: &Angle2D, b: &Angle2D| {
        wrap_angle(a.azimuth - b.azimuth).abs() < half && (a.elevation - b.elevation).abs() < half
    };
    best_refined(grid_minima_2d(&f), dec.source_count, refine, same)
}

/// Maps an unconstrained (azimuth, elevation) pair onto the search domain.
/// A planar array cannot tell `theta` from `pi - theta`, nor `-theta` from
/// `theta` at azimuth `phi + pi`.
pub fn fold_angle(azimuth: f64, elevation: f64) -> Angle2D {
    let mut az = azimuth;
    let mut el = elevation.rem_euclid(2.0 * PI);
    if el > PI {
        el = 2.0 * PI - el;
        az += PI;
    }
    if el > PI / 2.0 {
        el = PI - el;
    }
    Angle2D::new(az, el)
}

/// Receive beamforming `w^H y` per snapshot followed by division by the
/// transmitted symbols. Snapshot column `n + m N_c` maps to entry `(n, m)`.
pub fn beamform_and_erase(y_s: &CMatrix, w: &[Complex64], symbols: &CMatrix) -> Result<CMatrix> {
    let (n_c, m_s) = symbols.shape();
    if y_s.nrows() != w.len() || y_s.ncols() != n_c * m_s {
        return Err(Error::Dimension(format!(
            "snapshots {}x{} vs beam {} and symbols {}x{}",
            y_s.nrows(),
            y_s.ncols(),
            w.len(),
            n_c,
            m_s
        )));
    }
    let mut out = CMatrix::zeros(n_c, m_s);
    for m in 0..m_s {
        for n in 0..n_c {
            let d = symbols[(n, m)];
            if d.norm_sqr() == 0.0 {
                return Err(Error::ZeroSymbol {
                    subcarrier: n,
                    symbol: m,
                });
            }
            let col = y_s.column(n + m * n_c);
            let mut acc = Complex64::new(0.0, 0.0);
            for (wi, yi) in w.iter().zip(col.iter()) {
                acc += wi.conj() * yi;
            }
            out[(n, m)] = acc / d;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LineResult {
    pub estimates: Vec<SpectrumEstimate<f64>>,
    pub decomposition: SubspaceDecomposition,
}

/// Evaluates the objective of a phase-ramp model at one point.
pub fn ramp_objective_derivs(ramp: &PhaseRamp, dec: &SubspaceDecomposition, x: f64) -> (f64, f64, f64) {
    let a = ramp.steering(x).entries;
    let (d1, d2) = ramp.derivs(x);
    let n = ramp.len;
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    let mut r1 = vec![Complex64::new(0.0, 0.0); n];
    let mut r2 = vec![Complex64::new(0.0, 0.0); n];
    dec.project_noise(a.as_slice(), &mut r);
    dec.project_noise(d1.as_slice(), &mut r1);
    dec.project_noise(d2.as_slice(), &mut r2);
    let f = norm_sqr(&r);
    let g = 2.0 * re_dot(&r1, &r);
    let h = 2.0 * (re_dot(&r2, &r) + norm_sqr(&r1));
    (f, g, h)
}

/// Objective of a phase-ramp model over grid points.
pub fn ramp_objective_grid(ramp: &PhaseRamp, dec: &SubspaceDecomposition, xs: &[f64]) -> Vec<f64> {
    let mut a = vec![Complex64::new(0.0, 0.0); ramp.len];
    let mut r = vec![Complex64::new(0.0, 0.0); ramp.len];
    xs.iter()
        .map(|&x| {
            ramp.fill(x, &mut a);
            dec.project_noise(&a, &mut r);
            norm_sqr(&r)
        })
        .collect()
}

/// Uniform grid over one period of the ramp, starting at `start`.
pub fn ramp_grid(ramp: &PhaseRamp, start: f64, cells: usize) -> (Vec<f64>, f64) {
    let step = ramp.period() / cells as f64;
    ((0..cells).map(|i| start + i as f64 * step).collect(), step)
}

/// Searches `count` minima of a phase-ramp objective over one period.
pub fn line_search(
    ramp: &PhaseRamp,
    dec: &SubspaceDecomposition,
    start: f64,
    cells: usize,
    count: usize,
    opts: &MusicOptions,
) -> Vec<SpectrumEstimate<f64>> {
    let (xs, step) = ramp_grid(ramp, start, cells);
    let f = ramp_objective_grid(ramp, dec, &xs);
    let newton = opts.newton_for(step);
    let period = ramp.period();
    let same = |a: &f64, b: &f64| {
        let d = (a - b).rem_euclid(period);
        d.min(period - d) < step / 2.0
    };
    best_refined(
        grid_minima_1d(&f),
        count,
        |i| newton_refine(|x| ramp_objective_derivs(ramp, dec, x), xs[i], &newton),
        same,
    )
}

fn grid_cells(len: usize, fraction: f64) -> usize {
    ((len as f64 / fraction).round() as usize).max(2)
}

/// Range MUSIC on the erased `N_c x M_s` matrix. Estimates are round-trip
/// ranges in `[0, c / delta_f)`.
pub fn music_range(hbar: &CMatrix, ramp: &PhaseRamp, opts: &MusicOptions) -> Result<LineResult> {
    if hbar.nrows() != ramp.len {
        return Err(Error::Dimension("range ramp length differs from subcarrier count".into()));
    }
    let dec = range_decomposition(hbar, None, opts.epsilon);
    let cells = grid_cells(ramp.len, opts.range_grid_fraction);
    let estimates = line_search(ramp, &dec, 0.0, cells, dec.source_count, opts);
    Ok(LineResult {
        estimates,
        decomposition: dec,
    })
}

/// Doppler MUSIC with the source count taken from the range stage. Estimates
/// lie in `[-1/(2T), 1/(2T))`.
pub fn music_doppler(
    hbar: &CMatrix,
    ramp: &PhaseRamp,
    count: usize,
    opts: &MusicOptions,
) -> Result<LineResult> {
    if hbar.ncols() != ramp.len {
        return Err(Error::Dimension("Doppler ramp length differs from symbol count".into()));
    }
    let dec = doppler_decomposition(hbar, Some(count), opts.epsilon);
    let cells = grid_cells(ramp.len, opts.doppler_grid_fraction);
    let start = -ramp.period() / 2.0;
    let mut estimates = line_search(ramp, &dec, start, cells, count, opts);
    let period = ramp.period();
    for e in &mut estimates {
        e.value = (e.value - start).rem_euclid(period) + start;
    }
    Ok(LineResult {
        estimates,
        decomposition: dec,
    })
}

/// One sensed target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub angle: Angle2D,
    /// Round-trip range.
    pub range: f64,
    pub distance: f64,
    pub doppler: f64,
    pub velocity: f64,
    /// Position in the array frame (row axis, column axis, boresight).
    pub location: [f64; 3],
}

impl TargetEstimate {
    pub fn new(angle: Angle2D, range: f64, doppler: f64, wavelength: f64) -> Self {
        let distance = range / 2.0;
        Self {
            angle,
            range,
            distance,
            doppler,
            velocity: wavelength * doppler / 2.0,
            location: location_local(distance, &angle),
        }
    }
}

/// Spherical-to-Cartesian map in the array frame.
pub fn location_local(distance: f64, angle: &Angle2D) -> [f64; 3] {
    let d = angle.direction_cosines();
    [distance * d[0], distance * d[1], distance * d[2]]
}

/// `S = 1/f` evaluated for a ramp model at arbitrary points.
pub fn ramp_spectrum(ramp: &PhaseRamp, dec: &SubspaceDecomposition, xs: &[f64]) -> Vec<f64> {
    ramp_objective_grid(ramp, dec, xs)
        .into_iter()
        .map(spectrum_of)
        .collect()
}
