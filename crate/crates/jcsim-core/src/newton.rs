//! Newton refinement of coarse spectral minima.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Stop once the update magnitude drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Abort when the iterate drifts further than this from the start.
    #[serde(skip)]
    pub max_excursion: f64,
    /// Curvature magnitudes below this are treated as singular.
    pub min_curvature: f64,
    /// Length of the downhill step taken where the curvature is negative;
    /// zero disables it and such starts fall back.
    #[serde(skip)]
    pub descent_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 20,
            max_excursion: f64::INFINITY,
            min_curvature: 1e-14,
            descent_step: 0.0,
        }
    }
}

/// A refined spectral minimum. `spectrum == 1 / objective`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate<P> {
    pub value: P,
    pub spectrum: f64,
    pub objective: f64,
    /// Updates larger than the tolerance that were applied.
    pub iterations: usize,
    pub converged: bool,
}

impl<P> SpectrumEstimate<P> {
    pub fn new(value: P, objective: f64, iterations: usize, converged: bool) -> Self {
        Self {
            value,
            spectrum: spectrum_of(objective),
            objective,
            iterations,
            converged,
        }
    }
}

/// `S = 1 / f`, guarded against an exact zero.
pub fn spectrum_of(objective: f64) -> f64 {
    1.0 / objective.max(f64::MIN_POSITIVE)
}

/// Minimizes a scalar objective from `x0`. `eval` returns `(f, f', f'')`.
///
/// Falls back to `x0` (with `converged = false`) on singular curvature,
/// negative curvature without a descent step, excursion beyond the allowed
/// radius, or an objective increase.
pub fn newton_refine<F>(eval: F, x0: f64, opts: &NewtonOptions) -> SpectrumEstimate<f64>
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let (f0, _, _) = eval(x0);
    let fallback = |iters| SpectrumEstimate::new(x0, f0, iters, false);
    let mut x = x0;
    for it in 1..=opts.max_iter {
        let (fx, d1, d2) = eval(x);
        if !(d2.abs() >= opts.min_curvature) {
            return fallback(it - 1);
        }
        let step = if d2 > 0.0 {
            damp(|t| eval(x - t * d1 / d2).0, fx, opts.descent_step > 0.0) * d1 / d2
        } else {
            match downhill(|t| eval(x - t * d1.signum()).0, fx, opts.descent_step) {
                Some(t) => t * d1.signum(),
                None => return fallback(it - 1),
            }
        };
        x -= step;
        if !x.is_finite() || (x - x0).abs() > opts.max_excursion {
            return fallback(it);
        }
        if step.abs() < opts.tol {
            let (f, _, _) = eval(x);
            return if f <= f0 + 1e-12 {
                SpectrumEstimate::new(x, f, it - 1, true)
            } else {
                fallback(it)
            };
        }
    }
    fallback(opts.max_iter)
}

/// Two-parameter Newton iteration. `eval` returns `(f, gradient, hessian)`.
pub fn newton_refine_2d<F>(eval: F, x0: [f64; 2], opts: &NewtonOptions) -> SpectrumEstimate<[f64; 2]>
where
    F: Fn([f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]),
{
    let (f0, _, _) = eval(x0);
    let fallback = |iters| SpectrumEstimate::new(x0, f0, iters, false);
    let mut x = x0;
    for it in 1..=opts.max_iter {
        let (fx, g, h) = eval(x);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(det.abs() >= opts.min_curvature) {
            return fallback(it - 1);
        }
        let (s0, s1) = if det > 0.0 && h[0][0] > 0.0 {
            let n0 = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
            let n1 = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
            let t = damp(|t| eval([x[0] - t * n0, x[1] - t * n1]).0, fx, opts.descent_step > 0.0);
            (t * n0, t * n1)
        } else {
            let norm = g[0].hypot(g[1]);
            if norm == 0.0 {
                return fallback(it - 1);
            }
            let u = [g[0] / norm, g[1] / norm];
            match downhill(|t| eval([x[0] - t * u[0], x[1] - t * u[1]]).0, fx, opts.descent_step) {
                Some(t) => (t * u[0], t * u[1]),
                None => return fallback(it - 1),
            }
        };
        x = [x[0] - s0, x[1] - s1];
        let moved = ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).sqrt();
        if !(x[0].is_finite() && x[1].is_finite()) || moved > opts.max_excursion {
            return fallback(it);
        }
        if s0.hypot(s1) < opts.tol {
            let (f, _, _) = eval(x);
            return if f <= f0 + 1e-12 {
                SpectrumEstimate::new(x, f, it - 1, true)
            } else {
                fallback(it)
            };
        }
    }
    fallback(opts.max_iter)
}

/// Largest of `step, step/2, ...` (eight halvings) that lowers `f` below `f0`.
fn downhill<F: Fn(f64) -> f64>(f: F, f0: f64, step: f64) -> Option<f64> {
    if !(step > 0.0) {
        return None;
    }
    let mut t = step;
    for _ in 0..8 {
        if f(t) < f0 {
            return Some(t);
        }
        t *= 0.5;
    }
    None
}

/// Fraction of a full Newton step to apply: halved while the step raises
/// the objective, at most eight times. Always one when `enabled` is false.
fn damp<F: Fn(f64) -> f64>(f: F, f0: f64, enabled: bool) -> f64 {
    if !enabled {
        return 1.0;
    }
    let mut t = 1.0;
    for _ in 0..8 {
        if f(t) <= f0 {
            return t;
        }
        t *= 0.5;
    }
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges_in_one_step() {
        let a = 3.25;
        let est = newton_refine(|x| ((x - a).powi(2), 2.0 * (x - a), 2.0), -1.0, &NewtonOptions::default());
        assert_eq!(est.value, a);
        assert!(est.converged);
        assert_eq!(est.iterations, 1);
    }

    #[test]
    fn fixed_point_is_kept() {
        let est = newton_refine(|x| (x * x, 2.0 * x, 2.0), 0.0, &NewtonOptions::default());
        assert_eq!(est.value, 0.0);
        assert_eq!(est.iterations, 0);
        assert!(est.converged);
    }

    #[test]
    fn singular_curvature_falls_back() {
        let est = newton_refine(|x| (x, 1.0, 0.0), 0.5, &NewtonOptions::default());
        assert_eq!(est.value, 0.5);
        assert!(!est.converged);
    }

    #[test]
    fn concave_start_falls_back() {
        let est = newton_refine(|x| (-x * x, -2.0 * x, -2.0), 0.5, &NewtonOptions::default());
        assert!(!est.converged);
        assert_eq!(est.value, 0.5);
    }

    #[test]
    fn concave_start_descends_when_allowed() {
        let opts = NewtonOptions {
            descent_step: 0.25,
            ..NewtonOptions::default()
        };
        let f = |x: f64| (x.powi(4) - x * x, 4.0 * x.powi(3) - 2.0 * x, 12.0 * x * x - 2.0);
        let est = newton_refine(f, 0.1, &opts);
        assert!(est.converged);
        assert!((est.value - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn two_dim_saddle_start_descends() {
        let opts = NewtonOptions {
            descent_step: 0.25,
            ..NewtonOptions::default()
        };
        let f = |x: [f64; 2]| {
            let (a, b) = (x[0], x[1]);
            (
                a.powi(4) - a * a + b * b,
                [4.0 * a.powi(3) - 2.0 * a, 2.0 * b],
                [[12.0 * a * a - 2.0, 0.0], [0.0, 2.0]],
            )
        };
        let est = newton_refine_2d(f, [0.1, 0.3], &opts);
        assert!(est.converged);
        assert!((est.value[0] - 0.5f64.sqrt()).abs() < 1e-9 && est.value[1].abs() < 1e-9);
    }

    #[test]
    fn two_dim_quadratic() {
        let f = |x: [f64; 2]| {
            let (a, b) = (x[0] - 1.0, x[1] + 2.0);
            (
                a * a + a * b + 2.0 * b * b,
                [2.0 * a + b, a + 4.0 * b],
                [[2.0, 1.0], [1.0, 4.0]],
            )
        };
        let est = newton_refine_2d(f, [0.0, 0.0], &NewtonOptions::default());
        assert!(est.converged);
        assert!((est.value[0] - 1.0).abs() < 1e-12 && (est.value[1] + 2.0).abs() < 1e-12);
    }
}
