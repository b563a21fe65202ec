//! Sinusoid extraction from Rabi traces.
//!
//! A least-squares periodogram seeds a damped Gauss-Newton
//! (Levenberg-Marquardt) refinement of
//! `offset + amplitude * exp(-tau/decay_time) * cos(2 pi frequency tau + phase)`.
//! The solver works in normalized units (probe durations divided by the
//! largest one, samples by their largest magnitude) so the normal matrix
//! stays well conditioned for nanosecond grids and picoampere signals.

pub mod model;
pub mod periodogram;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::wrap_pi;
use crate::readout::trace::RabiTrace;

pub use model::{jacobian, SineParams, PARAM_NAMES};
pub use periodogram::{periodogram_peak, PeriodogramPeak};

/// Amplitude-to-residual ratio below which the fitted phase is flagged unreliable.
pub const RELIABLE_SNR: f64 = 3.0;

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
const GRADIENT_TOL: f64 = 1e-8;
const RCOND_MIN: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative step size that ends the iteration.
    pub tolerance: f64,
    pub fit_decay: bool,
    /// Hold the frequency at the initial guess.
    pub fix_frequency: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
            fit_decay: false,
            fix_frequency: false,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("fit.max_iterations", "must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config("fit.tolerance", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub offset: f64,
    /// Seconds; `None` when no decay was fitted (or it came out non-positive).
    pub decay_time: Option<f64>,
    pub covariance_order: Vec<String>,
    /// Row-major; decay entries refer to the decay rate.
    pub covariance: Vec<Vec<f64>>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub phase_reliable: bool,
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

impl SinusoidFit {
    pub fn params(&self) -> SineParams {
        SineParams {
            offset: self.offset,
            amplitude: self.amplitude,
            frequency: self.frequency,
            phase: self.phase,
            decay_rate: self.decay_time.map_or(0.0, |t| 1.0 / t),
        }
    }

    fn variance(&self, idx: usize) -> Option<f64> {
        self.covariance.get(idx).and_then(|row| row.get(idx)).copied()
    }

    pub fn phase_sigma(&self) -> Option<f64> {
        self.variance(model::PHASE).map(f64::sqrt)
    }

    pub fn amplitude_sigma(&self) -> Option<f64> {
        self.variance(model::AMPLITUDE).map(f64::sqrt)
    }

    /// Amplitude relative to the offset (the spin-independent level).
    pub fn relative_amplitude(&self) -> f64 {
        if self.offset != 0.0 {
            self.amplitude / self.offset.abs()
        } else {
            self.amplitude
        }
    }

    fn from_params(p: SineParams, fit_decay: bool) -> Self {
        let dim = if fit_decay { 5 } else { 4 };
        Self {
            amplitude: p.amplitude,
            frequency: p.frequency,
            phase: p.phase,
            offset: p.offset,
            decay_time: (p.decay_rate > 0.0).then(|| 1.0 / p.decay_rate),
            covariance_order: PARAM_NAMES[..dim].iter().map(|s| s.to_string()).collect(),
            covariance: Vec::new(),
            residual_rms: 0.0,
            converged: false,
            iterations: 0,
            phase_reliable: true,
            objective_history: Vec::new(),
        }
    }
}

/// Periodogram seed for the nonlinear fit (covariance left empty).
pub fn initial_guess(trace: &RabiTrace) -> Result<SinusoidFit> {
    trace.validate()?;
    let peak = periodogram_peak(trace)?;
    Ok(SinusoidFit::from_params(peak.params, false))
}

/// Maps a raw optimum onto `amplitude >= 0`, `frequency > 0`, `phase` in `(-pi, pi]`.
///
/// Returns the canonical parameters and the per-parameter sign flips that
/// carry the covariance along.
pub fn canonicalize(p: SineParams) -> (SineParams, [f64; 5]) {
    let mut q = p;
    let mut signs = [1.0; 5];
    if q.frequency < 0.0 {
        q.frequency = -q.frequency;
        q.phase = -q.phase;
        signs[model::FREQUENCY] = -1.0;
        signs[model::PHASE] = -1.0;
    }
    if q.amplitude < 0.0 {
        q.amplitude = -q.amplitude;
        q.phase += std::f64::consts::PI;
        signs[model::AMPLITUDE] = -1.0;
    }
    q.phase = wrap_pi(q.phase);
    (q, signs)
}

/// Least-squares refinement of `guess` against `trace`.
///
/// Non-convergence within the iteration budget is not an error: the best
/// point found is returned with `converged = false`.
pub fn fit_sinusoid(trace: &RabiTrace, guess: &SinusoidFit, opts: &FitOptions) -> Result<SinusoidFit> {
    trace.validate()?;
    opts.validate()?;
    let t_scale = trace.tau_values.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let y_scale = trace.samples.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if !(t_scale > 0.0) || !(y_scale > 0.0) {
        return Err(Error::FlatTrace);
    }
    let t: Vec<f64> = trace.tau_values.iter().map(|v| v / t_scale).collect();
    let y = DVector::from_iterator(trace.len(), trace.samples.iter().map(|v| v / y_scale));

    // Normalized <-> physical parameter scale factors.
    let unit = [y_scale, y_scale, 1.0 / t_scale, 1.0, 1.0 / t_scale];
    let g = guess.params().to_array();
    let start = SineParams::from_array(std::array::from_fn(|k| {
        if opts.fit_decay || k != model::DECAY {
            g[k] / unit[k]
        } else {
            0.0
        }
    }));

    let active: Vec<usize> = (0..if opts.fit_decay { 5 } else { 4 })
        .filter(|&k| !(opts.fix_frequency && k == model::FREQUENCY))
        .collect();
    let n_params = active.len();
    if trace.len() <= n_params {
        return Err(Error::TooFewSamples(trace.len()));
    }

    let residuals = |p: &SineParams| -> DVector<f64> {
        DVector::from_iterator(t.len(), t.iter().zip(y.iter()).map(|(&ti, &yi)| yi - p.value(ti)))
    };
    let active_jacobian = |p: &SineParams| -> DMatrix<f64> {
        let full = jacobian(p, &t, opts.fit_decay);
        full.select_columns(active.iter())
    };

    let mut p = start;
    let mut r = residuals(&p);
    let mut ssr = r.norm_squared();
    let mut history = vec![ssr];
    let mut lambda = LAMBDA_START;
    let mut converged = false;
    let mut iterations = 0;
    let zero_ssr = 1e-30 * t.len() as f64;

    while iterations < opts.max_iterations {
        if ssr <= zero_ssr {
            converged = true;
            break;
        }
        let j = active_jacobian(&p);
        let grad = j.transpose() * &r;
        if gradient_small(&j, &grad, ssr) {
            converged = true;
            break;
        }
        iterations += 1;
        let h = j.transpose() * &j;
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = h.clone();
            for k in 0..n_params {
                damped[(k, k)] += lambda * h[(k, k)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&grad);
            let mut arr = p.to_array();
            for (i, &k) in active.iter().enumerate() {
                arr[k] += step[i];
            }
            let trial = SineParams::from_array(arr);
            let r_trial = residuals(&trial);
            let ssr_trial = r_trial.norm_squared();
            if ssr_trial.is_finite() && ssr_trial < ssr {
                let p_norm = active.iter().map(|&k| p.to_array()[k].powi(2)).sum::<f64>().sqrt();
                let small_step = step.norm() <= opts.tolerance * (p_norm + opts.tolerance);
                p = trial;
                r = r_trial;
                ssr = ssr_trial;
                history.push(ssr);
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No descent direction left at machine precision.
            let j = active_jacobian(&p);
            converged = gradient_small(&j, &(j.transpose() * &r), ssr) || ssr <= zero_ssr;
            break;
        }
    }

    if p.amplitude.abs() <= 1e-12 {
        return Err(Error::DegenerateFit(
            "fitted amplitude is zero; phase is unidentifiable".into(),
        ));
    }

    let j = active_jacobian(&p);
    let h = j.transpose() * &j;
    let inv = invert_normal_matrix(&h)?;
    let dof = (t.len() - n_params) as f64;
    let sigma2 = ssr / dof;

    let (canon, signs) = canonicalize(p);
    let dim = if opts.fit_decay { 5 } else { 4 };
    let mut cov = vec![vec![0.0; dim]; dim];
    for (a, &ka) in active.iter().enumerate() {
        for (b, &kb) in active.iter().enumerate().take(a + 1) {
            let sym = 0.5 * (inv[(a, b)] + inv[(b, a)]);
            let v = sigma2 * sym * unit[ka] * unit[kb] * signs[ka] * signs[kb];
            cov[ka][kb] = v;
            cov[kb][ka] = v;
        }
    }

    let physical = SineParams::from_array(std::array::from_fn(|k| canon.to_array()[k] * unit[k]));
    let residual_rms = (ssr / t.len() as f64).sqrt() * y_scale;
    let mut fit = SinusoidFit::from_params(physical, opts.fit_decay);
    fit.covariance = cov;
    fit.residual_rms = residual_rms;
    fit.converged = converged;
    fit.iterations = iterations;
    fit.phase_reliable = residual_rms == 0.0 || physical.amplitude / residual_rms >= RELIABLE_SNR;
    fit.objective_history = history.iter().map(|s| s * y_scale * y_scale).collect();
    Ok(fit)
}

/// Periodogram seed followed by least-squares refinement.
pub fn fit_trace(trace: &RabiTrace, opts: &FitOptions) -> Result<SinusoidFit> {
    let guess = initial_guess(trace)?;
    fit_sinusoid(trace, &guess, opts)
}

/// Least-squares fit with the frequency held at `frequency`, seeded by the
/// linear quadrature solution at that frequency.
pub fn fit_at_frequency(trace: &RabiTrace, frequency: f64, opts: &FitOptions) -> Result<SinusoidFit> {
    trace.validate()?;
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::config("frequency", "must be positive"));
    }
    let (params, _) = periodogram::quadrature_fit(trace, frequency)
        .ok_or_else(|| Error::DegenerateFit("probe grid cannot resolve this frequency".into()))?;
    let guess = SinusoidFit::from_params(params, false);
    let fixed = FitOptions {
        fix_frequency: true,
        ..*opts
    };
    fit_sinusoid(trace, &guess, &fixed)
}

/// Cosine between the residual and each Jacobian column (MINPACK `gtol` test).
fn gradient_small(j: &DMatrix<f64>, grad: &DVector<f64>, ssr: f64) -> bool {
    let r_norm = ssr.sqrt();
    j.column_iter().zip(grad.iter()).all(|(col, g)| {
        let denom = col.norm() * r_norm;
        denom == 0.0 || g.abs() / denom <= GRADIENT_TOL
    })
}

fn invert_normal_matrix(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = h.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(max > 0.0) || min <= RCOND_MIN * max {
        return Err(Error::DegenerateFit(format!(
            "normal matrix is singular (eigenvalue ratio {:e})",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    h.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::DegenerateFit("normal matrix is not positive definite".into()))
}
