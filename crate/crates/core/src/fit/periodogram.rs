//! Least-squares periodogram used to seed the nonlinear fit.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fit::model::SineParams;
use crate::readout::trace::{RabiTrace, MIN_SAMPLES};

/// Grid points per 1/span of frequency.
const OVERSAMPLING: f64 = 16.0;
const MIN_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodogramPeak {
    pub frequency: f64,
    pub grid_step: f64,
    pub power: f64,
    pub params: SineParams,
}

/// Frequency search window: `[0.25, 4] x nominal`, or up to Nyquist when unknown.
pub fn search_band(trace: &RabiTrace) -> (f64, f64) {
    let span = trace.span();
    match trace.nominal_frequency {
        Some(f) => (0.25 * f, 4.0 * f),
        None => {
            let n = trace.len() as f64;
            (0.5 / span, 0.5 * (n - 1.0) / span)
        }
    }
}

/// Best single-frequency least-squares fit over a dense grid.
///
/// At each trial frequency the offset and both quadratures are solved
/// jointly; the score is the sum of squares explained beyond the mean.
/// Ties go to the lowest frequency.
pub fn periodogram_peak(trace: &RabiTrace) -> Result<PeriodogramPeak> {
    if trace.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples(trace.len()));
    }
    let span = trace.span();
    if !(span > 0.0) {
        return Err(Error::TraceMismatch("probe durations span zero time".into()));
    }
    if let Some(f) = trace.nominal_frequency {
        if span * f < 1.0 {
            return Err(Error::InsufficientSpan { periods: span * f });
        }
    }
    let n = trace.len() as f64;
    let mean = trace.samples.iter().sum::<f64>() / n;
    let total_ss: f64 = trace.samples.iter().map(|y| (y - mean).powi(2)).sum();
    let scale = trace.samples.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if !(total_ss > (1e-13 * scale).powi(2) * n) {
        return Err(Error::FlatTrace);
    }

    let (lo, hi) = search_band(trace);
    let count = (((hi - lo) * span * OVERSAMPLING).ceil() as usize).max(MIN_GRID);
    let step = (hi - lo) / (count - 1) as f64;
    let mut powers = vec![f64::NEG_INFINITY; count];
    let mut best: Option<(usize, PeriodogramPeak)> = None;
    for (k, slot) in powers.iter_mut().enumerate() {
        let f = lo + step * k as f64;
        let Some((params, rss)) = quadrature_fit(trace, f) else {
            continue;
        };
        let power = total_ss - rss;
        *slot = power;
        if best.is_none_or(|(_, b)| power > b.power) {
            let peak = PeriodogramPeak {
                frequency: f,
                grid_step: step,
                power,
                params,
            };
            best = Some((k, peak));
        }
    }
    let (k, peak) = best.ok_or(Error::FlatTrace)?;
    Ok(refine(trace, &powers, k, peak, total_ss))
}

/// Parabolic interpolation of the peak between its grid neighbours, kept
/// only when it explains more of the signal than the grid point itself.
fn refine(trace: &RabiTrace, powers: &[f64], k: usize, peak: PeriodogramPeak, total_ss: f64) -> PeriodogramPeak {
    if k == 0 || k + 1 >= powers.len() {
        return peak;
    }
    let (a, b, c) = (powers[k - 1], powers[k], powers[k + 1]);
    let curvature = a - 2.0 * b + c;
    if !(curvature < 0.0) || !a.is_finite() || !c.is_finite() {
        return peak;
    }
    let shift = (0.5 * (a - c) / curvature).clamp(-0.5, 0.5);
    let f = peak.frequency + shift * peak.grid_step;
    match quadrature_fit(trace, f) {
        Some((params, rss)) if total_ss - rss > peak.power => PeriodogramPeak {
            frequency: f,
            power: total_ss - rss,
            params,
            ..peak
        },
        _ => peak,
    }
}

/// Solves `y ~ o + a cos(wt) + b sin(wt)` at fixed `f`; returns params and residual sum of squares.
pub(crate) fn quadrature_fit(trace: &RabiTrace, f: f64) -> Option<(SineParams, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    let basis = |tau: f64| {
        let (s, c) = (TAU * f * tau).sin_cos();
        Vector3::new(1.0, c, s)
    };
    for (&tau, &y) in trace.tau_values.iter().zip(&trace.samples) {
        let row = basis(tau);
        ata += row * row.transpose();
        aty += row * y;
    }
    let sol = ata.cholesky()?.solve(&aty);
    let rss: f64 = trace
        .tau_values
        .iter()
        .zip(&trace.samples)
        .map(|(&tau, &y)| (y - basis(tau).dot(&sol)).powi(2))
        .sum();
    let (a, b) = (sol[1], sol[2]);
    Some((
        SineParams {
            offset: sol[0],
            amplitude: a.hypot(b),
            frequency: f,
            phase: (-b).atan2(a),
            decay_rate: 0.0,
        },
        rss,
    ))
}
