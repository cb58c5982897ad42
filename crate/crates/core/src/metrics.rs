//! Handshake quality metrics computed on the world-vertical foot paths of a
//! shake window.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::HandshakeLog;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric undefined for a passive handshake")]
    PassiveUndefined,
    #[error("empty sequence")]
    EmptySequence,
    #[error("signal variance below 1e-12")]
    DegenerateSignal,
    #[error("series have zero variance")]
    ZeroVariance,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("no full oscillation in the desired path")]
    NoOscillation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorqueMode {
    /// Σ_i mean_t |τ_i|
    #[default]
    MeanAbs,
    /// Σ_i |mean_t τ_i|
    AbsMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Peak/trough hysteresis (m).
    pub prominence_m: f64,
    /// Keep every n-th sample for DTW.
    pub dtw_downsample: usize,
    /// Fraction of samples dropped at each end for PLV.
    pub plv_edge_fraction: f64,
    /// FFT length is at least this multiple of the signal length.
    pub zero_pad_factor: usize,
    /// Spectral peaks below this are ignored (Hz).
    pub min_frequency_hz: f64,
    pub torque_mode: TorqueMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            prominence_m: 0.0005,
            dtw_downsample: 10,
            plv_edge_fraction: 0.1,
            zero_pad_factor: 8,
            min_frequency_hz: 0.25,
            torque_mode: TorqueMode::MeanAbs,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.prominence_m > 0.0) || self.dtw_downsample == 0 || self.zero_pad_factor == 0 {
            return Err("prominence, downsample and zero-pad factor must be positive".into());
        }
        if !(0.0..0.5).contains(&self.plv_edge_fraction) {
            return Err("plv_edge_fraction must be in [0, 0.5)".into());
        }
        if !(self.min_frequency_hz >= 0.0) {
            return Err("min_frequency_hz must be nonnegative".into());
        }
        Ok(())
    }
}

/// Least-squares line removed.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.iter().map(|_| 0.0).collect();
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    x.iter()
        .enumerate()
        .map(|(i, v)| v - x_mean - slope * (i as f64 - t_mean))
        .collect()
}

/// Alternating peaks and troughs, each confirmed once the signal has moved
/// back by at least `prominence`.
pub fn extrema(x: &[f64], prominence: f64) -> Vec<f64> {
    #[derive(PartialEq)]
    enum Dir {
        Unknown,
        Rising,
        Falling,
    }
    let mut out = Vec::new();
    let Some(&first) = x.first() else {
        return out;
    };
    let (mut hi, mut lo) = (first, first);
    let mut dir = Dir::Unknown;
    for &v in &x[1..] {
        match dir {
            Dir::Unknown => {
                hi = hi.max(v);
                lo = lo.min(v);
                if hi - first >= prominence && hi - v < prominence {
                    dir = Dir::Rising;
                    lo = v;
                } else if first - lo >= prominence && v - lo < prominence {
                    dir = Dir::Falling;
                    hi = v;
                }
            }
            Dir::Rising => {
                if v > hi {
                    hi = v;
                } else if hi - v >= prominence {
                    out.push(hi);
                    dir = Dir::Falling;
                    lo = v;
                }
            }
            Dir::Falling => {
                if v < lo {
                    lo = v;
                } else if v - lo >= prominence {
                    out.push(lo);
                    dir = Dir::Rising;
                    hi = v;
                }
            }
        }
    }
    out
}

/// Mean half peak-to-trough distance over consecutive extrema of the
/// detrended signal; 0 when it never oscillates.
pub fn oscillation_amplitude(x: &[f64], prominence: f64) -> f64 {
    let ex = extrema(&detrend(x), prominence);
    if ex.len() < 2 {
        return 0.0;
    }
    let halves: Vec<f64> = ex.windows(2).map(|w| (w[0] - w[1]).abs() / 2.0).collect();
    halves.iter().sum::<f64>() / halves.len() as f64
}

/// Dominant frequency of the detrended, Hann-windowed, zero-padded signal,
/// refined by a parabola through the log magnitudes around the peak bin.
pub fn dominant_frequency(x: &[f64], dt: f64, cfg: &MetricsConfig) -> Result<f64, MetricError> {
    if x.len() < 4 {
        return Err(MetricError::TooShort { need: 4, got: x.len() });
    }
    let d = detrend(x);
    if variance(&d) < 1e-12 {
        return Err(MetricError::DegenerateSignal);
    }
    let n = d.len();
    let len = (n * cfg.zero_pad_factor).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = d
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let df = 1.0 / (len as f64 * dt);
    let lo = ((cfg.min_frequency_hz / df).ceil() as usize).max(1);
    let hi = len / 2;
    if lo + 1 >= hi {
        return Err(MetricError::TooShort { need: lo + 2, got: hi });
    }
    let mag: Vec<f64> = buf[..=hi].iter().map(|c| c.norm()).collect();
    let k = (lo..hi)
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
        .expect("nonempty bin range");
    let offset = if k > 0 && k < hi && mag[k - 1] > 0.0 && mag[k + 1] > 0.0 {
        let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok((k as f64 + offset) * df)
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
}

/// Relative amplitude error in percent. Both amplitudes come from the same
/// extrema estimator, so a log that tracks perfectly scores exactly 0.
pub fn amplitude_error(log: &HandshakeLog, cfg: &MetricsConfig) -> Result<f64, MetricError> {
    if log.params.amplitude_m == 0.0 || log.params.frequency_hz == 0.0 {
        return Err(MetricError::PassiveUndefined);
    }
    let desired = oscillation_amplitude(&log.desired_vertical(), cfg.prominence_m);
    if desired == 0.0 {
        return Err(MetricError::NoOscillation);
    }
    let actual = oscillation_amplitude(&log.actual_vertical(), cfg.prominence_m);
    Ok(100.0 * (actual - desired).abs() / desired)
}

/// Relative frequency error in percent, both frequencies from
/// [`dominant_frequency`].
pub fn frequency_error(log: &HandshakeLog, cfg: &MetricsConfig) -> Result<f64, MetricError> {
    if log.params.amplitude_m == 0.0 || log.params.frequency_hz == 0.0 {
        return Err(MetricError::PassiveUndefined);
    }
    let desired = dominant_frequency(&log.desired_vertical(), log.dt, cfg)?;
    let actual = dominant_frequency(&log.actual_vertical(), log.dt, cfg)?;
    Ok(100.0 * (actual - desired).abs() / desired)
}

/// Classic dynamic time warping: absolute-difference cost, unconstrained
/// window, summed along the cheapest monotone path.
pub fn dtw(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::EmptySequence);
    }
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &xi in x {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = (xi - y[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
        prev[0] = f64::INFINITY;
    }
    Ok(prev[m])
}

/// DTW between the desired and actual vertical paths at the configured
/// downsampling.
pub fn path_dtw(log: &HandshakeLog, cfg: &MetricsConfig) -> Result<f64, MetricError> {
    let step = cfg.dtw_downsample;
    let d: Vec<f64> = log.desired_vertical().into_iter().step_by(step).collect();
    let a: Vec<f64> = log.actual_vertical().into_iter().step_by(step).collect();
    dtw(&d, &a)
}

/// Instantaneous phase of the analytic signal (FFT Hilbert transform).
pub fn instantaneous_phase(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.im.atan2(c.re)).collect()
}

/// Phase locking value of two equally sampled signals with
/// `edge_fraction` of the samples dropped at each end.
pub fn plv_with_edges(x: &[f64], y: &[f64], edge_fraction: f64) -> Result<f64, MetricError> {
    const MIN_LEN: usize = 64;
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MIN_LEN {
        return Err(MetricError::TooShort {
            need: MIN_LEN,
            got: x.len(),
        });
    }
    let (dx, dy) = (detrend(x), detrend(y));
    if variance(&dx) < 1e-12 || variance(&dy) < 1e-12 {
        return Err(MetricError::DegenerateSignal);
    }
    let (px, py) = (instantaneous_phase(&dx), instantaneous_phase(&dy));
    let edge = (edge_fraction * x.len() as f64).floor() as usize;
    let kept = edge..x.len() - edge;
    let n = kept.len() as f64;
    let (re, im) = kept.fold((0.0, 0.0), |(re, im), i| {
        let d = px[i] - py[i];
        (re + d.cos(), im + d.sin())
    });
    Ok(((re / n).hypot(im / n)).min(1.0))
}

/// [`plv_with_edges`] discarding 10 % at each end.
pub fn plv(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    plv_with_edges(x, y, 0.1)
}

pub fn mean_torque(log: &HandshakeLog, mode: TorqueMode) -> f64 {
    let n = log.torques.len().max(1) as f64;
    match mode {
        TorqueMode::MeanAbs => log.torques.iter().map(|t| t.abs().sum()).sum::<f64>() / n,
        TorqueMode::AbsMean => {
            let mean = log.torques.iter().sum::<nalgebra::Vector3<f64>>() / n;
            mean.abs().sum()
        }
    }
}

/// Mean over time of Σ_i |τ_i q̇_i|.
pub fn mean_power(log: &HandshakeLog) -> f64 {
    let n = log.torques.len().max(1) as f64;
    log.torques
        .iter()
        .zip(&log.joint_vel)
        .map(|(t, w)| t.component_mul(w).abs().sum())
        .sum::<f64>()
        / n
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::TooShort { need: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Metrics of one handshake. Values undefined for the handshake (errors of
/// passive handshakes, PLV of a motionless path) are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub amplitude_error_pct: Option<f64>,
    pub frequency_error_pct: Option<f64>,
    pub dtw_m: f64,
    pub plv: Option<f64>,
    pub mean_torque_nm: f64,
    pub mean_power_w: f64,
    /// Oscillation amplitude of the actual vertical path (m); the
    /// displacement measure for passive handshakes.
    pub actual_amplitude_m: f64,
}

pub fn evaluate(log: &HandshakeLog, cfg: &MetricsConfig) -> MetricReport {
    let edge = cfg.plv_edge_fraction;
    MetricReport {
        amplitude_error_pct: amplitude_error(log, cfg).ok(),
        frequency_error_pct: frequency_error(log, cfg).ok(),
        dtw_m: path_dtw(log, cfg).unwrap_or(0.0),
        plv: plv_with_edges(&log.desired_vertical(), &log.actual_vertical(), edge).ok(),
        mean_torque_nm: mean_torque(log, cfg.torque_mode),
        mean_power_w: mean_power(log),
        actual_amplitude_m: oscillation_amplitude(&log.actual_vertical(), cfg.prominence_m),
    }
}

/// Pairwise Pearson correlations over rows where both columns are defined;
/// `None` where that leaves fewer than two rows or no variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn correlation_matrix(columns: &[(String, Vec<Option<f64>>)]) -> CorrelationMatrix {
    let n = columns.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let r = if i == j {
                Some(1.0)
            } else {
                let (x, y): (Vec<f64>, Vec<f64>) = columns[i]
                    .1
                    .iter()
                    .zip(&columns[j].1)
                    .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                    .unzip();
                pearson(&x, &y).ok()
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    CorrelationMatrix {
        names: columns.iter().map(|(name, _)| name.clone()).collect(),
        values,
    }
}
