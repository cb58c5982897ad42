use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_session, ProtocolError, SessionReport, UserSource};
use crate::config::Config;
use crate::metrics::{correlation_matrix, CorrelationMatrix, MetricReport};
use crate::pref::Side;

/// Sample mean and standard deviation; `std` is `None` below two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                n,
                mean: None,
                std: None,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n >= 2).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Self {
            n,
            mean: Some(mean),
            std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub amplitude_cm: MeanStd,
    pub frequency_hz: MeanStd,
    pub stiffness: MeanStd,
}

/// Metric statistics of one handshake category. Undefined metrics
/// (passive handshakes) are left out of the corresponding statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: String,
    pub handshakes: usize,
    pub amplitude_error_pct: MeanStd,
    pub frequency_error_pct: MeanStd,
    pub dtw_m: MeanStd,
    pub plv: MeanStd,
    pub mean_torque_nm: MeanStd,
    pub mean_power_w: MeanStd,
}

impl CategoryStats {
    pub fn of(category: &str, metrics: &[MetricReport]) -> Self {
        Self {
            category: category.to_string(),
            handshakes: metrics.len(),
            amplitude_error_pct: MeanStd::of(metrics.iter().filter_map(|m| m.amplitude_error_pct)),
            frequency_error_pct: MeanStd::of(metrics.iter().filter_map(|m| m.frequency_error_pct)),
            dtw_m: MeanStd::of(metrics.iter().map(|m| m.dtw_m)),
            plv: MeanStd::of(metrics.iter().filter_map(|m| m.plv)),
            mean_torque_nm: MeanStd::of(metrics.iter().map(|m| m.mean_torque_nm)),
            mean_power_w: MeanStd::of(metrics.iter().map(|m| m.mean_power_w)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub oracle: String,
    pub sessions: usize,
    pub base_seed: u64,
    pub config_hash: String,
    /// Optimized parameters across sessions.
    pub optimized_params: ParamStats,
    /// learning, testing and optimized handshakes.
    pub categories: Vec<CategoryStats>,
    /// Metrics of each session's optimized handshake against its parameters.
    pub correlation: CorrelationMatrix,
    pub validation_win_rate: MeanStd,
}

/// Training, ablation and optimized handshake metrics of one report.
pub fn categorize(report: &SessionReport) -> [(&'static str, Vec<MetricReport>); 3] {
    let learning = report
        .training
        .iter()
        .flat_map(|t| [t.left.metrics, t.right.metrics])
        .collect();
    let mut testing = Vec::new();
    let mut optimized = vec![report.optimized.metrics];
    for v in &report.validation {
        let (opt, var) = match v.optimized_side {
            Side::Left => (&v.left, &v.right),
            Side::Right => (&v.right, &v.left),
        };
        optimized.push(opt.metrics);
        testing.push(var.metrics);
    }
    [("learning", learning), ("testing", testing), ("optimized", optimized)]
}

pub fn summarize(oracle: &str, base_seed: u64, config: &Config, reports: &[SessionReport]) -> BatchSummary {
    let opt = |f: fn(&SessionReport) -> f64| MeanStd::of(reports.iter().map(f));
    let optimized_params = ParamStats {
        amplitude_cm: opt(|r| r.optimized.params.amplitude_cm()),
        frequency_hz: opt(|r| r.optimized.params.frequency_hz),
        stiffness: opt(|r| r.optimized.params.stiffness),
    };
    let mut pooled: [(&str, Vec<MetricReport>); 3] = [("learning", vec![]), ("testing", vec![]), ("optimized", vec![])];
    for r in reports {
        for (slot, (_, metrics)) in pooled.iter_mut().zip(categorize(r)) {
            slot.1.extend(metrics);
        }
    }
    let categories = pooled.iter().map(|(name, m)| CategoryStats::of(name, m)).collect();

    let col = |name: &str, f: &dyn Fn(&SessionReport) -> Option<f64>| (name.to_string(), reports.iter().map(f).collect::<Vec<_>>());
    let columns = vec![
        col("amplitude_error_pct", &|r| r.optimized.metrics.amplitude_error_pct),
        col("frequency_error_pct", &|r| r.optimized.metrics.frequency_error_pct),
        col("dtw_m", &|r| Some(r.optimized.metrics.dtw_m)),
        col("plv", &|r| r.optimized.metrics.plv),
        col("mean_torque_nm", &|r| Some(r.optimized.metrics.mean_torque_nm)),
        col("mean_power_w", &|r| Some(r.optimized.metrics.mean_power_w)),
        col("amplitude_cm", &|r| Some(r.optimized.params.amplitude_cm())),
        col("frequency_hz", &|r| Some(r.optimized.params.frequency_hz)),
        col("stiffness", &|r| Some(r.optimized.params.stiffness)),
    ];
    BatchSummary {
        oracle: oracle.to_string(),
        sessions: reports.len(),
        base_seed,
        config_hash: config.hash(),
        optimized_params,
        categories,
        correlation: correlation_matrix(&columns),
        validation_win_rate: MeanStd::of(reports.iter().map(SessionReport::win_rate)),
    }
}

/// Run `n` oracle sessions in parallel with seeds `base_seed + i`.
pub fn run_batch(
    config: &Config,
    oracle: &str,
    n: usize,
    base_seed: u64,
) -> Result<(BatchSummary, Vec<SessionReport>), ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::ConfigInvalid("a batch needs at least one session".into()));
    }
    let source = UserSource::Oracle(oracle.to_string());
    let reports = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            run_session(config, seed, &format!("{oracle}-{i:04}"), &source).map(|o| o.report)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((summarize(oracle, base_seed, config, &reports), reports))
}
