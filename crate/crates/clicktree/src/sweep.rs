//! One-parameter sweeps: model and simulated θ⁽²⁾ / g⁽²⁾ per axis value, as
//! CSV.
//!
//! Model columns average the pairwise values over all channel pairs (all
//! pairs agree on a balanced tree). Simulated columns are the order-2
//! aggregates of the estimator. Row `r` is simulated with seed `seed + r`.

use std::fmt::Write as _;
use std::str::FromStr;

use clicktree_core::analytic::AnalyticModel;
use clicktree_core::estimator::{analyze, AnalysisOptions, Classification};
use clicktree_core::sim::SimulationConfig;
use clicktree_core::{ChannelMask, DetectorTree, EmitterEnsemble, NoiseModel};

use crate::error::{Error, Result};
use crate::parallel;
use crate::report::classification_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Background photons per pulse.
    Lambda,
    /// Detected background rate in counts/s, converted with the repetition
    /// rate and the tree's total detection efficiency.
    NoiseRate,
    /// Emitter count M.
    Emitters,
    /// Efficiency offset δ: channel `i` gets `ξ̄ ± δ` alternately (an odd
    /// last channel keeps `ξ̄`), so Σξ is fixed.
    XiImbalance,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::NoiseRate => "noise-rate",
            SweepAxis::Emitters => "emitters",
            SweepAxis::XiImbalance => "xi-imbalance",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepAxis::Lambda),
            "noise-rate" => Ok(SweepAxis::NoiseRate),
            "emitters" => Ok(SweepAxis::Emitters),
            "xi-imbalance" => Ok(SweepAxis::XiImbalance),
            _ => Err(Error::config("axis", format!("`{s}` is not one of lambda, noise-rate, emitters, xi-imbalance"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub lambda: f64,
    /// Background clicks expected per pulse summed over channels, `λ Σ w_i ξ_i`.
    pub detected_noise_per_pulse: f64,
    pub theta2_model: Option<f64>,
    pub g2_model: Option<f64>,
    pub theta2_sim: Option<(f64, f64)>,
    pub g2_sim: Option<(f64, f64)>,
    pub classification: Option<Classification>,
}

pub const CSV_HEADER: &str = "axis,value,lambda,detected_noise_per_pulse,theta2_model,g2_model,theta2_sim,theta2_sim_err,g2_sim,g2_sim_err,classification";

/// Apply one axis value to the base configuration.
pub fn apply(base: &SimulationConfig, axis: SweepAxis, value: f64) -> Result<SimulationConfig> {
    let mut c = base.clone();
    match axis {
        SweepAxis::Lambda => c.noise = NoiseModel::new(value)?,
        SweepAxis::NoiseRate => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::config("values", format!("noise rate {value} must be finite and >= 0")));
            }
            let xi = c.tree.subset_detection(c.tree.all_channels());
            c.noise = NoiseModel::from_detected_rate(value, c.rep_rate_hz, xi)?;
        }
        SweepAxis::Emitters => {
            if !(value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                return Err(Error::config("values", format!("emitter count {value} must be a nonnegative integer")));
            }
            c.ensemble = EmitterEnsemble::uniform(value as usize, base.ensemble.eta())?;
        }
        SweepAxis::XiImbalance => {
            let n = c.tree.channels();
            let mean = c.tree.xi().iter().sum::<f64>() / n as f64;
            let xi = (0..n)
                .map(|i| {
                    if n % 2 == 1 && i == n - 1 {
                        mean
                    } else if i % 2 == 0 {
                        mean + value
                    } else {
                        mean - value
                    }
                })
                .collect();
            c.tree = DetectorTree::new(xi, c.tree.weights().to_vec())?;
        }
    }
    c.validate()?;
    Ok(c)
}

fn pair_mean(
    model: &AnalyticModel,
    f: impl Fn(&AnalyticModel, ChannelMask) -> clicktree_core::Result<f64>,
) -> Option<f64> {
    let pairs = ChannelMask::combinations(model.tree().channels(), 2);
    let values: Option<Vec<f64>> = pairs.iter().map(|&m| f(model, m).ok()).collect();
    values.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Evaluate every axis value. `options = None` skips the simulation columns.
pub fn run(
    base: &SimulationConfig,
    axis: SweepAxis,
    values: &[f64],
    options: Option<&AnalysisOptions>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("values", "need at least one axis value"));
    }
    if base.tree.channels() < 2 {
        return Err(Error::config("channels", "sweeps report pairwise statistics and need at least 2 channels"));
    }
    let mut rows = Vec::with_capacity(values.len());
    for (r, &value) in values.iter().enumerate() {
        let mut config = apply(base, axis, value)?;
        config.seed = base.seed.wrapping_add(r as u64);
        let model = AnalyticModel::new(config.ensemble.clone(), config.noise, config.tree.clone())?;
        let mut row = SweepRow {
            value,
            lambda: config.noise.lambda(),
            detected_noise_per_pulse: config.noise.lambda() * config.tree.subset_detection(config.tree.all_channels()),
            theta2_model: pair_mean(&model, AnalyticModel::theta_subset),
            g2_model: pair_mean(&model, AnalyticModel::g_subset),
            theta2_sim: None,
            g2_sim: None,
            classification: None,
        };
        if let Some(options) = options {
            let counts = parallel::simulate(&config)?;
            let report = analyze(&counts, options)?;
            if let Some(o2) = report.order(2) {
                row.theta2_sim = o2.theta_mean.map(|e| (e.value, e.std_error));
                row.g2_sim = o2.g_mean.map(|e| (e.value, e.std_error));
            }
            row.classification = Some(report.classification);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            axis.name(),
            r.value,
            r.lambda,
            r.detected_noise_per_pulse,
            opt(r.theta2_model),
            opt(r.g2_model),
            opt(r.theta2_sim.map(|e| e.0)),
            opt(r.theta2_sim.map(|e| e.1)),
            opt(r.g2_sim.map(|e| e.0)),
            opt(r.g2_sim.map(|e| e.1)),
            r.classification.map(classification_name).unwrap_or(""),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimulationConfig {
        SimulationConfig::new(
            EmitterEnsemble::uniform(3, 0.2).unwrap(),
            NoiseModel::off(),
            DetectorTree::balanced(4, 0.5).unwrap(),
            20_000,
            3,
        )
    }

    #[test]
    fn lambda_sweep_flat_theta_rising_g() {
        let rows = run(&base(), SweepAxis::Lambda, &[0.0, 0.004, 0.01, 1.0], None).unwrap();
        let t0 = rows[0].theta2_model.unwrap();
        for w in rows.windows(2) {
            assert!((w[1].theta2_model.unwrap() - t0).abs() < 1e-12);
            assert!(w[1].g2_model.unwrap() > w[0].g2_model.unwrap());
        }
    }

    #[test]
    fn noise_rate_axis_converts() {
        let rows = run(&base(), SweepAxis::NoiseRate, &[0.0, 10_000.0, 25_000.0], None).unwrap();
        let detected: Vec<f64> = rows.iter().map(|r| r.detected_noise_per_pulse).collect();
        assert_eq!(detected[0], 0.0);
        assert!((detected[1] - 0.002).abs() < 1e-15);
        assert!((detected[2] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn emitter_sweep_is_log_linear() {
        let rows = run(&base(), SweepAxis::Emitters, &[1.0, 2.0, 4.0, 8.0], None).unwrap();
        let one = rows[0].theta2_model.unwrap().ln();
        for r in &rows {
            assert!((r.theta2_model.unwrap().ln() - r.value * one).abs() < 1e-12);
        }
        assert!(run(&base(), SweepAxis::Emitters, &[1.5], None).is_err());
    }

    #[test]
    fn xi_imbalance_keeps_sum() {
        let c = apply(&base(), SweepAxis::XiImbalance, 0.2).unwrap();
        assert_eq!(c.tree.xi(), &[0.7, 0.3, 0.7, 0.3]);
        assert!(apply(&base(), SweepAxis::XiImbalance, 0.6).is_err());
    }

    #[test]
    fn csv_is_stable() {
        let opts = AnalysisOptions::default();
        let a = to_csv(SweepAxis::Lambda, &run(&base(), SweepAxis::Lambda, &[0.0, 0.1], Some(&opts)).unwrap());
        let b = to_csv(SweepAxis::Lambda, &run(&base(), SweepAxis::Lambda, &[0.0, 0.1], Some(&opts)).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        assert_eq!(a.lines().count(), 3);
    }
}
