use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("observed and predicted vectors differ in length ({obs} vs {pred})")]
    LengthMismatch { obs: usize, pred: usize },
    #[error("metric needs at least one pair")]
    Empty,
    #[error("sum of |observed| is zero; WMAPE undefined")]
    ZeroObserved,
    #[error("observed values have zero variance; R² undefined")]
    ConstantObserved,
}

fn check(obs: &[f64], pred: &[f64]) -> Result<(), MetricError> {
    if obs.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            obs: obs.len(),
            pred: pred.len(),
        });
    }
    if obs.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Root mean squared error.
pub fn rmse(obs: &[f64], pred: &[f64]) -> Result<f64, MetricError> {
    check(obs, pred)?;
    let mse = obs.iter().zip(pred).map(|(o, p)| (p - o) * (p - o)).sum::<f64>() / obs.len() as f64;
    Ok(mse.sqrt())
}

/// Weighted MAPE: Σ|pred − obs| / Σ|obs|.
pub fn wmape(obs: &[f64], pred: &[f64]) -> Result<f64, MetricError> {
    check(obs, pred)?;
    let denom: f64 = obs.iter().map(|o| o.abs()).sum();
    if denom == 0.0 {
        return Err(MetricError::ZeroObserved);
    }
    Ok(obs.iter().zip(pred).map(|(o, p)| (p - o).abs()).sum::<f64>() / denom)
}

/// Coefficient of determination 1 − SS_res / SS_tot.
pub fn r2(obs: &[f64], pred: &[f64]) -> Result<f64, MetricError> {
    check(obs, pred)?;
    let m = mean(obs);
    let ss_tot: f64 = obs.iter().map(|o| (o - m) * (o - m)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ConstantObserved);
    }
    let ss_res: f64 = obs.iter().zip(pred).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Discrepancy ratio log10(pred / obs); `None` when either value is not
/// positive.
pub fn dr(obs: f64, pred: f64) -> Option<f64> {
    (obs > 0.0 && pred > 0.0).then(|| (pred / obs).log10())
}

/// Half-width of the discrepancy-ratio accuracy band.
pub const DR_BAND: f64 = 0.3;

/// Taylor-diagram statistics (population standard deviations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorStats {
    pub pred_std: f64,
    pub obs_std: f64,
    /// Pearson correlation; 0 when either series is constant.
    pub correlation: f64,
    pub centered_rms: f64,
}

pub fn taylor(obs: &[f64], pred: &[f64]) -> Result<TaylorStats, MetricError> {
    check(obs, pred)?;
    let n = obs.len() as f64;
    let (mo, mp) = (mean(obs), mean(pred));
    let (mut soo, mut spp, mut sop, mut crms) = (0.0, 0.0, 0.0, 0.0);
    for (o, p) in obs.iter().zip(pred) {
        let (a, b) = (o - mo, p - mp);
        soo += a * a;
        spp += b * b;
        sop += a * b;
        crms += (b - a) * (b - a);
    }
    let obs_std = (soo / n).sqrt();
    let pred_std = (spp / n).sqrt();
    let correlation = if soo > 0.0 && spp > 0.0 {
        sop / (soo.sqrt() * spp.sqrt())
    } else {
        0.0
    };
    Ok(TaylorStats {
        pred_std,
        obs_std,
        correlation,
        centered_rms: (crms / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub rmse: f64,
    pub wmape: f64,
    /// `None` when the observations are constant.
    pub r2: Option<f64>,
    /// Fractions in (−∞,−0.3], (−0.3,0], (0,0.3], (0.3,∞) over pairs with a
    /// defined discrepancy ratio.
    pub dr_bins: [f64; 4],
    /// Percentage of pairs with −0.3 < dr < 0.3.
    pub accuracy_pct: f64,
    /// Percentage in the two central bins, −0.3 < dr ≤ 0.3.
    pub central_bins_pct: f64,
    /// Indices whose observation or prediction is not positive.
    pub dr_excluded: Vec<usize>,
    pub taylor: TaylorStats,
    pub definitions: String,
}

pub const DEFINITIONS: &str =
    "wmape = sum|pred-obs|/sum|obs|; dr = log10(pred/obs); accuracy = % with -0.3 < dr < 0.3";

/// Accuracy band membership: −0.3 < dr < 0.3.
pub fn in_band(d: f64) -> bool {
    d.abs() < DR_BAND
}

pub fn dr_bin(d: f64) -> usize {
    if d <= -DR_BAND {
        0
    } else if d <= 0.0 {
        1
    } else if d <= DR_BAND {
        2
    } else {
        3
    }
}

/// All metrics for observed/predicted vectors.
pub fn evaluate_pairs(obs: &[f64], pred: &[f64]) -> Result<EvalReport, MetricError> {
    check(obs, pred)?;
    let mut counts = [0usize; 4];
    let mut inside = 0usize;
    let mut excluded = Vec::new();
    for (i, (&o, &p)) in obs.iter().zip(pred).enumerate() {
        match dr(o, p) {
            Some(d) => {
                counts[dr_bin(d)] += 1;
                if in_band(d) {
                    inside += 1;
                }
            }
            None => excluded.push(i),
        }
    }
    let valid = obs.len() - excluded.len();
    let frac = |c: usize| if valid == 0 { 0.0 } else { c as f64 / valid as f64 };
    Ok(EvalReport {
        n: obs.len(),
        rmse: rmse(obs, pred)?,
        wmape: wmape(obs, pred)?,
        r2: r2(obs, pred).ok(),
        dr_bins: counts.map(frac),
        accuracy_pct: 100.0 * frac(inside),
        central_bins_pct: 100.0 * frac(counts[1] + counts[2]),
        dr_excluded: excluded,
        taylor: taylor(obs, pred)?,
        definitions: DEFINITIONS.to_string(),
    })
}

/// Evaluates a predictor of the dependent variable against each sample's
/// observed `Dl`.
pub fn evaluate<F: Fn(&Sample) -> f64>(predictor: F, samples: &[Sample]) -> Result<EvalReport, MetricError> {
    let obs: Vec<f64> = samples.iter().map(|s| s.dl).collect();
    let pred: Vec<f64> = samples.iter().map(predictor).collect();
    evaluate_pairs(&obs, &pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.53553).abs() < 1e-5);
        assert_eq!(rmse(&[1.0], &[2.0]).unwrap(), 1.0);
    }

    #[test]
    fn wmape_examples() {
        assert_eq!(wmape(&[10.0, 10.0], &[5.0, 15.0]).unwrap(), 0.5);
        assert_eq!(wmape(&[0.0, 0.0], &[1.0, 1.0]), Err(MetricError::ZeroObserved));
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn dr_examples() {
        assert_eq!(dr(3.0, 3.0), Some(0.0));
        assert!((dr(1.0, 2.0).unwrap() - std::f64::consts::LOG10_2).abs() < 1e-12);
        assert!((dr(2.0, 1.0).unwrap() + std::f64::consts::LOG10_2).abs() < 1e-12);
        assert_eq!(dr(0.0, 1.0), None);
        assert_eq!(dr(1.0, -1.0), None);
    }

    #[test]
    fn bin_edges() {
        assert_eq!(dr_bin(-0.3), 0);
        assert_eq!(dr_bin(-0.2999), 1);
        assert_eq!(dr_bin(0.0), 1);
        assert_eq!(dr_bin(0.3), 2);
        assert_eq!(dr_bin(0.30001), 3);
    }

    #[test]
    fn boundary_point_counts_in_bins_but_not_accuracy() {
        assert!(!in_band(0.3) && !in_band(-0.3));
        assert_eq!(dr_bin(0.3), 2);
        // a factor of two is just outside the band on either side
        let r = evaluate_pairs(&[1.0, 1.0, 1.0, 1.0], &[2.0, 0.5, 1.5, 1.0]).unwrap();
        assert_eq!(r.accuracy_pct, 50.0);
        assert_eq!(r.dr_bins, [0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn perfect_and_mean_predictors() {
        let obs = [1.0, 4.0, 2.0, 8.0];
        let r = evaluate_pairs(&obs, &obs).unwrap();
        assert_eq!((r.rmse, r.wmape, r.r2, r.accuracy_pct), (0.0, 0.0, Some(1.0), 100.0));
        let m = [3.75; 4];
        let r = evaluate_pairs(&obs, &m).unwrap();
        assert_eq!(r.r2, Some(0.0));
        assert_eq!(r.taylor.pred_std, 0.0);
        assert_eq!(r.taylor.correlation, 0.0);
    }

    #[test]
    fn non_positive_pairs_are_flagged() {
        let r = evaluate_pairs(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(r.dr_excluded, vec![1]);
        assert_eq!(r.dr_bins.iter().sum::<f64>(), 1.0);
    }
}
