//! Least-squares lines through PrimeBias points and the IFE verdict.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressionError {
    #[error("cannot fit a line to zero points")]
    Empty,
    #[error("weights must be positive and match the point count")]
    BadWeights,
    #[error("{which} fit is degenerate ({reason:?})")]
    Degenerate { which: &'static str, reason: Degeneracy },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// All x equal (or a single point): the slope is undetermined.
    ConstantX,
    /// All y equal: R² is undefined.
    ConstantY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when the fit is degenerate.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub n: usize,
    pub degenerate: Option<Degeneracy>,
}

impl IfeFit {
    /// A fit known only from its reported statistics.
    pub fn reported(slope: f64, intercept: f64, r2: f64, rmse: f64) -> Self {
        Self {
            slope,
            intercept,
            r2: Some(r2),
            rmse,
            n: 0,
            degenerate: None,
        }
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Unweighted ordinary least squares.
pub fn ols_fit(points: &[(f64, f64)]) -> Result<IfeFit, RegressionError> {
    let weights = vec![1.0; points.len()];
    weighted_ols_fit(points, &weights)
}

/// Weighted least squares; equal weights reduce to [`ols_fit`].
pub fn weighted_ols_fit(points: &[(f64, f64)], weights: &[f64]) -> Result<IfeFit, RegressionError> {
    if points.is_empty() {
        return Err(RegressionError::Empty);
    }
    if weights.len() != points.len() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(RegressionError::BadWeights);
    }
    let w_sum: f64 = weights.iter().sum();
    let x_mean = points.iter().zip(weights).map(|((x, _), w)| w * x).sum::<f64>() / w_sum;
    let y_mean = points.iter().zip(weights).map(|((_, y), w)| w * y).sum::<f64>() / w_sum;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&(x, y), &w) in points.iter().zip(weights) {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let n = points.len();

    let all_equal = |f: fn(&(f64, f64)) -> f64| points.iter().all(|p| f(p) == f(&points[0]));
    if all_equal(|p| p.0) || sxx == 0.0 {
        return Ok(IfeFit {
            slope: 0.0,
            intercept: y_mean,
            r2: None,
            rmse: (syy / w_sum).sqrt(),
            n,
            degenerate: Some(Degeneracy::ConstantX),
        });
    }

    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = points
        .iter()
        .zip(weights)
        .map(|(&(x, y), &w)| {
            let r = y - (intercept + slope * x);
            w * r * r
        })
        .sum();
    let rmse = (ss_res / w_sum).sqrt();
    if all_equal(|p| p.1) {
        return Ok(IfeFit {
            slope: 0.0,
            intercept: points[0].1,
            r2: None,
            rmse: 0.0,
            n,
            degenerate: Some(Degeneracy::ConstantY),
        });
    }
    Ok(IfeFit {
        slope,
        intercept,
        r2: Some((1.0 - ss_res / syy).clamp(0.0, 1.0)),
        rmse,
        n,
        degenerate: None,
    })
}

pub const DEFAULT_R2_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfeVerdict {
    pub both_negative: bool,
    /// Both slopes negative and each R² above the threshold.
    pub robust: bool,
    /// PDPD intercept above DOPD intercept.
    pub standard_priming: bool,
    pub threshold: f64,
}

/// Judges the PD-target fits under PD primes (`pdpd`) and DO primes (`dopd`).
pub fn verdict(pdpd: &IfeFit, dopd: &IfeFit, threshold: f64) -> Result<IfeVerdict, RegressionError> {
    let r2 = |fit: &IfeFit, which| match (fit.degenerate, fit.r2) {
        (None, Some(r2)) => Ok(r2),
        (reason, _) => Err(RegressionError::Degenerate {
            which,
            reason: reason.unwrap_or(Degeneracy::ConstantY),
        }),
    };
    let r2_pd = r2(pdpd, "PDPD")?;
    let r2_do = r2(dopd, "DOPD")?;
    let both_negative = pdpd.slope < 0.0 && dopd.slope < 0.0;
    Ok(IfeVerdict {
        both_negative,
        robust: both_negative && r2_pd > threshold && r2_do > threshold,
        standard_priming: pdpd.intercept > dopd.intercept,
        threshold,
    })
}
