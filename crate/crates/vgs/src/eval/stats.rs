//! Correlation and model-comparison statistics: Pearson r, Fisher
//! confidence intervals, and AIC for simple Gaussian regressions.

use crate::error::{Error, Result};

/// Sample Pearson correlation. Requires at least three points and
/// non-constant inputs.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Eval(format!(
            "pearson: length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Eval(format!(
            "pearson: need at least 3 points, got {}",
            x.len()
        )));
    }
    if !x.iter().chain(y).all(|v| v.is_finite()) {
        return Err(Error::Eval("pearson: non-finite input".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Eval(
            "pearson: correlation undefined for a constant vector".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Two-sided critical value of the standard normal for the 95% interval.
/// Kept as the literal constant the Fisher interval is defined with.
const Z_95: f64 = 1.959964;

/// Standard normal quantile function, Acklam's rational approximation
/// (relative error below 1.2e-9 over the open unit interval).
fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Eval(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let q;
    let r;
    let value = if p < P_LOW {
        q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        q = p - 0.5;
        r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    Ok(value)
}

/// Fisher z confidence interval for a correlation estimated from `n`
/// samples: z = atanh(r), half-width z_crit/sqrt(n-3), mapped back through
/// tanh. `level` is the two-sided coverage, e.g. 0.95.
pub fn fisher_ci(r: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if n < 4 {
        return Err(Error::Eval(format!("fisher_ci: need n >= 4, got {n}")));
    }
    if !(r.is_finite() && r.abs() < 1.0) {
        return Err(Error::Eval(format!(
            "fisher_ci: need |r| < 1, got {r}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Eval(format!(
            "fisher_ci: coverage level must be in (0,1), got {level}"
        )));
    }
    // The 95% value is pinned to the constant the interval is specified
    // with; other levels go through the quantile approximation.
    let z_crit = if (level - 0.95).abs() < 1e-12 {
        Z_95
    } else {
        inverse_normal_cdf(0.5 + level / 2.0)?
    };
    let z = r.atanh();
    let half = z_crit / ((n - 3) as f64).sqrt();
    Ok(((z - half).tanh(), (z + half).tanh()))
}

/// Ordinary least squares fit of `human = a + b * model_sims` with Gaussian
/// errors, scored by maximum likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub intercept: f64,
    pub slope: f64,
    /// ML variance estimate, residual sum of squares over n.
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n: usize,
}

/// Number of fitted parameters in the simple regression: intercept, slope,
/// and the noise variance.
const REGRESSION_K: f64 = 3.0;

pub fn aic_regression(human: &[f64], model_sims: &[f64]) -> Result<RegressionFit> {
    if human.len() != model_sims.len() {
        return Err(Error::Eval(format!(
            "regression: length mismatch ({} vs {})",
            human.len(),
            model_sims.len()
        )));
    }
    let n = human.len();
    if n < 4 {
        return Err(Error::Eval(format!(
            "regression: need at least 4 points, got {n}"
        )));
    }
    if !human.iter().chain(model_sims).all(|v| v.is_finite()) {
        return Err(Error::Eval("regression: non-finite input".into()));
    }
    let nf = n as f64;
    let mx = model_sims.iter().sum::<f64>() / nf;
    let my = human.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&x, &y) in model_sims.iter().zip(human) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::Eval(
            "regression: constant regressor has no defined slope".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = model_sims
        .iter()
        .zip(human)
        .map(|(&x, &y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let sigma2 = rss / nf;
    if sigma2 == 0.0 {
        return Err(Error::Eval(
            "regression: perfect fit has a degenerate likelihood".into(),
        ));
    }
    let log_likelihood = -(nf / 2.0) * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let aic = 2.0 * REGRESSION_K - 2.0 * log_likelihood;
    Ok(RegressionFit {
        intercept,
        slope,
        sigma2,
        log_likelihood,
        aic,
        n,
    })
}

/// One candidate for an AIC comparison: a label, its maximized log
/// likelihood, and the sample size it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct AicModelInput {
    pub label: String,
    pub log_likelihood: f64,
    pub n: usize,
}

impl AicModelInput {
    pub fn from_fit(label: impl Into<String>, fit: &RegressionFit) -> Self {
        AicModelInput {
            label: label.into(),
            log_likelihood: fit.log_likelihood,
            n: fit.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AicRow {
    pub label: String,
    pub aic: f64,
    /// Difference to the best (lowest) AIC in the report; 0 for the winner.
    pub delta_aic: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AicReport {
    /// Sorted ascending by AIC, ties broken by label.
    pub rows: Vec<AicRow>,
    /// Shared sample size of every compared model.
    pub n: usize,
}

/// Ranks regression models by AIC. All models must score the same number of
/// observations, otherwise the likelihoods are not comparable.
pub fn compare_aic(models: &[AicModelInput]) -> Result<AicReport> {
    if models.len() < 2 {
        return Err(Error::Eval(format!(
            "AIC comparison needs at least 2 models, got {}",
            models.len()
        )));
    }
    let n = models[0].n;
    for m in models {
        if m.n != n {
            return Err(Error::Eval(format!(
                "AIC comparison mixes sample sizes: {} has n={}, {} has n={}",
                models[0].label, n, m.label, m.n
            )));
        }
        if !m.log_likelihood.is_finite() {
            return Err(Error::Eval(format!(
                "model {} has a non-finite log likelihood",
                m.label
            )));
        }
    }
    let mut rows: Vec<AicRow> = models
        .iter()
        .map(|m| AicRow {
            label: m.label.clone(),
            aic: 2.0 * REGRESSION_K - 2.0 * m.log_likelihood,
            delta_aic: 0.0,
            log_likelihood: m.log_likelihood,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.aic
            .partial_cmp(&b.aic)
            .unwrap()
            .then_with(|| a.label.cmp(&b.label))
    });
    let best = rows[0].aic;
    for row in &mut rows {
        row.delta_aic = row.aic - best;
    }
    Ok(AicReport { rows, n })
}
