use serde::{Deserialize, Serialize};

use super::HarnessError;

const GRID: usize = 1000;

/// `N(k) = n0 * p^k + n_inf` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub n0: f64,
    pub p: f64,
    pub n_inf: f64,
    pub r_squared: f64,
}

impl DecayFit {
    pub fn predict(&self, k: f64) -> f64 {
        self.n0 * self.p.powf(k) + self.n_inf
    }
}

/// Best non-negative `(n0, n_inf)` for a fixed `p`, and its residual sum.
fn inner(series: &[(f64, f64)], p: f64) -> (f64, f64, f64) {
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|&(k, _)| p.powf(k)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = series.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(series).map(|(x, s)| (x - mx) * (s.1 - my)).sum();
    let sse = |a: f64, c: f64| -> f64 { xs.iter().zip(series).map(|(x, s)| (s.1 - a * x - c).powi(2)).sum() };

    let mut candidates = vec![(0.0, my.max(0.0))];
    if sxx > 1e-300 {
        let a = sxy / sxx;
        candidates.push((a, my - a * mx));
    }
    let xx: f64 = xs.iter().map(|x| x * x).sum();
    let xy: f64 = xs.iter().zip(series).map(|(x, s)| x * s.1).sum();
    candidates.push(((xy / xx).max(0.0), 0.0));
    candidates
        .into_iter()
        .filter(|&(a, c)| a >= 0.0 && c >= 0.0)
        .map(|(a, c)| (a, c, sse(a, c)))
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .expect("the constant candidate is always feasible for non-negative data")
}

/// Fits the geometric decay model: a dense grid over `p ∈ (0, 1]`, then
/// golden-section refinement around the best grid point.
pub fn fit_decay(series: &[(f64, f64)]) -> Result<DecayFit, HarnessError> {
    if series.len() < 3 {
        return Err(HarnessError::TooFewPoints { needed: 3, got: series.len() });
    }
    if series.iter().all(|s| s.0 == series[0].0) {
        return Err(HarnessError::DegenerateSeries);
    }
    if series.iter().any(|s| !s.1.is_finite() || s.1 < 0.0 || !s.0.is_finite()) {
        return Err(HarnessError::Input("series values must be finite and non-negative".into()));
    }
    let n = series.len() as f64;
    let my = series.iter().map(|s| s.1).sum::<f64>() / n;
    let ss_tot: f64 = series.iter().map(|s| (s.1 - my).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(DecayFit { n0: 0.0, p: 1.0, n_inf: my, r_squared: 1.0 });
    }

    let step = 1.0 / GRID as f64;
    let cost = |p: f64| inner(series, p).2;
    let best = (1..=GRID)
        .map(|i| i as f64 * step)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .expect("grid is non-empty");

    let (mut lo, mut hi) = ((best - step).max(1e-9), (best + step).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let p = if cost(best) < cost((lo + hi) / 2.0) { best } else { (lo + hi) / 2.0 };
    let (n0, n_inf, sse) = inner(series, p);
    Ok(DecayFit { n0, p, n_inf, r_squared: 1.0 - sse / ss_tot })
}

/// Sample correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, HarnessError> {
    if xs.len() != ys.len() {
        return Err(HarnessError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(HarnessError::TooFewPoints { needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(HarnessError::ConstantSequence);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
