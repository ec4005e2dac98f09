//! GARCH(p, q) by Gaussian quasi-maximum likelihood.
//!
//! `p` is the ARCH order (lagged squared residuals) and `q` the GARCH order
//! (lagged conditional variances):
//! `h_t = omega + sum alpha_i e_{t-i}^2 + sum beta_j h_{t-j}`.

use super::optim::{minimize, NelderMeadConfig};
use crate::error::{Error, Result};
use crate::format::KvFile;

#[derive(Debug, Clone, PartialEq)]
pub struct GarchSpec {
    pub p: usize,
    pub q: usize,
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Gaussian log-likelihood at the estimate.
    pub loglik: f64,
    /// Squared residuals and conditional variances of the last
    /// `max(p, q)` fitted periods, oldest first, for forecasting.
    pub last_sq_residuals: Vec<f64>,
    pub last_variances: Vec<f64>,
}

impl GarchSpec {
    pub fn persistence(&self) -> f64 {
        self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.alpha.len() != self.p || self.beta.len() != self.q {
            problems.push(format!(
                "coefficient counts ({}, {}) do not match orders ({}, {})",
                self.alpha.len(),
                self.beta.len(),
                self.p,
                self.q
            ));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            problems.push(format!("omega must be positive, got {}", self.omega));
        }
        if self.alpha.iter().chain(&self.beta).any(|c| !(*c >= 0.0)) {
            problems.push("alpha and beta must be nonnegative".to_string());
        }
        if !(self.persistence() < 1.0) {
            problems.push(format!(
                "sum of alpha and beta must be below 1, got {}",
                self.persistence()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    /// Unconditional variance `omega / (1 - persistence)`.
    pub fn long_run_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.push("garch_p", self.p.to_string());
        kv.push("garch_q", self.q.to_string());
        kv.push_f64("omega", self.omega);
        kv.push_list("alpha", &self.alpha);
        kv.push_list("beta", &self.beta);
        kv.push_f64("garch_loglik", self.loglik);
        kv.push_list("garch_last_sq_residuals", &self.last_sq_residuals);
        kv.push_list("garch_last_variances", &self.last_variances);
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let spec = Self {
            p: kv.usize("garch_p")?,
            q: kv.usize("garch_q")?,
            omega: kv.f64("omega")?,
            alpha: kv.list("alpha")?,
            beta: kv.list("beta")?,
            loglik: kv.f64_or("garch_loglik", f64::NAN)?,
            last_sq_residuals: kv.list("garch_last_sq_residuals")?,
            last_variances: kv.list("garch_last_variances")?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Conditional variances for `residuals`, with pre-sample squared residuals
/// and variances set to `presample`.
pub fn variance_path(residuals: &[f64], omega: f64, alpha: &[f64], beta: &[f64], presample: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(residuals.len());
    for t in 0..residuals.len() {
        let mut v = omega;
        for (i, a) in alpha.iter().enumerate() {
            let e2 = t
                .checked_sub(i + 1)
                .map_or(presample, |k| residuals[k] * residuals[k]);
            v += a * e2;
        }
        for (j, b) in beta.iter().enumerate() {
            let past = t.checked_sub(j + 1).map_or(presample, |k| h[k]);
            v += b * past;
        }
        h.push(v);
    }
    h
}

pub fn gaussian_loglik(residuals: &[f64], variances: &[f64]) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    residuals
        .iter()
        .zip(variances)
        .map(|(e, h)| -0.5 * (ln_2pi + h.ln() + e * e / h))
        .sum()
}

/// Free parameters: `u[0]` is `ln(omega / scale)`; the remaining `p + q`
/// entries map to weights `exp(u_k) / (1 + sum exp(u))`, which are positive
/// and sum to less than one.
fn decode(u: &[f64], scale: f64) -> (f64, Vec<f64>) {
    let omega = u[0].exp() * scale;
    let exps: Vec<f64> = u[1..].iter().map(|x| x.clamp(-50.0, 50.0).exp()).collect();
    let denom = 1.0 + exps.iter().sum::<f64>();
    (omega, exps.iter().map(|e| e / denom).collect())
}

pub fn fit_garch(residuals: &[f64], p: usize, q: usize) -> Result<GarchSpec> {
    fit_garch_with(residuals, p, q, &NelderMeadConfig::default())
}

pub fn fit_garch_with(residuals: &[f64], p: usize, q: usize, cfg: &NelderMeadConfig) -> Result<GarchSpec> {
    let n = residuals.len();
    let needed = p.max(q) + p + q + 2;
    if n < needed {
        return Err(Error::InsufficientData(format!(
            "GARCH({p},{q}) needs at least {needed} residuals, got {n}"
        )));
    }
    if residuals.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("residuals contain non-finite values".into()));
    }
    let mean_sq = residuals.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 1e-12 * mean_sq.max(f64::MIN_POSITIVE)) || mean_sq == 0.0 {
        return Err(Error::DegenerateVariance(
            "residuals have zero variance".into(),
        ));
    }

    // Work on unit-scale residuals; omega rescales back at the end.
    let scale = mean_sq;
    let z: Vec<f64> = residuals.iter().map(|e| e / scale.sqrt()).collect();

    // Start from low persistence: alphas 0.05 each, betas sharing 0.5.
    let mut weights = vec![0.05; p];
    weights.extend(std::iter::repeat_n(if q > 0 { 0.5 / q as f64 } else { 0.0 }, q));
    let rest = 1.0 - weights.iter().sum::<f64>();
    let mut u0 = vec![rest.ln()];
    u0.extend(weights.iter().map(|w| (w / rest).ln()));

    let objective = |u: &[f64]| {
        let (omega, w) = decode(u, 1.0);
        let h = variance_path(&z, omega, &w[..p], &w[p..], 1.0);
        -gaussian_loglik(&z, &h)
    };
    let best = minimize(objective, &u0, cfg)?;
    let (omega_z, w) = decode(&best.x, 1.0);
    let alpha = w[..p].to_vec();
    let mut beta = w[p..].to_vec();
    let mut omega = omega_z * scale;
    // Without ARCH terms the variance is constant and beta is not identified.
    if alpha.iter().sum::<f64>() < 1e-8 {
        omega /= 1.0 - beta.iter().sum::<f64>();
        beta.iter_mut().for_each(|b| *b = 0.0);
    }

    let h = variance_path(residuals, omega, &alpha, &beta, mean_sq);
    if h.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateVariance(
            "fitted variance recursion produced a nonpositive value".into(),
        ));
    }
    let loglik = gaussian_loglik(residuals, &h);
    let tail = p.max(q);
    let spec = GarchSpec {
        p,
        q,
        omega,
        alpha,
        beta,
        loglik,
        last_sq_residuals: residuals[n - tail..].iter().map(|e| e * e).collect(),
        last_variances: h[n - tail..].to_vec(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Conditional variance forecasts for the next `horizon` periods.
pub fn forecast_garch_variance(spec: &GarchSpec, horizon: usize) -> Vec<f64> {
    let lr = spec.long_run_variance();
    let tail = spec.p.max(spec.q);
    let pad = |xs: &[f64]| {
        let mut v = vec![lr; tail.saturating_sub(xs.len())];
        v.extend_from_slice(&xs[xs.len().saturating_sub(tail)..]);
        v
    };
    // Future squared residuals are replaced by their expectation.
    let mut e2 = pad(&spec.last_sq_residuals);
    let mut h = pad(&spec.last_variances);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut v = spec.omega;
        for (i, a) in spec.alpha.iter().enumerate() {
            v += a * e2[e2.len() - 1 - i];
        }
        for (j, b) in spec.beta.iter().enumerate() {
            v += b * h[h.len() - 1 - j];
        }
        e2.push(v);
        h.push(v);
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(omega: f64, alpha: Vec<f64>, beta: Vec<f64>, e2: Vec<f64>, h: Vec<f64>) -> GarchSpec {
        GarchSpec {
            p: alpha.len(),
            q: beta.len(),
            omega,
            alpha,
            beta,
            loglik: 0.0,
            last_sq_residuals: e2,
            last_variances: h,
        }
    }

    #[test]
    fn zero_coefficients_give_constant_forecast() {
        let s = spec(0.3, vec![0.0], vec![0.0], vec![5.0], vec![2.0]);
        assert_eq!(forecast_garch_variance(&s, 4), vec![0.3; 4]);
    }

    #[test]
    fn garch11_multi_step_closed_form() {
        let (omega, a, b) = (0.2, 0.15, 0.7);
        let (e2, h) = (1.7, 0.9);
        let s = spec(omega, vec![a], vec![b], vec![e2], vec![h]);
        let f = forecast_garch_variance(&s, 10);
        let first = omega + a * e2 + b * h;
        let pers: f64 = a + b;
        for (k, got) in f.iter().enumerate() {
            let geo: f64 = (0..k).map(|i| pers.powi(i as i32)).sum();
            let want = omega * geo + pers.powi(k as i32) * first;
            assert!((got - want).abs() < 1e-12, "step {}: {got} vs {want}", k + 1);
        }
    }

    #[test]
    fn variance_path_recursion() {
        let h = variance_path(&[1.0, -2.0], 0.1, &[0.2], &[0.5], 1.0);
        assert!((h[0] - 0.8).abs() < 1e-12);
        assert!((h[1] - (0.1 + 0.2 + 0.5 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn constant_residuals_are_degenerate() {
        let err = fit_garch(&[0.5; 100], 1, 1).unwrap_err();
        assert_eq!(err.code(), "E_DEGENERATE");
        assert_eq!(fit_garch(&[0.0; 100], 1, 1).unwrap_err().code(), "E_DEGENERATE");
    }

    #[test]
    fn validation_rejects_explosive() {
        let s = spec(0.1, vec![0.6], vec![0.5], vec![1.0], vec![1.0]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn kv_roundtrip() {
        let s = spec(0.1, vec![0.1, 0.05], vec![0.7], vec![1.0, 2.0], vec![1.5, 1.2]);
        let back = GarchSpec::from_kv(&KvFile::parse(&s.to_kv().to_text()).unwrap()).unwrap();
        assert_eq!(back.alpha, s.alpha);
        assert_eq!(back.last_variances, s.last_variances);
    }
}
