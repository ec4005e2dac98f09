//! ARIMA(p, d, q) by conditional sum of squares.
//!
//! The differenced series `w` follows
//! `w_t = c + sum phi_i w_{t-i} + e_t + sum theta_j e_{t-j}`,
//! with pre-sample residuals set to zero and the recursion started at `t = p`.
//! AR and MA coefficients are searched through partial autocorrelations
//! (`tanh` of the free parameters), which keeps every candidate stationary and
//! invertible. A constant `c` is estimated only when `d = 0`.

use nalgebra::{Complex, DMatrix};

use super::optim::{minimize, NelderMeadConfig};
use crate::error::{Error, Result};
use crate::format::KvFile;

/// Largest partial autocorrelation magnitude the search can reach.
const MAX_PARTIAL: f64 = 0.9999;

/// Root moduli below this count as boundary fits during order selection.
const BOUNDARY_MODULUS: f64 = 1.001;

/// AR and MA reciprocal roots closer than this are treated as cancelling.
const COMMON_FACTOR_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    /// Conditional residuals of the differenced series, `t = p..n`.
    pub residuals: Vec<f64>,
    pub sigma2: f64,
    /// Conditional sum of squares at the returned coefficients.
    pub css: f64,
}

pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::InsufficientData(format!(
            "differencing of order {d} needs more than {d} values, got {}",
            series.len()
        )));
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Durbin-Levinson map from partial autocorrelations to AR coefficients.
pub fn partials_to_coefficients(partials: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(partials.len());
    for (k, &r) in partials.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// Reciprocal roots of `1 - c_1 z - ... - c_k z^k`: the eigenvalues of its
/// companion matrix.
pub fn inverse_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let k = coeffs.len();
    if k == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        companion[(0, j)] = coeffs[j];
    }
    for i in 1..k {
        companion[(i, i - 1)] = 1.0;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Smallest modulus among the roots of `1 - c_1 z - ... - c_k z^k`; `inf`
/// for an empty or zero polynomial.
pub fn min_root_modulus(coeffs: &[f64]) -> f64 {
    let largest = inverse_roots(coeffs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if largest == 0.0 {
        f64::INFINITY
    } else {
        1.0 / largest
    }
}

/// Roots of `1 - sum phi_i z^i` lie strictly outside the unit circle.
pub fn is_stationary(ar: &[f64]) -> bool {
    min_root_modulus(ar) > 1.0
}

/// Roots of `1 + sum theta_j z^j` lie strictly outside the unit circle.
pub fn is_invertible(ma: &[f64]) -> bool {
    let negated: Vec<f64> = ma.iter().map(|t| -t).collect();
    min_root_modulus(&negated) > 1.0
}

/// Conditional residuals `e_p..e_{n-1}` of `w` under the given coefficients.
pub fn css_residuals(w: &[f64], intercept: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let n = w.len();
    let mut e = vec![0.0; n];
    for t in p..n {
        let mut pred = intercept;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * w[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t >= j + 1 + p {
                pred += theta * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e.split_off(p.min(n))
}

pub fn css(w: &[f64], intercept: f64, ar: &[f64], ma: &[f64]) -> f64 {
    css_residuals(w, intercept, ar, ma).iter().map(|e| e * e).sum()
}

struct Layout {
    p: usize,
    q: usize,
    with_intercept: bool,
}

impl Layout {
    fn len(&self) -> usize {
        self.p + self.q + usize::from(self.with_intercept)
    }

    fn decode(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let partial = |x: &f64| x.tanh().clamp(-MAX_PARTIAL, MAX_PARTIAL);
        let ar = partials_to_coefficients(&u[..self.p].iter().map(partial).collect::<Vec<_>>());
        let ma: Vec<f64> = partials_to_coefficients(
            &u[self.p..self.p + self.q].iter().map(partial).collect::<Vec<_>>(),
        )
        .into_iter()
        .map(|c| -c)
        .collect();
        let intercept = if self.with_intercept {
            u[self.p + self.q]
        } else {
            0.0
        };
        (ar, ma, intercept)
    }
}

/// Minimum series length accepted by [`fit_arima`].
pub fn min_length(p: usize, d: usize, q: usize) -> usize {
    p + q + d + 2
}

pub fn fit_arima(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaSpec> {
    fit_arima_with(series, p, d, q, &NelderMeadConfig::default())
}

pub fn fit_arima_with(
    series: &[f64],
    p: usize,
    d: usize,
    q: usize,
    cfg: &NelderMeadConfig,
) -> Result<ArimaSpec> {
    if series.len() < min_length(p, d, q) {
        return Err(Error::InsufficientData(format!(
            "ARIMA({p},{d},{q}) needs at least {} observations, got {}",
            min_length(p, d, q),
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("series contains non-finite values".into()));
    }
    let w = difference(series, d)?;
    let scale = {
        let ms = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        if ms > 0.0 {
            ms.sqrt()
        } else {
            1.0
        }
    };
    let z: Vec<f64> = w.iter().map(|x| x / scale).collect();
    let layout = Layout {
        p,
        q,
        with_intercept: d == 0,
    };
    let mut u0 = vec![0.0; layout.len()];
    if layout.with_intercept {
        u0[p + q] = z.iter().sum::<f64>() / z.len() as f64;
    }
    let objective = |u: &[f64]| {
        let (ar, ma, c) = layout.decode(u);
        css(&z, c, &ar, &ma)
    };
    let best = minimize(objective, &u0, cfg)?;
    let (ar, ma, c_scaled) = layout.decode(&best.x);
    let intercept = c_scaled * scale;
    let residuals = css_residuals(&w, intercept, &ar, &ma);
    let css_value: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = css_value / residuals.len() as f64;
    let spec = ArimaSpec {
        p,
        d,
        q,
        ar,
        ma,
        intercept,
        residuals,
        sigma2,
        css: css_value,
    };
    spec.check_roots()?;
    Ok(spec)
}

impl ArimaSpec {
    pub fn check_roots(&self) -> Result<()> {
        if !is_stationary(&self.ar) {
            return Err(Error::Validation(format!(
                "AR polynomial has a root inside the unit circle: {:?}",
                self.ar
            )));
        }
        if !is_invertible(&self.ma) {
            return Err(Error::Validation(format!(
                "MA polynomial has a root inside the unit circle: {:?}",
                self.ma
            )));
        }
        Ok(())
    }

    /// True when an AR or MA root sits at the edge of the search region,
    /// i.e. the fit hit the stationarity or invertibility boundary rather
    /// than an interior optimum.
    pub fn on_boundary(&self) -> bool {
        let ma: Vec<f64> = self.ma.iter().map(|t| -t).collect();
        min_root_modulus(&self.ar) < BOUNDARY_MODULUS || min_root_modulus(&ma) < BOUNDARY_MODULUS
    }

    /// True when an AR root nearly cancels an MA root, leaving the
    /// coefficients unidentified along a ridge of equal fit.
    pub fn has_common_factor(&self) -> bool {
        let ma: Vec<f64> = self.ma.iter().map(|t| -t).collect();
        let ma_roots = inverse_roots(&ma);
        inverse_roots(&self.ar)
            .iter()
            .any(|a| ma_roots.iter().any(|m| (a - m).norm() < COMMON_FACTOR_DISTANCE))
    }

    pub fn has_intercept(&self) -> bool {
        self.d == 0
    }

    /// Number of estimated coefficients, including the residual variance.
    pub fn n_params(&self) -> usize {
        self.p + self.q + usize::from(self.has_intercept()) + 1
    }

    /// Gaussian AIC from the conditional sum of squares.
    pub fn aic(&self) -> f64 {
        let n = self.residuals.len() as f64;
        n * (self.css / n).ln() + 2.0 * self.n_params() as f64
    }

    /// Psi weights of the integrated model, `psi_0 = 1`.
    pub fn psi_weights(&self, count: usize) -> Vec<f64> {
        // phi*(B) = phi(B) (1 - B)^d
        let mut poly = vec![1.0];
        for phi in &self.ar {
            poly.push(-phi);
        }
        for _ in 0..self.d {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c;
            }
            poly = next;
        }
        let phi_star: Vec<f64> = poly[1..].iter().map(|c| -c).collect();
        let mut psi = Vec::with_capacity(count);
        for j in 0..count {
            let mut v = if j == 0 {
                1.0
            } else {
                self.ma.get(j - 1).copied().unwrap_or(0.0)
            };
            for (i, phi) in phi_star.iter().enumerate() {
                if j > i {
                    v += phi * psi[j - 1 - i];
                }
            }
            psi.push(v);
        }
        psi
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.push("model", "arima");
        kv.push("p", self.p.to_string());
        kv.push("d", self.d.to_string());
        kv.push("q", self.q.to_string());
        kv.push_list("ar", &self.ar);
        kv.push_list("ma", &self.ma);
        kv.push_f64("intercept", self.intercept);
        kv.push_f64("sigma2", self.sigma2);
        kv.push_f64("css", self.css);
        kv.push_list("residuals", &self.residuals);
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let spec = Self {
            p: kv.usize("p")?,
            d: kv.usize("d")?,
            q: kv.usize("q")?,
            ar: kv.list("ar")?,
            ma: kv.list("ma")?,
            intercept: kv.f64("intercept")?,
            residuals: kv.list("residuals")?,
            sigma2: kv.f64("sigma2")?,
            css: kv.f64_or("css", f64::NAN)?,
        };
        if spec.ar.len() != spec.p || spec.ma.len() != spec.q {
            return Err(Error::Validation(format!(
                "coefficient counts ({}, {}) do not match orders ({}, {})",
                spec.ar.len(),
                spec.ma.len(),
                spec.p,
                spec.q
            )));
        }
        spec.check_roots()?;
        Ok(spec)
    }
}

/// Iterated conditional-mean forecasts in levels.
pub fn forecast_arima(model: &ArimaSpec, last_observations: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let needed = model.p + model.d + 1;
    if last_observations.len() < needed {
        return Err(Error::InsufficientData(format!(
            "forecasting ARIMA({},{},{}) needs {needed} trailing observations, got {}",
            model.p,
            model.d,
            model.q,
            last_observations.len()
        )));
    }
    // last value of each differencing level 0..d
    let mut lasts = Vec::with_capacity(model.d);
    let mut level = last_observations.to_vec();
    for _ in 0..model.d {
        lasts.push(*level.last().expect("non-empty"));
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let mut w = level;
    let mut resid: Vec<f64> = model.residuals[model.residuals.len().saturating_sub(model.q)..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut next = model.intercept;
        for (i, phi) in model.ar.iter().enumerate() {
            next += phi * w[w.len() - 1 - i];
        }
        for (j, theta) in model.ma.iter().enumerate() {
            if let Some(e) = resid.len().checked_sub(j + 1).map(|k| resid[k]) {
                next += theta * e;
            }
        }
        w.push(next);
        resid.push(0.0);
        let mut value = next;
        for last in lasts.iter_mut().rev() {
            value += *last;
            *last = value;
        }
        out.push(value);
    }
    Ok(out)
}

/// Forecast error variances `sigma2 * sum_{j<h} psi_j^2`.
pub fn forecast_variance(model: &ArimaSpec, horizon: usize) -> Vec<f64> {
    let psi = model.psi_weights(horizon);
    let mut acc = 0.0;
    psi.iter()
        .map(|p| {
            acc += p * p;
            model.sigma2 * acc
        })
        .collect()
}

/// Gaussian AIC computed over the last `m` residuals only, so that models of
/// different orders are scored on the same observations.
fn common_sample_aic(model: &ArimaSpec, m: usize) -> f64 {
    let tail = &model.residuals[model.residuals.len() - m..];
    let css: f64 = tail.iter().map(|e| e * e).sum();
    m as f64 * (css / m as f64).ln() + 2.0 * model.n_params() as f64
}

/// Grid search over `0..=max_p`, `0..=max_d`, `0..=max_q` minimising AIC on
/// the sample shared by every candidate. Ties go to the smaller `p + q`,
/// then the smaller `d`.
pub fn select_order(series: &[f64], max_p: usize, max_d: usize, max_q: usize) -> Result<(usize, usize, usize)> {
    let common = series.len().saturating_sub(max_p + max_d);
    let mut best: Option<((usize, usize, usize), f64)> = None;
    for d in 0..=max_d {
        for p in 0..=max_p {
            for q in 0..=max_q {
                let Ok(model) = fit_arima(series, p, d, q) else {
                    continue;
                };
                if model.on_boundary() || model.has_common_factor() {
                    continue;
                }
                let aic = common_sample_aic(&model, common);
                if !aic.is_finite() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(((bp, bd, bq), baic)) => aic < baic || (aic == baic && (p + q, d) < (bp + bq, bd)),
                };
                if better {
                    best = Some(((p, d, q), aic));
                }
            }
        }
    }
    best.map(|(order, _)| order).ok_or_else(|| Error::Convergence {
        iterations: 0,
        best_value: f64::NAN,
        best_point: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differencing() {
        assert_eq!(difference(&[1.0, 2.0, 4.0, 7.0], 1).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(difference(&[1.0, 2.0, 4.0, 7.0], 2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(difference(&[1.0, 2.0], 0).unwrap(), vec![1.0, 2.0]);
        assert!(difference(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn partials_map_to_stationary_coefficients() {
        assert_eq!(partials_to_coefficients(&[0.5]), vec![0.5]);
        // phi_1 = r1 (1 - r2), phi_2 = r2
        let phi = partials_to_coefficients(&[0.5, -0.3]);
        assert!((phi[0] - 0.65).abs() < 1e-12 && (phi[1] + 0.3).abs() < 1e-12);
        for r in [[0.99, 0.99, -0.99], [-0.9, 0.5, 0.9], [0.2, -0.95, 0.7]] {
            assert!(is_stationary(&partials_to_coefficients(&r)));
        }
    }

    #[test]
    fn root_checks() {
        assert!(is_stationary(&[0.5]));
        assert!(!is_stationary(&[1.0]));
        assert!(!is_stationary(&[1.2, -0.1]));
        assert!(is_invertible(&[0.5]));
        assert!(!is_invertible(&[-1.5]));
        assert!(is_stationary(&[]));
        // 1 - 0.25 z^2 has roots at +-2
        assert!((min_root_modulus(&[0.0, 0.25]) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn white_noise_degenerate_model() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let m = fit_arima(&xs, 0, 0, 0).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((m.intercept - mean).abs() < 1e-4);
        assert!((m.sigma2 - var).abs() / var < 1e-6);
    }

    #[test]
    fn forecast_cases() {
        let base = ArimaSpec {
            p: 0,
            d: 0,
            q: 0,
            ar: vec![],
            ma: vec![],
            intercept: 0.7,
            residuals: vec![0.1; 5],
            sigma2: 1.0,
            css: 5.0,
        };
        assert_eq!(forecast_arima(&base, &[1.0, 2.0], 3).unwrap(), vec![0.7; 3]);

        let rw = ArimaSpec { d: 1, intercept: 0.0, ..base.clone() };
        assert_eq!(forecast_arima(&rw, &[3.0, 5.0], 4).unwrap(), vec![5.0; 4]);

        let ar1 = ArimaSpec { p: 1, ar: vec![0.5], intercept: 0.0, ..base.clone() };
        let f = forecast_arima(&ar1, &[3.0, 1.0], 4).unwrap();
        assert_eq!(f, vec![0.5, 0.25, 0.125, 0.0625]);

        // d = 2 with zero second differences extrapolates the last slope
        let lin = ArimaSpec { d: 2, intercept: 0.0, ..base.clone() };
        assert_eq!(forecast_arima(&lin, &[1.0, 3.0, 5.0], 3).unwrap(), vec![7.0, 9.0, 11.0]);

        // MA(1) uses the last residual for one step only
        let ma1 = ArimaSpec { q: 1, ma: vec![0.4], intercept: 1.0, ..base };
        let f = forecast_arima(&ma1, &[1.0, 2.0], 3).unwrap();
        assert!((f[0] - 1.04).abs() < 1e-12 && f[1] == 1.0 && f[2] == 1.0);

        assert!(forecast_arima(&ar1, &[1.0], 2).is_err());
    }

    #[test]
    fn psi_weights_of_random_walk_and_ar1() {
        let rw = ArimaSpec {
            p: 0,
            d: 1,
            q: 0,
            ar: vec![],
            ma: vec![],
            intercept: 0.0,
            residuals: vec![],
            sigma2: 2.0,
            css: 0.0,
        };
        assert_eq!(rw.psi_weights(4), vec![1.0; 4]);
        assert_eq!(forecast_variance(&rw, 3), vec![2.0, 4.0, 6.0]);
        let ar1 = ArimaSpec { d: 0, p: 1, ar: vec![0.5], ..rw };
        assert_eq!(ar1.psi_weights(3), vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn kv_roundtrip() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() + 0.01 * i as f64).collect();
        let m = fit_arima(&xs, 1, 1, 1).unwrap();
        let back = ArimaSpec::from_kv(&KvFile::parse(&m.to_kv().to_text()).unwrap()).unwrap();
        assert_eq!((back.p, back.d, back.q), (1, 1, 1));
        assert!((back.ar[0] - m.ar[0]).abs() < 1e-9 * m.ar[0].abs().max(1.0));
        assert_eq!(back.residuals.len(), m.residuals.len());
    }

    #[test]
    fn short_series_is_rejected() {
        assert_eq!(
            fit_arima(&[1.0, 2.0, 3.0], 1, 1, 1).unwrap_err().code(),
            "E_INSUFFICIENT_DATA"
        );
    }
}
