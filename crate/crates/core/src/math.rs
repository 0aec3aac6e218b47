//! Log-space numerics shared by every engine.

/// `ln(2π) / 2`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `log(Σ exp(vᵢ))` without overflow. Returns `-∞` for an empty or all-`-∞`
/// input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() || max.is_nan() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    pub fn add(&mut self, value: f64) {
        if value == f64::NEG_INFINITY {
            return;
        }
        if value <= self.max {
            self.scaled += (value - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - value).exp() + 1.0;
            self.max = value;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Normalizes log weights in place so that `Σ exp(vᵢ) = 1`; returns the log
/// normalizer.
pub fn normalize_log(values: &mut [f64]) -> f64 {
    let norm = log_sum_exp(values);
    if norm.is_finite() {
        for v in values.iter_mut() {
            *v -= norm;
        }
    }
    norm
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(sigmoid(x))`.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -HALF_LN_2PI - sd.ln() - 0.5 * z * z
}

/// Log density of a normal distribution at its mode.
pub fn normal_log_mode_density(sd: f64) -> f64 {
    -HALF_LN_2PI - sd.ln()
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

/// Binomial log pmf from log success/failure probabilities, exact at the
/// `p ∈ {0, 1}` boundaries.
pub fn binomial_log_pmf(k: u64, n: u64, log_p: f64, log_q: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let success = if k == 0 { 0.0 } else { k as f64 * log_p };
    let failure = if k == n { 0.0 } else { (n - k) as f64 * log_q };
    ln_choose(n, k) + success + failure
}

pub fn binomial_log_pmf_p(k: u64, n: u64, p: f64) -> f64 {
    binomial_log_pmf(k, n, p.ln(), (-p).ln_1p())
}

/// `w · ll` with the convention `0 · (−∞) = 0`, i.e. a likelihood raised to
/// the power zero is one.
#[inline]
pub fn tempered(weight: f64, log_lik: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * log_lik
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Log density of `LogNormal(mu, sigma)` (parameters of the underlying normal).
pub fn lognormal_log_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    normal_log_pdf(x.ln(), mu, sigma) - x.ln()
}

/// Log density of `Gamma(shape, scale)`.
pub fn gamma_log_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Arithmetic mean and its naive standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_large_arguments() {
        // log(exp(1234) + exp(1232)) = 1232 + log(e² + 1)
        let v = log_sum_exp(&[1234.0, 1232.0]);
        assert!((v - 1_234.126_928_011_043).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn streaming_matches_batch() {
        let vals = [-3.0, 10.5, f64::NEG_INFINITY, 2.25, 10.4, -700.0];
        let mut acc = LogSumExp::new();
        for v in vals {
            acc.add(v);
        }
        assert!((acc.value() - log_sum_exp(&vals)).abs() < 1e-13);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn binomial_boundaries() {
        assert_eq!(binomial_log_pmf_p(7, 7, 1.0), 0.0);
        assert_eq!(binomial_log_pmf_p(3, 7, 1.0), f64::NEG_INFINITY);
        assert_eq!(binomial_log_pmf_p(0, 7, 0.0), 0.0);
        let total: f64 = (0..=7).map(|k| binomial_log_pmf_p(k, 7, 0.3).exp()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tempering_zero_weight_ignores_impossible_data() {
        assert_eq!(tempered(0.0, f64::NEG_INFINITY), 0.0);
        assert_eq!(tempered(0.5, -2.0), -1.0);
    }
}
