//! Entropy, cross-entropy and Kullback-Leibler divergence of finite mass
//! vectors, with the convention `0 · log 0 = 0`.

/// `H(p) = −Σ p log p`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|v| **v > 0.0)
        .map(|v| v * v.ln())
        .sum::<f64>()
}

/// `−Σ p log q`; `+∞` if `q = 0` somewhere `p > 0`.
pub fn cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "mass vectors differ in length");
    let mut total = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 {
            if *b <= 0.0 {
                return f64::INFINITY;
            }
            total -= a * b.ln();
        }
    }
    total
}

/// `KL(p ‖ q) = Σ p log(p / q)`. Returns `+∞` when `p` is not absolutely
/// continuous with respect to `q`; [`support_violation`] reports that case.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "mass vectors differ in length");
    let mut total = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 {
            if *b <= 0.0 {
                return f64::INFINITY;
            }
            total += a * (a.ln() - b.ln());
        }
    }
    total.max(0.0)
}

pub fn support_violation(p: &[f64], q: &[f64]) -> bool {
    p.iter().zip(q).any(|(a, b)| *a > 0.0 && *b <= 0.0)
}

/// KL between distributions given by log masses.
pub fn kl_divergence_log(log_p: &[f64], log_q: &[f64]) -> f64 {
    assert_eq!(log_p.len(), log_q.len(), "mass vectors differ in length");
    let mut total = 0.0;
    for (a, b) in log_p.iter().zip(log_q) {
        if *a > f64::NEG_INFINITY {
            if *b == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            total += a.exp() * (a - b);
        }
    }
    total.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert!(support_violation(&[0.5, 0.5], &[1.0, 0.0]));
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&p, &p) - entropy(&p)).abs() < 1e-15);
    }

    #[test]
    fn log_form_agrees() {
        let p = [0.1, 0.6, 0.3];
        let q = [0.3, 0.3, 0.4];
        let lp: Vec<f64> = p.iter().map(|v: &f64| v.ln()).collect();
        let lq: Vec<f64> = q.iter().map(|v: &f64| v.ln()).collect();
        assert!((kl_divergence(&p, &q) - kl_divergence_log(&lp, &lq)).abs() < 1e-15);
    }
}
