//! Thin wrappers over `libm` so the crate builds without `std`.

use alloc::vec::Vec;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub(crate) fn powi(x: f64, k: i64) -> f64 {
    libm::pow(x, k as f64)
}
#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Poisson(mean) probabilities for k = 0..=K, where K is the first index past
/// the mean with upper tail below `tol`. Returns the weights and that tail.
pub(crate) fn poisson_weights(mean: f64, tol: f64) -> (Vec<f64>, f64) {
    let mut w = Vec::new();
    if mean <= 0.0 {
        w.push(1.0);
        return (w, 0.0);
    }
    let lm = ln(mean);
    let mut acc = 0.0;
    let mut k = 0u64;
    loop {
        let lp = -mean + k as f64 * lm - libm::lgamma(k as f64 + 1.0);
        let p = exp(lp);
        w.push(p);
        acc += p;
        let tail = (1.0 - acc).max(0.0);
        if (k as f64) > mean && (tail < tol || p == 0.0) {
            return (w, tail);
        }
        k += 1;
    }
}

/// Binomial weights C(b, a) / 2^b for a = 0..=b.
pub(crate) fn half_binomial_row(b: usize) -> Vec<f64> {
    let lb = -(b as f64) * core::f64::consts::LN_2;
    let lgb = libm::lgamma(b as f64 + 1.0);
    (0..=b)
        .map(|a| {
            exp(lb + lgb - libm::lgamma(a as f64 + 1.0) - libm::lgamma((b - a) as f64 + 1.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_weights_sum_to_one() {
        for &m in &[0.0, 0.3, 2.0, 17.5] {
            let (w, tail) = poisson_weights(m, 1e-15);
            let s: f64 = w.iter().sum();
            assert!((s + tail - 1.0).abs() < 1e-14);
            assert!(tail < 1e-15);
        }
    }

    #[test]
    fn half_binomial_rows_are_distributions() {
        for b in 0..40 {
            let s: f64 = half_binomial_row(b).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
        assert!((half_binomial_row(2)[1] - 0.5).abs() < 1e-15);
    }
}
