//! Small goodness-of-fit helpers used by the experiment drivers.

use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal scores `Φ⁻¹((k − ½)/m)`, `k = 1..m`.
pub fn normal_scores(m: usize) -> Vec<f64> {
    let z = Normal::standard();
    (1..=m).map(|k| z.inverse_cdf((k as f64 - 0.5) / m as f64)).collect()
}

/// Ordinary least-squares line `y ≈ intercept + slope · x`.
pub fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Kolmogorov-Smirnov distance between a sample and `N(0, 1)`.
pub fn ks_normal_distance(sample: &[f64]) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let z = Normal::standard();
    let m = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(k, &v)| {
            let f = z.cdf(v);
            (f - k as f64 / m).max((k + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn ks_p_value(distance: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let lambda = (sm + 0.12 + 0.11 / sm) * distance;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Type-7 empirical quantile of an ascending sample.
pub fn sorted_quantile(sorted: &[f64], prob: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ols_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let (b, a) = ols_line(&x, &y);
        assert_relative_eq!(b, 2.0, epsilon = 1e-14);
        assert_relative_eq!(a, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn ks_of_normal_scores_is_small() {
        let s = normal_scores(400);
        let dist = ks_normal_distance(&s);
        assert_relative_eq!(dist, 0.5 / 400.0, epsilon = 1e-7);
        assert!(ks_p_value(dist, 400) > 0.99);
    }

    #[test]
    fn ks_p_value_matches_table() {
        // 1% critical value of the limiting law is 1.6276.
        let m = 10_000;
        let sm = (m as f64).sqrt();
        let d = 1.6276 / (sm + 0.12 + 0.11 / sm);
        assert_relative_eq!(ks_p_value(d, m), 0.01, epsilon = 1e-4);
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(sorted_quantile(&s, 0.5), 3.0);
        assert_eq!(sorted_quantile(&s, 0.125), 1.5);
    }
}
