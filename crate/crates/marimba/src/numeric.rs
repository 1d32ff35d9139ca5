//! Numeric policy: centralized tolerances and compensated summation.
//!
//! Every comparison threshold in the crate routes through these constants so
//! the acceptance tolerances live in one place.

/// Tolerance for geometric predicates (incidence, segment membership,
/// closure of hexagon walks). Leaves ~5 digits of headroom over f64
/// rounding accumulated across a few dozen matrix products.
pub const GEOM_TOL: f64 = 1e-10;

/// Tolerance for matrix identities (determinants, frame closure).
pub const MATRIX_TOL: f64 = 1e-12;

/// |sin theta| below this at a cross-section crossing is treated as a
/// tangency and aborts the trace. Tangencies form a measure-zero set, so a
/// generic start never comes near this.
pub const TANGENCY_TOL: f64 = 1e-9;

/// Slack used when deciding whether a hit point lies on a side segment.
pub const SEGMENT_TOL: f64 = 1e-9;

/// Determinant drift band outside of which renormalization refuses to
/// rescale (something upstream has already gone wrong).
pub const DET_BAND: (f64, f64) = (0.5, 2.0);

/// Compensated (Kahan) accumulator for long sums of small increments.
///
/// Used for trace time so that 10^7 units of length accumulate with error
/// independent of the number of steps.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.15e-9 which is far inside what the z-score
/// battery needs).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
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
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against a reference
/// CDF. `samples` need not be sorted.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_long_sums() {
        let mut k = Kahan::new();
        let step = 0.1;
        let n = 10_000_000u64;
        for _ in 0..n {
            k.add(step);
        }
        let exact = step * n as f64;
        assert!((k.value() - exact).abs() < 1e-6);
    }

    #[test]
    fn normal_quantiles_match_tables() {
        // Reference values from standard normal tables.
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-8);
        assert!((inverse_normal_cdf(0.5)).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.0013498980316300945) + 3.0).abs() < 1e-7);
    }

    #[test]
    fn ks_of_exact_uniform_grid_is_half_spacing() {
        let n = 1000;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&samples, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }
}
