//! Small statistics helpers used by the Monte Carlo checks.

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Wilson {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Wilson {
    pub fn new(successes: usize, n: usize, z: f64) -> Self {
        assert!(n > 0, "Wilson interval needs at least one trial");
        let n_f = n as f64;
        let p = successes as f64 / n_f;
        let z2 = z * z;
        let denom = 1.0 + z2 / n_f;
        let center = (p + z2 / (2.0 * n_f)) / denom;
        let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
        Self {
            estimate: p,
            lo: (center - half).max(0.0),
            hi: (center + half).min(1.0),
        }
    }

    pub fn ninety_nine(successes: usize, n: usize) -> Self {
        Self::new(successes, n, Z_99)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
