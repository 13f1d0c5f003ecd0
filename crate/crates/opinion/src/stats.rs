//! Small statistics helpers: least squares, bootstrap, Kolmogorov-Smirnov.

use rand::Rng;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ordinary least-squares `(slope, intercept)` of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// the exponential law with unit mean.
pub fn ks_exponential(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-x).exp();
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    d
}

/// Bootstrap standard error of a statistic over resampled groups.
///
/// Each group is resampled with replacement independently and `stat` is
/// evaluated on the resampled groups.
pub fn bootstrap_stderr<R: Rng, F: Fn(&[Vec<f64>]) -> f64>(
    groups: &[Vec<f64>],
    rounds: usize,
    rng: &mut R,
    stat: F,
) -> f64 {
    let mut values = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let resampled: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| {
                (0..g.len())
                    .map(|_| g[rng.random_range(0..g.len())])
                    .collect()
            })
            .collect();
        values.push(stat(&resampled));
    }
    let m = mean(&values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

/// Wilson score interval for a binomial proportion at ~95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959964;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
