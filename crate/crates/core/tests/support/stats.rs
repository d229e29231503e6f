#![allow(dead_code)]

/// Survival function of the chi-square distribution for an even number of
/// degrees of freedom `2k`: `exp(-x/2) * sum_{i<k} (x/2)^i / i!`.
pub fn chi2_sf_even(x: f64, df: u32) -> f64 {
    assert!(df % 2 == 0 && df > 0);
    let h = x / 2.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    for i in 0..df / 2 {
        if i > 0 {
            term *= h / i as f64;
        }
        sum += term;
    }
    (-h).exp() * sum
}

/// Pearson statistic of `counts` against a uniform expectation.
pub fn chi2_uniform(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}
