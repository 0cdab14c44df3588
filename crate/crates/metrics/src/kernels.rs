//! Kernel two-sample statistics over histogram sets.

use crate::bev::BevHistogram;
use crate::{MetricsError, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median pairwise Euclidean distance over the pooled sets (the median
/// heuristic); guarded away from zero for degenerate pools.
fn median_bandwidth(pool: &[&BevHistogram]) -> f64 {
    let mut dists = Vec::new();
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            dists.push(sq_dist(&pool[i].cells, &pool[j].cells).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    dists[dists.len() / 2].max(1e-12)
}

/// Unbiased squared maximum mean discrepancy with a Gaussian kernel
/// `k(a, b) = exp(-|a-b|^2 / (2 gamma^2))`, `gamma` from the median
/// heuristic, clamped at zero. Reports multiply this by 1e4.
pub fn mmd(set_a: &[BevHistogram], set_b: &[BevHistogram]) -> Result<f64> {
    if set_a.len() < 2 || set_b.len() < 2 {
        return Err(MetricsError::Estimator(format!(
            "unbiased MMD needs both sets >= 2, got {} and {}",
            set_a.len(),
            set_b.len()
        )));
    }
    let pool: Vec<&BevHistogram> = set_a.iter().chain(set_b.iter()).collect();
    let gamma = median_bandwidth(&pool);
    let k = |a: &BevHistogram, b: &BevHistogram| -> f64 {
        (-sq_dist(&a.cells, &b.cells) / (2.0 * gamma * gamma)).exp()
    };
    let (m, n) = (set_a.len() as f64, set_b.len() as f64);
    let mut kaa = 0.0;
    for i in 0..set_a.len() {
        for j in 0..set_a.len() {
            if i != j {
                kaa += k(&set_a[i], &set_a[j]);
            }
        }
    }
    let mut kbb = 0.0;
    for i in 0..set_b.len() {
        for j in 0..set_b.len() {
            if i != j {
                kbb += k(&set_b[i], &set_b[j]);
            }
        }
    }
    let mut kab = 0.0;
    for a in set_a {
        for b in set_b {
            kab += k(a, b);
        }
    }
    let est = kaa / (m * (m - 1.0)) + kbb / (n * (n - 1.0)) - 2.0 * kab / (m * n);
    Ok(est.max(0.0))
}

/// Jensen-Shannon divergence (base 2, in [0, 1]) between the element-wise
/// mean histograms of the two sets, with `0 log 0 = 0`.
pub fn jsd(set_a: &[BevHistogram], set_b: &[BevHistogram]) -> Result<f64> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(MetricsError::Estimator("JSD needs nonempty sets".into()));
    }
    let dim = set_a[0].cells.len();
    let mean = |set: &[BevHistogram]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for h in set {
            for (o, c) in out.iter_mut().zip(&h.cells) {
                *o += c;
            }
        }
        let inv = 1.0 / set.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        out
    };
    let p = mean(set_a);
    let q = mean(set_b);
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if sp == 0.0 && sq == 0.0 {
        return Err(MetricsError::Undefined("both mean histograms are all-zero".into()));
    }
    let mut acc = 0.0;
    for (pi, qi) in p.iter().zip(&q) {
        let mi = 0.5 * (pi + qi);
        if *pi > 0.0 {
            acc += 0.5 * pi * (pi / mi).log2();
        }
        if *qi > 0.0 {
            acc += 0.5 * qi * (qi / mi).log2();
        }
    }
    Ok(acc)
}
