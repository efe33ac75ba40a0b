//! Society metrics and two-sample statistics.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SimError};

/// Pooled size up to which the Mann-Whitney p-value is computed exactly.
pub const EXACT_MAX_N: usize = 40;

/// Mean absolute pairwise difference over twice the mean. All-zero input
/// gives 0.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(SimError::contract("gini needs finite non-negative values"));
    }
    let total: f64 = values.iter().sum();
    if values.is_empty() || total == 0.0 {
        return Ok(0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i + 1) as f64 * x)
        .sum();
    let g = 2.0 * weighted / (n * total) - (n + 1.0) / n;
    Ok(g.clamp(0.0, 1.0))
}

pub fn social_welfare(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Smallest value, 0 for an empty society.
pub fn min_value(values: &[f64]) -> f64 {
    values.iter().copied().reduce(f64::min).unwrap_or(0.0)
}

/// Steps the society survived: the death step of the last agent, or `t_max`.
pub fn robustness(episode_steps: usize, t_max: usize) -> usize {
    episode_steps.min(t_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided.
    pub p: f64,
    pub exact: bool,
}

/// Average ranks (1-based) of `pooled`.
fn ranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(SimError::contract("Mann-Whitney needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(SimError::contract("Mann-Whitney needs finite values"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let (na, nb) = (a.len(), b.len());
    let rank_sum: f64 = r[..na].iter().sum();
    let u = rank_sum - (na * (na + 1)) as f64 / 2.0;
    if pooled.iter().all(|&v| v == pooled[0]) {
        return Ok(MannWhitney {
            u,
            p: 1.0,
            exact: true,
        });
    }
    if na + nb <= EXACT_MAX_N {
        Ok(MannWhitney {
            u,
            p: exact_p(&r, na),
            exact: true,
        })
    } else {
        Ok(MannWhitney {
            u,
            p: normal_p(u, na, nb, &pooled),
            exact: false,
        })
    }
}

/// Two-sided permutation p-value, `P(|U - mean| >= |u - mean|)` over every
/// way of drawing `na` of the pooled ranks. Doubled ranks are integers, so
/// the rank-sum distribution is counted exactly.
pub fn exact_p(ranks: &[f64], na: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[j][s]: subsets of size j with doubled rank sum s
    let mut counts = vec![vec![0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for &d in &doubled {
        for j in (1..=na).rev() {
            let (lo, hi) = counts.split_at_mut(j);
            for s in (d..=max_sum).rev() {
                hi[0][s] += lo[j - 1][s - d];
            }
        }
    }
    let n = ranks.len();
    let nb = n - na;
    let offset = na * (na + 1);
    // 2U = doubled rank sum - na(na+1); centre is na*nb
    let centre = (na * nb) as i64;
    let observed: usize = doubled[..na].iter().sum();
    let dev = |s: usize| ((s as i64 - offset as i64) - centre).abs();
    let obs_dev = dev(observed);
    let total: f64 = counts[na].iter().sum();
    let extreme: f64 = counts[na]
        .iter()
        .enumerate()
        .filter(|&(s, _)| dev(s) >= obs_dev)
        .map(|(_, c)| c)
        .sum();
    (extreme / total).min(1.0)
}

/// Normal approximation with tie and continuity correction.
pub fn normal_p(u: f64, na: usize, nb: usize, pooled: &[f64]) -> f64 {
    let (na_f, nb_f) = (na as f64, nb as f64);
    let n = na_f + nb_f;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mean = na_f * nb_f / 2.0;
    let var = na_f * nb_f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - std.cdf(z))).clamp(0.0, 1.0)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `|mean_a - mean_b| / s_pooled` with the (n-1)-weighted pooled SD.
/// `None` when the pooled SD is zero.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() < 2 || b.len() < 2 {
        return Err(SimError::contract("Cohen's d needs at least two values per sample"));
    }
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Ok(if ma == mb { Some(0.0) } else { None });
    }
    Ok(Some((ma - mb).abs() / pooled))
}

/// Cohen's d from two summaries of equal-size groups.
pub fn cohens_d_from_summary(mean_a: f64, sd_a: f64, mean_b: f64, sd_b: f64) -> Option<f64> {
    let pooled = ((sd_a * sd_a + sd_b * sd_b) / 2.0).sqrt();
    (pooled > 0.0).then(|| (mean_a - mean_b).abs() / pooled)
}

pub fn magnitude_label(d: f64) -> &'static str {
    let d = d.abs();
    if d < 0.2 {
        "negligible"
    } else if d < 0.5 {
        "small"
    } else if d < 0.8 {
        "medium"
    } else {
        "large"
    }
}

/// Comparison of one metric between the two societies.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricComparison {
    pub metric: String,
    pub baseline_mean: f64,
    pub baseline_sd: f64,
    pub maximin_mean: f64,
    pub maximin_sd: f64,
    pub u: f64,
    pub p: f64,
    pub d: Option<f64>,
}

impl MetricComparison {
    pub fn compute(metric: &str, baseline: &[f64], maximin: &[f64]) -> Result<Self> {
        let (bm, bs) = mean_sd(baseline);
        let (mm, ms) = mean_sd(maximin);
        let mw = mann_whitney_u(baseline, maximin)?;
        let d = if baseline.len() >= 2 && maximin.len() >= 2 {
            cohens_d(baseline, maximin)?
        } else {
            None
        };
        Ok(MetricComparison {
            metric: metric.to_string(),
            baseline_mean: bm,
            baseline_sd: bs,
            maximin_mean: mm,
            maximin_sd: ms,
            u: mw.u,
            p: mw.p,
            d,
        })
    }

    pub fn label(&self) -> &'static str {
        self.d.map_or("undefined", magnitude_label)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub rows: Vec<MetricComparison>,
}

impl StatsReport {
    pub fn get(&self, metric: &str) -> Option<&MetricComparison> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Aligned plain-text table.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<20} {:>12} {:>10} {:>12} {:>10} {:>12} {:>10} {:>8}  {}\n",
            "metric", "baseline", "sd", "maximin", "sd", "U", "p", "d", "effect"
        );
        for r in &self.rows {
            let d = r.d.map_or("-".to_string(), |d| format!("{d:.3}"));
            out.push_str(&format!(
                "{:<20} {:>12.4} {:>10.4} {:>12.4} {:>10.4} {:>12.1} {:>10.3e} {:>8}  {}\n",
                r.metric,
                r.baseline_mean,
                r.baseline_sd,
                r.maximin_mean,
                r.maximin_sd,
                r.u,
                r.p,
                d,
                r.label()
            ));
        }
        out
    }
}
