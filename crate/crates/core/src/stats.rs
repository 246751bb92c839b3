//! Kruskal-Wallis omnibus test and Dunn's pairwise post-hoc test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjustment {
    #[default]
    None,
    Bonferroni,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DunnReport {
    /// `z[i][j] = (mean_rank_i - mean_rank_j) / se_ij`, antisymmetric.
    pub z: Vec<Vec<f64>>,
    /// Two-sided p-values, symmetric, 1 on the diagonal.
    pub p: Vec<Vec<f64>>,
    pub adjustment: Adjustment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub h_statistic: f64,
    pub p_omnibus: f64,
    pub pairwise: DunnReport,
}

/// Midranks of the pooled sample plus the tie correction term `sum(t^3 - t)`.
pub fn rank_pooled(groups: &[&[f64]]) -> (Vec<Vec<f64>>, f64) {
    let mut pooled: Vec<(f64, usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, xs)| xs.iter().enumerate().map(move |(k, &x)| (x, g, k)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut ties = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &(_, g, k) in &pooled[i..=j] {
            ranks[g][k] = mid;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

fn check_groups(groups: &[&[f64]]) -> Result<usize> {
    if groups.len() < 2 {
        return Err(Error::Input("need at least two groups".into()));
    }
    if let Some(g) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::Input(format!("group {g} is empty")));
    }
    if groups.iter().any(|g| g.iter().any(|x| x.is_nan())) {
        return Err(Error::Input("samples must not be NaN".into()));
    }
    Ok(groups.iter().map(|g| g.len()).sum())
}

/// H statistic from group rank sums, tie-corrected.
pub fn h_from_rank_sums(rank_sums: &[f64], sizes: &[usize], ties: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return 0.0;
    }
    let s: f64 = rank_sums.iter().zip(sizes).map(|(r, &m)| r * r / m as f64).sum();
    let h = (12.0 / (nf * (nf + 1.0)) * s - 3.0 * (nf + 1.0)) / correction;
    h.max(0.0)
}

pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<KruskalWallis> {
    let n = check_groups(groups)?;
    let df = groups.len() - 1;
    let (ranks, ties) = rank_pooled(groups);
    let nf = n as f64;
    if ties >= nf * nf * nf - nf {
        return Ok(KruskalWallis { h: 0.0, p: 1.0, df });
    }
    let sums: Vec<f64> = ranks.iter().map(|r| r.iter().sum()).collect();
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let h = h_from_rank_sums(&sums, &sizes, ties);
    Ok(KruskalWallis { h, p: chi2_sf(h, df), df })
}

pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).map_or(f64::NAN, |c| c.sf(x)).clamp(0.0, 1.0)
}

/// Two-sided standard-normal tail probability.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Dunn z statistics from mean ranks, tie-corrected.
pub fn dunn_z(mean_ranks: &[f64], sizes: &[usize], ties: f64) -> Vec<Vec<f64>> {
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    let base = nf * (nf + 1.0) / 12.0 - ties / (12.0 * (nf - 1.0));
    let k = sizes.len();
    let mut z = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let se = (base.max(0.0) * (1.0 / sizes[i] as f64 + 1.0 / sizes[j] as f64)).sqrt();
            z[i][j] = if se > 0.0 {
                (mean_ranks[i] - mean_ranks[j]) / se
            } else {
                0.0
            };
        }
    }
    z
}

pub fn dunn_test(groups: &[&[f64]], adjustment: Adjustment) -> Result<DunnReport> {
    check_groups(groups)?;
    let k = groups.len();
    let (ranks, ties) = rank_pooled(groups);
    let mean_ranks: Vec<f64> = ranks.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let z = dunn_z(&mean_ranks, &sizes, ties);
    let m = (k * (k - 1) / 2) as f64;
    let p = z
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &zij)| {
                    if i == j {
                        return 1.0;
                    }
                    let p = normal_two_sided(zij);
                    match adjustment {
                        Adjustment::None => p,
                        Adjustment::Bonferroni => (p * m).min(1.0),
                    }
                })
                .collect()
        })
        .collect();
    Ok(DunnReport { z, p, adjustment })
}

/// Omnibus test plus post-hoc comparisons in one report.
pub fn compare(groups: &[&[f64]], adjustment: Adjustment) -> Result<TestReport> {
    let kw = kruskal_wallis(groups)?;
    Ok(TestReport {
        h_statistic: kw.h,
        p_omnibus: kw.p,
        pairwise: dunn_test(groups, adjustment)?,
    })
}
