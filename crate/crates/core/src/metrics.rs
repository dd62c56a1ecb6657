//! Partition comparison: adjusted Rand index, misclustering rate under the
//! best cluster bijection, and the bijection itself.

use serde::{Deserialize, Serialize};

use crate::error::{QuiltError, Result};

/// Cluster labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(QuiltError::InvalidInput("cluster count must be at least 1".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(QuiltError::InvalidInput(format!("label {bad} outside 0..{k}")));
        }
        Ok(LabelVector { labels, k })
    }

    /// Uses `max label + 1` as the cluster count.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(1, |m| m + 1);
        LabelVector::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same labels declared over a larger cluster count.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        LabelVector::new(self.labels.clone(), k)
    }

    /// Cluster sizes `n_j`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn check_lengths(a: &LabelVector, b: &LabelVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(QuiltError::InvalidInput(format!(
            "label vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn contingency(a: &LabelVector, b: &LabelVector) -> Vec<Vec<u64>> {
    let mut table = vec![vec![0u64; b.k()]; a.k()];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        table[x][y] += 1;
    }
    table
}

fn pairs(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// Pair-counting adjusted Rand index.
///
/// Returns 1 when the chance-corrected denominator vanishes, which only
/// happens when both partitions are all-singletons or both a single block.
pub fn adjusted_rand_index(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len() as u64;
    if n < 2 {
        return Ok(1.0);
    }
    let table = contingency(a, b);
    let index: u64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let row_sum: u64 = table.iter().map(|row| pairs(row.iter().sum())).sum();
    let col_sum: u64 = (0..b.k())
        .map(|j| pairs(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = pairs(n) as f64;
    let expected = row_sum as f64 * col_sum as f64 / total;
    let max = (row_sum + col_sum) as f64 / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index as f64 - expected) / (max - expected))
}

/// Solve a square assignment problem minimizing total cost (Hungarian
/// algorithm with potentials). Returns `assign[row] = col` and the cost.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assign, total)
}

/// Largest number of agreements achievable by a bijection on a square
/// count table.
fn max_matched(table: &[Vec<u64>]) -> u64 {
    let top = table.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost: Vec<Vec<i64>> = table
        .iter()
        .map(|row| row.iter().map(|&c| top - c as i64).collect())
        .collect();
    let (_, c) = min_cost_assignment(&cost);
    (top * table.len() as i64 - c) as u64
}

fn check_same_k(zhat: &LabelVector, z: &LabelVector) -> Result<()> {
    check_lengths(zhat, z)?;
    if zhat.k() != z.k() {
        return Err(QuiltError::InvalidInput(format!(
            "misclustering rate needs equal cluster counts ({} vs {})",
            zhat.k(),
            z.k()
        )));
    }
    Ok(())
}

/// `min over bijections phi of (1/n) #{i : phi(zhat_i) != z_i}`.
pub fn misclustering_rate(zhat: &LabelVector, z: &LabelVector) -> Result<f64> {
    check_same_k(zhat, z)?;
    if zhat.is_empty() {
        return Ok(0.0);
    }
    let matched = max_matched(&contingency(zhat, z));
    Ok((zhat.len() as u64 - matched) as f64 / zhat.len() as f64)
}

/// The optimal bijection `phi` (as `phi[zhat_label] = z_label`); among
/// optimal bijections the lexicographically smallest is returned.
pub fn align_labels(zhat: &LabelVector, z: &LabelVector) -> Result<Vec<usize>> {
    check_same_k(zhat, z)?;
    let table = contingency(zhat, z);
    let k = table.len();
    let target = max_matched(&table);

    let mut phi = Vec::with_capacity(k);
    let mut used = vec![false; k];
    let mut fixed = 0u64;
    for i in 0..k {
        let rest_rows: Vec<usize> = (i + 1..k).collect();
        let chosen = (0..k).filter(|&j| !used[j]).find(|&j| {
            let rest_cols: Vec<usize> = (0..k).filter(|&c| !used[c] && c != j).collect();
            let sub: Vec<Vec<u64>> = rest_rows
                .iter()
                .map(|&r| rest_cols.iter().map(|&c| table[r][c]).collect())
                .collect();
            fixed + table[i][j] + max_matched(&sub) == target
        });
        let j = chosen.expect("an optimal completion always exists");
        used[j] = true;
        fixed += table[i][j];
        phi.push(j);
    }
    Ok(phi)
}
