//! Representative train/test partition by maximum-dissimilarity
//! (Kennard–Stone) selection on standardized features.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Column, Sample};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("column `{0}` is constant and cannot be standardized")]
    ConstantColumn(&'static str),
    #[error("need at least 4 samples, got {0}")]
    TooFewSamples(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("train fraction {fraction} leaves an empty subset for {n} samples")]
    EmptySubset { fraction: f64, n: usize },
    #[error("all samples are identical")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub train_fraction: f64,
    /// Row indices into the input set, in selection order.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Z-scores of every column (population standard deviation). Rows follow the
/// input order, columns follow [`Column::ALL`].
pub fn standardize(samples: &[Sample]) -> Result<Vec<[f64; 5]>, SplitError> {
    let (means, stds) = moments(samples);
    for (i, &sd) in stds.iter().enumerate() {
        if sd == 0.0 || !sd.is_finite() {
            return Err(SplitError::ConstantColumn(Column::ALL[i].name()));
        }
    }
    Ok(zscores(samples, &means, &stds))
}

fn moments(samples: &[Sample]) -> ([f64; 5], [f64; 5]) {
    let n = samples.len() as f64;
    let mut means = [0.0; 5];
    let mut stds = [0.0; 5];
    for (i, &c) in Column::ALL.iter().enumerate() {
        let mean = samples.iter().map(|s| s.get(c)).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.get(c) - mean).powi(2)).sum::<f64>() / n;
        means[i] = mean;
        stds[i] = var.sqrt();
    }
    (means, stds)
}

fn zscores(samples: &[Sample], means: &[f64; 5], stds: &[f64; 5]) -> Vec<[f64; 5]> {
    samples
        .iter()
        .map(|s| {
            let mut z = [0.0; 5];
            for (i, &c) in Column::ALL.iter().enumerate() {
                // constant columns contribute nothing to distances
                z[i] = if stds[i] > 0.0 { (s.get(c) - means[i]) / stds[i] } else { 0.0 };
            }
            z
        })
        .collect()
}

fn dist2(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Full Kennard–Stone selection order over `points`: the mutually farthest
/// pair first, then repeatedly the point whose nearest selected neighbour is
/// farthest away. Ties go to the lowest row index.
pub fn kennard_stone_order(points: &[[f64; 5]]) -> Vec<usize> {
    let n = points.len();
    if n < 2 {
        return (0..n).collect();
    }
    let mut best = (0, 1, f64::NEG_INFINITY);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist2(&points[i], &points[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let mut order = vec![best.0, best.1];
    let mut selected = vec![false; n];
    selected[best.0] = true;
    selected[best.1] = true;
    let mut nearest: Vec<f64> = (0..n)
        .map(|k| dist2(&points[k], &points[best.0]).min(dist2(&points[k], &points[best.1])))
        .collect();
    while order.len() < n {
        let mut pick = None;
        let mut pick_d = f64::NEG_INFINITY;
        for k in 0..n {
            if !selected[k] && nearest[k] > pick_d {
                pick = Some(k);
                pick_d = nearest[k];
            }
        }
        let k = pick.expect("unselected point remains");
        selected[k] = true;
        order.push(k);
        for m in 0..n {
            if !selected[m] {
                nearest[m] = nearest[m].min(dist2(&points[m], &points[k]));
            }
        }
    }
    order
}

/// Splits `samples` so the training set is a maximum-dissimilarity subset
/// of size `round(train_fraction * n)`.
///
/// After Kennard–Stone ordering, the earliest-selected holder of each
/// feature's minimum and maximum is forced into the training set (displacing
/// the latest-selected non-holders), which guarantees that every test range
/// lies within the training range whenever the training set has room for
/// those holders. When the Kennard–Stone prefix already contains them the
/// result is plain Kennard–Stone.
///
/// `seed` is accepted for the run manifest; the lowest-index tie rule always
/// resolves ties, so it never changes the outcome.
pub fn ssmd_split(samples: &[Sample], train_fraction: f64, seed: u64) -> Result<Split, SplitError> {
    let _ = seed;
    let n = samples.len();
    if n < 4 {
        return Err(SplitError::TooFewSamples(n));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SplitError::BadFraction(train_fraction));
    }
    let k = (train_fraction * n as f64).round() as usize;
    if k == 0 || k == n {
        return Err(SplitError::EmptySubset {
            fraction: train_fraction,
            n,
        });
    }
    let (means, stds) = moments(samples);
    if stds.iter().all(|&s| s == 0.0) {
        return Err(SplitError::Degenerate);
    }
    let z = zscores(samples, &means, &stds);
    let order = kennard_stone_order(&z);
    let mut rank = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }

    // earliest-selected holder of each feature extreme
    let mut holders: Vec<usize> = Vec::new();
    for &c in &Column::ALL {
        let lo = samples.iter().map(|s| s.get(c)).fold(f64::INFINITY, f64::min);
        let hi = samples.iter().map(|s| s.get(c)).fold(f64::NEG_INFINITY, f64::max);
        for target in [lo, hi] {
            let h = (0..n)
                .filter(|&i| samples[i].get(c) == target)
                .min_by_key(|&i| rank[i])
                .expect("extreme is attained");
            if !holders.contains(&h) {
                holders.push(h);
            }
        }
    }
    holders.sort_by_key(|&i| rank[i]);
    holders.truncate(k);

    let mut in_train = vec![false; n];
    for &h in &holders {
        in_train[h] = true;
    }
    let mut remaining = k - holders.len();
    for &i in &order {
        if remaining == 0 {
            break;
        }
        if !in_train[i] {
            in_train[i] = true;
            remaining -= 1;
        }
    }
    let train_indices: Vec<usize> = order.iter().copied().filter(|&i| in_train[i]).collect();
    let test_indices: Vec<usize> = order.iter().copied().filter(|&i| !in_train[i]).collect();
    Ok(Split {
        train: train_indices.iter().map(|&i| samples[i]).collect(),
        test: test_indices.iter().map(|&i| samples[i]).collect(),
        train_fraction,
        train_indices,
        test_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_point(x: f64) -> Sample {
        Sample::new(x + 1.0, 1.0, 0.5, 0.05, 10.0)
    }

    #[test]
    fn standardize_small_column() {
        let data: Vec<Sample> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&x| Sample::new(x, x * 2.0, x + 1.0, x / 10.0, x * x))
            .collect();
        let z = standardize(&data).unwrap();
        let expected = 1.5f64.sqrt(); // (x - 2) / sqrt(2/3)
        assert!((z[0][0] + expected).abs() < 1e-12);
        assert!(z[1][0].abs() < 1e-12);
        assert!((z[2][0] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn standardize_is_idempotent() {
        let data: Vec<Sample> = (0..7)
            .map(|i| {
                let x = i as f64;
                Sample::new(1.0 + x, 2.0 + x * x, 0.3 + 0.1 * x, 0.01 + x.sqrt(), 5.0 - 0.5 * x)
            })
            .collect();
        let z = standardize(&data).unwrap();
        let again: Vec<Sample> = z.iter().map(|r| Sample::new(r[0], r[1], r[2], r[3], r[4])).collect();
        let z2 = standardize(&again).unwrap();
        for (a, b) in z.iter().zip(&z2) {
            for i in 0..5 {
                assert!((a[i] - b[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let data = vec![line_point(0.0), line_point(1.0)];
        assert_eq!(standardize(&data), Err(SplitError::ConstantColumn("d")));
    }

    /// Brute force: the subset of size k maximizing the minimum pairwise
    /// distance (ties to the lexicographically smallest index set).
    fn maximin_subset(points: &[[f64; 5]], k: usize) -> Vec<usize> {
        let n = points.len();
        let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, vec![]);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let mut spread = f64::INFINITY;
            for a in 0..idx.len() {
                for b in (a + 1)..idx.len() {
                    spread = spread.min(dist2(&points[idx[a]], &points[idx[b]]));
                }
            }
            if spread > best.0 || (spread == best.0 && idx < best.1) {
                best = (spread, idx);
            }
        }
        best.1
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort();
        v
    }

    #[test]
    fn collinear_points_keep_the_ends() {
        let data: Vec<Sample> = (0..4).map(|i| line_point(i as f64)).collect();
        let split = ssmd_split(&data, 0.5, 7).unwrap();
        let z = zscores(&data, &moments(&data).0, &moments(&data).1);
        assert_eq!(maximin_subset(&z, 2), vec![0, 3]);
        assert_eq!(sorted(split.train_indices.clone()), vec![0, 3]);
        assert_eq!(sorted(split.test_indices), vec![1, 2]);
    }

    #[test]
    fn collinear_points_with_monotone_jitter() {
        let data: Vec<Sample> = (0..4)
            .map(|i| {
                let x = i as f64;
                Sample::new(x + 1.0, 1.0 + 1e-3 * x, 0.5 + 1e-4 * x, 0.05, 10.0 + 1e-3 * x)
            })
            .collect();
        let split = ssmd_split(&data, 0.5, 1).unwrap();
        assert_eq!(sorted(split.train_indices), vec![0, 3]);
    }

    #[test]
    fn leaves_out_the_most_interior_point() {
        // square corners plus centre, in (w, d); other columns constant
        let coords = [(1.0, 1.0), (3.0, 1.0), (2.0, 2.0), (1.0, 3.0), (3.0, 3.0)];
        let data: Vec<Sample> = coords.iter().map(|&(w, d)| Sample::new(w, d, 0.5, 0.05, 10.0)).collect();
        let (m, s) = moments(&data);
        let z = zscores(&data, &m, &s);
        let keep = maximin_subset(&z, 4);
        let oracle_test: Vec<usize> = (0..5).filter(|i| !keep.contains(i)).collect();
        assert_eq!(oracle_test, vec![2]);
        let split = ssmd_split(&data, 0.8, 0).unwrap();
        assert_eq!(split.test_indices, oracle_test);
    }

    #[test]
    fn contract_errors() {
        let data: Vec<Sample> = (0..3).map(|i| line_point(i as f64)).collect();
        assert_eq!(ssmd_split(&data, 0.5, 0), Err(SplitError::TooFewSamples(3)));
        let data: Vec<Sample> = (0..6).map(|i| line_point(i as f64)).collect();
        assert_eq!(ssmd_split(&data, 1.0, 0), Err(SplitError::BadFraction(1.0)));
        assert_eq!(ssmd_split(&data, 0.0, 0), Err(SplitError::BadFraction(0.0)));
        let same = vec![line_point(0.0); 5];
        assert_eq!(ssmd_split(&same, 0.6, 0), Err(SplitError::Degenerate));
    }

    #[test]
    fn train_size_is_rounded_fraction() {
        let data: Vec<Sample> = (0..10).map(|i| line_point(i as f64 * 1.3)).collect();
        let split = ssmd_split(&data, 0.7, 0).unwrap();
        assert_eq!(split.train.len(), 7);
        assert_eq!(split.test.len(), 3);
    }
}
