use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::descriptive::{mean, percentile, sd};
use super::{Method, Seed, Sidedness, StatResult};
use crate::error::{Error, Result};

/// Relative slack when comparing shuffled statistics against the observed
/// one, so floating-point reassociation does not flip exact ties.
const TIE_TOLERANCE: f64 = 1e-12;

fn at_least_as_extreme(stat: f64, observed: f64, sidedness: Sidedness) -> bool {
    let tol = TIE_TOLERANCE * observed.abs().max(1.0);
    match sidedness {
        Sidedness::Greater => stat >= observed - tol,
        Sidedness::Less => stat <= observed + tol,
        Sidedness::TwoSided => stat.abs() >= observed.abs() - tol,
    }
}

/// Permutation test of several statistics computed from one label vector.
///
/// Each shuffle `i` permutes `labels` with stream `i` of `seed`. The p-value
/// of statistic `j` is (1 + #{shuffles at least as extreme}) / (N + 1).
pub fn permutation_p_multi<L, F>(
    labels: &[L],
    statistic: F,
    n_perm: usize,
    seed: Seed,
    sidedness: Sidedness,
) -> Result<Vec<StatResult>>
where
    L: Clone + Send + Sync,
    F: Fn(&[L]) -> Result<Vec<f64>> + Sync,
{
    if n_perm == 0 {
        return Err(Error::invalid("permutation count must be at least 1"));
    }
    let observed = statistic(labels)?;
    let hits = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut shuffled = labels.to_vec();
            shuffled.shuffle(&mut seed.rng(i as u64));
            let stats = statistic(&shuffled).map_err(|e| Error::Replicate {
                index: i,
                source: Box::new(e),
            })?;
            if stats.len() != observed.len() {
                return Err(Error::Replicate {
                    index: i,
                    source: Box::new(Error::invalid(format!(
                        "statistic returned {} values, expected {}",
                        stats.len(),
                        observed.len()
                    ))),
                });
            }
            Ok(stats
                .iter()
                .zip(&observed)
                .map(|(s, o)| usize::from(at_least_as_extreme(*s, *o, sidedness)))
                .collect::<Vec<usize>>())
        })
        .try_reduce(
            || vec![0; observed.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    Ok(observed
        .iter()
        .zip(&hits)
        .map(|(&stat, &h)| {
            let p = (1 + h) as f64 / (n_perm + 1) as f64;
            let mut r = StatResult::new(stat, p, labels.len(), Method::Permutation, sidedness);
            r.note = Some(format!("{n_perm} label permutations"));
            r
        })
        .collect())
}

/// Permutation test of a single statistic; see [`permutation_p_multi`].
pub fn permutation_p<L, F>(
    labels: &[L],
    statistic: F,
    n_perm: usize,
    seed: Seed,
    sidedness: Sidedness,
) -> Result<StatResult>
where
    L: Clone + Send + Sync,
    F: Fn(&[L]) -> Result<f64> + Sync,
{
    let mut results =
        permutation_p_multi(labels, |l| statistic(l).map(|s| vec![s]), n_perm, seed, sidedness)?;
    Ok(results.remove(0))
}

/// Evaluates `f` on `iterations` subsamples of `pool`, each drawn without
/// replacement and kept in pool order.
pub fn resample<T, R, F>(
    pool: &[T],
    subsample_size: usize,
    iterations: usize,
    seed: Seed,
    f: F,
) -> Result<Vec<R>>
where
    T: Clone + Send + Sync,
    R: Send,
    F: Fn(&[T]) -> Result<R> + Sync,
{
    if subsample_size > pool.len() {
        return Err(Error::invalid(format!(
            "subsample of {subsample_size} exceeds pool of {}",
            pool.len()
        )));
    }
    (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut picked = index::sample(&mut seed.rng(i as u64), pool.len(), subsample_size).into_vec();
            picked.sort_unstable();
            let sample: Vec<T> = picked.into_iter().map(|j| pool[j].clone()).collect();
            f(&sample).map_err(|e| Error::Replicate {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Mean, sample SD and 95% percentile interval of replicate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub iterations: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.len() < 2 {
        return Err(Error::invalid("summary needs at least two replicates"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: mean(values),
        sd: sd(values, 1),
        ci_low: percentile(&sorted, 2.5),
        ci_high: percentile(&sorted, 97.5),
        iterations: values.len(),
    })
}

/// Subsampling bootstrap of a scalar statistic.
pub fn bootstrap<T, F>(
    pool: &[T],
    subsample_size: usize,
    iterations: usize,
    statistic: F,
    seed: Seed,
) -> Result<Summary>
where
    T: Clone + Send + Sync,
    F: Fn(&[T]) -> Result<f64> + Sync,
{
    if iterations < 2 {
        return Err(Error::invalid("bootstrap needs at least two iterations"));
    }
    let values = resample(pool, subsample_size, iterations, seed, statistic)?;
    summarize(&values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gap(labels: &[bool], values: &[f64]) -> f64 {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (l, v) in labels.iter().zip(values) {
            if *l { a.push(*v) } else { b.push(*v) }
        }
        mean(&a) - mean(&b)
    }

    #[test]
    fn invariant_statistic_gives_one() {
        let labels = vec![true, false, true, false, false];
        let r = permutation_p(&labels, |_| Ok(3.5), 200, Seed::new(1), Sidedness::Greater).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn planted_gap_is_significant() {
        let values: Vec<f64> = (0..40).map(|i| if i < 20 { 10.0 + i as f64 * 0.01 } else { i as f64 * 0.01 }).collect();
        let labels: Vec<bool> = (0..40).map(|i| i < 20).collect();
        let r = permutation_p(&labels, |l| Ok(gap(l, &values)), 10_000, Seed::new(3), Sidedness::Greater).unwrap();
        assert!(r.p_value <= 0.001, "{}", r.p_value);
        assert_eq!(r.p_value, 1.0 / 10_001.0);
    }

    #[test]
    fn zero_permutations_rejected() {
        assert!(permutation_p(&[1, 2], |_| Ok(0.0), 0, Seed::new(0), Sidedness::Greater).is_err());
    }

    #[test]
    fn failing_shuffle_reports_index() {
        let err = permutation_p(
            &[1, 2, 3],
            |l| if l[0] == 1 { Ok(0.0) } else { Err(Error::degenerate("boom")) },
            50,
            Seed::new(5),
            Sidedness::Greater,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Replicate { .. }));
    }

    #[test]
    fn bootstrap_degenerate_and_exhaustive() {
        let pool: Vec<f64> = (0..10).map(f64::from).collect();
        let c = bootstrap(&pool, 5, 50, |_| Ok(1.0), Seed::new(9)).unwrap();
        assert_eq!((c.sd, c.ci_low, c.ci_high), (0.0, 1.0, 1.0));
        let full = bootstrap(&pool, 10, 20, |s| Ok(mean(s)), Seed::new(9)).unwrap();
        assert_eq!(full.mean, 4.5);
        assert_eq!(full.sd, 0.0);
        assert!(bootstrap(&pool, 11, 20, |s| Ok(mean(s)), Seed::new(9)).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let pool: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let a = bootstrap(&pool, 20, 100, |s| Ok(mean(s)), Seed::new(11)).unwrap();
        let b = bootstrap(&pool, 20, 100, |s| Ok(mean(s)), Seed::new(11)).unwrap();
        assert_eq!(a, b);
        let c = bootstrap(&pool, 20, 100, |s| Ok(mean(s)), Seed::new(12)).unwrap();
        assert_ne!(a, c);
    }
}
