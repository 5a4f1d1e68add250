use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::descriptive::{mean, variance};
use super::rank::{midranks, tie_term};
use super::{Method, Sidedness, StatResult};
use crate::error::{Error, Result};

/// Largest combined sample size for which Mann-Whitney p is enumerated exactly.
pub const MWU_EXACT_MAX: usize = 12;
/// Largest nonzero count for which Wilcoxon p is enumerated exactly.
pub const WILCOXON_EXACT_MAX: usize = 20;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("correlation with a constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with a two-sided t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<StatResult> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid(format!("spearman needs n >= 3, got {n}")));
    }
    let rho = pearson(&midranks(x), &midranks(y))?;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(StatResult::new(rho, p, n, Method::TApprox, Sidedness::TwoSided))
}

/// Counts of `k`-subsets of `values` by subset sum, `counts[k][s]`.
fn subset_sum_counts(values: &[usize], max_k: usize) -> Vec<Vec<f64>> {
    let total: usize = values.iter().sum();
    let mut counts = vec![vec![0.0; total + 1]; max_k + 1];
    counts[0][0] = 1.0;
    for &v in values {
        for k in (1..=max_k).rev() {
            for s in (v..=total).rev() {
                let add = counts[k - 1][s - v];
                if add != 0.0 {
                    counts[k][s] += add;
                }
            }
        }
    }
    counts
}

/// Probability mass over `values` whose deviation from `centre` is at least
/// as extreme as `observed` in the direction given by `sidedness`.
fn tail_probability(pmf: &[(i64, f64)], observed: i64, centre: i64, sidedness: Sidedness) -> f64 {
    let total: f64 = pmf.iter().map(|(_, c)| c).sum();
    let hits: f64 = pmf
        .iter()
        .filter(|(v, _)| match sidedness {
            Sidedness::Greater => *v >= observed,
            Sidedness::Less => *v <= observed,
            Sidedness::TwoSided => (v - centre).abs() >= (observed - centre).abs(),
        })
        .map(|(_, c)| c)
        .sum();
    (hits / total).min(1.0)
}

fn normal_p(z: f64, sidedness: Sidedness) -> f64 {
    let phi = standard_normal();
    match sidedness {
        Sidedness::Greater => 1.0 - phi.cdf(z),
        Sidedness::Less => phi.cdf(z),
        Sidedness::TwoSided => (2.0 * (1.0 - phi.cdf(z.abs()))).min(1.0),
    }
}

/// Continuity-corrected z for a statistic with the given null mean and sd.
fn corrected_z(stat: f64, mu: f64, sigma: f64, sidedness: Sidedness) -> f64 {
    let diff = stat - mu;
    match sidedness {
        Sidedness::Greater => (diff - 0.5) / sigma,
        Sidedness::Less => (diff + 0.5) / sigma,
        Sidedness::TwoSided => ((diff.abs() - 0.5) / sigma).max(0.0),
    }
}

/// Mann-Whitney U for `a` against `b`: U = #{a_i > b_j} + ½·#{a_i = b_j}.
///
/// `Greater` tests whether `a` tends to exceed `b`. The p-value is exact
/// (enumerating all labelings, midranks for ties) when n + m ≤ 12 and uses
/// the tie- and continuity-corrected normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64], sidedness: Sidedness) -> Result<StatResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("mann-whitney needs two nonempty groups"));
    }
    let (n, m) = (a.len(), b.len());
    let mut u = 0.0f64;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total = n + m;
    let (p, method) = if total <= MWU_EXACT_MAX {
        // Doubled midranks are integers; U2 = 2U = S2 - n(n+1) where S2 is the
        // doubled rank sum of the first group.
        let doubled: Vec<usize> = midranks(&pooled)
            .into_iter()
            .map(|r| (2.0 * r).round() as usize)
            .collect();
        let counts = subset_sum_counts(&doubled, n);
        let offset = (n * (n + 1)) as i64;
        let pmf: Vec<(i64, f64)> = counts[n]
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(s, c)| (s as i64 - offset, *c))
            .collect();
        let observed = (2.0 * u).round() as i64;
        let p = tail_probability(&pmf, observed, (n * m) as i64, sidedness);
        (p, Method::Exact)
    } else {
        let (nf, mf, tf) = (n as f64, m as f64, total as f64);
        let mu = nf * mf / 2.0;
        let var = nf * mf / 12.0 * ((tf + 1.0) - tie_term(&pooled) / (tf * (tf - 1.0)));
        let p = if var <= 0.0 {
            1.0
        } else {
            normal_p(corrected_z(u, mu, var.sqrt(), sidedness), sidedness)
        };
        (p, Method::NormalApprox)
    };
    let mut result = StatResult::new(u, p, n, method, sidedness);
    result.m = Some(m);
    Ok(result)
}

/// Wilcoxon signed-rank test on paired differences.
///
/// Zero differences are dropped (noted in the result). W is the sum of the
/// ranks of |d| over positive differences. Exact by sign enumeration up to 20
/// nonzero differences, normal approximation beyond.
pub fn wilcoxon_signed_rank(deltas: &[f64], sidedness: Sidedness) -> Result<StatResult> {
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("non-finite difference"));
    }
    let nonzero: Vec<f64> = deltas.iter().copied().filter(|d| *d != 0.0).collect();
    let dropped = deltas.len() - nonzero.len();
    if nonzero.is_empty() {
        return Err(Error::degenerate("all differences are zero"));
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let (p, method) = if n <= WILCOXON_EXACT_MAX {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        for &v in &doubled {
            for s in (v..=total).rev() {
                counts[s] += counts[s - v];
            }
        }
        let pmf: Vec<(i64, f64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(s, c)| (s as i64, *c))
            .collect();
        let observed = (2.0 * w).round() as i64;
        let centre = (total / 2) as i64;
        (tail_probability(&pmf, observed, centre, sidedness), Method::Exact)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&abs) / 48.0;
        let p = normal_p(corrected_z(w, mu, var.sqrt(), sidedness), sidedness);
        (p, Method::NormalApprox)
    };
    let mut result = StatResult::new(w, p, n, method, sidedness);
    if dropped > 0 {
        result.note = Some(format!("{dropped} zero differences dropped"));
    }
    Ok(result)
}

/// Cohen's d with the pooled, Bessel-corrected standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "cohen's d needs at least two values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * variance(a, 1) + (nb - 1.0) * variance(b, 1)) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(Error::degenerate("zero pooled variance"));
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

/// One-sample effect size: mean over sample SD of the values.
pub fn cohens_d_one_sample(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::invalid("one-sample d needs at least two values"));
    }
    let v = variance(xs, 1);
    if v <= 0.0 {
        return Err(Error::degenerate("zero variance"));
    }
    Ok(mean(xs) / v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = spearman(&x, &x).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.p_value, 0.0);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_eq!(spearman(&x, &rev).unwrap().statistic, -1.0);
    }

    #[test]
    fn spearman_preconditions() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_t_approx_matches_reference() {
        // scipy.stats.spearmanr([1,2,3,4,5,6], [2,1,4,3,6,5]) -> 0.8285714, p=0.04156268
        let r = spearman(&[1., 2., 3., 4., 5., 6.], &[2., 1., 4., 3., 6., 5.]).unwrap();
        assert!((r.statistic - 0.828_571_428_571_428_6).abs() < 1e-12);
        assert!((r.p_value - 0.041_562_682_8).abs() < 1e-8);
    }

    #[test]
    fn mwu_separated_groups() {
        let r = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Sidedness::TwoSided).unwrap();
        assert_eq!(r.statistic, 9.0);
        assert_eq!(r.method, Method::Exact);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        let g = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0], Sidedness::Greater).unwrap();
        assert!((g.p_value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn mwu_identical_groups() {
        let r = mann_whitney_u(&[1.0, 2.0], &[1.0, 2.0], Sidedness::TwoSided).unwrap();
        assert_eq!(r.statistic, 2.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn mwu_rejects_empty() {
        assert!(mann_whitney_u(&[1.0], &[], Sidedness::TwoSided).is_err());
    }

    #[test]
    fn mwu_normal_branch_is_sane() {
        let a: Vec<f64> = (0..20).map(|i| i as f64 + 100.0).collect();
        let b: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = mann_whitney_u(&a, &b, Sidedness::TwoSided).unwrap();
        assert_eq!(r.method, Method::NormalApprox);
        assert_eq!(r.statistic, 400.0);
        assert!(r.p_value < 1e-6);
        let constant = mann_whitney_u(&[1.0; 10], &[1.0; 10], Sidedness::TwoSided).unwrap();
        assert_eq!(constant.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_seven_positive() {
        let deltas = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07];
        let r = wilcoxon_signed_rank(&deltas, Sidedness::Greater).unwrap();
        assert_eq!(r.statistic, 28.0);
        assert!((r.p_value - 1.0 / 128.0).abs() < 1e-15);
        let two = wilcoxon_signed_rank(&deltas, Sidedness::TwoSided).unwrap();
        assert!((two.p_value - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_drops_zeros() {
        let r = wilcoxon_signed_rank(&[0.0, 1.0, 2.0], Sidedness::Greater).unwrap();
        assert_eq!(r.n, 2);
        assert!(r.note.unwrap().contains("1 zero"));
        assert!(wilcoxon_signed_rank(&[0.0, 0.0], Sidedness::TwoSided).is_err());
    }

    #[test]
    fn cohens_d_examples() {
        assert_eq!(cohens_d(&[3.0, 4.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(cohens_d(&[1.0], &[2.0, 3.0]).is_err());
        assert!((cohens_d_one_sample(&[1.0, 2.0, 3.0]).unwrap() - 2.0).abs() < 1e-15);
    }
}
