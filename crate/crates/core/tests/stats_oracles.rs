//! Rank statistics against brute-force oracles written from the definitions.

use proptest::prelude::*;

use palate::stats::{mann_whitney_u, spearman, wilcoxon_signed_rank, Method, Sidedness};

/// Average 1-based rank of each value, found by counting.
fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let below = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Twice U, counted pair by pair.
fn doubled_u(a: &[f64], b: &[f64]) -> i64 {
    let mut u = 0;
    for x in a {
        for y in b {
            if x > y {
                u += 2;
            } else if x == y {
                u += 1;
            }
        }
    }
    u
}

/// Exact p by trying every split of the pooled sample into groups of the
/// original sizes.
fn oracle_mwu_p(a: &[f64], b: &[f64], side: Sidedness) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, total) = (a.len(), pooled.len());
    let centre = (a.len() * b.len()) as i64;
    let observed = doubled_u(a, b);
    let (mut hits, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let (mut ga, mut gb) = (Vec::new(), Vec::new());
        for (i, v) in pooled.iter().enumerate() {
            if mask & (1 << i) != 0 {
                ga.push(*v);
            } else {
                gb.push(*v);
            }
        }
        let u = doubled_u(&ga, &gb);
        all += 1;
        let extreme = match side {
            Sidedness::Greater => u >= observed,
            Sidedness::Less => u <= observed,
            Sidedness::TwoSided => (u - centre).abs() >= (observed - centre).abs(),
        };
        if extreme {
            hits += 1;
        }
    }
    hits as f64 / all as f64
}

/// Exact p by flipping every sign pattern of the ranked magnitudes.
fn oracle_wilcoxon(deltas: &[f64], side: Sidedness) -> (f64, f64) {
    let ranks = oracle_ranks(&deltas.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w = |signs: u32| -> f64 {
        ranks.iter().enumerate().filter(|(i, _)| signs & (1 << i) != 0).map(|(_, r)| r).sum()
    };
    let observed_mask = deltas.iter().enumerate().filter(|(_, d)| **d > 0.0).fold(0u32, |m, (i, _)| m | (1 << i));
    let observed = w(observed_mask);
    let centre: f64 = ranks.iter().sum::<f64>() / 2.0;
    let n = deltas.len();
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let v = w(mask);
        let extreme = match side {
            Sidedness::Greater => v >= observed - 1e-9,
            Sidedness::Less => v <= observed + 1e-9,
            Sidedness::TwoSided => (v - centre).abs() >= (observed - centre).abs() - 1e-9,
        };
        if extreme {
            hits += 1;
        }
    }
    (observed, hits as f64 / (1u64 << n) as f64)
}

fn side() -> impl Strategy<Value = Sidedness> {
    prop_oneof![Just(Sidedness::TwoSided), Just(Sidedness::Greater), Just(Sidedness::Less)]
}

/// Small integers so ties are common.
fn tied_values(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..6).prop_map(f64::from), len)
}

proptest! {
    #[test]
    fn spearman_matches_midrank_pearson(
        pairs in prop::collection::vec((-50i32..50, -50i32..50), 3..=200),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let want = oracle_pearson(&oracle_ranks(&x), &oracle_ranks(&y));
        match spearman(&x, &y) {
            Ok(r) => prop_assert!((r.statistic - want).abs() <= 1e-12, "{} vs {want}", r.statistic),
            Err(_) => prop_assert!(!want.is_finite()),
        }
    }

    #[test]
    fn mann_whitney_exact_matches_enumeration(
        a in tied_values(1..=5),
        b in tied_values(1..=5),
        side in side(),
    ) {
        prop_assume!(a.len() + b.len() <= 10);
        let r = mann_whitney_u(&a, &b, side).unwrap();
        prop_assert_eq!(r.method, Method::Exact);
        prop_assert_eq!((2.0 * r.statistic) as i64, doubled_u(&a, &b));
        let want = oracle_mwu_p(&a, &b, side);
        prop_assert!((r.p_value - want).abs() < 1e-12, "{} vs {want}", r.p_value);
    }

    #[test]
    fn wilcoxon_exact_matches_sign_enumeration(
        deltas in prop::collection::vec(prop_oneof![(-4i32..=-1), (1i32..=4)].prop_map(f64::from), 1..=12),
        side in side(),
    ) {
        let r = wilcoxon_signed_rank(&deltas, side).unwrap();
        let (w, p) = oracle_wilcoxon(&deltas, side);
        prop_assert!((r.statistic - w).abs() < 1e-12);
        prop_assert!((r.p_value - p).abs() < 1e-12, "{} vs {p}", r.p_value);
    }
}

#[test]
fn mann_whitney_every_small_size_pair() {
    // Every (n, m) with n + m <= 10, on a fixed tied sample.
    let values = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
    for total in 2..=10 {
        for n in 1..total {
            let (a, b) = values[..total].split_at(n);
            for side in [Sidedness::TwoSided, Sidedness::Greater, Sidedness::Less] {
                let r = mann_whitney_u(a, b, side).unwrap();
                let want = oracle_mwu_p(a, b, side);
                assert!((r.p_value - want).abs() < 1e-12, "n={n} m={} {side:?}", total - n);
            }
        }
    }
}

#[test]
fn wilcoxon_seven_positive_differences() {
    let deltas = [0.03, 0.11, 0.07, 0.02, 0.09, 0.05, 0.04];
    let r = wilcoxon_signed_rank(&deltas, Sidedness::Greater).unwrap();
    assert_eq!(r.statistic, 28.0);
    assert!((r.p_value - 1.0 / 128.0).abs() < 1e-15);
    assert_eq!(format!("{:.3}", r.p_value), "0.008");
}

#[test]
fn zero_differences_are_dropped_with_a_note() {
    let r = wilcoxon_signed_rank(&[0.0, 1.0, 2.0, 0.0], Sidedness::Greater).unwrap();
    assert_eq!(r.n, 2);
    assert!(r.note.unwrap().contains("2 zero"));
}
