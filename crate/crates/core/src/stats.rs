//! Significance thresholds and nonparametric tests.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::riemann::{matrix_log, SpdMatrix};

/// Largest sample size handled by exact enumeration in the signed-rank test.
pub const WILCOXON_EXACT_MAX: usize = 25;
/// Largest pooled size handled exactly in the rank-sum test.
pub const RANK_SUM_EXACT_MAX: usize = 50;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Smallest accuracy `k/n` with `P(Binomial(n, ½) ≥ k) ≤ alpha`.
///
/// If even `n` correct answers are not significant the result is 1.
pub fn chance_level(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("chance level needs at least one trial".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let log_alpha = alpha.ln();
    let nf = n as f64;
    let mut log_pmf = -nf * std::f64::consts::LN_2;
    let mut log_tail = f64::NEG_INFINITY;
    let mut best = None;
    for k in (0..=n).rev() {
        log_tail = log_add(log_tail, log_pmf);
        if log_tail > log_alpha {
            break;
        }
        best = Some(k);
        if k > 0 {
            // pmf(k−1) = pmf(k) · k / (n − k + 1)
            log_pmf += (k as f64).ln() - ((n - k + 1) as f64).ln();
        }
    }
    Ok(best.map_or(1.0, |k| k as f64 / nf))
}

/// Average ranks (1-based) of `values`, doubled so ties stay integral.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged, doubled
        let doubled = (i + 1 + j + 1) as u64;
        for &o in &order[i..=j] {
            ranks[o] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Σ (t³ − t) over tie groups.
fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        acc += t * t * t - t;
        i = j + 1;
    }
    acc
}

fn two_sided_from_counts(counts: &[u64], observed: usize, total: f64) -> f64 {
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total).min(1.0)
}

fn normal_two_sided(stat: f64, mean: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((stat - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    Ok(())
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped; if none remain the p-value is 1. Exact for
/// up to [`WILCOXON_EXACT_MAX`] non-zero pairs, normal approximation with tie
/// and continuity correction above.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("paired samples of length {} and {}", x.len(), y.len())));
    }
    check_finite(x)?;
    check_finite(y)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(1.0);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w_pos: u64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    if n <= WILCOXON_EXACT_MAX {
        let max: usize = ranks.iter().sum::<u64>() as usize;
        let mut counts = vec![0u64; max + 1];
        counts[0] = 1;
        for &r in &ranks {
            let r = r as usize;
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        return Ok(two_sided_from_counts(&counts, w_pos as usize, 2f64.powi(n as i32)));
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&abs) / 48.0;
    Ok(normal_two_sided(w_pos as f64 / 2.0, mean, var))
}

/// Two-sided Mann-Whitney rank-sum test.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("rank-sum test needs two non-empty groups".into()));
    }
    check_finite(a)?;
    check_finite(b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let n1 = a.len();
    let big_n = pooled.len();
    let r1: u64 = ranks[..n1].iter().sum();
    if big_n <= RANK_SUM_EXACT_MAX {
        let max: usize = ranks.iter().sum::<u64>() as usize;
        // counts[k][s]: subsets of size k with doubled rank sum s
        let mut counts = vec![vec![0u64; max + 1]; n1 + 1];
        counts[0][0] = 1;
        for &r in &ranks {
            let r = r as usize;
            for k in (1..=n1).rev() {
                let (lo, hi) = counts.split_at_mut(k);
                let prev = &lo[k - 1];
                let cur = &mut hi[0];
                for s in (r..=max).rev() {
                    cur[s] += prev[s - r];
                }
            }
        }
        let total: u64 = counts[n1].iter().sum();
        return Ok(two_sided_from_counts(&counts[n1], r1 as usize, total as f64));
    }
    let (n1f, n2f, nf) = (n1 as f64, b.len() as f64, big_n as f64);
    let u = r1 as f64 / 2.0 - n1f * (n1f + 1.0) / 2.0;
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term(&pooled) / (nf * (nf - 1.0)));
    Ok(normal_two_sided(u, mean, var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub reps: usize,
    pub subset_size: usize,
    pub fraction_significant: f64,
    pub median_p: f64,
}

/// Repeatedly draws `subset_size` members of `a` without replacement and
/// compares them with all of `b` by the rank-sum test.
pub fn bootstrap_compare(a: &[f64], b: &[f64], reps: usize, subset_size: usize, seed: u64) -> Result<BootstrapSummary> {
    if reps == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one repetition".into()));
    }
    if subset_size == 0 || subset_size > a.len() {
        return Err(Error::InvalidArgument(format!(
            "subset of {subset_size} from a group of {}",
            a.len()
        )));
    }
    if b.is_empty() {
        return Err(Error::InsufficientData("second group is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = Vec::with_capacity(reps);
    for _ in 0..reps {
        let pick: Vec<f64> = sample(&mut rng, a.len(), subset_size).iter().map(|i| a[i]).collect();
        ps.push(rank_sum_test(&pick, b)?);
    }
    let significant = ps.iter().filter(|&&p| p < 0.05).count();
    ps.sort_by(f64::total_cmp);
    let median_p = if reps % 2 == 1 {
        ps[reps / 2]
    } else {
        (ps[reps / 2 - 1] + ps[reps / 2]) / 2.0
    };
    Ok(BootstrapSummary {
        reps,
        subset_size,
        fraction_significant: significant as f64 / reps as f64,
        median_p,
    })
}

/// Distance between log-Euclidean class means over the mean within-class
/// spread. Identical zero-spread classes give 0; distinct zero-spread
/// classes saturate at `f64::INFINITY`.
pub fn class_distinctiveness(covs_a: &[SpdMatrix], covs_b: &[SpdMatrix]) -> Result<f64> {
    if covs_a.len() < 2 || covs_b.len() < 2 {
        return Err(Error::InsufficientData("class distinctiveness needs two trials per class".into()));
    }
    let dim = covs_a[0].dim();
    if covs_a.iter().chain(covs_b).any(|c| c.dim() != dim) {
        return Err(Error::DimensionMismatch("covariance sizes differ".into()));
    }
    let spread = |covs: &[SpdMatrix]| {
        let logs: Vec<_> = covs.iter().map(matrix_log).collect();
        let mean = logs.iter().fold(nalgebra::DMatrix::zeros(dim, dim), |acc, l| acc + l) / logs.len() as f64;
        let s = logs.iter().map(|l| (l - &mean).norm()).sum::<f64>() / logs.len() as f64;
        (mean, s)
    };
    let (ma, sa) = spread(covs_a);
    let (mb, sb) = spread(covs_b);
    let between = (ma - mb).norm();
    let within = 0.5 * (sa + sb);
    if within == 0.0 {
        return Ok(if between == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(between / within)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Exact tail via big-integer binomial coefficients.
    fn exact_chance(n: usize, alpha: f64) -> f64 {
        let mut c = vec![BigUint::from(1u32)];
        for k in 1..=n {
            let prev = c[k - 1].clone();
            c.push(prev * BigUint::from((n - k + 1) as u64) / BigUint::from(k as u64));
        }
        let total = BigUint::from(1u32) << n;
        let mut tail = BigUint::from(0u32);
        let mut best = None;
        for k in (0..=n).rev() {
            tail += &c[k];
            // tail / total ≤ alpha, compared at 1e-15 resolution
            let scaled = (&tail * BigUint::from(1_000_000_000_000_000u64)) / &total;
            let lim = (alpha * 1e15) as u64;
            if scaled > BigUint::from(lim) {
                break;
            }
            best = Some(k);
        }
        best.map_or(1.0, |k| k as f64 / n as f64)
    }

    #[test]
    fn chance_at_180() {
        let c = chance_level(180, 0.05).unwrap();
        assert_eq!(c, exact_chance(180, 0.05));
        assert!((0.555..=0.567).contains(&c));
    }

    #[test]
    fn chance_matches_bigint_oracle() {
        for n in [1, 2, 5, 10, 37, 100, 250] {
            for alpha in [0.01, 0.05, 0.1] {
                assert_eq!(chance_level(n, alpha).unwrap(), exact_chance(n, alpha), "{n} {alpha}");
            }
        }
    }

    #[test]
    fn chance_large_n_is_normal() {
        let n = 1_000_000;
        let approx = 0.5 + 1.6448536269514722 * (0.25 / n as f64).sqrt();
        assert!((chance_level(n, 0.05).unwrap() - approx).abs() < 1e-3);
    }

    #[test]
    fn chance_edges() {
        assert_eq!(chance_level(1, 0.05).unwrap(), 1.0);
        assert!(chance_level(10, 0.0).is_err());
        assert!(chance_level(10, 1.0).is_err());
        assert!(chance_level(0, 0.05).is_err());
    }

    #[test]
    fn chance_monotone() {
        let mut prev = 1.0;
        for n in (10..400).step_by(7) {
            let c = chance_level(n, 0.05).unwrap();
            assert!(c <= prev + 0.03, "{n}");
            prev = c;
        }
        for n in [20, 90, 180] {
            assert!(chance_level(n, 0.01).unwrap() >= chance_level(n, 0.05).unwrap());
        }
    }

    fn brute_wilcoxon(x: &[f64], y: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
        let n = d.len();
        let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        let ranks = doubled_ranks(&abs);
        let obs: u64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            let s: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            le += u64::from(s <= obs);
            ge += u64::from(s >= obs);
        }
        (2.0 * le.min(ge) as f64 / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn wilcoxon_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=10 {
            for _ in 0..5 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
                let p = wilcoxon_signed_rank(&x, &y).unwrap();
                if x.iter().zip(&y).all(|(a, b)| a == b) {
                    assert_eq!(p, 1.0);
                } else {
                    assert!((p - brute_wilcoxon(&x, &y)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn wilcoxon_cases() {
        let x = [0.1, 0.5, 0.3, 0.9, 0.2];
        assert_eq!(wilcoxon_signed_rank(&x, &x).unwrap(), 1.0);
        let a: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
        assert!((wilcoxon_signed_rank(&a, &b).unwrap() - 2.0 / 1024.0).abs() < 1e-15);
        assert!(wilcoxon_signed_rank(&a, &b[..9]).is_err());
    }

    #[test]
    fn wilcoxon_is_symmetric_exact_and_approximate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [7, 20, 40] {
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + 0.3).collect();
            assert_eq!(wilcoxon_signed_rank(&x, &y).unwrap(), wilcoxon_signed_rank(&y, &x).unwrap());
        }
    }

    #[test]
    fn rank_sum_exact_small_case() {
        // complete separation of 3 vs 3: two extreme arrangements out of 20
        let p = rank_sum_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
        assert_eq!(rank_sum_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn bootstrap_null_and_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut frac = 0.0;
        for s in 0..20 {
            let a: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            frac += bootstrap_compare(&a, &b, 200, 8, s).unwrap().fraction_significant;
        }
        assert!(frac / 20.0 <= 0.10);
        let a: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal) + 10.0).collect();
        assert!(bootstrap_compare(&a, &b, 200, 8, 0).unwrap().fraction_significant >= 0.9);
    }

    #[test]
    fn bootstrap_errors_and_determinism() {
        let a = [1.0, 2.0, 3.0];
        assert!(bootstrap_compare(&a, &a, 0, 2, 0).is_err());
        assert!(bootstrap_compare(&a, &a, 10, 4, 0).is_err());
        assert!(bootstrap_compare(&a, &[], 10, 2, 0).is_err());
        assert_eq!(bootstrap_compare(&a, &a, 10, 2, 5).unwrap(), bootstrap_compare(&a, &a, 10, 2, 5).unwrap());
    }

    fn diag_cluster(rng: &mut ChaCha8Rng, centre: &[f64], n: usize) -> Vec<SpdMatrix> {
        (0..n)
            .map(|_| {
                let d: Vec<f64> = centre.iter().map(|c| (c + 0.3 * rng.sample::<f64, _>(StandardNormal)).exp()).collect();
                SpdMatrix::new(nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))).unwrap()
            })
            .collect()
    }

    fn random_spd(rng: &mut ChaCha8Rng, e: usize) -> SpdMatrix {
        let a = nalgebra::DMatrix::from_fn(e, e, |_, _| rng.sample::<f64, _>(StandardNormal));
        SpdMatrix::new(&a * a.transpose() + nalgebra::DMatrix::identity(e, e) * 0.5).unwrap()
    }

    #[test]
    fn class_dis_zero_for_identical_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let covs: Vec<SpdMatrix> = (0..6).map(|_| random_spd(&mut rng, 4)).collect();
        assert!(class_distinctiveness(&covs, &covs).unwrap().abs() < 1e-12);
    }

    #[test]
    fn class_dis_scales_with_log_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = diag_cluster(&mut rng, &[0.0, 0.0, 0.0], 20);
        let other = diag_cluster(&mut rng, &[0.0, 0.0, 0.0], 20);
        // translate the second cluster by t along a fixed log-space direction
        let shift = |covs: &[SpdMatrix], t: f64| -> Vec<SpdMatrix> {
            let g = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![t.exp(), (-t).exp(), 1.0]));
            covs.iter().map(|c| SpdMatrix::new(c.matrix() * &g).unwrap()).collect()
        };
        let one = class_distinctiveness(&base, &shift(&other, 3.0)).unwrap();
        let two = class_distinctiveness(&base, &shift(&other, 6.0)).unwrap();
        assert!((two / one - 2.0).abs() < 0.1, "{}", two / one);
        // exact when the clusters share their spread
        let one = class_distinctiveness(&base, &shift(&base, 1.0)).unwrap();
        let two = class_distinctiveness(&base, &shift(&base, 2.0)).unwrap();
        assert!((two / one - 2.0).abs() < 1e-9);
    }

    #[test]
    fn class_dis_null_split_is_small() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let pooled = diag_cluster(&mut rng, &[0.5, -0.2, 0.1, 0.0], 60);
            let mut idx: Vec<usize> = (0..60).collect();
            rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
            let a: Vec<SpdMatrix> = idx[..30].iter().map(|&i| pooled[i].clone()).collect();
            let b: Vec<SpdMatrix> = idx[30..].iter().map(|&i| pooled[i].clone()).collect();
            assert!(class_distinctiveness(&a, &b).unwrap() < 0.5);
        }
    }

    #[test]
    fn class_dis_congruence_invariance_on_diagonals() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = diag_cluster(&mut rng, &[0.0, 1.0, 0.5], 10);
        let b = diag_cluster(&mut rng, &[0.4, 0.2, 0.9], 10);
        let g = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, 2.0, -1.5]));
        let t = |covs: &[SpdMatrix]| -> Vec<SpdMatrix> {
            covs.iter().map(|c| SpdMatrix::new(&g * c.matrix() * g.transpose()).unwrap()).collect()
        };
        let before = class_distinctiveness(&a, &b).unwrap();
        let after = class_distinctiveness(&t(&a), &t(&b)).unwrap();
        assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn class_dis_saturates() {
        let i = SpdMatrix::new(nalgebra::DMatrix::identity(2, 2)).unwrap();
        let j = SpdMatrix::new(nalgebra::DMatrix::identity(2, 2) * 3.0).unwrap();
        assert_eq!(class_distinctiveness(&[i.clone(), i.clone()], &[j.clone(), j]).unwrap(), f64::INFINITY);
        assert_eq!(class_distinctiveness(&[i.clone(), i.clone()], &[i.clone(), i.clone()]).unwrap(), 0.0);
        assert!(class_distinctiveness(&[i.clone()], &[i.clone(), i]).is_err());
    }
}
