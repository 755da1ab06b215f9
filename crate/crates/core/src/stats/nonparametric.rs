use rand::seq::index;

use super::dist::{chi2_sf, normal_quantile, normal_sf};
use super::{Method, SampleVector, TestFlag, TestResult};
use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Real};
use crate::seed::{stream_rng, streams};

/// Largest sample the Shapiro-Wilk approximation is valid for.
pub const SHAPIRO_MAX_N: usize = 5000;

/// Midranks (1-based) of `values`, plus the tie-group sizes.
pub fn midranks<T: Real>(values: &[T]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| total_cmp(&values[a], &values[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Shapiro-Wilk W with Royston's normalizing approximation for the p-value.
///
/// Samples above [`SHAPIRO_MAX_N`] are reduced to a subsample drawn with a
/// fixed seed; use [`shapiro_wilk_seeded`] to choose it.
pub fn shapiro_wilk<T: Real>(x: &SampleVector<T>) -> Result<TestResult<T>> {
    shapiro_wilk_seeded(x, 0)
}

pub fn shapiro_wilk_seeded<T: Real>(x: &SampleVector<T>, seed: u64) -> Result<TestResult<T>> {
    let n_all = x.len();
    if n_all < 3 {
        return Err(Error::Precondition(format!("Shapiro-Wilk needs n >= 3, got {n_all}")));
    }
    let mut flags = Vec::new();
    let mut data: Vec<f64> = if n_all > SHAPIRO_MAX_N {
        let mut rng = stream_rng(seed, streams::SHAPIRO_SUBSAMPLE);
        flags.push(TestFlag::Subsampled(SHAPIRO_MAX_N));
        index::sample(&mut rng, n_all, SHAPIRO_MAX_N)
            .into_iter()
            .map(|i| x.values()[i].as_f64())
            .collect()
    } else {
        x.values().iter().map(|v| v.as_f64()).collect()
    };
    data.sort_by(total_cmp);
    let n = data.len();
    let range = data[n - 1] - data[0];
    if range <= 0.0 {
        let mut r = TestResult::degenerate(Method::ShapiroWilk, T::one(), 1.0, None);
        r.flags.extend(flags);
        return Ok(r);
    }

    let a = shapiro_coefficients(n);
    let mean = data.iter().sum::<f64>() / n as f64;
    let ssq: f64 = data.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai * (data[n - 1 - i] - data[i]))
        .sum();
    let w = (num * num / ssq).min(1.0);
    let p = shapiro_p_value(w, n);
    let mut r = TestResult::new(Method::ShapiroWilk, T::lit(w), p, None);
    r.flags.extend(flags);
    Ok(r)
}

/// Antisymmetric weights `a_1..a_{n/2}` (largest first).
fn shapiro_coefficients(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half).map(|i| normal_quantile((i as f64 - 0.375) / an25)).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

fn shapiro_p_value(w: f64, n: usize) -> f64 {
    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }
    let an = n as f64;
    let mut y = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    normal_sf((y - m) / s)
}

/// Which null distribution [`mann_whitney_u_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MannWhitneyMode {
    /// Exact when `n_x · n_y <= 400`, otherwise normal.
    Auto,
    Exact,
    Normal,
}

const EXACT_PRODUCT_LIMIT: usize = 400;

/// Two-sided Mann-Whitney U test. The statistic is `U_x`, the number of
/// pairs with `x > y` (ties count one half); `effect` is `U_x / (n_x n_y)`.
pub fn mann_whitney_u<T: Real>(x: &SampleVector<T>, y: &SampleVector<T>) -> Result<TestResult<T>> {
    mann_whitney_u_with(x, y, MannWhitneyMode::Auto)
}

pub fn mann_whitney_u_with<T: Real>(
    x: &SampleVector<T>,
    y: &SampleVector<T>,
    mode: MannWhitneyMode,
) -> Result<TestResult<T>> {
    let (nx, ny) = (x.len(), y.len());
    let pooled: Vec<T> = x.values().iter().chain(y.values()).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_x: f64 = ranks[..nx].iter().sum();
    let u = rank_sum_x - (nx * (nx + 1)) as f64 / 2.0;
    let effect = T::lit(u / (nx * ny) as f64);

    let exact = match mode {
        MannWhitneyMode::Exact => true,
        MannWhitneyMode::Normal => false,
        MannWhitneyMode::Auto => nx * ny <= EXACT_PRODUCT_LIMIT,
    };
    let result = if ties.len() == 1 {
        let method = if exact {
            Method::MannWhitneyExact
        } else {
            Method::MannWhitneyNormal
        };
        TestResult::degenerate(method, T::lit(u), 1.0, None)
    } else if exact {
        let p = exact_rank_sum_p(&ranks, nx);
        TestResult::new(Method::MannWhitneyExact, T::lit(u), p, None)
    } else {
        let n = (nx + ny) as f64;
        let mu = (nx * ny) as f64 / 2.0;
        let var = (nx * ny) as f64 / 12.0 * ((n + 1.0) - tie_sum(&ties) / (n * (n - 1.0)));
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        TestResult::new(
            Method::MannWhitneyNormal,
            T::lit(u),
            (2.0 * normal_sf(z)).min(1.0),
            None,
        )
    };
    Ok(result.with_effect(effect))
}

/// Permutation p-value of the first group's rank sum, two-sided about the
/// null mean. Midranks are doubled to integers and subsets are counted by
/// dynamic programming over (subset size, rank sum).
fn exact_rank_sum_p(ranks: &[f64], nx: usize) -> f64 {
    let n = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    // Count subsets of the smaller group size; the statistic is symmetric.
    let (m, observed): (usize, usize) = if nx <= n - nx {
        (nx, doubled[..nx].iter().sum())
    } else {
        (n - nx, doubled[nx..].iter().sum())
    };
    let max_sum: usize = doubled.iter().sum();
    let mut ways = vec![vec![0.0f64; max_sum + 1]; m + 1];
    ways[0][0] = 1.0;
    for (seen, &r) in doubled.iter().enumerate() {
        for size in (1..=m.min(seen + 1)).rev() {
            let (lower, upper) = ways.split_at_mut(size);
            let prev = &lower[size - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                let add = prev[s - r];
                if add != 0.0 {
                    cur[s] += add;
                }
            }
        }
    }
    let total: f64 = ways[m].iter().sum();
    let center = m as f64 * (n as f64 + 1.0);
    let dev = (observed as f64 - center).abs();
    let extreme: f64 = ways[m]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as f64 - center).abs() >= dev - 1e-9)
        .map(|(_, w)| w)
        .sum();
    (extreme / total).min(1.0)
}

/// Kruskal-Wallis H with tie correction.
pub fn kruskal_wallis<T: Real>(groups: &[SampleVector<T>]) -> Result<TestResult<T>> {
    if groups.len() < 2 {
        return Err(Error::Precondition("Kruskal-Wallis needs at least two groups".into()));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if n < 5 {
        return Err(Error::Precondition(format!("Kruskal-Wallis needs n >= 5, got {n}")));
    }
    let pooled: Vec<T> = groups.iter().flat_map(|g| g.values().iter().copied()).collect();
    let (ranks, ties) = midranks(&pooled);
    let nf = n as f64;
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0);
    let correction = 1.0 - tie_sum(&ties) / (nf * nf * nf - nf);
    let df = (groups.len() - 1) as f64;
    if correction <= 0.0 {
        return Ok(TestResult::degenerate(Method::KruskalWallis, T::zero(), 1.0, Some(df)));
    }
    let h = (h_raw / correction).max(0.0);
    Ok(TestResult::new(
        Method::KruskalWallis,
        T::lit(h),
        chi2_sf(h, df),
        Some(df),
    ))
}
