//! Small statistics toolkit: Monte Carlo summaries, least squares and the
//! multivariate energy-distance two-sample test.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::split_seed;
use crate::error::{Error, Result};

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let (m, _) = mean_se(xs);
    let n = xs.len() as f64;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Linear-interpolated quantile, `p ∈ [0, 1]`.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < v.len() {
        v[i] * (1.0 - f) + v[i + 1] * f
    } else {
        v[i]
    }
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_se: f64,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
        slope_se,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyTest {
    /// V-statistic energy distance `2E|X-Y| - E|X-X'| - E|Y-Y'|`.
    pub distance: f64,
    pub p_value: f64,
    pub permutations: usize,
    /// Mean and standard deviation of the permutation null distribution.
    pub null_mean: f64,
    pub null_sd: f64,
}

/// Energy-distance two-sample test with a permutation p-value.
///
/// Each sample is a slice of equally sized coordinate vectors (one per replica).
pub fn energy_test(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Result<EnergyTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::ShapeMismatch("energy test needs two non-empty samples".into()));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|r| r.len() != d) {
        return Err(Error::ShapeMismatch(
            "energy test samples must share one coordinate dimension".into(),
        ));
    }
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|v| v.as_slice()).collect();
    let n = a.len();
    let total = pooled.len();
    let mut dist = vec![0.0f64; total * total];
    for i in 0..total {
        for j in 0..i {
            let v = euclidean(pooled[i], pooled[j]);
            dist[i * total + j] = v;
            dist[j * total + i] = v;
        }
    }
    let labels: Vec<bool> = (0..total).map(|i| i < n).collect();
    let observed = energy_from_labels(&dist, total, &labels);
    let null: Vec<f64> = (0..permutations)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, k as u64));
            let mut l = labels.clone();
            l.shuffle(&mut rng);
            energy_from_labels(&dist, total, &l)
        })
        .collect();
    let exceed = null.iter().filter(|&&v| v >= observed - 1e-12 * observed.abs()).count();
    let (null_mean, _) = mean_se(&null);
    let null_sd = if null.len() > 1 { std_dev(&null) } else { f64::NAN };
    Ok(EnergyTest {
        distance: observed,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
        null_mean,
        null_sd,
    })
}

/// Univariate convenience wrapper around [`energy_test`].
pub fn energy_test_1d(a: &[f64], b: &[f64], permutations: usize, seed: u64) -> Result<EnergyTest> {
    let wrap = |x: &[f64]| x.iter().map(|&v| vec![v]).collect::<Vec<_>>();
    energy_test(&wrap(a), &wrap(b), permutations, seed)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn energy_from_labels(dist: &[f64], total: usize, in_a: &[bool]) -> f64 {
    let (mut s_aa, mut s_bb, mut s_ab) = (0.0, 0.0, 0.0);
    for i in 0..total {
        let row = &dist[i * total..(i + 1) * total];
        let (mut ra, mut rb) = (0.0, 0.0);
        for (j, &v) in row.iter().enumerate() {
            if in_a[j] {
                ra += v;
            } else {
                rb += v;
            }
        }
        if in_a[i] {
            s_aa += ra;
            s_ab += rb;
        } else {
            s_bb += rb;
        }
    }
    let na = in_a.iter().filter(|&&x| x).count() as f64;
    let nb = total as f64 - na;
    2.0 * s_ab / (na * nb) - s_aa / (na * na) - s_bb / (nb * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, d: usize, shift: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z + shift
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = normals(50, 3, 0.0, 1);
        let t = energy_test(&a, &a, 99, 5).unwrap();
        assert!(t.distance.abs() < 1e-12);
        assert!(t.p_value > 0.5);
    }

    #[test]
    fn separates_shifted_laws() {
        let a = normals(200, 3, 0.0, 1);
        let b = normals(200, 3, 0.5, 2);
        let t = energy_test(&a, &b, 199, 7).unwrap();
        assert!(t.p_value < 0.01, "{t:?}");
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = normals(10, 2, 0.0, 1);
        let b = normals(10, 3, 0.0, 2);
        assert!(matches!(energy_test(&a, &b, 9, 0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn ols_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = ols(&x, &y);
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
