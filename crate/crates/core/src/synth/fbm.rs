//! Exact-in-law fractional Brownian motion on uniform grids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::cholesky;
use crate::path::{PathMeta, Representation, SamplePath, TimeGrid};

/// Largest grid the Cholesky route accepts.
pub const CHOLESKY_MAX_POINTS: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FbmMethod {
    Circulant,
    Cholesky,
}

/// `Cov(B(t), B(s))` of standard fBm.
pub fn fbm_covariance(h: f64, t: f64, s: f64) -> f64 {
    let p = 2.0 * h;
    0.5 * (t.abs().powf(p) + s.abs().powf(p) - (t - s).abs().powf(p))
}

fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = 2.0 * h;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

/// Standard fBm (`Var B(1) = 1`) sampled on `grid`.
///
/// Circulant embedding is used when the embedding is nonnegative definite; a
/// Cholesky factorization of the exact covariance is the fallback for grids
/// of at most [`CHOLESKY_MAX_POINTS`] points.
pub fn gen_fbm(h: f64, grid: &TimeGrid, seed: u64, method: FbmMethod) -> Result<SamplePath> {
    if !(h > 0.0 && h < 1.0) {
        return domain(format!("fBm Hurst parameter must lie in (0, 1), got {h}"));
    }
    if grid.t0 < 0.0 {
        return domain("fBm grid must start at t >= 0");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meta = PathMeta::new(Representation::FbmExact, seed);
    let offset = aligned_offset(grid);
    let values = match (method, offset) {
        (FbmMethod::Circulant, Some(k0)) => {
            let total = k0 + grid.n;
            match circulant_fgn(h, total - 1, &mut rng) {
                Some(fgn) => {
                    let scale = grid.dt.powf(h);
                    let mut acc = 0.0;
                    let mut full = Vec::with_capacity(total);
                    full.push(0.0);
                    for x in fgn {
                        acc += x * scale;
                        full.push(acc);
                    }
                    full.split_off(k0)
                }
                None => {
                    meta.warnings
                        .push("circulant embedding not nonnegative definite; used Cholesky".into());
                    cholesky_fbm(h, grid, &mut rng)?
                }
            }
        }
        (FbmMethod::Circulant, None) => {
            meta.warnings
                .push("grid start not a multiple of the step; used Cholesky".into());
            cholesky_fbm(h, grid, &mut rng)?
        }
        (FbmMethod::Cholesky, _) => cholesky_fbm(h, grid, &mut rng)?,
    };
    SamplePath::new(*grid, values, meta)
}

fn aligned_offset(grid: &TimeGrid) -> Option<usize> {
    let k = grid.t0 / grid.dt;
    let r = k.round();
    if (k - r).abs() <= 1e-9 * k.max(1.0) && r < (1u64 << 24) as f64 {
        Some(r as usize)
    } else {
        None
    }
}

/// `n` unit-step fractional Gaussian noise samples, or `None` when the
/// circulant embedding has materially negative eigenvalues.
fn circulant_fgn(h: f64, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if n == 0 {
        return Some(Vec::new());
    }
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let k = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(h, k), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let max_ev = row.iter().map(|c| c.re).fold(0.0, f64::max);
    if row.iter().any(|c| c.re < -1e-10 * max_ev) {
        return None;
    }
    let mut w: Vec<Complex<f64>> = row
        .iter()
        .map(|ev| {
            let s = (ev.re.max(0.0) / m as f64).sqrt();
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex::new(s * a, s * b)
        })
        .collect();
    fft.process(&mut w);
    Some(w.iter().take(n).map(|c| c.re).collect())
}

fn cholesky_fbm(h: f64, grid: &TimeGrid, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if grid.n > CHOLESKY_MAX_POINTS {
        return Err(Error::Synthesis {
            reason: format!(
                "Cholesky fallback limited to {CHOLESKY_MAX_POINTS} points, grid has {}",
                grid.n
            ),
            min_pivot: f64::NAN,
            max_pivot: f64::NAN,
        });
    }
    // a point at t = 0 is deterministic and excluded from the factorization
    let times: Vec<f64> = grid.times().filter(|&t| t > 0.0).collect();
    let m = times.len();
    let mut cov = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let c = fbm_covariance(h, times[i], times[j]);
            cov[i * m + j] = c;
            cov[j * m + i] = c;
        }
    }
    let (l, _, _) = cholesky(&cov, m).map_err(|(lo, hi)| Error::Synthesis {
        reason: format!("fBm covariance not positive definite (H = {h}, {m} points)"),
        min_pivot: lo,
        max_pivot: hi,
    })?;
    let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = Vec::with_capacity(grid.n);
    if m < grid.n {
        out.push(0.0);
    }
    for i in 0..m {
        out.push((0..=i).map(|k| l[i * m + k] * z[k]).sum());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    fn grid01(n: usize) -> TimeGrid {
        TimeGrid::spanning(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let g = grid01(257);
        let a = gen_fbm(0.3, &g, 11, FbmMethod::Circulant).unwrap();
        let b = gen_fbm(0.3, &g, 11, FbmMethod::Circulant).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values[0], 0.0);
    }

    #[test]
    fn brownian_increments_have_unit_rate() {
        let g = grid01(9);
        let reps = 10_000;
        let mut incs = vec![Vec::with_capacity(reps); 2];
        for r in 0..reps {
            let p = gen_fbm(0.5, &g, r as u64, FbmMethod::Circulant).unwrap();
            incs[0].push((p.values[8] - p.values[4]).powi(2));
            incs[1].push((p.values[6] - p.values[4]) * (p.values[4] - p.values[2]));
        }
        let (m, se) = mean_se(&incs[0]);
        assert!((m - 0.5).abs() < 3.0 * se, "{m} ± {se}");
        let (c, se) = mean_se(&incs[1]);
        assert!(c.abs() < 3.0 * se, "{c} ± {se}");
    }

    #[test]
    fn h07_second_moments() {
        let g = grid01(17);
        let reps = 10_000;
        let mut v1 = Vec::with_capacity(reps);
        let mut c = Vec::with_capacity(reps);
        for r in 0..reps {
            let p = gen_fbm(0.7, &g, 1000 + r as u64, FbmMethod::Circulant).unwrap();
            v1.push(p.values[16] * p.values[16]);
            c.push(p.values[8] * p.values[16]);
        }
        let (m, se) = mean_se(&v1);
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
        let (m, se) = mean_se(&c);
        let exact = fbm_covariance(0.7, 0.5, 1.0);
        assert!((exact - 0.5).abs() < 1e-15);
        assert!((m - exact).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn cholesky_route_and_offset_grid() {
        let g = TimeGrid::new(0.25, 0.05, 16).unwrap();
        let reps = 4000;
        let mut v = Vec::new();
        for r in 0..reps {
            let p = gen_fbm(0.3, &g, r as u64, FbmMethod::Cholesky).unwrap();
            v.push(p.values[0] * p.values[0]);
        }
        let (m, se) = mean_se(&v);
        assert!((m - 0.25f64.powf(0.6)).abs() < 3.0 * se);
        // non-aligned start falls back with a warning
        let g = TimeGrid::new(0.013, 0.05, 8).unwrap();
        let p = gen_fbm(0.3, &g, 1, FbmMethod::Circulant).unwrap();
        assert_eq!(p.meta.warnings.len(), 1);
    }

    #[test]
    fn rejects_bad_hurst() {
        assert!(gen_fbm(1.0, &grid01(4), 0, FbmMethod::Circulant).is_err());
    }
}
