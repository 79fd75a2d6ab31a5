//! Harmonizable mBm by a symmetrized spectral Riemann sum.
//!
//! With Hermitian noise `dŴ(-ξ) = conj dŴ(ξ)` the integral over `±ξ` reduces to
//! `√2 Σ_j ξ_j^{-H-1/2} [(cos tξ_j - 1) A_j - sin(tξ_j) B_j]`, with independent
//! `A_j, B_j ~ N(0, w_j)` on positive frequency cells of width `w_j`.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;
use crate::numeric::gamma;
use crate::path::{PathMeta, Representation, SamplePath, TimeGrid};

pub const DEFAULT_OMEGA_MAX: f64 = 1e3;
pub const DEFAULT_N_FREQ: usize = 1 << 14;
pub const CUTOFF_TOLERANCE: f64 = 1e-3;
const RESYNC: usize = 256;

/// `Var B̂(t)` for constant `h` under `E|dŴ(ξ)|² = dξ`.
pub fn harmonizable_variance(h: f64, t: f64) -> f64 {
    2.0 * PI * t.abs().powf(2.0 * h) / (gamma(2.0 * h + 1.0) * (PI * h).sin())
}

#[derive(Debug, Clone)]
pub struct HarmonizablePlan {
    grid: TimeGrid,
    omega_max: f64,
    n_freq: usize,
    freq: Vec<f64>,
    log_freq: Vec<f64>,
    sd: Vec<f64>,
    p: Vec<f64>,
    constant: bool,
    warnings: Vec<String>,
}

impl HarmonizablePlan {
    pub fn new(h: &HurstFunction, grid: &TimeGrid, omega_max: f64, n_freq: usize) -> Result<Self> {
        if !(omega_max > 0.0) || !omega_max.is_finite() {
            return domain(format!("frequency cutoff must be positive, got {omega_max}"));
        }
        if n_freq < 2 {
            return domain(format!("need at least two frequencies, got {n_freq}"));
        }
        if grid.t0 < 0.0 {
            return domain("grid must start at t >= 0");
        }
        if grid.end() > h.horizon * (1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "grid end {} exceeds the hurst horizon {}",
                grid.end(),
                h.horizon
            )));
        }
        let p: Vec<f64> = grid.times().map(|t| h.at(t) + 0.5).collect();
        let h_max = p.iter().cloned().fold(0.0, f64::max) - 0.5;
        let h_min = p.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5;
        let t_max = grid.end().max(grid.dt);

        // low cut: the neglected [0, ξ_min] mass stays below 1e-8 of Var B̂(t_max)
        let target = 1e-8 * harmonizable_variance(h_max, t_max);
        let xi_min = (target * (2.0 - 2.0 * h_max) / (2.0 * t_max * t_max))
            .powf(1.0 / (2.0 - 2.0 * h_max))
            .clamp(1e-300, 1e-3 / t_max);
        let n_log = (n_freq / 4).max(1);
        let n_lin = n_freq - n_log;
        let xi_lin = (8.0 * omega_max / n_freq as f64).min(0.5 * omega_max).max(xi_min * 2.0);

        let mut freq = Vec::with_capacity(n_freq);
        let mut width = Vec::with_capacity(n_freq);
        let ratio = (xi_lin / xi_min).ln() / n_log as f64;
        for j in 0..n_log {
            let lo = xi_min * (ratio * j as f64).exp();
            let hi = xi_min * (ratio * (j + 1) as f64).exp();
            freq.push((lo * hi).sqrt());
            width.push(hi - lo);
        }
        let dw = (omega_max - xi_lin) / n_lin as f64;
        for j in 0..n_lin {
            freq.push(xi_lin + (j as f64 + 0.5) * dw);
            width.push(dw);
        }
        let log_freq = freq.iter().map(|x| x.ln()).collect();
        let sd = width.iter().map(|w| w.sqrt()).collect();

        let mut warnings = Vec::new();
        // neglected (Ω, ∞) mass relative to the smallest increment variance on the grid
        let tail = |hh: f64| 4.0 * omega_max.powf(-2.0 * hh) / (2.0 * hh);
        let worst = [h_min, h_max]
            .iter()
            .map(|&hh| tail(hh) / harmonizable_variance(hh, grid.dt))
            .fold(0.0, f64::max);
        if worst > CUTOFF_TOLERANCE {
            warnings.push(format!(
                "cutoff Ω = {omega_max} neglects about {worst:.2e} of the one-step increment variance (tolerance {CUTOFF_TOLERANCE:.0e})"
            ));
        }
        Ok(Self {
            grid: *grid,
            omega_max,
            n_freq,
            freq,
            log_freq,
            sd,
            constant: h.is_constant(),
            p,
            warnings,
        })
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn sample(&self, seed: u64) -> Result<SamplePath> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.grid.n;
        let mut values = vec![0.0; n];
        let mut amp_k = vec![0.0; n];
        for j in 0..self.freq.len() {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let (a, b) = (a * self.sd[j], b * self.sd[j]);
            let xi = self.freq[j];
            let lx = self.log_freq[j];
            if self.constant {
                amp_k[0] = SQRT_2 * (-self.p[0] * lx).exp();
            } else {
                for (m, &pk) in amp_k.iter_mut().zip(&self.p) {
                    *m = SQRT_2 * (-pk * lx).exp();
                }
            }
            let (sd, cd) = (self.grid.dt * xi).sin_cos();
            let (mut s, mut c) = (0.0, 0.0);
            for k in 0..n {
                if k % RESYNC == 0 {
                    (s, c) = (self.grid.time(k) * xi).sin_cos();
                } else {
                    (s, c) = (s * cd + c * sd, c * cd - s * sd);
                }
                let amp = if self.constant { amp_k[0] } else { amp_k[k] };
                values[k] += amp * ((c - 1.0) * a - s * b);
            }
        }
        let mut meta = PathMeta::new(Representation::Harmonizable, seed);
        meta.omega_max = Some(self.omega_max);
        meta.n_freq = Some(self.n_freq);
        meta.warnings = self.warnings.clone();
        SamplePath::new(self.grid, values, meta)
    }
}

pub fn gen_mbm_harmonizable(
    h: &HurstFunction,
    grid: &TimeGrid,
    seed: u64,
    omega_max: f64,
    n_freq: usize,
) -> Result<SamplePath> {
    HarmonizablePlan::new(h, grid, omega_max, n_freq)?.sample(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{one_minus_cos_moment, tanh_sinh};
    use crate::stats::{mean_se, ols};

    #[test]
    fn variance_constant_matches_spectral_integral() {
        // 4 ∫_0^∞ (1 - cos tξ) ξ^{-2H-1} dξ, split at ξ = 1/t over a sum of periods
        for &h in &[0.3, 0.5, 0.8] {
            let t: f64 = 0.7;
            let head = tanh_sinh(|x, _, _| (1.0 - (t * x).cos()) * x.powf(-2.0 * h - 1.0), 0.0, 200.0 * PI / t, 1e-12);
            let far = (200.0 * PI / t).powf(-2.0 * h) / (2.0 * h);
            let num = 4.0 * (head.value + far);
            let exact = harmonizable_variance(h, t);
            assert!((num - exact).abs() < 2e-3 * exact, "H={h}: {num} vs {exact}");
            assert!((4.0 * one_minus_cos_moment(t, 2.0 * h) - exact).abs() < 1e-12 * exact);
        }
        assert!((harmonizable_variance(0.5, 1.0) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn half_scales_like_brownian() {
        let h = HurstFunction::constant(0.5).unwrap();
        let g = TimeGrid::spanning(0.0, 1.0, 5).unwrap();
        let plan = HarmonizablePlan::new(&h, &g, 1e3, 1 << 12).unwrap();
        let reps = 10_000;
        let mut v = vec![Vec::with_capacity(reps); 5];
        for r in 0..reps {
            let p = plan.sample(r as u64).unwrap();
            for k in 1..5 {
                v[k].push(p.values[k].powi(2) / g.time(k));
            }
        }
        // Var B̂(t)/t is the same constant at every t
        let (m1, _) = mean_se(&v[4]);
        for k in 1..5 {
            let (m, se) = mean_se(&v[k]);
            assert!((m - 2.0 * PI).abs() < 3.0 * se + 2e-3 * 2.0 * PI, "k={k}: {m} ± {se}");
            assert!((m - m1).abs() < 4.0 * se);
        }
    }

    #[test]
    fn h07_self_similar_slope() {
        let h = HurstFunction::constant(0.7).unwrap();
        let g = TimeGrid::new(0.125, 0.125, 8).unwrap();
        let plan = HarmonizablePlan::new(&h, &g, 1e3, 1 << 12).unwrap();
        let reps = 4000;
        let mut acc = vec![0.0; 8];
        for r in 0..reps {
            let p = plan.sample(r as u64).unwrap();
            for k in 0..8 {
                acc[k] += p.values[k].powi(2) / reps as f64;
            }
        }
        let x: Vec<f64> = g.times().map(f64::ln).collect();
        let y: Vec<f64> = acc.iter().map(|v| v.ln()).collect();
        let fit = ols(&x, &y);
        assert!((fit.slope - 1.4).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn validates_inputs() {
        let h = HurstFunction::constant(0.5).unwrap();
        let g = TimeGrid::spanning(0.0, 1.0, 5).unwrap();
        assert!(HarmonizablePlan::new(&h, &g, 0.0, 16).is_err());
        assert!(HarmonizablePlan::new(&h, &g, 10.0, 1).is_err());
        let a = gen_mbm_harmonizable(&h, &g, 4, 100.0, 64).unwrap();
        let b = gen_mbm_harmonizable(&h, &g, 4, 100.0, 64).unwrap();
        assert_eq!(a.values, b.values);
        assert!(!a.meta.warnings.is_empty());
    }
}
