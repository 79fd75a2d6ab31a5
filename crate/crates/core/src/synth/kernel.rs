//! Kernel-quadrature synthesis of the moving-average and Riemann–Liouville
//! mBm.
//!
//! The driving white noise is discretized into cells `c` with increments
//! `ΔW_c = √w_c Z_c`, and each grid point receives `Σ_c (∫_c K / w_c) ΔW_c`
//! with the kernel integrated in closed form over every cell. Cells are:
//!
//! * a uniform array of width `dt/q` covering the grid window and one window
//!   length before it; its contribution is a discrete convolution, evaluated
//!   by FFT at Chebyshev nodes in the Hurst variable and interpolated back to
//!   `H(t_k)`;
//! * geometrically growing cells further into the past (down to `0` for the
//!   Riemann–Liouville process, to `-T_past` for the moving average); their
//!   coefficients are smooth in `t` and are interpolated on a Chebyshev grid
//!   in `(t, H)`;
//! * at most one short edge cell, handled exactly per grid point.
//!
//! [`KernelPlan::sample_direct`] evaluates the same sum with exact
//! coefficients in `O(n·cells)` and serves as a reference.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;
use crate::numeric::{chebyshev_basis, chebyshev_nodes, gamma, nodes_for_exponential, pow_diff};
use crate::path::{PathMeta, Representation, SamplePath, TimeGrid};

pub const DEFAULT_T_PAST: f64 = 100.0;
pub const DEFAULT_Q: usize = 4;
/// Relative threshold (against `Var B(t)`) above which the neglected past is flagged.
pub const TAIL_TOLERANCE: f64 = 1e-3;

const FAR_GROWTH: f64 = 0.05;
const ZERO_REFINE_GROWTH: f64 = 1.25;
const T_NODES: usize = 16;
const INTERP_TOL: f64 = 1e-11;

/// Truncation and resolution of the kernel integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuadrature {
    pub t_past: f64,
    pub q: usize,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        Self {
            t_past: DEFAULT_T_PAST,
            q: DEFAULT_Q,
        }
    }
}

impl KernelQuadrature {
    pub fn new(t_past: f64, q: usize) -> Result<Self> {
        let kq = Self { t_past, q };
        kq.validate()?;
        Ok(kq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_past > 0.0) || !self.t_past.is_finite() {
            return domain(format!("T_past must be positive, got {}", self.t_past));
        }
        if self.q < 1 {
            return domain("q must be at least 1");
        }
        Ok(())
    }
}

/// Upper bound on the variance of `B(t)` neglected by truncating the moving
/// average at `-t_past`, using `|K_H(t,u)| <= |H-1/2| t |u|^{H-3/2} / Γ(H+1/2)`.
pub fn tail_mass_bound(h: f64, t: f64, t_past: f64) -> f64 {
    let a = h - 0.5;
    let g = gamma(h + 0.5);
    a * a * t * t * t_past.powf(2.0 * h - 2.0) / ((2.0 - 2.0 * h) * g * g)
}

/// `Var B(t)` of the untruncated moving-average fBm with index `h`.
pub fn ma_fbm_variance(h: f64, t: f64) -> f64 {
    t.powf(2.0 * h) / (gamma(2.0 * h + 1.0) * (std::f64::consts::PI * h).sin())
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    lo: f64,
    width: f64,
}

/// Chebyshev interpolation in `p = H + 1/2` of quantities that behave like
/// `exp((p-1)·ℓ)`; values at the nodes are stored pre-multiplied by
/// `exp(-(p_j-1)·shift)`.
#[derive(Debug, Clone)]
struct PInterp {
    nodes: Vec<f64>,
    shift: f64,
}

impl PInterp {
    fn new(p_lo: f64, p_hi: f64, log_lo: f64, log_hi: f64) -> Self {
        let shift = 0.5 * (log_lo + log_hi);
        let n = if p_hi > p_lo {
            nodes_for_exponential(0.5 * (p_hi - p_lo), 0.5 * (log_hi - log_lo), INTERP_TOL)
        } else {
            1
        };
        Self {
            nodes: chebyshev_nodes(p_lo, p_hi, n),
            shift,
        }
    }

    fn scale(&self, p: f64) -> f64 {
        (-(p - 1.0) * self.shift).exp()
    }

    /// Basis values at `p`, already multiplied by the inverse node scaling.
    fn weights(&self, p: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        chebyshev_basis(&self.nodes, p, &mut w);
        let back = ((p - 1.0) * self.shift).exp();
        w.iter_mut().for_each(|v| *v *= back);
        w
    }
}

/// Precomputed synthesis plan for one grid, Hurst function and representation.
/// Sampling many replicas from one plan amortizes all kernel evaluations.
pub struct KernelPlan {
    rep: Representation,
    grid: TimeGrid,
    kq: KernelQuadrature,
    step: f64,
    p: Vec<f64>,
    inv_gamma: Vec<f64>,
    n_near: usize,
    n_uniform: usize,
    // uniform cells
    u_interp: PInterp,
    /// Per grid point: `h^H / Γ(p)` times the interpolation weights.
    u_rows: Vec<Vec<f64>>,
    fft_len: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    /// FFT of `ĝ_{2r} + i ĝ_{2r+1}` for each node pair.
    spectra: Vec<Vec<Complex<f64>>>,
    /// Uniform cells (a prefix of the array) that reach below zero.
    n_negative: usize,
    /// `[node][cell]` coefficients of the `(-u)^{H-1/2}` term, moving average only.
    neg_table: Vec<Vec<f64>>,
    // far cells
    far: Vec<Cell>,
    far_interp: PInterp,
    /// `[t_node][p_node][cell]`
    far_coef: Vec<f64>,
    far_t_rows: Vec<Vec<f64>>,
    far_p_rows: Vec<Vec<f64>>,
    // edge cells
    direct: Vec<Cell>,
    direct_coef: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

impl std::fmt::Debug for KernelPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelPlan")
            .field("representation", &self.rep)
            .field("grid", &self.grid)
            .field("uniform_cells", &self.n_uniform)
            .field("far_cells", &self.far.len())
            .field("hurst_nodes", &self.u_interp.nodes.len())
            .finish()
    }
}

/// `∫_{x0}^{x0+w} x^{p-1} dx` for `x0 >= 0`.
fn power_integral(x0: f64, w: f64, p: f64) -> f64 {
    pow_diff(x0, w, p) / p
}

impl KernelPlan {
    pub fn new(
        h: &HurstFunction,
        grid: &TimeGrid,
        kq: KernelQuadrature,
        rep: Representation,
    ) -> Result<Self> {
        kq.validate()?;
        if !matches!(
            rep,
            Representation::MovingAverage | Representation::RiemannLiouville
        ) {
            return domain(format!("kernel synthesis does not support {rep}"));
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
        let ma = rep == Representation::MovingAverage;
        let q = kq.q;
        let step = grid.dt / q as f64;
        let n_window = (grid.n - 1) * q;
        let window = grid.span();
        let t_first = grid.t0;

        let want_near = (window / step).ceil() as usize;
        let (n_near, mut edge) = if ma {
            (want_near, None)
        } else {
            let fit = (t_first / step * (1.0 + 1e-12)).floor() as usize;
            if fit <= want_near {
                let rem = t_first - fit as f64 * step;
                let edge = (rem > 1e-14 * step.max(t_first)).then_some(Cell { lo: 0.0, width: rem });
                (fit, edge)
            } else {
                (want_near, None)
            }
        };
        let n_uniform = n_near + n_window;
        let t_start = t_first - n_near as f64 * step;

        let p: Vec<f64> = grid.times().map(|t| h.at(t) + 0.5).collect();
        let inv_gamma: Vec<f64> = p.iter().map(|&x| 1.0 / gamma(x)).collect();
        let p_lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let p_hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        // uniform part
        let u_interp = PInterp::new(p_lo, p_hi, 0.0, (n_uniform.max(1) as f64).ln());
        let u_rows: Vec<Vec<f64>> = p
            .iter()
            .zip(&inv_gamma)
            .map(|(&pk, &ig)| {
                let f = step.powf(pk - 0.5) * ig;
                u_interp.weights(pk).into_iter().map(|w| w * f).collect()
            })
            .collect();
        let fft_len = (2 * n_uniform + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(fft_len);
        let fft_inv = planner.plan_fft_inverse(fft_len);
        let lag_coef = |pj: f64, lag: usize| -> f64 {
            power_integral((lag - 1) as f64, 1.0, pj) * u_interp.scale(pj)
        };
        let mut spectra = Vec::new();
        for pair in u_interp.nodes.chunks(2) {
            let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
            for lag in 1..=n_uniform {
                let re = lag_coef(pair[0], lag);
                let im = pair.get(1).map_or(0.0, |&pj| lag_coef(pj, lag));
                buf[lag] = Complex::new(re, im);
            }
            fft_fwd.process(&mut buf);
            spectra.push(buf);
        }

        // moving-average term (-u)^{H-1/2} on uniform cells below zero
        let (n_negative, neg_table) = if ma && t_start < 0.0 {
            let x_start = t_start / step;
            let n_neg = ((-x_start).ceil() as usize).min(n_uniform);
            let table = u_interp
                .nodes
                .iter()
                .map(|&pj| {
                    let s = u_interp.scale(pj);
                    (0..n_neg)
                        .map(|i| {
                            let lo = x_start + i as f64;
                            let hi = (lo + 1.0).min(0.0);
                            if hi <= lo {
                                0.0
                            } else {
                                power_integral(-hi, hi - lo, pj) * s
                            }
                        })
                        .collect()
                })
                .collect();
            (n_neg, table)
        } else {
            (0, Vec::new())
        };

        // far cells
        let lower = if ma {
            -kq.t_past
        } else if edge.is_some() {
            t_start
        } else {
            0.0
        };
        let mut far = far_cells(t_first, t_start, lower, step, ma);
        // an RL edge cell adjacent to the window start is handled exactly
        if let Some(c) = edge.take() {
            if t_first - (c.lo + c.width) >= window {
                far.push(c);
            } else {
                edge = Some(c);
            }
        }
        let direct: Vec<Cell> = edge.into_iter().collect();
        let direct_coef: Vec<Vec<f64>> = direct
            .iter()
            .map(|c| {
                grid.times()
                    .zip(p.iter().zip(&inv_gamma))
                    .map(|(t, (&pk, &ig))| cell_coefficient(t, pk, *c, ma) * ig)
                    .collect()
            })
            .collect();

        let t_last = grid.end();
        let far_t = chebyshev_nodes(t_first, t_last, T_NODES);
        let (d_min, d_max) = far.iter().fold((f64::INFINITY, 0.0f64), |(a, b), c| {
            (a.min(t_first - c.lo - c.width), b.max(t_last - c.lo))
        });
        // cells just left of zero carry (-u)^{H-1/2} at their own scale
        let small = far
            .iter()
            .filter(|c| ma && c.lo + c.width <= 0.0)
            .map(|c| c.width)
            .fold(d_min, f64::min);
        let far_interp = if far.is_empty() {
            PInterp::new(p_lo, p_hi, 0.0, 0.0)
        } else {
            PInterp::new(p_lo, p_hi, small.max(1e-300).ln(), d_max.ln())
        };
        let jf = far_interp.nodes.len();
        let mut far_coef = vec![0.0; T_NODES * jf * far.len()];
        for (i, &tau) in far_t.iter().enumerate() {
            for (j, &pj) in far_interp.nodes.iter().enumerate() {
                let s = far_interp.scale(pj);
                let base = (i * jf + j) * far.len();
                for (c, cell) in far.iter().enumerate() {
                    far_coef[base + c] = cell_coefficient(tau, pj, *cell, ma) * s;
                }
            }
        }
        let mut far_t_rows = Vec::with_capacity(grid.n);
        let mut far_p_rows = Vec::with_capacity(grid.n);
        for (k, t) in grid.times().enumerate() {
            let mut bt = vec![0.0; T_NODES];
            chebyshev_basis(&far_t, t, &mut bt);
            far_t_rows.push(bt);
            let bp: Vec<f64> = far_interp
                .weights(p[k])
                .into_iter()
                .map(|w| w * inv_gamma[k])
                .collect();
            far_p_rows.push(bp);
        }

        let mut warnings = Vec::new();
        if ma {
            let worst = p
                .iter()
                .map(|&pk| {
                    let hk = pk - 0.5;
                    tail_mass_bound(hk, t_last, kq.t_past) / ma_fbm_variance(hk, t_last)
                })
                .fold(0.0, f64::max);
            if worst > TAIL_TOLERANCE {
                warnings.push(format!(
                    "T_past = {} neglects up to {:.2e} of Var B(t) (tolerance {:.0e})",
                    kq.t_past, worst, TAIL_TOLERANCE
                ));
            }
        }

        Ok(Self {
            rep,
            grid: *grid,
            kq,
            step,
            p,
            inv_gamma,
            n_near,
            n_uniform,
            u_interp,
            u_rows,
            fft_len,
            fft_fwd,
            fft_inv,
            spectra,
            n_negative,
            neg_table,
            far,
            far_interp,
            far_coef,
            far_t_rows,
            far_p_rows,
            direct,
            direct_coef,
            warnings,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of noise cells (uniform, far, edge).
    pub fn cell_counts(&self) -> (usize, usize, usize) {
        (self.n_uniform, self.far.len(), self.direct.len())
    }

    /// Draws the cell noise in a fixed order: window cells forward, the
    /// uniform cells before the window backwards, far cells outwards, edge cells.
    fn draw_noise(&self, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![0.0; self.n_uniform];
        for v in z[self.n_near..].iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for v in z[..self.n_near].iter_mut().rev() {
            *v = StandardNormal.sample(&mut rng);
        }
        let zf: Vec<f64> = (0..self.far.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let zd: Vec<f64> = (0..self.direct.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        (z, zf, zd)
    }

    fn meta(&self, seed: u64) -> PathMeta {
        let mut meta = PathMeta::new(self.rep, seed);
        if self.rep == Representation::MovingAverage {
            meta.t_past = Some(self.kq.t_past);
        }
        meta.q = Some(self.kq.q);
        meta.warnings = self.warnings.clone();
        meta
    }

    fn index_of_point(&self, k: usize) -> usize {
        self.n_near + k * self.kq.q
    }

    pub fn sample(&self, seed: u64) -> Result<SamplePath> {
        let (z, zf, zd) = self.draw_noise(seed);
        let n = self.grid.n;
        let ju = self.u_interp.nodes.len();

        // convolutions at every uniform node
        let mut zspec: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (dst, &v) in zspec.iter_mut().zip(&z) {
            dst.re = v;
        }
        self.fft_fwd.process(&mut zspec);
        let norm = 1.0 / self.fft_len as f64;
        let mut conv = vec![vec![0.0; n]; ju];
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (r, spec) in self.spectra.iter().enumerate() {
            for ((b, a), s) in buf.iter_mut().zip(&zspec).zip(spec) {
                *b = a * s;
            }
            self.fft_inv.process(&mut buf);
            for k in 0..n {
                let c = buf[self.index_of_point(k)] * norm;
                conv[2 * r][k] = c.re;
                if 2 * r + 1 < ju {
                    conv[2 * r + 1][k] = c.im;
                }
            }
        }
        let neg: Vec<f64> = self
            .neg_table
            .iter()
            .map(|row| row.iter().zip(&z[..self.n_negative]).map(|(a, b)| a * b).sum())
            .collect();

        // far cells on the (t, p) node grid
        let jf = self.far_interp.nodes.len();
        let nf = self.far.len();
        let mut far_nodes = vec![0.0; T_NODES * jf];
        if nf > 0 {
            for (ij, out) in far_nodes.iter_mut().enumerate() {
                let row = &self.far_coef[ij * nf..(ij + 1) * nf];
                *out = row.iter().zip(&zf).map(|(a, b)| a * b).sum();
            }
        }

        let values: Vec<f64> = (0..n)
            .map(|k| {
                let mut v = 0.0;
                for j in 0..ju {
                    let s = if neg.is_empty() { 0.0 } else { neg[j] };
                    v += self.u_rows[k][j] * (conv[j][k] - s);
                }
                if nf > 0 {
                    for (i, bt) in self.far_t_rows[k].iter().enumerate() {
                        if *bt == 0.0 {
                            continue;
                        }
                        let inner: f64 = self.far_p_rows[k]
                            .iter()
                            .zip(&far_nodes[i * jf..(i + 1) * jf])
                            .map(|(a, b)| a * b)
                            .sum();
                        v += bt * inner;
                    }
                }
                for (c, zc) in self.direct_coef.iter().zip(&zd) {
                    v += c[k] * zc;
                }
                v
            })
            .collect();
        SamplePath::new(self.grid, values, self.meta(seed))
    }

    /// Same noise as [`sample`](Self::sample), exact coefficients, `O(n·cells)`.
    pub fn sample_direct(&self, seed: u64) -> Result<SamplePath> {
        let (z, zf, zd) = self.draw_noise(seed);
        let ma = self.rep == Representation::MovingAverage;
        let t_start = self.grid.t0 - self.n_near as f64 * self.step;
        let values: Vec<f64> = (0..self.grid.n)
            .map(|k| {
                let t = self.grid.time(k);
                let pk = self.p[k];
                let mut v = 0.0;
                let m = self.index_of_point(k);
                for (i, zi) in z.iter().enumerate().take(m) {
                    let cell = Cell {
                        lo: t_start + i as f64 * self.step,
                        width: self.step,
                    };
                    v += cell_coefficient_exact_lag(m - i, pk, self.step)
                        * zi;
                    if ma && cell.lo < 0.0 {
                        let hi = (cell.lo + cell.width).min(0.0);
                        v -= power_integral(-hi, hi - cell.lo, pk) / self.step.sqrt() * zi;
                    }
                }
                for (c, zc) in self.far.iter().zip(&zf) {
                    v += cell_coefficient(t, pk, *c, ma) * zc;
                }
                v *= self.inv_gamma[k];
                for (c, zc) in self.direct_coef.iter().zip(&zd) {
                    v += c[k] * zc;
                }
                v
            })
            .collect();
        SamplePath::new(self.grid, values, self.meta(seed))
    }
}

/// `(1/√h) ∫ (t-u)^{H-1/2} du` over the uniform cell `lag` steps behind `t`.
fn cell_coefficient_exact_lag(lag: usize, p: f64, step: f64) -> f64 {
    step.powf(p - 0.5) * power_integral((lag - 1) as f64, 1.0, p)
}

/// `(1/√w) ∫_cell K(t,u) du` without the `1/Γ` factor, for a cell below `t`.
fn cell_coefficient(t: f64, p: f64, c: Cell, ma: bool) -> f64 {
    let hi = c.lo + c.width;
    let first = power_integral(t - hi, c.width, p);
    let v = if ma && hi <= 0.0 {
        let v0 = -hi;
        (pow_diff(t + v0, c.width, p) - pow_diff(v0, c.width, p)) / p
    } else if ma && c.lo < 0.0 {
        first - power_integral(0.0, -c.lo, p)
    } else {
        first
    };
    v / c.width.sqrt()
}

/// Past cells below `t_start`, growing geometrically with distance from the
/// window, with a breakpoint and geometric refinement at `u = 0` for the
/// moving average.
fn far_cells(t_first: f64, t_start: f64, lower: f64, step: f64, ma: bool) -> Vec<Cell> {
    if t_start <= lower {
        return Vec::new();
    }
    let mut bps = vec![t_start];
    let mut d = t_first - t_start;
    loop {
        d += step.max(FAR_GROWTH * d);
        let u = t_first - d;
        if u <= lower {
            break;
        }
        bps.push(u);
    }
    bps.push(lower);
    if ma && t_start > 0.0 && lower < 0.0 {
        // refine around the (-u)^{H-1/2} singularity
        let reach = FAR_GROWTH * t_first;
        let mut r = step.min(1e-6 * t_first.max(step));
        bps.retain(|&u| !(u < 0.0 && u > -reach));
        bps.push(0.0);
        while r < reach && -r > lower {
            bps.push(-r);
            r *= ZERO_REFINE_GROWTH;
        }
    }
    bps.sort_by(|a, b| b.total_cmp(a));
    bps.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * a.abs().max(b.abs()).max(1e-300));
    bps.windows(2)
        .map(|w| Cell {
            lo: w[1],
            width: w[0] - w[1],
        })
        .collect()
}

pub fn gen_mbm_moving_average(
    h: &HurstFunction,
    grid: &TimeGrid,
    seed: u64,
    kq: KernelQuadrature,
) -> Result<SamplePath> {
    KernelPlan::new(h, grid, kq, Representation::MovingAverage)?.sample(seed)
}

pub fn gen_mbm_riemann_liouville(
    h: &HurstFunction,
    grid: &TimeGrid,
    seed: u64,
    q: usize,
) -> Result<SamplePath> {
    let kq = KernelQuadrature::new(DEFAULT_T_PAST, q)?;
    KernelPlan::new(h, grid, kq, Representation::RiemannLiouville)?.sample(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurst::HurstKind;
    use crate::stats::mean_se;

    fn linear() -> HurstFunction {
        HurstFunction::new(
            HurstKind::Linear {
                intercept: 0.3,
                slope: 0.4,
            },
            1.0,
        )
        .unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn fast_route_matches_direct_sum() {
        let cases = [
            (Representation::MovingAverage, TimeGrid::spanning(0.0, 1.0, 65).unwrap()),
            (Representation::MovingAverage, TimeGrid::new(0.5, 1.0 / 512.0, 33).unwrap()),
            (Representation::RiemannLiouville, TimeGrid::spanning(0.0, 1.0, 65).unwrap()),
            (Representation::RiemannLiouville, TimeGrid::new(0.5, 1.0 / 512.0, 33).unwrap()),
            (Representation::RiemannLiouville, TimeGrid::new(0.01, 0.0137, 40).unwrap()),
        ];
        for (rep, g) in cases {
            let plan = KernelPlan::new(&linear(), &g, KernelQuadrature::new(20.0, 3).unwrap(), rep)
                .unwrap();
            let a = plan.sample(9).unwrap();
            let b = plan.sample_direct(9).unwrap();
            let scale = b.values.iter().map(|v| v.abs()).fold(1e-3, f64::max);
            let err = max_abs_diff(&a.values, &b.values);
            assert!(err < 1e-8 * scale, "{rep} {g:?}: {err} (scale {scale})");
        }
    }

    #[test]
    fn constant_half_is_brownian() {
        let h = HurstFunction::constant(0.5).unwrap();
        let g = TimeGrid::spanning(0.0, 1.0, 5).unwrap();
        for rep in [Representation::MovingAverage, Representation::RiemannLiouville] {
            let plan = KernelPlan::new(&h, &g, KernelQuadrature::default(), rep).unwrap();
            let reps = 10_000;
            let mut v = vec![Vec::with_capacity(reps); 5];
            for r in 0..reps {
                let p = plan.sample(r as u64).unwrap();
                for k in 0..5 {
                    v[k].push(p.values[k] * p.values[k]);
                }
            }
            for k in 1..5 {
                let (m, se) = mean_se(&v[k]);
                let t = g.time(k);
                assert!((m - t).abs() < 3.0 * se, "{rep} t={t}: {m} ± {se}");
            }
        }
    }

    #[test]
    fn moving_average_half_has_no_past_contribution() {
        let h = HurstFunction::constant(0.5).unwrap();
        let g = TimeGrid::spanning(0.0, 1.0, 9).unwrap();
        let plan = KernelPlan::new(&h, &g, KernelQuadrature::default(), Representation::MovingAverage)
            .unwrap();
        let p = plan.sample(3).unwrap();
        // B(t) is then the running sum of the window noise alone
        let (z, _, _) = plan.draw_noise(3);
        let w: f64 = z[plan.n_near..].iter().sum::<f64>() * plan.step.sqrt();
        assert!((p.values[8] - w).abs() < 1e-10);
        assert!(plan.warnings().is_empty());
    }

    #[test]
    fn riemann_liouville_variance_formula() {
        let h = HurstFunction::constant(0.7).unwrap();
        let g = TimeGrid::spanning(0.0, 1.0, 3).unwrap();
        let plan = KernelPlan::new(&h, &g, KernelQuadrature::new(1.0, 8).unwrap(), Representation::RiemannLiouville).unwrap();
        let reps = 10_000;
        let xs: Vec<f64> = (0..reps)
            .map(|r| plan.sample(r as u64).unwrap().values[2].powi(2))
            .collect();
        let (m, se) = mean_se(&xs);
        let exact = 1.0 / (1.4 * gamma(1.2).powi(2));
        assert!((m - exact).abs() < 3.0 * se, "{m} ± {se} vs {exact}");
    }

    #[test]
    fn tail_warning_and_bound() {
        assert_eq!(tail_mass_bound(0.5, 1.0, 100.0), 0.0);
        let h = HurstFunction::constant(0.9).unwrap();
        let g = TimeGrid::spanning(0.0, 1.0, 9).unwrap();
        let plan = KernelPlan::new(&h, &g, KernelQuadrature::new(2.0, 2).unwrap(), Representation::MovingAverage)
            .unwrap();
        assert_eq!(plan.warnings().len(), 1);
    }

    #[test]
    fn rejects_grid_beyond_horizon() {
        let g = TimeGrid::spanning(0.0, 2.0, 9).unwrap();
        assert!(matches!(
            KernelPlan::new(&linear(), &g, KernelQuadrature::default(), Representation::MovingAverage),
            Err(Error::Range(_))
        ));
        assert!(KernelQuadrature::new(0.0, 1).is_err());
        assert!(KernelQuadrature::new(1.0, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let g = TimeGrid::spanning(0.0, 1.0, 33).unwrap();
        let a = gen_mbm_moving_average(&linear(), &g, 5, KernelQuadrature::default()).unwrap();
        let b = gen_mbm_moving_average(&linear(), &g, 5, KernelQuadrature::default()).unwrap();
        assert_eq!(a.values, b.values);
    }
}
