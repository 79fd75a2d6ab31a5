//! Local times from occupation measures of piecewise-linear paths.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;
use crate::numeric::ln_gamma;
use crate::path::{SamplePath, TimeGrid};
use crate::stats::mean_se;

/// Minimum number of replicas accepted by [`local_time_moment`].
pub const MIN_MOMENT_REPLICAS: usize = 100;

/// Uniform space grid; bin `j` is `[x_min + j·dx, x_min + (j+1)·dx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XGrid {
    pub x_min: f64,
    pub dx: f64,
    pub m: usize,
}

impl XGrid {
    pub fn new(x_min: f64, dx: f64, m: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || !x_min.is_finite() {
            return domain(format!("invalid space grid x_min = {x_min}, dx = {dx}"));
        }
        if m == 0 {
            return domain("space grid needs at least one bin");
        }
        Ok(Self { x_min, dx, m })
    }

    /// Smallest grid of width `dx` covering `[lo, hi]` with `anchor` at a bin center.
    pub fn covering(lo: f64, hi: f64, dx: f64, anchor: f64) -> Result<Self> {
        if !(hi >= lo) {
            return domain(format!("empty range [{lo}, {hi}]"));
        }
        let origin = anchor - 0.5 * dx;
        let j_lo = ((lo - origin) / dx).floor();
        let j_hi = ((hi - origin) / dx).floor();
        Self::new(origin + j_lo * dx, dx, (j_hi - j_lo) as usize + 1)
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.m as f64 * self.dx
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx
    }

    pub fn edge(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let j = ((x - self.x_min) / self.dx).floor();
        if j < 0.0 || j >= self.m as f64 || !j.is_finite() {
            None
        } else {
            Some(j as usize)
        }
    }

    fn contains(&self, lo: f64, hi: f64) -> bool {
        lo >= self.x_min && hi < self.x_max()
    }
}

/// Default bin width `κ·(T/(n-1))^{H̄}`, the typical one-step oscillation.
pub fn default_dx(grid: &TimeGrid, mean_hurst: f64, kappa: f64) -> f64 {
    kappa * grid.dt.powf(mean_hurst)
}

/// Splits the time `dt` spent by the segment from `v0` to `v1` across the
/// pieces of a partition, calling `emit(piece_index, time)`.
///
/// `locate(x)` returns the piece containing `x` and `edge(i)` the left edge of
/// piece `i`.
fn split_segment<L, E, F>(v0: f64, v1: f64, dt: f64, locate: L, edge: E, mut emit: F)
where
    L: Fn(f64) -> usize,
    E: Fn(usize) -> f64,
    F: FnMut(usize, f64),
{
    let (lo, hi) = if v0 <= v1 { (v0, v1) } else { (v1, v0) };
    let j0 = locate(lo);
    let j1 = locate(hi);
    if j0 == j1 || hi == lo {
        emit(j0, dt);
        return;
    }
    let rate = dt / (hi - lo);
    let mut used = 0.0;
    for j in j0..j1 {
        let a = if j == j0 { lo } else { edge(j) };
        let b = edge(j + 1);
        let w = (b - a).max(0.0) * rate;
        used += w;
        emit(j, w);
    }
    // the last piece takes the remainder so the cell's time is conserved
    emit(j1, (dt - used).max(0.0));
}

/// Discretized `L(t_k, x_j)` with sparse cumulative storage per bin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalTimeField {
    pub grid: TimeGrid,
    pub x_grid: XGrid,
    /// Path values the field was built from (levels for path-point queries).
    pub levels: Vec<f64>,
    /// Per bin: `(time index, cumulative occupation time)` whenever it changes.
    cumulative: Vec<Vec<(u32, f64)>>,
    /// Total occupation time per row, `t_k - t_0` up to rounding.
    pub total_mass: Vec<f64>,
}

impl LocalTimeField {
    /// Builds the field on `x_grid`; with `auto_extend` the grid grows (same
    /// `dx` and alignment) to cover the path, otherwise leaving it is an error.
    pub fn new(path: &SamplePath, x_grid: XGrid, auto_extend: bool) -> Result<Self> {
        let (lo, hi) = path.min_max();
        let x_grid = if x_grid.contains(lo, hi) {
            x_grid
        } else if auto_extend {
            let below = ((x_grid.x_min - lo) / x_grid.dx).ceil().max(0.0) as usize;
            let above = ((hi - x_grid.x_max()) / x_grid.dx).floor().max(-1.0) + 1.0;
            XGrid::new(
                x_grid.x_min - below as f64 * x_grid.dx,
                x_grid.dx,
                x_grid.m + below + above as usize,
            )?
        } else {
            return Err(Error::Range(format!(
                "path range [{lo}, {hi}] leaves the space grid [{}, {})",
                x_grid.x_min,
                x_grid.x_max()
            )));
        };
        let n = path.len();
        let dt = path.grid.dt;
        let mut occ = vec![0.0f64; x_grid.m];
        let mut cumulative: Vec<Vec<(u32, f64)>> = vec![Vec::new(); x_grid.m];
        let mut total_mass = Vec::with_capacity(n);
        total_mass.push(0.0);
        let mut total = 0.0;
        let locate = |x: f64| x_grid.bin_of(x).unwrap_or(if x < x_grid.x_min { 0 } else { x_grid.m - 1 });
        for k in 1..n {
            let (v0, v1) = (path.values[k - 1], path.values[k]);
            split_segment(v0, v1, dt, locate, |j| x_grid.edge(j), |j, w| {
                if w == 0.0 {
                    return;
                }
                occ[j] += w;
                let entry = &mut cumulative[j];
                match entry.last_mut() {
                    Some(last) if last.0 == k as u32 => last.1 = occ[j],
                    _ => entry.push((k as u32, occ[j])),
                }
            });
            total += dt;
            total_mass.push(total);
        }
        Ok(Self {
            grid: path.grid,
            x_grid,
            levels: path.values.clone(),
            cumulative,
            total_mass,
        })
    }

    /// Occupation time of bin `j` up to time index `k`.
    pub fn occupation(&self, k: usize, j: usize) -> f64 {
        let e = &self.cumulative[j];
        let i = e.partition_point(|&(idx, _)| idx as usize <= k);
        if i == 0 {
            0.0
        } else {
            e[i - 1].1
        }
    }

    /// `L(t_k, x_j)`.
    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.occupation(k, j) / self.x_grid.dx
    }

    /// `L(t_k, x)` at the bin containing `x`.
    pub fn value_at(&self, k: usize, x: f64) -> Result<f64> {
        let j = self.bin(x)?;
        Ok(self.value(k, j))
    }

    fn bin(&self, x: f64) -> Result<usize> {
        self.x_grid.bin_of(x).ok_or_else(|| {
            Error::Range(format!(
                "level {x} outside the space grid [{}, {})",
                self.x_grid.x_min,
                self.x_grid.x_max()
            ))
        })
    }

    /// Row `L(t_k, ·)` over all bins.
    pub fn row(&self, k: usize) -> Vec<f64> {
        (0..self.x_grid.m).map(|j| self.value(k, j)).collect()
    }

    /// `L(t_k, x_j)` for every time index `k`.
    pub fn bin_series(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n];
        let mut cur = 0.0;
        let mut it = self.cumulative[j].iter().peekable();
        for (k, o) in out.iter_mut().enumerate() {
            while let Some(&&(idx, v)) = it.peek() {
                if idx as usize <= k {
                    cur = v;
                    it.next();
                } else {
                    break;
                }
            }
            *o = cur / self.x_grid.dx;
        }
        out
    }

    /// Bins that received any occupation.
    pub fn occupied_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.x_grid.m).filter(|&j| !self.cumulative[j].is_empty())
    }

    /// `Σ_j L(t_k, x_j)·dx`.
    pub fn mass(&self, k: usize) -> f64 {
        (0..self.x_grid.m).map(|j| self.occupation(k, j)).sum()
    }

    /// `∫ f(x) L(t_k, x) dx` with `f` averaged over each bin.
    pub fn integrate(&self, f: &PiecewiseConstant, k: usize) -> f64 {
        (0..self.x_grid.m)
            .map(|j| {
                let o = self.occupation(k, j);
                if o == 0.0 {
                    0.0
                } else {
                    o * f.mean_over(self.x_grid.edge(j), self.x_grid.edge(j + 1))
                }
            })
            .sum()
    }

    /// `sup_x |L(t_{k+lag}, x) - L(t_k, x)|` maximized over `k`.
    pub fn time_modulus(&self, lag: usize) -> f64 {
        let mut best: f64 = 0.0;
        for j in self.occupied_bins() {
            let s = self.bin_series(j);
            for k in 0..self.grid.n.saturating_sub(lag) {
                best = best.max(s[k + lag] - s[k]);
            }
        }
        best
    }

    /// Rows at every `stride`-th time index as `t,x,L`, skipping empty bins.
    pub fn write_csv<W: Write>(&self, w: W, stride: usize) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x", "L"])?;
        let stride = stride.max(1);
        let bins: Vec<usize> = self.occupied_bins().collect();
        let mut k = 0;
        loop {
            for &j in &bins {
                wr.write_record([
                    self.grid.time(k).to_string(),
                    self.x_grid.center(j).to_string(),
                    self.value(k, j).to_string(),
                ])?;
            }
            if k + 1 == self.grid.n {
                break;
            }
            k = (k + stride).min(self.grid.n - 1);
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> FieldSummary {
        let last = self.grid.n - 1;
        FieldSummary {
            grid: self.grid,
            x_grid: self.x_grid,
            final_marginal: self.row(last),
            final_mass: self.mass(last),
            elapsed: self.grid.span(),
        }
    }
}

/// Compact JSON description of a field.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub grid: TimeGrid,
    pub x_grid: XGrid,
    pub final_marginal: Vec<f64>,
    pub final_mass: f64,
    pub elapsed: f64,
}

pub fn local_time_field(path: &SamplePath, x_grid: XGrid) -> Result<LocalTimeField> {
    LocalTimeField::new(path, x_grid, false)
}

/// `f(x) = values[i]` on the `i`-th piece of `(-∞, b_0), [b_0, b_1), …, [b_last, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} breaks need {} values, got {}",
                breaks.len(),
                breaks.len() + 1,
                values.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().any(|b| !b.is_finite()) {
            return domain("breaks must be finite and strictly increasing");
        }
        Ok(Self { breaks, values })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            breaks: Vec::new(),
            values: vec![c],
        }
    }

    /// Indicator of `[a, b)`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![0.0, 1.0, 0.0])
    }

    fn piece(&self, x: f64) -> usize {
        self.breaks.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.piece(x)]
    }

    /// Average of `f` over `[a, b]`.
    pub fn mean_over(&self, a: f64, b: f64) -> f64 {
        let (i0, i1) = (self.piece(a), self.piece(b));
        if i0 == i1 {
            return self.values[i0];
        }
        let mut acc = 0.0;
        for i in i0..=i1 {
            let lo = if i == i0 { a } else { self.breaks[i - 1] };
            let hi = if i == i1 { b } else { self.breaks[i] };
            acc += self.values[i] * (hi - lo);
        }
        acc / (b - a)
    }
}

/// `∫_{t_0}^{t} f(B(s)) ds` in the time domain along the linear interpolant.
/// `t` must be a grid time.
pub fn occupation_integral(path: &SamplePath, f: &PiecewiseConstant, t: f64) -> Result<f64> {
    let k_end = path
        .grid
        .index_of(t)
        .ok_or_else(|| Error::Range(format!("time {t} is not on the path grid")))?;
    let dt = path.grid.dt;
    let mut total = 0.0;
    for k in 1..=k_end {
        let (v0, v1) = (path.values[k - 1], path.values[k]);
        split_segment(
            v0,
            v1,
            dt,
            |x| f.piece(x),
            |i| f.breaks[i - 1],
            |i, w| total += f.values[i] * w,
        );
    }
    Ok(total)
}

/// `∫_{t_0}^{t_k} f(B(s)) ds` along the linear interpolant for a function with
/// antiderivative `big_f`: each cell contributes `dt·(F(v1) - F(v0))/(v1 - v0)`.
pub fn occupation_integral_smooth<F, G>(path: &SamplePath, k_end: usize, f: F, big_f: G) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let dt = path.grid.dt;
    let mut total = 0.0;
    for k in 1..=k_end.min(path.len() - 1) {
        let (v0, v1) = (path.values[k - 1], path.values[k]);
        let d = v1 - v0;
        if d.abs() <= 1e-12 * (v0.abs() + v1.abs()).max(1e-300) {
            total += dt * f(0.5 * (v0 + v1));
        } else {
            total += dt * (big_f(v1) - big_f(v0)) / d;
        }
    }
    total
}

/// `L(t2, x) - L(t1, x)` at the bin containing `x`.
pub fn local_time_increment(field: &LocalTimeField, t1: f64, t2: f64, x: f64) -> Result<f64> {
    if t2 < t1 {
        return domain(format!("increment needs t1 <= t2, got {t1} > {t2}"));
    }
    let k1 = grid_index(&field.grid, t1)?;
    let k2 = grid_index(&field.grid, t2)?;
    let j = field.bin(x)?;
    Ok(field.value(k2, j) - field.value(k1, j))
}

fn grid_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    grid.index_of(t)
        .ok_or_else(|| Error::Range(format!("time {t} is not on the grid")))
}

/// Where the local time is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "x")]
pub enum Level {
    /// `x = B(t)`.
    PathPoint,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentEstimate {
    pub m: u32,
    pub mean: f64,
    pub se: f64,
    pub replicas: usize,
    /// Divisor applied to each increment, `h^{1 - H_{t,t+h}}` or 1.
    pub normalizer: f64,
}

/// Monte Carlo `E[((L(t+h, x) - L(t, x)) / N)^m]` with `N = h^{1-H_{t,t+h}}`
/// when `hurst` is given, otherwise `N = 1`.
pub fn local_time_moment(
    fields: &[LocalTimeField],
    m: u32,
    h: f64,
    t: f64,
    at: Level,
    hurst: Option<&HurstFunction>,
) -> Result<MomentEstimate> {
    if !(1..=6).contains(&m) {
        return domain(format!("moment order must lie in 1..=6, got {m}"));
    }
    if fields.len() < MIN_MOMENT_REPLICAS {
        return Err(Error::InsufficientReplicas {
            needed: MIN_MOMENT_REPLICAS,
            got: fields.len(),
        });
    }
    if !(h > 0.0) {
        return domain("moment window must be positive");
    }
    let normalizer = match hurst {
        Some(hf) => {
            let (_, sup) = hf.sup_inf(t, t + h)?;
            h.powf(1.0 - sup)
        }
        None => 1.0,
    };
    let mut xs = Vec::with_capacity(fields.len());
    for f in fields {
        let k = grid_index(&f.grid, t)?;
        let x = match at {
            Level::PathPoint => f.levels[k],
            Level::Fixed(x) => x,
        };
        let inc = local_time_increment(f, t, t + h, x)?;
        xs.push((inc / normalizer).powi(m as i32));
    }
    let (mean, se) = mean_se(&xs);
    Ok(MomentEstimate {
        m,
        mean,
        se,
        replicas: xs.len(),
        normalizer,
    })
}

/// Smallest `Ĉ` with `E_m <= Ĉ^m (m!)^{H}` over the supplied moments.
#[derive(Debug, Clone, Serialize)]
pub struct MomentFit {
    pub c_hat: f64,
    /// `(E_m / (m!)^H)^{1/m}` per moment.
    pub per_order: Vec<(u32, f64)>,
    pub dominated: bool,
}

pub fn fit_moment_constant(moments: &[MomentEstimate], h_sup: f64) -> MomentFit {
    let per_order: Vec<(u32, f64)> = moments
        .iter()
        .map(|e| {
            let lf = ln_gamma(e.m as f64 + 1.0);
            (e.m, ((e.mean.ln() - h_sup * lf) / e.m as f64).exp())
        })
        .collect();
    let c_hat = per_order.iter().map(|p| p.1).fold(0.0, f64::max);
    let dominated = c_hat.is_finite()
        && moments.iter().all(|e| {
            let bound = (e.m as f64 * c_hat.ln() + h_sup * ln_gamma(e.m as f64 + 1.0)).exp();
            e.mean <= bound * (1.0 + 1e-12)
        });
    MomentFit {
        c_hat,
        per_order,
        dominated,
    }
}

/// `∫_{t<s_1<…<s_m<t+h} ∏ (s_j - s_{j-1})^{-b_j} ds = h^{m-Σb} ∏Γ(1-b_j) / Γ(1+m-Σb)`
/// with `s_0 = t`.
pub fn dirichlet_integral(b: &[f64], h: f64) -> Result<f64> {
    if b.is_empty() {
        return domain("need at least one exponent");
    }
    if let Some(x) = b.iter().find(|&&x| !(x < 1.0)) {
        return domain(format!("exponents must be < 1, got {x}"));
    }
    if !(h > 0.0) {
        return domain("duration must be positive");
    }
    let m = b.len() as f64;
    let sb: f64 = b.iter().sum();
    let ln = (m - sb) * h.ln() + b.iter().map(|&x| ln_gamma(1.0 - x)).sum::<f64>()
        - ln_gamma(1.0 + m - sb);
    Ok(ln.exp())
}

/// Lévy-identity moments `E|N|^m = 2^{m/2} Γ((m+1)/2) / √π`.
pub fn abs_normal_moment(m: u32) -> f64 {
    let m = m as f64;
    (0.5 * m * std::f64::consts::LN_2 + ln_gamma(0.5 * (m + 1.0))).exp()
        / std::f64::consts::PI.sqrt()
}
