//! Moduli of continuity, iterated-logarithm statistics and Hölder exponents.
//!
//! Limits in δ are approximated by running extrema over a geometric ladder of
//! scales. Envelopes aggregate curves across replicas; a curve is called
//! bounded when its envelope does not grow (in a log-log sense) as δ shrinks.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;
use crate::localtime::{Level, LocalTimeField};
use crate::numeric::{gamma, pow_diff, tanh_sinh_half_line};
use crate::path::{Representation, SamplePath, TimeGrid};
use crate::stats::{ols, quantile, std_dev, LinearFit};

/// Ratio between consecutive ladder scales.
pub const LADDER_RATIO: f64 = 0.840_896_415_253_714_6; // 2^{-1/4}
pub const DEFAULT_DELTA_MAX: f64 = 0.1;
pub const DEFAULT_DELTA_FLOOR: f64 = 1e-4;
/// Smallest admissible scale in grid steps.
pub const MIN_LAG: usize = 3;
/// Envelope growth exponent below which a curve counts as bounded.
pub const BOUNDED_GROWTH: f64 = 0.05;
pub const MIN_HOLDER_SCALES: usize = 8;

/// Chung's small-ball constant for Brownian motion, `π/√8`.
pub const CHUNG_BM: f64 = 1.110_720_734_539_591_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusCurve {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub normalizer: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ModulusCurve {
    pub fn new(deltas: Vec<f64>, values: Vec<f64>, normalizer: impl Into<String>) -> Result<Self> {
        if deltas.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} scales but {} values",
                deltas.len(),
                values.len()
            )));
        }
        if deltas.iter().any(|&d| !(d > 0.0)) || deltas.windows(2).any(|w| !(w[1] < w[0])) {
            return domain("scales must be positive and strictly decreasing");
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return domain("modulus values must be non-negative");
        }
        Ok(Self {
            deltas,
            values,
            normalizer: normalizer.into(),
            warnings: Vec::new(),
        })
    }

    /// Running minimum from the largest scale down.
    pub fn running_inf(&self) -> Vec<f64> {
        running(&self.values, f64::min)
    }

    pub fn running_sup(&self) -> Vec<f64> {
        running(&self.values, f64::max)
    }

    pub fn final_inf(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn final_sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Rows `delta,value[,replica_id]`.
    pub fn write_csv<W: Write>(&self, w: W, replica: Option<usize>) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        match replica {
            Some(_) => wr.write_record(["delta", "value", "replica_id"])?,
            None => wr.write_record(["delta", "value"])?,
        }
        for (d, v) in self.deltas.iter().zip(&self.values) {
            match replica {
                Some(r) => wr.write_record([d.to_string(), v.to_string(), r.to_string()])?,
                None => wr.write_record([d.to_string(), v.to_string()])?,
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn running(v: &[f64], op: fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = f64::NAN;
    for &x in v {
        acc = if acc.is_nan() { x } else { op(acc, x) };
        out.push(acc);
    }
    out
}

/// Geometric ladder `d_max·r^k ≥ d_min` with `r = 2^{-1/4}`.
pub fn delta_ladder(d_max: f64, d_min: f64) -> Result<Vec<f64>> {
    if !(d_max > 0.0 && d_min > 0.0 && d_min <= d_max) {
        return domain(format!("invalid ladder [{d_min}, {d_max}]"));
    }
    let mut out = vec![d_max];
    loop {
        let next = out[out.len() - 1] * LADDER_RATIO;
        if next < d_min * (1.0 - 1e-12) {
            break;
        }
        out.push(next);
    }
    Ok(out)
}

/// Ladder bounds; the effective floor is `max(delta_floor, 10·dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub delta_max: f64,
    pub delta_floor: f64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self {
            delta_max: DEFAULT_DELTA_MAX,
            delta_floor: DEFAULT_DELTA_FLOOR,
        }
    }
}

impl LadderSpec {
    /// Ladder for a grid of step `dt` when only `available` time is left after `t0`.
    pub fn for_grid(&self, dt: f64, available: f64) -> Result<Vec<f64>> {
        delta_ladder(
            self.delta_max.min(available),
            self.delta_floor.max(10.0 * dt),
        )
    }
}

/// Maps scales to distinct grid lags `≥ MIN_LAG`, largest first, keeping those
/// that fit in `max_lag`.
fn lags(deltas: &[f64], dt: f64, max_lag: usize) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let l = (d / dt).round();
        if !(l >= MIN_LAG as f64) {
            return domain(format!(
                "scale {d} is below {MIN_LAG} grid steps (dt = {dt})"
            ));
        }
        let l = l as usize;
        if l > max_lag {
            return Err(Error::Range(format!(
                "scale {d} exceeds the available span {}",
                max_lag as f64 * dt
            )));
        }
        if out.last().map_or(true, |&p| l < p) {
            out.push(l);
        }
    }
    if out.is_empty() {
        return domain("no scales given");
    }
    Ok(out)
}

fn grid_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    grid.index_of(t)
        .ok_or_else(|| Error::Range(format!("time {t} is not on the grid")))
}

fn log_log_inv(d: f64) -> Result<f64> {
    let v = (1.0 / d).ln().ln();
    if !(v > 0.0) {
        return domain(format!("log log(1/δ) is not positive at δ = {d}"));
    }
    Ok(v)
}

/// Cross-replica aggregate of modulus curves.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    /// `None` for the maximum, otherwise the quantile level.
    pub level: Option<f64>,
    pub replicas: usize,
    /// `-d log(envelope)/d log δ` over the smaller half of the scales;
    /// positive means growth as δ shrinks.
    pub growth_exponent: f64,
    pub r_squared: f64,
}

impl Envelope {
    pub fn from_curves(curves: &[ModulusCurve], level: Option<f64>) -> Result<Self> {
        let first = curves
            .first()
            .ok_or(Error::InsufficientReplicas { needed: 1, got: 0 })?;
        if curves.iter().any(|c| c.deltas != first.deltas) {
            return Err(Error::ShapeMismatch("curves use different scales".into()));
        }
        let values: Vec<f64> = (0..first.deltas.len())
            .map(|i| {
                let col: Vec<f64> = curves.iter().map(|c| c.values[i]).collect();
                match level {
                    None => col.iter().cloned().fold(0.0, f64::max),
                    Some(p) => quantile(&col, p),
                }
            })
            .collect();
        // growth is fitted on the small-scale half of the ladder (in log δ)
        let (d_hi, d_lo) = (first.deltas[0], first.deltas[first.deltas.len() - 1]);
        let mid = (d_hi * d_lo).sqrt() * (1.0 + 1e-12);
        let small = first.deltas.iter().filter(|&&d| d <= mid).count();
        let (x, y): (Vec<f64>, Vec<f64>) = first
            .deltas
            .iter()
            .zip(&values)
            .filter(|(&d, &v)| v > 0.0 && (d <= mid || small < 3))
            .map(|(d, v)| (d.ln(), v.ln()))
            .unzip();
        let (growth_exponent, r_squared) = if x.len() >= 2 {
            let fit = ols(&x, &y);
            (-fit.slope, fit.r_squared)
        } else {
            (0.0, 1.0)
        };
        Ok(Self {
            deltas: first.deltas.clone(),
            values,
            level,
            replicas: curves.len(),
            growth_exponent,
            r_squared,
        })
    }

    pub fn is_bounded(&self, threshold: f64) -> bool {
        self.growth_exponent < threshold
    }

    /// `self / base` at the smallest scale.
    pub fn inflation_over(&self, base: &Envelope) -> f64 {
        let i = self.values.len() - 1;
        self.values[i] / base.values[i]
    }
}

/// Per-replica curves with their envelope.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusEnsemble {
    pub curves: Vec<ModulusCurve>,
    pub envelope: Envelope,
}

impl ModulusEnsemble {
    pub fn new(curves: Vec<ModulusCurve>) -> Result<Self> {
        let envelope = Envelope::from_curves(&curves, None)?;
        Ok(Self { curves, envelope })
    }
}

/// `[L(t+δ, x) - L(t, x)] / [δ^{1-H(t)+shift} (log log 1/δ)^{H(t)}]`.
///
/// `shift = 0` is the proper normalization; a positive shift shrinks the
/// denominator and is used as a sensitivity check.
pub fn local_modulus_statistic(
    field: &LocalTimeField,
    h: &HurstFunction,
    t: f64,
    deltas: &[f64],
    level: Level,
    shift: f64,
) -> Result<ModulusCurve> {
    let k0 = grid_index(&field.grid, t)?;
    let lags = lags(deltas, field.grid.dt, field.grid.n - 1 - k0)?;
    let ht = h.eval(t)?;
    let x = match level {
        Level::PathPoint => field.levels[k0],
        Level::Fixed(x) => x,
    };
    let j = field.x_grid.bin_of(x);
    let mut ds = Vec::with_capacity(lags.len());
    let mut vs = Vec::with_capacity(lags.len());
    for &l in &lags {
        let d = l as f64 * field.grid.dt;
        let inc = match j {
            Some(j) => field.value(k0 + l, j) - field.value(k0, j),
            None => 0.0,
        };
        ds.push(d);
        vs.push(inc / (d.powf(1.0 - ht + shift) * log_log_inv(d)?.powf(ht)));
    }
    let what = match level {
        Level::PathPoint => "x = B(t)".to_string(),
        Level::Fixed(x) => format!("x = {x}"),
    };
    ModulusCurve::new(
        ds,
        vs,
        format!("delta^(1-H(t)+{shift}) (log log 1/delta)^H(t), {what}, H(t) = {ht}"),
    )
}

/// [`local_modulus_statistic`] over an ensemble of fields.
pub fn local_modulus_ensemble(
    fields: &[LocalTimeField],
    h: &HurstFunction,
    t: f64,
    deltas: &[f64],
    level: Level,
    shift: f64,
) -> Result<ModulusEnsemble> {
    let curves = fields
        .iter()
        .map(|f| local_modulus_statistic(f, h, t, deltas, level, shift))
        .collect::<Result<Vec<_>>>()?;
    ModulusEnsemble::new(curves)
}

/// `sup_{|t-s| = δ} |L(t,x) - L(s,x)| / [δ^{1-H*+shift} (log 1/δ)^{H*}]` with
/// `H*` the supremum of `H` over the field's time span.
pub fn uniform_modulus_statistic(
    field: &LocalTimeField,
    h: &HurstFunction,
    x: f64,
    deltas: &[f64],
    shift: f64,
) -> Result<ModulusCurve> {
    let g = field.grid;
    let lags = lags(deltas, g.dt, g.n - 1)?;
    let (_, h_sup) = h.sup_inf(g.t0, g.end())?;
    let series = match field.x_grid.bin_of(x) {
        Some(j) => field.bin_series(j),
        None => vec![0.0; g.n],
    };
    let mut ds = Vec::with_capacity(lags.len());
    let mut vs = Vec::with_capacity(lags.len());
    for &l in &lags {
        let d = l as f64 * g.dt;
        let log_inv = (1.0 / d).ln();
        if !(log_inv > 0.0) {
            return domain(format!("log(1/δ) is not positive at δ = {d}"));
        }
        // the local time is nondecreasing in t, so the sup over |t-s| ≤ δ sits at lag l
        let best = (0..g.n - l)
            .map(|k| series[k + l] - series[k])
            .fold(0.0, f64::max);
        ds.push(d);
        vs.push(best / (d.powf(1.0 - h_sup + shift) * log_inv.powf(h_sup)));
    }
    ModulusCurve::new(
        ds,
        vs,
        format!("delta^(1-H*+{shift}) (log 1/delta)^H*, x = {x}, H* = {h_sup}"),
    )
}

/// Largest admissible spatial Hölder exponent `(1/(2 sup H) - 1/2) ∧ 1`.
pub fn space_exponent_bound(h_sup: f64) -> f64 {
    (0.5 / h_sup - 0.5).min(1.0)
}

/// `sup_j |L(I, x_j) - L(I, x_{j+l})| / (l·dx)^α` for each spacing, with
/// `I = [a, b]` and spacings rounded to multiples of `dx`.
pub fn space_modulus_statistic(
    field: &LocalTimeField,
    h: &HurstFunction,
    interval: (f64, f64),
    spacings: &[f64],
    alpha: f64,
) -> Result<ModulusCurve> {
    let (a, b) = interval;
    let ka = grid_index(&field.grid, a)?;
    let kb = grid_index(&field.grid, b)?;
    if kb <= ka {
        return domain(format!("empty interval [{a}, {b}]"));
    }
    let (_, h_sup) = h.sup_inf(a, b)?;
    let bound = space_exponent_bound(h_sup);
    let xg = field.x_grid;
    let mut steps: Vec<usize> = Vec::new();
    for &s in spacings {
        let l = (s / xg.dx).round();
        if !(l >= 1.0) {
            return domain(format!("spacing {s} is below the bin width {}", xg.dx));
        }
        let l = l as usize;
        if steps.last().map_or(true, |&p| l < p) {
            steps.push(l);
        }
    }
    if steps.is_empty() {
        return domain("no spacings given");
    }
    let incr: Vec<f64> = (0..xg.m)
        .map(|j| field.value(kb, j) - field.value(ka, j))
        .collect();
    let mut ds = Vec::with_capacity(steps.len());
    let mut vs = Vec::with_capacity(steps.len());
    for &l in &steps {
        let d = l as f64 * xg.dx;
        // the local time vanishes outside the grid
        let get = |j: isize| -> f64 {
            if j < 0 || j >= xg.m as isize {
                0.0
            } else {
                incr[j as usize]
            }
        };
        let best = (0..xg.m as isize)
            .map(|j| {
                let v = incr[j as usize];
                (v - get(j + l as isize)).abs().max((v - get(j - l as isize)).abs())
            })
            .fold(0.0, f64::max);
        ds.push(d);
        vs.push(best / d.powf(alpha));
    }
    let mut curve = ModulusCurve::new(
        ds,
        vs,
        format!("|x-y|^{alpha} on [{a}, {b}], admissible alpha < {bound}"),
    )?;
    if !(alpha > 0.0 && alpha < bound) {
        curve.warnings.push(format!(
            "alpha = {alpha} is outside the admissible range (0, {bound}) for sup H = {h_sup}"
        ));
    }
    Ok(curve)
}

/// `sup_{s ∈ [t0, t0+l·dt]} |B(s) - B(t0)|` for each lag.
fn one_sided_oscillation(path: &SamplePath, k0: usize, lags: &[usize]) -> Vec<f64> {
    let max_lag = lags[0];
    let base = path.values[k0];
    let mut running = Vec::with_capacity(max_lag + 1);
    let mut acc: f64 = 0.0;
    for k in 0..=max_lag {
        acc = acc.max((path.values[k0 + k] - base).abs());
        running.push(acc);
    }
    lags.iter().map(|&l| running[l]).collect()
}

fn path_lags(path: &SamplePath, h: &HurstFunction, t0: f64, deltas: &[f64]) -> Result<(usize, Vec<usize>, f64)> {
    let k0 = grid_index(&path.grid, t0)?;
    let lags = lags(deltas, path.grid.dt, path.grid.n - 1 - k0)?;
    let end = t0 + lags[0] as f64 * path.grid.dt;
    if end > h.horizon * (1.0 + 1e-12) {
        return Err(Error::Range(format!(
            "t0 + max δ = {end} exceeds the hurst horizon {}",
            h.horizon
        )));
    }
    Ok((k0, lags, h.eval(t0)?))
}

/// Chung-type ratio `sup_{[t0,t0+δ]} |B(s) - B(t0)| / (δ / log|log δ|)^{H(t0)}`.
/// Its running infimum over the ladder stands in for the liminf.
pub fn chung_statistic(path: &SamplePath, h: &HurstFunction, t0: f64, deltas: &[f64]) -> Result<ModulusCurve> {
    let (k0, lags, h0) = path_lags(path, h, t0, deltas)?;
    let osc = one_sided_oscillation(path, k0, &lags);
    let mut ds = Vec::with_capacity(lags.len());
    let mut vs = Vec::with_capacity(lags.len());
    for (&l, o) in lags.iter().zip(osc) {
        let d = l as f64 * path.grid.dt;
        let ll = d.ln().abs().ln();
        if !(ll > 0.0) {
            return domain(format!("log|log δ| is not positive at δ = {d}"));
        }
        ds.push(d);
        vs.push(o / (d / ll).powf(h0));
    }
    ModulusCurve::new(ds, vs, format!("(delta / log|log delta|)^H(t0), H(t0) = {h0}"))
}

/// Iterated-logarithm ratio `sup_{[t0,t0+δ]} |B(s) - B(t0)| / [δ^{H(t0)+shift} (log|log δ|)^{1/2}]`.
/// Its running supremum stands in for the limsup.
pub fn lil_statistic(
    path: &SamplePath,
    h: &HurstFunction,
    t0: f64,
    deltas: &[f64],
    shift: f64,
) -> Result<ModulusCurve> {
    let (k0, lags, h0) = path_lags(path, h, t0, deltas)?;
    let osc = one_sided_oscillation(path, k0, &lags);
    let mut ds = Vec::with_capacity(lags.len());
    let mut vs = Vec::with_capacity(lags.len());
    for (&l, o) in lags.iter().zip(osc) {
        let d = l as f64 * path.grid.dt;
        let ll = d.ln().abs().ln();
        if !(ll > 0.0) {
            return domain(format!("log|log δ| is not positive at δ = {d}"));
        }
        ds.push(d);
        vs.push(o / (d.powf(h0 + shift) * ll.sqrt()));
    }
    ModulusCurve::new(
        ds,
        vs,
        format!("delta^(H(t0)+{shift}) (log|log delta|)^(1/2), H(t0) = {h0}"),
    )
}

/// How the moving-average constant groups its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VGrouping {
    /// `[(∫…)^{1/2} + 1/(2H)] / Γ(H+1/2)`.
    #[default]
    Printed,
    /// `(∫… + 1/(2H))^{1/2} / Γ(H+1/2)`.
    SharedRoot,
}

/// `∫_0^∞ ((1+u)^{H-1/2} - u^{H-1/2})² du` and its quadrature error estimate.
pub fn moving_average_kernel_integral(h: f64, tol: f64) -> Result<(f64, f64)> {
    if !(h > 0.0 && h < 1.0) {
        return domain(format!("H must lie in (0, 1), got {h}"));
    }
    let a = h - 0.5;
    if a == 0.0 {
        return Ok((0.0, 0.0));
    }
    let q = tanh_sinh_half_line(
        |u| {
            let d = pow_diff(u, 1.0, a);
            d * d
        },
        tol,
    );
    Ok((q.value, q.error))
}

/// The constant `V_H` for the harmonizable or moving-average field.
pub fn v_constant(h: f64, rep: Representation, grouping: VGrouping) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return domain(format!("H must lie in (0, 1), got {h}"));
    }
    match rep {
        Representation::Harmonizable => Ok((PI / (h * gamma(2.0 * h) * (PI * h).sin())).sqrt()),
        Representation::MovingAverage => {
            let (i, _) = moving_average_kernel_integral(h, 1e-13)?;
            let g = gamma(h + 0.5);
            Ok(match grouping {
                VGrouping::Printed => (i.sqrt() + 0.5 / h) / g,
                VGrouping::SharedRoot => (i + 0.5 / h).sqrt() / g,
            })
        }
        other => domain(format!("no V constant for the {other} representation")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderEstimate {
    pub alpha_hat: f64,
    pub ci: (f64, f64),
    pub scales: Vec<f64>,
    /// Mean log-oscillation per scale.
    pub mean_log_oscillation: Vec<f64>,
    pub r_squared: f64,
    pub replicas: usize,
    /// Replicas whose oscillation vanished at some scale.
    pub degenerate: usize,
}

/// Dyadic scales `δ_max·2^{-k}`, `k = 0..count`.
pub fn dyadic_scales(delta_max: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| delta_max * 0.5f64.powi(k as i32)).collect()
}

/// Regresses per-replica oscillations (one vector per replica, aligned with
/// `scales`) into a pointwise exponent estimate.
pub fn holder_from_oscillations(scales: &[f64], per_replica: Vec<Vec<f64>>) -> Result<HolderEstimate> {
    let x: Vec<f64> = scales.iter().map(|d| d.ln()).collect();
    let mut degenerate = 0;
    let mut slopes = Vec::with_capacity(per_replica.len());
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(per_replica.len());
    for osc in per_replica {
        if osc.iter().any(|&o| !(o > 0.0) || !o.is_finite()) {
            degenerate += 1;
            continue;
        }
        let y: Vec<f64> = osc.iter().map(|o| o.ln()).collect();
        slopes.push(ols(&x, &y).slope);
        kept.push(y);
    }
    if kept.is_empty() {
        return domain("oscillation vanished on every replica");
    }
    let mean_log: Vec<f64> = (0..scales.len())
        .map(|i| kept.iter().map(|y| y[i]).sum::<f64>() / kept.len() as f64)
        .collect();
    let fit: LinearFit = ols(&x, &mean_log);
    let half = if slopes.len() > 1 {
        1.96 * std_dev(&slopes) / (slopes.len() as f64).sqrt()
    } else {
        1.96 * fit.slope_se
    };
    Ok(HolderEstimate {
        alpha_hat: fit.slope,
        ci: (fit.slope - half, fit.slope + half),
        scales: scales.to_vec(),
        mean_log_oscillation: mean_log,
        r_squared: fit.r_squared,
        replicas: kept.len(),
        degenerate,
    })
}

/// Requires at least [`MIN_HOLDER_SCALES`] scales, all above [`MIN_LAG`] grid steps.
pub fn check_scales(scales: &[f64], dt: f64) -> Result<()> {
    if scales.len() < MIN_HOLDER_SCALES {
        return domain(format!(
            "need at least {MIN_HOLDER_SCALES} scales, got {}",
            scales.len()
        ));
    }
    if scales.iter().any(|&d| d < MIN_LAG as f64 * dt * (1.0 - 1e-9)) {
        return domain(format!("scales must stay above {MIN_LAG} grid steps"));
    }
    Ok(())
}

/// Exponent of `sup_{|s-t0| ≤ δ} |X(s) - X(t0)|` from a log-log regression of the
/// replica-averaged log oscillation; the interval reflects the replica spread
/// of per-path slopes.
pub fn holder_exponent_paths(paths: &[SamplePath], t0: f64, scales: &[f64]) -> Result<HolderEstimate> {
    let first = paths
        .first()
        .ok_or(Error::InsufficientReplicas { needed: 1, got: 0 })?;
    check_scales(scales, first.grid.dt)?;
    let per = paths
        .iter()
        .map(|p| path_oscillation(p, t0, scales))
        .collect::<Result<Vec<_>>>()?;
    holder_from_oscillations(scales, per)
}

/// `sup_{|s-t0| ≤ δ} |X(s) - X(t0)|` for each scale, clipped to the grid on one side.
pub fn path_oscillation(p: &SamplePath, t0: f64, scales: &[f64]) -> Result<Vec<f64>> {
    let k0 = grid_index(&p.grid, t0)?;
    let base = p.values[k0];
    scales
        .iter()
        .map(|&d| {
            let l = (d / p.grid.dt).round() as usize;
            if k0 < l && k0 + l >= p.grid.n {
                return Err(Error::Range(format!("scale {d} leaves the grid on both sides")));
            }
            let lo = k0.saturating_sub(l);
            let hi = (k0 + l).min(p.grid.n - 1);
            Ok(p.values[lo..=hi]
                .iter()
                .map(|v| (v - base).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

/// How the spatial supremum of a local-time increment is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "width")]
pub enum SpaceSup {
    /// Maximum over single bins.
    Bins,
    /// Maximum of the mean over a sliding window whose width is the given
    /// fraction of the path range on `[t0, t0+δ]` (at least one bin).
    RangeWindow(f64),
}

/// `sup_x [L(t0+l·dt, x) - L(t0, x)]` for each lag.
pub fn field_oscillation(f: &LocalTimeField, k0: usize, lags: &[usize], sup: SpaceSup) -> Vec<f64> {
    lags.iter()
        .map(|&l| {
            let seg = &f.levels[k0..=k0 + l];
            let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (j0, j1) = match (f.x_grid.bin_of(lo), f.x_grid.bin_of(hi)) {
                (Some(a), Some(b)) => (a, b),
                _ => return 0.0,
            };
            let inc: Vec<f64> = (j0..=j1).map(|j| f.value(k0 + l, j) - f.value(k0, j)).collect();
            let r = match sup {
                SpaceSup::Bins => 1,
                SpaceSup::RangeWindow(c) => ((c * (hi - lo) / f.x_grid.dx).round() as usize).max(1),
            };
            if r >= inc.len() {
                return inc.iter().sum::<f64>() / r as f64;
            }
            let mut acc: f64 = inc[..r].iter().sum();
            let mut best = acc;
            for j in r..inc.len() {
                acc += inc[j] - inc[j - r];
                best = best.max(acc);
            }
            best / r as f64
        })
        .collect()
}

/// Exponent of `sup_x [L(t0+δ, x) - L(t0, x)]` over an ensemble of fields.
pub fn holder_exponent_fields(
    fields: &[LocalTimeField],
    t0: f64,
    scales: &[f64],
    sup: SpaceSup,
) -> Result<HolderEstimate> {
    let first = fields
        .first()
        .ok_or(Error::InsufficientReplicas { needed: 1, got: 0 })?;
    check_scales(scales, first.grid.dt)?;
    let per = fields
        .iter()
        .map(|f| field_oscillation_at(f, t0, scales, sup))
        .collect::<Result<Vec<_>>>()?;
    holder_from_oscillations(scales, per)
}

/// [`field_oscillation`] at time `t0` for scales given in time units.
pub fn field_oscillation_at(f: &LocalTimeField, t0: f64, scales: &[f64], sup: SpaceSup) -> Result<Vec<f64>> {
    let k0 = grid_index(&f.grid, t0)?;
    let ls = scales
        .iter()
        .map(|&d| (d / f.grid.dt).round() as usize)
        .collect::<Vec<_>>();
    if k0 + ls.iter().max().copied().unwrap_or(0) >= f.grid.n {
        return Err(Error::Range("scales exceed the field's time span".into()));
    }
    Ok(field_oscillation(f, k0, &ls, sup))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RangeCheck {
    pub delta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `1 + dx / osc`: the discrete range covers at most two extra bins.
    pub slack: f64,
    pub holds: bool,
}

/// `δ ≤ 2·sup_x L([t0,t0+δ], x)·sup_{[t0,t0+δ]} |B(s) - B(t0)|`, evaluated on
/// the discrete field built from `path`.
pub fn range_inequality_check(
    path: &SamplePath,
    field: &LocalTimeField,
    t0: f64,
    delta: f64,
) -> Result<RangeCheck> {
    if path.grid != field.grid {
        return Err(Error::ShapeMismatch("path and field use different grids".into()));
    }
    let k0 = grid_index(&path.grid, t0)?;
    let k1 = grid_index(&path.grid, t0 + delta)?;
    if k1 <= k0 {
        return domain("range check needs a positive δ");
    }
    let lhs = field.total_mass[k1] - field.total_mass[k0];
    let osc = one_sided_oscillation(path, k0, &[k1 - k0])[0];
    let l_sup = field
        .occupied_bins()
        .map(|j| field.value(k1, j) - field.value(k0, j))
        .fold(0.0, f64::max);
    let rhs = 2.0 * l_sup * osc;
    let slack = if osc > 0.0 {
        1.0 + field.x_grid.dx / osc
    } else {
        f64::INFINITY
    };
    let holds = if osc > 0.0 {
        lhs <= rhs * slack * (1.0 + 1e-12)
    } else {
        // a constant path spends all its time in one bin
        lhs <= l_sup * field.x_grid.dx * (1.0 + 1e-12)
    };
    Ok(RangeCheck {
        delta,
        lhs,
        rhs,
        slack,
        holds,
    })
}
