//! Rescaled processes around a fixed time and convergence of their local
//! times and occupation functionals to those of the tangent fBm.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_replicas, split_seed, DEFAULT_FAILURE_BUDGET};
use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;
use crate::localtime::{occupation_integral_smooth, LocalTimeField, XGrid};
use crate::numeric::erf;
use crate::path::{Representation, SamplePath, TimeGrid};
use crate::stats::{energy_test, EnergyTest};
use crate::synth::{
    gen_fbm, harmonizable_variance, moving_average_unit_variance, FbmMethod, SynthSettings,
    Synthesizer,
};

pub const DEFAULT_RHOS: [f64; 3] = [1e-1, 3e-2, 1e-2];
pub const DEFAULT_GRID_N: usize = 1024;
pub const DEFAULT_PERMUTATIONS: usize = 500;
pub const MIN_FDD_REPLICAS: usize = 200;
/// Allowed rise of the distance between consecutive scales, in null SDs.
pub const MONOTONE_ALLOWANCE: f64 = 2.0;

/// `θ(ρ) = ρ^a`, `ψ(ρ) = ρ^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPair {
    pub a: f64,
    pub b: f64,
}

impl ScalingPair {
    /// Accepts the pair only if `b - a = 1 - H0` and `a > H0`.
    pub fn new(a: f64, b: f64, h0: f64) -> Result<Self> {
        let p = Self { a, b };
        match p.violations(h0).first() {
            Some(msg) => domain(msg.clone()),
            None => Ok(p),
        }
    }

    pub fn violations(&self, h0: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !((self.b - self.a) - (1.0 - h0)).abs().le(&1e-12) {
            out.push(format!(
                "psi(rho)/theta(rho) must equal rho^(1-H0): b - a = {} but 1 - H0 = {}",
                self.b - self.a,
                1.0 - h0
            ));
        }
        if !(self.a > h0) {
            out.push(format!(
                "theta(rho)/rho^H0 = o(1) requires a > H0 = {h0}, got a = {}",
                self.a
            ));
        }
        out
    }

    pub fn theta(&self, rho: f64) -> f64 {
        rho.powf(self.a)
    }

    pub fn psi(&self, rho: f64) -> f64 {
        rho.powf(self.b)
    }
}

/// Standard deviation of the tangent process at time one, so that the
/// rescaled field converges to `scale·fBm_H`.
pub fn tangent_scale(h0: f64, rep: Representation) -> f64 {
    match rep {
        Representation::MovingAverage | Representation::RiemannLiouville => {
            moving_average_unit_variance(h0).sqrt()
        }
        Representation::Harmonizable => harmonizable_variance(h0, 1.0).sqrt(),
        Representation::FbmExact => 1.0,
    }
}

/// Prepared generator for `B^ρ(u) = (B(t0 + ρu) - B(t0)) / ρ^{H(t0)}`, `u ∈ [0, span]`.
#[derive(Debug)]
pub struct Rescaler {
    pub t0: f64,
    pub rho: f64,
    pub h0: f64,
    pub grid_n: usize,
    synth: Synthesizer,
    unit: TimeGrid,
}

impl Rescaler {
    /// `grid_n` steps per unit of rescaled time; `span` units are generated.
    pub fn new(
        h: &HurstFunction,
        t0: f64,
        rho: f64,
        span: f64,
        grid_n: usize,
        rep: Representation,
        settings: &SynthSettings,
    ) -> Result<Self> {
        if !(rho > 0.0) || !(span > 0.0) || grid_n < 2 {
            return domain(format!("invalid rescaling rho = {rho}, span = {span}, grid_n = {grid_n}"));
        }
        if t0 < 0.0 {
            return domain("rescaling centre must be >= 0");
        }
        let dt = rho / grid_n as f64;
        let resolution = 10.0 * f64::EPSILON * (t0 + rho * span).max(1.0);
        if dt < resolution {
            return domain(format!(
                "rho = {rho} gives a step {dt:e} below the resolvable {resolution:e}"
            ));
        }
        let steps = (span * grid_n as f64).round() as usize;
        let start = if rep == Representation::FbmExact { 0.0 } else { t0 };
        let grid = TimeGrid::new(start, dt, steps + 1)?;
        let h0 = h.eval(t0)?;
        let synth = Synthesizer::new(h, &grid, rep, settings)?;
        Ok(Self {
            t0,
            rho,
            h0,
            grid_n,
            synth,
            unit: TimeGrid::new(0.0, 1.0 / grid_n as f64, steps + 1)?,
        })
    }

    pub fn sample(&self, seed: u64) -> Result<SamplePath> {
        let raw = self.synth.sample(seed)?;
        let base = raw.values[0];
        let norm = self.rho.powf(self.h0);
        let values = raw.values.iter().map(|v| (v - base) / norm).collect();
        SamplePath::new(self.unit, values, raw.meta)
    }
}

/// One rescaled path on `[0, 1]`.
pub fn rescale_path(
    h: &HurstFunction,
    t0: f64,
    rho: f64,
    grid_n: usize,
    seed: u64,
    rep: Representation,
    settings: &SynthSettings,
) -> Result<SamplePath> {
    Rescaler::new(h, t0, rho, 1.0, grid_n, rep, settings)?.sample(seed)
}

/// `Y_ρ(u, x) = [L(t0+ρu, ρ^{H0}x + B(t0)) - L(t0, ρ^{H0}x + B(t0))] / ρ^{1-H0}`
/// at every grid time in `[t0, t0+ρ]`.
pub fn rescaled_local_time(field: &LocalTimeField, t0: f64, rho: f64, h0: f64, x: f64) -> Result<Vec<f64>> {
    let g = field.grid;
    let k0 = g
        .index_of(t0)
        .ok_or_else(|| Error::Range(format!("t0 = {t0} is not on the field grid")))?;
    let k1 = g
        .index_of(t0 + rho)
        .ok_or_else(|| Error::Range(format!("t0 + rho = {} is not on the field grid", t0 + rho)))?;
    let level = rho.powf(h0) * x + field.levels[k0];
    let j = field.x_grid.bin_of(level).ok_or_else(|| {
        Error::Range(format!(
            "level {level} outside the space grid [{}, {})",
            field.x_grid.x_min,
            field.x_grid.x_max()
        ))
    })?;
    let norm = rho.powf(1.0 - h0);
    let base = field.value(k0, j);
    Ok((k0..=k1).map(|k| (field.value(k, j) - base) / norm).collect())
}

/// Field of a path with bins of width `dx` and `anchor` at a bin centre.
pub fn anchored_field(path: &SamplePath, dx: f64, anchor: f64) -> Result<LocalTimeField> {
    let (lo, hi) = path.min_max();
    let xg = XGrid::covering(lo.min(anchor), hi.max(anchor), dx, anchor)?;
    LocalTimeField::new(path, xg, false)
}

/// Energy-distance comparison of two replica × coordinate samples.
pub fn fdd_distance(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, seed: u64) -> Result<EnergyTest> {
    let got = a.len().min(b.len());
    if got < MIN_FDD_REPLICAS {
        return Err(Error::InsufficientReplicas {
            needed: MIN_FDD_REPLICAS,
            got,
        });
    }
    energy_test(a, b, permutations, seed)
}

fn unit_indices(grid_n: usize, coords: &[f64]) -> Result<Vec<usize>> {
    coords
        .iter()
        .map(|&t| {
            let k = t * grid_n as f64;
            if !(t > 0.0 && t <= 1.0) || (k - k.round()).abs() > 1e-6 {
                return domain(format!("time {t} is not a unit-grid point in (0, 1]"));
            }
            Ok(k.round() as usize)
        })
        .collect()
}

/// Settings of a local-time convergence run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassSettings {
    pub t0: f64,
    pub x: f64,
    pub rhos: Vec<f64>,
    pub t_coords: Vec<f64>,
    pub replicas: usize,
    pub grid_n: usize,
    /// Bin width `kappa·(1/grid_n)^{H0}` in rescaled space.
    pub kappa: f64,
    pub representation: Representation,
    pub permutations: usize,
    /// Added to `H0` for the reference; nonzero only for negative controls.
    pub reference_shift: f64,
    pub p_threshold: f64,
}

impl LassSettings {
    pub fn new(t0: f64, replicas: usize) -> Self {
        Self {
            t0,
            x: 0.0,
            rhos: DEFAULT_RHOS.to_vec(),
            t_coords: vec![0.25, 0.5, 1.0],
            replicas,
            grid_n: DEFAULT_GRID_N,
            kappa: 1.0,
            representation: Representation::MovingAverage,
            permutations: DEFAULT_PERMUTATIONS,
            reference_shift: 0.0,
            p_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoResult {
    pub rho: f64,
    pub distance: f64,
    pub p_value: f64,
    pub null_sd: f64,
    pub replicas: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub h0: f64,
    pub reference_hurst: f64,
    pub reference_scale: f64,
    pub per_rho: Vec<RhoResult>,
    /// Distances nonincreasing up to the allowance in null SDs.
    pub monotone: bool,
    pub final_p: f64,
    pub converged: bool,
}

/// `ℓ(t_j, x)` replicas for `scale·fBm_H` on the unit grid, through the same
/// field pipeline as the rescaled paths.
pub fn reference_local_times(
    hurst: f64,
    scale: f64,
    x: f64,
    coords: &[f64],
    grid_n: usize,
    dx: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let ks = unit_indices(grid_n, coords)?;
    let grid = TimeGrid::new(0.0, 1.0 / grid_n as f64, grid_n + 1)?;
    let ens = run_replicas(replicas, seed, DEFAULT_FAILURE_BUDGET, |_, s| {
        let mut p = gen_fbm(hurst, &grid, s, FbmMethod::Circulant)?;
        p.values.iter_mut().for_each(|v| *v *= scale);
        let f = anchored_field(&p, dx, x)?;
        let j = f.x_grid.bin_of(x).expect("anchor is covered");
        Ok(ks.iter().map(|&k| f.value(k, j)).collect::<Vec<f64>>())
    })?;
    Ok(ens.items)
}

/// `{Y_ρ(t_j, x)}_j` replicas for one scale, computed from the rescaled path.
pub fn rescaled_local_time_replicas(
    h: &HurstFunction,
    s: &LassSettings,
    rho: f64,
    dx: f64,
    settings: &SynthSettings,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let ks = unit_indices(s.grid_n, &s.t_coords)?;
    let plan = Rescaler::new(h, s.t0, rho, 1.0, s.grid_n, s.representation, settings)?;
    let ens = run_replicas(s.replicas, seed, DEFAULT_FAILURE_BUDGET, |_, sd| {
        let p = plan.sample(sd)?;
        let f = anchored_field(&p, dx, s.x)?;
        let j = f.x_grid.bin_of(s.x).expect("anchor is covered");
        Ok(ks.iter().map(|&k| f.value(k, j)).collect::<Vec<f64>>())
    })?;
    Ok((ens.items, ens.failures.len()))
}

/// Two-sample comparison of `Y_ρ` fdds against tangent-fBm local-time fdds
/// for each `ρ` in the ladder.
pub fn verify_lass_localtime(
    h: &HurstFunction,
    s: &LassSettings,
    settings: &SynthSettings,
    seed: u64,
) -> Result<ConvergenceReport> {
    if s.rhos.windows(2).any(|w| !(w[1] < w[0])) || s.rhos.iter().any(|&r| !(r > 0.0)) {
        return domain("rhos must be positive and decreasing");
    }
    let h0 = h.eval(s.t0)?;
    let h_ref = h0 + s.reference_shift;
    if !(h_ref > 0.0 && h_ref < 1.0) {
        return domain(format!("reference hurst {h_ref} is outside (0, 1)"));
    }
    let dx = s.kappa * (1.0 / s.grid_n as f64).powf(h0);
    let scale = tangent_scale(h_ref, s.representation);
    let reference = reference_local_times(
        h_ref,
        scale,
        s.x,
        &s.t_coords,
        s.grid_n,
        dx,
        s.replicas,
        split_seed(seed, u64::MAX),
    )?;
    let mut per_rho = Vec::with_capacity(s.rhos.len());
    for (i, &rho) in s.rhos.iter().enumerate() {
        let (ys, failures) = rescaled_local_time_replicas(h, s, rho, dx, settings, split_seed(seed, i as u64))?;
        let t = fdd_distance(&ys, &reference, s.permutations, split_seed(seed, 1_000 + i as u64))?;
        per_rho.push(RhoResult {
            rho,
            distance: t.distance,
            p_value: t.p_value,
            null_sd: t.null_sd,
            replicas: ys.len(),
            failures,
        });
    }
    let monotone = per_rho
        .windows(2)
        .all(|w| w[1].distance <= w[0].distance + MONOTONE_ALLOWANCE * w[1].null_sd);
    let final_p = per_rho.last().map_or(f64::NAN, |r| r.p_value);
    Ok(ConvergenceReport {
        h0,
        reference_hurst: h_ref,
        reference_scale: scale,
        converged: monotone && final_p > s.p_threshold,
        monotone,
        final_p,
        per_rho,
    })
}

/// Closed library of compactly supported test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `height` on `[lo, hi]`.
    Indicator { lo: f64, hi: f64, height: f64 },
    /// Tent of the given half-width and peak height.
    Triangle { center: f64, half_width: f64, height: f64 },
    /// `height·exp(-x²/2sd²)` on `|x| ≤ cutoff·sd`.
    TruncatedGaussian { sd: f64, cutoff: f64, height: f64 },
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TestFunction::Indicator { lo, hi, height } => hi > lo && height.is_finite(),
            TestFunction::Triangle { half_width, height, center } => {
                half_width > 0.0 && height.is_finite() && center.is_finite()
            }
            TestFunction::TruncatedGaussian { sd, cutoff, height } => {
                sd > 0.0 && cutoff > 0.0 && height.is_finite()
            }
        };
        if !ok {
            return domain(format!("invalid test function {self:?}"));
        }
        if self.integral() == 0.0 {
            return domain("test function must have a nonzero integral");
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Indicator { lo, hi, height } => {
                if x >= lo && x <= hi {
                    height
                } else {
                    0.0
                }
            }
            TestFunction::Triangle { center, half_width, height } => {
                height * (1.0 - ((x - center) / half_width).abs()).max(0.0)
            }
            TestFunction::TruncatedGaussian { sd, cutoff, height } => {
                if x.abs() <= cutoff * sd {
                    height * (-0.5 * (x / sd).powi(2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_{-∞}^x f`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Indicator { lo, hi, height } => height * (x.clamp(lo, hi) - lo),
            TestFunction::Triangle { center, half_width, height } => {
                let z = ((x - center) / half_width).clamp(-1.0, 1.0);
                let area = height * half_width;
                if z <= 0.0 {
                    0.5 * area * (z + 1.0).powi(2)
                } else {
                    area * (1.0 - 0.5 * (1.0 - z).powi(2))
                }
            }
            TestFunction::TruncatedGaussian { sd, cutoff, height } => {
                let c = cutoff * sd;
                let k = height * sd * (PI / 2.0).sqrt();
                k * (erf(x.clamp(-c, c) / (sd * SQRT_2)) + erf(cutoff / SQRT_2))
            }
        }
    }

    pub fn integral(&self) -> f64 {
        self.antiderivative(f64::INFINITY)
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            TestFunction::Indicator { lo, hi, height } => TestFunction::Indicator { lo, hi, height: c * height },
            TestFunction::Triangle { center, half_width, height } => TestFunction::Triangle {
                center,
                half_width,
                height: c * height,
            },
            TestFunction::TruncatedGaussian { sd, cutoff, height } => {
                TestFunction::TruncatedGaussian { sd, cutoff, height: c * height }
            }
        }
    }
}

/// `∫_0^{t_k} f(a·X(u) + b) du` along the linear interpolant of `path`.
fn integrate_affine(path: &SamplePath, k_end: usize, f: &TestFunction, a: f64, b: f64) -> f64 {
    let g = path.values.iter().map(|v| a * v + b).collect();
    let p = SamplePath {
        grid: path.grid,
        values: g,
        meta: path.meta.clone(),
    };
    occupation_integral_smooth(&p, k_end, |x| f.eval(x), |x| f.antiderivative(x))
}

fn unit_index(path: &SamplePath, t: f64) -> Result<usize> {
    path.grid
        .index_of(t)
        .ok_or_else(|| Error::Range(format!("time {t} is beyond the synthesized rescaled horizon")))
}

/// `λ^{H0-1} ∫_0^{λt} f(B^ρ(s)) ds` for one rescaled path covering `[0, λt]`.
pub fn occupation_functional_of(path: &SamplePath, f: &TestFunction, h0: f64, lambda: f64, t: f64) -> Result<f64> {
    if !(lambda >= 1.0) {
        return domain(format!("lambda must be >= 1, got {lambda}"));
    }
    let k = unit_index(path, lambda * t)?;
    Ok(integrate_affine(path, k, f, 1.0, 0.0) / lambda.powf(1.0 - h0))
}

/// Replicas of the normalized occupation functional.
#[allow(clippy::too_many_arguments)]
pub fn occupation_functional(
    f: &TestFunction,
    h: &HurstFunction,
    t0: f64,
    rho: f64,
    lambda: f64,
    t: f64,
    grid_n: usize,
    replicas: usize,
    rep: Representation,
    settings: &SynthSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    f.validate()?;
    if !(lambda >= 1.0) {
        return domain(format!("lambda must be >= 1, got {lambda}"));
    }
    let plan = Rescaler::new(h, t0, rho, lambda * t, grid_n, rep, settings)?;
    let h0 = plan.h0;
    let ens = run_replicas(replicas, seed, DEFAULT_FAILURE_BUDGET, |_, s| {
        occupation_functional_of(&plan.sample(s)?, f, h0, lambda, t)
    })?;
    Ok(ens.items)
}

/// Upper end of the admissible moment exponent `ξ < 1/(2 sup H) - 1/2`.
pub fn xi_bound(h_sup: f64) -> f64 {
    0.5 / h_sup - 0.5
}

/// Configuration problems of a weighted occupation functional.
pub fn weighted_violations(h: &HurstFunction, t0: f64, scaling: &ScalingPair, xi: f64) -> Result<Vec<String>> {
    let h0 = h.eval(t0)?;
    let mut out = scaling.violations(h0);
    let bound = xi_bound(h.nu);
    if !(xi > 0.0 && xi < bound) {
        out.push(format!("xi = {xi} must lie in (0, {bound}) for sup H = {}", h.nu));
    }
    Ok(out)
}

/// `(1/ψ(ρ)) ∫_{t0}^{t0+ρt} f((B(s) - B(t0) - ρ^{H0}y)/θ(ρ)) ds`, evaluated on
/// the rescaled path as `(ρ/ψ) ∫_0^t f((ρ^{H0}B^ρ(u) - ρ^{H0}y)/θ) du`.
pub fn weighted_occupation_of(
    path: &SamplePath,
    f: &TestFunction,
    h0: f64,
    rho: f64,
    y: f64,
    scaling: &ScalingPair,
    t: f64,
) -> Result<f64> {
    let k = unit_index(path, t)?;
    let r = rho.powf(h0);
    let theta = scaling.theta(rho);
    Ok(rho / scaling.psi(rho) * integrate_affine(path, k, f, r / theta, -r * y / theta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSettings {
    pub t0: f64,
    pub rho: f64,
    pub y: f64,
    pub t: f64,
    pub scaling: ScalingPair,
    pub xi: f64,
    pub grid_n: usize,
    pub replicas: usize,
    pub representation: Representation,
}

/// Replicas of the weighted occupation functional; rejects inadmissible settings.
pub fn weighted_occupation_functional(
    f: &TestFunction,
    h: &HurstFunction,
    w: &WeightedSettings,
    settings: &SynthSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    f.validate()?;
    let v = weighted_violations(h, w.t0, &w.scaling, w.xi)?;
    if !v.is_empty() {
        return Err(Error::Config(
            v.into_iter()
                .map(|m| crate::error::Violation::new("weighted-occupation", m))
                .collect(),
        ));
    }
    let plan = Rescaler::new(h, w.t0, w.rho, w.t, w.grid_n, w.representation, settings)?;
    let ens = run_replicas(w.replicas, seed, DEFAULT_FAILURE_BUDGET, |_, s| {
        weighted_occupation_of(&plan.sample(s)?, f, plan.h0, w.rho, w.y, &w.scaling, w.t)
    })?;
    Ok(ens.items)
}

/// `max_lag E|Y(t+lag) - Y(t)|^m / (lag·du)^{(1-H0)m}` over curves on a common unit grid.
pub fn increment_moment_constant(curves: &[Vec<f64>], du: f64, h0: f64, m: i32, lags: &[usize]) -> f64 {
    lags.iter()
        .map(|&l| {
            let mut acc = 0.0;
            let mut count = 0usize;
            for c in curves {
                for k in (0..c.len().saturating_sub(l)).step_by(l.max(1)) {
                    acc += (c[k + l] - c[k]).abs().powi(m);
                    count += 1;
                }
            }
            (acc / count.max(1) as f64) / (l as f64 * du).powf((1.0 - h0) * m as f64)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurst::HurstKind;
    use crate::stats::mean_se;

    #[test]
    fn scaling_pair_invariants() {
        assert!(ScalingPair::new(0.6, 1.1, 0.5).is_ok());
        let e = ScalingPair::new(0.4, 0.9, 0.5).unwrap_err().to_string();
        assert!(e.contains("o(1)"), "{e}");
        assert!(ScalingPair::new(0.6, 1.2, 0.5).is_err());
        let p = ScalingPair { a: 0.6, b: 1.1 };
        assert!((p.psi(0.01) / p.theta(0.01) - 0.01f64.powf(0.5)).abs() < 1e-15);
    }

    #[test]
    fn test_function_antiderivatives() {
        let fs = [
            TestFunction::Indicator { lo: -1.0, hi: 1.0, height: 0.5 },
            TestFunction::Triangle { center: 0.2, half_width: 0.7, height: 2.0 },
            TestFunction::TruncatedGaussian { sd: 0.5, cutoff: 3.0, height: 1.0 },
        ];
        for f in fs {
            // midpoint sums against the antiderivative
            let (a, b, n) = (-2.0, 2.0, 400_000);
            let w = (b - a) / n as f64;
            let num: f64 = (0..n).map(|i| f.eval(a + (i as f64 + 0.5) * w) * w).sum();
            assert!((num - f.integral()).abs() < 1e-5, "{f:?}: {num} vs {}", f.integral());
            assert!((f.antiderivative(0.3) - f.antiderivative(-0.3)
                - (0..1000).map(|i| f.eval(-0.3 + (i as f64 + 0.5) * 6e-4) * 6e-4).sum::<f64>())
            .abs()
                < 1e-6);
        }
        assert_eq!(fs[0].integral(), 1.0);
        assert!(TestFunction::Indicator { lo: 0.0, hi: 1.0, height: 0.0 }.validate().is_err());
    }

    #[test]
    fn rescaled_path_starts_at_zero_and_scales() {
        let h = HurstFunction::constant(0.5).unwrap();
        let s = SynthSettings::default();
        let p = rescale_path(&h, 0.3, 0.01, 256, 5, Representation::MovingAverage, &s).unwrap();
        assert_eq!(p.values[0], 0.0);
        assert_eq!(p.len(), 257);
        assert!((p.grid.end() - 1.0).abs() < 1e-12);
        assert!(rescale_path(&h, 0.3, 1e-300, 256, 5, Representation::MovingAverage, &s).is_err());
    }

    #[test]
    fn rescaled_brownian_is_brownian() {
        // Var B^ρ(u) = u for every ρ when H ≡ 1/2
        let h = HurstFunction::constant(0.5).unwrap();
        let s = SynthSettings::default();
        for &rho in &[0.1, 0.001] {
            let plan = Rescaler::new(&h, 0.5, rho, 1.0, 64, Representation::MovingAverage, &s).unwrap();
            let v: Vec<f64> = (0..4000).map(|i| plan.sample(i).unwrap().values[32].powi(2)).collect();
            let (m, se) = mean_se(&v);
            assert!((m - 0.5).abs() < 3.0 * se, "rho={rho}: {m} ± {se}");
        }
    }

    #[test]
    fn change_of_variables_identity() {
        // the field of B^ρ equals Y_ρ from the unrescaled field with matching bins
        let h = HurstFunction::new(
            HurstKind::Sinusoidal { mean: 0.5, amplitude: 0.2, omega: 2.0 * PI, phase: 0.0 },
            1.0,
        )
        .unwrap();
        let s = SynthSettings::default();
        let (t0, rho, n) = (0.25, 0.05, 512);
        let plan = Rescaler::new(&h, t0, rho, 1.0, n, Representation::MovingAverage, &s).unwrap();
        let raw = plan.synth.sample(9).unwrap();
        let unit = plan.sample(9).unwrap();
        let h0 = plan.h0;
        let (dx, x) = (0.05, 0.1);
        let fu = anchored_field(&unit, dx, x).unwrap();
        let level = rho.powf(h0) * x + raw.values[0];
        let fr = anchored_field(&raw, rho.powf(h0) * dx, level).unwrap();
        let y = rescaled_local_time(&fr, t0, rho, h0, x).unwrap();
        let j = fu.x_grid.bin_of(x).unwrap();
        let direct = fu.bin_series(j);
        assert_eq!(y[0], 0.0);
        for (a, b) in y.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn fdd_distance_requires_replicas() {
        let a = vec![vec![0.0]; 10];
        assert!(matches!(
            fdd_distance(&a, &a, 9, 0),
            Err(Error::InsufficientReplicas { .. })
        ));
    }

    #[test]
    fn weighted_functional_is_linear_and_checked() {
        let h = HurstFunction::constant(0.5).unwrap();
        let s = SynthSettings::default();
        let f = TestFunction::Indicator { lo: -1.0, hi: 1.0, height: 0.5 };
        let w = WeightedSettings {
            t0: 0.5,
            rho: 0.01,
            y: 0.0,
            t: 1.0,
            scaling: ScalingPair { a: 0.6, b: 1.1 },
            xi: 0.1,
            grid_n: 256,
            replicas: 20,
            representation: Representation::MovingAverage,
        };
        let a = weighted_occupation_functional(&f, &h, &w, &s, 3).unwrap();
        let b = weighted_occupation_functional(&f.scaled(2.0), &h, &w, &s, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-12 * y.abs().max(1.0));
        }
        let bad = WeightedSettings { scaling: ScalingPair { a: 0.4, b: 0.9 }, ..w.clone() };
        assert!(matches!(weighted_occupation_functional(&f, &h, &bad, &s, 3), Err(Error::Config(_))));
        let bad_xi = WeightedSettings { xi: 0.6, ..w };
        assert!(matches!(weighted_occupation_functional(&f, &h, &bad_xi, &s, 3), Err(Error::Config(_))));
    }

    #[test]
    fn occupation_functional_refuses_short_paths() {
        let h = HurstFunction::constant(0.5).unwrap();
        let s = SynthSettings::default();
        let f = TestFunction::Indicator { lo: -1.0, hi: 1.0, height: 1.0 };
        let plan = Rescaler::new(&h, 0.2, 0.01, 1.0, 128, Representation::MovingAverage, &s).unwrap();
        let p = plan.sample(1).unwrap();
        assert!(occupation_functional_of(&p, &f, 0.5, 4.0, 1.0).is_err());
        assert!(occupation_functional_of(&p, &f, 0.5, 0.5, 1.0).is_err());
        let v = occupation_functional_of(&p, &f, 0.5, 1.0, 1.0).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&v));
    }
}
