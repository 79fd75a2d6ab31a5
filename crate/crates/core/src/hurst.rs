//! Hurst functions `t ↦ H(t) ∈ [μ, ν] ⊂ (0, 1)` and the Hölder condition
//! `H` β-Hölder with `sup H < β`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Largest number of pairs inspected by [`HurstFunction::check_condition_beta`].
pub const MAX_CONDITION_PAIRS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HurstKind {
    Constant {
        value: f64,
    },
    /// `H(t) = intercept + slope·t`
    Linear { intercept: f64, slope: f64 },
    /// `H(t) = mean + amplitude·sin(omega·t + phase)`
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// Linear interpolation between `(t, H)` knots, held constant outside.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// Uniformly tabulated values starting at `start` with spacing `step`,
    /// linearly interpolated and held constant past the last entry.
    Table {
        start: f64,
        step: f64,
        values: Vec<f64>,
    },
}

impl HurstKind {
    /// Builds a kind from its config name and flat parameter list.
    ///
    /// | kind               | params                                  |
    /// |--------------------|-----------------------------------------|
    /// | `constant`         | `[h]`                                   |
    /// | `linear`           | `[intercept, slope]`                    |
    /// | `sinusoidal`       | `[mean, amplitude, omega, phase]`       |
    /// | `piecewise-linear` | `[t0, h0, t1, h1, ...]` (increasing t)  |
    /// | `table`            | `[start, step, v0, v1, ...]`            |
    pub fn from_params(name: &str, p: &[f64]) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if p.len() != n {
                return domain(format!("hurst kind '{name}' expects {n} parameters, got {}", p.len()));
            }
            Ok(())
        };
        Ok(match name {
            "constant" => {
                want(1)?;
                HurstKind::Constant { value: p[0] }
            }
            "linear" => {
                want(2)?;
                HurstKind::Linear {
                    intercept: p[0],
                    slope: p[1],
                }
            }
            "sinusoidal" => {
                want(4)?;
                HurstKind::Sinusoidal {
                    mean: p[0],
                    amplitude: p[1],
                    omega: p[2],
                    phase: p[3],
                }
            }
            "piecewise-linear" => {
                if p.len() < 4 || p.len() % 2 != 0 {
                    return domain("piecewise-linear expects an even number (>= 4) of parameters");
                }
                let knots: Vec<(f64, f64)> = p.chunks(2).map(|c| (c[0], c[1])).collect();
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return domain("piecewise-linear knots must have increasing times");
                }
                HurstKind::PiecewiseLinear { knots }
            }
            "table" => {
                if p.len() < 4 {
                    return domain("table expects [start, step, v0, v1, ...] with at least two values");
                }
                if !(p[1] > 0.0) {
                    return domain("table step must be positive");
                }
                HurstKind::Table {
                    start: p[0],
                    step: p[1],
                    values: p[2..].to_vec(),
                }
            }
            other => return domain(format!("unknown hurst kind '{other}'")),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            HurstKind::Constant { .. } => "constant",
            HurstKind::Linear { .. } => "linear",
            HurstKind::Sinusoidal { .. } => "sinusoidal",
            HurstKind::PiecewiseLinear { .. } => "piecewise-linear",
            HurstKind::Table { .. } => "table",
        }
    }

    fn value(&self, t: f64) -> f64 {
        match self {
            HurstKind::Constant { value } => *value,
            HurstKind::Linear { intercept, slope } => intercept + slope * t,
            HurstKind::Sinusoidal {
                mean,
                amplitude,
                omega,
                phase,
            } => mean + amplitude * (omega * t + phase).sin(),
            HurstKind::PiecewiseLinear { knots } => interpolate_knots(knots.iter().copied(), t),
            HurstKind::Table {
                start,
                step,
                values,
            } => {
                let x = (t - start) / step;
                if x <= 0.0 {
                    return values[0];
                }
                let i = x.floor() as usize;
                if i + 1 >= values.len() {
                    return *values.last().unwrap();
                }
                let f = x - i as f64;
                values[i] + f * (values[i + 1] - values[i])
            }
        }
    }

    /// Points of `[a, b]` where the extrema of `H` over `[a, b]` can occur.
    fn candidate_points(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a, b];
        match self {
            HurstKind::Constant { .. } | HurstKind::Linear { .. } => {}
            HurstKind::Sinusoidal { omega, phase, .. } => {
                if *omega != 0.0 {
                    // ω t + φ = π/2 + kπ
                    let (lo, hi) = if *omega > 0.0 {
                        (omega * a + phase, omega * b + phase)
                    } else {
                        (omega * b + phase, omega * a + phase)
                    };
                    let k0 = ((lo - FRAC_PI_2) / PI).ceil() as i64;
                    let k1 = ((hi - FRAC_PI_2) / PI).floor() as i64;
                    for k in k0..=k1 {
                        let t = (FRAC_PI_2 + k as f64 * PI - phase) / omega;
                        if t > a && t < b {
                            pts.push(t);
                        }
                    }
                }
            }
            HurstKind::PiecewiseLinear { knots } => {
                pts.extend(knots.iter().map(|k| k.0).filter(|&t| t > a && t < b));
            }
            HurstKind::Table { start, step, values } => {
                pts.extend(
                    (0..values.len())
                        .map(|i| start + i as f64 * step)
                        .filter(|&t| t > a && t < b),
                );
            }
        }
        pts
    }
}

fn interpolate_knots(knots: impl Iterator<Item = (f64, f64)>, t: f64) -> f64 {
    let mut prev: Option<(f64, f64)> = None;
    for (tk, hk) in knots {
        match prev {
            None if t <= tk => return hk,
            Some((tp, hp)) if t <= tk => return hp + (t - tp) / (tk - tp) * (hk - hp),
            _ => {}
        }
        prev = Some((tk, hk));
    }
    prev.map(|p| p.1).unwrap_or(f64::NAN)
}

/// Outcome of checking `|H(t) - H(s)| <= c·|t - s|^β` on a grid together with `ν < β`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub worst_ratio: f64,
    pub nu_below_beta: bool,
    pub pairs_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstFunction {
    pub kind: HurstKind,
    pub mu: f64,
    pub nu: f64,
    /// Declared Hölder exponent; `Some` means the Hölder condition is declared.
    pub beta: Option<f64>,
    pub holder_constant: Option<f64>,
    /// Working horizon `[0, horizon]` over which `μ ≤ H ≤ ν` is guaranteed.
    pub horizon: f64,
}

impl HurstFunction {
    /// Wraps `kind` with bounds computed exactly over `[0, horizon]`.
    pub fn new(kind: HurstKind, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return domain("hurst horizon must be positive");
        }
        if let HurstKind::Constant { value } = kind {
            check_open_unit(value, value)?;
        }
        let (mu, nu) = extremes(&kind, 0.0, horizon);
        check_open_unit(mu, nu)?;
        Ok(Self {
            kind,
            mu,
            nu,
            beta: None,
            holder_constant: None,
            horizon,
        })
    }

    pub fn constant(h: f64) -> Result<Self> {
        let mut f = Self::new(HurstKind::Constant { value: h }, 1.0)?;
        f.beta = Some(1.0);
        f.holder_constant = Some(0.0);
        f.horizon = f64::MAX;
        Ok(f)
    }

    /// Declares wider bounds than the exact extremes.
    pub fn with_bounds(mut self, mu: f64, nu: f64) -> Result<Self> {
        check_open_unit(mu, nu)?;
        if mu > self.mu || nu < self.nu {
            return domain(format!(
                "declared bounds [{mu}, {nu}] do not contain the range [{}, {}]",
                self.mu, self.nu
            ));
        }
        self.mu = mu;
        self.nu = nu;
        Ok(self)
    }

    /// Declares the Hölder data `(β, constant)`. Rejects `ν >= β`.
    pub fn with_holder(mut self, beta: f64, constant: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return domain(format!("beta must lie in (0, 1], got {beta}"));
        }
        if !(constant >= 0.0) {
            return domain("holder constant must be non-negative");
        }
        if self.nu >= beta {
            return domain(format!(
                "condition (H_beta) requires sup H = {} < beta = {beta}",
                self.nu
            ));
        }
        self.beta = Some(beta);
        self.holder_constant = Some(constant);
        Ok(self)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, HurstKind::Constant { .. })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("hurst function evaluated at negative time {t}"));
        }
        Ok(self.kind.value(t))
    }

    /// Unchecked evaluation for callers that already validated `t >= 0`.
    pub(crate) fn at(&self, t: f64) -> f64 {
        self.kind.value(t.max(0.0))
    }

    /// `(inf, sup)` of `H` over `[a, b]`.
    pub fn sup_inf(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        if !(a >= 0.0) {
            return domain(format!("interval start {a} is negative"));
        }
        if !(b > a) {
            return domain(format!("empty interval [{a}, {b}]"));
        }
        Ok(extremes(&self.kind, a, b))
    }

    pub fn check_condition_beta(&self, grid: &[f64]) -> Result<ConditionReport> {
        let beta = match self.beta {
            Some(b) => b,
            None => return domain("condition check requires a declared beta"),
        };
        if grid.len() < 2 {
            return domain("condition check needs at least two grid points");
        }
        let c = self.holder_constant.unwrap_or(0.0);
        let values: Vec<f64> = grid.iter().map(|&t| self.at(t)).collect();
        let ratio = |i: usize, j: usize| -> f64 {
            let dt = (grid[i] - grid[j]).abs();
            if dt == 0.0 {
                0.0
            } else {
                (values[i] - values[j]).abs() / dt.powf(beta)
            }
        };
        let n = grid.len();
        let total_pairs = n * (n - 1) / 2;
        let mut worst: f64 = 0.0;
        let checked = if total_pairs <= MAX_CONDITION_PAIRS {
            for i in 0..n {
                for j in 0..i {
                    worst = worst.max(ratio(i, j));
                }
            }
            total_pairs
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x4855_5253_545f_4245);
            for _ in 0..MAX_CONDITION_PAIRS {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                worst = worst.max(ratio(i, j));
            }
            MAX_CONDITION_PAIRS
        };
        let nu_below_beta = self.nu < beta;
        let holds = nu_below_beta && worst <= c * (1.0 + 1e-9) + 1e-15;
        Ok(ConditionReport {
            holds,
            worst_ratio: worst,
            nu_below_beta,
            pairs_checked: checked,
        })
    }

    /// Mean of `H` over `[a, b]` (midpoint rule on 256 cells).
    pub fn mean_over(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return self.at(a);
        }
        let n = 256;
        (0..n)
            .map(|i| self.at(a + (i as f64 + 0.5) * (b - a) / n as f64))
            .sum::<f64>()
            / n as f64
    }

    /// The parameter list the config file uses for this kind.
    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            HurstKind::Constant { value } => vec![*value],
            HurstKind::Linear { intercept, slope } => vec![*intercept, *slope],
            HurstKind::Sinusoidal {
                mean,
                amplitude,
                omega,
                phase,
            } => vec![*mean, *amplitude, *omega, *phase],
            HurstKind::PiecewiseLinear { knots } => knots.iter().flat_map(|k| [k.0, k.1]).collect(),
            HurstKind::Table { start, step, values } => {
                let mut v = vec![*start, *step];
                v.extend(values);
                v
            }
        }
    }
}

fn extremes(kind: &HurstKind, a: f64, b: f64) -> (f64, f64) {
    let vals = kind
        .candidate_points(a, b)
        .into_iter()
        .map(|t| kind.value(t));
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn check_open_unit(mu: f64, nu: f64) -> Result<()> {
    if !(mu > 0.0 && nu < 1.0 && mu <= nu) {
        return domain(format!(
            "hurst range [{mu}, {nu}] must satisfy 0 < mu <= nu < 1"
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

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

    fn sinusoidal() -> HurstFunction {
        HurstFunction::new(
            HurstKind::Sinusoidal {
                mean: 0.5,
                amplitude: 0.2,
                omega: 2.0 * PI,
                phase: 0.0,
            },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(HurstFunction::constant(0.5).unwrap().eval(0.3).unwrap(), 0.5);
        assert!((linear().eval(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((sinusoidal().eval(0.25).unwrap() - 0.7).abs() < 1e-15);
        assert!(linear().eval(-0.1).is_err());
    }

    #[test]
    fn sup_inf_examples() {
        let c = HurstFunction::constant(0.5).unwrap();
        assert_eq!(c.sup_inf(0.0, 1.0).unwrap(), (0.5, 0.5));
        let (lo, hi) = linear().sup_inf(0.0, 0.5).unwrap();
        assert!((lo - 0.3).abs() < 1e-15 && (hi - 0.5).abs() < 1e-15);
        assert!(linear().sup_inf(0.5, 0.5).is_err());
    }

    #[test]
    fn sinusoidal_extremes_match_dense_grid() {
        let h = sinusoidal();
        let (lo, hi) = h.sup_inf(0.0, 1.0).unwrap();
        // brute force with step 1e-5
        let (mut blo, mut bhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=100_000 {
            let v = h.eval(i as f64 * 1e-5).unwrap();
            blo = blo.min(v);
            bhi = bhi.max(v);
        }
        assert!((lo - blo).abs() < 1e-9 && (hi - bhi).abs() < 1e-9);
        assert!((lo - 0.3).abs() < 1e-12 && (hi - 0.7).abs() < 1e-12);
    }

    #[test]
    fn condition_examples() {
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let c = HurstFunction::constant(0.5).unwrap();
        let r = c.check_condition_beta(&grid).unwrap();
        assert!(r.holds && r.worst_ratio == 0.0);

        let l = linear().with_holder(1.0, 0.4).unwrap();
        let r = l.check_condition_beta(&grid).unwrap();
        assert!(r.holds);
        assert!((r.worst_ratio - 0.4).abs() < 1e-12);

        let s = sinusoidal().with_holder(1.0, 0.4 * PI).unwrap();
        let r = s.check_condition_beta(&grid).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.worst_ratio <= 0.4 * PI);

        // a too-small constant is detected
        let s = sinusoidal().with_holder(1.0, 0.3 * PI).unwrap();
        assert!(!s.check_condition_beta(&grid).unwrap().holds);
    }

    #[test]
    fn large_grid_is_subsampled() {
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let l = linear().with_holder(1.0, 0.4).unwrap();
        let r = l.check_condition_beta(&grid).unwrap();
        assert_eq!(r.pairs_checked, MAX_CONDITION_PAIRS);
        assert!(r.holds);
    }

    #[test]
    fn holder_declaration_requires_nu_below_beta() {
        assert!(linear().with_holder(0.6, 1.0).is_err());
    }

    #[test]
    fn kinds_from_params() {
        let t = HurstKind::from_params("table", &[0.0, 0.5, 0.3, 0.5, 0.4]).unwrap();
        let h = HurstFunction::new(t, 1.0).unwrap();
        assert!((h.eval(0.25).unwrap() - 0.4).abs() < 1e-15);
        assert!((h.eval(5.0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(h.sup_inf(0.0, 1.0).unwrap(), (0.3, 0.5));
        let p = HurstKind::from_params("piecewise-linear", &[0.0, 0.3, 0.5, 0.6, 1.0, 0.4]).unwrap();
        let h = HurstFunction::new(p, 1.0).unwrap();
        assert!((h.eval(0.25).unwrap() - 0.45).abs() < 1e-15);
        assert_eq!(h.sup_inf(0.1, 0.9).unwrap().1, 0.6);
        assert!(HurstKind::from_params("wavelet", &[1.0]).is_err());
        assert!(HurstFunction::new(HurstKind::Constant { value: 1.0 }, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sup_inf_brackets_and_nests(a in 0.0f64..0.9, len in 0.01f64..0.5, frac in 0.0f64..1.0, phase in 0.0f64..6.0) {
            let h = HurstFunction::new(HurstKind::Sinusoidal { mean: 0.5, amplitude: 0.2, omega: 7.0, phase }, 2.0).unwrap();
            let b = a + len;
            let (lo, hi) = h.sup_inf(a, b).unwrap();
            for i in 0..=50 {
                let t = a + len * i as f64 / 50.0;
                let v = h.eval(t).unwrap();
                prop_assert!(lo <= v + 1e-15 && v <= hi + 1e-15);
            }
            let a2 = a + frac * len * 0.5;
            let b2 = b - (1.0 - frac) * len * 0.25;
            let (lo2, hi2) = h.sup_inf(a2, b2).unwrap();
            prop_assert!(lo2 >= lo - 1e-15 && hi2 <= hi + 1e-15);
        }

        #[test]
        fn constant_holds_for_every_beta(beta in 0.6f64..=1.0) {
            let h = HurstFunction::constant(0.5).unwrap().with_holder(beta, 0.0).unwrap();
            let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
            let r = h.check_condition_beta(&grid).unwrap();
            prop_assert!(r.holds);
            prop_assert_eq!(r.worst_ratio, 0.0);
        }
    }
}
