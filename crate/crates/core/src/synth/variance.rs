//! Deterministic second-order quantities of the kernel representations.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::hurst::HurstFunction;
use crate::numeric::{cholesky, determinant, gamma, ln_gamma, one_minus_cos_moment, pow_diff, tanh_sinh};
use crate::path::Representation;
use crate::synth::kernel::KernelQuadrature;

const QUAD_TOL: f64 = 1e-13;

/// `Var(B(t) - B(s))` for `0 <= s < t`, computed from the kernel (moving
/// average, Riemann–Liouville), in closed form (harmonizable) or from the fBm
/// covariance (constant `H` only).
pub fn increment_variance_exact(
    h: &HurstFunction,
    s: f64,
    t: f64,
    kq: KernelQuadrature,
    rep: Representation,
) -> Result<f64> {
    if !(s >= 0.0 && t > s) {
        return domain(format!("increment variance needs 0 <= s < t, got s = {s}, t = {t}"));
    }
    kq.validate()?;
    if t > h.horizon * (1.0 + 1e-12) {
        return Err(Error::Range(format!("t = {t} exceeds the hurst horizon {}", h.horizon)));
    }
    increment_variance(h, s, t, kq, rep)
}

/// As [`increment_variance_exact`] but accepting any order and `s == t`.
pub(crate) fn increment_variance(
    h: &HurstFunction,
    s: f64,
    t: f64,
    kq: KernelQuadrature,
    rep: Representation,
) -> Result<f64> {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    if s == t {
        return Ok(0.0);
    }
    let (hs, ht) = (h.at(s), h.at(t));
    match rep {
        Representation::Harmonizable => Ok(harmonizable_increment_variance(hs, ht, s, t)),
        Representation::FbmExact => {
            if !h.is_constant() {
                return domain("fbm-exact requires a constant hurst function");
            }
            Ok((t - s).powf(2.0 * ht))
        }
        Representation::MovingAverage | Representation::RiemannLiouville => {
            let ma = rep == Representation::MovingAverage;
            Ok(kernel_increment_variance(hs, ht, s, t, kq, ma))
        }
    }
}

/// `E|B̂(t) - B̂(s)|²` for the harmonizable representation with indices `hs`, `ht`.
pub fn harmonizable_increment_variance(hs: f64, ht: f64, s: f64, t: f64) -> f64 {
    let g = hs + ht;
    4.0 * (one_minus_cos_moment(t, 2.0 * ht) + one_minus_cos_moment(s, 2.0 * hs)
        - one_minus_cos_moment(t, g)
        - one_minus_cos_moment(s, g)
        + one_minus_cos_moment((t - s).abs(), g))
}

fn kernel_increment_variance(hs: f64, ht: f64, s: f64, t: f64, kq: KernelQuadrature, ma: bool) -> f64 {
    let (at, as_) = (ht - 0.5, hs - 0.5);
    let (lgt, lgs) = (ln_gamma(ht + 0.5), ln_gamma(hs + 0.5));
    let delta = t - s;
    let gt = gamma(ht + 0.5);
    let mut total = delta.powf(2.0 * ht) / (2.0 * ht * gt * gt);

    // u in (0, s], measured by the distance d = s - u
    if s > 0.0 {
        let diff = |d: f64| -> f64 {
            let y = as_ * d.ln() - lgs;
            let x_minus_y = at * (delta / d).ln_1p() + (at - as_) * d.ln() - (lgt - lgs);
            y.exp() * x_minus_y.exp_m1()
        };
        for (lo, hi) in geometric_panels(s, delta, kq.q) {
            total += tanh_sinh(|_, dl, _| diff(lo + dl).powi(2), lo, hi, QUAD_TOL).value;
        }
    }
    // u in [-T_past, 0], measured by v = -u
    if ma {
        let (gs, gt) = (gamma(hs + 0.5), gamma(ht + 0.5));
        let diff = |v: f64| pow_diff(v, t, at) / gt - pow_diff(v, s, as_) / gs;
        for (lo, hi) in geometric_panels(kq.t_past, t, kq.q) {
            total += tanh_sinh(|_, dl, _| diff(lo + dl).powi(2), lo, hi, QUAD_TOL).value;
        }
    }
    total
}

/// Panels of `[0, end]` with edges at `scale·4^k`, each split into `q` pieces.
fn geometric_panels(end: f64, scale: f64, q: usize) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    let mut e = scale;
    while e < end {
        edges.push(e);
        e *= 4.0;
    }
    edges.push(end);
    let mut out = Vec::new();
    for w in edges.windows(2) {
        let step = (w[1] - w[0]) / q as f64;
        for i in 0..q {
            let lo = w[0] + i as f64 * step;
            let hi = if i + 1 == q { w[1] } else { lo + step };
            out.push((lo, hi));
        }
    }
    out
}

/// Bound on the increment variance neglected by truncating the moving average
/// at `-t_past`, from `|(t+v)^a - v^a| <= |a| t v^{a-1}`.
pub fn increment_tail_bound(h: &HurstFunction, s: f64, t: f64, t_past: f64) -> f64 {
    let term = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let a = h.at(x) - 0.5;
        let g = gamma(a + 1.0);
        let c = a.abs() * x / g;
        2.0 * c * c * t_past.powf(2.0 * a - 1.0) / (1.0 - 2.0 * a)
    };
    term(s) + term(t)
}

/// Covariance of `B(x), B(y)` from increment variances (`B(0) = 0`).
pub fn covariance_exact(
    h: &HurstFunction,
    x: f64,
    y: f64,
    kq: KernelQuadrature,
    rep: Representation,
) -> Result<f64> {
    let vx = increment_variance(h, 0.0, x, kq, rep)?;
    let vy = increment_variance(h, 0.0, y, kq, rep)?;
    let vxy = increment_variance(h, x, y, kq, rep)?;
    Ok(0.5 * (vx + vy - vxy))
}

/// `Var(B(target) | B(s), s ∈ past)` by the Schur complement.
pub fn conditional_variance(
    h: &HurstFunction,
    past: &[f64],
    target: f64,
    kq: KernelQuadrature,
    rep: Representation,
) -> Result<f64> {
    let pts: Vec<f64> = past.iter().cloned().filter(|&x| x > 0.0).collect();
    let m = pts.len();
    let var = increment_variance(h, 0.0, target, kq, rep)?;
    if m == 0 {
        return Ok(var);
    }
    let mut cov = vec![0.0; m * m];
    let mut c = vec![0.0; m];
    for i in 0..m {
        for j in 0..=i {
            let v = covariance_exact(h, pts[i], pts[j], kq, rep)?;
            cov[i * m + j] = v;
            cov[j * m + i] = v;
        }
        c[i] = covariance_exact(h, pts[i], target, kq, rep)?;
    }
    let (l, _, _) = cholesky(&cov, m).map_err(|(lo, hi)| Error::Synthesis {
        reason: "past covariance not positive definite".into(),
        min_pivot: lo,
        max_pivot: hi,
    })?;
    // solve L y = c; Var - |y|²
    let mut y = vec![0.0; m];
    for i in 0..m {
        let mut v = c[i];
        for k in 0..i {
            v -= l[i * m + k] * y[k];
        }
        y[i] = v / l[i * m + i];
    }
    Ok(var - y.iter().map(|v| v * v).sum::<f64>())
}

/// `1/(2νC²)` with `C = sup_{x ∈ [μ,ν]} Γ(x + 1/2)`.
pub fn lower_bound_constant(h: &HurstFunction) -> f64 {
    let c = gamma(h.mu + 0.5).max(gamma(h.nu + 0.5));
    1.0 / (2.0 * h.nu * c * c)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeterminantCheck {
    pub m: usize,
    pub tuples: usize,
    pub violations: usize,
    /// Smallest `det R / bound`.
    pub min_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub representation: Representation,
    pub interval: (f64, f64),
    pub pairs: usize,
    pub lower_constant: f64,
    pub lower_violations: usize,
    /// Smallest `Var / lower bound` over the pairs.
    pub min_lower_ratio: f64,
    /// Fitted `max Var / (t-s)^{2H(t)}`, overall and on the two halves of the pairs.
    pub upper_constant: f64,
    pub upper_constant_halves: (f64, f64),
    pub determinants: Vec<DeterminantCheck>,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.lower_violations + self.determinants.iter().map(|d| d.violations).sum::<usize>()
    }
}

/// Checks the increment-variance lower bound, fits the upper-bound constant,
/// and checks the determinant product bound for `m ∈ {2, 3}` with `s_0 = t`.
pub fn verify_variance_bounds(
    h: &HurstFunction,
    interval: (f64, f64),
    n_pairs: usize,
    kq: KernelQuadrature,
    rep: Representation,
    seed: u64,
) -> Result<BoundReport> {
    let (a, b) = interval;
    if !(a >= 0.0 && b > a) {
        return domain(format!("invalid interval [{a}, {b}]"));
    }
    if b > h.horizon * (1.0 + 1e-12) {
        return Err(Error::Range(format!("interval end {b} exceeds the hurst horizon {}", h.horizon)));
    }
    if n_pairs < 2 {
        return domain("need at least two pairs");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lc = lower_bound_constant(h);
    let mut ratios = Vec::with_capacity(n_pairs);
    let mut lower_violations = 0;
    let mut min_lower_ratio = f64::INFINITY;
    for _ in 0..n_pairs {
        let (mut s, mut t) = (rng.gen_range(a..b), rng.gen_range(a..b));
        if s > t {
            std::mem::swap(&mut s, &mut t);
        }
        if t - s < 1e-9 * (b - a) {
            t = (s + 1e-3 * (b - a)).min(b);
        }
        let v = increment_variance(h, s, t, kq, rep)?;
        let scale = (t - s).powf(2.0 * h.at(t));
        let r = v / (lc * scale);
        min_lower_ratio = min_lower_ratio.min(r);
        if r < 1.0 {
            lower_violations += 1;
        }
        ratios.push(v / scale);
    }
    let half = ratios.len() / 2;
    let max = |xs: &[f64]| xs.iter().cloned().fold(0.0, f64::max);

    let mut determinants = Vec::new();
    for m in [2usize, 3] {
        let mut check = DeterminantCheck {
            m,
            tuples: n_pairs,
            violations: 0,
            min_ratio: f64::INFINITY,
        };
        for _ in 0..n_pairs {
            let t0 = rng.gen_range(a..b);
            let mut s: Vec<f64> = (0..m).map(|_| rng.gen_range(t0..=b)).collect();
            s.sort_by(f64::total_cmp);
            s.dedup();
            if s.len() < m || s[0] <= t0 {
                continue;
            }
            let (det, bound) = determinant_and_bound(h, t0, &s, lc, kq, rep)?;
            let r = det / bound;
            check.min_ratio = check.min_ratio.min(r);
            if !(det >= bound) {
                check.violations += 1;
            }
        }
        determinants.push(check);
    }

    Ok(BoundReport {
        representation: rep,
        interval,
        pairs: n_pairs,
        lower_constant: lc,
        lower_violations,
        min_lower_ratio,
        upper_constant: max(&ratios),
        upper_constant_halves: (max(&ratios[..half]), max(&ratios[half..])),
        determinants,
    })
}

/// `det R(s_1..s_m)` of `B̃(s) = B(s) - B(t)` and the product bound
/// `∏ (s_j - s_{j-1})^{2H(s_j)} / (2νC²)^m` with `s_0 = t`.
pub fn determinant_and_bound(
    h: &HurstFunction,
    t: f64,
    s: &[f64],
    lower_constant: f64,
    kq: KernelQuadrature,
    rep: Representation,
) -> Result<(f64, f64)> {
    let m = s.len();
    let mut r = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let vi = increment_variance(h, t, s[i], kq, rep)?;
            let vj = increment_variance(h, t, s[j], kq, rep)?;
            let vij = increment_variance(h, s[i], s[j], kq, rep)?;
            let c = 0.5 * (vi + vj - vij);
            r[i * m + j] = c;
            r[j * m + i] = c;
        }
    }
    let mut bound = 1.0;
    let mut prev = t;
    for &sj in s {
        bound *= lower_constant * (sj - prev).powf(2.0 * h.at(sj));
        prev = sj;
    }
    Ok((determinant(&r, m), bound))
}

/// `Var B(1)` of the moving-average fBm, `1/(Γ(2H+1) sin πH)`.
pub fn moving_average_unit_variance(h: f64) -> f64 {
    1.0 / (gamma(2.0 * h + 1.0) * (PI * h).sin())
}
