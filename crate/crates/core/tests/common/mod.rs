//! Independent numerical oracles for integration tests.
#![allow(dead_code)]

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Tanh-sinh rule on `[0, 1]`; `f` receives `(x, 1 - x)` so both ends stay accurate.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, step: f64, t_max: f64) -> f64 {
    let k = (t_max / step).ceil() as i64;
    let mut s = 0.0;
    for i in -k..=k {
        let t = i as f64 * step;
        let u = std::f64::consts::PI * t.sinh();
        let (x, y) = (1.0 / (1.0 + (-u).exp()), 1.0 / (1.0 + u.exp()));
        if x == 0.0 || y == 0.0 {
            continue;
        }
        s += f(x, y) * std::f64::consts::PI * t.cosh() * x * y;
    }
    s * step
}

/// `∫_{0<s_1<…<s_m<len} ∏ (s_j - s_{j-1})^{-b_j} ds` by nested quadrature.
///
/// Each layer substitutes `s = len·v^{1/(1-b)}`, which removes the singularity
/// at the lower end; tanh-sinh handles the algebraic behaviour at the upper end.
pub fn nested_dirichlet(b: &[f64], len: f64) -> f64 {
    if b.is_empty() {
        return 1.0;
    }
    let (b0, rest) = (b[0], &b[1..]);
    let e = 1.0 / (1.0 - b0);
    let inner = |_v: f64, one_minus_v: f64| {
        // 1 - v^e without cancellation
        let rem = -(e * (-one_minus_v).ln_1p()).exp_m1();
        nested_dirichlet(rest, len * rem)
    };
    len.powf(1.0 - b0) * e * tanh_sinh(inner, 1.0 / 24.0, 3.5)
}
