//! Special functions, quadrature and interpolation helpers shared by the
//! synthesis and verification code.

use std::f64::consts::{FRAC_PI_2, PI};

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `(x + w)^p - x^p` for `x, w >= 0`, without cancellation when `w << x`.
pub fn pow_diff(x: f64, w: f64, p: f64) -> f64 {
    if x == 0.0 {
        return w.powf(p);
    }
    x.powf(p) * (p * (w / x).ln_1p()).exp_m1()
}

/// `∫_lo^hi (d)^(p-1) dd` with `lo = d0`, `hi = d0 + w`, i.e. the primitive of a
/// power kernel over a cell at distance `d0` from the singular point.
pub fn power_cell_integral(d0: f64, w: f64, a: f64) -> f64 {
    let p = a + 1.0;
    pow_diff(d0, w, p) / p
}

/// `∫_0^∞ (1 - cos(c ξ)) ξ^{-γ-1} dξ` for `0 < γ < 2`, `c >= 0`.
pub fn one_minus_cos_moment(c: f64, gamma_exp: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    c.powf(gamma_exp) * PI / (2.0 * gamma(gamma_exp + 1.0) * (PI * gamma_exp / 2.0).sin())
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Tanh-sinh (double exponential) quadrature on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are computed
/// without cancellation so integrable endpoint singularities can be evaluated
/// in terms of the distance to the singular point.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> Quadrature
where
    F: Fn(f64, f64, f64) -> f64,
{
    assert!(b >= a, "tanh_sinh: empty interval");
    if b == a {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
    }
    let half = 0.5 * (b - a);
    let t_max = 6.5;
    let mut evals = 0usize;

    let eval = |t: f64, evals: &mut usize| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let cs = s.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cs * cs);
        // 1 - |tanh(s)| computed directly
        let comp = 1.0 / (s.abs().exp() * cs);
        if comp == 0.0 || w == 0.0 {
            return 0.0;
        }
        let d = half * comp;
        let (x, dl, dr) = if t < 0.0 {
            (a + d, d, 2.0 * half - d)
        } else {
            (b - d, 2.0 * half - d, d)
        };
        *evals += 1;
        let v = f(x, dl, dr);
        if v.is_finite() {
            v * w
        } else {
            0.0
        }
    };

    let mut h = 1.0;
    let mut sum = eval(0.0, &mut evals);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t, &mut evals) + eval(-t, &mut evals);
        k += 1;
    }
    let mut estimate = half * h * sum;
    let mut error = f64::INFINITY;
    for _level in 0..12 {
        h *= 0.5;
        let mut k = 1;
        let mut add = 0.0;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            add += eval(t, &mut evals) + eval(-t, &mut evals);
            k += 2;
        }
        sum += add;
        let next = half * h * sum;
        error = (next - estimate).abs();
        estimate = next;
        if error <= tol * estimate.abs().max(1e-300) && _level >= 2 {
            break;
        }
    }
    Quadrature {
        value: estimate,
        error,
        evaluations: evals,
    }
}

/// Tanh-sinh over `[a, ∞)`: `[a, a+1]` directly and the tail through `x = a + 1/v`.
/// The integrand receives the distance `x - a` (exact, possibly huge).
pub fn tanh_sinh_half_line<F>(f: F, tol: f64) -> Quadrature
where
    F: Fn(f64) -> f64,
{
    let head = tanh_sinh(|_, d, _| f(d), 0.0, 1.0, tol);
    let tail = tanh_sinh(
        |_, v, _| {
            if v == 0.0 {
                0.0
            } else {
                f(1.0 / v) / (v * v)
            }
        },
        0.0,
        1.0,
        tol,
    );
    Quadrature {
        value: head.value + tail.value,
        error: head.error + tail.error,
        evaluations: head.evaluations + tail.evaluations,
    }
}

/// Chebyshev points of the second kind on `[lo, hi]`, in increasing order.
pub fn chebyshev_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|j| {
            let c = -(PI * j as f64 / (n - 1) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * c
        })
        .collect()
}

/// Lagrange basis values `ℓ_j(x)` for Chebyshev points of the second kind,
/// evaluated with the barycentric formula.
pub fn chebyshev_basis(nodes: &[f64], x: f64, out: &mut [f64]) {
    let n = nodes.len();
    debug_assert_eq!(out.len(), n);
    if n == 1 {
        out[0] = 1.0;
        return;
    }
    for (j, &xj) in nodes.iter().enumerate() {
        if x == xj {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[j] = 1.0;
            return;
        }
    }
    let mut total = 0.0;
    for j in 0..n {
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            w *= 0.5;
        }
        let v = w / (x - nodes[j]);
        out[j] = v;
        total += v;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Number of Chebyshev nodes needed to interpolate `exp(s·ℓ)` over a parameter
/// interval of half-width `half_width` when `|ℓ| <= log_range`, to relative
/// accuracy `tol`.
pub fn nodes_for_exponential(half_width: f64, log_range: f64, tol: f64) -> usize {
    if half_width <= 0.0 {
        return 1;
    }
    let r = half_width * log_range.max(1.0);
    // Bernstein-type bound: 2 (r/2)^J / J! * e^{r}
    let mut term = 2.0 * r.exp();
    for j in 1..64 {
        term *= r / 2.0 / j as f64;
        if term < tol && j >= 2 {
            return j + 1;
        }
    }
    64
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix
/// stored row-major. Returns the factor and the smallest/largest pivot.
pub fn cholesky(a: &[f64], n: usize) -> Result<(Vec<f64>, f64, f64), (f64, f64)> {
    let mut l = vec![0.0; n * n];
    let mut min_p = f64::INFINITY;
    let mut max_p: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                min_p = min_p.min(s);
                max_p = max_p.max(s);
                if s <= 0.0 || !s.is_finite() {
                    return Err((min_p, max_p));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok((l, min_p, max_p))
}

/// Determinant of a small dense matrix by Gaussian elimination with partial pivoting.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs()))
            .unwrap();
        if m[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                m.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        let piv = m[c * n + c];
        det *= piv;
        for r in c + 1..n {
            let f = m[r * n + c] / piv;
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_diff_small_increment() {
        let x: f64 = 0.5;
        let w = 1e-12;
        let p = 1.2;
        let exact = p * x.powf(p - 1.0) * w;
        assert!((pow_diff(x, w, p) - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let q = tanh_sinh(|_, d, _| d.powf(-0.5), 0.0, 1.0, 1e-12);
        assert!((q.value - 2.0).abs() < 1e-10, "{}", q.value);
        // singular at the right end
        let q = tanh_sinh(|_, _, d| d.powf(-0.7), 0.0, 2.0, 1e-12);
        let exact = 2f64.powf(0.3) / 0.3;
        assert!((q.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn half_line_power_tail() {
        // ∫_0^∞ 1/(1+x)^2 = 1
        let q = tanh_sinh_half_line(|x| 1.0 / ((1.0 + x) * (1.0 + x)), 1e-12);
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn one_minus_cos_matches_quadrature() {
        // γ = 1: π/2
        assert!((one_minus_cos_moment(1.0, 1.0) - PI / 2.0).abs() < 1e-14);
        let g = 1.4;
        let q = tanh_sinh_half_line(|x| (1.0 - x.cos()) * x.powf(-g - 1.0), 1e-10);
        // oscillatory tail converges slowly; a loose check is enough here
        assert!((q.value - one_minus_cos_moment(1.0, g)).abs() < 1e-3);
    }

    #[test]
    fn chebyshev_interpolates_exponential() {
        let nodes = chebyshev_nodes(0.3, 0.7, nodes_for_exponential(0.2, 10.0, 1e-12));
        let f = |h: f64| (10.0 * h).exp();
        let mut basis = vec![0.0; nodes.len()];
        for &x in &[0.31, 0.45, 0.6999] {
            chebyshev_basis(&nodes, x, &mut basis);
            let v: f64 = nodes.iter().zip(&basis).map(|(n, b)| f(*n) * b).sum();
            assert!((v - f(x)).abs() < 1e-11 * f(x));
        }
    }

    #[test]
    fn determinant_and_cholesky_agree() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let (l, _, _) = cholesky(&a, 3).unwrap();
        let d: f64 = (0..3).map(|i| l[i * 3 + i]).product::<f64>().powi(2);
        assert!((d - determinant(&a, 3)).abs() < 1e-12);
    }
}
