mod common;

use common::{nested_dirichlet, simpson};
use mbm_core::localtime::{abs_normal_moment, dirichlet_integral};
use mbm_core::regularity::v_constant;
use mbm_core::{Representation, VGrouping};

#[test]
fn dirichlet_matches_nested_quadrature() {
    for (b, len) in [
        (vec![0.3], 1.0),
        (vec![0.3, 0.2], 0.7),
        (vec![0.5, -0.4, 0.25], 2.0),
        (vec![0.1, 0.1, 0.1], 1.5),
    ] {
        let closed = dirichlet_integral(&b, len).unwrap();
        let quad = nested_dirichlet(&b, len);
        assert!((closed - quad).abs() < 1e-8 * closed, "{b:?}: {closed} vs {quad}");
    }
}

#[test]
fn absolute_normal_moments_match_density_quadrature() {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for m in 1..=6u32 {
        let quad = 2.0 * simpson(|x| x.powi(m as i32) * phi(x), 0.0, 12.0, 4000);
        assert!((abs_normal_moment(m) - quad).abs() < 1e-9, "m = {m}");
    }
}

#[test]
fn brownian_lil_constant_is_one() {
    let v = v_constant(0.5, Representation::MovingAverage, VGrouping::Printed).unwrap();
    assert!((v - 1.0).abs() < 1e-9, "{v}");
    let v = v_constant(0.5, Representation::Harmonizable, VGrouping::Printed).unwrap();
    assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9, "{v}");
}
