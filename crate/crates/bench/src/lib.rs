//! Benchmark fixtures shared by the criterion targets.

use mbm_core::hurst::{HurstFunction, HurstKind};

pub fn sinusoidal_hurst() -> HurstFunction {
    HurstFunction::new(
        HurstKind::Sinusoidal {
            mean: 0.5,
            amplitude: 0.2,
            omega: std::f64::consts::TAU,
            phase: 0.0,
        },
        1.0,
    )
    .expect("valid hurst function")
}
