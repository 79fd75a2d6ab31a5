//! Path synthesis for fBm and the three mBm representations.

pub mod fbm;
pub mod harmonizable;
pub mod kernel;
pub mod variance;

pub use fbm::{fbm_covariance, gen_fbm, FbmMethod, CHOLESKY_MAX_POINTS};
pub use harmonizable::{gen_mbm_harmonizable, harmonizable_variance, HarmonizablePlan};
pub use kernel::{
    gen_mbm_moving_average, gen_mbm_riemann_liouville, tail_mass_bound, KernelPlan,
    KernelQuadrature,
};
pub use variance::{
    conditional_variance, covariance_exact, determinant_and_bound, harmonizable_increment_variance,
    increment_tail_bound, increment_variance_exact, lower_bound_constant,
    moving_average_unit_variance, verify_variance_bounds, BoundReport, DeterminantCheck,
};

use crate::error::{domain, Result};
use crate::hurst::HurstFunction;
use crate::path::{Representation, SamplePath, TimeGrid};

/// Synthesis settings shared by all representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSettings {
    pub kq: KernelQuadrature,
    pub omega_max: f64,
    pub n_freq: usize,
    pub fbm_method: FbmMethod,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            kq: KernelQuadrature::default(),
            omega_max: harmonizable::DEFAULT_OMEGA_MAX,
            n_freq: harmonizable::DEFAULT_N_FREQ,
            fbm_method: FbmMethod::Circulant,
        }
    }
}

/// A generator prepared once for a grid and sampled per replica seed.
#[derive(Debug)]
pub enum Synthesizer {
    Kernel(KernelPlan),
    Harmonizable(HarmonizablePlan),
    Fbm {
        h: f64,
        grid: TimeGrid,
        method: FbmMethod,
    },
}

impl Synthesizer {
    pub fn new(
        h: &HurstFunction,
        grid: &TimeGrid,
        rep: Representation,
        settings: &SynthSettings,
    ) -> Result<Self> {
        Ok(match rep {
            Representation::MovingAverage | Representation::RiemannLiouville => {
                Synthesizer::Kernel(KernelPlan::new(h, grid, settings.kq, rep)?)
            }
            Representation::Harmonizable => Synthesizer::Harmonizable(HarmonizablePlan::new(
                h,
                grid,
                settings.omega_max,
                settings.n_freq,
            )?),
            Representation::FbmExact => {
                if !h.is_constant() {
                    return domain("fbm-exact synthesis requires a constant hurst function");
                }
                Synthesizer::Fbm {
                    h: h.mu,
                    grid: *grid,
                    method: settings.fbm_method,
                }
            }
        })
    }

    pub fn sample(&self, seed: u64) -> Result<SamplePath> {
        match self {
            Synthesizer::Kernel(p) => p.sample(seed),
            Synthesizer::Harmonizable(p) => p.sample(seed),
            Synthesizer::Fbm { h, grid, method } => gen_fbm(*h, grid, seed, *method),
        }
    }
}
