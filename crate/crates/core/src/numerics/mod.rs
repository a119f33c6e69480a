//! Shared numerical kernels.

pub mod ks;
pub mod normal;
pub mod quad;
pub mod rng;
pub mod root;
pub mod sum;

pub use ks::{ks_p_value, ks_statistic, ks_statistic_with_atoms};
pub use normal::{chi2_quantile_1df, norm_cdf, norm_pdf, norm_quantile, z_critical};
pub use quad::{adaptive_quadrature, integrate, QuadResult};
pub use rng::RandomStream;
pub use root::{find_root, RootBracket};
pub use sum::{compensated_sum, DoubleDouble, NeumaierSum, SignedLogSum};

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}
