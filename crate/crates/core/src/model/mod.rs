//! Probability laws of the simple linear Boolean model.
//!
//! Particles arrive as a homogeneous Poisson process of rate `lambda`; each
//! blocks the sensor for a segment of length drawn from a [`SegmentLaw`].
//! Overlapping segments merge into clumps (busy periods of an M/G/∞ queue).

mod density;
mod moments;
mod renewal;

pub use density::{
    clump_cdf, clump_density, clump_density_given_multi, clump_density_terms, order_threshold, singleton_mass,
    ClumpLengthDist, DensityTerms,
};
pub use moments::{laplace_transform_clump, mean_clump_length, var_clump_length_dsl, var_clump_length_rsl};
pub use renewal::{
    clump_order_mean, clump_order_pmf, clump_order_variance, expected_clump_count, renewal_moments,
    variance_clump_count, RenewalMoments,
};

use crate::error::{ensure_positive, Error, Result};
use crate::numerics::norm_cdf;
use serde::{Deserialize, Serialize};

/// Distribution of the time a single particle occupies the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentLaw {
    /// Every particle blocks for exactly `t0`.
    Deterministic { t0: f64 },
    /// Normal segment lengths with mean `mu` and sd `sigma`, truncated at zero.
    RandomNormal { mu: f64, sigma: f64 },
}

impl SegmentLaw {
    pub fn deterministic(t0: f64) -> Result<Self> {
        ensure_positive("t0", t0)?;
        Ok(SegmentLaw::Deterministic { t0 })
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        ensure_positive("mu", mu)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
        }
        Ok(SegmentLaw::RandomNormal { mu, sigma })
    }

    /// Normal law with `sigma == 0` collapsed to the deterministic law.
    pub fn canonical(self) -> Self {
        match self {
            SegmentLaw::RandomNormal { mu, sigma: 0.0 } => SegmentLaw::Deterministic { t0: mu },
            other => other,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SegmentLaw::Deterministic { t0 } => t0,
            SegmentLaw::RandomNormal { mu, .. } => mu,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.canonical(), SegmentLaw::Deterministic { .. })
    }

    /// `1 - G(x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match self.canonical() {
            SegmentLaw::Deterministic { t0 } => {
                if x < t0 {
                    1.0
                } else {
                    0.0
                }
            }
            SegmentLaw::RandomNormal { mu, sigma } => {
                if x <= 0.0 {
                    return 1.0;
                }
                let lower = norm_cdf(-mu / sigma);
                let upper_tail = norm_cdf((mu - x) / sigma);
                (upper_tail / (1.0 - lower)).min(1.0)
            }
        }
    }

    /// A point beyond which `1 - G` is negligible (below ~1e-20).
    pub fn support_end(&self) -> f64 {
        match self.canonical() {
            SegmentLaw::Deterministic { t0 } => t0,
            SegmentLaw::RandomNormal { mu, sigma } => mu + 9.5 * sigma,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            SegmentLaw::Deterministic { t0 } => ensure_positive("t0", t0),
            SegmentLaw::RandomNormal { mu, sigma } => {
                ensure_positive("mu", mu)?;
                if sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")))
                }
            }
        }
    }
}

/// Flow intensity, segment law, and (for simulation) the observation horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub segments: SegmentLaw,
    pub horizon: Option<f64>,
}

impl ModelParams {
    pub fn new(lambda: f64, segments: SegmentLaw, horizon: Option<f64>) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        segments.validate()?;
        if let Some(t) = horizon {
            ensure_positive("horizon", t)?;
        }
        Ok(Self { lambda, segments, horizon })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_deterministic() {
        let law = SegmentLaw::normal(5.0, 0.0).unwrap();
        assert_eq!(law.canonical(), SegmentLaw::Deterministic { t0: 5.0 });
        assert_eq!(law.survival(4.999), 1.0);
        assert_eq!(law.survival(5.0), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SegmentLaw::deterministic(0.0).is_err());
        assert!(SegmentLaw::normal(5.0, -1.0).is_err());
        assert!(ModelParams::new(0.0, SegmentLaw::Deterministic { t0: 1.0 }, None).is_err());
        assert!(ModelParams::new(0.1, SegmentLaw::Deterministic { t0: 1.0 }, Some(-3.0)).is_err());
    }

    #[test]
    fn normal_survival_is_half_at_mean() {
        let law = SegmentLaw::normal(5.0, 1.0).unwrap();
        assert!((law.survival(5.0) - 0.5).abs() < 1e-6);
        assert!(law.survival(law.support_end()) < 1e-20);
    }
}
