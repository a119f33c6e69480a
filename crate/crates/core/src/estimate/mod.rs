//! Point and interval estimation of the flow intensity from observed clumps.

mod m_est;
mod mle;
mod sample;

pub use m_est::{
    m_estimate, m_estimate_stats, sandwich_components, se_m_dsl, se_m_general, singleton_mom, solve_m_equation,
};
pub use mle::{mle_dsl, partial_log_likelihood, MleOptions};
pub(crate) use sample::welford;
pub use sample::{ClumpSample, SampleStats, SingletonRule};

use crate::error::{Error, Result};
use crate::numerics::z_critical;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "M")]
    M,
    #[serde(rename = "MLE")]
    Mle,
    #[serde(rename = "SingletonMOM")]
    SingletonMom,
}

/// Which asymptotic standard error a Wald interval uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeKind {
    /// Model-based, assumes deterministic segments.
    Dsl,
    /// Sandwich form using the sample variance of clump lengths.
    General,
}

/// Result of one estimator applied to one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub lambda_hat: f64,
    pub se_dsl: Option<f64>,
    pub se_g: Option<f64>,
    /// 95% Wald interval from `se_g`.
    pub ci_wald: Option<(f64, f64)>,
    /// 95% Wald interval from `se_dsl`.
    pub ci_wald_dsl: Option<(f64, f64)>,
    /// 95% likelihood-ratio interval (MLE only).
    pub ci_lrt: Option<(f64, f64)>,
    pub diagnostics: BTreeMap<String, String>,
}

impl EstimateReport {
    pub(crate) fn new(method: Method, lambda_hat: f64) -> Self {
        Self {
            method,
            lambda_hat,
            se_dsl: None,
            se_g: None,
            ci_wald: None,
            ci_wald_dsl: None,
            ci_lrt: None,
            diagnostics: BTreeMap::new(),
        }
    }

    pub(crate) fn note(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.insert(key.to_string(), value.to_string());
    }
}

/// `lambda_hat ± z_{(1+level)/2} SE`.
pub fn wald_interval(report: &EstimateReport, level: f64, which: SeKind) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level must be in (0, 1), got {level}")));
    }
    let se = match which {
        SeKind::Dsl => report.se_dsl,
        SeKind::General => report.se_g,
    }
    .ok_or_else(|| Error::InvalidArgument(format!("report has no {which:?} standard error")))?;
    let half = z_critical(level) * se;
    Ok((report.lambda_hat - half, report.lambda_hat + half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wald_arithmetic() {
        let mut r = EstimateReport::new(Method::M, 0.070);
        r.se_g = Some(0.003);
        let (lo, hi) = wald_interval(&r, 0.95, SeKind::General).unwrap();
        assert!((lo - 0.064_120).abs() < 1e-6 && (hi - 0.075_880).abs() < 1e-6);
        assert!(wald_interval(&r, 0.95, SeKind::Dsl).is_err());
    }

    #[test]
    fn wald_width_grows_with_level() {
        let mut r = EstimateReport::new(Method::M, 0.1);
        r.se_dsl = Some(0.01);
        let mut prev = 0.0;
        for i in 1..1000 {
            let (lo, hi) = wald_interval(&r, i as f64 / 1000.0, SeKind::Dsl).unwrap();
            assert!(hi - lo > prev);
            prev = hi - lo;
        }
        assert!(prev > 0.06);
    }

    #[test]
    fn report_json_field_names() {
        let mut r = EstimateReport::new(Method::SingletonMom, 0.3);
        r.ci_lrt = Some((0.2, 0.4));
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["method", "lambda_hat", "se_dsl", "se_g", "ci_wald", "ci_lrt"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["method"], "SingletonMOM");
        assert_eq!(v["ci_lrt"], serde_json::json!([0.2, 0.4]));
    }
}
