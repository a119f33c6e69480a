use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How observed clump lengths are classified as singletons (order-one clumps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SingletonRule {
    /// `y` within `t0 (1 ± eps)`. Anything shorter is invalid under DSL.
    Band { eps: f64 },
    /// `y <= t0 (1 + eps)`. For noisy or random-segment data where clumps
    /// shorter than `t0` occur.
    AtMost { eps: f64 },
}

impl Default for SingletonRule {
    fn default() -> Self {
        SingletonRule::AtMost { eps: 1e-6 }
    }
}

impl SingletonRule {
    pub fn is_singleton(&self, y: f64, t0: f64) -> bool {
        match *self {
            SingletonRule::Band { eps } => (y - t0).abs() <= eps * t0,
            SingletonRule::AtMost { eps } => y <= t0 * (1.0 + eps),
        }
    }

    /// A length that is neither a singleton nor a valid multi-particle clump.
    pub fn is_invalid(&self, y: f64, t0: f64) -> bool {
        !self.is_singleton(y, t0) && y <= t0
    }
}

/// Summary statistics sufficient for the moment-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub m1: usize,
    pub ybar: f64,
    pub s2y: f64,
    /// Known mean segment length (`t0` under DSL).
    pub mu: f64,
}

impl SampleStats {
    pub fn new(n: usize, ybar: f64, s2y: f64, mu: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample must contain at least one clump".into()));
        }
        if !(ybar.is_finite() && s2y.is_finite() && s2y >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid moments ybar = {ybar}, s2y = {s2y}")));
        }
        crate::error::ensure_positive("mu", mu)?;
        Ok(Self { n, m1: 0, ybar, s2y, mu })
    }
}

/// Observed complete clumps from one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClumpSample {
    pub lengths: Vec<f64>,
    pub spacings: Option<Vec<f64>>,
    pub n: usize,
    pub m1: usize,
    pub ybar: f64,
    pub s2y: f64,
    pub mu: f64,
    pub singleton_rule: SingletonRule,
}

/// Mean and unbiased variance by Welford's recurrence.
pub(crate) fn welford(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = if xs.len() > 1 { m2 / (xs.len() - 1) as f64 } else { 0.0 };
    (mean, var)
}

impl ClumpSample {
    /// Builds a sample from clump lengths; `n`, `ybar`, `s2y` (divisor `n - 1`)
    /// and `m1` are derived.
    pub fn from_lengths(lengths: Vec<f64>, mu: f64, rule: SingletonRule) -> Result<Self> {
        crate::error::ensure_positive("mu", mu)?;
        if lengths.is_empty() {
            return Err(Error::InvalidArgument("sample must contain at least one clump".into()));
        }
        if let Some((i, y)) = lengths.iter().enumerate().find(|(_, y)| !(y.is_finite() && **y > 0.0)) {
            return Err(Error::Data(format!("clump length {i} is not positive: {y}")));
        }
        let (ybar, s2y) = welford(&lengths);
        let m1 = lengths.iter().filter(|&&y| rule.is_singleton(y, mu)).count();
        Ok(Self { n: lengths.len(), lengths, spacings: None, m1, ybar, s2y, mu, singleton_rule: rule })
    }

    pub fn with_spacings(mut self, spacings: Vec<f64>) -> Result<Self> {
        if spacings.len() != self.n {
            return Err(Error::InvalidArgument(format!("expected {} spacings, got {}", self.n, spacings.len())));
        }
        if spacings.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
            return Err(Error::Data("spacings must be nonnegative".into()));
        }
        self.spacings = Some(spacings);
        Ok(self)
    }

    pub fn stats(&self) -> SampleStats {
        SampleStats { n: self.n, m1: self.m1, ybar: self.ybar, s2y: self.s2y, mu: self.mu }
    }

    /// Checks that the stored summaries agree with the lengths.
    pub fn validate(&self) -> Result<()> {
        if self.n != self.lengths.len() {
            return Err(Error::Data(format!("n = {} but {} lengths", self.n, self.lengths.len())));
        }
        let (ybar, s2y) = welford(&self.lengths);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if !close(ybar, self.ybar) || !close(s2y, self.s2y) {
            return Err(Error::Data("stored ybar/s2y do not match lengths".into()));
        }
        if self.lengths.iter().any(|&y| y < 0.0) {
            return Err(Error::Data("negative clump length".into()));
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        crate::numerics::compensated_sum(&self.lengths)
    }
}
