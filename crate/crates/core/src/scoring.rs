//! Positively oriented scoring rules for Gaussian predictive laws and the
//! averaged leave-one-out criterion built from them.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{GpError, Result};
use crate::loo::LooMoments;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringRule {
    /// `−(μ − z)²`; proper but not strictly proper on Gaussian laws.
    Press,
    /// `log f(z)` for the Gaussian density `f`.
    LogDensity,
    /// Negated continuous ranked probability score.
    Crps,
}

impl ScoringRule {
    pub const ALL: [ScoringRule; 3] = [ScoringRule::Press, ScoringRule::LogDensity, ScoringRule::Crps];

    pub fn name(self) -> &'static str {
        match self {
            ScoringRule::Press => "press",
            ScoringRule::LogDensity => "log-density",
            ScoringRule::Crps => "crps",
        }
    }
}

impl std::fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScoringRule {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "press" | "mse" => Ok(ScoringRule::Press),
            "log-density" | "lpd" | "logpd" => Ok(ScoringRule::LogDensity),
            "crps" => Ok(ScoringRule::Crps),
            other => Err(GpError::InvalidInput(format!("unknown scoring rule `{other}`"))),
        }
    }
}

/// Criterion value with its partials in the leave-one-out moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGradient {
    pub value: f64,
    pub d_mu: Vec<f64>,
    pub d_sigma2: Vec<f64>,
}

#[inline]
pub(crate) fn std_normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn std_normal_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

fn check_variance(rule: ScoringRule, sigma2: f64) -> Result<()> {
    if rule != ScoringRule::Press && !(sigma2 > 0.0) {
        return Err(GpError::Domain(sigma2));
    }
    Ok(())
}

/// `S(N(mu, sigma2), z)`; larger is better.
pub fn score_point(rule: ScoringRule, mu: f64, sigma2: f64, z: f64) -> Result<f64> {
    check_variance(rule, sigma2)?;
    let r = z - mu;
    Ok(match rule {
        ScoringRule::Press => -r * r,
        ScoringRule::LogDensity => -0.5 * (LN_2PI + sigma2.ln()) - r * r / (2.0 * sigma2),
        ScoringRule::Crps => {
            let sigma = sigma2.sqrt();
            let u = r / sigma;
            -sigma * (u * (2.0 * std_normal_cdf(u) - 1.0) + 2.0 * std_normal_pdf(u) - FRAC_1_SQRT_PI)
        }
    })
}

/// `(∂S/∂mu, ∂S/∂sigma2)`.
pub fn score_point_grad(rule: ScoringRule, mu: f64, sigma2: f64, z: f64) -> Result<(f64, f64)> {
    check_variance(rule, sigma2)?;
    let r = z - mu;
    Ok(match rule {
        ScoringRule::Press => (2.0 * r, 0.0),
        ScoringRule::LogDensity => (r / sigma2, 0.5 * (r * r / sigma2 - 1.0) / sigma2),
        ScoringRule::Crps => {
            let sigma = sigma2.sqrt();
            let u = r / sigma;
            // S = −σ g(u) with g'(u) = 2Φ(u) − 1.
            let d_mu = 2.0 * std_normal_cdf(u) - 1.0;
            let d_sigma = FRAC_1_SQRT_PI - 2.0 * std_normal_pdf(u);
            (d_mu, d_sigma / (2.0 * sigma))
        }
    })
}

/// `L = (1/n) Σ_i S(N(μ_i, σ_i²), Z_i)` together with `∂L/∂μ` and `∂L/∂σ²`.
pub fn criterion(rule: ScoringRule, moments: &LooMoments, z: &[f64]) -> Result<ScoreGradient> {
    let n = z.len();
    if moments.mu.len() != n || moments.sigma2.len() != n {
        return Err(GpError::DimensionMismatch {
            context: "moments vs observations",
            expected: n,
            found: moments.mu.len().min(moments.sigma2.len()),
        });
    }
    if n == 0 {
        return Err(GpError::InvalidInput("empty criterion".into()));
    }
    let scale = 1.0 / n as f64;
    let mut value = 0.0;
    let mut d_mu = Vec::with_capacity(n);
    let mut d_sigma2 = Vec::with_capacity(n);
    for i in 0..n {
        let (mu, s2, zi) = (moments.mu[i], moments.sigma2[i], z[i]);
        let wrap = |e: GpError| GpError::DegenerateScore { index: i, reason: e.to_string() };
        value += score_point(rule, mu, s2, zi).map_err(wrap)?;
        let (gm, gs) = score_point_grad(rule, mu, s2, zi).map_err(wrap)?;
        d_mu.push(gm * scale);
        d_sigma2.push(gs * scale);
    }
    Ok(ScoreGradient { value: value * scale, d_mu, d_sigma2 })
}
