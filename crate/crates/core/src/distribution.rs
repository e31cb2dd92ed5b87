//! Unit-mean primitive distributions for inter-arrival and service times.
//!
//! Every distribution here has mean exactly 1; the simulator scales draws
//! by `1/α_k` (inter-arrival) or `m_k` (service). The declared squared
//! coefficient of variation (SCV) is therefore the only free parameter.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gamma,
    Exponential,
    Deterministic,
    /// Two-phase hyperexponential with balanced means.
    #[serde(alias = "h2")]
    Hyperexponential2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    pub scv: f64,
}

impl DistributionSpec {
    pub fn gamma(scv: f64) -> Self {
        Self {
            family: Family::Gamma,
            scv,
        }
    }

    /// Gamma with shape `a`; its SCV is `1/a`.
    pub fn gamma_shape(shape: f64) -> Self {
        Self::gamma(1.0 / shape)
    }

    pub fn exponential() -> Self {
        Self {
            family: Family::Exponential,
            scv: 1.0,
        }
    }

    pub fn deterministic() -> Self {
        Self {
            family: Family::Deterministic,
            scv: 0.0,
        }
    }

    pub fn hyperexponential2(scv: f64) -> Self {
        Self {
            family: Family::Hyperexponential2,
            scv,
        }
    }

    /// Gamma shape parameter, if this is a gamma distribution.
    pub fn shape(&self) -> Option<f64> {
        (self.family == Family::Gamma).then(|| 1.0 / self.scv)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let c2 = self.scv;
        if !c2.is_finite() || c2 < 0.0 {
            return Err(format!("scv must be finite and nonnegative, got {c2}"));
        }
        match self.family {
            Family::Gamma if c2 <= 0.0 => Err("gamma requires scv > 0".into()),
            Family::Exponential if (c2 - 1.0).abs() > 1e-12 => {
                Err(format!("exponential has scv 1, got {c2}"))
            }
            Family::Deterministic if c2 != 0.0 => {
                Err(format!("deterministic has scv 0, got {c2}"))
            }
            Family::Hyperexponential2 if c2 < 1.0 => {
                Err(format!("hyperexponential-2 requires scv >= 1, got {c2}"))
            }
            _ => Ok(()),
        }
    }

    pub fn sampler(&self) -> Result<UnitSampler> {
        self.validate().map_err(Error::DistributionParameterInvalid)?;
        Ok(match self.family {
            Family::Gamma => {
                let shape = 1.0 / self.scv;
                let gamma = Gamma::new(shape, 1.0 / shape)
                    .map_err(|e| Error::DistributionParameterInvalid(e.to_string()))?;
                UnitSampler::Gamma(gamma)
            }
            Family::Exponential => UnitSampler::Exponential,
            Family::Deterministic => UnitSampler::Deterministic,
            Family::Hyperexponential2 => {
                let c2 = self.scv;
                let p = 0.5 * (1.0 + ((c2 - 1.0) / (c2 + 1.0)).sqrt());
                UnitSampler::Hyperexponential2 {
                    p,
                    rate1: 2.0 * p,
                    rate2: 2.0 * (1.0 - p),
                }
            }
        })
    }
}

/// A ready-to-draw unit-mean distribution.
#[derive(Debug, Clone)]
pub enum UnitSampler {
    Gamma(Gamma<f64>),
    Exponential,
    Deterministic,
    Hyperexponential2 { p: f64, rate1: f64, rate2: f64 },
}

impl UnitSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            UnitSampler::Gamma(g) => g.sample(rng),
            UnitSampler::Exponential => Exp1.sample(rng),
            UnitSampler::Deterministic => 1.0,
            UnitSampler::Hyperexponential2 { p, rate1, rate2 } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<f64>() < *p {
                    e / rate1
                } else {
                    e / rate2
                }
            }
        }
    }
}
