//! Opinion distributions used for the initial state and for mutation draws.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_GAMMA: f64 = 3.0;
pub const DEFAULT_X_MIN: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid distribution: {0}")]
pub struct DistributionError(pub String);

/// A distribution over opinions in [0, 1].
///
/// `PowerLaw` is a truncated Pareto law with density proportional to `x^-gamma`
/// on `[x_min, 1]`; the truncation is needed because the density diverges at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum DistributionSpec {
    Uniform,
    PowerLaw { gamma: f64, x_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Uniform,
    #[serde(alias = "power_law", alias = "powerlaw")]
    PowerLaw,
}

/// Config-file shape: `{ kind, gamma?, x_min? }`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_min: Option<f64>,
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = DistributionError;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        match raw.kind {
            Kind::Uniform if raw.gamma.is_some() || raw.x_min.is_some() => Err(DistributionError(
                "gamma and x_min only apply to kind = \"power-law\"".into(),
            )),
            Kind::Uniform => Ok(DistributionSpec::Uniform),
            Kind::PowerLaw => Ok(DistributionSpec::PowerLaw {
                gamma: raw.gamma.unwrap_or(DEFAULT_GAMMA),
                x_min: raw.x_min.unwrap_or(DEFAULT_X_MIN),
            }),
        }
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(spec: DistributionSpec) -> Self {
        match spec {
            DistributionSpec::Uniform => RawSpec {
                kind: Kind::Uniform,
                gamma: None,
                x_min: None,
            },
            DistributionSpec::PowerLaw { gamma, x_min } => RawSpec {
                kind: Kind::PowerLaw,
                gamma: Some(gamma),
                x_min: Some(x_min),
            },
        }
    }
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::Uniform
    }
}

impl DistributionSpec {
    /// Power law with the default exponent and truncation point.
    pub fn power_law() -> Self {
        DistributionSpec::PowerLaw {
            gamma: DEFAULT_GAMMA,
            x_min: DEFAULT_X_MIN,
        }
    }

    pub fn validate(&self) -> Result<(), DistributionError> {
        match *self {
            DistributionSpec::Uniform => Ok(()),
            DistributionSpec::PowerLaw { gamma, x_min } => {
                if !(gamma > 1.0 && gamma.is_finite()) {
                    return Err(DistributionError(format!("gamma must be > 1, got {gamma}")));
                }
                if !(x_min > 0.0 && x_min < 1.0) {
                    return Err(DistributionError(format!(
                        "x_min must be in (0,1), got {x_min}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Lower and upper end of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DistributionSpec::Uniform => (0.0, 1.0),
            DistributionSpec::PowerLaw { x_min, .. } => (x_min, 1.0),
        }
    }

    /// Maps `u` in [0, 1] to the distribution's quantile.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match *self {
            DistributionSpec::Uniform => u,
            DistributionSpec::PowerLaw { gamma, x_min } => {
                let e = 1.0 - gamma;
                let lo = x_min.powf(e);
                let x = (lo - u * (lo - 1.0)).powf(1.0 / e);
                x.clamp(x_min, 1.0)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            DistributionSpec::Uniform => x,
            DistributionSpec::PowerLaw { gamma, x_min } => {
                let e = 1.0 - gamma;
                let lo = x_min.powf(e);
                (lo - x.powf(e)) / (lo - 1.0)
            }
        }
    }

    /// One draw. Consumes exactly one `f64` from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.inverse_cdf(rng.random::<f64>())
    }

    /// `n` independent draws; element `i` is the `i`-th draw from `rng`.
    pub fn sample_vector<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Uniform => write!(f, "uniform"),
            DistributionSpec::PowerLaw { gamma, x_min } => {
                write!(f, "power-law(gamma={gamma}, x_min={x_min})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn power_law_endpoints() {
        let spec = DistributionSpec::PowerLaw {
            gamma: 3.0,
            x_min: 0.01,
        };
        assert!((spec.inverse_cdf(0.0) - 0.01).abs() < 1e-15);
        assert!((spec.inverse_cdf(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_inverts_quantile() {
        let spec = DistributionSpec::power_law();
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            assert!((spec.cdf(spec.inverse_cdf(u)) - u).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn validation() {
        assert!(DistributionSpec::Uniform.validate().is_ok());
        assert!(DistributionSpec::power_law().validate().is_ok());
        for (gamma, x_min) in [(1.0, 0.01), (0.5, 0.01), (3.0, 0.0), (3.0, 1.0), (f64::NAN, 0.1)] {
            assert!(DistributionSpec::PowerLaw { gamma, x_min }.validate().is_err());
        }
    }

    #[test]
    fn sample_vector_matches_sequential_draws() {
        let spec = DistributionSpec::Uniform;
        let v = spec.sample_vector(1, &mut seeded_rng(5));
        assert_eq!(v[0], spec.sample(&mut seeded_rng(5)));

        let a = DistributionSpec::power_law().sample_vector(500, &mut seeded_rng(9));
        let b = DistributionSpec::power_law().sample_vector(500, &mut seeded_rng(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| (0.01..=1.0).contains(&x)));
    }

    #[test]
    fn serde_shape() {
        #[derive(Deserialize, Serialize, Debug, PartialEq)]
        struct Wrap {
            distribution: DistributionSpec,
        }
        let w: Wrap = toml::from_str(r#"distribution = { kind = "power-law", gamma = 2.5 }"#).unwrap();
        assert_eq!(
            w.distribution,
            DistributionSpec::PowerLaw {
                gamma: 2.5,
                x_min: DEFAULT_X_MIN
            }
        );
        let w: Wrap = toml::from_str(r#"distribution = { kind = "uniform" }"#).unwrap();
        assert_eq!(w.distribution, DistributionSpec::Uniform);
        assert!(toml::from_str::<Wrap>(r#"distribution = { kind = "uniform", gamma = 2.0 }"#).is_err());
        assert!(toml::from_str::<Wrap>(r#"distribution = { kind = "normal" }"#).is_err());
    }
}
