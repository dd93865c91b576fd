//! Experiment configuration: JSON in, validated structs out.

use crate::continuation::SweepProtocol;
use crate::error::{Error, Result};
use crate::mesh::{DomainSpec, PartitionRule};
use crate::solve::ProblemParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub rule: PartitionRule,
    pub alpha: f64,
}

/// Scale reference for relative λ-grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    /// Multiples of λ₁^s.
    Lambda1s,
    /// Multiples of the scalar supersolution feasibility bound.
    FeasibilityBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    Linear,
    Geometric,
}

/// A λ-grid: either explicit values or lo/hi/count with optional scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub spacing: Option<GridSpacing>,
    #[serde(default)]
    pub relative_to: Option<GridScale>,
}

impl GridSpec {
    /// Materializes the grid; `scale` resolves relative specifications.
    pub fn resolve(&self, scale: f64) -> Result<Vec<f64>> {
        if let Some(values) = &self.values {
            if values.is_empty() {
                return Err(Error::invalid_param("lambda_grid.values", "must be nonempty"));
            }
            return Ok(values.clone());
        }
        let lo = self
            .lo
            .ok_or_else(|| Error::invalid_param("lambda_grid.lo", "missing"))?;
        let hi = self
            .hi
            .ok_or_else(|| Error::invalid_param("lambda_grid.hi", "missing"))?;
        let count = self.count.unwrap_or(10);
        if count < 1 {
            return Err(Error::invalid_param("lambda_grid.count", "must be >= 1"));
        }
        let factor = if self.relative_to.is_some() { scale } else { 1.0 };
        let (lo, hi) = (lo * factor, hi * factor);
        if !(hi > lo) && count > 1 {
            return Err(Error::invalid_param(
                "lambda_grid",
                format!("needs hi > lo, got [{lo}, {hi}]"),
            ));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        Ok(match self.spacing.unwrap_or(GridSpacing::Linear) {
            GridSpacing::Linear => crate::continuation::linear_grid(lo, hi, count),
            GridSpacing::Geometric => {
                if lo <= 0.0 {
                    return Err(Error::invalid_param(
                        "lambda_grid.lo",
                        "geometric spacing needs lo > 0",
                    ));
                }
                crate::continuation::geometric_grid(lo, hi, count)
            }
        })
    }
}

fn default_seed() -> u64 {
    0
}

fn default_tol() -> Tolerances {
    Tolerances::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub newton: f64,
    pub monotone_increment: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton: 1e-10,
            monotone_increment: 1e-10,
        }
    }
}

/// Top-level experiment configuration. Round-trips through JSON bit-exactly
/// (floats use shortest round-trip formatting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub partition: PartitionConfig,
    pub problem: ProblemParams,
    #[serde(default)]
    pub lambda_grid: Option<GridSpec>,
    /// α list for sweeps (strictly increasing).
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    /// Λ-bracket resolution as a fraction of λ₁^s.
    #[serde(default)]
    pub lambda_star_resolution: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepProtocol>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        self.domain
            .validate()
            .map_err(|e| Error::invalid_param("domain", e.to_string()))?;
        let boundary = self.domain.boundary_measure();
        if !(self.partition.alpha > 0.0) {
            return Err(Error::invalid_param(
                "partition.alpha",
                "must be positive (|Σ_D| > 0 is required)",
            ));
        }
        if self.partition.alpha > boundary {
            return Err(Error::invalid_param(
                "partition.alpha",
                format!("exceeds the boundary measure {boundary}"),
            ));
        }
        self.problem
            .validate(self.domain.dim())
            .map_err(|e| Error::invalid_param("problem", e.to_string()))?;
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() {
                return Err(Error::invalid_param("alphas", "must be nonempty"));
            }
            if !alphas.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::invalid_param(
                    "alphas",
                    "must be strictly increasing (nested family)",
                ));
            }
            if alphas[0] <= 0.0 || *alphas.last().unwrap() > boundary {
                return Err(Error::invalid_param(
                    "alphas",
                    format!("must lie in (0, {boundary}]"),
                ));
            }
        }
        if let Some(res) = self.lambda_star_resolution {
            if !(res > 0.0) {
                return Err(Error::invalid_param(
                    "lambda_star_resolution",
                    "must be positive",
                ));
            }
        }
        if !(self.tolerances.newton > 0.0 && self.tolerances.monotone_increment > 0.0) {
            return Err(Error::invalid_param("tolerances", "must be positive"));
        }
        Ok(())
    }

    /// A small 1D configuration used by `verify` when no config is given.
    pub fn default_verify() -> Self {
        ExperimentConfig {
            domain: DomainSpec::interval(1.0, 101),
            partition: PartitionConfig {
                rule: PartitionRule::GrowFromLeft,
                alpha: 1.0,
            },
            problem: ProblemParams {
                lambda: 0.1,
                q: 0.5,
                r: 2.0,
                s: 0.75,
            },
            lambda_grid: None,
            alphas: None,
            lambda_star_resolution: None,
            sweep: None,
            seed: 42,
            tolerances: Tolerances::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig::default_verify()
    }

    #[test]
    fn round_trip_bit_exact() {
        let mut cfg = sample();
        cfg.problem.lambda = 0.1 + 0.2; // a value with a non-terminating binary tail
        cfg.partition.alpha = 1.0 / 3.0;
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
        // Second generation is byte-identical.
        assert_eq!(text, back.to_json());
    }

    #[test]
    fn alpha_zero_rejected_with_field_path() {
        let mut cfg = sample();
        cfg.partition.alpha = 0.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("partition.alpha"), "{err}");
        assert!(err.contains("Σ_D") || err.contains("positive"), "{err}");
    }

    #[test]
    fn invalid_r_in_2d_rejected() {
        let mut cfg = sample();
        cfg.domain = DomainSpec::rectangle(1.0, 1.0, 9, 9);
        cfg.partition.alpha = 2.0;
        cfg.partition.rule = PartitionRule::GrowFromCorner;
        cfg.problem.r = 7.5; // above (2+2s)/(2-2s) = 7 at s = 0.75
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("problem"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut text = sample().to_json();
        text = text.replacen("{", "{\n  \"typo_field\": 1,", 1);
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn unordered_alphas_rejected() {
        let mut cfg = sample();
        cfg.alphas = Some(vec![1.0, 0.5]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_resolution_modes() {
        let g = GridSpec {
            values: None,
            lo: Some(0.1),
            hi: Some(0.9),
            count: Some(5),
            spacing: Some(GridSpacing::Linear),
            relative_to: Some(GridScale::Lambda1s),
        };
        let grid = g.resolve(2.0).unwrap();
        assert_eq!(grid.len(), 5);
        assert!((grid[0] - 0.2).abs() < 1e-15);
        assert!((grid[4] - 1.8).abs() < 1e-15);
        let explicit = GridSpec {
            values: Some(vec![0.3, 0.6]),
            lo: None,
            hi: None,
            count: None,
            spacing: None,
            relative_to: None,
        };
        assert_eq!(explicit.resolve(99.0).unwrap(), vec![0.3, 0.6]);
        let single = GridSpec {
            values: None,
            lo: Some(0.5),
            hi: Some(0.5),
            count: Some(1),
            spacing: None,
            relative_to: None,
        };
        assert_eq!(single.resolve(1.0).unwrap(), vec![0.5]);
    }
}
