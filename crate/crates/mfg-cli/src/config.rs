//! JSON run configuration.
//!
//! Unknown keys are rejected everywhere so a typo fails loudly instead of
//! silently falling back to a default. Parameter-range violations report
//! the offending key by name.

use anyhow::{bail, Context};
use mfg_core::estimates::EstimateOptions;
use mfg_core::grid::GridFunction;
use mfg_core::hamiltonian::{CouplingModel, HamiltonianModel, Potential};
use mfg_core::problem::{ProblemSpec, Sampler, SolveConfig};
use serde::Deserialize;
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub discretization: Discretization,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub nu: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub hamiltonian: HamiltonianConfig,
    pub coupling: CouplingConfig,
    pub u0: InitialCostConfig,
    #[serde(rename = "mT")]
    pub m_t: TerminalDensityConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub kind: HamiltonianKindConfig,
    pub beta: f64,
    pub potential: PotentialConfig,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKindConfig {
    PowerUpwind,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PotentialConfig {
    #[serde(rename = "zero")]
    Zero,
    /// `amplitude (cos 2πx₁ + cos 2πx₂)`.
    #[serde(rename = "cos2")]
    Cos2 {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Explicit node samples; `n_h` must match the discretization.
    #[serde(rename = "custom-samples")]
    CustomSamples { n_h: usize, values: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum CouplingConfig {
    Identity,
    Power { gamma: f64 },
    LogShifted { eps: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum InitialCostConfig {
    Zero,
    Constant { value: f64 },
    /// `amplitude (cos 2πx₁ + cos 2πx₂)`.
    Cos2 { amplitude: f64 },
    /// `amplitude cos 2πx₁`.
    CosX1 { amplitude: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum TerminalDensityConfig {
    Uniform,
    /// `1 + amplitude cos 2πx₁`, `|amplitude| ≤ 1`.
    CosX1Bump { amplitude: f64 },
    /// `1 + amplitude (cos 2πx₁ + cos 2πx₂)/2`, `|amplitude| ≤ 1`.
    Cos2Bump { amplitude: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub n_h: usize,
    pub n_t: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub damping: f64,
    pub tol_fixed_point: f64,
    pub max_outer: usize,
    pub tol_newton: f64,
    pub tol_lin: f64,
    /// Residual threshold for `check`; artifacts above it fail the command.
    pub tol_residual_check: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let defaults = SolveConfig::default();
        SolverConfig {
            damping: defaults.damping,
            tol_fixed_point: defaults.tol_fixed_point,
            max_outer: defaults.max_outer,
            tol_newton: defaults.tol_newton,
            tol_lin: defaults.tol_lin,
            tol_residual_check: 1e-5,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub dump_fields: bool,
    pub diagnostics_alpha: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            dump_fields: true,
            diagnostics_alpha: 1.5,
        }
    }
}

fn one() -> f64 {
    1.0
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if !(self.solver.damping > 0.0 && self.solver.damping <= 1.0) {
            bail!(
                "invalid damping {}: must lie in (0, 1]",
                self.solver.damping
            );
        }
        if !(self.output.diagnostics_alpha >= 1.0 && self.output.diagnostics_alpha < 2.0) {
            bail!(
                "invalid diagnostics_alpha {}: must lie in [1, 2)",
                self.output.diagnostics_alpha
            );
        }
        if let TerminalDensityConfig::CosX1Bump { amplitude }
        | TerminalDensityConfig::Cos2Bump { amplitude } = self.problem.m_t
        {
            if amplitude.abs() > 1.0 {
                bail!("invalid mT amplitude {amplitude}: density would go negative");
            }
        }
        if let PotentialConfig::CustomSamples { n_h, ref values } = self.problem.hamiltonian.potential {
            if n_h != self.discretization.n_h {
                bail!(
                    "potential custom-samples n_h {} does not match discretization n_h {}",
                    n_h,
                    self.discretization.n_h
                );
            }
            if values.len() != n_h * n_h {
                bail!(
                    "potential custom-samples has {} values, expected {}",
                    values.len(),
                    n_h * n_h
                );
            }
        }
        Ok(())
    }

    /// Builds the continuous problem data.
    pub fn problem_spec(&self) -> anyhow::Result<ProblemSpec> {
        let potential = match &self.problem.hamiltonian.potential {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Cos2 { amplitude } => Potential::CosSum {
                amplitude: *amplitude,
            },
            PotentialConfig::CustomSamples { n_h, values } => {
                Potential::Samples(GridFunction::new(*n_h, values.clone())?)
            }
        };
        let hamiltonian = match self.problem.hamiltonian.kind {
            HamiltonianKindConfig::PowerUpwind => {
                HamiltonianModel::power_upwind(self.problem.hamiltonian.beta, potential)?
            }
        };
        let coupling = match self.problem.coupling {
            CouplingConfig::Identity => CouplingModel::Identity,
            CouplingConfig::Power { gamma } => CouplingModel::Power { gamma },
            CouplingConfig::LogShifted { eps } => CouplingModel::LogShifted { eps },
        };
        let u0 = match self.problem.u0 {
            InitialCostConfig::Zero => Sampler::zero(),
            InitialCostConfig::Constant { value } => Sampler::constant(value),
            InitialCostConfig::Cos2 { amplitude } => Sampler::new(move |x1, x2| {
                amplitude * ((2.0 * PI * x1).cos() + (2.0 * PI * x2).cos())
            }),
            InitialCostConfig::CosX1 { amplitude } => {
                Sampler::new(move |x1, _| amplitude * (2.0 * PI * x1).cos())
            }
        };
        let m_t = match self.problem.m_t {
            TerminalDensityConfig::Uniform => Sampler::constant(1.0),
            TerminalDensityConfig::CosX1Bump { amplitude } => {
                Sampler::new(move |x1, _| 1.0 + amplitude * (2.0 * PI * x1).cos())
            }
            TerminalDensityConfig::Cos2Bump { amplitude } => Sampler::new(move |x1, x2| {
                1.0 + 0.5 * amplitude * ((2.0 * PI * x1).cos() + (2.0 * PI * x2).cos())
            }),
        };
        let problem = ProblemSpec {
            nu: self.problem.nu,
            horizon: self.problem.horizon,
            hamiltonian,
            coupling,
            u0,
            m_t,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Solver configuration at the config's discretization.
    pub fn solve_config(&self) -> anyhow::Result<SolveConfig> {
        let config = SolveConfig {
            n_h: self.discretization.n_h,
            n_t: self.discretization.n_t,
            damping: self.solver.damping,
            tol_fixed_point: self.solver.tol_fixed_point,
            max_outer: self.solver.max_outer,
            tol_newton: self.solver.tol_newton,
            tol_lin: self.solver.tol_lin,
            ..SolveConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    /// Same solver knobs at a different resolution (refinement levels).
    pub fn solve_config_at(&self, n_h: usize, n_t: usize) -> anyhow::Result<SolveConfig> {
        let mut config = self.solve_config()?;
        config.n_h = n_h;
        config.n_t = n_t;
        config.validate()?;
        Ok(config)
    }

    pub fn estimate_options(&self) -> EstimateOptions {
        EstimateOptions {
            alpha_density: self.output.diagnostics_alpha,
            ..EstimateOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra_solver: &str) -> String {
        format!(
            r#"{{
                "problem": {{
                    "nu": 0.5, "T": 1.0,
                    "hamiltonian": {{"kind": "power_upwind", "beta": 2.0, "potential": {{"kind": "zero"}}}},
                    "coupling": {{"kind": "identity"}},
                    "u0": {{"kind": "zero"}},
                    "mT": {{"kind": "uniform"}}
                }},
                "discretization": {{"n_h": 8, "n_t": 8}}{extra_solver}
            }}"#
        )
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: RunConfig = serde_json::from_str(&minimal("")).unwrap();
        config.validate().unwrap();
        assert_eq!(config.solver.max_outer, 200);
        assert_eq!(config.output.dir, "out");
        let solve = config.solve_config().unwrap();
        assert_eq!(solve.n_h, 8);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = minimal(r#", "solver": {"dampin": 0.5}"#);
        let err = serde_json::from_str::<RunConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("dampin"), "{err}");
    }

    #[test]
    fn zero_damping_is_rejected_citing_damping() {
        let text = minimal(r#", "solver": {"damping": 0.0}"#);
        let config: RunConfig = serde_json::from_str(&text).unwrap();
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("damping"), "{err}");
    }

    #[test]
    fn negative_density_amplitude_is_rejected() {
        let text = minimal("").replace(
            r#""mT": {"kind": "uniform"}"#,
            r#""mT": {"kind": "cos_x1_bump", "amplitude": 1.5}"#,
        );
        let config: RunConfig = serde_json::from_str(&text).unwrap();
        assert!(config.validate().is_err());
    }
}
