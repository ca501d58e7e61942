//! Run configuration: one JSON document per run, unknown keys rejected.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use weakkam::io::InstanceSpec;
use weakkam::twist::Family;
use weakkam::Tolerances;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Critical value, Peierls barrier, Aubry set and a weak KAM solution.
    Solve,
    /// Extremal Mather measures and the Mather set.
    Mather,
    /// Discounted solutions and the selected limits `u₁`, `v₁`.
    Discounted,
    /// Degenerate discounted solutions and the limit `u₀^α`.
    Degenerate,
    /// `α`, `ρ`, `β` curves, pseudographs and chains for a twist map.
    Twist,
    /// Discounted fixed points of the triangle map.
    Triangle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Mather => "mather",
            Command::Discounted => "discounted",
            Command::Degenerate => "degenerate",
            Command::Twist => "twist",
            Command::Triangle => "triangle",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the command given on the command line when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    /// Discount factors: increasing towards 1 for `discounted`, decreasing
    /// towards 0 for `degenerate`, any order for `triangle`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<DegenerateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist: Option<TwistConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangle: Option<TriangleConfig>,
}

/// Every key is optional; missing ones take the per-kernel defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_num: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_aubry: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// Stop a selection limit once successive estimates differ by this much.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_tol: Option<f64>,
    /// Largest final difference accepted when a schedule runs out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy_tol: Option<f64>,
    /// Agreement required between a limit and its closed formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub base: Tolerances,
    pub limit_tol: f64,
    pub cauchy_tol: f64,
    pub route_tol: f64,
}

impl ToleranceOverrides {
    pub fn resolve(&self, base: Tolerances) -> Result<Resolved, CliError> {
        let base = Tolerances {
            eps_num: self.eps_num.unwrap_or(base.eps_num),
            eps_aubry: self.eps_aubry.unwrap_or(base.eps_aubry),
            fixed_point: self.fixed_point.unwrap_or(base.fixed_point),
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
        };
        let r = Resolved {
            base,
            limit_tol: self.limit_tol.unwrap_or(base.eps_num),
            cauchy_tol: self.cauchy_tol.unwrap_or(10.0 * base.eps_aubry),
            route_tol: self.route_tol.unwrap_or(5e-6),
        };
        for (name, v) in [
            ("eps_num", r.base.eps_num),
            ("eps_aubry", r.base.eps_aubry),
            ("fixed_point", r.base.fixed_point),
            ("limit_tol", r.limit_tol),
            ("cauchy_tol", r.cauchy_tol),
            ("route_tol", r.route_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance {name} = {v} must be positive")));
            }
        }
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegenerateConfig {
    /// One weight per point.
    pub alpha: Vec<f64>,
    /// Discount factor of the single solve and the sandwich.
    #[serde(default = "half")]
    pub lambda: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistConfig {
    pub generating: Family,
    /// Cohomology classes, sorted increasingly.
    pub cs: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Rotation numbers at which to evaluate `β`; defaults to the computed `ρ(c)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhos: Option<Vec<f64>>,
    /// Backward chains per class, started at evenly spaced grid points.
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Allowed `r⁺ - r⁻` in the pseudograph; defaults to `4(1 + |ε|)/grid_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semiconcavity_tol: Option<f64>,
}

fn default_grid() -> usize {
    512
}

fn default_horizon() -> usize {
    400
}

fn default_chains() -> usize {
    4
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleConfig {
    pub alpha: f64,
    pub eps0: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Cross-field checks that the schema alone cannot express.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        let needs_instance = matches!(
            command,
            Command::Solve | Command::Mather | Command::Discounted | Command::Degenerate
        );
        if needs_instance && self.instance.is_none() {
            return Err(CliError::Config(format!("`{}` needs an `instance`", command.name())));
        }
        if !needs_instance && self.instance.is_some() {
            return Err(CliError::Config(format!("`{}` takes no `instance`", command.name())));
        }
        let takes_schedule = matches!(command, Command::Discounted | Command::Degenerate | Command::Triangle);
        if self.schedule.is_some() && !takes_schedule {
            return Err(CliError::Config(format!("`{}` takes no `schedule`", command.name())));
        }
        let sections = [
            ("degenerate", self.degenerate.is_some(), Command::Degenerate),
            ("twist", self.twist.is_some(), Command::Twist),
            ("triangle", self.triangle.is_some(), Command::Triangle),
        ];
        for (name, present, owner) in sections {
            if present && owner != command {
                return Err(CliError::Config(format!("section `{name}` is unused by `{}`", command.name())));
            }
            if !present && owner == command {
                return Err(CliError::Config(format!("`{}` needs a `{name}` section", command.name())));
            }
        }
        if let Some(t) = &self.twist {
            if t.cs.is_empty() || t.cs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Config("twist.cs must be non-empty and strictly increasing".into()));
            }
            if t.grid_n < 2 || t.horizon == 0 {
                return Err(CliError::Config("twist.grid_n must be at least 2 and twist.horizon positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys_at_every_level() {
        assert!(RunConfig::from_json(r#"{"instanse": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"tolerances": {"eps": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"triangle": {"alpha": 0.75, "eps0": 0.1, "beta": 1}}"#).is_err());
        let ok = RunConfig::from_json(r#"{"triangle": {"alpha": 0.75, "eps0": 0.1}}"#).unwrap();
        assert!(ok.validate(Command::Triangle).is_ok());
        assert!(ok.validate(Command::Solve).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let o = ToleranceOverrides {
            eps_aubry: Some(1e-4),
            ..Default::default()
        };
        let r = o.resolve(Tolerances::for_scale(1.0)).unwrap();
        assert_eq!(r.base.eps_aubry, 1e-4);
        assert_eq!(r.base.eps_num, 2e-9);
        assert_eq!(r.cauchy_tol, 1e-3);
        let bad = ToleranceOverrides {
            eps_num: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.resolve(Tolerances::for_scale(0.0)).is_err());
    }

    #[test]
    fn command_mismatch() {
        let c = RunConfig::from_json(r#"{"command": "mather", "instance": {"type": "dense", "entries": [[0]]}}"#).unwrap();
        assert!(c.validate(Command::Mather).is_ok());
        assert!(c.validate(Command::Solve).is_err());
    }
}
