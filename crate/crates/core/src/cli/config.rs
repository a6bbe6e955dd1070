use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::SpatialGrid;
use crate::model::{validate_setup, PhysicalParams, ProblemSetup, Profile};
use crate::oracle::FdConfig;
use crate::volterra::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub h0: f64,
    pub hu: f64,
    pub t_ocean: Profile,
    pub t_ice: Profile,
    pub s: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub snapshot_grid: Option<SpatialGrid>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), snapshot_times: Vec::new(), snapshot_grid: None }
    }
}

/// Pass/fail thresholds used by `validate` and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    /// Bound on every `Ψ` in natural units.
    pub psi_tolerance: f64,
    /// Number of sample times per step for the `Ψ` check.
    pub psi_samples: usize,
    /// Trajectory gap between solvers, as a fraction of the initial gap.
    pub compare_tolerance: f64,
    /// Steps used by the one-phase benchmark inside `validate`.
    pub benchmark_steps: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { psi_tolerance: 1e-3, psi_samples: 4, compare_tolerance: 0.01, benchmark_steps: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub initial: InitialSection,
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: Option<FdConfig>,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default)]
    pub checks: CheckSection,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn setup(&self) -> ProblemSetup {
        ProblemSetup {
            params: self.params,
            h0_init: self.initial.h0,
            hu_init: self.initial.hu,
            t_ocean_init: self.initial.t_ocean.clone(),
            t_ice_init: self.initial.t_ice.clone(),
            s_init: self.initial.s.clone(),
        }
    }

    /// Everything that can be checked before running.
    pub fn validate(&self) -> Result<()> {
        let report = validate_setup(&self.setup());
        if !report.is_ok() {
            return Err(Error::Config(format!("initial state rejected: {report}")));
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(o) = &self.oracle {
            o.validate(&self.setup()).map_err(|e| Error::Config(e.to_string()))?;
        }
        for &t in &self.outputs.snapshot_times {
            if !(t >= 0.0 && t <= self.solver.t_end) {
                return Err(Error::Config(format!(
                    "snapshot time {t} outside [0, {}]",
                    self.solver.t_end
                )));
            }
        }
        if let Some(g) = &self.outputs.snapshot_grid {
            g.nodes().map_err(|e| Error::Config(e.to_string()))?;
        }
        let c = &self.checks;
        if !(c.psi_tolerance > 0.0 && c.compare_tolerance > 0.0) || c.psi_samples == 0 || c.benchmark_steps < 8 {
            return Err(Error::Config("check thresholds must be positive".into()));
        }
        Ok(())
    }

    pub fn snapshot_grid(&self) -> SpatialGrid {
        self.outputs.snapshot_grid.unwrap_or_else(|| {
            let gap = self.initial.hu - self.initial.h0;
            SpatialGrid { x_lo: self.initial.h0 - 2.0 * gap, x_hi: self.initial.hu + 0.5 * gap, n: 101 }
        })
    }
}
