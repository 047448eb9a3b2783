use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::estimate::DecompositionGrid;
use crate::model::ModelParams;
use crate::sim::DEFAULT_EVENT_BUDGET;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Queue-length and service-count means of first-customer traces.
    ValidateMeans,
    /// Busy-period length tail.
    BusyTail,
    /// Tail of the number of customers per busy period.
    CountTail,
    /// Sojourn tail of a customer arriving to an empty system.
    SojournTail,
    /// Tail of the k-th completion epoch.
    FiniteTk,
    /// Customer-stationary sojourn tail from regenerative cycles.
    StationaryTail,
    /// Single-big-jump attribution of busy-period or stationary exceedances.
    Psbj,
    /// Split of sojourn exceedances by visit, queue length and big service.
    Decomposition,
    /// Completion epochs after a forced big service.
    FluidCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        Self::ValidateMeans,
        Self::BusyTail,
        Self::CountTail,
        Self::SojournTail,
        Self::FiniteTk,
        Self::StationaryTail,
        Self::Psbj,
        Self::Decomposition,
        Self::FluidCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ValidateMeans => "validate-means",
            Self::BusyTail => "busy-tail",
            Self::CountTail => "count-tail",
            Self::SojournTail => "sojourn-tail",
            Self::FiniteTk => "finite-tk",
            Self::StationaryTail => "stationary-tail",
            Self::Psbj => "psbj",
            Self::Decomposition => "decomposition",
            Self::FluidCheck => "fluid-check",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                key: "kind".into(),
                message: format!("unknown experiment kind {s:?}"),
            })
    }
}

/// Threshold grid: an explicit list or `start · factor^i`, `i < points`.
/// A geometric grid without `start` begins at ten mean service times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Explicit(Vec<f64>),
    Geometric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
        #[serde(default = "default_factor")]
        factor: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
}

fn default_factor() -> f64 {
    2.0
}

fn default_points() -> usize {
    12
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::Geometric {
            start: None,
            factor: default_factor(),
            points: default_points(),
        }
    }
}

impl GridSpec {
    pub fn points(&self, mean_service: f64) -> Result<Vec<f64>> {
        let grid = match self {
            Self::Explicit(v) => v.clone(),
            Self::Geometric { start, factor, points } => {
                let start = start.unwrap_or(10.0 * mean_service);
                if !(start > 0.0) || !(*factor > 1.0) || *points == 0 {
                    return Err(grid_error("geometric grid needs start > 0, factor > 1 and points >= 1"));
                }
                (0..*points).map(|i| start * factor.powi(i as i32)).collect()
            }
        };
        if grid.is_empty() {
            return Err(grid_error("grid is empty"));
        }
        if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(grid_error("grid must be strictly increasing"));
        }
        Ok(grid)
    }
}

fn grid_error(message: &str) -> Error {
    Error::Config {
        key: "grid".into(),
        message: message.into(),
    }
}

/// Regime for [`ExperimentKind::Psbj`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    #[default]
    Busy,
    Stationary,
}

/// Kind-specific settings; unused ones are ignored by the other kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KindOptions {
    /// Completion index for `finite-tk`; forced cycle for `fluid-check`.
    pub k: usize,
    /// Position of the forced service within its cycle (`fluid-check`).
    pub i: usize,
    /// Forced service size in units of the mean service (`fluid-check`).
    pub y_over_b: f64,
    /// Further visits tracked after the forced one (`fluid-check`).
    pub ell_max: usize,
    /// Threshold for `decomposition`.
    pub x: Option<f64>,
    pub decomposition: DecompositionGrid,
    /// Largest `k` in the `E(X_k)` table of `validate-means`.
    pub mean_k_max: usize,
    /// `E(1 + X_{K−1})` to use instead of the Poisson closed form or an
    /// estimate from the run.
    pub prefactor: Option<f64>,
    /// `E(τ^H)` to use instead of the Poisson closed form or an estimate.
    pub e_tau_h: Option<f64>,
    pub regime: Regime,
    /// Acceptance band for the tail ratio checked by `--check`.
    pub ratio_band: [f64; 2],
    /// Target probability of the grid point the ratio check uses.
    pub check_probability: f64,
    pub event_budget: u64,
}

impl Default for KindOptions {
    fn default() -> Self {
        Self {
            k: 1,
            i: 0,
            y_over_b: 1e4,
            ell_max: 2,
            x: None,
            decomposition: DecompositionGrid::default(),
            mean_k_max: 5,
            prefactor: None,
            e_tau_h: None,
            regime: Regime::Busy,
            ratio_band: [0.6, 1.4],
            check_probability: 1e-3,
            event_budget: DEFAULT_EVENT_BUDGET,
        }
    }
}

/// Model as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub arrival: DistributionSpec,
    pub service: DistributionSpec,
    #[serde(default)]
    pub feedback_p: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            arrival: DistributionSpec::exponential(0.2).expect("valid"),
            service: DistributionSpec::pareto(2.5, 0.6).expect("valid"),
            feedback_p: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub model: ModelSection,
    /// Replications, busy periods or regenerative cycles, depending on kind.
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads, 0 for all cores. Never written to reports: results do
    /// not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub options: KindOptions,
}

fn default_replications() -> u64 {
    100_000
}

fn default_out() -> PathBuf {
    PathBuf::from("tailq-out")
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            model: ModelSection::default(),
            replications: default_replications(),
            grid: GridSpec::default(),
            seed: 0,
            workers: 0,
            out: default_out(),
            options: KindOptions::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_owned();
            let key = message
                .split('`')
                .nth(1)
                .map(str::to_owned)
                .unwrap_or_else(|| "config".to_owned());
            Error::Config {
                key,
                message: e.to_string().trim().to_owned(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: "config".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model.arrival, self.model.service, self.model.feedback_p)
    }

    /// Validates the model (stability included) and the grid, and pins the
    /// default grid start so the resolved config is self-contained.
    pub fn resolve(mut self) -> Result<Self> {
        let params = self.params()?;
        let c = params.stable_constants()?;
        if self.replications == 0 {
            return Err(Error::Config {
                key: "replications".into(),
                message: "must be at least 1".into(),
            });
        }
        self.grid.points(c.b)?;
        if let GridSpec::Geometric { start, .. } = &mut self.grid {
            start.get_or_insert(10.0 * c.b);
        }
        Ok(self)
    }
}
