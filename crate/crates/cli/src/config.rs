use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use crowdfront::attribution::AlphaGrid;
use crowdfront::dataset::{DatasetFormat, Horizon};
use crowdfront::paretolab::{BootstrapConfig, DEFAULT_SPAN};
use crowdfront::MonteCarloConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Inclusive date range `FROM:TO`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Window {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl std::str::FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("window `{s}` is not FROM:TO"))?;
        let parse = |d: &str| NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").map_err(|e| format!("window date `{d}`: {e}"));
        let w = Window { from: parse(a)?, to: parse(b)? };
        if w.from > w.to {
            return Err(format!("window `{s}` ends before it starts"));
        }
        Ok(w)
    }
}

impl TryFrom<String> for Window {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Window> for String {
    fn from(w: Window) -> String {
        format!("{}:{}", w.from, w.to)
    }
}

/// Explicit alpha boundaries, either listed (`-1,-0.2,0.2,1`) or evenly
/// spaced (`linspace:5`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec")]
pub struct Grid(pub Vec<f64>);

#[derive(Deserialize)]
#[serde(untagged)]
enum GridSpec {
    List(Vec<f64>),
    Text(String),
}

impl TryFrom<GridSpec> for Grid {
    type Error = String;
    fn try_from(g: GridSpec) -> Result<Self, String> {
        match g {
            GridSpec::List(v) => Ok(Grid(v)),
            GridSpec::Text(s) => s.parse(),
        }
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(n) = s.strip_prefix("linspace:") {
            let n: usize = n.trim().parse().map_err(|e| format!("grid `{s}`: {e}"))?;
            return AlphaGrid::linspace(n).map(|g| Grid(g.boundaries)).map_err(|e| e.to_string());
        }
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("grid value `{v}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Grid)
    }
}

/// Settings shared by the analysis commands. Loaded from the `--config`
/// JSON document, then overridden by any flags given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing)]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub format: Option<DatasetFormat>,
    pub n_boot: usize,
    pub n_bins: usize,
    pub seed: u64,
    /// Fixed extrapolation horizon in trading days; by default each set
    /// extrapolates to its round's end.
    pub horizon_days: Option<u32>,
    pub mc: MonteCarloConfig,
    pub window: Option<Window>,
    pub grid: Option<Grid>,
    pub fixed_full_set: bool,
    pub loess_span: f64,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out: None,
            format: None,
            n_boot: 100,
            n_bins: crowdfront::attribution::DEFAULT_GRID_BINS,
            seed: 0,
            horizon_days: None,
            mc: MonteCarloConfig::default(),
            window: None,
            grid: None,
            fixed_full_set: false,
            loess_span: DEFAULT_SPAN,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::runtime("Io", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::runtime("Config", format!("{}: {e}", path.display())))
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon_days.map_or(Horizon::UntilRoundEnd, Horizon::Fixed)
    }

    /// Monte Carlo settings with the run seed applied.
    pub fn model_config(&self) -> MonteCarloConfig {
        MonteCarloConfig { seed: self.seed, ..self.mc.clone() }
    }

    /// The settings that determine a run's results, as recorded next to its
    /// outputs.
    pub fn effective(&self) -> RunConfig {
        RunConfig { mc: self.model_config(), ..self.clone() }
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig { n_boot: self.n_boot, seed: self.seed, fixed_full_set: self.fixed_full_set, ..Default::default() }
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::runtime("Config", "no input directory given (--input)"))
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::runtime("Config", "no output directory given (--out)"))
    }
}
