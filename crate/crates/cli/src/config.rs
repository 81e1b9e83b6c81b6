//! TOML run configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use alegeo_core::geometry::{EndpointPotential, RadialBackground, TabulatedProfile};
use alegeo_core::grid::Grid2D;
use alegeo_core::registry::Params;
use alegeo_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    pub family: String,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Order of the quotient group; defaults to 2 for Eguchi–Hanson and 1
    /// otherwise.
    #[serde(default)]
    pub gamma_order: Option<usize>,
    #[serde(default)]
    pub params: Params,
}

fn default_n() -> usize {
    2
}

impl BackgroundSpec {
    pub fn build(&self) -> CliResult<RadialBackground> {
        let order = self
            .gamma_order
            .unwrap_or(if self.family == "eguchi-hanson" { 2 } else { 1 });
        Ok(RadialBackground::from_registry(
            &self.family,
            self.n,
            order,
            &self.params,
        )?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
}

impl GridSpec {
    pub fn build(&self) -> CliResult<Grid2D> {
        Ok(Grid2D::new(self.x_min, self.x_max, self.nx, self.nt)?)
    }
}

/// A registry profile times an amplitude, or a table of `(u, value)` samples
/// read from a CSV file with header `u,value`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

fn default_amplitude() -> f64 {
    1.0
}

impl EndpointSpec {
    pub fn build(&self, base: &Path) -> CliResult<EndpointPotential> {
        match (&self.family, &self.csv) {
            (Some(f), None) => Ok(EndpointPotential::from_registry(
                f,
                &self.params,
                self.amplitude,
            )?),
            (None, Some(file)) => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base.join(file)
                };
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let (u, f) = parse_radial_csv(&text)
                    .map_err(|m| CliError::Config(format!("{}: {m}", path.display())))?;
                let table = TabulatedProfile::new(u, f)?;
                Ok(EndpointPotential::new(
                    Arc::new(table),
                    "table",
                    Params::new(),
                    self.amplitude,
                    format!("{} * table({})", self.amplitude, path.display()),
                ))
            }
            _ => Err(CliError::Config(
                "an endpoint needs exactly one of `family` or `csv`".into(),
            )),
        }
    }
}

fn parse_radial_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("u,value") {
        return Err("expected header `u,value`".into());
    }
    let (mut u, mut f) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
        match (cols.next(), cols.next(), cols.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => {
                u.push(a);
                f.push(b);
            }
            _ => return Err(format!("line {}: expected two numbers", k + 2)),
        }
    }
    Ok((u, f))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub phi0: EndpointSpec,
    pub phi1: EndpointSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Barrier profile name in the barrier registry.
    pub barrier_profile: String,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            barrier_profile: "uniform".into(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySpec {
    /// Level to fit; the smallest solved level when absent.
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustSpec {
    pub eps: f64,
    /// Outer edges `x_max` of the nested domains; falls back to
    /// `solve.exhaustion_ts`, then to the grid's own `x_max`.
    pub ts: Vec<f64>,
}

impl Default for ExhaustSpec {
    fn default() -> Self {
        ExhaustSpec {
            eps: 1e-2,
            ts: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub background: BackgroundSpec,
    pub grid: GridSpec,
    pub endpoints: Endpoints,
    #[serde(default)]
    pub solve: SolveConfig,
    pub output: OutputSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub decay: DecaySpec,
    #[serde(default)]
    pub exhaust: ExhaustSpec,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides of config keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
}

/// Everything a run needs, validated.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub bg: RadialBackground,
    pub grid: Grid2D,
    pub phi0: EndpointPotential,
    pub phi1: EndpointPotential,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> CliResult<RunConfig> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml(&text, &base)
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if o.eps_min.is_some() || o.eps_max.is_some() {
            let lo = o.eps_min.unwrap_or(0.0);
            let hi = o.eps_max.unwrap_or(f64::INFINITY);
            self.solve.eps_schedule.retain(|e| *e >= lo && *e <= hi);
            if self.solve.eps_schedule.is_empty() {
                return Err(CliError::Config(format!(
                    "no ε level of the schedule lies in [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Output directory with relative paths taken from the config location.
    pub fn out_dir(&self) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            self.base_dir.join(&self.output.dir)
        }
    }

    /// Builds and checks every component before any solve.
    pub fn resolve(&self) -> CliResult<Resolved> {
        self.solve.validate()?;
        let bg = self.background.build()?;
        let grid = self.grid.build()?;
        let phi0 = self.endpoints.phi0.build(&self.base_dir)?;
        let phi1 = self.endpoints.phi1.build(&self.base_dir)?;
        let us = grid.us();
        phi0.check_admissible(&bg, &us)?;
        phi1.check_admissible(&bg, &us)?;
        alegeo_core::barriers::build_profile(&self.verify.barrier_profile, bg.n())?;
        Ok(Resolved {
            bg,
            grid,
            phi0,
            phi1,
        })
    }
}
