//! On-disk layout of a run: `run.json`, `summary.csv` and per-level
//! `solutions/eps_XX.csv` with `solutions/eps_XX.json` metadata.

use std::path::{Path, PathBuf};

use alegeo_core::geometry::EndpointSummary;
use alegeo_core::grid::Field2D;
use alegeo_core::ma::{PotentialPath, SideData};
use alegeo_core::registry::Params;
use alegeo_core::solver::{EpsStats, GeodesicSolution};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::{Resolved, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BackgroundMeta {
    pub family: String,
    pub n: usize,
    pub gamma_order: usize,
    pub params: Params,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EndpointsMeta {
    pub phi0: EndpointSummary,
    pub phi1: EndpointSummary,
}

/// Metadata stored next to each solution CSV.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolutionMeta {
    pub eps: f64,
    pub bg: BackgroundMeta,
    pub endpoints: EndpointsMeta,
    pub residual: f64,
    pub margin: f64,
    pub iters: usize,
    pub polish_steps: usize,
    pub side_data: SideData,
    pub file: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LevelEntry {
    pub eps: f64,
    pub csv: String,
    pub meta: String,
}

/// Index of a run directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunIndex {
    pub config: RunConfig,
    /// Directory the config was read from, for relative endpoint tables.
    pub config_dir: PathBuf,
    pub levels: Vec<LevelEntry>,
    pub stats: Vec<EpsStats>,
    pub completed: bool,
    pub failure: Option<String>,
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn meta_of(sol: &GeodesicSolution, file: &str) -> SolutionMeta {
    let bg = &sol.path.bg;
    SolutionMeta {
        eps: sol.eps(),
        bg: BackgroundMeta {
            family: bg.family().into(),
            n: bg.n(),
            gamma_order: bg.gamma_order(),
            params: bg.model().params(),
        },
        endpoints: EndpointsMeta {
            phi0: sol.path.phi0.summary(),
            phi1: sol.path.phi1.summary(),
        },
        residual: sol.final_residual,
        margin: sol.final_margin,
        iters: sol.iterations,
        polish_steps: sol.polish_steps,
        side_data: sol.side_data,
        file: file.into(),
    }
}

const SUMMARY_HEADER: &str =
    "eps,iterations,residual,margin,sup_laplacian,sup_phi,sup_phi_t,sup_phi_tt,cauchy_step\n";

pub fn summary_csv(stats: &[EpsStats]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    for s in stats {
        let cauchy = s
            .cauchy_step
            .map(|c| format!("{c:.16e}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            s.eps,
            s.iterations,
            s.residual,
            s.margin,
            s.sup_laplacian,
            s.sup_phi,
            s.sup_phi_t,
            s.sup_phi_tt,
            cauchy
        ));
    }
    out
}

/// Writes every solution, the summary table and the index.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    sols: &[GeodesicSolution],
    stats: &[EpsStats],
    failure: Option<String>,
) -> CliResult<RunIndex> {
    let mut levels = Vec::new();
    for (k, sol) in sols.iter().enumerate() {
        let csv = format!("solutions/eps_{k:02}.csv");
        let meta = format!("solutions/eps_{k:02}.json");
        write_text(&dir.join(&csv), &sol.path.phi.to_csv())?;
        write_json(&dir.join(&meta), &meta_of(sol, &csv))?;
        levels.push(LevelEntry {
            eps: sol.eps(),
            csv,
            meta,
        });
    }
    write_text(&dir.join("summary.csv"), &summary_csv(stats))?;
    let index = RunIndex {
        config: cfg.clone(),
        config_dir: cfg.base_dir.clone(),
        levels,
        stats: stats.to_vec(),
        completed: failure.is_none(),
        failure,
    };
    write_json(&dir.join("run.json"), &index)?;
    Ok(index)
}

pub fn read_index(dir: &Path) -> CliResult<RunIndex> {
    let mut index: RunIndex = read_json(&dir.join("run.json"))?;
    index.config.base_dir = index.config_dir.clone();
    Ok(index)
}

/// A stored level re-read from disk.
pub struct StoredLevel {
    pub meta: SolutionMeta,
    pub path: PotentialPath,
}

pub fn read_levels(dir: &Path, index: &RunIndex, r: &Resolved) -> CliResult<Vec<StoredLevel>> {
    let mut out = Vec::new();
    for lv in &index.levels {
        let meta: SolutionMeta = read_json(&dir.join(&lv.meta))?;
        let file = dir.join(&lv.csv);
        let text = std::fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
        let phi = Field2D::from_csv(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
        if phi.grid() != &r.grid {
            return Err(CliError::Config(format!(
                "{}: grid does not match the config",
                file.display()
            )));
        }
        if meta.eps != lv.eps {
            return Err(CliError::Config(format!(
                "{}: ε does not match run.json",
                lv.meta
            )));
        }
        // keep the stored rows as they are, corrupted or not
        let mut path = PotentialPath::new(
            r.bg.clone(),
            phi.clone(),
            r.phi0.clone(),
            r.phi1.clone(),
            meta.eps,
        )?;
        path.phi = phi;
        out.push(StoredLevel { meta, path });
    }
    Ok(out)
}
