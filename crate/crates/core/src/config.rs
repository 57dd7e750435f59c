//! Run configuration shared by the TOML config file and the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every knob of a run. Fields left `None` fall back to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Mesh in Triangle format: `<path>.node` and `<path>.ele`.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Source domain: square, unit-square, rect:x0,y0,x1,y1, disk[:r], oval, moon, flower, L,
    /// or a path to an `x y` polyline file.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub target_domain: Option<String>,
    /// Cells across the domain for builtin meshes.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub smoothness: Option<usize>,
    #[arg(long)]
    pub colloc_degree: Option<usize>,
    /// Source density descriptor (`const:v`, `gauss:a,b,t,s`, `image:path,floor`, `builtin:name`).
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub g: Option<String>,
    /// Manufactured solution supplying boundary data: sin, exp, cone, quadratic.
    #[arg(long)]
    pub bc: Option<String>,
    /// Linear solves per stage.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    /// Stopping tolerance of the inner iteration.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Accept spline spaces below the `D ≥ 3r + 2` rule.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub force: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Source image (PGM/PPM) for `warp`.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Lower clamp of image-derived densities.
    #[arg(long)]
    pub floor: Option<f64>,
    /// Stored transport solution (JSON) or `identity` for `warp`.
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Side of the residual grid.
    #[arg(long)]
    pub residual_grid: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub warm_start: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// `self` with every field set in `top` replaced.
    pub fn overlaid(mut self, top: &RunConfig) -> Self {
        overlay!(
            self,
            top,
            mesh,
            domain,
            target_domain,
            resolution,
            degree,
            smoothness,
            colloc_degree,
            f,
            g,
            bc,
            iters,
            stages,
            outer_iters,
            tol,
            out,
            trace,
            force,
            seed,
            image,
            floor,
            potential,
            width,
            height,
            residual_grid,
            warm_start
        );
        self
    }

    pub fn force(&self) -> bool {
        self.force.unwrap_or(false)
    }

    /// Referenced input files exist and the spline space is admissible.
    pub fn validate(&self) -> Result<()> {
        let must_exist = |p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ))
            }
        };
        if let Some(m) = &self.mesh {
            must_exist(&m.with_extension("node"))?;
            must_exist(&m.with_extension("ele"))?;
        }
        if let Some(i) = &self.image {
            must_exist(i)?;
        }
        if let Some(p) = self.potential.as_deref().filter(|p| *p != "identity") {
            must_exist(Path::new(p))?;
        }
        if let (Some(d), Some(r)) = (self.degree, self.smoothness) {
            if !self.force() && d < 3 * r + 2 {
                return Err(Error::Config(format!(
                    "degree {d} with smoothness {r} violates D ≥ 3r + 2; pass --force to override"
                )));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Config("tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}
