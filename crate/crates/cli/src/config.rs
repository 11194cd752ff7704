use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use loglab_core::blowup::BlowupConfig;
use loglab_core::epiperimetric::SweepConfig;
use loglab_core::solver::SolveConfig;
use loglab_core::spherical::QuadraticForm;
use loglab_core::synthetic::Profile;
use loglab_core::{Error, Result};

/// Angular profile of a synthetic field `μ(|x − x⁰|) c(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `½ θ·Aθ`.
    Quadratic { matrix: Vec<Vec<f64>> },
    /// `½ (θ·ν)₊²`.
    HalfSpace { normal: Vec<f64> },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<Profile> {
        match self {
            ProfileSpec::Quadratic { matrix } => Ok(Profile::Quadratic(QuadraticForm::from_rows(matrix)?)),
            ProfileSpec::HalfSpace { normal } => {
                let n = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(n > 0.0) {
                    return Err(Error::Config("half-space normal must be nonzero".into()));
                }
                Ok(Profile::HalfSpace(normal.iter().map(|v| v / n).collect()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n: usize,
}

/// Where the field under study comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    /// Solve with the `solver` section.
    Solve,
    /// Read an `FLD1` snapshot.
    Fld1 { path: PathBuf },
    /// Closed-form synthetic field, optionally sampled on a grid.
    Synthetic {
        center: Vec<f64>,
        profile: ProfileSpec,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
}

/// Geometric radii `r_min · q^k`, `k = 0..count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiiSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl RadiiSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::Config("radii spec must yield at least 2 radii".into()));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max < 1.0) {
            return Err(Error::Config(format!(
                "radii need 0 < r_min < r_max < 1, got {} and {}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    /// Increasing radii.
    pub fn radii(&self) -> Vec<f64> {
        let q = (self.r_max / self.r_min).ln() / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.r_max
                } else {
                    self.r_min * (q * k as f64).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Log,
    Holder,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecaySpec {
    /// Decay exponent; defaults to 0 in the plane and `(d−1)/(d+3)` otherwise.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Override of `W_I(0+)`.
    #[serde(default)]
    pub limit: Option<f64>,
    /// Fit these `(r, e)` samples instead of computing an excess series.
    #[serde(default)]
    pub samples: Option<Vec<(f64, f64)>>,
}

fn default_max_points() -> usize {
    32
}
fn default_beta() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySpec {
    /// Points to classify; free-boundary points of the field when absent.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Evenly strided subsample of the free boundary.
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    /// Rate for the singular-set modulus; log for `d = 3`, Hölder otherwise.
    #[serde(default)]
    pub rate: Option<RateKind>,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl Default for ClassifySpec {
    fn default() -> Self {
        Self {
            points: None,
            max_points: default_max_points(),
            rate: None,
            beta: default_beta(),
        }
    }
}

fn default_size() -> (u32, u32) {
    (640, 400)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub input: PathBuf,
    pub x: String,
    pub y: Vec<String>,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub log_y: bool,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default = "default_size")]
    pub size: (u32, u32),
}

fn default_tol_scale() -> f64 {
    1.0
}

/// One experiment. Sections not used by a subcommand are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub solver: Option<SolveConfig>,
    #[serde(default)]
    pub field: Option<FieldSource>,
    /// Base point `x⁰`; otherwise the contact node next to positivity that
    /// is closest to `target` (the box center by default).
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    #[serde(default)]
    pub radii: Option<RadiiSpec>,
    #[serde(default)]
    pub blowup: BlowupConfig,
    #[serde(default)]
    pub epi: Option<SweepConfig>,
    #[serde(default)]
    pub decay: DecaySpec,
    #[serde(default)]
    pub classify: ClassifySpec,
    #[serde(default)]
    pub plot: Option<PlotSpec>,
    /// Multiplies every tolerance; combined with `LOGLAB_TOL`.
    #[serde(default = "default_tol_scale")]
    pub tol_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            solver: None,
            field: None,
            center: None,
            target: None,
            radii: None,
            blowup: BlowupConfig::default(),
            epi: None,
            decay: DecaySpec::default(),
            classify: ClassifySpec::default(),
            plot: None,
            tol_scale: default_tol_scale(),
        }
    }
}

/// Overrides from the command line and the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // relative input paths are taken relative to the config file
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        if let Some(FieldSource::Fld1 { path }) = &mut self.field {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
        if let Some(p) = &mut self.plot {
            if p.input.is_relative() {
                p.input = dir.join(&p.input);
            }
        }
    }

    /// Applies overrides and scales tolerances; the result is what gets
    /// embedded in artifacts.
    pub fn resolve(mut self, ov: &Overrides) -> Result<Self> {
        if let Some(seed) = ov.seed {
            if let Some(s) = &mut self.solver {
                s.seed = seed;
            }
            if let Some(e) = &mut self.epi {
                e.seed = seed;
            }
        }
        let scale = self.tol_scale * ov.tol_scale.unwrap_or(1.0);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("tolerance scale must be positive, got {scale}")));
        }
        if scale != 1.0 {
            if let Some(s) = &mut self.solver {
                s.tol *= scale;
            }
            if let Some(e) = &mut self.epi {
                e.epi.tol *= scale;
            }
            self.blowup.stratum_tol *= scale;
        }
        self.tol_scale = scale;
        if let Some(r) = &self.radii {
            r.validate()?;
        }
        Ok(self)
    }
}
