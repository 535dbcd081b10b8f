//! Run configuration. Every field has a default, so an empty TOML file is a
//! valid config; CLI flags are applied on top of the file.

use std::path::{Path, PathBuf};

use nonlocal_tv::geometry::CompetitorSpec;
use nonlocal_tv::{
    build_pair_weights, load_field, synth_field, Field64, Grid64, KernelSpec64, NearFieldRule, PairWeights64,
    SolverOptions64, SynthKind,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// 1 or 2.
    pub dim: usize,
    /// Cells per axis of the data box. When absent the box is
    /// `[-extent, extent]^dim` at spacing `h`.
    pub shape: Option<Vec<usize>>,
    pub h: f64,
    pub extent: f64,
    /// Margin added on each side of the data box, as a fraction of its width.
    pub pad_fraction: f64,
    pub s: f64,
    /// Kernel truncation radius; `4 h` when absent.
    pub trunc_radius: Option<f64>,
    pub near_field_rule: NearFieldRule,
    /// Couple every cell to the zero exterior beyond the grid. Off by
    /// default: the plain functional keeps constants fixed.
    pub zero_extension: bool,
    pub solver: SolverOptions64,
    pub datum: DatumSpec,
    pub levels: LevelsSpec,
    /// Hölder exponent assumed for the datum.
    pub beta: f64,
    /// Seed for the random draws of the property suites.
    pub seed: u64,
    /// Random instances per property suite.
    pub trials: usize,
    pub out_dir: PathBuf,
    /// Compare the solve with exhaustive enumeration (at most 6 cells).
    pub oracle: bool,
    pub competitors: CompetitorSpec,
    pub holder: HolderRange,
    pub curvature: CurvatureProbe,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            shape: None,
            h: 0.625,
            extent: 20.0,
            pad_fraction: 0.0,
            s: 0.5,
            trunc_radius: None,
            near_field_rule: NearFieldRule::CellAveraged,
            zero_extension: false,
            solver: SolverOptions64::default(),
            datum: DatumSpec::default(),
            levels: LevelsSpec::Count(8),
            beta: 0.75,
            seed: 0,
            trials: 10,
            out_dir: PathBuf::from("nltv-out"),
            oracle: false,
            competitors: CompetitorSpec::default(),
            holder: HolderRange::default(),
            curvature: CurvatureProbe::default(),
        }
    }
}

/// Where the datum `f` comes from. A `file` path is resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatumSpec {
    File { file: PathBuf },
    Synth(SynthKind),
}

impl Default for DatumSpec {
    fn default() -> Self {
        DatumSpec::Synth(SynthKind::RadialHolder { beta: 0.75, center: [0.0, 0.0], cap: 8.0 })
    }
}

/// Either a number of levels spread evenly over the range of `u`, or an
/// explicit increasing list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelsSpec {
    Count(usize),
    List(Vec<f64>),
}

/// Pair-distance window of the Hölder scans; `2 h` and a quarter of the grid
/// diameter when absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderRange {
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
}

/// Test sets of the curvature and variation suites.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureProbe {
    /// Disc radius (interval half-length in 1D); 0.6 of the smallest grid
    /// half-width when absent.
    pub radius: Option<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub log_every: Option<usize>,
}

impl RunConfig {
    /// Reads a TOML config; relative datum paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if let DatumSpec::File { file } = &mut cfg.datum {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(n) = o.log_every {
            self.solver.log_every = n;
        }
    }

    pub fn trunc_radius(&self) -> f64 {
        self.trunc_radius.unwrap_or(4.0 * self.h)
    }

    /// Cells per axis including padding.
    pub fn cells_per_axis(&self) -> Vec<usize> {
        let core: Vec<usize> = match &self.shape {
            Some(shape) => shape.clone(),
            None => vec![(2.0 * self.extent / self.h).round() as usize; self.dim],
        };
        core.iter().map(|&n| n + 2 * (self.pad_fraction * n as f64).round() as usize).collect()
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(format!("dim = {} must be 1 or 2", self.dim));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(format!("h = {} must be positive", self.h));
        }
        if let Some(shape) = &self.shape {
            if shape.len() != self.dim {
                return Err(format!("shape has {} entries for dim = {}", shape.len(), self.dim));
            }
        } else if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(format!("extent = {} must be positive", self.extent));
        }
        if !(self.pad_fraction >= 0.0 && self.pad_fraction.is_finite()) {
            return Err(format!("pad_fraction = {} must be non-negative", self.pad_fraction));
        }
        if self.cells_per_axis().iter().any(|&n| n < 2) {
            return Err("grid needs at least two cells per axis".into());
        }
        self.kernel_spec()?;
        self.solver.validate().map_err(|e| e.to_string())?;
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(format!("beta = {} must lie in (0, 1]", self.beta));
        }
        match &self.levels {
            LevelsSpec::Count(0) => return Err("levels count must be positive".into()),
            LevelsSpec::List(v) if v.is_empty() => return Err("levels list is empty".into()),
            LevelsSpec::List(v) if v.iter().any(|t| !t.is_finite()) || v.windows(2).any(|p| p[0] >= p[1]) => {
                return Err("levels must be finite and strictly increasing".into())
            }
            _ => {}
        }
        if self.trials == 0 {
            return Err("trials must be positive".into());
        }
        if let DatumSpec::File { file } = &self.datum {
            if !file.is_file() {
                return Err(format!("datum file {} not found", file.display()));
            }
        }
        let positive = |v: Option<f64>, name: &str| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(format!("{name} = {x} must be positive")),
            _ => Ok(()),
        };
        positive(self.holder.r_min, "holder.r_min")?;
        positive(self.holder.r_max, "holder.r_max")?;
        positive(self.curvature.radius, "curvature.radius")?;
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec64, String> {
        KernelSpec64::new(self.s, self.dim, self.trunc_radius(), self.near_field_rule).map_err(|e| e.to_string())
    }

    /// Grid centred at the origin.
    pub fn grid(&self) -> Result<Grid64, String> {
        let n = self.cells_per_axis();
        let h = self.h;
        let origin = |k: usize| -0.5 * n[k] as f64 * h + 0.5 * h;
        let g = if self.dim == 1 {
            Grid64::new_1d(n[0], h, origin(0))
        } else {
            Grid64::new_2d([n[0], n[1]], h, [origin(0), origin(1)])
        };
        g.map_err(|e| e.to_string())
    }
}

/// Grid, kernel, weights and datum of a validated config.
pub struct Setup {
    pub grid: Grid64,
    pub spec: KernelSpec64,
    pub weights: PairWeights64,
    pub datum: Field64,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self, String> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let spec = cfg.kernel_spec()?;
        let mut weights = build_pair_weights(&grid, &spec).map_err(|e| e.to_string())?;
        if cfg.zero_extension {
            weights = weights.with_zero_extension();
        }
        let datum = match &cfg.datum {
            DatumSpec::File { file } => load_field(file, &grid),
            DatumSpec::Synth(kind) => synth_field(kind, &grid),
        }
        .map_err(|e| format!("datum: {e}"))?;
        Ok(Self { grid, spec, weights, datum })
    }
}
