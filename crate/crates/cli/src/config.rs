//! Run configuration: strict TOML, validated before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use faddeev::angular::{enumerate_channels, Parity};
use faddeev::basis::{build_grid, GridDistribution, HermiteBasis, RadialGrid};
use faddeev::bound::{IterationOptions, ScanOptions};
use faddeev::geometry::MassSystem;
use faddeev::operators::{ProblemAssembly, ReductionMode};
use faddeev::pairpot::{bundled_neon_parameters, PotentialModel};
use faddeev::scatter::{MatchingWindow, ScatterOptions};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub units: UnitsConfig,
    pub system: SystemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub dimer: DimerConfig,
    #[serde(default)]
    pub bound: BoundConfig,
    #[serde(default)]
    pub scatter: ScatterConfig,
    #[serde(default)]
    pub resonance: ResonanceConfig,
    #[serde(default)]
    pub wavefunction: WavefunctionConfig,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Declared units; anything but the internal system is rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsConfig {
    pub energy: String,
    pub length: String,
    pub mass: String,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self { energy: "kelvin".into(), length: "bohr".into(), mass: "dalton".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSource {
    /// Damped-dispersion parameter file; relative paths resolve against the
    /// config file.
    File {
        path: PathBuf,
    },
    /// The parameter file shipped with the library.
    Bundled,
    Morse {
        depth: f64,
        r_e: f64,
        a: f64,
    },
    Zero,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Da.
    pub masses: [f64; 3],
    pub potential: PotentialSource,
    #[serde(default)]
    pub total_l: u32,
    #[serde(default = "default_parity")]
    pub parity: Parity,
    pub l_max: u32,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    /// Defaults to the mass symmetry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionMode>,
}

fn default_parity() -> Parity {
    Parity::Even
}

fn default_n_theta() -> usize {
    24
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AxisGrid {
    /// bohr.
    pub x_max: f64,
    pub n_sub: usize,
    pub distribution: GridDistribution,
}

impl AxisGrid {
    pub fn build(&self) -> faddeev::Result<RadialGrid> {
        build_grid(self.x_max, self.n_sub, self.distribution.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x: AxisGrid,
    /// Same as `x` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<AxisGrid>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let it = IterationOptions::default();
        Self { tol: it.tol, residual_tol: it.residual_tol, max_iter: it.max_iter, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DimerConfig {
    pub j_max: u32,
    pub scattering_length: bool,
}

impl Default for DimerConfig {
    fn default() -> Self {
        Self { j_max: 2, scattering_length: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConfig {
    /// K.
    pub window: [f64; 2],
    pub n_guesses: usize,
    pub block: usize,
    pub dedup_tol: f64,
    /// Write coefficient vectors next to the table.
    pub dump_vectors: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        let s = ScanOptions::default();
        Self { window: [s.window.0, s.window.1], n_guesses: s.n_guesses, block: s.block, dedup_tol: s.dedup_tol, dump_vectors: false }
    }
}

/// Energies either listed or as an inclusive uniform range.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EnergyGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl EnergyGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::List(v) => v.clone(),
            Self::Range { start, stop, count } => match count {
                0 => vec![],
                1 => vec![*start],
                n => (0..*n).map(|k| start + (stop - start) * k as f64 / (*n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterConfig {
    /// Energies for `scatter` (single points) and `scan`.
    pub energies: EnergyGrid,
    pub window: MatchingWindowConfig,
    pub fit_gate: f64,
    pub unitarity_gate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatchingWindowConfig {
    OuterFraction { fraction: f64 },
    Range { lo: f64, hi: f64 },
}

impl Default for ScatterConfig {
    fn default() -> Self {
        let o = ScatterOptions::default();
        Self {
            energies: EnergyGrid::Range { start: -24.2, stop: -23.0, count: 61 },
            window: MatchingWindowConfig::OuterFraction { fraction: 0.2 },
            fit_gate: o.fit_gate,
            unitarity_gate: o.unitarity_gate,
        }
    }
}

impl ScatterConfig {
    pub fn options(&self) -> ScatterOptions {
        ScatterOptions {
            window: match self.window {
                MatchingWindowConfig::OuterFraction { fraction } => MatchingWindow::OuterFraction(fraction),
                MatchingWindowConfig::Range { lo, hi } => MatchingWindow::Range { lo, hi },
            },
            fit_gate: self.fit_gate,
            unitarity_gate: self.unitarity_gate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceConfig {
    /// Energies sampled for the fit.
    pub energies: EnergyGrid,
    /// Fit window, K; all samples when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self { energies: EnergyGrid::Range { start: -23.6, stop: -22.9, count: 36 }, window: None }
    }
}

/// Which state to plot: an energy (scattering) or a bound-state index.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    Energy(f64),
    State(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WavefunctionConfig {
    pub source: FieldSource,
    pub thetas_deg: Vec<f64>,
    /// Points per axis.
    pub lattice: usize,
    /// Lattice extent, bohr; the box size when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
}

impl Default for WavefunctionConfig {
    fn default() -> Self {
        Self { source: FieldSource::Energy(-23.208), thetas_deg: vec![0.0, 30.0, 60.0, 90.0], lattice: 200, extent: None }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Reads, parses and validates; relative potential paths become absolute.
pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<String>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    if let PotentialSource::File { path: p } = &mut cfg.system.potential {
        if p.is_relative() {
            *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
        }
    }
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

impl RunConfig {
    /// Checks everything that can be checked without solving; returns
    /// warnings.
    pub fn validate(&self) -> Result<Vec<String>, CliError> {
        let mut warnings = Vec::new();
        let u = &self.units;
        if (u.energy.as_str(), u.length.as_str(), u.mass.as_str()) != ("kelvin", "bohr", "dalton") {
            return Err(bad(format!(
                "units must be energy = \"kelvin\", length = \"bohr\", mass = \"dalton\"; got {:?}, {:?}, {:?}",
                u.energy, u.length, u.mass
            )));
        }
        if let PotentialSource::File { path } = &self.system.potential {
            if !path.is_file() {
                return Err(bad(format!("potential file {} does not exist", path.display())));
            }
        }
        let masses = self.masses()?;
        self.potential()?;
        self.x_grid()?;
        self.y_grid()?;
        if self.system.n_theta == 0 {
            return Err(bad("system.n_theta must be positive"));
        }
        let mode = self.reduction(&masses);
        if mode != ReductionMode::ThreeDistinct && self.system.l_max % 2 == 1 {
            warnings.push(format!(
                "l_max = {} is odd; identical bosons keep even pair waves only (effective l_max {})",
                self.system.l_max,
                self.system.l_max - 1
            ));
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.residual_tol > 0.0 && s.max_iter > 0) {
            return Err(bad("solver tolerances and max_iter must be positive"));
        }
        let [lo, hi] = self.bound.window;
        if !(lo < hi && hi < 0.0) {
            return Err(bad(format!("bound.window [{lo}, {hi}] must be ordered and below 0 K")));
        }
        if self.bound.n_guesses == 0 || self.bound.block == 0 {
            return Err(bad("bound.n_guesses and bound.block must be positive"));
        }
        for (name, grid) in [("scatter.energies", &self.scatter.energies), ("resonance.energies", &self.resonance.energies)] {
            if grid.values().iter().any(|e| !(*e < 0.0)) {
                return Err(bad(format!("{name} must lie below the breakup threshold (0 K)")));
            }
        }
        if let MatchingWindowConfig::OuterFraction { fraction } = self.scatter.window {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(bad("scatter.window.fraction must lie in (0, 1)"));
            }
        }
        if self.wavefunction.lattice < 2 || self.wavefunction.thetas_deg.iter().any(|t| !(0.0..=180.0).contains(t)) {
            return Err(bad("wavefunction.lattice must be >= 2 and thetas within [0, 180] degrees"));
        }
        Ok(warnings)
    }

    pub fn masses(&self) -> Result<MassSystem, CliError> {
        let [a, b, c] = self.system.masses;
        MassSystem::new(a, b, c, 1e-9).map_err(|e| bad(e.to_string()))
    }

    pub fn reduction(&self, masses: &MassSystem) -> ReductionMode {
        self.system.reduction.unwrap_or_else(|| ReductionMode::natural(masses.symmetry()))
    }

    pub fn potential(&self) -> Result<PotentialModel, CliError> {
        match &self.system.potential {
            PotentialSource::File { path } => PotentialModel::from_file(path),
            PotentialSource::Bundled => PotentialModel::from_file(bundled_neon_parameters()),
            PotentialSource::Morse { depth, r_e, a } => PotentialModel::morse(*depth, *r_e, *a),
            PotentialSource::Zero => Ok(PotentialModel::Zero),
        }
        .map_err(|e| bad(e.to_string()))
    }

    pub fn x_grid(&self) -> Result<RadialGrid, CliError> {
        self.grid.x.build().map_err(|e| bad(format!("grid.x: {e}")))
    }

    pub fn y_grid(&self) -> Result<RadialGrid, CliError> {
        self.grid.y.as_ref().unwrap_or(&self.grid.x).build().map_err(|e| bad(format!("grid.y: {e}")))
    }

    pub fn assembly(&self) -> Result<ProblemAssembly, CliError> {
        let masses = self.masses()?;
        let mode = self.reduction(&masses);
        ProblemAssembly::new(
            masses,
            self.system.total_l,
            self.system.parity,
            self.system.l_max,
            HermiteBasis::dirichlet(self.x_grid()?),
            HermiteBasis::dirichlet(self.y_grid()?),
            self.potential()?,
            mode,
            self.system.n_theta,
        )
        .map_err(|e| bad(e.to_string()))
    }

    /// Number of channels per component, for the run header.
    pub fn channel_count(&self) -> usize {
        let identical = self.masses().map(|m| self.reduction(&m) == ReductionMode::AllIdentical);
        enumerate_channels(self.system.total_l, self.system.parity, self.system.l_max, identical.unwrap_or(false)).len()
    }

    pub fn iteration(&self) -> IterationOptions {
        IterationOptions { tol: self.solver.tol, residual_tol: self.solver.residual_tol, max_iter: self.solver.max_iter }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            window: (self.bound.window[0], self.bound.window[1]),
            n_guesses: self.bound.n_guesses,
            block: self.bound.block,
            seed: self.solver.seed,
            dedup_tol: self.bound.dedup_tol,
            iteration: self.iteration(),
        }
    }

    /// Canonical TOML of the resolved configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
