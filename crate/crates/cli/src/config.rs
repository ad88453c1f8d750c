//! Experiment configuration: JSON with a default for every field.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fracelast::homogenization::{PeriodicCoefficient, Profile};
use fracelast::spatial_operators::BoundaryCondition;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Verify,
    Solve,
    Homogenize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_start: f64,
    /// `None`: chosen so that `nu * n * dt = window_nu`.
    pub dt: Option<f64>,
    pub n: usize,
    pub pad_factor: usize,
    /// Product `nu * window` used when `dt` is left open.
    pub window_nu: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            dt: None,
            n: 4096,
            pad_factor: 2,
            window_nu: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    pub m: usize,
    pub bc: BoundaryCondition,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            m: 128,
            bc: BoundaryCondition::Dirichlet,
        }
    }
}

/// A periodic profile, or per-cell values from a one-column CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        value: f64,
    },
    TwoPhase {
        a: f64,
        b: f64,
        #[serde(default = "half")]
        split: f64,
    },
    Sinusoid {
        mean: f64,
        amp: f64,
    },
    Csv {
        path: PathBuf,
    },
}

fn half() -> f64 {
    0.5
}

impl CoefficientSpec {
    pub fn profile(&self) -> Option<Profile> {
        match *self {
            CoefficientSpec::Constant { value } => Some(Profile::Constant { value }),
            CoefficientSpec::TwoPhase { a, b, split } => Some(Profile::TwoPhase { a, b, split }),
            CoefficientSpec::Sinusoid { mean, amp } => Some(Profile::Sinusoid { mean, amp }),
            CoefficientSpec::Csv { .. } => None,
        }
    }

    pub fn periodic(&self, name: &str) -> Result<PeriodicCoefficient> {
        let profile = self
            .profile()
            .with_context(|| format!("coefficient {name}: a periodic profile is required here"))?;
        PeriodicCoefficient::from_profile(profile).with_context(|| format!("coefficient {name}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Coefficients {
    pub mu: CoefficientSpec,
    pub c: CoefficientSpec,
    pub d: CoefficientSpec,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            mu: CoefficientSpec::TwoPhase {
                a: 1.0,
                b: 2.0,
                split: 0.5,
            },
            c: CoefficientSpec::Constant { value: 0.0 },
            d: CoefficientSpec::TwoPhase {
                a: 1.0,
                b: 4.0,
                split: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(rename = "L_max")]
    pub l_max: usize,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    /// Midpoint points per period for the effective coefficients.
    pub n_quad: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            l_max: 8,
            k_max: 12,
            n_quad: 3 * 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialShape {
    One,
    Sin,
    Cos,
    X,
}

impl SpatialShape {
    pub fn as_fn(self) -> fn(f64) -> f64 {
        match self {
            SpatialShape::One => |_| 1.0,
            SpatialShape::Sin => |x| (std::f64::consts::PI * x).sin(),
            SpatialShape::Cos => |x| (std::f64::consts::PI * x).cos(),
            SpatialShape::X => |x| x,
        }
    }
}

/// Velocity forcing. `bump`: Gaussian of width `width * window` centred
/// `delay` widths after `t_start`, times a spatial shape. `csv`: columns
/// `t, value_1..value_d` with a header row, `d` the velocity or full
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsSpec {
    Bump {
        #[serde(default = "default_bump_width")]
        width: f64,
        #[serde(default = "default_bump_delay")]
        delay: f64,
        #[serde(default = "default_bump_shape")]
        shape: SpatialShape,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_bump_width() -> f64 {
    0.01
}

fn default_bump_delay() -> f64 {
    8.0
}

fn default_bump_shape() -> SpatialShape {
    SpatialShape::Sin
}

impl Default for RhsSpec {
    fn default() -> Self {
        RhsSpec::Bump {
            width: default_bump_width(),
            delay: default_bump_delay(),
            shape: default_bump_shape(),
        }
    }
}

/// Gaussian test functions: every time (fraction of the window) against
/// every spatial shape, over the full `(v, T)` state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub times: Vec<f64>,
    pub width: f64,
    pub shapes: Vec<SpatialShape>,
}

impl Default for TestFunctionConfig {
    fn default() -> Self {
        Self {
            times: vec![0.15, 0.25, 0.35],
            width: 0.04,
            shapes: vec![SpatialShape::One, SpatialShape::Sin, SpatialShape::X],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub time: TimeConfig,
    pub space: SpaceConfig,
    pub coefficients: Coefficients,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k_bound: f64,
    /// `None`: the certified `nu0(K)`.
    pub nu: Option<f64>,
    pub k_list: Vec<usize>,
    pub series: SeriesConfig,
    pub rhs: RhsSpec,
    pub test_functions: TestFunctionConfig,
    /// Seed of the random probes in the positivity check.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Verify,
            time: TimeConfig::default(),
            space: SpaceConfig::default(),
            coefficients: Coefficients::default(),
            alpha: 0.5,
            k_bound: 1.0,
            nu: None,
            k_list: vec![1, 2, 4, 8, 16, 32],
            series: SeriesConfig::default(),
            rhs: RhsSpec::default(),
            test_functions: TestFunctionConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: Self = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    /// Relative data paths are taken relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for spec in [
            &mut self.coefficients.mu,
            &mut self.coefficients.c,
            &mut self.coefficients.d,
        ] {
            if let CoefficientSpec::Csv { path } = spec {
                fix(path);
            }
        }
        if let RhsSpec::Csv { path } = &mut self.rhs {
            fix(path);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.5..=1.0).contains(&self.alpha),
            "alpha = {} is outside the admissible range [1/2, 1]",
            self.alpha
        );
        ensure!(
            self.time.n.is_power_of_two() && self.time.n >= 2,
            "time.n = {} must be a power of two",
            self.time.n
        );
        ensure!(self.time.pad_factor >= 1, "time.pad_factor must be at least 1");
        ensure!(self.time.t_start.is_finite(), "time.t_start must be finite");
        if let Some(dt) = self.time.dt {
            ensure!(dt > 0.0 && dt.is_finite(), "time.dt = {dt} must be positive");
        }
        ensure!(
            self.time.window_nu > 0.0 && self.time.window_nu <= 600.0,
            "time.window_nu = {} must lie in (0, 600]",
            self.time.window_nu
        );
        ensure!(self.space.m >= 2, "space.m = {} must be at least 2", self.space.m);
        ensure!(
            self.k_bound > 0.0 && self.k_bound.is_finite(),
            "K = {} must be positive",
            self.k_bound
        );
        if let Some(nu) = self.nu {
            ensure!(nu > 0.0 && nu.is_finite(), "nu = {nu} must be positive");
        }
        ensure!(self.series.n_quad >= 2, "series.n_quad must be at least 2");
        for (name, spec) in self.coefficient_specs() {
            match spec {
                CoefficientSpec::Csv { path } => {
                    ensure!(path.is_file(), "coefficient {name}: file {} not found", path.display())
                }
                _ => {
                    let p = spec.periodic(name)?;
                    if name != "c" {
                        ensure!(
                            p.lower_bound > 0.0,
                            "coefficient {name}: profile minimum {} must be positive",
                            p.lower_bound
                        );
                    }
                    if matches!(spec, CoefficientSpec::TwoPhase { .. }) {
                        ensure!(
                            self.space.m.is_multiple_of(2),
                            "coefficient {name}: a two-phase profile needs an even space.m"
                        );
                    }
                }
            }
        }
        if let RhsSpec::Csv { path } = &self.rhs {
            ensure!(path.is_file(), "rhs: file {} not found", path.display());
        }
        if let RhsSpec::Bump { width, delay, .. } = self.rhs {
            ensure!(width > 0.0 && delay >= 0.0, "rhs bump needs width > 0 and delay >= 0");
        }
        ensure!(
            self.test_functions.width > 0.0,
            "test_functions.width must be positive"
        );
        if self.mode == Mode::Homogenize {
            ensure!(!self.k_list.is_empty(), "k_list must not be empty");
            ensure!(self.k_list.iter().all(|&k| k >= 1), "k_list entries must be at least 1");
            let k_max = *self.k_list.iter().max().unwrap();
            ensure!(
                self.space.m.is_multiple_of(2 * k_max),
                "space.m = {} must be a multiple of 2 * max(k_list) = {}",
                self.space.m,
                2 * k_max
            );
            ensure!(
                self.space.bc == BoundaryCondition::Dirichlet,
                "homogenize mode runs Dirichlet problems"
            );
            for (name, spec) in self.coefficient_specs() {
                if matches!(spec, CoefficientSpec::Csv { .. }) {
                    bail!("coefficient {name}: homogenize mode needs a periodic profile, not a CSV file");
                }
            }
            ensure!(
                !self.test_functions.times.is_empty() && !self.test_functions.shapes.is_empty(),
                "homogenize mode needs at least one test function"
            );
        }
        Ok(())
    }

    pub fn coefficient_specs(&self) -> [(&'static str, &CoefficientSpec); 3] {
        [
            ("mu", &self.coefficients.mu),
            ("c", &self.coefficients.c),
            ("D", &self.coefficients.d),
        ]
    }
}
