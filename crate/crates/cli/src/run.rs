//! The three experiment modes.

use std::path::Path;

use anyhow::{anyhow, ensure, Context};
use fracelast::homogenization::{gaussian_test_functions, HomogenizationStudy};
use fracelast::material_law::{check_c_condition, select_nu0, CoefficientField, MaterialLaw};
use fracelast::solver::{assemble_law, causality_probe, solve, EvolutionaryProblem};
use fracelast::spatial_operators::{build_setup, SpatialSetup};
use fracelast::weighted_time::{
    fourier_laplace, inverse_fourier_laplace, weighted_norm, TimeGrid, WeightedSignal,
};
use nalgebra::DMatrix;

use crate::config::{CoefficientSpec, ExperimentConfig, Mode, RhsSpec};
use crate::output::{
    write_convergence_csv, write_json, write_signal_csv, Check, RunReport, SolverSummary,
};

/// Exit status classes: 2 for configuration problems, 1 for numerical ones.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "invalid configuration: {e:#}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e:#}"),
        }
    }
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn numerical(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn numerical(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Numerical(e.into()))
    }
}

// check tolerances
const UNITARITY_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-10;
const NORM_BOUND_SLACK: f64 = 1e-6;
const CAUSALITY_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-8;
const BOUNDARY_POINTS: usize = 64;
const PROBES: usize = 4;

/// Everything a single-problem mode needs, with `nu` and `dt` resolved.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub nu: f64,
    pub nu0: f64,
    pub grid: TimeGrid,
}

fn read_column(path: &Path, expected: usize) -> anyhow::Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        ensure!(record.len() == 1, "{}: expected one value per line", path.display());
        let v: f64 = record[0]
            .trim()
            .parse()
            .with_context(|| format!("{}: cannot parse {:?}", path.display(), &record[0]))?;
        values.push(v);
    }
    ensure!(
        values.len() == expected,
        "{}: {} values, expected one per cell ({expected})",
        path.display(),
        values.len()
    );
    Ok(values)
}

/// Per-cell field: profiles are sampled at `k = 1`.
fn cell_field(name: &str, spec: &CoefficientSpec, m: usize) -> Result<CoefficientField, Failure> {
    match spec {
        CoefficientSpec::Csv { path } => {
            let values = read_column(path, m).config()?;
            let field = CoefficientField::from_samples(values)
                .with_context(|| format!("coefficient {name}"))
                .config()?;
            if name != "c" && field.min() <= 0.0 {
                return Err(Failure::Config(anyhow!(
                    "coefficient {name}: minimum {} must be positive",
                    field.min()
                )));
            }
            Ok(field)
        }
        _ => {
            let p = spec.periodic(name).config()?;
            fracelast::homogenization::oscillate(&p, 1, m)
                .with_context(|| format!("coefficient {name}"))
                .config()
        }
    }
}

fn fields(config: &ExperimentConfig) -> Result<[CoefficientField; 3], Failure> {
    let m = config.space.m;
    Ok([
        cell_field("mu", &config.coefficients.mu, m)?,
        cell_field("c", &config.coefficients.c, m)?,
        cell_field("D", &config.coefficients.d, m)?,
    ])
}

fn make_grid(config: &ExperimentConfig, nu: f64) -> Result<TimeGrid, Failure> {
    let t = &config.time;
    let dt = t.dt.unwrap_or(t.window_nu / (nu * t.n as f64));
    TimeGrid::new(t.t_start, dt, t.n, t.pad_factor).config()
}

fn check_nu(config: &ExperimentConfig, nu0: f64) -> Result<f64, Failure> {
    match config.nu {
        Some(nu) if nu < nu0 * (1.0 - 1e-12) => Err(Failure::Config(anyhow!(
            "nu = {nu} is below the certified nu0 = {nu0} for K = {}",
            config.k_bound
        ))),
        Some(nu) => Ok(nu),
        None => Ok(nu0),
    }
}

fn study(config: &ExperimentConfig) -> Result<HomogenizationStudy, Failure> {
    let placeholder = TimeGrid::new(0.0, 1.0, config.time.n, config.time.pad_factor).config()?;
    Ok(HomogenizationStudy {
        mu: config.coefficients.mu.periodic("mu").config()?,
        c: config.coefficients.c.periodic("c").config()?,
        d: config.coefficients.d.periodic("D").config()?,
        alpha: config.alpha,
        k_bound: config.k_bound,
        k_list: config.k_list.clone(),
        m: config.space.m,
        grid: placeholder,
        nu_override: None,
        l_max: config.series.l_max,
        k_max: config.series.k_max,
        n_quad: config.series.n_quad,
        forcing: WeightedSignal::zeros(placeholder, 1.0, 1).config()?,
        test_functions: Vec::new(),
    })
}

/// Validates, fixes `nu` (certified `nu0` unless overridden) and the grid.
pub fn resolve(config: ExperimentConfig) -> Result<Resolved, Failure> {
    config.validate().config()?;
    let nu0 = match config.mode {
        Mode::Homogenize => study(&config)?.nu0().config()?,
        Mode::Verify | Mode::Solve => {
            let setup = build_setup(config.space.m, config.space.bc).config()?;
            let [mu, c, d] = fields(&config)?;
            select_nu0(
                &setup.velocity_coefficient(&mu).config()?,
                &setup.stress_coefficient(&c).config()?,
                &setup.stress_coefficient(&d).config()?,
                config.alpha,
                config.k_bound,
            )
            .config()?
        }
    };
    let nu = check_nu(&config, nu0)?;
    let grid = make_grid(&config, nu)?;
    Ok(Resolved {
        config,
        nu,
        nu0,
        grid,
    })
}

impl Resolved {
    /// Config with `nu` and `dt` filled in.
    pub fn resolved_config(&self) -> ExperimentConfig {
        let mut c = self.config.clone();
        c.nu = Some(self.nu);
        c.time.dt = Some(self.grid.dt());
        c
    }

    fn window(&self) -> f64 {
        self.grid.t_end() - self.grid.t_start()
    }

    /// Forcing on the velocity nodes (or the full state for CSV input) and
    /// the time before which it vanishes, when known.
    fn forcing(&self, setup: &SpatialSetup) -> Result<(WeightedSignal, Option<f64>), Failure> {
        match &self.config.rhs {
            RhsSpec::Bump { width, delay, shape } => {
                let w = width * self.window();
                let center = self.grid.t_start() + delay * w;
                let profile: Vec<f64> = setup
                    .velocity_positions()
                    .iter()
                    .map(|&x| shape.as_fn()(x))
                    .collect();
                let f = WeightedSignal::separable(
                    self.grid,
                    self.nu,
                    |t| (-((t - center) / w).powi(2) / 2.0).exp(),
                    &profile,
                )
                .config()?;
                // six widths before the centre the bump is below 1e-7
                let support = (*delay >= 6.0).then_some(center - 6.0 * w);
                Ok((f, support))
            }
            RhsSpec::Csv { path } => {
                let f = self.read_signal(path, setup).config()?;
                let scale = f.values().amax();
                let first = (0..self.grid.n())
                    .find(|&j| f.values().row(j).amax() > 1e-12 * scale)
                    .unwrap_or(0);
                let support = (first > 0).then(|| self.grid.time(first - 1));
                Ok((f, support))
            }
        }
    }

    fn read_signal(&self, path: &Path, setup: &SpatialSetup) -> anyhow::Result<WeightedSignal> {
        let mut reader = csv::Reader::from_path(path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        let width = reader.headers()?.len();
        ensure!(width >= 2, "{}: need a time column and at least one value", path.display());
        let dim = width - 1;
        ensure!(
            dim == setup.velocity_dim() || dim == setup.dim(),
            "{}: {dim} value columns, expected {} (velocity) or {} (full state)",
            path.display(),
            setup.velocity_dim(),
            setup.dim()
        );
        let n = self.grid.n();
        let mut values = DMatrix::zeros(n, dim);
        let mut rows = 0;
        for (j, record) in reader.records().enumerate() {
            let record = record?;
            ensure!(j < n, "{}: more than n = {n} rows", path.display());
            let parsed: Vec<f64> = record
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("{}: row {}", path.display(), j + 1))?;
            let t = self.grid.time(j);
            ensure!(
                (parsed[0] - t).abs() <= 1e-9 * (t.abs() + self.grid.dt()),
                "{}: row {} has t = {}, the grid expects {t}",
                path.display(),
                j + 1,
                parsed[0]
            );
            for i in 0..dim {
                values[(j, i)] = parsed[i + 1];
            }
            rows += 1;
        }
        ensure!(rows == n, "{}: {rows} rows, expected n = {n}", path.display());
        Ok(WeightedSignal::new(self.grid, self.nu, values)?)
    }

    fn full_rhs(&self, setup: &SpatialSetup, f: WeightedSignal) -> Result<WeightedSignal, Failure> {
        if f.dim() == setup.dim() {
            return Ok(f);
        }
        f.stack(&WeightedSignal::zeros(self.grid, self.nu, setup.stress_dim()).config()?)
            .config()
    }

    fn problem(&self) -> Result<(EvolutionaryProblem, Option<f64>), Failure> {
        let setup = build_setup(self.config.space.m, self.config.space.bc).config()?;
        let [mu, c, d] = fields(&self.config)?;
        let law: MaterialLaw = assemble_law(
            &setup,
            &mu,
            &c,
            &d,
            self.config.alpha,
            self.nu,
            self.config.k_bound,
        )
        .numerical()?;
        let (f, support) = self.forcing(&setup)?;
        let rhs = self.full_rhs(&setup, f)?;
        Ok((
            EvolutionaryProblem {
                law,
                setup,
                projection: None,
                nu: self.nu,
                rhs,
            },
            support,
        ))
    }
}

pub struct Outcome {
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn create_output_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .config()
}

pub fn execute(resolved: &Resolved) -> Result<Outcome, Failure> {
    create_output_dir(&resolved.config.output_dir)?;
    match resolved.config.mode {
        Mode::Verify => verify(resolved),
        Mode::Solve => solve_mode(resolved),
        Mode::Homogenize => homogenize(resolved),
    }
}

fn report<'a>(
    resolved: &Resolved,
    config: &'a ExperimentConfig,
    mode: &'static str,
    checks: Vec<Check>,
) -> RunReport<'a, ExperimentConfig> {
    RunReport {
        mode,
        config,
        nu: resolved.nu,
        nu0: resolved.nu0,
        dt: resolved.grid.dt(),
        checks,
        solver: None,
        homogenization: None,
        weak_decay: None,
    }
}

fn verify(resolved: &Resolved) -> Result<Outcome, Failure> {
    let (problem, support) = resolved.problem()?;
    let k = resolved.config.k_bound;
    let mut checks = Vec::new();

    let rhs_norm = weighted_norm(&problem.rhs);
    let spec = fourier_laplace(&problem.rhs);
    let unitarity = if rhs_norm > 0.0 {
        (spec.l2_norm() - rhs_norm).abs() / rhs_norm
    } else {
        spec.l2_norm()
    };
    checks.push(Check::at_most("unitarity", unitarity, UNITARITY_TOL, String::new()));
    let back = inverse_fourier_laplace(&spec);
    let round_trip = weighted_norm(&back.sub(&problem.rhs).numerical()?) / rhs_norm.max(f64::MIN_POSITIVE);
    checks.push(Check::at_most("round_trip", round_trip, ROUND_TRIP_TOL, String::new()));

    let c_report = check_c_condition(
        &problem.law,
        1.0 / k,
        &resolved.grid,
        resolved.nu,
        BOUNDARY_POINTS,
        PROBES,
        resolved.config.seed,
    );
    checks.push(Check::at_least(
        "positivity",
        c_report.min_constant,
        1.0 / k,
        format!("probe minimum {:.6e} over {} points", c_report.probe_min, c_report.n_points),
    ));

    let sol = solve(&problem).numerical()?;
    let ratio = if rhs_norm > 0.0 {
        weighted_norm(&sol.u) / rhs_norm
    } else {
        0.0
    };
    checks.push(Check::at_most(
        "norm_bound",
        ratio,
        k * (1.0 + NORM_BOUND_SLACK),
        "|u| / |rhs| against K".into(),
    ));
    checks.push(Check::at_most(
        "residual",
        sol.report.relative_residual,
        RESIDUAL_TOL,
        String::new(),
    ));
    match support {
        Some(a) => {
            let probe = causality_probe(&problem, a).numerical()?;
            checks.push(Check::at_most(
                "causality",
                probe,
                CAUSALITY_TOL,
                format!("rhs vanishes before t = {a:.6e}"),
            ));
        }
        None => eprintln!("causality: skipped, the rhs has no quiet start"),
    }

    let config = resolved.resolved_config();
    let mut rep = report(resolved, &config, "verify", checks.clone());
    rep.solver = Some(SolverSummary::from(&sol.report));
    write_json(&resolved.config.output_dir.join("report.json"), &rep).config()?;
    Ok(Outcome { checks })
}

fn solve_mode(resolved: &Resolved) -> Result<Outcome, Failure> {
    let (problem, _) = resolved.problem()?;
    let sol = solve(&problem).numerical()?;
    let finite = sol.u.values().iter().all(|v| v.is_finite());
    let checks = vec![
        Check::at_most(
            "residual",
            sol.report.relative_residual,
            RESIDUAL_TOL,
            String::new(),
        ),
        Check::at_least("finite", if finite { 1.0 } else { 0.0 }, 1.0, String::new()),
    ];
    let dir = &resolved.config.output_dir;
    write_signal_csv(&dir.join("solution.csv"), &sol.u).config()?;
    let config = resolved.resolved_config();
    let mut rep = report(resolved, &config, "solve", checks.clone());
    rep.solver = Some(SolverSummary::from(&sol.report));
    write_json(&dir.join("report.json"), &rep).config()?;
    Ok(Outcome { checks })
}

fn homogenize(resolved: &Resolved) -> Result<Outcome, Failure> {
    let mut s = study(&resolved.config)?;
    s.nu_override = Some(resolved.nu);
    s.grid = resolved.grid;
    let setup = s.setup().config()?;
    let (forcing, _) = resolved.forcing(&setup)?;
    s.forcing = forcing;
    let tf = &resolved.config.test_functions;
    let times: Vec<f64> = tf
        .times
        .iter()
        .map(|f| resolved.grid.t_start() + f * resolved.window())
        .collect();
    let shapes: Vec<fn(f64) -> f64> = tf.shapes.iter().map(|s| s.as_fn()).collect();
    s.test_functions = gaussian_test_functions(
        &setup,
        &resolved.grid,
        resolved.nu,
        &times,
        tf.width * resolved.window(),
        &shapes,
    )
    .config()?;

    let hr = s.run().numerical()?;
    let all_finite = hr
        .weak_errors
        .iter()
        .flatten()
        .chain(&hr.strong_errors)
        .all(|v| v.is_finite());
    let checks = vec![
        Check::at_least("finite", if all_finite { 1.0 } else { 0.0 }, 1.0, String::new()),
        Check::at_most("residual", hr.max_relative_residual, RESIDUAL_TOL, String::new()),
    ];
    let maxima = hr.max_weak_errors();
    let decay = match (maxima.first(), maxima.last()) {
        (Some(&first), Some(&last)) if first > 0.0 => Some(last / first),
        _ => None,
    };
    for (k, e) in hr.k_list.iter().zip(&maxima) {
        println!("k = {k:>4}: max weak error {e:.6e}");
    }
    let dir = &resolved.config.output_dir;
    write_convergence_csv(&dir.join("convergence.csv"), &hr).config()?;
    let config = resolved.resolved_config();
    let mut rep = report(resolved, &config, "homogenize", checks.clone());
    rep.homogenization = Some(hr);
    rep.weak_decay = decay;
    write_json(&dir.join("report.json"), &rep).config()?;
    Ok(Outcome { checks })
}
