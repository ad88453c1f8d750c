//! Periodic coefficients `x -> p(k x)`, their effective means, the limit
//! law with memory kernels `K_l = int c^l / D^{l+1}`, and the weak
//! convergence study `u_k -> u_hom`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material_law::{
    check_alpha, check_c_condition, frac_elasticity_law, homogenized_law, select_nu0_from_bounds,
    CoefficientBounds, CoefficientField, MaterialLaw, SeriesTruncation,
};
use crate::solver::{assemble_law, solve, EvolutionaryProblem};
use crate::spatial_operators::{build_setup, BoundaryCondition, SpatialSetup};
use crate::weighted_time::{cutoff, weighted_inner, weighted_norm, TimeGrid, WeightedSignal};

/// One period of a coefficient on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    /// `a` on `[0, split)`, `b` on `[split, 1)`.
    TwoPhase { a: f64, b: f64, split: f64 },
    /// `mean + amp sin(2 pi y)`.
    Sinusoid { mean: f64, amp: f64 },
}

impl Profile {
    pub fn eval(&self, y: f64) -> f64 {
        let y = y.rem_euclid(1.0);
        match *self {
            Profile::Constant { value } => value,
            Profile::TwoPhase { a, b, split } => {
                if y < split {
                    a
                } else {
                    b
                }
            }
            Profile::Sinusoid { mean, amp } => mean + amp * (2.0 * std::f64::consts::PI * y).sin(),
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::TwoPhase { a, b, .. } => a.min(b),
            Profile::Sinusoid { mean, amp } => mean - amp.abs(),
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::TwoPhase { a, b, .. } => a.max(b),
            Profile::Sinusoid { mean, amp } => mean + amp.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Profile::TwoPhase { split, .. } = *self {
            if !(split > 0.0 && split < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "two-phase split {split} must lie in (0, 1)"
                )));
            }
        }
        let finite = match *self {
            Profile::Constant { value } => value.is_finite(),
            Profile::TwoPhase { a, b, split } => a.is_finite() && b.is_finite() && split.is_finite(),
            Profile::Sinusoid { mean, amp } => mean.is_finite() && amp.is_finite(),
        };
        if !finite {
            return Err(Error::InvalidParameter("non-finite profile parameter".into()));
        }
        Ok(())
    }
}

/// Period-1 coefficient with a certified lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCoefficient {
    pub profile: Profile,
    pub lower_bound: f64,
}

impl PeriodicCoefficient {
    pub fn new(profile: Profile, lower_bound: f64) -> Result<Self> {
        profile.validate()?;
        if profile.min() < lower_bound {
            return Err(Error::InvalidParameter(format!(
                "profile minimum {} below the lower bound {lower_bound}",
                profile.min()
            )));
        }
        Ok(Self {
            profile,
            lower_bound,
        })
    }

    /// Lower bound taken from the profile itself.
    pub fn from_profile(profile: Profile) -> Result<Self> {
        Self::new(profile, profile.min())
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::from_profile(Profile::Constant { value })
    }

    pub fn two_phase(a: f64, b: f64) -> Result<Self> {
        Self::from_profile(Profile::TwoPhase { a, b, split: 0.5 })
    }

    fn require_positive(&self, name: &'static str) -> Result<()> {
        if self.lower_bound <= 0.0 {
            return Err(Error::NonPositiveCoefficient {
                name,
                value: self.lower_bound,
            });
        }
        Ok(())
    }
}

/// Cell-centre samples of `x -> p(k x)` on `m` cells of `(0, 1)`.
pub fn oscillate(p: &PeriodicCoefficient, k: usize, m: usize) -> Result<CoefficientField> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("k = {k}, m = {m} must be positive")));
    }
    if matches!(p.profile, Profile::TwoPhase { .. }) && !m.is_multiple_of(2 * k) {
        return Err(Error::MisalignedGrid { m, k });
    }
    let samples = (0..m)
        .map(|j| p.profile.eval(k as f64 * (j as f64 + 0.5) / m as f64))
        .collect();
    CoefficientField::new(samples, p.lower_bound)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    /// `int mu`
    pub mu_mean: f64,
    /// `int 1/D`
    pub dinv_mean: f64,
    /// `int c`
    pub c_mean: f64,
    /// `K_l = int c^l / D^{l+1}` for `l = 1..=l_max`.
    pub k_table: Vec<f64>,
}

impl EffectiveCoefficients {
    /// Harmonic mean `(int 1/D)^{-1}`.
    pub fn effective_stiffness(&self) -> f64 {
        1.0 / self.dinv_mean
    }
}

/// Composite midpoint rule over one period with `n_quad` points.
pub fn effective_coefficients(
    mu: &PeriodicCoefficient,
    c: &PeriodicCoefficient,
    d: &PeriodicCoefficient,
    l_max: usize,
    n_quad: usize,
) -> Result<EffectiveCoefficients> {
    if n_quad < 2 {
        return Err(Error::InvalidParameter(format!("n_quad = {n_quad}, need at least 2")));
    }
    d.require_positive("D")?;
    let w = 1.0 / n_quad as f64;
    let ys: Vec<f64> = (0..n_quad).map(|i| (i as f64 + 0.5) * w).collect();
    let mean = |f: &dyn Fn(f64) -> f64| ys.iter().map(|&y| f(y)).sum::<f64>() * w;
    let k_table = (1..=l_max)
        .map(|l| {
            mean(&|y| {
                let dy = d.profile.eval(y);
                c.profile.eval(y).powi(l as i32) / dy.powi(l as i32 + 1)
            })
        })
        .collect();
    Ok(EffectiveCoefficients {
        mu_mean: mean(&|y| mu.profile.eval(y)),
        dinv_mean: mean(&|y| 1.0 / d.profile.eval(y)),
        c_mean: mean(&|y| c.profile.eval(y)),
        k_table,
    })
}

/// `sum_j <u(t_j), phi(t_j)> exp(-2 nu t_j) dt`.
pub fn weak_pairing(u: &WeightedSignal, phi: &WeightedSignal) -> Result<f64> {
    weighted_inner(u, phi)
}

/// `a -> sup_k |chi_{t <= a} f_k|` at every `a` of the ladder.
pub fn equi_integrability_check(f_list: &[WeightedSignal], ladder: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(first) = f_list.first() {
        for f in f_list {
            if f.grid() != first.grid() || f.nu() != first.nu() {
                return Err(Error::DimensionMismatch(
                    "signals must share grid and weight".into(),
                ));
            }
        }
    }
    Ok(ladder
        .iter()
        .map(|&a| {
            let sup = f_list
                .iter()
                .map(|f| weighted_norm(&cutoff(f, a)))
                .fold(0.0, f64::max);
            (a, sup)
        })
        .collect())
}

/// Uniform bounds of `mu`, `c`, `D` over one period, valid for every `k`.
pub fn profile_bounds(
    mu: &PeriodicCoefficient,
    c: &PeriodicCoefficient,
    d: &PeriodicCoefficient,
) -> Result<CoefficientBounds> {
    mu.require_positive("mu")?;
    d.require_positive("D")?;
    // |c/D| is sampled densely; two-phase and constant profiles are exact
    let samples = 1 << 14;
    let mut c_over_d_max: f64 = 0.0;
    for i in 0..samples {
        let y = (i as f64 + 0.5) / samples as f64;
        c_over_d_max = c_over_d_max.max((c.profile.eval(y) / d.profile.eval(y)).abs());
    }
    for y in [0.0, 0.25, 0.5, 0.75] {
        c_over_d_max = c_over_d_max.max((c.profile.eval(y) / d.profile.eval(y)).abs());
    }
    Ok(CoefficientBounds {
        mu_min: mu.lower_bound,
        d_min: d.lower_bound,
        d_max: d.profile.max(),
        c_abs_max: c.profile.min().abs().max(c.profile.max().abs()),
        c_over_d_max,
    })
}

/// Gaussian test functions: `len(times) x len(profiles)` separable signals
/// over the full `(v, T)` state of a Dirichlet grid.
pub fn gaussian_test_functions(
    setup: &SpatialSetup,
    grid: &TimeGrid,
    nu: f64,
    times: &[f64],
    width: f64,
    profiles: &[fn(f64) -> f64],
) -> Result<Vec<WeightedSignal>> {
    let positions: Vec<f64> = setup
        .velocity_positions()
        .into_iter()
        .chain(setup.stress_positions())
        .collect();
    let mut out = Vec::with_capacity(times.len() * profiles.len());
    for &center in times {
        for profile in profiles {
            let spatial: Vec<f64> = positions.iter().map(|&x| profile(x)).collect();
            out.push(WeightedSignal::separable(
                *grid,
                nu,
                |t| (-((t - center) / width).powi(2) / 2.0).exp(),
                &spatial,
            )?);
        }
    }
    Ok(out)
}

/// Spatial profiles of the default test family.
pub const DEFAULT_TEST_PROFILES: [fn(f64) -> f64; 3] = [
    |_| 1.0,
    |x| (std::f64::consts::PI * x).sin(),
    |x| x,
];

/// Bumps at 15%, 25% and 35% of the window, width 4% of it, against
/// [`DEFAULT_TEST_PROFILES`].
pub fn default_test_functions(m: usize, grid: &TimeGrid) -> Result<Vec<WeightedSignal>> {
    let setup = build_setup(m, BoundaryCondition::Dirichlet)?;
    let len = grid.t_end() - grid.t_start();
    let times: Vec<f64> = [0.15, 0.25, 0.35].iter().map(|s| grid.t_start() + s * len).collect();
    gaussian_test_functions(&setup, grid, 1.0, &times, 0.04 * len, &DEFAULT_TEST_PROFILES)
}

/// Velocity forcing `exp(-((t - t_c)/w)^2 / 2) sin(pi x)` with
/// `w = len/100` and `t_c = t_start + 8w`, so it is negligible before
/// `t_start`.
pub fn default_forcing(m: usize, grid: &TimeGrid) -> Result<WeightedSignal> {
    let setup = build_setup(m, BoundaryCondition::Dirichlet)?;
    let width = (grid.t_end() - grid.t_start()) / 100.0;
    let center = grid.t_start() + 8.0 * width;
    let profile: Vec<f64> = setup
        .velocity_positions()
        .iter()
        .map(|&x| (std::f64::consts::PI * x).sin())
        .collect();
    WeightedSignal::separable(
        *grid,
        1.0,
        |t| (-((t - center) / width).powi(2) / 2.0).exp(),
        &profile,
    )
}

/// One-shot form of [`HomogenizationStudy::run`] with the default series
/// cuts and quadrature.
#[allow(clippy::too_many_arguments)]
pub fn run_convergence_study(
    mu: &PeriodicCoefficient,
    c: &PeriodicCoefficient,
    d: &PeriodicCoefficient,
    alpha: f64,
    k_bound: f64,
    k_list: &[usize],
    m: usize,
    grid: &TimeGrid,
    forcing: &WeightedSignal,
    test_functions: &[WeightedSignal],
) -> Result<HomogReport> {
    HomogenizationStudy {
        mu: *mu,
        c: *c,
        d: *d,
        alpha,
        k_bound,
        k_list: k_list.to_vec(),
        m,
        grid: *grid,
        nu_override: None,
        l_max: SeriesTruncation::DEFAULT_L_MAX,
        k_max: SeriesTruncation::DEFAULT_K_MAX,
        n_quad: DEFAULT_N_QUAD,
        forcing: forcing.clone(),
        test_functions: test_functions.to_vec(),
    }
    .run()
}

/// Midpoint points per period; a multiple of every small split denominator.
pub const DEFAULT_N_QUAD: usize = 3 * 1024;

/// Oscillating Dirichlet problems with coefficients `p(k x)` against their
/// limit. The weight `nu` is the certified `nu0(K)` of the profile bounds
/// unless overridden (the override may not be smaller).
#[derive(Debug, Clone)]
pub struct HomogenizationStudy {
    pub mu: PeriodicCoefficient,
    pub c: PeriodicCoefficient,
    pub d: PeriodicCoefficient,
    pub alpha: f64,
    pub k_bound: f64,
    pub k_list: Vec<usize>,
    pub m: usize,
    pub grid: TimeGrid,
    pub nu_override: Option<f64>,
    pub l_max: usize,
    pub k_max: usize,
    pub n_quad: usize,
    /// `F` (one component per interior node) or the full `(F, G)`; its
    /// weight is replaced by the study's `nu`.
    pub forcing: WeightedSignal,
    /// Functionals over the full `(v, T)` state; reweighted like `forcing`.
    pub test_functions: Vec<WeightedSignal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogReport {
    pub alpha: f64,
    pub nu: f64,
    pub m: usize,
    pub k_list: Vec<usize>,
    /// `weak_errors[i][j] = |<u_k - u_hom, phi_j>|` for `k = k_list[i]`.
    pub weak_errors: Vec<Vec<f64>>,
    /// Same pairings against the kernel-free law `diag(int mu, (int c + z^-alpha (int 1/D)^-1)^-1)`.
    pub naive_weak_errors: Vec<Vec<f64>>,
    /// `|v_k - v_hom|` in the weighted norm.
    pub strong_errors: Vec<f64>,
    /// `|<u_hom, phi_j>|`, the scale of the pairings.
    pub pairing_scale: Vec<f64>,
    pub mu_mean: f64,
    pub dinv_mean: f64,
    pub c_mean: f64,
    pub k_table: Vec<f64>,
    pub truncation: SeriesTruncation,
    pub max_relative_residual: f64,
}

impl HomogReport {
    pub fn max_weak_errors(&self) -> Vec<f64> {
        self.weak_errors
            .iter()
            .map(|row| row.iter().cloned().fold(0.0, f64::max))
            .collect()
    }

    pub fn max_naive_weak_errors(&self) -> Vec<f64> {
        self.naive_weak_errors
            .iter()
            .map(|row| row.iter().cloned().fold(0.0, f64::max))
            .collect()
    }

    /// Rows `(k, phi_index, weak_error, strong_error_v)`.
    pub fn convergence_rows(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut rows = Vec::new();
        for (i, &k) in self.k_list.iter().enumerate() {
            for (j, &e) in self.weak_errors[i].iter().enumerate() {
                rows.push((k, j, e, self.strong_errors[i]));
            }
        }
        rows
    }
}

/// `|u_hom(l_lo) - u_hom(l_hi)|` against the geometric bound
/// `nu^{1-alpha} (int 1/D) q^{l_lo+1} / (1 - q) |f| / (c_lo c_hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub l_lo: usize,
    pub l_hi: usize,
    pub difference: f64,
    pub bound: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl HomogenizationStudy {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.mu.require_positive("mu")?;
        self.d.require_positive("D")?;
        if self.k_list.is_empty() {
            return Err(Error::InvalidParameter("empty k_list".into()));
        }
        for &k in &self.k_list {
            if k == 0 || !self.m.is_multiple_of(2 * k) {
                return Err(Error::MisalignedGrid { m: self.m, k });
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<CoefficientBounds> {
        profile_bounds(&self.mu, &self.c, &self.d)
    }

    pub fn nu0(&self) -> Result<f64> {
        select_nu0_from_bounds(&self.bounds()?, self.alpha, self.k_bound)
    }

    pub fn nu(&self) -> Result<f64> {
        let nu0 = self.nu0()?;
        match self.nu_override {
            Some(nu) if nu < nu0 => Err(Error::NuBelowNu0 { nu, nu0 }),
            Some(nu) => Ok(nu),
            None => Ok(nu0),
        }
    }

    pub fn setup(&self) -> Result<SpatialSetup> {
        build_setup(self.m, BoundaryCondition::Dirichlet)
    }

    pub fn effective(&self) -> Result<EffectiveCoefficients> {
        effective_coefficients(&self.mu, &self.c, &self.d, self.l_max, self.n_quad)
    }

    pub fn truncation(&self, l_max: usize) -> Result<SeriesTruncation> {
        let q = self.bounds()?.c_over_d_max * self.nu()?.powf(-self.alpha);
        SeriesTruncation::new(l_max, self.k_max, q)
    }

    /// `(F, G)` on the Dirichlet grid, weighted with the study's `nu`.
    pub fn rhs(&self) -> Result<WeightedSignal> {
        let setup = self.setup()?;
        let nu = self.nu()?;
        let f = self.forcing.with_nu(nu)?;
        if f.grid() != &self.grid {
            return Err(Error::DimensionMismatch("forcing grid differs from the study grid".into()));
        }
        if f.dim() == setup.dim() {
            Ok(f)
        } else if f.dim() == setup.velocity_dim() {
            f.stack(&WeightedSignal::zeros(self.grid, nu, setup.stress_dim())?)
        } else {
            Err(Error::DimensionMismatch(format!(
                "forcing has {} components, expected {} or {}",
                f.dim(),
                setup.velocity_dim(),
                setup.dim()
            )))
        }
    }

    pub fn test_functions(&self) -> Result<Vec<WeightedSignal>> {
        let nu = self.nu()?;
        let dim = self.setup()?.dim();
        self.test_functions
            .iter()
            .map(|phi| {
                if phi.dim() != dim || phi.grid() != &self.grid {
                    return Err(Error::DimensionMismatch(format!(
                        "test function of dimension {}, expected {dim} on the study grid",
                        phi.dim()
                    )));
                }
                phi.with_nu(nu)
            })
            .collect()
    }

    fn solve_with(&self, law: MaterialLaw) -> Result<crate::solver::Solution> {
        solve(&EvolutionaryProblem {
            law,
            setup: self.setup()?,
            projection: None,
            nu: self.nu()?,
            rhs: self.rhs()?,
        })
    }

    pub fn oscillating_law(&self, k: usize) -> Result<MaterialLaw> {
        let setup = self.setup()?;
        assemble_law(
            &setup,
            &oscillate(&self.mu, k, self.m)?,
            &oscillate(&self.c, k, self.m)?,
            &oscillate(&self.d, k, self.m)?,
            self.alpha,
            self.nu()?,
            self.k_bound,
        )
    }

    pub fn homogenized(&self, l_max: usize) -> Result<MaterialLaw> {
        let eff = effective_coefficients(&self.mu, &self.c, &self.d, l_max, self.n_quad)?;
        homogenized_law(
            eff.mu_mean,
            eff.dinv_mean,
            &eff.k_table,
            self.alpha,
            &self.truncation(l_max)?,
            self.nu()?,
        )
    }

    /// Constant law `diag(int mu, (int c + z^-alpha (int 1/D)^-1)^-1)`.
    pub fn naive(&self) -> Result<MaterialLaw> {
        let eff = self.effective()?;
        let setup = self.setup()?;
        frac_elasticity_law(
            &CoefficientField::constant(setup.velocity_dim(), eff.mu_mean)?,
            &CoefficientField::constant(setup.stress_dim(), eff.c_mean)?,
            &CoefficientField::constant(setup.stress_dim(), eff.effective_stiffness())?,
            self.alpha,
            self.nu()?,
        )
    }

    pub fn solve_oscillating(&self, k: usize) -> Result<crate::solver::Solution> {
        self.solve_with(self.oscillating_law(k)?)
    }

    pub fn solve_homogenized(&self, l_max: usize) -> Result<crate::solver::Solution> {
        self.solve_with(self.homogenized(l_max)?)
    }

    pub fn solve_naive(&self) -> Result<crate::solver::Solution> {
        self.solve_with(self.naive()?)
    }

    pub fn run(&self) -> Result<HomogReport> {
        self.validate()?;
        let nu = self.nu()?;
        let eff = self.effective()?;
        let phis = self.test_functions()?;
        let hom = self.solve_homogenized(self.l_max)?;
        let naive = self.solve_naive()?;
        let p = self.setup()?.velocity_dim();

        let pair_all = |u: &WeightedSignal| -> Result<Vec<f64>> {
            phis.iter().map(|phi| weak_pairing(u, phi)).collect()
        };
        let hom_pairs = pair_all(&hom.u)?;
        let naive_pairs = pair_all(&naive.u)?;

        let per_k: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = self
            .k_list
            .par_iter()
            .map(|&k| {
                let sol = self.solve_oscillating(k)?;
                let pairs = pair_all(&sol.u)?;
                let weak = pairs.iter().zip(&hom_pairs).map(|(a, b)| (a - b).abs()).collect();
                let naive_weak = pairs.iter().zip(&naive_pairs).map(|(a, b)| (a - b).abs()).collect();
                let strong = weighted_norm(&sol.u.block(0, p).sub(&hom.u.block(0, p))?);
                Ok((weak, naive_weak, strong, sol.report.relative_residual))
            })
            .collect::<Result<_>>()?;

        let mut max_residual = hom.report.relative_residual.max(naive.report.relative_residual);
        let mut weak_errors = Vec::new();
        let mut naive_weak_errors = Vec::new();
        let mut strong_errors = Vec::new();
        for (weak, naive_weak, strong, residual) in per_k {
            weak_errors.push(weak);
            naive_weak_errors.push(naive_weak);
            strong_errors.push(strong);
            max_residual = max_residual.max(residual);
        }
        Ok(HomogReport {
            alpha: self.alpha,
            nu,
            m: self.m,
            k_list: self.k_list.clone(),
            weak_errors,
            naive_weak_errors,
            strong_errors,
            pairing_scale: hom_pairs.iter().map(|v| v.abs()).collect(),
            mu_mean: eff.mu_mean,
            dinv_mean: eff.dinv_mean,
            c_mean: eff.c_mean,
            k_table: eff.k_table,
            truncation: self.truncation(self.l_max)?,
            max_relative_residual: max_residual,
        })
    }

    /// Compares the limit solutions for two series cuts.
    pub fn truncation_check(&self, l_lo: usize, l_hi: usize, seed: u64) -> Result<TruncationCheck> {
        let nu = self.nu()?;
        let lo_law = self.homogenized(l_lo)?;
        let hi_law = self.homogenized(l_hi)?;
        let c_lo = check_c_condition(&lo_law, 0.0, &self.grid, nu, 64, 1, seed).min_constant;
        let c_hi = check_c_condition(&hi_law, 0.0, &self.grid, nu, 64, 1, seed).min_constant;
        if c_lo <= 0.0 || c_hi <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "limit laws are not positive at nu = {nu} ({c_lo}, {c_hi})"
            )));
        }
        let lo = self.solve_with(lo_law)?;
        let hi = self.solve_with(hi_law)?;
        let q = self.truncation(l_lo)?.q;
        let eff = self.effective()?;
        let bound = nu.powf(1.0 - self.alpha) * eff.dinv_mean * q.powi(l_lo as i32 + 1) / (1.0 - q)
            * weighted_norm(&self.rhs()?)
            / (c_lo * c_hi);
        Ok(TruncationCheck {
            l_lo,
            l_hi,
            difference: weighted_norm(&lo.u.sub(&hi.u)?),
            bound,
            c_lo,
            c_hi,
        })
    }
}
