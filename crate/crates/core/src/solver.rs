//! Causal solution operator `(d/dt M(d/dt^{-1}) + A)^{-1}`, one linear solve
//! per frequency of the discrete Fourier-Laplace transform.
//!
//! With `w = i t + nu` the frequency system is
//! `[[w mu, G^T], [-G, w sigma]] (v, T) = (F, G_s)`. The stress row is
//! eliminated, `T = (w sigma)^{-1} (G_s + G v)`, leaving
//! `(w mu + G^T (w sigma)^{-1} G) v = F - G^T (w sigma)^{-1} G_s`, which is
//! tridiagonal for diagonal coefficient blocks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material_law::{
    frac_elasticity_law, select_nu0, BlockOp, CoefficientField, LawValue, MaterialLaw,
};
use crate::spatial_operators::{
    build_projection, build_setup, BoundaryCondition, RangeProjection, SpatialSetup,
};
use crate::weighted_time::{
    cutoff, fourier_laplace, frequency_point, inverse_fourier_laplace, weighted_norm,
    SpectralSignal, TimeGrid, WeightedSignal,
};

type C64 = Complex64;

/// Relative slack when comparing `nu` against the law's `nu0`.
const NU_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EvolutionaryProblem {
    pub law: MaterialLaw,
    pub setup: SpatialSetup,
    /// When present the stress unknown lives in the range of `G`, in the
    /// coordinates of `projection.basis`.
    pub projection: Option<RangeProjection>,
    pub nu: f64,
    pub rhs: WeightedSignal,
}

impl EvolutionaryProblem {
    pub fn stress_dim(&self) -> usize {
        match &self.projection {
            Some(p) => p.rank,
            None => self.setup.stress_dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.setup.velocity_dim() + self.stress_dim()
    }

    /// Same operator, different right-hand side.
    pub fn with_rhs(&self, rhs: WeightedSignal) -> Self {
        Self {
            rhs,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolvePath {
    /// Thomas elimination of the tridiagonal velocity system.
    Tridiagonal,
    /// LU factorisation of a dense velocity system.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub path: SolvePath,
    pub frequencies: usize,
    /// Smallest lower bound of `Re (i t + nu) M` over the frequencies.
    pub min_coercivity: f64,
    /// Upper bound of the condition number of each frequency system,
    /// `(|w| ||M|| + ||A||) / coercivity`, in DFT order.
    pub condition_bounds: Vec<f64>,
    pub max_condition_bound: f64,
    pub worst_frequency: f64,
    /// Weighted norm of the defect divided by the weighted norm of the rhs.
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Velocity block followed by the stress block.
    pub u: WeightedSignal,
    pub velocity_dim: usize,
    /// Weighted norm of the defect `(d/dt M + A) u - rhs`, evaluated per
    /// frequency.
    pub residual: f64,
    pub report: SolverReport,
}

impl Solution {
    pub fn velocity(&self) -> WeightedSignal {
        self.u.block(0, self.velocity_dim)
    }

    pub fn stress(&self) -> WeightedSignal {
        self.u.block(self.velocity_dim, self.u.dim() - self.velocity_dim)
    }
}

enum StressInverse {
    Diagonal(Vec<C64>),
    Dense(DMatrix<C64>),
}

impl StressInverse {
    fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        match self {
            StressInverse::Diagonal(d) => {
                DVector::from_iterator(x.len(), x.iter().zip(d).map(|(a, b)| a * b))
            }
            StressInverse::Dense(m) => m * x,
        }
    }
}

struct FrequencyOutput {
    u: DVector<C64>,
    residual_sq: f64,
    coercivity: f64,
    condition_bound: f64,
}

struct ProjectedGeometry {
    q: DMatrix<C64>,
    g: DMatrix<C64>,
}

struct Context<'a> {
    law: &'a MaterialLaw,
    setup: &'a SpatialSetup,
    projected: Option<ProjectedGeometry>,
    grad_norm: f64,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Lower bound of the smallest eigenvalue of the Hermitian part of `s B`
/// (exact for diagonal blocks, Gershgorin otherwise).
fn hermitian_lower_bound(block: &BlockOp, s: C64) -> f64 {
    match block {
        BlockOp::Dense(m) => {
            let b = m * s;
            (0..b.nrows())
                .map(|i| {
                    let off: f64 = (0..b.ncols())
                        .filter(|&j| j != i)
                        .map(|j| 0.5 * (b[(i, j)] + b[(j, i)].conj()).norm())
                        .sum();
                    b[(i, i)].re - off
                })
                .fold(f64::INFINITY, f64::min)
        }
        other => other.min_hermitian_eigenvalue(s),
    }
}

fn block_norm_bound(block: &BlockOp) -> f64 {
    match block {
        BlockOp::Dense(m) => m.norm(),
        other => other.norm(),
    }
}

/// Thomas elimination for a complex tridiagonal system; `None` on a zero pivot.
fn thomas(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &DVector<C64>) -> Option<DVector<C64>> {
    let n = diag.len();
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut pivot = diag[0];
    if pivot.norm() == 0.0 {
        return None;
    }
    if n > 1 {
        c[0] = sup[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if pivot.norm() == 0.0 || !pivot.is_finite() {
            return None;
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = DVector::from_element(n, C64::new(0.0, 0.0));
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

impl Context<'_> {
    fn stress_dim(&self) -> usize {
        match &self.projected {
            Some(p) => p.q.ncols(),
            None => self.setup.stress_dim(),
        }
    }

    fn apply_g(&self, v: &DVector<C64>) -> DVector<C64> {
        match &self.projected {
            Some(p) => &p.g * v,
            None => {
                let grad = self.setup.gradient();
                DVector::from_fn(grad.nrows(), |i, _| {
                    grad.row(i).iter().map(|&(j, g)| v[j] * g).sum()
                })
            }
        }
    }

    fn apply_gt(&self, t: &DVector<C64>) -> DVector<C64> {
        match &self.projected {
            Some(p) => p.g.ad_mul(t),
            None => {
                let grad = self.setup.gradient();
                let mut out = DVector::from_element(grad.ncols(), C64::new(0.0, 0.0));
                for i in 0..grad.nrows() {
                    for &(j, g) in grad.row(i) {
                        out[j] += t[i] * g;
                    }
                }
                out
            }
        }
    }

    /// `(w sigma)^{-1}`, or its projected counterpart `Q^T sigma^{-1} Q / w`.
    fn stress_inverse(&self, stress: &BlockOp, w: C64, freq: f64) -> Result<StressInverse> {
        let singular = || Error::SingularFrequencySystem { frequency: freq };
        let q = self.setup.stress_dim();
        match &self.projected {
            None => Ok(match stress {
                BlockOp::Scalar(s) => StressInverse::Diagonal(vec![(w * s).inv(); q]),
                BlockOp::Diagonal(d) => {
                    StressInverse::Diagonal(d.iter().map(|s| (w * s).inv()).collect())
                }
                BlockOp::Dense(s) => {
                    StressInverse::Dense((s * w).try_inverse().ok_or_else(singular)?)
                }
            }),
            Some(p) => {
                let winv = w.inv();
                let compressed = match stress {
                    BlockOp::Scalar(s) => {
                        DMatrix::from_diagonal_element(p.q.ncols(), p.q.ncols(), winv / s)
                    }
                    BlockOp::Diagonal(d) => {
                        let mut scaled = p.q.clone();
                        for (i, mut row) in scaled.row_iter_mut().enumerate() {
                            row *= winv / d[i];
                        }
                        p.q.ad_mul(&scaled)
                    }
                    BlockOp::Dense(s) => {
                        let inv = s.clone().try_inverse().ok_or_else(singular)?;
                        p.q.ad_mul(&(inv * &p.q)) * winv
                    }
                };
                Ok(StressInverse::Dense(compressed))
            }
        }
    }

    fn velocity_system(
        &self,
        velocity: &BlockOp,
        winv: &StressInverse,
        w: C64,
        rhs: &DVector<C64>,
        freq: f64,
    ) -> Result<DVector<C64>> {
        let p = self.setup.velocity_dim();
        let singular = || Error::SingularFrequencySystem { frequency: freq };
        if let (None, StressInverse::Diagonal(wd), Some(mu)) =
            (&self.projected, winv, velocity.diagonal(p))
        {
            let zero = C64::new(0.0, 0.0);
            let mut diag: Vec<C64> = mu.iter().map(|m| m * w).collect();
            let mut sub = vec![zero; p.saturating_sub(1)];
            let mut sup = vec![zero; p.saturating_sub(1)];
            let grad = self.setup.gradient();
            for (i, &wi) in wd.iter().enumerate() {
                let row = grad.row(i);
                for &(a, ga) in row {
                    for &(b, gb) in row {
                        let v = wi * (ga * gb);
                        match b as isize - a as isize {
                            0 => diag[a] += v,
                            1 => sup[a] += v,
                            -1 => sub[b] += v,
                            _ => unreachable!("gradient couples neighbouring unknowns only"),
                        }
                    }
                }
            }
            return thomas(&sub, &diag, &sup, rhs).ok_or_else(singular);
        }

        let g = match &self.projected {
            Some(pg) => pg.g.clone(),
            None => to_complex(self.setup.grad()),
        };
        let wg = match winv {
            StressInverse::Diagonal(d) => {
                let mut m = g.clone();
                for (i, mut row) in m.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                m
            }
            StressInverse::Dense(m) => m * &g,
        };
        let k = velocity.to_dense(p) * w + g.ad_mul(&wg);
        k.lu().solve(rhs).ok_or_else(singular)
    }

    fn solve_frequency(&self, freq: f64, z: C64, r: &DVector<C64>) -> Result<FrequencyOutput> {
        let w = z.inv();
        let LawValue { velocity, stress } = self.law.eval(z);
        let p = self.setup.velocity_dim();
        let q = self.stress_dim();
        let f = r.rows(0, p).into_owned();
        let gs = r.rows(p, q).into_owned();

        let winv = self.stress_inverse(&stress, w, freq)?;
        let rhs_v = &f - self.apply_gt(&winv.apply(&gs));
        let v = self.velocity_system(&velocity, &winv, w, &rhs_v, freq)?;
        let source = &gs + self.apply_g(&v);
        let t = winv.apply(&source);
        if v.iter().chain(t.iter()).any(|x| !x.is_finite()) {
            return Err(Error::SingularFrequencySystem { frequency: freq });
        }

        let r1 = velocity.apply(&v) * w + self.apply_gt(&t) - &f;
        let r2 = match &self.projected {
            None => stress.apply(&t) * w - source,
            // w T = (Q^T sigma^{-1} Q)(G_s + G v)
            Some(_) => &t * w - winv.apply(&source) * w,
        };
        let residual_sq = r1.norm_squared() + r2.norm_squared();

        let coercivity =
            hermitian_lower_bound(&velocity, w).min(hermitian_lower_bound(&stress, w));
        let m_norm = block_norm_bound(&velocity).max(block_norm_bound(&stress));
        let condition_bound = if coercivity > 0.0 {
            (w.norm() * m_norm + self.grad_norm) / coercivity
        } else {
            f64::INFINITY
        };

        let mut u = DVector::from_element(p + q, C64::new(0.0, 0.0));
        u.rows_mut(0, p).copy_from(&v);
        u.rows_mut(p, q).copy_from(&t);
        Ok(FrequencyOutput {
            u,
            residual_sq,
            coercivity,
            condition_bound,
        })
    }
}

fn check_law_dims(law: &MaterialLaw, setup: &SpatialSetup, nu: f64) -> Result<()> {
    let value = law.eval(frequency_point(0.0, nu));
    let (p, q) = (setup.velocity_dim(), setup.stress_dim());
    if value.velocity.dim().is_some_and(|d| d != p) || value.stress.dim().is_some_and(|d| d != q) {
        return Err(Error::DimensionMismatch(format!(
            "law blocks {:?}/{:?} on a grid with {p} velocity and {q} stress unknowns",
            value.velocity.dim(),
            value.stress.dim()
        )));
    }
    Ok(())
}

/// Solves `(d/dt M(d/dt^{-1}) + A) u = rhs`.
pub fn solve(problem: &EvolutionaryProblem) -> Result<Solution> {
    let EvolutionaryProblem {
        law,
        setup,
        projection,
        nu,
        rhs,
    } = problem;
    let nu = *nu;
    if nu < law.nu0() * (1.0 - NU_SLACK) {
        return Err(Error::NuBelowNu0 {
            nu,
            nu0: law.nu0(),
        });
    }
    if (rhs.nu() - nu).abs() > NU_SLACK * nu {
        return Err(Error::InvalidParameter(format!(
            "rhs carries nu = {}, problem uses nu = {nu}",
            rhs.nu()
        )));
    }
    if rhs.dim() != problem.dim() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} components, system has {}",
            rhs.dim(),
            problem.dim()
        )));
    }
    check_law_dims(law, setup, nu)?;

    let projected = projection.as_ref().map(|p| ProjectedGeometry {
        q: to_complex(&p.basis),
        g: to_complex(&p.basis.tr_mul(setup.grad())),
    });
    let ctx = Context {
        law,
        setup,
        projected,
        grad_norm: 2.0 / setup.h(),
    };

    let spec = fourier_laplace(rhs);
    let freqs = spec.freqs().to_vec();
    let outputs: Vec<FrequencyOutput> = (0..freqs.len())
        .into_par_iter()
        .map(|k| {
            let row = spec.coeffs().row(k).transpose();
            ctx.solve_frequency(freqs[k], frequency_point(freqs[k], nu), &row)
        })
        .collect::<Result<_>>()?;

    let dim = problem.dim();
    let mut coeffs = DMatrix::from_element(freqs.len(), dim, C64::new(0.0, 0.0));
    for (k, out) in outputs.iter().enumerate() {
        coeffs.row_mut(k).copy_from(&out.u.transpose());
    }
    let solved = SpectralSignal::from_parts(*rhs.grid(), nu, coeffs)?;
    let u = inverse_fourier_laplace(&solved);

    let d_omega = rhs.grid().frequency_step();
    let residual = (outputs.iter().map(|o| o.residual_sq).sum::<f64>() * d_omega).sqrt();
    let rhs_norm = spec.l2_norm();
    let condition_bounds: Vec<f64> = outputs.iter().map(|o| o.condition_bound).collect();
    let (worst, max_condition_bound) = condition_bounds
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(wk, wc), (k, &c)| if c > wc { (k, c) } else { (wk, wc) });
    let path = if projection.is_none()
        && law.eval(frequency_point(0.0, nu)).velocity.diagonal(setup.velocity_dim()).is_some()
        && !matches!(law.eval(frequency_point(0.0, nu)).stress, BlockOp::Dense(_))
    {
        SolvePath::Tridiagonal
    } else {
        SolvePath::Dense
    };
    let report = SolverReport {
        path,
        frequencies: freqs.len(),
        min_coercivity: outputs.iter().map(|o| o.coercivity).fold(f64::INFINITY, f64::min),
        max_condition_bound,
        worst_frequency: freqs[worst],
        condition_bounds,
        relative_residual: if rhs_norm > 0.0 { residual / rhs_norm } else { residual },
    };
    Ok(Solution {
        u,
        velocity_dim: setup.velocity_dim(),
        residual,
        report,
    })
}

/// Fractional law on a given grid, with `nu` checked against the certified
/// `nu0(K)` of the coefficients as seen by the grid.
pub fn assemble_law(
    setup: &SpatialSetup,
    mu: &CoefficientField,
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    nu: f64,
    k: f64,
) -> Result<MaterialLaw> {
    let mu_v = setup.velocity_coefficient(mu)?;
    let c_s = setup.stress_coefficient(c)?;
    let d_s = setup.stress_coefficient(d)?;
    let nu0 = select_nu0(&mu_v, &c_s, &d_s, alpha, k)?;
    if nu < nu0 * (1.0 - NU_SLACK) {
        return Err(Error::NuBelowNu0 { nu, nu0 });
    }
    frac_elasticity_law(&mu_v, &c_s, &d_s, alpha, nu)
}

#[allow(clippy::too_many_arguments)]
fn solve_with_bc(
    bc: BoundaryCondition,
    mu: &CoefficientField,
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    nu: f64,
    k: f64,
    f: &WeightedSignal,
    g: &WeightedSignal,
) -> Result<Solution> {
    let setup = build_setup(mu.len(), bc)?;
    let law = assemble_law(&setup, mu, c, d, alpha, nu, k)?;
    solve(&EvolutionaryProblem {
        law,
        setup,
        projection: None,
        nu,
        rhs: f.stack(g)?,
    })
}

/// Homogeneous Dirichlet problem. Coefficients are given per cell; `F` has
/// one component per interior node, `G` one per cell.
#[allow(clippy::too_many_arguments)]
pub fn solve_dirichlet(
    mu: &CoefficientField,
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    nu: f64,
    k: f64,
    f: &WeightedSignal,
    g: &WeightedSignal,
) -> Result<Solution> {
    solve_with_bc(BoundaryCondition::Dirichlet, mu, c, d, alpha, nu, k, f, g)
}

/// Homogeneous Neumann problem: `F` per cell, `G` per interior node.
#[allow(clippy::too_many_arguments)]
pub fn solve_neumann(
    mu: &CoefficientField,
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    nu: f64,
    k: f64,
    f: &WeightedSignal,
    g: &WeightedSignal,
) -> Result<Solution> {
    solve_with_bc(BoundaryCondition::Neumann, mu, c, d, alpha, nu, k, f, g)
}

/// Reduced system on `L2 + R(G)` with stress block
/// `(Pi (C + z^{-alpha} D) Pi^*)^{-1}`. The stress block of the returned
/// solution holds the coordinates of `Pi T` in the projection basis; see
/// [`embed_projected_stress`].
#[allow(clippy::too_many_arguments)]
pub fn solve_projected(
    bc: BoundaryCondition,
    mu: &CoefficientField,
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    nu: f64,
    k: f64,
    f: &WeightedSignal,
) -> Result<(Solution, RangeProjection)> {
    let setup = build_setup(mu.len(), bc)?;
    let law = assemble_law(&setup, mu, c, d, alpha, nu, k)?;
    let projection = build_projection(&setup);
    let g = WeightedSignal::zeros(*f.grid(), f.nu(), projection.rank)?;
    let problem = EvolutionaryProblem {
        law,
        setup,
        projection: Some(projection.clone()),
        nu,
        rhs: f.stack(&g)?,
    };
    Ok((solve(&problem)?, projection))
}

/// `Q T~` at every time sample: the projected stress in grid coordinates.
pub fn embed_projected_stress(solution: &Solution, projection: &RangeProjection) -> Result<WeightedSignal> {
    let reduced = solution.stress();
    if reduced.dim() != projection.rank {
        return Err(Error::DimensionMismatch(format!(
            "{} stress coordinates for a range of rank {}",
            reduced.dim(),
            projection.rank
        )));
    }
    let values = reduced.values() * projection.basis.transpose();
    WeightedSignal::new(*reduced.grid(), reduced.nu(), values)
}

fn step(grid: &TimeGrid, nu: f64, state: &DVector<f64>) -> Result<WeightedSignal> {
    WeightedSignal::from_fn(*grid, nu, state.len(), |t, i| {
        if t > 0.0 {
            state[i]
        } else {
            0.0
        }
    })
}

/// `chi_{t > 0} (v0, T0)`: the jump added back to the shifted solution.
pub fn initial_jump(
    v0: &DVector<f64>,
    t0: &DVector<f64>,
    setup: &SpatialSetup,
    grid: &TimeGrid,
    nu: f64,
) -> Result<WeightedSignal> {
    if v0.len() != setup.velocity_dim() || t0.len() != setup.stress_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state of sizes {}/{} for a grid with {}/{} unknowns",
            v0.len(),
            t0.len(),
            setup.velocity_dim(),
            setup.stress_dim()
        )));
    }
    let mut state = DVector::zeros(setup.dim());
    state.rows_mut(0, v0.len()).copy_from(v0);
    state.rows_mut(v0.len(), t0.len()).copy_from(t0);
    step(grid, nu, &state)
}

/// Extra right-hand side `-A chi_{t > 0} (v0, T0)` for the shifted unknown
/// `u - chi_{t > 0} (v0, T0)`. Add [`initial_jump`] to the solution of the
/// lifted problem to recover `u`.
pub fn lift_initial_conditions(
    v0: &DVector<f64>,
    t0: &DVector<f64>,
    setup: &SpatialSetup,
    grid: &TimeGrid,
    nu: f64,
) -> Result<WeightedSignal> {
    let jump = initial_jump(v0, t0, setup, grid, nu)?;
    let a = setup.skew_operator();
    let values = -(jump.values() * a.transpose());
    WeightedSignal::new(*grid, nu, values)
}

fn check_boundary_signal(boundary: &WeightedSignal, setup: &SpatialSetup) -> Result<()> {
    if setup.bc() != BoundaryCondition::Neumann {
        return Err(Error::WrongBoundaryCondition {
            expected: "Neumann",
        });
    }
    if boundary.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "boundary data needs the two traces T(0), T(1), got {} components",
            boundary.dim()
        )));
    }
    Ok(())
}

/// Linear extension `T_b(t, x) = T(t, 0) (1 - x) + T(t, 1) x` sampled at all
/// `m + 1` nodes, boundary nodes included.
fn boundary_extension(boundary: &WeightedSignal, setup: &SpatialSetup) -> Result<WeightedSignal> {
    let m = setup.m();
    let h = setup.h();
    let values = DMatrix::from_fn(boundary.grid().n(), m + 1, |j, i| {
        let x = i as f64 * h;
        boundary.values()[(j, 0)] * (1.0 - x) + boundary.values()[(j, 1)] * x
    });
    WeightedSignal::new(*boundary.grid(), boundary.nu(), values)
}

/// `(0, T_b)` on the interior nodes: add to the solution of the lifted
/// problem to obtain the stress with the prescribed boundary traces.
pub fn boundary_lift_field(boundary: &WeightedSignal, setup: &SpatialSetup) -> Result<WeightedSignal> {
    check_boundary_signal(boundary, setup)?;
    let ext = boundary_extension(boundary, setup)?;
    let p = setup.velocity_dim();
    let mut values = DMatrix::zeros(boundary.grid().n(), setup.dim());
    values
        .columns_mut(p, setup.stress_dim())
        .copy_from(&ext.values().columns(1, setup.m() - 1));
    WeightedSignal::new(*boundary.grid(), boundary.nu(), values)
}

/// Extra right-hand side `(Div T_b, -d/dt sigma(d/dt^{-1}) T_b)` for the
/// shifted stress `T - T_b`, where `T_b` extends the boundary traces
/// linearly and `Div` acts on all nodes, boundary nodes included.
pub fn lift_boundary_data(
    boundary: &WeightedSignal,
    law: &MaterialLaw,
    setup: &SpatialSetup,
    nu: f64,
) -> Result<WeightedSignal> {
    check_boundary_signal(boundary, setup)?;
    check_law_dims(law, setup, nu)?;
    let boundary = boundary.with_nu(nu)?;
    let ext = boundary_extension(&boundary, setup)?;
    let m = setup.m();
    let inv_h = 1.0 / setup.h();
    let n = boundary.grid().n();

    let div = DMatrix::from_fn(n, m, |j, cell| {
        (ext.values()[(j, cell + 1)] - ext.values()[(j, cell)]) * inv_h
    });
    let interior = ext.block(1, m - 1);
    let spec = fourier_laplace(&interior);
    let stress = spec.map_rows(m - 1, |_, z, row| Ok(-law.eval(z).stress.apply(row) / z))?;
    let stress = inverse_fourier_laplace(&stress);

    let mut values = DMatrix::zeros(n, setup.dim());
    values.columns_mut(0, m).copy_from(&div);
    values.columns_mut(m, m - 1).copy_from(stress.values());
    WeightedSignal::new(*boundary.grid(), nu, values)
}

/// `|chi_{t <= a - 5 dt} u| / |rhs|` for the solution of `problem`.
pub fn causality_probe(problem: &EvolutionaryProblem, a: f64) -> Result<f64> {
    let solution = solve(problem)?;
    let rhs_norm = weighted_norm(&problem.rhs);
    if rhs_norm == 0.0 {
        return Ok(0.0);
    }
    let dt = problem.rhs.grid().dt();
    Ok(weighted_norm(&cutoff(&solution.u, a - 5.0 * dt)) / rhs_norm)
}
