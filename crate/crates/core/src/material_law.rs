//! Material laws `z -> M(z)` acting on the velocity/stress block space.
//!
//! The fractional law is `M(z) = diag(mu, (C + z^{-alpha} D)^{-1})`. The
//! homogenized limit law replaces the stress block by the memory series
//! `z^alpha (int 1/D + sum_l (-z^alpha)^l int c^l / D^{l+1})`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weighted_time::{frequency_point, TimeGrid};

const ALPHA_MIN: f64 = 0.5;
const ALPHA_MAX: f64 = 1.0;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(ALPHA_MIN..=ALPHA_MAX).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

/// Piecewise-constant multiplication coefficient, one sample per spatial
/// degree of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    samples: Vec<f64>,
    lower_bound: f64,
}

impl CoefficientField {
    pub fn new(samples: Vec<f64>, lower_bound: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empty coefficient field".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient sample".into()));
        }
        if let Some(bad) = samples.iter().find(|&&s| s < lower_bound) {
            return Err(Error::InvalidParameter(format!(
                "sample {bad} below the certified lower bound {lower_bound}"
            )));
        }
        Ok(Self {
            samples,
            lower_bound,
        })
    }

    /// Field whose lower bound is its own minimum.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        let lb = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        Self::new(samples, lb)
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::from_samples(vec![value; len])
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    fn require_positive(&self, name: &'static str) -> Result<()> {
        let lb = self.lower_bound.max(self.min());
        if lb <= 0.0 {
            return Err(Error::NonPositiveCoefficient { name, value: lb });
        }
        Ok(())
    }
}

/// One diagonal block of `M(z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockOp {
    /// Multiple of the identity, valid for any dimension.
    Scalar(Complex64),
    Diagonal(Vec<Complex64>),
    Dense(DMatrix<Complex64>),
}

impl BlockOp {
    pub fn dim(&self) -> Option<usize> {
        match self {
            BlockOp::Scalar(_) => None,
            BlockOp::Diagonal(d) => Some(d.len()),
            BlockOp::Dense(m) => Some(m.nrows()),
        }
    }

    /// Diagonal entries when the block is diagonal (scalars expanded to `dim`).
    pub fn diagonal(&self, dim: usize) -> Option<Vec<Complex64>> {
        match self {
            BlockOp::Scalar(s) => Some(vec![*s; dim]),
            BlockOp::Diagonal(d) => Some(d.clone()),
            BlockOp::Dense(_) => None,
        }
    }

    pub fn to_dense(&self, dim: usize) -> DMatrix<Complex64> {
        match self {
            BlockOp::Scalar(s) => DMatrix::from_diagonal_element(dim, dim, *s),
            BlockOp::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            BlockOp::Dense(m) => m.clone(),
        }
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        match self {
            BlockOp::Scalar(s) => x * *s,
            BlockOp::Diagonal(d) => DVector::from_iterator(x.len(), x.iter().zip(d).map(|(a, b)| a * b)),
            BlockOp::Dense(m) => m * x,
        }
    }

    pub fn scaled(&self, s: Complex64) -> BlockOp {
        match self {
            BlockOp::Scalar(v) => BlockOp::Scalar(v * s),
            BlockOp::Diagonal(d) => BlockOp::Diagonal(d.iter().map(|v| v * s).collect()),
            BlockOp::Dense(m) => BlockOp::Dense(m * s),
        }
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        match self {
            BlockOp::Scalar(s) => s.norm(),
            BlockOp::Diagonal(d) => d.iter().fold(0.0, |m, v| m.max(v.norm())),
            BlockOp::Dense(m) => m
                .clone()
                .singular_values()
                .iter()
                .cloned()
                .fold(0.0, f64::max),
        }
    }

    /// Smallest eigenvalue of the Hermitian part of `s * B`.
    pub fn min_hermitian_eigenvalue(&self, s: Complex64) -> f64 {
        match self {
            BlockOp::Scalar(v) => (s * v).re,
            BlockOp::Diagonal(d) => d.iter().map(|v| (s * v).re).fold(f64::INFINITY, f64::min),
            BlockOp::Dense(m) => {
                let b = m * s;
                let h = (&b + b.adjoint()) * Complex64::new(0.5, 0.0);
                h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Value of a material law at one point: velocity and stress blocks. There
/// are no off-diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LawValue {
    pub velocity: BlockOp,
    pub stress: BlockOp,
}

impl LawValue {
    pub fn norm(&self) -> f64 {
        self.velocity.norm().max(self.stress.norm())
    }
}

type LawFn = dyn Fn(Complex64) -> LawValue + Send + Sync;

/// Analytic, bounded map on the disk `B(r, r)`.
#[derive(Clone)]
pub struct MaterialLaw {
    name: String,
    radius: f64,
    bound: f64,
    positivity_c: Option<f64>,
    eval: Arc<LawFn>,
}

impl fmt::Debug for MaterialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaterialLaw")
            .field("name", &self.name)
            .field("radius", &self.radius)
            .field("bound", &self.bound)
            .field("positivity_c", &self.positivity_c)
            .finish()
    }
}

impl MaterialLaw {
    pub fn new(
        name: impl Into<String>,
        radius: f64,
        bound: f64,
        positivity_c: Option<f64>,
        eval: impl Fn(Complex64) -> LawValue + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            radius,
            bound,
            positivity_c,
            eval: Arc::new(eval),
        }
    }

    /// `M(z) = 1` on both blocks, for `nu >= nu0`.
    pub fn identity(nu0: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self::new("identity", 0.5 / nu0, 1.0, Some(nu0), move |_| LawValue {
            velocity: BlockOp::Scalar(one),
            stress: BlockOp::Scalar(one),
        })
    }

    pub fn negated(&self) -> Self {
        let inner = self.eval.clone();
        let minus = Complex64::new(-1.0, 0.0);
        Self::new(
            format!("-({})", self.name),
            self.radius,
            self.bound,
            None,
            move |z| {
                let v = inner(z);
                LawValue {
                    velocity: v.velocity.scaled(minus),
                    stress: v.stress.scaled(minus),
                }
            },
        )
    }

    pub fn eval(&self, z: Complex64) -> LawValue {
        (self.eval)(z)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Smallest weight for which the frequency curve lies in the disk.
    pub fn nu0(&self) -> f64 {
        0.5 / self.radius
    }

    /// Upper bound of `||M(z)||` over the disk.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Certified lower bound of `Re z^{-1} M(z)`, when one is known.
    pub fn positivity_c(&self) -> Option<f64> {
        self.positivity_c
    }
}

/// Cut-offs of the memory-kernel series (`l_max`) and of the Neumann series
/// of the stress inverse (`k_max`), with contraction ratio `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruncation {
    pub l_max: usize,
    pub k_max: usize,
    pub q: f64,
    pub tail_bound: f64,
}

impl SeriesTruncation {
    pub const DEFAULT_L_MAX: usize = 8;
    pub const DEFAULT_K_MAX: usize = 12;

    pub fn new(l_max: usize, k_max: usize, q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::SeriesDiverges {
                ratio: q,
                cell: None,
            });
        }
        Ok(Self {
            l_max,
            k_max,
            q,
            tail_bound: q.powi(l_max as i32 + 1) / (1.0 - q),
        })
    }

    /// `q = ||C D^{-1}|| nu^{-alpha}` for multiplication coefficients.
    pub fn for_coefficients(
        c: &CoefficientField,
        d: &CoefficientField,
        alpha: f64,
        nu: f64,
        l_max: usize,
        k_max: usize,
    ) -> Result<Self> {
        Self::new(l_max, k_max, max_ratio(c, d)? * nu.powf(-alpha))
    }

    /// Geometric tail `q^{k_max + 1} / (1 - q)` of the outer series.
    pub fn outer_tail_bound(&self) -> f64 {
        self.q.powi(self.k_max as i32 + 1) / (1.0 - self.q)
    }
}

fn max_ratio(c: &CoefficientField, d: &CoefficientField) -> Result<f64> {
    if c.len() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "c has {} cells, D has {}",
            c.len(),
            d.len()
        )));
    }
    Ok(c.samples()
        .iter()
        .zip(d.samples())
        .fold(0.0, |m, (c, d)| m.max((c / d).abs())))
}

/// Lower bound `min(nu * min mu, nu^{1-alpha}/max D - 2 nu^{1-2 alpha} ||D^-1 C D^-1||)`
/// of `Re z^{-1} M(z)`, valid when `||C D^{-1}|| nu^{-alpha} < 1/2`.
fn positivity_estimate(
    mu_min: f64,
    d_min: f64,
    d_max: f64,
    c_norm: f64,
    c_over_d: f64,
    alpha: f64,
    nu: f64,
) -> Option<f64> {
    if c_over_d * nu.powf(-alpha) >= 0.5 {
        return None;
    }
    let stress = nu.powf(1.0 - alpha) / d_max - 2.0 * nu.powf(1.0 - 2.0 * alpha) * c_norm / (d_min * d_min);
    let c = (nu * mu_min).min(stress);
    (c > 0.0).then_some(c)
}

fn stress_bound(d_min: f64, c_over_d: f64, alpha: f64, nu: f64) -> f64 {
    let w = nu.powf(-alpha);
    let q = c_over_d * w;
    if q < 1.0 {
        w / d_min / (1.0 - q)
    } else {
        f64::INFINITY
    }
}

/// `z -> diag(mu, (c + z^{-alpha} D)^{-1})` with multiplication coefficients.
/// The stress block is inverted exactly per cell.
pub fn frac_elasticity_law(
    mu: &CoefficientField,
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    nu: f64,
) -> Result<MaterialLaw> {
    check_alpha(alpha)?;
    mu.require_positive("mu")?;
    d.require_positive("D")?;
    let c_over_d = max_ratio(c, d)?;
    let positivity = positivity_estimate(
        mu.min(),
        d.min(),
        d.max(),
        c.max_abs(),
        c_over_d,
        alpha,
        nu,
    );
    let bound = mu.max().max(stress_bound(d.min(), c_over_d, alpha, nu));

    let mu_diag: Vec<Complex64> = mu.samples().iter().map(|&m| Complex64::new(m, 0.0)).collect();
    let cs = c.samples().to_vec();
    let ds = d.samples().to_vec();
    Ok(MaterialLaw::new(
        "fractional elasticity",
        0.5 / nu,
        bound,
        positivity,
        move |z| {
            let w = z.powf(-alpha);
            LawValue {
                velocity: BlockOp::Diagonal(mu_diag.clone()),
                stress: BlockOp::Diagonal(
                    cs.iter().zip(&ds).map(|(&c, &d)| (w * d + c).inv()).collect(),
                ),
            }
        },
    ))
}

/// Fractional law whose instantaneous coefficient `C` is a general symmetric
/// operator on the stress space, e.g. `(-Laplace_D)^{-beta}`.
pub fn frac_elasticity_law_with_operator(
    mu: &CoefficientField,
    c_op: &DMatrix<f64>,
    d: &CoefficientField,
    alpha: f64,
    nu: f64,
) -> Result<MaterialLaw> {
    check_alpha(alpha)?;
    mu.require_positive("mu")?;
    d.require_positive("D")?;
    let m = d.len();
    if c_op.nrows() != m || c_op.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "C is {}x{}, D has {m} cells",
            c_op.nrows(),
            c_op.ncols()
        )));
    }
    let c_norm = c_op.clone().singular_values().iter().cloned().fold(0.0, f64::max);
    let c_over_d = c_norm / d.min();
    let positivity = positivity_estimate(mu.min(), d.min(), d.max(), c_norm, c_over_d, alpha, nu);
    let bound = mu.max().max(stress_bound(d.min(), c_over_d, alpha, nu));

    let mu_diag: Vec<Complex64> = mu.samples().iter().map(|&m| Complex64::new(m, 0.0)).collect();
    let c_cplx: DMatrix<Complex64> = c_op.map(|v| Complex64::new(v, 0.0));
    let ds = d.samples().to_vec();
    Ok(MaterialLaw::new(
        "fractional elasticity (operator coefficient)",
        0.5 / nu,
        bound,
        positivity,
        move |z| {
            let w = z.powf(-alpha);
            let mut op = c_cplx.clone();
            for (i, &di) in ds.iter().enumerate() {
                op[(i, i)] += w * di;
            }
            let inv = op
                .try_inverse()
                .expect("C + z^-alpha D is invertible for z in the law's disk");
            LawValue {
                velocity: BlockOp::Diagonal(mu_diag.clone()),
                stress: BlockOp::Dense(inv),
            }
        },
    ))
}

/// Truncated Neumann series of the per-cell stress inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannInverse {
    pub values: Vec<Complex64>,
    /// Certified bound of `|computed - exact|` (tail and rounding), maximised
    /// over cells.
    pub error_bound: f64,
    /// Same bound relative to `|z^alpha / D|`: `max_cell r^{K+1} / (1 - r)`.
    pub relative_bound: f64,
}

/// `(c + z^{-alpha} D)^{-1} = (z^{-alpha} D)^{-1} + z^{2 alpha} D^{-1} sum_{k>=1} z^{(k-1) alpha} (-c/D)^k`,
/// summed up to `k = trunc.k_max`.
pub fn neumann_inverse(
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    z: Complex64,
    trunc: &SeriesTruncation,
) -> Result<NeumannInverse> {
    max_ratio(c, d)?;
    let w = z.powf(alpha);
    let mut values = Vec::with_capacity(c.len());
    let mut error_bound: f64 = 0.0;
    let mut relative_bound: f64 = 0.0;
    for (cell, (&ci, &di)) in c.samples().iter().zip(d.samples()).enumerate() {
        let ratio = (ci / di) * w.norm();
        if ratio >= 1.0 {
            return Err(Error::SeriesDiverges {
                ratio,
                cell: Some(cell),
            });
        }
        let neg = Complex64::new(-ci / di, 0.0);
        let mut sum = w / di;
        let mut term = w * w / di;
        let mut power = neg;
        for _ in 1..=trunc.k_max {
            sum += term * power;
            term *= w;
            power *= neg;
        }
        values.push(sum);
        let rel = ratio.powi(trunc.k_max as i32 + 1) / (1.0 - ratio);
        // rounding of k_max + 2 complex updates on partial sums below |w/D| / (1 - r)
        let rounding = 8.0 * (trunc.k_max as f64 + 2.0) * f64::EPSILON / (1.0 - ratio);
        relative_bound = relative_bound.max(rel);
        error_bound = error_bound.max(w.norm() / di * (rel + rounding));
    }
    Ok(NeumannInverse {
        values,
        error_bound,
        relative_bound,
    })
}

/// Uniform bounds of the coefficients entering the well-posedness estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub mu_min: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// `max |c|`
    pub c_abs_max: f64,
    /// `max |c / D|`
    pub c_over_d_max: f64,
}

impl CoefficientBounds {
    pub fn of_fields(
        mu: &CoefficientField,
        c: &CoefficientField,
        d: &CoefficientField,
    ) -> Result<Self> {
        Ok(Self {
            mu_min: mu.min(),
            d_min: d.min(),
            d_max: d.max(),
            c_abs_max: c.max_abs(),
            c_over_d_max: max_ratio(c, d)?,
        })
    }

    /// Whether `nu` satisfies the three sufficient conditions for the bound
    /// `K` on the solution operator.
    pub fn admits(&self, nu: f64, alpha: f64, k: f64) -> bool {
        let target = 1.0 / k;
        let velocity = nu * self.mu_min >= target;
        let stress = nu.powf(1.0 - alpha) / self.d_max
            - 2.0 * nu.powf(1.0 - 2.0 * alpha) * self.c_abs_max / (self.d_min * self.d_min)
            >= target;
        let contraction = self.c_over_d_max * nu.powf(-alpha) < 0.5;
        velocity && stress && contraction
    }
}

const NU_RESOLUTION: f64 = 1e-6;
const NU_CEILING: f64 = 1e15;

/// Smallest `nu` satisfying [`CoefficientBounds::admits`], found by doubling
/// and bisection.
pub fn select_nu0_from_bounds(bounds: &CoefficientBounds, alpha: f64, k: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if k.is_nan() || k <= 0.0 {
        return Err(Error::InvalidParameter(format!("K = {k} must be positive")));
    }
    if !(bounds.mu_min > 0.0 && bounds.d_min > 0.0) {
        return Err(Error::NonPositiveCoefficient {
            name: "mu/D",
            value: bounds.mu_min.min(bounds.d_min),
        });
    }
    // the velocity condition is an equality at this point
    let mut hi = 1.0 / (k * bounds.mu_min);
    if bounds.admits(hi, alpha, k) {
        return Ok(hi);
    }
    let mut lo = hi;
    while !bounds.admits(hi, alpha, k) {
        lo = hi;
        hi *= 2.0;
        if hi > NU_CEILING {
            return Err(Error::NoFiniteNu(format!(
                "conditions fail up to nu = {NU_CEILING:e} (alpha = {alpha}, K = {k})"
            )));
        }
    }
    while hi - lo > NU_RESOLUTION * hi {
        let mid = 0.5 * (lo + hi);
        if bounds.admits(mid, alpha, k) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn select_nu0(
    mu: &CoefficientField,
    c: &CoefficientField,
    d: &CoefficientField,
    alpha: f64,
    k: f64,
) -> Result<f64> {
    select_nu0_from_bounds(&CoefficientBounds::of_fields(mu, c, d)?, alpha, k)
}

/// Space-constant limit law
/// `diag(int mu, z^alpha (int 1/D + sum_{l=1}^{L} (-z^alpha)^l K_l))`.
pub fn homogenized_law(
    mu_mean: f64,
    dinv_mean: f64,
    k_table: &[f64],
    alpha: f64,
    trunc: &SeriesTruncation,
    nu: f64,
) -> Result<MaterialLaw> {
    check_alpha(alpha)?;
    if mu_mean.is_nan() || mu_mean <= 0.0 {
        return Err(Error::NonPositiveCoefficient {
            name: "mean of mu",
            value: mu_mean,
        });
    }
    if dinv_mean.is_nan() || dinv_mean <= 0.0 {
        return Err(Error::NonPositiveCoefficient {
            name: "mean of 1/D",
            value: dinv_mean,
        });
    }
    if k_table.len() != trunc.l_max {
        return Err(Error::DimensionMismatch(format!(
            "{} memory kernels for l_max = {}",
            k_table.len(),
            trunc.l_max
        )));
    }
    if trunc.q >= 1.0 {
        return Err(Error::SeriesDiverges {
            ratio: trunc.q,
            cell: None,
        });
    }
    let w_max = nu.powf(-alpha);
    for (l, &k) in k_table.iter().enumerate() {
        // K_l <= (int 1/D) * ||c/D||^l and q = ||c/D|| nu^-alpha
        let ratio = (k.abs() / dinv_mean).powf(1.0 / (l + 1) as f64) * w_max;
        if ratio >= 1.0 {
            return Err(Error::SeriesDiverges {
                ratio,
                cell: None,
            });
        }
    }
    let bound = mu_mean.max(
        w_max
            * (dinv_mean
                + k_table
                    .iter()
                    .enumerate()
                    .map(|(l, k)| w_max.powi(l as i32 + 1) * k.abs())
                    .sum::<f64>()),
    );
    let table = k_table.to_vec();
    let mu = Complex64::new(mu_mean, 0.0);
    Ok(MaterialLaw::new(
        "homogenized memory law",
        0.5 / nu,
        bound,
        None,
        move |z| LawValue {
            velocity: BlockOp::Scalar(mu),
            stress: BlockOp::Scalar(memory_stress(z, alpha, dinv_mean, &table)),
        },
    ))
}

pub(crate) fn memory_stress(z: Complex64, alpha: f64, dinv_mean: f64, k_table: &[f64]) -> Complex64 {
    let w = z.powf(alpha);
    let mut sum = Complex64::new(dinv_mean, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for &k in k_table {
        power *= -w;
        sum += power * k;
    }
    w * sum
}

/// Outcome of sampling `Re z^{-1} M(z) >= c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CConditionReport {
    pub c_target: f64,
    /// Smallest eigenvalue of the Hermitian part of `z^{-1} M(z)` over all
    /// sampled `z`.
    pub min_constant: f64,
    /// Smallest Rayleigh quotient over the random probes (never below
    /// `min_constant`).
    pub probe_min: f64,
    pub worst_z: (f64, f64),
    pub n_points: usize,
    pub n_probe: usize,
    pub pass: bool,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(dim, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

fn block_rayleigh(block: &BlockOp, s: Complex64, x: &DVector<Complex64>) -> f64 {
    let y = block.apply(x).map(|v| v * s);
    x.dotc(&y).re
}

/// Samples `z = 1/(i t + nu)` on every grid frequency plus `n_boundary`
/// points of the boundary circle of `B(r, r)`; at each point computes the
/// smallest eigenvalue of `Re z^{-1} M(z)` and evaluates `n_probe` random
/// unit probes. Passes iff the minimum is at least `c_target`.
pub fn check_c_condition(
    law: &MaterialLaw,
    c_target: f64,
    grid: &TimeGrid,
    nu: f64,
    n_boundary: usize,
    n_probe: usize,
    seed: u64,
) -> CConditionReport {
    let r = law.radius();
    let mut points: Vec<Complex64> = grid
        .frequencies()
        .iter()
        .map(|&t| frequency_point(t, nu))
        .collect();
    points.extend((0..n_boundary).map(|j| {
        let theta = -std::f64::consts::PI
            + 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_boundary as f64;
        Complex64::from_polar(r, theta) + r
    }));

    let per_point: Vec<(f64, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(idx, &z)| {
            let value = law.eval(z);
            let s = z.inv();
            let exact = value
                .velocity
                .min_hermitian_eigenvalue(s)
                .min(value.stress.min_hermitian_eigenvalue(s));
            let dv = value.velocity.dim().unwrap_or(1);
            let ds = value.stress.dim().unwrap_or(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let mut probe = f64::INFINITY;
            for _ in 0..n_probe {
                let x = random_unit(&mut rng, dv + ds);
                let xv = x.rows(0, dv).into_owned();
                let xs = x.rows(dv, ds).into_owned();
                let q = block_rayleigh(&value.velocity, s, &xv) + block_rayleigh(&value.stress, s, &xs);
                probe = probe.min(q);
            }
            (exact, probe)
        })
        .collect();

    let (mut min_constant, mut worst) = (f64::INFINITY, 0usize);
    for (i, &(c, _)) in per_point.iter().enumerate() {
        if c < min_constant {
            min_constant = c;
            worst = i;
        }
    }
    let probe_min = per_point.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    CConditionReport {
        c_target,
        min_constant,
        probe_min,
        worst_z: (points[worst].re, points[worst].im),
        n_points: points.len(),
        n_probe,
        pass: min_constant >= c_target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn field(v: &[f64]) -> CoefficientField {
        CoefficientField::from_samples(v.to_vec()).unwrap()
    }

    fn cplx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn field_validation() {
        assert!(CoefficientField::new(vec![1.0, 0.5], 0.7).is_err());
        assert!(CoefficientField::new(vec![], 0.0).is_err());
        let f = field(&[2.0, -3.0, 1.0]);
        assert_eq!(f.min(), -3.0);
        assert_eq!(f.max(), 2.0);
        assert_eq!(f.max_abs(), 3.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let one = field(&[1.0, 1.0]);
        let zero = field(&[0.0, 0.0]);
        assert_eq!(
            frac_elasticity_law(&one, &zero, &one, 0.3, 10.0).unwrap_err(),
            Error::AlphaOutOfRange(0.3)
        );
        assert!(matches!(
            frac_elasticity_law(&one, &zero, &zero, 0.5, 10.0),
            Err(Error::NonPositiveCoefficient { name: "D", .. })
        ));
        assert!(matches!(
            frac_elasticity_law(&zero, &zero, &one, 0.5, 10.0),
            Err(Error::NonPositiveCoefficient { name: "mu", .. })
        ));
    }

    #[test]
    fn pure_fractional_stress_block() {
        let one = CoefficientField::constant(3, 1.0).unwrap();
        let zero = CoefficientField::constant(3, 0.0).unwrap();
        let law = frac_elasticity_law(&one, &zero, &one, 0.7, 4.0).unwrap();
        let z = cplx(0.1, 0.0);
        let v = law.eval(z);
        for s in v.stress.diagonal(3).unwrap() {
            assert_relative_eq!(s.re, 0.1f64.powf(0.7), max_relative = 1e-14);
            assert!(s.im.abs() < 1e-16);
        }
    }

    #[test]
    fn kelvin_voigt_limit() {
        let one = CoefficientField::constant(2, 1.0).unwrap();
        let c = CoefficientField::constant(2, 0.8).unwrap();
        let d = CoefficientField::constant(2, 1.7).unwrap();
        let law = frac_elasticity_law(&one, &c, &d, 1.0, 5.0).unwrap();
        let z = frequency_point(3.0, 5.0);
        let expected = (cplx(0.8, 0.0) + cplx(1.7, 0.0) / z).inv();
        for s in law.eval(z).stress.diagonal(2).unwrap() {
            assert!((s - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn two_phase_cells_match_direct_complex_arithmetic() {
        let mu = CoefficientField::constant(4, 1.0).unwrap();
        let c = field(&[0.5, 0.5, 0.5, 0.5]);
        let d = field(&[1.0, 1.0, 4.0, 4.0]);
        let alpha = 0.5;
        let law = frac_elasticity_law(&mu, &c, &d, alpha, 2.0).unwrap();
        // z = 1/(i + 2): z^{-1/2} = (2 + i)^{1/2} = sqrt(sqrt 5) e^{i atan(1/2)/2}
        let z = cplx(2.0, 1.0).inv();
        let modulus = 5f64.sqrt().sqrt();
        let angle = 0.5f64.atan() / 2.0;
        let root = cplx(modulus * angle.cos(), modulus * angle.sin());
        let values = law.eval(z).stress.diagonal(4).unwrap();
        for (cell, &dv) in [1.0, 1.0, 4.0, 4.0].iter().enumerate() {
            let denom = cplx(0.5 + dv * root.re, dv * root.im);
            let expected = cplx(denom.re, -denom.im) / denom.norm_sqr();
            assert!((values[cell] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn neumann_series_without_instantaneous_part_is_exact() {
        let c = CoefficientField::constant(3, 0.0).unwrap();
        let d = field(&[1.0, 2.0, 3.0]);
        let trunc = SeriesTruncation::new(8, 0, 0.0).unwrap();
        let z = frequency_point(1.5, 2.0);
        let out = neumann_inverse(&c, &d, 0.6, z, &trunc).unwrap();
        for (v, &dv) in out.values.iter().zip(d.samples()) {
            assert!((v - (z.powf(-0.6) * dv).inv()).norm() < 1e-15);
        }
        assert_eq!(out.relative_bound, 0.0);
        assert!(out.error_bound < 1e-13);
    }

    #[test]
    fn neumann_series_within_tail_bound() {
        let c = CoefficientField::constant(1, 1.0).unwrap();
        let d = CoefficientField::constant(1, 2.0).unwrap();
        let z = cplx(0.01, 0.0);
        let exact = (cplx(1.0, 0.0) + z.powf(-0.5) * 2.0).inv();
        let mut previous = f64::INFINITY;
        for k_max in [10, 20] {
            let trunc = SeriesTruncation::new(8, k_max, 0.05).unwrap();
            let out = neumann_inverse(&c, &d, 0.5, z, &trunc).unwrap();
            let err = (out.values[0] - exact).norm();
            assert!(err <= out.error_bound, "{err} > {}", out.error_bound);
            assert!(out.relative_bound <= previous);
            assert!(out.relative_bound <= trunc.outer_tail_bound() * (1.0 + 1e-12));
            previous = out.relative_bound;
        }
    }

    #[test]
    fn neumann_series_detects_divergence() {
        let c = CoefficientField::constant(2, 3.0).unwrap();
        let d = CoefficientField::constant(2, 1.0).unwrap();
        let trunc = SeriesTruncation::new(4, 4, 0.5).unwrap();
        let err = neumann_inverse(&c, &d, 1.0, cplx(0.5, 0.0), &trunc).unwrap_err();
        assert!(matches!(err, Error::SeriesDiverges { cell: Some(0), .. }));
        assert!(SeriesTruncation::new(4, 4, 1.0).is_err());
    }

    #[test]
    fn truncation_tail() {
        let t = SeriesTruncation::new(3, 5, 0.5).unwrap();
        assert_relative_eq!(t.tail_bound, 0.0625 / 0.5);
        assert_relative_eq!(t.outer_tail_bound(), 0.5f64.powi(6) / 0.5);
    }

    #[test]
    fn identity_law_constant_is_nu() {
        let nu = 3.0;
        let grid = TimeGrid::new(0.0, 0.05, 128, 2).unwrap();
        let report = check_c_condition(&MaterialLaw::identity(nu), 1.0, &grid, nu, 16, 4, 0);
        assert_relative_eq!(report.min_constant, nu, max_relative = 1e-12);
        assert!(report.probe_min >= report.min_constant - 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn fractional_law_positivity_at_large_nu() {
        let one = CoefficientField::constant(4, 1.0).unwrap();
        let zero = CoefficientField::constant(4, 0.0).unwrap();
        let nu = 100.0;
        let law = frac_elasticity_law(&one, &zero, &one, 0.5, nu).unwrap();
        // nu^{1-alpha}/||D|| - 2 nu^{1-2 alpha} ||D^-1 C D^-1|| = 10
        assert_relative_eq!(law.positivity_c().unwrap(), 10.0, max_relative = 1e-12);
        let grid = TimeGrid::new(0.0, 1e-3, 256, 2).unwrap();
        let report = check_c_condition(&law, 1.0, &grid, nu, 64, 8, 7);
        assert!(report.pass);
        assert!(report.min_constant >= 10.0 - 1e-9);
    }

    #[test]
    fn negated_law_fails() {
        let nu = 2.0;
        let grid = TimeGrid::new(0.0, 0.05, 64, 1).unwrap();
        let report = check_c_condition(&MaterialLaw::identity(nu).negated(), 1e-6, &grid, nu, 8, 4, 0);
        assert!(!report.pass);
        assert!(report.min_constant < 0.0);
    }

    #[test]
    fn nu0_without_instantaneous_part() {
        let one = CoefficientField::constant(4, 1.0).unwrap();
        let zero = CoefficientField::constant(4, 0.0).unwrap();
        assert_eq!(select_nu0(&one, &zero, &one, 1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn nu0_matches_closed_form_root() {
        // alpha = 1/2: sqrt(nu) - 2 >= 1 and nu^{-1/2} < 1/2, so nu0 = 9
        let one = CoefficientField::constant(4, 1.0).unwrap();
        let nu0 = select_nu0(&one, &one, &one, 0.5, 1.0).unwrap();
        let root = (1.0f64 + 2.0).powi(2);
        assert_relative_eq!(nu0, root, max_relative = 1e-3);
        assert!(nu0 >= root);
    }

    #[test]
    fn nu0_monotone_in_k() {
        let mu = field(&[1.0, 2.0]);
        let c = field(&[0.0, 1.0]);
        let d = field(&[1.0, 4.0]);
        let strict = select_nu0(&mu, &c, &d, 0.5, 1.0).unwrap();
        let loose = select_nu0(&mu, &c, &d, 0.5, 2.0).unwrap();
        assert!(loose <= strict);
    }

    #[test]
    fn nu0_reports_unreachable_bound() {
        // alpha = 1: the stress estimate saturates at 1/max D
        let one = CoefficientField::constant(2, 1.0).unwrap();
        let zero = CoefficientField::constant(2, 0.0).unwrap();
        let stiff = CoefficientField::constant(2, 4.0).unwrap();
        assert!(matches!(
            select_nu0(&one, &zero, &stiff, 1.0, 1.0),
            Err(Error::NoFiniteNu(_))
        ));
    }

    #[test]
    fn homogenized_law_without_instantaneous_part() {
        let trunc = SeriesTruncation::new(3, 12, 0.0).unwrap();
        let law = homogenized_law(1.5, 0.625, &[0.0; 3], 0.5, &trunc, 16.0).unwrap();
        for t in [-40.0, 0.0, 3.0, 100.0] {
            let z = frequency_point(t, 16.0);
            let v = law.eval(z);
            assert_eq!(v.velocity, BlockOp::Scalar(cplx(1.5, 0.0)));
            match v.stress {
                BlockOp::Scalar(s) => assert!((s - z.powf(0.5) * 0.625).norm() < 1e-15),
                other => panic!("unexpected block {other:?}"),
            }
        }
    }

    #[test]
    fn homogenized_law_of_constants_resums_the_inverse() {
        let (mu, c, d, alpha, nu): (f64, f64, f64, f64, f64) = (1.3, 0.5, 2.0, 0.5, 16.0);
        let trunc = SeriesTruncation::new(8, 12, c / d * nu.powf(-alpha)).unwrap();
        let table: Vec<f64> = (1..=8).map(|l| c.powi(l) / d.powi(l + 1)).collect();
        let hom = homogenized_law(mu, 1.0 / d, &table, alpha, &trunc, nu).unwrap();
        let orig = frac_elasticity_law(
            &CoefficientField::constant(3, mu).unwrap(),
            &CoefficientField::constant(3, c).unwrap(),
            &CoefficientField::constant(3, d).unwrap(),
            alpha,
            nu,
        )
        .unwrap();
        for t in [-500.0, -3.0, 0.0, 1.0, 77.0, 1e4] {
            let z = frequency_point(t, nu);
            let exact = (cplx(c, 0.0) + z.powf(-alpha) * d).inv();
            let h = hom.eval(z).stress.diagonal(1).unwrap()[0];
            let o = orig.eval(z).stress.diagonal(3).unwrap()[1];
            assert!((h - exact).norm() < 1e-9);
            assert!((o - exact).norm() < 1e-14);
        }
    }

    #[test]
    fn homogenized_law_rejects_wrong_table_length() {
        let trunc = SeriesTruncation::new(4, 12, 0.1).unwrap();
        assert!(homogenized_law(1.0, 1.0, &[0.1; 3], 0.5, &trunc, 4.0).is_err());
    }

    #[test]
    fn reported_bound_dominates_samples() {
        let mu = field(&[1.0, 2.0, 1.0, 2.0]);
        let c = field(&[0.0, 1.0, 0.0, 1.0]);
        let d = field(&[1.0, 1.0, 4.0, 4.0]);
        let nu = select_nu0(&mu, &c, &d, 0.5, 1.0).unwrap();
        let law = frac_elasticity_law(&mu, &c, &d, 0.5, nu).unwrap();
        for j in 0..200 {
            let theta = -3.1 + 6.2 * j as f64 / 199.0;
            let z = Complex64::from_polar(law.radius(), theta) + law.radius();
            assert!(law.eval(z).norm() <= law.bound());
        }
    }

    #[test]
    fn operator_coefficient_law_matches_diagonal_law() {
        let mu = CoefficientField::constant(3, 1.0).unwrap();
        let c = field(&[0.2, 0.4, 0.1]);
        let d = field(&[1.0, 2.0, 3.0]);
        let c_op = DMatrix::from_diagonal(&DVector::from_column_slice(c.samples()));
        let a = frac_elasticity_law(&mu, &c, &d, 0.75, 9.0).unwrap();
        let b = frac_elasticity_law_with_operator(&mu, &c_op, &d, 0.75, 9.0).unwrap();
        let z = frequency_point(2.5, 9.0);
        let diff = a.eval(z).stress.to_dense(3) - b.eval(z).stress.to_dense(3);
        assert!(diff.iter().all(|v| v.norm() < 1e-14));
    }
}
