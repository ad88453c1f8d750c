//! Discrete model of the exponentially weighted space `H_{nu,0}(R; H)` on a
//! finite window.
//!
//! A [`WeightedSignal`] holds `n` time samples of a `d`-dimensional spatial
//! vector together with the weight exponent `nu`. The Fourier-Laplace
//! transform multiplies by `exp(-nu t)`, zero-pads to `n * pad_factor`
//! samples and applies a DFT scaled by `dt / sqrt(2 pi)`, so that the discrete
//! Parseval identity
//!
//! ```text
//! sum_k |F_k|^2 * dw  ==  sum_j |f_j|^2 exp(-2 nu t_j) dt,     dw = 2 pi / (N dt)
//! ```
//!
//! holds exactly in exact arithmetic. Functions of `1/(d/dt)` then act as
//! per-frequency multipliers evaluated at `z = 1 / (i t + nu)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling `t_j = t_start + j * dt`, `0 <= j < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n: usize,
    pad_factor: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n: usize, pad_factor: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if !t_start.is_finite() {
            return Err(Error::InvalidGrid("t_start must be finite".into()));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 2"
            )));
        }
        if pad_factor < 1 {
            return Err(Error::InvalidGrid("pad_factor must be >= 1".into()));
        }
        Ok(Self {
            t_start,
            dt,
            n,
            pad_factor,
        })
    }

    /// Grid covering `[t_start, t_end)` with `n` samples.
    pub fn over(t_start: f64, t_end: f64, n: usize, pad_factor: usize) -> Result<Self> {
        Self::new(t_start, (t_end - t_start) / n as f64, n, pad_factor)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    /// End of the window, `t_start + n dt`.
    pub fn t_end(&self) -> f64 {
        self.t_start + self.n as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.time(j)).collect()
    }

    /// Number of transform points, `n * pad_factor`.
    pub fn padded_len(&self) -> usize {
        self.n * self.pad_factor
    }

    /// Spacing of the dual (frequency) grid.
    pub fn frequency_step(&self) -> f64 {
        2.0 * PI / (self.padded_len() as f64 * self.dt)
    }

    /// Angular frequencies of the padded transform in standard DFT order:
    /// `0, dw, ..., (N/2 - 1) dw, -N/2 dw, ..., -dw`.
    pub fn frequencies(&self) -> Vec<f64> {
        let len = self.padded_len();
        let dw = self.frequency_step();
        (0..len)
            .map(|k| {
                if k < len / 2 {
                    k as f64 * dw
                } else {
                    (k as f64 - len as f64) * dw
                }
            })
            .collect()
    }

    pub fn with_pad_factor(&self, pad_factor: usize) -> Result<Self> {
        Self::new(self.t_start, self.dt, self.n, pad_factor)
    }
}

/// Point of the disk `B(r, r)` that corresponds to the frequency `t`,
/// `z = 1 / (i t + nu)`.
pub fn frequency_point(t: f64, nu: f64) -> Complex64 {
    Complex64::new(nu, t).inv()
}

/// Whether `z` lies in the closure of `B(radius, radius)`.
pub fn in_disk(z: Complex64, radius: f64) -> bool {
    (z - radius).norm() <= radius * (1.0 + 1e-12)
}

/// Time samples of a `d`-dimensional vector, weighted by `exp(-2 nu t)`.
///
/// Row `j` of `values` is the spatial vector at `t_j`; column `i` is the time
/// series of degree of freedom `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSignal {
    grid: TimeGrid,
    nu: f64,
    values: DMatrix<f64>,
}

impl WeightedSignal {
    pub fn new(grid: TimeGrid, nu: f64, values: DMatrix<f64>) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidSignal(format!("nu = {nu} must be positive")));
        }
        if values.nrows() != grid.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for a grid of {} samples",
                values.nrows(),
                grid.n()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal("non-finite sample".into()));
        }
        Ok(Self { grid, nu, values })
    }

    pub fn zeros(grid: TimeGrid, nu: f64, dim: usize) -> Result<Self> {
        Self::new(grid, nu, DMatrix::zeros(grid.n(), dim))
    }

    /// Samples `f(t_j, i)` for every time index and component.
    pub fn from_fn(
        grid: TimeGrid,
        nu: f64,
        dim: usize,
        mut f: impl FnMut(f64, usize) -> f64,
    ) -> Result<Self> {
        let values = DMatrix::from_fn(grid.n(), dim, |j, i| f(grid.time(j), i));
        Self::new(grid, nu, values)
    }

    /// Separable signal `a(t) * profile[i]`.
    pub fn separable(
        grid: TimeGrid,
        nu: f64,
        temporal: impl Fn(f64) -> f64,
        profile: &[f64],
    ) -> Result<Self> {
        Self::from_fn(grid, nu, profile.len(), |t, i| temporal(t) * profile[i])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Same samples measured with a different weight.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(self.grid, nu, self.values.clone())
    }

    /// Same samples on a grid that differs only in its padding.
    pub fn with_pad_factor(&self, pad_factor: usize) -> Result<Self> {
        Ok(Self {
            grid: self.grid.with_pad_factor(pad_factor)?,
            nu: self.nu,
            values: self.values.clone(),
        })
    }

    /// Components `start..start + len` as a new signal.
    pub fn block(&self, start: usize, len: usize) -> Self {
        Self {
            grid: self.grid,
            nu: self.nu,
            values: self.values.columns(start, len).into_owned(),
        }
    }

    /// Concatenates the components of `self` and `other`.
    pub fn stack(&self, other: &WeightedSignal) -> Result<Self> {
        self.check_compatible(other)?;
        let (n, a, b) = (self.grid.n(), self.dim(), other.dim());
        let mut values = DMatrix::zeros(n, a + b);
        values.columns_mut(0, a).copy_from(&self.values);
        values.columns_mut(a, b).copy_from(&other.values);
        Ok(Self {
            grid: self.grid,
            nu: self.nu,
            values,
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            nu: self.nu,
            values: &self.values * alpha,
        }
    }

    pub fn add(&self, other: &WeightedSignal) -> Result<Self> {
        self.check_compatible(other)?;
        self.check_same_dim(other)?;
        Ok(Self {
            grid: self.grid,
            nu: self.nu,
            values: &self.values + &other.values,
        })
    }

    pub fn sub(&self, other: &WeightedSignal) -> Result<Self> {
        self.check_compatible(other)?;
        self.check_same_dim(other)?;
        Ok(Self {
            grid: self.grid,
            nu: self.nu,
            values: &self.values - &other.values,
        })
    }

    /// Time-shift by `m` samples (positive: later), filling with zeros.
    pub fn shift(&self, m: isize) -> Self {
        let n = self.grid.n() as isize;
        let mut values = DMatrix::zeros(self.grid.n(), self.dim());
        for j in 0..n {
            let src = j - m;
            if (0..n).contains(&src) {
                values
                    .row_mut(j as usize)
                    .copy_from(&self.values.row(src as usize));
            }
        }
        Self {
            grid: self.grid,
            nu: self.nu,
            values,
        }
    }

    pub(crate) fn check_compatible(&self, other: &WeightedSignal) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("signals live on different grids".into()));
        }
        if self.nu != other.nu {
            return Err(Error::DimensionMismatch(format!(
                "weights differ: {} vs {}",
                self.nu, other.nu
            )));
        }
        Ok(())
    }

    fn check_same_dim(&self, other: &WeightedSignal) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} components",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

/// Per-frequency complex spatial vectors, the image of a [`WeightedSignal`]
/// under [`fourier_laplace`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal {
    grid: TimeGrid,
    nu: f64,
    freqs: Vec<f64>,
    coeffs: DMatrix<Complex64>,
}

impl SpectralSignal {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Frequencies in DFT order, see [`TimeGrid::frequencies`].
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// `(n * pad_factor) x d` coefficients; row `k` belongs to `freqs[k]`.
    pub fn coeffs(&self) -> &DMatrix<Complex64> {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// `L2` norm with respect to the frequency measure `dw`.
    pub fn l2_norm(&self) -> f64 {
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.frequency_step())
            .sqrt()
    }

    pub fn from_parts(
        grid: TimeGrid,
        nu: f64,
        coeffs: DMatrix<Complex64>,
    ) -> Result<Self> {
        if coeffs.nrows() != grid.padded_len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequency rows for a padded length of {}",
                coeffs.nrows(),
                grid.padded_len()
            )));
        }
        Ok(Self {
            freqs: grid.frequencies(),
            grid,
            nu,
            coeffs,
        })
    }

    /// Applies `map(k, z_k, row_k)` to every frequency row, in parallel.
    /// `map` must return a row of length `out_dim`.
    pub fn map_rows<F>(&self, out_dim: usize, map: F) -> Result<SpectralSignal>
    where
        F: Fn(usize, Complex64, &DVector<Complex64>) -> Result<DVector<Complex64>> + Sync,
    {
        let rows: Vec<DVector<Complex64>> = (0..self.freqs.len())
            .into_par_iter()
            .map(|k| {
                let z = frequency_point(self.freqs[k], self.nu);
                let row = self.coeffs.row(k).transpose();
                map(k, z, &row)
            })
            .collect::<Result<_>>()?;
        let mut coeffs = DMatrix::zeros(self.freqs.len(), out_dim);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != out_dim {
                return Err(Error::DimensionMismatch(format!(
                    "multiplier returned {} components, expected {out_dim}",
                    row.len()
                )));
            }
            coeffs.row_mut(k).copy_from(&row.transpose());
        }
        Ok(SpectralSignal {
            grid: self.grid,
            nu: self.nu,
            freqs: self.freqs.clone(),
            coeffs,
        })
    }
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

/// `sqrt( sum_j |f(t_j)|^2 exp(-2 nu t_j) dt )`.
pub fn weighted_norm(f: &WeightedSignal) -> f64 {
    let grid = f.grid();
    let mut acc = 0.0;
    for j in 0..grid.n() {
        let w = (-2.0 * f.nu() * grid.time(j)).exp();
        let row: f64 = f.values().row(j).iter().map(|v| v * v).sum();
        acc += w * row;
    }
    (acc * grid.dt()).sqrt()
}

/// Discrete `(L_nu f)(t) = (2 pi)^{-1/2} int exp(-nu y - i t y) f(y) dy`.
pub fn fourier_laplace(f: &WeightedSignal) -> SpectralSignal {
    let grid = *f.grid();
    let len = grid.padded_len();
    let fft = plan(len, false);
    let freqs = grid.frequencies();
    let scale = grid.dt() / (2.0 * PI).sqrt();
    let phase: Vec<Complex64> = freqs
        .iter()
        .map(|&w| Complex64::from_polar(scale, -w * grid.t_start()))
        .collect();
    let damping: Vec<f64> = (0..grid.n())
        .map(|j| (-f.nu() * grid.time(j)).exp())
        .collect();

    let columns: Vec<Vec<Complex64>> = (0..f.dim())
        .into_par_iter()
        .map(|i| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for (j, b) in buf.iter_mut().take(grid.n()).enumerate() {
                *b = Complex64::new(f.values()[(j, i)] * damping[j], 0.0);
            }
            fft.process(&mut buf);
            for (b, p) in buf.iter_mut().zip(&phase) {
                *b *= p;
            }
            buf
        })
        .collect();

    let mut coeffs = DMatrix::zeros(len, f.dim());
    for (i, col) in columns.into_iter().enumerate() {
        coeffs.column_mut(i).copy_from_slice(&col);
    }
    SpectralSignal {
        grid,
        nu: f.nu(),
        freqs,
        coeffs,
    }
}

/// Inverse of [`fourier_laplace`]: inverse DFT, drop the padding, undo the
/// exponential weight. The imaginary part (zero for spectra of real
/// signals, up to rounding) is discarded.
pub fn inverse_fourier_laplace(spec: &SpectralSignal) -> WeightedSignal {
    let grid = spec.grid;
    let len = grid.padded_len();
    let fft = plan(len, true);
    let scale = (2.0 * PI).sqrt() / (grid.dt() * len as f64);
    let phase: Vec<Complex64> = spec
        .freqs
        .iter()
        .map(|&w| Complex64::from_polar(scale, w * grid.t_start()))
        .collect();
    let growth: Vec<f64> = (0..grid.n())
        .map(|j| (spec.nu * grid.time(j)).exp())
        .collect();

    let columns: Vec<Vec<f64>> = (0..spec.dim())
        .into_par_iter()
        .map(|i| {
            let mut buf: Vec<Complex64> = spec
                .coeffs
                .column(i)
                .iter()
                .zip(&phase)
                .map(|(c, p)| c * p)
                .collect();
            fft.process(&mut buf);
            buf.iter()
                .take(grid.n())
                .zip(&growth)
                .map(|(b, g)| b.re * g)
                .collect()
        })
        .collect();

    let mut values = DMatrix::zeros(grid.n(), spec.dim());
    for (i, col) in columns.into_iter().enumerate() {
        values.column_mut(i).copy_from_slice(&col);
    }
    WeightedSignal {
        grid,
        nu: spec.nu,
        values,
    }
}

fn check_disk(spec: &SpectralSignal, radius: Option<f64>) -> Result<()> {
    if let Some(r) = radius {
        for &t in spec.freqs() {
            let z = frequency_point(t, spec.nu());
            if !in_disk(z, r) {
                return Err(Error::EvaluationOutsideDisk {
                    re: z.re,
                    im: z.im,
                    radius: r,
                });
            }
        }
    }
    Ok(())
}

/// `M(d/dt^{-1}) f = L_nu^* M(1 / (i m + nu)) L_nu f` for a matrix-valued
/// symbol `m(z)` (`d x d`). When `radius` is given, every sampled `z` must
/// lie in `B(radius, radius)`.
pub fn apply_multiplier<M>(
    f: &WeightedSignal,
    m: M,
    radius: Option<f64>,
) -> Result<WeightedSignal>
where
    M: Fn(Complex64) -> DMatrix<Complex64> + Sync,
{
    let spec = fourier_laplace(f);
    check_disk(&spec, radius)?;
    let d = f.dim();
    let out = spec.map_rows(d, |_, z, row| {
        let mat = m(z);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "multiplier is {}x{}, signal has {d} components",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(mat * row)
    })?;
    Ok(inverse_fourier_laplace(&out))
}

/// Scalar symbol applied to every component.
pub fn apply_scalar_multiplier<M>(
    f: &WeightedSignal,
    m: M,
    radius: Option<f64>,
) -> Result<WeightedSignal>
where
    M: Fn(Complex64) -> Complex64,
{
    let mut spec = fourier_laplace(f);
    check_disk(&spec, radius)?;
    for (k, &t) in spec.freqs.iter().enumerate() {
        let s = m(frequency_point(t, spec.nu));
        for c in spec.coeffs.row_mut(k).iter_mut() {
            *c *= s;
        }
    }
    Ok(inverse_fourier_laplace(&spec))
}

/// `(d/dt)^beta` via the symbol `(i t + nu)^beta` on the principal branch.
pub fn fractional_derivative(f: &WeightedSignal, beta: f64) -> WeightedSignal {
    let nu = f.nu();
    apply_scalar_multiplier(f, |z| (z.inv()).powf(beta), None)
        .expect("scalar multiplier without a radius cannot fail")
        .with_nu(nu)
        .expect("weight is unchanged")
}

/// Zeroes every sample with `t_j > a`.
pub fn cutoff(f: &WeightedSignal, a: f64) -> WeightedSignal {
    let mut out = f.clone();
    for j in 0..f.grid().n() {
        if f.grid().time(j) > a {
            out.values.row_mut(j).fill(0.0);
        }
    }
    out
}

/// `sum_j <u(t_j), phi(t_j)> exp(-2 nu t_j) dt`.
pub fn weighted_inner(u: &WeightedSignal, phi: &WeightedSignal) -> Result<f64> {
    u.check_compatible(phi)?;
    if u.dim() != phi.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pairing of {} and {} components",
            u.dim(),
            phi.dim()
        )));
    }
    let grid = u.grid();
    let mut acc = 0.0;
    for j in 0..grid.n() {
        let w = (-2.0 * u.nu() * grid.time(j)).exp();
        acc += w * u.values().row(j).dot(&phi.values().row(j));
    }
    Ok(acc * grid.dt())
}
