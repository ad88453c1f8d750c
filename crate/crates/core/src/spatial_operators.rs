//! Staggered 1-D grids on `(0, 1)`.
//!
//! Dirichlet: velocity on the `m - 1` interior nodes, stress on the `m`
//! cells. Neumann: velocity on the cells, stress on the interior nodes. The
//! discrete gradient `G` maps velocity to stress, the divergence is `-G^T`,
//! and the system operator is `A = [[0, G^T], [-G, 0]]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material_law::CoefficientField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Discrete gradient with at most two entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    rows: Vec<Vec<(usize, f64)>>,
    ncols: usize,
}

impl Gradient {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Non-zeros of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.nrows(), self.ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                g[(i, j)] = v;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSetup {
    m: usize,
    h: f64,
    bc: BoundaryCondition,
    grad: Gradient,
    grad_dense: DMatrix<f64>,
}

impl SpatialSetup {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn velocity_dim(&self) -> usize {
        self.grad.ncols
    }

    pub fn stress_dim(&self) -> usize {
        self.grad.nrows()
    }

    pub fn dim(&self) -> usize {
        self.velocity_dim() + self.stress_dim()
    }

    pub fn gradient(&self) -> &Gradient {
        &self.grad
    }

    /// `G`, stress-dim x velocity-dim.
    pub fn grad(&self) -> &DMatrix<f64> {
        &self.grad_dense
    }

    /// `Div = -G^T`.
    pub fn div(&self) -> DMatrix<f64> {
        -self.grad_dense.transpose()
    }

    /// `A = [[0, G^T], [-G, 0]]`.
    pub fn skew_operator(&self) -> DMatrix<f64> {
        let (p, q) = (self.velocity_dim(), self.stress_dim());
        let mut a = DMatrix::zeros(p + q, p + q);
        for (i, row) in self.grad.rows.iter().enumerate() {
            for &(j, v) in row {
                a[(j, p + i)] = v;
                a[(p + i, j)] = -v;
            }
        }
        a
    }

    fn nodes(&self) -> Vec<f64> {
        (1..self.m).map(|i| i as f64 * self.h).collect()
    }

    fn cells(&self) -> Vec<f64> {
        (0..self.m).map(|j| (j as f64 + 0.5) * self.h).collect()
    }

    pub fn velocity_positions(&self) -> Vec<f64> {
        match self.bc {
            BoundaryCondition::Dirichlet => self.nodes(),
            BoundaryCondition::Neumann => self.cells(),
        }
    }

    pub fn stress_positions(&self) -> Vec<f64> {
        match self.bc {
            BoundaryCondition::Dirichlet => self.cells(),
            BoundaryCondition::Neumann => self.nodes(),
        }
    }

    fn check_cells(&self, field: &CoefficientField) -> Result<()> {
        if field.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "coefficient has {} cells, grid has {}",
                field.len(),
                self.m
            )));
        }
        Ok(())
    }

    fn cells_to_nodes(&self, field: &CoefficientField) -> Result<CoefficientField> {
        let s = field.samples();
        let nodes = (1..self.m).map(|i| 0.5 * (s[i - 1] + s[i])).collect();
        CoefficientField::new(nodes, field.lower_bound())
    }

    /// Maps a cell-sampled coefficient to the velocity unknowns (node values
    /// are the mean of the two adjacent cells).
    pub fn velocity_coefficient(&self, field: &CoefficientField) -> Result<CoefficientField> {
        self.check_cells(field)?;
        match self.bc {
            BoundaryCondition::Dirichlet => self.cells_to_nodes(field),
            BoundaryCondition::Neumann => Ok(field.clone()),
        }
    }

    /// Maps a cell-sampled coefficient to the stress unknowns.
    pub fn stress_coefficient(&self, field: &CoefficientField) -> Result<CoefficientField> {
        self.check_cells(field)?;
        match self.bc {
            BoundaryCondition::Dirichlet => Ok(field.clone()),
            BoundaryCondition::Neumann => self.cells_to_nodes(field),
        }
    }
}

/// Forward differences on `m` cells of `(0, 1)`.
pub fn build_setup(m: usize, bc: BoundaryCondition) -> Result<SpatialSetup> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m = {m}, need at least 2 cells")));
    }
    let h = 1.0 / m as f64;
    let inv = m as f64;
    let grad = match bc {
        // cell j between nodes j and j+1; interior node i sits in column i-1
        BoundaryCondition::Dirichlet => {
            let rows = (0..m)
                .map(|j| {
                    let mut row = Vec::with_capacity(2);
                    if j >= 1 {
                        row.push((j - 1, -inv));
                    }
                    if j + 1 < m {
                        row.push((j, inv));
                    }
                    row
                })
                .collect();
            Gradient { rows, ncols: m - 1 }
        }
        // interior node i between cells i-1 and i
        BoundaryCondition::Neumann => {
            let rows = (1..m).map(|i| vec![(i - 1, -inv), (i, inv)]).collect();
            Gradient { rows, ncols: m }
        }
    };
    let grad_dense = grad.to_dense();
    Ok(SpatialSetup {
        m,
        h,
        bc,
        grad,
        grad_dense,
    })
}

/// Orthogonal projector onto the range of `G`, with an orthonormal basis
/// `Q` of that range (`P = Q Q^T`).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProjection {
    pub p: DMatrix<f64>,
    pub basis: DMatrix<f64>,
    pub rank: usize,
}

impl RangeProjection {
    /// `Q^T x`: coordinates of the projection in the range basis.
    pub fn restrict(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(x)
    }

    /// `Q y`.
    pub fn embed(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.basis * y
    }
}

const RANK_TOL: f64 = 1e-10;

/// Range projector from a column-pivoted QR factorisation of `G`.
pub fn build_projection(setup: &SpatialSetup) -> RangeProjection {
    let g = setup.grad().clone();
    let qr = g.col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let diag_max = diag.iter().cloned().fold(0.0, f64::max);
    let rank = diag.iter().take_while(|&&v| v > RANK_TOL * diag_max).count();
    let basis = qr.q().columns(0, rank).into_owned();
    let p = &basis * basis.transpose();
    RangeProjection { p, basis, rank }
}

/// `(-Laplace_D)^{-beta}` on the stress cells: the cell-centred Dirichlet
/// Laplacian is diagonal in the sine modes `sin(k pi (j + 1/2) h)`,
/// `k = 1..m`, with eigenvalues `(4/h^2) sin^2(k pi h / 2)`.
pub fn nonlocal_coefficient(setup: &SpatialSetup, beta: f64) -> Result<DMatrix<f64>> {
    if beta < 0.0 || beta.is_nan() {
        return Err(Error::BetaNegative(beta));
    }
    if setup.bc() != BoundaryCondition::Dirichlet {
        return Err(Error::WrongBoundaryCondition {
            expected: "Dirichlet",
        });
    }
    let m = setup.m();
    let h = setup.h();
    let pi = std::f64::consts::PI;
    let mut modes = DMatrix::from_fn(m, m, |j, k| {
        ((k + 1) as f64 * pi * (j as f64 + 0.5) * h).sin()
    });
    for mut col in modes.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    let weights = DVector::from_fn(m, |k, _| {
        let s = ((k + 1) as f64 * pi * h / 2.0).sin();
        (4.0 / (h * h) * s * s).powf(-beta)
    });
    let scaled = DMatrix::from_fn(m, m, |j, k| modes[(j, k)] * weights[k]);
    let out = scaled * modes.transpose();
    // symmetrise away rounding
    Ok((&out + out.transpose()) * 0.5)
}
