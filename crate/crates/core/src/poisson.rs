//! Direct Neumann Poisson solver on cell centers, diagonalised by the 2D DCT.

use std::f64::consts::PI;

use crate::dct::{DctAlgorithm, DctPlan};
use crate::error::{Error, Result};
use crate::grid::CellField;

#[derive(Debug, Clone)]
pub struct PoissonSolver {
    plan: DctPlan,
    n: usize,
    dx: f64,
    /// `lambda[j*N + k] = 2cos(j pi/N) + 2cos(k pi/N) - 4`.
    eigenvalues: Vec<f64>,
}

/// Solution together with the mean that was projected out of the right-hand side.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub solution: CellField,
    pub discarded_mean: f64,
}

impl PoissonSolver {
    /// Picks the fastest algorithm the side length allows.
    pub fn new(n: usize) -> Result<Self> {
        let alg = if n.is_power_of_two() && n >= 2 {
            DctAlgorithm::Hybrid
        } else if n % 2 == 0 {
            DctAlgorithm::Iterative
        } else {
            DctAlgorithm::Naive
        };
        Self::with_plan(DctPlan::new(n, alg)?)
    }

    pub fn with_plan(plan: DctPlan) -> Result<Self> {
        let n = plan.len();
        let c: Vec<f64> = (0..n).map(|k| 2.0 * (k as f64 * PI / n as f64).cos()).collect();
        let mut eigenvalues = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                eigenvalues[j * n + k] = if j == 0 && k == 0 { 0.0 } else { c[j] + c[k] - 4.0 };
            }
        }
        Ok(Self { plan, n, dx: 1.0 / n as f64, eigenvalues })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Solves `L u = rhs` (5-point Laplacian, mirror Neumann walls) in the zero-mean gauge.
    pub fn solve_neumann(&self, rhs: &CellField) -> Result<CellField> {
        Ok(self.solve_with_diagnostics(rhs)?.solution)
    }

    pub fn solve_with_diagnostics(&self, rhs: &CellField) -> Result<PoissonSolution> {
        if rhs.n != self.n || rhs.data.len() != self.n * self.n {
            return Err(Error::LengthMismatch { expected: self.n * self.n, got: rhs.data.len() });
        }
        let mut big = self.plan.dct2d(&rhs.data)?;
        let discarded_mean = big[0] / (self.n * self.n) as f64;
        let dx2 = self.dx * self.dx;
        big[0] = 0.0;
        for (f, lam) in big.iter_mut().zip(&self.eigenvalues).skip(1) {
            *f *= dx2 / lam;
        }
        let data = self.plan.idct2d(&big)?;
        Ok(PoissonSolution { solution: CellField { n: self.n, data }, discarded_mean })
    }
}

/// 5-point Laplacian with mirrored ghost cells (homogeneous Neumann walls).
pub fn neumann_laplacian(u: &CellField) -> CellField {
    let n = u.n;
    let inv = (n * n) as f64;
    let at = |i: isize, j: isize| {
        let ci = i.clamp(0, n as isize - 1) as usize;
        let cj = j.clamp(0, n as isize - 1) as usize;
        u.data[cj * n + ci]
    };
    let mut out = CellField::zeros(n);
    for j in 0..n as isize {
        for i in 0..n as isize {
            let c = at(i, j);
            out.data[j as usize * n + i as usize] =
                (at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * c) * inv;
        }
    }
    out
}
