//! Reduced SPD systems: sparse Cholesky with a Jacobi-preconditioned CG fallback.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use super::{CsrMatrix, NodeMap};
use crate::error::{Error, Result};

/// Relative residual required of every solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Which backend produced a factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Cholesky,
    ConjugateGradient,
}

enum Backend {
    Cholesky(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Cg(Vec<f64>),
}

/// Factorized reduced matrix PᵀKP for a fixed constraint structure.
pub struct Factorization {
    pub(super) map: NodeMap,
    reduced: CsrMatrix,
    backend: Backend,
}

impl Factorization {
    pub(super) fn new(k: &CsrMatrix, map: NodeMap) -> Result<Self> {
        let nd = map.n_dofs;
        if nd == 0 {
            return Err(Error::Assembly("no free degrees of freedom".into()));
        }
        let mut trip = Vec::with_capacity(k.values.len());
        for i in 0..k.n {
            let Some(di) = map.dof[i] else { continue };
            for p in k.indptr[i]..k.indptr[i + 1] {
                if let Some(dj) = map.dof[k.indices[p]] {
                    trip.push((di, dj, k.values[p]));
                }
            }
        }
        let reduced = CsrMatrix::from_triplets(nd, trip);
        let diag = reduced.diagonal();
        if diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Solver {
                message: "reduced matrix has a non-positive diagonal entry".into(),
                residuals: vec![],
            });
        }
        let backend = match cholesky(&reduced) {
            Some(llt) => Backend::Cholesky(llt),
            None => Backend::Cg(diag),
        };
        Ok(Factorization {
            map,
            reduced,
            backend,
        })
    }

    pub fn kind(&self) -> SolverKind {
        match self.backend {
            Backend::Cholesky(_) => SolverKind::Cholesky,
            Backend::Cg(_) => SolverKind::ConjugateGradient,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.map.n_dofs
    }

    /// Solves Ku = b subject to u = Px + offset and returns nodal values.
    pub(super) fn solve(&self, k: &CsrMatrix, b: &[f64], offset: &[f64]) -> Result<Vec<f64>> {
        let nd = self.map.n_dofs;
        let ko = k.matvec(offset);
        let mut r = vec![0.0; nd];
        for i in 0..k.n {
            if let Some(d) = self.map.dof[i] {
                r[d] += b[i] - ko[i];
            }
        }
        let x = match &self.backend {
            Backend::Cholesky(llt) => {
                let rhs = Col::<f64>::from_fn(nd, |i| r[i]);
                let sol = llt.solve(&rhs);
                (0..nd).map(|i| sol[i]).collect::<Vec<f64>>()
            }
            Backend::Cg(diag) => pcg(&self.reduced, diag, &r)?,
        };
        let res = residual(&self.reduced, &x, &r);
        if !(res <= RESIDUAL_TOLERANCE) {
            return Err(Error::Solver {
                message: format!("relative residual {:e} above tolerance", res),
                residuals: vec![res],
            });
        }
        Ok((0..k.n)
            .map(|i| match self.map.dof[i] {
                Some(d) => x[d] + offset[i],
                None => offset[i],
            })
            .collect())
    }
}

fn cholesky(a: &CsrMatrix) -> Option<faer::sparse::linalg::solvers::Llt<usize, f64>> {
    let mut trip = Vec::with_capacity(a.values.len());
    for i in 0..a.n {
        for p in a.indptr[i]..a.indptr[i + 1] {
            trip.push(Triplet::new(i, a.indices[p], a.values[p]));
        }
    }
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &trip).ok()?;
    m.sp_cholesky(Side::Lower).ok()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let rn: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        rn
    } else {
        rn / bn
    }
}

/// Jacobi-preconditioned conjugate gradients to a relative residual of 1e−12.
pub fn pcg(a: &CsrMatrix, diag: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut history = Vec::new();
    let max_iter = 20 * n + 1000;
    for _ in 0..max_iter {
        let ap = a.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Solver {
                message: "matrix is not positive definite".into(),
                residuals: history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bn;
        history.push(rn);
        if rn < 1e-12 {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver {
        message: "conjugate gradients did not converge".into(),
        residuals: history,
    })
}
