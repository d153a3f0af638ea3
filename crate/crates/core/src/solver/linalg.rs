//! Linear solvers for the condensed SPD systems.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::assembly::Csr;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverBackend {
    /// Sparse Cholesky factorization.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

pub(crate) enum Factor {
    Cholesky(Box<Llt<usize, f64>>),
    Cg { diag: Vec<f64> },
}

pub(crate) struct LinearSolver {
    a: Csr,
    factor: Factor,
    tol: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl LinearSolver {
    pub fn new(a: Csr, backend: SolverBackend, tol: f64) -> Result<Self> {
        let factor = match backend {
            SolverBackend::Cholesky => {
                faer::set_global_parallelism(faer::Par::Seq);
                let trip: Vec<Triplet<usize, usize, f64>> = (0..a.n)
                    .flat_map(|i| a.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
                    .collect();
                let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &trip)
                    .map_err(|e| Error::Assembly(format!("sparse matrix construction: {e:?}")))?;
                let llt = m
                    .sp_cholesky(Side::Lower)
                    .map_err(|e| Error::solver(format!("Cholesky factorization failed: {e:?}")))?;
                Factor::Cholesky(Box::new(llt))
            }
            SolverBackend::Cg => {
                let diag = a.diag();
                if diag.iter().any(|d| !(*d > 0.0)) {
                    return Err(Error::Assembly("nonpositive diagonal entry".into()));
                }
                Factor::Cg { diag }
            }
        };
        Ok(LinearSolver { a, factor, tol })
    }

    pub fn dim(&self) -> usize {
        self.a.n
    }

    pub fn matrix(&self) -> &Csr {
        &self.a
    }

    /// Solves `A x = b`; the relative residual is checked against the
    /// configured tolerance.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        match &self.factor {
            Factor::Cholesky(llt) => {
                let mut x = self.chol(llt, b);
                let mut history = Vec::new();
                for _ in 0..3 {
                    let r: Vec<f64> = self.a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
                    let rel = norm(&r) / bn;
                    history.push(rel);
                    if rel <= self.tol {
                        return Ok(x);
                    }
                    let dx = self.chol(llt, &r);
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                }
                let r: Vec<f64> = self.a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
                let rel = norm(&r) / bn;
                history.push(rel);
                // Refinement stalls at the conditioning floor; accept anything
                // a few orders above machine precision.
                if rel <= self.tol.max(1e-9) {
                    Ok(x)
                } else {
                    Err(Error::Solver {
                        msg: format!("Cholesky residual {rel:e} above tolerance {:e}", self.tol),
                        residual_history: history,
                    })
                }
            }
            Factor::Cg { diag } => self.pcg(diag, b, bn),
        }
    }

    fn chol(&self, llt: &Llt<usize, f64>, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = llt.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    fn pcg(&self, diag: &[f64], b: &[f64], bn: f64) -> Result<Vec<f64>> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, d)| ri / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut history = Vec::new();
        let max_iter = 20 * n + 1000;
        for _ in 0..max_iter {
            let ap = self.a.matvec(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Solver {
                    msg: "conjugate gradients broke down (matrix not positive definite)".into(),
                    residual_history: history,
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rel = norm(&r) / bn;
            history.push(rel);
            if rel <= self.tol {
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
            msg: format!("conjugate gradients did not converge in {max_iter} iterations"),
            residual_history: history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        Csr::from_triplets(n, t)
    }

    #[test]
    fn backends_agree() {
        let a = laplace_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x1 = LinearSolver::new(a.clone(), SolverBackend::Cholesky, 1e-12)
            .unwrap()
            .solve(&b)
            .unwrap();
        let x2 = LinearSolver::new(a, SolverBackend::Cg, 1e-12).unwrap().solve(&b).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_reports_history_on_failure() {
        // Pure Neumann Laplacian with a load that is not in its range.
        let n = 400;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let a = Csr::from_triplets(n, t);
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        let s = LinearSolver::new(a, SolverBackend::Cg, 1e-12).unwrap();
        match s.solve(&b) {
            Err(Error::Solver { residual_history, .. }) => assert!(!residual_history.is_empty()),
            other => panic!("expected solver error, got {:?}", other.map(|v| v.len())),
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = Csr::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(LinearSolver::new(a.clone(), SolverBackend::Cholesky, 1e-12).is_err());
        assert!(LinearSolver::new(a, SolverBackend::Cg, 1e-12).is_err());
    }
}
