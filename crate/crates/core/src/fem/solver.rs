//! Preconditioned conjugate gradients for the symmetric systems of the solvers.

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Extra constraint for singular (pure Neumann) systems.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Constraint {
    #[default]
    None,
    /// Kernel = constants. The right-hand side is projected onto the range and
    /// the solution shifted so that its mean over these nodes vanishes.
    ZeroMean(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Bound on `‖Ax − b‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub constraint: Constraint,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            constraint: Constraint::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn solve_linear(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    let mut x = vec![0.0; a.n()];
    solve_linear_from(a, b, &mut x, opts)?;
    Ok(x)
}

/// Solves `A x = b` starting from the contents of `x`.
pub fn solve_linear_from(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &SolveOptions) -> Result<SolveStats> {
    let n = a.n();
    if b.len() != n || x.len() != n {
        return Err(Error::Dimension(format!(
            "matrix is {n}x{n}, rhs has {} entries, guess has {}",
            b.len(),
            x.len()
        )));
    }
    if !a.is_symmetric() {
        return Err(Error::Parameter("conjugate gradients needs a symmetric matrix".into()));
    }
    let mut rhs = b.to_vec();
    if let Constraint::ZeroMean(_) = opts.constraint {
        let mean = rhs.iter().sum::<f64>() / n as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
    }
    let stats = pcg(a, &rhs, x, opts.tol, opts.max_iter)?;
    if let Constraint::ZeroMean(nodes) = &opts.constraint {
        if !nodes.is_empty() {
            let mean = nodes.iter().map(|&i| x[i]).sum::<f64>() / nodes.len() as f64;
            x.iter_mut().for_each(|v| *v -= mean);
        }
    }
    Ok(stats)
}

/// Jacobi-preconditioned CG, terminated on the true relative residual.
fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diag()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        a.matvec_into(x, ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        norm(r) / bnorm
    };
    let mut rel = true_residual(x, &mut r, &mut ap);
    let mut iterations = 0;
    // Restart loop: the recursive residual can drift from the true one.
    while rel > tol && iterations < max_iter {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.matvec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            if norm(&r) / bnorm <= 0.5 * tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let prev = rel;
        rel = true_residual(x, &mut r, &mut ap);
        if !rel.is_finite() || (rel > tol && rel >= prev && iterations < max_iter) {
            // No progress possible (breakdown).
            break;
        }
    }
    if rel <= tol {
        Ok(SolveStats {
            iterations,
            residual: rel,
        })
    } else {
        Err(Error::SolverDivergence {
            iterations,
            residual: rel,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let a = CsrMatrix::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(solve_linear(&a, &b, &SolveOptions::default()).unwrap(), b);
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let x = solve_linear(&a, &[2.0, 3.0], &SolveOptions::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let n: usize = 50;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match i.abs_diff(j) {
                        0 => 2.0,
                        1 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        let a = CsrMatrix::from_dense(&rows);
        let opts = SolveOptions {
            max_iter: 3,
            ..Default::default()
        };
        match solve_linear(&a, &vec![1.0; n], &opts) {
            Err(Error::SolverDivergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonsymmetric_is_rejected() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(solve_linear(&a, &[1.0, 1.0], &SolveOptions::default()).is_err());
    }
}
