//! Conjugate gradient solvers and the mean-zero constrained (saddle point)
//! solve used by the periodic Poisson problem.

use crate::error::{Error, Result};
use crate::fem::{CsrMatrix, FastDiagonalization, KroneckerOperator, KroneckerSolver};

/// A square linear map `x ↦ A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

impl LinearOperator for KroneckerOperator {
    fn dim(&self) -> usize {
        self.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        KroneckerOperator::apply(self, x, y)
    }
}

impl Preconditioner for FastDiagonalization {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve(z);
    }
}

/// Approximate inverse applied as `z = P r`.
pub trait Preconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl Preconditioner for KroneckerSolver {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve(z);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance on `‖A x − b‖₂ / ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64]) -> Result<()> {
    for len in [b.len(), x.len()] {
        if len != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: len,
            });
        }
    }
    Ok(())
}

/// Unpreconditioned CG from a zero initial guess.
pub fn cg_solve<A: LinearOperator + ?Sized>(a: &A, b: &[f64], opts: SolveOptions) -> Result<Vec<f64>> {
    let mut x = vec![0.0; b.len()];
    pcg_solve(a, &Identity, b, &mut x, opts)?;
    Ok(x)
}

/// Preconditioned CG starting from the contents of `x`.
pub fn pcg_solve<A, P>(a: &A, p: &P, b: &[f64], x: &mut [f64], opts: SolveOptions) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    pcg_projected(a, p, b, x, opts, None)
}

/// CG where every search direction is orthogonalized against `null`
/// (used for operators with a known one-dimensional nullspace).
fn pcg_projected<A, P>(
    a: &A,
    p: &P,
    b: &[f64],
    x: &mut [f64],
    opts: SolveOptions,
    null: Option<&[f64]>,
) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    check_dims(a, b, x)?;
    let n = b.len();
    let project = |v: &mut [f64]| {
        if let Some(z) = null {
            let c = dot(v, z) / dot(z, z);
            v.iter_mut().zip(z).for_each(|(vi, zi)| *vi -= c * zi);
        }
    };
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    project(&mut r);
    let mut z = vec![0.0; n];
    p.precondition(&r, &mut z);
    project(&mut z);
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    let mut ad = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(SolveReport {
                iterations: it,
                residual: res,
            });
        }
        a.apply(&dir, &mut ad);
        let dad = dot(&dir, &ad);
        if !(dad > 0.0) {
            return Err(Error::Singular(format!(
                "non-positive curvature {dad:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / dad;
        for i in 0..n {
            x[i] += alpha * dir[i];
            r[i] -= alpha * ad[i];
        }
        project(&mut r);
        p.precondition(&r, &mut z);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            dir[i] = z[i] + beta * dir[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
    }
    if res <= opts.tol {
        return Ok(SolveReport {
            iterations: opts.max_iter,
            residual: res,
        });
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Solves `K Φ + Bᵀ c = rhs`, `B Φ = 0` for a stiffness matrix `K` whose
/// nullspace is the constants and a constraint row `B` of node weights
/// (`B Φ = ∫ Φ`). Returns `(Φ, c)`.
pub fn saddle_solve(
    k: &CsrMatrix,
    weights: &[f64],
    rhs: &[f64],
    opts: SolveOptions,
) -> Result<(Vec<f64>, f64)> {
    let scale = rhs.iter().map(|r| r.abs()).sum::<f64>();
    saddle_solve_scaled(k, weights, rhs, scale, opts)
}

/// [`saddle_solve`] with an explicit magnitude against which the
/// compatibility defect `Σ rhs` is judged (for right sides formed by
/// cancellation, such as `M ρ − ρ₀ w`).
pub fn saddle_solve_scaled(
    k: &CsrMatrix,
    weights: &[f64],
    rhs: &[f64],
    scale: f64,
    opts: SolveOptions,
) -> Result<(Vec<f64>, f64)> {
    saddle_solve_preconditioned(k, &Identity, weights, rhs, scale, opts)
}

/// [`saddle_solve_scaled`] with a preconditioner that is symmetric positive
/// definite on the complement of the constants.
pub fn saddle_solve_preconditioned<P: Preconditioner + ?Sized>(
    k: &CsrMatrix,
    p: &P,
    weights: &[f64],
    rhs: &[f64],
    scale: f64,
    opts: SolveOptions,
) -> Result<(Vec<f64>, f64)> {
    let n = k.nrows();
    if weights.len() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if weights.len() != n { weights.len() } else { rhs.len() },
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Singular("constraint weights sum to zero".into()));
    }
    // Testing with the constant function isolates the multiplier.
    let c = rhs.iter().sum::<f64>() / total;
    if c.abs() * total > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::IncompatibleRhs { mean: c });
    }
    let reduced: Vec<f64> = rhs.iter().zip(weights).map(|(r, w)| r - c * w).collect();
    let ones = vec![1.0; n];
    let mut phi = vec![0.0; n];
    pcg_projected(k, p, &reduced, &mut phi, opts, Some(&ones))?;
    let mean = dot(weights, &phi) / total;
    phi.iter_mut().for_each(|p| *p -= mean);
    Ok((phi, c))
}
