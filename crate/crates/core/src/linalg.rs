//! Sparse/iterative linear algebra used by the surface and volume
//! discretizations: CSR matrices, Jacobi-preconditioned conjugate gradients
//! and a shift-invert Lanczos solver for symmetric pencils (S, M).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Anything that can act as a symmetric operator on nodal vectors.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>);
    /// Diagonal, used for Jacobi preconditioning.
    fn diagonal(&self) -> DVector<f64>;
}

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square CSR matrix from (row, col, value) triplets, summing
    /// duplicates.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] = cols.len();
                last = Some((r, c));
            }
            row_ptr[r + 1] = cols.len();
        }
        for r in 0..n {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

impl LinearOp for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        for r in 0..self.n {
            let mut s = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[idx] * x[self.cols[idx]];
            }
            y[r] = s;
        }
    }

    fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for r in 0..self.n {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[idx] == r {
                    d[r] += self.vals[idx];
                }
            }
        }
        d
    }
}

/// Diagonal operator (lumped mass matrices).
#[derive(Debug, Clone)]
pub struct DiagonalOp(pub DVector<f64>);

impl LinearOp for DiagonalOp {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        for i in 0..self.0.len() {
            y[i] = self.0[i] * x[i];
        }
    }
    fn diagonal(&self) -> DVector<f64> {
        self.0.clone()
    }
}

/// SPD preconditioner interface for CG.
pub trait Preconditioner {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64>;
}

/// Jacobi (diagonal) preconditioner.
pub struct JacobiPrecond {
    inv_diag: DVector<f64>,
}

impl JacobiPrecond {
    pub fn new(diag: &DVector<f64>) -> Self {
        JacobiPrecond {
            inv_diag: diag.map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }),
        }
    }
}

impl Preconditioner for JacobiPrecond {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        r.component_mul(&self.inv_diag)
    }
}

/// Preconditioned conjugate gradients for SPD operators. Returns the solution
/// and the iteration count.
pub fn cg_solve<A: LinearOp + ?Sized>(
    a: &A,
    b: &DVector<f64>,
    precond: &dyn Preconditioner,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize)> {
    let n = a.dim();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut z = precond.solve(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    for it in 0..max_iter {
        a.apply(&p, &mut ap);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(Error::NoConvergence(format!(
                "CG encountered non-positive curvature p'Ap = {pap}"
            )));
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= rel_tol * bnorm {
            return Ok((x, it + 1));
        }
        z = precond.solve(&r);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * beta;
    }
    Err(Error::NoConvergence(format!(
        "CG did not reach tolerance {rel_tol} in {max_iter} iterations (residual {:.3e})",
        r.norm() / bnorm
    )))
}

/// Smallest `count` eigenpairs of the symmetric pencil `S x = lambda M x`
/// (S positive semi-definite, M positive definite), by shift-inverted Lanczos
/// on `(S + sigma M)^{-1} M` with full reorthogonalization.
///
/// A single Krylov chain carries one direction per eigenspace, so degenerate
/// clusters are resolved by restarting deflated chains against the locked
/// pairs until the requested count is complete, plus one confirming chain
/// that certifies no smaller eigenvalue was missed. Returned eigenvectors are
/// M-orthonormal, eigenvalues ascending.
pub fn smallest_eigenpairs<S: LinearOp + ?Sized, M: LinearOp + ?Sized>(
    s: &S,
    m: &M,
    count: usize,
    sigma: f64,
    seed: u64,
    precond: Option<&dyn Preconditioner>,
) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let n = s.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!(
            "eigenpair count {count} out of range for dimension {n}"
        )));
    }
    let shifted = ShiftedOp { s, m, sigma };
    let jacobi = {
        let mut d = s.diagonal();
        d.axpy(sigma, &m.diagonal(), 1.0);
        JacobiPrecond::new(&d)
    };
    let precond: &dyn Preconditioner = precond.unwrap_or(&jacobi);
    let mut locked: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new(); // (lambda, x, Mx)
    let max_chains = 3 * count + 12;
    let mut confirming = false;
    let mut barren = 0usize;
    let mut boost = 0usize;
    for chain in 0..max_chains {
        if locked.len() >= n {
            break;
        }
        let found = lanczos_chain(
            &shifted,
            m,
            precond,
            &locked,
            count.saturating_sub(locked.len().min(count)).max(1),
            sigma,
            seed.wrapping_add(chain as u64),
            n,
            boost,
        )?;
        let mut new_smallest = f64::INFINITY;
        let produced = !found.is_empty();
        for (lambda, x) in found {
            let mut mx = DVector::zeros(n);
            m.apply(&x, &mut mx);
            locked.push((lambda, x, mx));
            new_smallest = new_smallest.min(lambda);
        }
        if produced {
            barren = 0;
        } else {
            barren += 1;
            boost += 16;
        }
        if locked.len() >= count {
            locked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let kth = locked[count - 1].0;
            let gap_tol = 1e-8 * (1.0 + kth.abs());
            if confirming && produced && new_smallest >= kth - gap_tol {
                let vals = locked.iter().take(count).map(|p| p.0).collect();
                let vecs = locked.into_iter().take(count).map(|p| p.1).collect();
                return Ok((vals, vecs));
            }
            confirming = true;
        }
        if barren >= 3 {
            if locked.len() >= count {
                // Chains exhausted without contradicting completeness.
                locked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let vals = locked.iter().take(count).map(|p| p.0).collect();
                let vecs = locked.into_iter().take(count).map(|p| p.1).collect();
                return Ok((vals, vecs));
            }
            return Err(Error::NoConvergence(format!(
                "Lanczos chains stagnated with {}/{} eigenpairs",
                locked.len(),
                count
            )));
        }
    }
    if locked.len() >= count {
        locked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let vals = locked.iter().take(count).map(|p| p.0).collect();
        let vecs = locked.into_iter().take(count).map(|p| p.1).collect();
        return Ok((vals, vecs));
    }
    Err(Error::NoConvergence(format!(
        "Lanczos did not converge {count} eigenpairs in {max_chains} chains"
    )))
}

/// One Lanczos chain on the shift-inverted operator, deflated against the
/// locked pairs. Returns the Ritz pairs that met the residual tolerance.
#[allow(clippy::too_many_arguments)]
fn lanczos_chain<M: LinearOp + ?Sized>(
    shifted: &dyn LinearOp,
    m: &M,
    precond: &dyn Preconditioner,
    locked: &[(f64, DVector<f64>, DVector<f64>)],
    want: usize,
    sigma: f64,
    seed: u64,
    n: usize,
    boost: usize,
) -> Result<Vec<(f64, DVector<f64>)>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let cg_max = 60 * ((n as f64).sqrt() as usize + 20);
    let max_len = n
        .saturating_sub(locked.len())
        .min((2 * want + 28 + boost).max(36));
    if max_len == 0 {
        return Ok(Vec::new());
    }
    let deflate = |w: &mut DVector<f64>| {
        for (_, x, mx) in locked {
            let c = w.dot(mx);
            w.axpy(-c, x, 1.0);
        }
    };
    let mut tmp = DVector::zeros(n);
    let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64));
    deflate(&mut v);
    deflate(&mut v);
    m.apply(&v, &mut tmp);
    let nrm = v.dot(&tmp).sqrt();
    if nrm < 1e-12 {
        return Ok(Vec::new());
    }
    v /= nrm;
    let mut mv = DVector::zeros(n);
    m.apply(&v, &mut mv);
    let mut q = vec![v];
    let mut mq = vec![mv];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut final_beta = 0.0;

    for j in 0..max_len {
        let (mut w, _) = cg_solve(shifted, &mq[j], precond, 1e-12, cg_max)?;
        let alpha = w.dot(&mq[j]);
        w.axpy(-alpha, &q[j], 1.0);
        if j > 0 {
            w.axpy(-betas[j - 1], &q[j - 1], 1.0);
        }
        for _ in 0..2 {
            deflate(&mut w);
            for (qi, mqi) in q.iter().zip(mq.iter()) {
                let c = w.dot(mqi);
                w.axpy(-c, qi, 1.0);
            }
        }
        alphas.push(alpha);
        m.apply(&w, &mut tmp);
        let beta = w.dot(&tmp).max(0.0).sqrt();
        final_beta = beta;
        let k = alphas.len();
        if k >= (2 * want + 16 + boost).min(max_len) || k == max_len || beta < 1e-13 {
            break;
        }
        betas.push(beta);
        let qn = &w / beta;
        m.apply(&qn, &mut tmp);
        q.push(qn);
        mq.push(tmp.clone());
    }
    let k = alphas.len();
    let beta_last = final_beta;
    let (theta, svecs) = tridiag_eigen(&alphas, &betas);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| theta[b].partial_cmp(&theta[a]).unwrap());
    let mut out = Vec::new();
    for &idx in &order {
        let th = theta[idx];
        if th <= 1e-14 {
            break;
        }
        let resid = (beta_last * svecs[(k - 1, idx)]).abs() / th;
        if resid > 1e-10 {
            continue;
        }
        let mut x = DVector::zeros(n);
        for (i, qi) in q.iter().enumerate() {
            x.axpy(svecs[(i, idx)], qi, 1.0);
        }
        m.apply(&x, &mut tmp);
        let nn = x.dot(&tmp).sqrt();
        if nn < 1e-12 {
            continue;
        }
        x /= nn;
        out.push((1.0 / th - sigma, x));
    }
    Ok(out)
}

struct ShiftedOp<'a, S: LinearOp + ?Sized, M: LinearOp + ?Sized> {
    s: &'a S,
    m: &'a M,
    sigma: f64,
}

impl<S: LinearOp + ?Sized, M: LinearOp + ?Sized> LinearOp for ShiftedOp<'_, S, M> {
    fn dim(&self) -> usize {
        self.s.dim()
    }
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.s.apply(x, y);
        let mut t = DVector::zeros(x.len());
        self.m.apply(x, &mut t);
        y.axpy(self.sigma, &t, 1.0);
    }
    fn diagonal(&self) -> DVector<f64> {
        let mut d = self.s.diagonal();
        d.axpy(self.sigma, &self.m.diagonal(), 1.0);
        d
    }
}

/// Eigendecomposition of the symmetric tridiagonal (alphas, betas) matrix.
fn tridiag_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

/// Smallest generalized eigenvalue of the pencil (A, B) for small symmetric
/// matrices with B positive definite (used for II relative to the metric).
pub fn min_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidGeometry("metric not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidGeometry("metric not invertible".into()))?;
    let sym = &l_inv * a * l_inv.transpose();
    let eig = sym.symmetric_eigen();
    Ok(eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        // Dirichlet second-difference matrix, eigenvalues 4 sin^2(j pi / (2(n+1))) / h^2.
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i > 0 {
                trip.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, trip)
    }

    #[test]
    fn csr_apply_matches_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            vec![(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 0, 1.0), (2, 2, 4.0), (0, 2, 0.5)],
        );
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let mut y = DVector::zeros(3);
        a.apply(&x, &mut y);
        assert_abs_diff_eq!(y[0], 2.0 + 1.5 * 3.0);
        assert_abs_diff_eq!(y[1], 6.0);
        assert_abs_diff_eq!(y[2], 1.0 + 12.0);
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 50;
        let a = laplacian_1d(n);
        let b = DVector::from_fn(n, |i, _| (i as f64 * 0.1).sin());
        let (x, _) = cg_solve(&a, &b, &JacobiPrecond::new(&a.diagonal()), 1e-12, 1000).unwrap();
        let mut r = DVector::zeros(n);
        a.apply(&x, &mut r);
        assert!((r - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn lanczos_finds_smallest_pencil_eigenvalues() {
        let n = 120;
        let h = 1.0 / (n as f64 + 1.0);
        let s = laplacian_1d(n);
        let m = DiagonalOp(DVector::from_element(n, h * h));
        let (vals, vecs) = smallest_eigenpairs(&s, &m, 4, 1.0, 42, None).unwrap();
        for (j, v) in vals.iter().enumerate() {
            let exact =
                4.0 / (h * h) * ((j as f64 + 1.0) * std::f64::consts::PI * h / 2.0).sin().powi(2);
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-6 * exact.max(1.0));
        }
        // M-orthonormality of eigenvectors.
        for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                let mut tmp = DVector::zeros(n);
                m.apply(&vecs[j], &mut tmp);
                let ip = vecs[i].dot(&tmp);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip, expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn min_generalized_eigenvalue_2x2() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 6.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert_abs_diff_eq!(min_generalized_eigenvalue(&a, &b).unwrap(), 2.0);
    }
}
