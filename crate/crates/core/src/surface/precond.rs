//! Fast preconditioners for the shifted weak Laplacian `S + sigma M` on the
//! structured parametric grids. On surfaces of revolution the Fourier modes
//! in the periodic direction decouple exactly, so solving the phi-averaged
//! operator per mode is an (almost) exact solve; for general metrics it is a
//! strong preconditioner.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::ParamOps;
use crate::error::{Error, Result};
use crate::linalg::Preconditioner;

/// Per-azimuthal-mode Cholesky blocks for (theta, phi) charts.
pub struct PolarPrecond {
    n_theta: usize,
    n_phi: usize,
    /// Orthonormal real Fourier basis on the phi grid, column-major.
    basis: DMatrix<f64>,
    /// One factorization per basis column (shared between cos/sin of a mode).
    blocks: Vec<Cholesky<f64, Dyn>>,
}

impl PolarPrecond {
    /// `a`, `c` are the stiffness coefficient fields `w g^{00}`, `w g^{11}`;
    /// `w` the mass weights; all phi-averaged internally.
    pub fn build(
        ops: &ParamOps,
        n_theta: usize,
        n_phi: usize,
        a: &DVector<f64>,
        c: &DVector<f64>,
        w: &DVector<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let avg = |f: &DVector<f64>| -> DVector<f64> {
            DVector::from_fn(n_theta, |i, _| {
                (0..n_phi).map(|j| f[i * n_phi + j]).sum::<f64>() / n_phi as f64
            })
        };
        let a_bar = avg(a);
        let c_bar = avg(c);
        let w_bar = avg(w);
        let d0 = ops.d0_matrix();
        let base = d0.transpose() * DMatrix::from_diagonal(&a_bar) * d0;
        let m_max = (n_phi - 1) / 2;
        let mut basis = DMatrix::zeros(n_phi, n_phi);
        let norm0 = (1.0 / n_phi as f64).sqrt();
        let norm = (2.0 / n_phi as f64).sqrt();
        for j in 0..n_phi {
            basis[(j, 0)] = norm0;
        }
        for t in 1..=m_max {
            for j in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                basis[(j, 2 * t - 1)] = norm * (t as f64 * phi).cos();
                basis[(j, 2 * t)] = norm * (t as f64 * phi).sin();
            }
        }
        let mut blocks = Vec::with_capacity(n_phi);
        for k in 0..n_phi {
            let m = k.div_ceil(2) as f64;
            let mut block = base.clone();
            for i in 0..n_theta {
                block[(i, i)] += m * m * c_bar[i] + sigma * w_bar[i];
            }
            let chol = block.cholesky().ok_or_else(|| {
                Error::InvalidGeometry("preconditioner block not positive definite".into())
            })?;
            blocks.push(chol);
        }
        Ok(PolarPrecond {
            n_theta,
            n_phi,
            basis,
            blocks,
        })
    }
}

impl Preconditioner for PolarPrecond {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let (nt, np) = (self.n_theta, self.n_phi);
        // hat[i][k] = sum_j r[i*np + j] basis[j,k]
        let mut hat = DMatrix::zeros(nt, np);
        for i in 0..nt {
            for k in 0..np {
                let mut s = 0.0;
                for j in 0..np {
                    s += r[i * np + j] * self.basis[(j, k)];
                }
                hat[(i, k)] = s;
            }
        }
        let mut out = DVector::zeros(nt * np);
        for k in 0..np {
            let profile = DVector::from_fn(nt, |i, _| hat[(i, k)]);
            let z = self.blocks[k].solve(&profile);
            for i in 0..nt {
                hat[(i, k)] = z[i];
            }
        }
        for i in 0..nt {
            for j in 0..np {
                let mut s = 0.0;
                for k in 0..np {
                    s += hat[(i, k)] * self.basis[(j, k)];
                }
                out[i * np + j] = s;
            }
        }
        out
    }
}

/// Constant-coefficient double-Fourier diagonal preconditioner for tori.
pub struct BiPeriodicPrecond {
    n_u: usize,
    n_v: usize,
    basis_u: DMatrix<f64>,
    basis_v: DMatrix<f64>,
    /// Symbol value per (mode_u, mode_v).
    inv_symbol: DMatrix<f64>,
}

impl BiPeriodicPrecond {
    pub fn build(
        n_u: usize,
        n_v: usize,
        a: &DVector<f64>,
        c: &DVector<f64>,
        w: &DVector<f64>,
        sigma: f64,
    ) -> Self {
        let mean = |f: &DVector<f64>| f.iter().sum::<f64>() / f.len() as f64;
        let (am, cm, wm) = (mean(a), mean(c), mean(w));
        let mk_basis = |n: usize| {
            let mut b = DMatrix::zeros(n, n);
            let norm0 = (1.0 / n as f64).sqrt();
            let norm = (2.0 / n as f64).sqrt();
            for j in 0..n {
                b[(j, 0)] = norm0;
            }
            for t in 1..=(n - 1) / 2 {
                for j in 0..n {
                    let x = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                    b[(j, 2 * t - 1)] = norm * (t as f64 * x).cos();
                    b[(j, 2 * t)] = norm * (t as f64 * x).sin();
                }
            }
            b
        };
        let mut inv_symbol = DMatrix::zeros(n_u, n_v);
        for ku in 0..n_u {
            let mu = ku.div_ceil(2) as f64;
            for kv in 0..n_v {
                let mv = kv.div_ceil(2) as f64;
                inv_symbol[(ku, kv)] = 1.0 / (am * mu * mu + cm * mv * mv + sigma * wm);
            }
        }
        BiPeriodicPrecond {
            n_u,
            n_v,
            basis_u: mk_basis(n_u),
            basis_v: mk_basis(n_v),
            inv_symbol,
        }
    }
}

impl Preconditioner for BiPeriodicPrecond {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let (nu, nv) = (self.n_u, self.n_v);
        let rm = DMatrix::from_fn(nu, nv, |i, j, | r[i * nv + j]);
        let hat = self.basis_u.transpose() * rm * &self.basis_v;
        let scaled = hat.component_mul(&self.inv_symbol);
        let back = &self.basis_u * scaled * self.basis_v.transpose();
        DVector::from_fn(nu * nv, |idx, _| back[(idx / nv, idx % nv)])
    }
}

/// Exact dense factorization for small systems (curve grids).
pub struct DensePrecond {
    chol: Cholesky<f64, Dyn>,
}

impl DensePrecond {
    /// Assembles `op + sigma diag(mass)` column by column and factorizes it.
    pub fn from_shifted(
        op: &dyn crate::linalg::LinearOp,
        mass: &DVector<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let n = op.dim();
        let mut mat = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        let mut col = DVector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            op.apply(&e, &mut col);
            for i in 0..n {
                mat[(i, j)] = col[i];
            }
            mat[(j, j)] += sigma * mass[j];
            e[j] = 0.0;
        }
        // Symmetrize roundoff before factorizing.
        let mat = (&mat + mat.transpose()) * 0.5;
        let chol = mat
            .cholesky()
            .ok_or_else(|| Error::InvalidGeometry("operator not positive definite".into()))?;
        Ok(DensePrecond { chol })
    }
}

impl Preconditioner for DensePrecond {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(r)
    }
}
