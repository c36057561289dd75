//! Laplace-Beltrami spectra from the weak form: stiffness/mass pair solved as
//! a symmetric generalized eigenproblem (shift-inverted Lanczos).

use nalgebra::DVector;

use super::{BoundaryFunction, BoundarySurface, GridKind, SurfaceRep};
use crate::error::{Error, Result};
use crate::linalg::{smallest_eigenpairs, DiagonalOp, LinearOp, Preconditioner};


/// Fixed Lanczos start seed keeps reports byte-reproducible.
const EIGEN_SEED: u64 = 0x5eed_0001;

/// First `count` eigenpairs of minus the surface Laplacian, ascending
/// (eigenvalue 0 with the constant eigenfunction first). Eigenfunctions are
/// orthonormal in the d-sigma inner product.
///
/// On polar charts the raw weak eigenvectors carry high-azimuthal-wavenumber
/// junk near the poles that the d-sigma norm barely weights; a triangular
/// truncation (keep |m| up to ~ n sin(theta)) removes it, then the batch is
/// re-orthonormalized and the eigenvalues refreshed from Rayleigh quotients.
pub fn eigen_decomposition(
    s: &BoundarySurface,
    count: usize,
) -> Result<Vec<(f64, BoundaryFunction)>> {
    let n = s.node_count();
    if count == 0 || count + 2 > n {
        return Err(Error::InvalidInput(format!(
            "eigenpair count {count} exceeds the discretization rank ({n} nodes)"
        )));
    }
    if let SurfaceRep::Parametric(ops) = &s.rep {
        if let GridKind::PolarSphere { n_theta, n_phi } = ops.kind {
            return polar_galerkin_eigs(s, n_theta, n_phi, count);
        }
    }
    let sigma = eigen_shift(s);
    let (stiffness, mass, pc) = s.weak_system(sigma)?;
    let mass_op = DiagonalOp(mass.clone());
    let (vals, vecs) = smallest_eigenpairs(
        stiffness.as_ref(),
        &mass_op,
        count,
        sigma,
        EIGEN_SEED,
        Some(pc.as_ref()),
    )?;
    Ok(vals
        .into_iter()
        .zip(vecs)
        .map(|(l, v)| {
            let l = if l.abs() < 1e-9 { l.max(0.0) } else { l };
            let lap = &v * (-l);
            (l, BoundaryFunction::with_laplacian(v, lap))
        })
        .collect())
}

/// Positive spectral shift on the order of the first nonzero eigenvalue.
fn eigen_shift(s: &BoundarySurface) -> f64 {
    let area = s.area();
    let d = s.dim as f64;
    let scale = area.powf(2.0 / d);
    (2.0 * std::f64::consts::PI.powi(2) / scale).clamp(1e-3, 1e6)
}

/// Smooth triangular basis on polar charts: mode-m profiles
/// `sin^m(theta) cos(k theta)`, k < n_theta - m, times cos/sin(m phi).
/// Functions smooth on the chart live exactly in this span, so Galerkin
/// eigenpairs computed here are free of the pole junk the raw grid space
/// admits.
struct PolarBasis {
    n_theta: usize,
    n_phi: usize,
    m_max: usize,
    /// Orthonormalized theta profiles per mode.
    theta_mats: Vec<nalgebra::DMatrix<f64>>,
    /// Coefficient offset of the cos block per mode (sin block follows).
    offsets: Vec<usize>,
    total: usize,
    cos_tab: nalgebra::DMatrix<f64>,
    sin_tab: nalgebra::DMatrix<f64>,
}

impl PolarBasis {
    fn build(theta: &[f64], row_mass: &[f64], n_phi: usize) -> PolarBasis {
        let n_theta = theta.len();
        // A trig profile cos(k theta) is only exactly handled by polynomial
        // differentiation on n_theta Chebyshev nodes when its Chebyshev
        // coefficients (Bessel tail ~ J_j(k pi/2)) have decayed by degree
        // n_theta; cap the harmonic bandwidth accordingly.
        let mut l_max = 1usize;
        for l in 1..n_theta {
            let z = l as f64 * std::f64::consts::FRAC_PI_2;
            if z + 3.0 * z.cbrt() <= (n_theta as f64) - 2.0 {
                l_max = l;
            }
        }
        let m_max = l_max.min((n_phi - 1) / 2);
        let mut theta_mats = Vec::with_capacity(m_max + 1);
        let mut offsets = Vec::with_capacity(m_max + 1);
        let mut total = 0usize;
        for m in 0..=m_max {
            let k_m = l_max + 1 - m;
            let mut raw = nalgebra::DMatrix::zeros(n_theta, k_m);
            for i in 0..n_theta {
                let smt = theta[i].sin().powi(m as i32);
                for k in 0..k_m {
                    raw[(i, k)] = smt * (k as f64 * theta[i]).cos();
                }
            }
            // Symmetric orthonormalization against the row mass; drop
            // numerically dependent directions (large m).
            let mut gram = nalgebra::DMatrix::zeros(k_m, k_m);
            for a in 0..k_m {
                for b in a..k_m {
                    let mut sum = 0.0;
                    for i in 0..n_theta {
                        sum += row_mass[i] * raw[(i, a)] * raw[(i, b)];
                    }
                    gram[(a, b)] = sum;
                    gram[(b, a)] = sum;
                }
            }
            let eig = gram.symmetric_eigen();
            let gmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            let mut cols: Vec<nalgebra::DVector<f64>> = Vec::new();
            for (idx, ev) in eig.eigenvalues.iter().enumerate() {
                if *ev > 1e-13 * gmax {
                    let u = eig.eigenvectors.column(idx) / ev.sqrt();
                    cols.push(&raw * u);
                }
            }
            let k_eff = cols.len();
            let mut mat = nalgebra::DMatrix::zeros(n_theta, k_eff);
            for (c, col) in cols.iter().enumerate() {
                mat.set_column(c, col);
            }
            theta_mats.push(mat);
            offsets.push(total);
            total += if m == 0 { k_eff } else { 2 * k_eff };
        }
        let mut cos_tab = nalgebra::DMatrix::zeros(n_phi, m_max + 1);
        let mut sin_tab = nalgebra::DMatrix::zeros(n_phi, m_max + 1);
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            for m in 0..=m_max {
                cos_tab[(j, m)] = (m as f64 * phi).cos();
                sin_tab[(j, m)] = (m as f64 * phi).sin();
            }
        }
        PolarBasis {
            n_theta,
            n_phi,
            m_max,
            theta_mats,
            offsets,
            total,
            cos_tab,
            sin_tab,
        }
    }

    fn k_eff(&self, m: usize) -> usize {
        self.theta_mats[m].ncols()
    }

    /// Coefficients to grid field.
    fn synth(&self, c: &DVector<f64>) -> DVector<f64> {
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut prof_cos = nalgebra::DMatrix::zeros(nt, self.m_max + 1);
        let mut prof_sin = nalgebra::DMatrix::zeros(nt, self.m_max + 1);
        for m in 0..=self.m_max {
            let k = self.k_eff(m);
            let off = self.offsets[m];
            let cc = DVector::from_fn(k, |i, _| c[off + i]);
            prof_cos.set_column(m, &(&self.theta_mats[m] * &cc));
            if m > 0 {
                let cs = DVector::from_fn(k, |i, _| c[off + k + i]);
                prof_sin.set_column(m, &(&self.theta_mats[m] * &cs));
            }
        }
        let mut out = DVector::zeros(nt * np);
        for i in 0..nt {
            for j in 0..np {
                let mut val = 0.0;
                for m in 0..=self.m_max {
                    val += prof_cos[(i, m)] * self.cos_tab[(j, m)]
                        + prof_sin[(i, m)] * self.sin_tab[(j, m)];
                }
                out[i * np + j] = val;
            }
        }
        out
    }

    /// Plain transpose of `synth`.
    fn adjoint(&self, f: &DVector<f64>) -> DVector<f64> {
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut out = DVector::zeros(self.total);
        let mut prof = DVector::zeros(nt);
        for m in 0..=self.m_max {
            let k = self.k_eff(m);
            let off = self.offsets[m];
            for i in 0..nt {
                let mut s = 0.0;
                for j in 0..np {
                    s += f[i * np + j] * self.cos_tab[(j, m)];
                }
                prof[i] = s;
            }
            let coef = self.theta_mats[m].transpose() * &prof;
            for i in 0..k {
                out[off + i] = coef[i];
            }
            if m > 0 {
                for i in 0..nt {
                    let mut s = 0.0;
                    for j in 0..np {
                        s += f[i * np + j] * self.sin_tab[(j, m)];
                    }
                    prof[i] = s;
                }
                let coef = self.theta_mats[m].transpose() * &prof;
                for i in 0..k {
                    out[off + k + i] = coef[i];
                }
            }
        }
        out
    }
}

/// Grid operator conjugated into the smooth-basis coefficient space.
struct ProjectedOp<'a> {
    basis: &'a PolarBasis,
    inner: &'a dyn LinearOp,
}

impl LinearOp for ProjectedOp<'_> {
    fn dim(&self) -> usize {
        self.basis.total
    }
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let g = self.basis.synth(x);
        let mut sg = DVector::zeros(g.len());
        self.inner.apply(&g, &mut sg);
        y.copy_from(&self.basis.adjoint(&sg));
    }
    fn diagonal(&self) -> DVector<f64> {
        // Never used: a block preconditioner is always supplied.
        DVector::from_element(self.basis.total, 1.0)
    }
}

/// Per-mode Cholesky blocks of the projected shifted operator; exact for
/// surfaces of revolution, a strong preconditioner otherwise.
struct PolarBlockPrecond {
    offsets: Vec<usize>,
    k_eff: Vec<usize>,
    blocks: Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    total: usize,
}

impl Preconditioner for PolarBlockPrecond {
    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(self.total);
        for (m, block) in self.blocks.iter().enumerate() {
            let k = self.k_eff[m];
            let off = self.offsets[m];
            let rc = DVector::from_fn(k, |i, _| r[off + i]);
            let zc = block.solve(&rc);
            for i in 0..k {
                z[off + i] = zc[i];
            }
            if m > 0 {
                let rs = DVector::from_fn(k, |i, _| r[off + k + i]);
                let zs = block.solve(&rs);
                for i in 0..k {
                    z[off + k + i] = zs[i];
                }
            }
        }
        z
    }
}

fn polar_galerkin_eigs(
    s: &BoundarySurface,
    n_theta: usize,
    n_phi: usize,
    count: usize,
) -> Result<Vec<(f64, BoundaryFunction)>> {
    let SurfaceRep::Parametric(ops) = &s.rep else {
        unreachable!()
    };
    let theta = ops.coords0().to_vec();
    let row_mass: Vec<f64> = (0..n_theta)
        .map(|i| (0..n_phi).map(|j| s.weights[i * n_phi + j]).sum())
        .collect();
    let basis = PolarBasis::build(&theta, &row_mass, n_phi);
    if count + 2 > basis.total {
        return Err(Error::InvalidInput(format!(
            "eigenpair count {count} exceeds the smooth-space rank {}",
            basis.total
        )));
    }
    let sigma = eigen_shift(s);
    let (stiffness, mass) = s.weak_pair();
    let mass_diag = DiagonalOp(mass.clone());
    let s_proj = ProjectedOp {
        basis: &basis,
        inner: stiffness.as_ref(),
    };
    let m_proj = ProjectedOp {
        basis: &basis,
        inner: &mass_diag,
    };
    // phi-averaged coefficient fields for the per-mode theta operator.
    let avg = |f: &dyn Fn(usize) -> f64| -> DVector<f64> {
        DVector::from_fn(n_theta, |i, _| {
            (0..n_phi).map(|j| f(i * n_phi + j)).sum::<f64>() / n_phi as f64
        })
    };
    let a_bar = avg(&|p| s.weights[p] * s.metric_inv[p][(0, 0)]);
    let c_bar = avg(&|p| s.weights[p] * s.metric_inv[p][(1, 1)]);
    let w_bar = avg(&|p| s.weights[p]);
    let d0 = ops.d0_matrix();
    let base = d0.transpose() * nalgebra::DMatrix::from_diagonal(&a_bar) * d0;
    let mut blocks = Vec::with_capacity(basis.m_max + 1);
    let mut k_eff = Vec::with_capacity(basis.m_max + 1);
    for m in 0..=basis.m_max {
        let fphi = if m == 0 {
            n_phi as f64
        } else {
            n_phi as f64 / 2.0
        };
        let mf = m as f64;
        let mut a_m = base.clone();
        for i in 0..n_theta {
            a_m[(i, i)] += mf * mf * c_bar[i] + sigma * w_bar[i];
        }
        let theta_mat = &basis.theta_mats[m];
        let small = theta_mat.transpose() * &a_m * theta_mat * fphi;
        let small = (&small + small.transpose()) * 0.5;
        let chol = small.cholesky().ok_or_else(|| {
            Error::InvalidGeometry("projected block not positive definite".into())
        })?;
        blocks.push(chol);
        k_eff.push(theta_mat.ncols());
    }
    let pc = PolarBlockPrecond {
        offsets: basis.offsets.clone(),
        k_eff,
        blocks,
        total: basis.total,
    };
    let (vals, vecs) =
        smallest_eigenpairs(&s_proj, &m_proj, count, sigma, EIGEN_SEED, Some(&pc))?;
    Ok(vals
        .into_iter()
        .zip(vecs)
        .map(|(l, c)| {
            let l = if l.abs() < 1e-9 { l.max(0.0) } else { l };
            let v = basis.synth(&c);
            let lap = &v * (-l);
            (l, BoundaryFunction::with_laplacian(v, lap))
        })
        .collect())
}

/// L2 norm of the strong-form residual `Lap phi + lambda phi`.
pub fn eigen_residual(s: &BoundarySurface, lambda: f64, phi: &BoundaryFunction) -> Result<f64> {
    // Strip any closed-form Laplacian: the residual must exercise the
    // independent discrete operator.
    let raw = BoundaryFunction::new(phi.values.clone());
    let lap = s.laplacian(&raw)?;
    let r = DVector::from_fn(s.node_count(), |p, _| lap[p] + lambda * phi.values[p]);
    Ok(s.integrate(&r.map(|v| v * v)).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::catalog::build_catalog_surface;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_sphere_spectrum() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 32, 3).unwrap();
        let pairs = eigen_decomposition(&s, 9).unwrap();
        let expect = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
        for (i, (l, _)) in pairs.iter().enumerate() {
            assert_abs_diff_eq!(*l, expect[i], epsilon = 1e-8);
        }
        // Constant first eigenfunction.
        let f0 = &pairs[0].1.values;
        let spread = f0.max() - f0.min();
        assert!(spread.abs() < 1e-7, "first eigenfunction spread {spread}");
        // d-sigma orthonormality.
        for i in 0..pairs.len() {
            for j in 0..pairs.len() {
                let prod = s.integrate(&DVector::from_fn(s.node_count(), |p, _| {
                    pairs[i].1.values[p] * pairs[j].1.values[p]
                }));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod, expect, epsilon = 1e-8);
            }
        }
        // Strong-form residual of the first modes.
        for (l, phi) in pairs.iter().skip(1) {
            let r = eigen_residual(&s, *l, phi).unwrap();
            assert!(r <= 1e-4 * l, "residual {r} for lambda {l}");
        }
    }

    #[test]
    fn scaled_sphere_spectrum() {
        // Sphere of radius sin(r0): first nonzero eigenvalue 2 / sin^2(r0).
        let r0: f64 = 0.8;
        let (s, _) = build_catalog_surface("euclidean_ball", &[r0.sin()], 20, 3).unwrap();
        let pairs = eigen_decomposition(&s, 2).unwrap();
        assert_abs_diff_eq!(pairs[1].0, 2.0 / (r0.sin() * r0.sin()), epsilon = 1e-4);
    }

    #[test]
    fn circle_spectrum() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 16, 2).unwrap();
        let pairs = eigen_decomposition(&s, 5).unwrap();
        let expect = [0.0, 1.0, 1.0, 4.0, 4.0];
        for (i, (l, _)) in pairs.iter().enumerate() {
            assert_abs_diff_eq!(*l, expect[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn count_exceeding_rank_errors() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 8, 2).unwrap();
        assert!(eigen_decomposition(&s, s.node_count()).is_err());
    }
}
