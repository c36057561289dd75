//! The closed boundary hypersurface: per-node embedding data, induced metric,
//! second fundamental form, mean curvature, surface differential operators,
//! quadrature and Laplace-Beltrami spectra.
//!
//! Two representations are carried: parametric chart grids (Gauss-Legendre in
//! the polar variable, Fourier in periodic ones) with spectral differentiation,
//! and triangulated meshes (cotangent-weight weak Laplacian, lumped mass) with
//! relaxed tolerances.

pub mod catalog;
pub mod eigen;
pub mod immersion;
pub mod precond;
pub mod trimesh;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LinearOp};
use crate::quadrature::{barycentric_diff_matrix, fejer1, fourier_diff_matrix};
use crate::spaceform::{AmbientVector, SpaceForm};

/// A scalar field given by its values at the surface nodes, optionally
/// carrying a closed-form Laplacian (eigenfunctions use `Lap eta = -lambda
/// eta`, the same substitution the eigenvalue estimates rest on).
#[derive(Debug, Clone)]
pub struct BoundaryFunction {
    pub values: DVector<f64>,
    pub known_laplacian: Option<DVector<f64>>,
}

impl BoundaryFunction {
    pub fn new(values: DVector<f64>) -> Self {
        BoundaryFunction {
            values,
            known_laplacian: None,
        }
    }

    pub fn with_laplacian(values: DVector<f64>, laplacian: DVector<f64>) -> Self {
        BoundaryFunction {
            values,
            known_laplacian: Some(laplacian),
        }
    }

    pub fn constant(surface: &BoundarySurface, c: f64) -> Self {
        BoundaryFunction {
            values: DVector::from_element(surface.node_count(), c),
            known_laplacian: Some(DVector::zeros(surface.node_count())),
        }
    }

    pub fn norm_l2(&self, surface: &BoundarySurface) -> f64 {
        surface
            .integrate(&self.values.map(|v| v * v))
            .max(0.0)
            .sqrt()
    }
}

/// Structured parametric grids used by the catalog families.
#[derive(Debug, Clone)]
pub enum GridKind {
    /// Closed curve, periodic parameter on [0, 2pi), `n` nodes.
    Curve { n: usize },
    /// Sphere-like chart in (theta, phi): colatitude theta on Chebyshev-Gauss
    /// nodes of (0, pi) with Fejer weights (poles excluded), uniform periodic
    /// phi. Index = i_theta * n_phi + i_phi.
    PolarSphere { n_theta: usize, n_phi: usize },
    /// Torus chart, both directions periodic. Index = i_u * n_v + i_v.
    BiPeriodic { n_u: usize, n_v: usize },
}

/// Differentiation tables for a parametric grid.
#[derive(Debug, Clone)]
pub struct ParamOps {
    pub kind: GridKind,
    d0: DMatrix<f64>,
    d1: Option<DMatrix<f64>>,
    /// Pure parameter-space quadrature weight per node (no metric factor).
    pub cell: Vec<f64>,
    /// Parameter values along direction 0.
    coords0: Vec<f64>,
}

impl ParamOps {
    pub fn curve(n: usize) -> Self {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        ParamOps {
            kind: GridKind::Curve { n },
            d0: fourier_diff_matrix(n),
            d1: None,
            cell: vec![h; n],
            coords0: (0..n).map(|i| h * i as f64).collect(),
        }
    }

    /// Returns the chart tables together with the colatitude nodes.
    pub fn polar_sphere(n_theta: usize, n_phi: usize) -> (Self, Vec<f64>) {
        let (x, w_x) = fejer1(n_theta);
        // theta = pi (x + 1) / 2, ascending in (0, pi).
        let theta: Vec<f64> = x
            .iter()
            .map(|xi| std::f64::consts::PI * (xi + 1.0) / 2.0)
            .collect();
        let d_theta = barycentric_diff_matrix(&theta);
        let h_phi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut cell = vec![0.0; n_theta * n_phi];
        for (i, wi) in w_x.iter().enumerate() {
            for j in 0..n_phi {
                cell[i * n_phi + j] = std::f64::consts::FRAC_PI_2 * wi * h_phi;
            }
        }
        (
            ParamOps {
                kind: GridKind::PolarSphere { n_theta, n_phi },
                d0: d_theta,
                d1: Some(fourier_diff_matrix(n_phi)),
                cell,
                coords0: theta.clone(),
            },
            theta,
        )
    }

    pub fn bi_periodic(n_u: usize, n_v: usize) -> Self {
        let h_u = 2.0 * std::f64::consts::PI / n_u as f64;
        let h_v = 2.0 * std::f64::consts::PI / n_v as f64;
        ParamOps {
            kind: GridKind::BiPeriodic { n_u, n_v },
            d0: fourier_diff_matrix(n_u),
            d1: Some(fourier_diff_matrix(n_v)),
            cell: vec![h_u * h_v; n_u * n_v],
            coords0: (0..n_u).map(|i| h_u * i as f64).collect(),
        }
    }

    pub fn coords0(&self) -> &[f64] {
        &self.coords0
    }

    fn shape(&self) -> (usize, usize) {
        match self.kind {
            GridKind::Curve { n } => (n, 1),
            GridKind::PolarSphere { n_theta, n_phi } => (n_theta, n_phi),
            GridKind::BiPeriodic { n_u, n_v } => (n_u, n_v),
        }
    }

    pub fn d0_matrix(&self) -> &DMatrix<f64> {
        &self.d0
    }

    /// d/d(param 0) applied along grid columns.
    pub fn deriv0(&self, f: &DVector<f64>) -> DVector<f64> {
        let (n0, n1) = self.shape();
        let mut out = DVector::zeros(n0 * n1);
        for j in 0..n1 {
            for i in 0..n0 {
                let mut s = 0.0;
                for k in 0..n0 {
                    s += self.d0[(i, k)] * f[k * n1 + j];
                }
                out[i * n1 + j] = s;
            }
        }
        out
    }

    /// Transpose of `deriv0` (plain Euclidean transpose).
    pub fn deriv0_t(&self, f: &DVector<f64>) -> DVector<f64> {
        let (n0, n1) = self.shape();
        let mut out = DVector::zeros(n0 * n1);
        for j in 0..n1 {
            for i in 0..n0 {
                let mut s = 0.0;
                for k in 0..n0 {
                    s += self.d0[(k, i)] * f[k * n1 + j];
                }
                out[i * n1 + j] = s;
            }
        }
        out
    }

    /// d/d(param 1) applied along grid rows.
    pub fn deriv1(&self, f: &DVector<f64>) -> DVector<f64> {
        let d1 = self.d1.as_ref().expect("grid has a single parameter");
        let (n0, n1) = self.shape();
        let mut out = DVector::zeros(n0 * n1);
        for i in 0..n0 {
            for j in 0..n1 {
                let mut s = 0.0;
                for k in 0..n1 {
                    s += d1[(j, k)] * f[i * n1 + k];
                }
                out[i * n1 + j] = s;
            }
        }
        out
    }

    pub fn deriv1_t(&self, f: &DVector<f64>) -> DVector<f64> {
        let d1 = self.d1.as_ref().expect("grid has a single parameter");
        let (n0, n1) = self.shape();
        let mut out = DVector::zeros(n0 * n1);
        for i in 0..n0 {
            for j in 0..n1 {
                let mut s = 0.0;
                for k in 0..n1 {
                    s += d1[(k, j)] * f[i * n1 + k];
                }
                out[i * n1 + j] = s;
            }
        }
        out
    }
}

/// Triangulated-surface operator tables (built in `trimesh`).
#[derive(Debug, Clone)]
pub struct TriOps {
    pub faces: Vec<[usize; 3]>,
    /// Cotangent-weight stiffness (positive semi-definite weak -Laplacian).
    pub stiffness: CsrMatrix,
    /// Lumped (diagonal) mass = per-vertex area share.
    pub lumped_mass: DVector<f64>,
    /// Per-face gradient solve data is recomputed on the fly from positions.
    pub edge_lengths_ok: bool,
}

#[derive(Debug, Clone)]
pub enum SurfaceRep {
    Parametric(ParamOps),
    Triangulated(TriOps),
}

/// How this surface was built; used for closed-form test-function families
/// and reporting.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceFamily {
    EuclideanBall { r: f64 },
    EuclideanEllipsoid { a: f64, b: f64, c: f64 },
    SphericalCap { k: f64, r0: f64 },
    SphericalTube { k: f64, alpha: f64 },
    HyperbolicBall { k: f64, r0: f64 },
    Curve2d { coeffs: Vec<f64> },
    Mesh,
}

/// A closed (n-1)-dimensional boundary hypersurface with per-node geometry.
#[derive(Debug, Clone)]
pub struct BoundarySurface {
    /// Space form the enclosing domain lives in.
    pub space: SpaceForm,
    /// Intrinsic dimension (n - 1).
    pub dim: usize,
    pub positions: Vec<AmbientVector>,
    /// Chart tangent basis per node (dim vectors).
    pub tangents: Vec<Vec<AmbientVector>>,
    /// Unit outward normal (into the complement of the domain), tangent to
    /// the model for curved ambients.
    pub normals: Vec<AmbientVector>,
    /// Induced metric in the tangent basis.
    pub metric: Vec<DMatrix<f64>>,
    pub metric_inv: Vec<DMatrix<f64>>,
    /// Scalar second fundamental form, convention II(v,w) = <D_v nu, w>.
    pub second_form: Vec<DMatrix<f64>>,
    pub mean_curvature: Vec<f64>,
    /// dsigma quadrature weight per node.
    pub weights: Vec<f64>,
    pub rep: SurfaceRep,
    pub family: SurfaceFamily,
}

impl BoundarySurface {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self.rep, SurfaceRep::Parametric(_))
    }

    /// Tolerance multiplier: triangulated surfaces run with 10x looser
    /// tolerances than parametric ones.
    pub fn tolerance_factor(&self) -> f64 {
        if self.is_parametric() {
            1.0
        } else {
            10.0
        }
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn check_sized(&self, f: &DVector<f64>) -> Result<()> {
        if f.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Integral of a per-node scalar field against dsigma.
    pub fn integrate(&self, g: &DVector<f64>) -> f64 {
        g.iter()
            .zip(self.weights.iter())
            .map(|(gi, wi)| gi * wi)
            .sum()
    }

    pub fn integrate_fn(&self, g: impl Fn(usize) -> f64) -> f64 {
        (0..self.node_count()).map(|p| g(p) * self.weights[p]).sum()
    }

    /// Surface gradient in intrinsic (tangent-basis) components.
    pub fn gradient(&self, f: &BoundaryFunction) -> Result<Vec<DVector<f64>>> {
        self.check_sized(&f.values)?;
        match &self.rep {
            SurfaceRep::Parametric(ops) => {
                let mut partials = vec![ops.deriv0(&f.values)];
                if self.dim == 2 {
                    partials.push(ops.deriv1(&f.values));
                }
                let n = self.node_count();
                let mut out = Vec::with_capacity(n);
                for p in 0..n {
                    let df = DVector::from_fn(self.dim, |i, _| partials[i][p]);
                    out.push(&self.metric_inv[p] * df);
                }
                Ok(out)
            }
            SurfaceRep::Triangulated(_) => trimesh::gradient(self, &f.values),
        }
    }

    /// Pushforward of the intrinsic gradient into ambient coordinates.
    pub fn gradient_ambient(&self, f: &BoundaryFunction) -> Result<Vec<AmbientVector>> {
        let comps = self.gradient(f)?;
        Ok(self.push_forward(&comps))
    }

    pub fn push_forward(&self, comps: &[DVector<f64>]) -> Vec<AmbientVector> {
        (0..self.node_count())
            .map(|p| {
                let mut v = DVector::zeros(self.positions[p].len());
                for i in 0..self.dim {
                    v += &self.tangents[p][i] * comps[p][i];
                }
                v
            })
            .collect()
    }

    /// Laplace-Beltrami operator with the negative-spectrum convention
    /// (`Lap x_i = -(n-1) x_i` on the unit sphere). A field carrying its
    /// closed-form Laplacian short-circuits the discrete operator.
    pub fn laplacian(&self, f: &BoundaryFunction) -> Result<DVector<f64>> {
        self.check_sized(&f.values)?;
        if let Some(known) = &f.known_laplacian {
            self.check_sized(known)?;
            return Ok(known.clone());
        }
        match &self.rep {
            SurfaceRep::Parametric(ops) => {
                let n = self.node_count();
                let f0 = ops.deriv0(&f.values);
                let f1 = if self.dim == 2 {
                    Some(ops.deriv1(&f.values))
                } else {
                    None
                };
                let sqrt_det: Vec<f64> = (0..n)
                    .map(|p| self.metric[p].determinant().max(0.0).sqrt())
                    .collect();
                let mut flux0 = DVector::zeros(n);
                let mut flux1 = DVector::zeros(n);
                for p in 0..n {
                    let gi = &self.metric_inv[p];
                    let d0 = f0[p];
                    let d1 = f1.as_ref().map(|v| v[p]).unwrap_or(0.0);
                    flux0[p] = sqrt_det[p] * (gi[(0, 0)] * d0 + if self.dim == 2 { gi[(0, 1)] * d1 } else { 0.0 });
                    if self.dim == 2 {
                        flux1[p] = sqrt_det[p] * (gi[(1, 0)] * d0 + gi[(1, 1)] * d1);
                    }
                }
                let div0 = ops.deriv0(&flux0);
                let div1 = if self.dim == 2 {
                    Some(ops.deriv1(&flux1))
                } else {
                    None
                };
                let mut out = DVector::zeros(n);
                for p in 0..n {
                    let d = div0[p] + div1.as_ref().map(|v| v[p]).unwrap_or(0.0);
                    out[p] = d / sqrt_det[p];
                }
                Ok(out)
            }
            SurfaceRep::Triangulated(ops) => {
                let mut lf = DVector::zeros(self.node_count());
                ops.stiffness.apply(&f.values, &mut lf);
                Ok(DVector::from_fn(self.node_count(), |i, _| {
                    -lf[i] / ops.lumped_mass[i]
                }))
            }
        }
    }

    /// Chart partial derivatives of a per-node ambient-vector field, one
    /// derivative field per chart direction (componentwise differentiation;
    /// on triangulated surfaces, directional derivatives along the
    /// orthonormal tangent basis).
    pub fn field_chart_derivatives(
        &self,
        field: &[AmbientVector],
    ) -> Result<Vec<Vec<AmbientVector>>> {
        if field.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: field.len(),
            });
        }
        let n = self.node_count();
        let coord_dim = field[0].len();
        let mut out = vec![vec![DVector::zeros(coord_dim); n]; self.dim];
        match &self.rep {
            SurfaceRep::Parametric(ops) => {
                for c in 0..coord_dim {
                    let comp = DVector::from_fn(n, |p, _| field[p][c]);
                    let d0 = ops.deriv0(&comp);
                    for p in 0..n {
                        out[0][p][c] = d0[p];
                    }
                    if self.dim == 2 {
                        let d1 = ops.deriv1(&comp);
                        for p in 0..n {
                            out[1][p][c] = d1[p];
                        }
                    }
                }
            }
            SurfaceRep::Triangulated(_) => {
                for c in 0..coord_dim {
                    let comp = BoundaryFunction::new(DVector::from_fn(n, |p, _| field[p][c]));
                    let grads = self.gradient(&comp)?;
                    for p in 0..n {
                        for i in 0..self.dim {
                            // Orthonormal vertex basis: component = covariant
                            // directional derivative.
                            out[i][p][c] = grads[p][i];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// II applied to two intrinsic tangent vectors at node `p`.
    pub fn ii_quadratic(&self, p: usize, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let ii = &self.second_form[p];
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += ii[(i, j)] * v[i] * w[j];
            }
        }
        s
    }

    /// Metric inner product of intrinsic vectors at node `p`.
    pub fn metric_inner(&self, p: usize, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let g = &self.metric[p];
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += g[(i, j)] * v[i] * w[j];
            }
        }
        s
    }

    /// Internal consistency: gamma SPD, positive weights, trace_gamma(II) = H.
    pub fn validate(&self) -> Result<()> {
        for p in 0..self.node_count() {
            if self.weights[p] <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "non-positive quadrature weight at node {p}"
                )));
            }
            let det = self.metric[p].determinant();
            if det <= 0.0 || self.metric[p][(0, 0)] <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "induced metric not positive definite at node {p}"
                )));
            }
            let tr = (&self.metric_inv[p] * &self.second_form[p]).trace();
            if (tr - self.mean_curvature[p]).abs() > 1e-10 * (1.0 + self.mean_curvature[p].abs()) {
                return Err(Error::InvalidGeometry(format!(
                    "trace of II ({tr}) disagrees with stored H ({}) at node {p}",
                    self.mean_curvature[p]
                )));
            }
        }
        Ok(())
    }

    /// Stiffness/mass pair of the Laplace-Beltrami weak form, as operators.
    pub fn weak_pair(&self) -> (Box<dyn LinearOp + '_>, DVector<f64>) {
        match &self.rep {
            SurfaceRep::Parametric(ops) => {
                let n = self.node_count();
                let mut a = DVector::zeros(n);
                let mut b = DVector::zeros(n);
                let mut c = DVector::zeros(n);
                for p in 0..n {
                    let gi = &self.metric_inv[p];
                    a[p] = self.weights[p] * gi[(0, 0)];
                    if self.dim == 2 {
                        b[p] = self.weights[p] * gi[(0, 1)];
                        c[p] = self.weights[p] * gi[(1, 1)];
                    }
                }
                (
                    Box::new(ParametricStiffness {
                        ops,
                        a,
                        b,
                        c,
                        two_d: self.dim == 2,
                    }),
                    DVector::from_vec(self.weights.clone()),
                )
            }
            SurfaceRep::Triangulated(ops) => (
                Box::new(ops.stiffness.clone()),
                ops.lumped_mass.clone(),
            ),
        }
    }

    /// Weak pair plus a grid-structured preconditioner for `S + sigma M`.
    pub fn weak_system(
        &self,
        sigma: f64,
    ) -> crate::error::Result<(
        Box<dyn LinearOp + '_>,
        DVector<f64>,
        Box<dyn crate::linalg::Preconditioner>,
    )> {
        let (stiff, mass) = self.weak_pair();
        let pc: Box<dyn crate::linalg::Preconditioner> = match &self.rep {
            SurfaceRep::Parametric(ops) => match ops.kind {
                GridKind::PolarSphere { n_theta, n_phi } => {
                    let n = self.node_count();
                    let mut a = DVector::zeros(n);
                    let mut c = DVector::zeros(n);
                    for p in 0..n {
                        let gi = &self.metric_inv[p];
                        a[p] = self.weights[p] * gi[(0, 0)];
                        c[p] = self.weights[p] * gi[(1, 1)];
                    }
                    let w = DVector::from_vec(self.weights.clone());
                    Box::new(precond::PolarPrecond::build(
                        ops, n_theta, n_phi, &a, &c, &w, sigma,
                    )?)
                }
                GridKind::BiPeriodic { n_u, n_v } => {
                    let n = self.node_count();
                    let mut a = DVector::zeros(n);
                    let mut c = DVector::zeros(n);
                    for p in 0..n {
                        let gi = &self.metric_inv[p];
                        a[p] = self.weights[p] * gi[(0, 0)];
                        c[p] = self.weights[p] * gi[(1, 1)];
                    }
                    let w = DVector::from_vec(self.weights.clone());
                    Box::new(precond::BiPeriodicPrecond::build(n_u, n_v, &a, &c, &w, sigma))
                }
                GridKind::Curve { .. } => Box::new(precond::DensePrecond::from_shifted(
                    stiff.as_ref(),
                    &mass,
                    sigma,
                )?),
            },
            SurfaceRep::Triangulated(_) => {
                let mut d = stiff.diagonal();
                d.axpy(sigma, &mass, 1.0);
                Box::new(crate::linalg::JacobiPrecond::new(&d))
            }
        };
        Ok((stiff, mass, pc))
    }
}

/// Matrix-free weak Laplacian for parametric grids.
pub struct ParametricStiffness<'a> {
    ops: &'a ParamOps,
    a: DVector<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    two_d: bool,
}

impl LinearOp for ParametricStiffness<'_> {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let f0 = self.ops.deriv0(x);
        if self.two_d {
            let f1 = self.ops.deriv1(x);
            let g0 = DVector::from_fn(x.len(), |p, _| self.a[p] * f0[p] + self.b[p] * f1[p]);
            let g1 = DVector::from_fn(x.len(), |p, _| self.b[p] * f0[p] + self.c[p] * f1[p]);
            let out = self.ops.deriv0_t(&g0) + self.ops.deriv1_t(&g1);
            y.copy_from(&out);
        } else {
            let g0 = DVector::from_fn(x.len(), |p, _| self.a[p] * f0[p]);
            y.copy_from(&self.ops.deriv0_t(&g0));
        }
    }

    fn diagonal(&self) -> DVector<f64> {
        // diag(D0' A D0 + ... ) computed exactly; cheap relative to solves.
        let n = self.a.len();
        let (n0, n1) = self.ops.shape();
        let mut d = DVector::zeros(n);
        for j in 0..n1 {
            for i in 0..n0 {
                let mut s = 0.0;
                for k in 0..n0 {
                    let coef = self.ops.d0[(k, i)];
                    s += coef * coef * self.a[k * n1 + j];
                }
                d[i * n1 + j] += s;
            }
        }
        if self.two_d {
            let d1 = self.ops.d1.as_ref().unwrap();
            for i in 0..n0 {
                for j in 0..n1 {
                    let mut s = 0.0;
                    for k in 0..n1 {
                        let coef = d1[(k, j)];
                        s += coef * coef * self.c[i * n1 + k];
                    }
                    d[i * n1 + j] += s;
                }
            }
        }
        d
    }
}
