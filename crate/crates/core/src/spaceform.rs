//! The three model ambients (Euclidean space, round sphere, hyperboloid) with
//! their bilinear forms, support functions and tangent/normal projections.
//!
//! The sphere `S^m_k` is realized as the radius `1/sqrt(k)` sphere centered at
//! the origin of `R^{m+1}`; hyperbolic space `H^m_{-k}` as the upper sheet of
//! `<x,x> = -1/k` in Minkowski space `R^{m,1}` with the first coordinate
//! timelike.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point or vector in model coordinates.
pub type AmbientVector = DVector<f64>;

/// Relative tolerance for accepting a point as lying on the model quadric.
pub const ON_MODEL_TOL: f64 = 1e-12;

/// Gram condition number above which a tangent basis is rejected.
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// Central-difference step used for geodesic Hessian evaluation.
const HESSIAN_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceFormKind {
    Euclidean,
    Spherical,
    Hyperbolic,
}

/// An ambient model space of constant curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceForm {
    pub kind: SpaceFormKind,
    /// Signed curvature constant: 0, +k or -k with k > 0.
    pub curvature: f64,
    /// Manifold dimension m (coordinate dimension is m for Euclidean space,
    /// m+1 for the curved models).
    pub ambient_dim: usize,
}

impl SpaceForm {
    pub fn euclidean(m: usize) -> Self {
        SpaceForm {
            kind: SpaceFormKind::Euclidean,
            curvature: 0.0,
            ambient_dim: m,
        }
    }

    pub fn spherical(m: usize, k: f64) -> Result<Self> {
        if k <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "spherical space form requires curvature > 0, got {k}"
            )));
        }
        Ok(SpaceForm {
            kind: SpaceFormKind::Spherical,
            curvature: k,
            ambient_dim: m,
        })
    }

    pub fn hyperbolic(m: usize, k: f64) -> Result<Self> {
        if k <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "hyperbolic space form requires k > 0 (curvature -k), got {k}"
            )));
        }
        Ok(SpaceForm {
            kind: SpaceFormKind::Hyperbolic,
            curvature: -k,
            ambient_dim: m,
        })
    }

    /// Number of coordinates carried by points of this model.
    pub fn coord_dim(&self) -> usize {
        match self.kind {
            SpaceFormKind::Euclidean => self.ambient_dim,
            _ => self.ambient_dim + 1,
        }
    }

    fn check_dim(&self, v: &AmbientVector) -> Result<()> {
        if v.len() != self.coord_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.coord_dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// The ambient bilinear form: Euclidean dot product for the flat and
    /// spherical models, the Lorentzian product `-u0 v0 + sum u_i v_i` for the
    /// hyperboloid.
    pub fn inner(&self, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
        self.check_dim(u)?;
        self.check_dim(v)?;
        let mut s = 0.0;
        for i in 0..u.len() {
            s += u[i] * v[i];
        }
        if self.kind == SpaceFormKind::Hyperbolic {
            s -= 2.0 * u[0] * v[0];
        }
        Ok(s)
    }

    pub fn norm_sq(&self, v: &AmbientVector) -> Result<f64> {
        self.inner(v, v)
    }

    /// Quadric value the model points must satisfy: `1/k` for the sphere,
    /// `-1/k` for the hyperboloid.
    pub fn quadric_value(&self) -> Option<f64> {
        match self.kind {
            SpaceFormKind::Euclidean => None,
            SpaceFormKind::Spherical => Some(1.0 / self.curvature),
            SpaceFormKind::Hyperbolic => Some(1.0 / self.curvature),
        }
    }

    /// Checks that `x` lies on the model to relative tolerance `ON_MODEL_TOL`
    /// (every point is "on" Euclidean space).
    pub fn on_model(&self, x: &AmbientVector) -> Result<()> {
        self.check_dim(x)?;
        let Some(q) = self.quadric_value() else {
            return Ok(());
        };
        let val = self.inner(x, x)?;
        if (val - q).abs() > ON_MODEL_TOL.max(ON_MODEL_TOL * q.abs()) * 1e1 {
            return Err(Error::InvalidInput(format!(
                "point off the model quadric: <x,x> = {val}, expected {q}"
            )));
        }
        if self.kind == SpaceFormKind::Hyperbolic && x[0] <= 0.0 {
            return Err(Error::InvalidInput(
                "hyperboloid point must have x0 > 0".into(),
            ));
        }
        Ok(())
    }

    /// Projects a coordinate point onto the model quadric (used when building
    /// catalog geometry, where roundoff may leave points slightly off).
    pub fn normalize_to_model(&self, x: &AmbientVector) -> Result<AmbientVector> {
        self.check_dim(x)?;
        match self.kind {
            SpaceFormKind::Euclidean => Ok(x.clone()),
            SpaceFormKind::Spherical => {
                let n = self.inner(x, x)?;
                if n <= 0.0 {
                    return Err(Error::InvalidInput("cannot project zero vector".into()));
                }
                Ok(x * (1.0 / (self.curvature * n).sqrt()))
            }
            SpaceFormKind::Hyperbolic => {
                let n = -self.inner(x, x)?;
                if n <= 0.0 || x[0] <= 0.0 {
                    return Err(Error::InvalidInput(
                        "cannot project onto the upper hyperboloid sheet".into(),
                    ));
                }
                Ok(x * (1.0 / (-self.curvature * n).sqrt()))
            }
        }
    }

    /// Requires `v` tangent to the model at `x` (trivial for Euclidean).
    pub fn check_tangent(&self, x: &AmbientVector, v: &AmbientVector, tol: f64) -> Result<()> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        if self.kind == SpaceFormKind::Euclidean {
            return Ok(());
        }
        let ip = self.inner(x, v)?;
        let scale = (self.inner(x, x)?.abs().sqrt()) * (self.inner(v, v)?.abs().sqrt()).max(1.0);
        if ip.abs() > tol * scale.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "vector not tangent to the model: <x,v> = {ip}"
            )));
        }
        Ok(())
    }

    /// The geodesic through `x` with initial velocity `v`, evaluated at
    /// parameter `s`. `v` must be tangent at `x`.
    pub fn geodesic(&self, x: &AmbientVector, v: &AmbientVector, s: f64) -> Result<AmbientVector> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        match self.kind {
            SpaceFormKind::Euclidean => Ok(x + v * s),
            SpaceFormKind::Spherical => {
                let k = self.curvature;
                let speed = self.inner(v, v)?.max(0.0).sqrt();
                if speed == 0.0 {
                    return Ok(x.clone());
                }
                let a = k.sqrt() * speed * s;
                Ok(x * a.cos() + v * (a.sin() / (k.sqrt() * speed)))
            }
            SpaceFormKind::Hyperbolic => {
                let k = -self.curvature;
                let speed = self.inner(v, v)?.max(0.0).sqrt();
                if speed == 0.0 {
                    return Ok(x.clone());
                }
                let a = k.sqrt() * speed * s;
                Ok(x * a.cosh() + v * (a.sinh() / (k.sqrt() * speed)))
            }
        }
    }
}

/// Restriction of the linear functional `<alpha, .>` to the model.
#[derive(Debug, Clone)]
pub struct SupportFunction {
    pub alpha: AmbientVector,
    pub space: SpaceForm,
}

impl SupportFunction {
    /// For the curved models `alpha` must lie on the quadric.
    pub fn new(space: SpaceForm, alpha: AmbientVector) -> Result<Self> {
        space.on_model(&alpha)?;
        Ok(SupportFunction { alpha, space })
    }

    /// F(x) = <alpha, x>.
    pub fn eval(&self, x: &AmbientVector) -> Result<f64> {
        self.space.on_model(x)?;
        self.space.inner(&self.alpha, x)
    }

    /// Intrinsic gradient of F on the model at `x`: the tangential part of the
    /// constant ambient gradient. Spherical: `alpha - k<alpha,x> x`;
    /// hyperbolic: `alpha + k<alpha,x> x` (with k = |curvature|).
    pub fn gradient(&self, x: &AmbientVector) -> Result<AmbientVector> {
        self.space.on_model(x)?;
        let f = self.space.inner(&self.alpha, x)?;
        match self.space.kind {
            SpaceFormKind::Euclidean => Ok(self.alpha.clone()),
            SpaceFormKind::Spherical => Ok(&self.alpha - x * (self.space.curvature * f)),
            SpaceFormKind::Hyperbolic => Ok(&self.alpha + x * (-self.space.curvature * f)),
        }
    }

    /// Residual of the model Hessian identity at `x` in directions `v`, `w`:
    /// `Hess F(v,w) + sigma |k| F <v,w>` with sigma = +1 (sphere), -1
    /// (hyperboloid), 0 (flat); at unit curvature this is `Hess F + sigma F g`.
    /// Evaluated by central differences along model geodesics; exact value is
    /// zero.
    pub fn hessian_residual(
        &self,
        x: &AmbientVector,
        v: &AmbientVector,
        w: &AmbientVector,
    ) -> Result<f64> {
        self.space.on_model(x)?;
        self.space.check_tangent(x, v, 1e-8)?;
        self.space.check_tangent(x, w, 1e-8)?;
        let nv = self.space.inner(v, v)?.max(0.0).sqrt();
        let nw = self.space.inner(w, w)?.max(0.0).sqrt();
        if nv == 0.0 || nw == 0.0 {
            return Ok(0.0);
        }
        let sigma = match self.space.kind {
            SpaceFormKind::Euclidean => 0.0,
            SpaceFormKind::Spherical => self.space.curvature,
            SpaceFormKind::Hyperbolic => self.space.curvature,
        };
        // Polarization: Hess(v,w) = (D^2_{v+w} - D^2_{v-w}) / 4, with each
        // second derivative taken along the geodesic in that direction.
        let d2 = |dir: &AmbientVector| -> Result<f64> {
            let speed = self.space.inner(dir, dir)?.max(0.0).sqrt();
            if speed == 0.0 {
                return Ok(0.0);
            }
            let h = HESSIAN_FD_STEP / speed;
            let fp = self
                .space
                .inner(&self.alpha, &self.space.geodesic(x, dir, h)?)?;
            let fm = self
                .space
                .inner(&self.alpha, &self.space.geodesic(x, dir, -h)?)?;
            let f0 = self.space.inner(&self.alpha, x)?;
            Ok((fp - 2.0 * f0 + fm) / (h * h))
        };
        let hess = (d2(&(v + w))? - d2(&(v - w))?) / 4.0;
        let f = self.space.inner(&self.alpha, x)?;
        Ok(hess + sigma * f * self.space.inner(v, w)?)
    }
}

/// Splits `v` into a part in the span of `tangent_basis` and a remainder
/// orthogonal (under the space's bilinear form) to every basis vector, via a
/// Gram solve. Fails when the Gram matrix is ill-conditioned.
pub fn project(
    space: &SpaceForm,
    v: &AmbientVector,
    tangent_basis: &[AmbientVector],
) -> Result<(AmbientVector, AmbientVector)> {
    let d = tangent_basis.len();
    if d == 0 {
        return Ok((DVector::zeros(v.len()), v.clone()));
    }
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for i in 0..d {
        for j in i..d {
            let g = space.inner(&tangent_basis[i], &tangent_basis[j])?;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
        rhs[i] = space.inner(v, &tangent_basis[i])?;
    }
    let eig = gram.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min_ev = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let cond = if min_ev <= 0.0 {
        f64::INFINITY
    } else {
        max_ev / min_ev
    };
    if !cond.is_finite() || cond > GRAM_COND_LIMIT {
        return Err(Error::DegenerateBasis { cond });
    }
    let coeffs = gram
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateBasis { cond })?;
    let mut tangential = DVector::zeros(v.len());
    for i in 0..d {
        tangential += &tangent_basis[i] * coeffs[i];
    }
    let normal = v - &tangential;
    Ok((tangential, normal))
}

/// Draws a uniform-ish random point on the model (Gaussian direction pushed
/// onto the quadric). For Euclidean space returns a standard Gaussian point.
pub fn sample_model_point<R: rand::Rng>(space: &SpaceForm, rng: &mut R) -> AmbientVector {
    use rand::distributions::Distribution;
    let normal = rand::distributions::Uniform::new(-1.0f64, 1.0);
    let dim = space.coord_dim();
    loop {
        let mut x = DVector::from_fn(dim, |_, _| {
            // Box-Muller from two uniforms keeps rand's plain API.
            let u: f64 = normal.sample(rng);
            u
        });
        match space.kind {
            SpaceFormKind::Euclidean => return x,
            SpaceFormKind::Spherical => {
                if let Ok(p) = space.normalize_to_model(&x) {
                    return p;
                }
            }
            SpaceFormKind::Hyperbolic => {
                let k = -space.curvature;
                let spatial_sq: f64 = (1..dim).map(|i| x[i] * x[i]).sum();
                x[0] = (spatial_sq + 1.0 / k).sqrt();
                return x;
            }
        }
    }
}

/// A tangent-space basis at `x` obtained by projecting coordinate directions
/// and orthonormalizing under the model's bilinear form.
pub fn tangent_basis_at(space: &SpaceForm, x: &AmbientVector, count: usize) -> Vec<AmbientVector> {
    let dim = space.coord_dim();
    let mut basis: Vec<AmbientVector> = Vec::new();
    for i in 0..dim {
        if basis.len() == count {
            break;
        }
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        // Remove the quadric-normal component, then Gram-Schmidt.
        let mut v = match space.kind {
            SpaceFormKind::Euclidean => e,
            SpaceFormKind::Spherical => {
                let ip = space.inner(&e, x).unwrap();
                &e - x * (space.curvature * ip)
            }
            SpaceFormKind::Hyperbolic => {
                let ip = space.inner(&e, x).unwrap();
                &e + x * (-space.curvature * ip)
            }
        };
        for b in &basis {
            let ip = space.inner(&v, b).unwrap();
            v -= b * ip;
        }
        let n = space.inner(&v, &v).unwrap();
        if n > 1e-12 {
            basis.push(v / n.sqrt());
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn unit(dim: usize, i: usize) -> AmbientVector {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        e
    }

    #[test]
    fn inner_products() {
        let eu = SpaceForm::euclidean(3);
        assert_eq!(eu.inner(&unit(3, 0), &unit(3, 0)).unwrap(), 1.0);

        let hy = SpaceForm::hyperbolic(3, 1.0).unwrap();
        assert_eq!(hy.inner(&unit(4, 0), &unit(4, 0)).unwrap(), -1.0);

        // Hyperboloid point with k = 1 has <p,p> = -1.
        let p = DVector::from_vec(vec![(1.0f64 + 2.0).sqrt(), 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(hy.inner(&p, &p).unwrap(), -1.0, epsilon = 1e-13);
        hy.on_model(&p).unwrap();
    }

    #[test]
    fn inner_dimension_mismatch() {
        let eu = SpaceForm::euclidean(3);
        assert!(eu.inner(&unit(3, 0), &unit(4, 0)).is_err());
    }

    #[test]
    fn support_eval_cases() {
        let sp = SpaceForm::spherical(2, 1.0).unwrap();
        let x = unit(3, 0);
        let f = SupportFunction::new(sp, x.clone()).unwrap();
        assert_abs_diff_eq!(f.eval(&x).unwrap(), 1.0);
        assert_abs_diff_eq!(f.eval(&unit(3, 1)).unwrap(), 0.0);

        let hy = SpaceForm::hyperbolic(3, 1.0).unwrap();
        let p = unit(4, 0);
        let fh = SupportFunction::new(hy, p.clone()).unwrap();
        assert_abs_diff_eq!(fh.eval(&p).unwrap(), -1.0);
    }

    #[test]
    fn support_gradient_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sp = SpaceForm::spherical(3, 1.0).unwrap();
        let hy = SpaceForm::hyperbolic(3, 1.0).unwrap();
        let alpha_s = sample_model_point(&sp, &mut rng);
        let alpha_h = sample_model_point(&hy, &mut rng);
        let fs = SupportFunction::new(sp, alpha_s).unwrap();
        let fh = SupportFunction::new(hy, alpha_h).unwrap();
        for _ in 0..1000 {
            let x = sample_model_point(&sp, &mut rng);
            let f = fs.eval(&x).unwrap();
            let g = fs.gradient(&x).unwrap();
            // F^2 + |grad F|^2 = 1 and tangency of the gradient.
            assert_abs_diff_eq!(f * f + sp.inner(&g, &g).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sp.inner(&g, &x).unwrap(), 0.0, epsilon = 1e-10);

            let y = sample_model_point(&hy, &mut rng);
            let fv = fh.eval(&y).unwrap();
            let gh = fh.gradient(&y).unwrap();
            // |grad F|^2 = -1 + F^2 on the hyperboloid.
            assert_abs_diff_eq!(hy.inner(&gh, &gh).unwrap(), -1.0 + fv * fv, epsilon = 1e-10);
            assert_abs_diff_eq!(hy.inner(&gh, &y).unwrap(), 0.0, epsilon = 1e-10);
        }
        // Gradient vanishes at x = alpha.
        let g0 = fs.gradient(&fs.alpha.clone()).unwrap();
        assert!(g0.norm() < 1e-14);
    }

    #[test]
    fn hessian_residual_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for space in [
            SpaceForm::spherical(3, 1.0).unwrap(),
            SpaceForm::spherical(2, 2.5).unwrap(),
            SpaceForm::hyperbolic(3, 1.0).unwrap(),
            SpaceForm::hyperbolic(2, 0.7).unwrap(),
        ] {
            let alpha = sample_model_point(&space, &mut rng);
            let f = SupportFunction::new(space, alpha).unwrap();
            for _ in 0..20 {
                let x = sample_model_point(&space, &mut rng);
                let basis = tangent_basis_at(&space, &x, space.ambient_dim);
                let v = &basis[0] + &basis[1] * 0.3;
                let w = &basis[1] - &basis[0] * 0.7;
                let r = f.hessian_residual(&x, &v, &w).unwrap();
                assert!(r.abs() <= 1e-6, "residual {r} too large for {:?}", space.kind);
            }
            // Bilinear in each slot: zero directions give exactly zero.
            let x = sample_model_point(&space, &mut rng);
            let z = DVector::zeros(space.coord_dim());
            assert_eq!(f.hessian_residual(&x, &z, &z).unwrap(), 0.0);
        }
    }

    #[test]
    fn hessian_rejects_non_tangent() {
        let sp = SpaceForm::spherical(2, 1.0).unwrap();
        let x = unit(3, 0);
        let f = SupportFunction::new(sp, unit(3, 1)).unwrap();
        // x itself is normal to the sphere at x, not tangent.
        assert!(f.hessian_residual(&x, &x, &x).is_err());
    }

    #[test]
    fn project_splits_and_reassembles() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for space in [
            SpaceForm::euclidean(4),
            SpaceForm::spherical(3, 1.0).unwrap(),
            SpaceForm::hyperbolic(3, 1.0).unwrap(),
        ] {
            let x = sample_model_point(&space, &mut rng);
            let basis = tangent_basis_at(&space, &x, 2);
            for _ in 0..50 {
                let v = DVector::from_fn(space.coord_dim(), |_, _| {
                    rand::Rng::gen_range(&mut rng, -1.0..1.0)
                });
                let (t, n) = project(&space, &v, &basis).unwrap();
                assert!((&t + &n - &v).norm() < 1e-10);
                for b in &basis {
                    assert_abs_diff_eq!(space.inner(&n, b).unwrap(), 0.0, epsilon = 1e-10);
                }
                // Idempotence on the tangential part.
                let (t2, _) = project(&space, &t, &basis).unwrap();
                assert!((&t2 - &t).norm() <= 1e-12 * (1.0 + t.norm()));
            }
            // v already in span -> zero normal part; orthogonal v -> zero tangential.
            let inplane = &basis[0] * 2.0 - &basis[1];
            let (t, n) = project(&space, &inplane, &basis).unwrap();
            assert!(n.norm() < 1e-12 * (1.0 + t.norm()));
        }
    }

    #[test]
    fn project_rejects_degenerate_basis() {
        let eu = SpaceForm::euclidean(3);
        let b0 = unit(3, 0);
        let b1 = &b0 * (1.0 + 1e-15);
        let v = unit(3, 1);
        match project(&eu, &v, &[b0, b1]) {
            Err(Error::DegenerateBasis { .. }) => {}
            other => panic!("expected degenerate basis error, got {other:?}"),
        }
    }

    #[test]
    fn inner_symmetry_randomized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let hy = SpaceForm::hyperbolic(4, 2.0).unwrap();
        for _ in 0..200 {
            let u = DVector::from_fn(5, |_, _| rand::Rng::gen_range(&mut rng, -2.0..2.0));
            let v = DVector::from_fn(5, |_, _| rand::Rng::gen_range(&mut rng, -2.0..2.0));
            assert_eq!(hy.inner(&u, &v).unwrap(), hy.inner(&v, &u).unwrap());
        }
    }
}
