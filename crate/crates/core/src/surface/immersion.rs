//! Isometric immersions of the boundary into a target space form: per-node
//! pushforward data, vector-valued second fundamental form and mean curvature
//! vectors, plus ambient isometries (rotations, Lorentz boosts) applied to an
//! immersion.

use nalgebra::{DMatrix, DVector};

use super::{BoundaryFunction, BoundarySurface};
use crate::error::{Error, Result};
use crate::spaceform::{AmbientVector, SpaceForm, SpaceFormKind};

#[derive(Debug, Clone)]
pub struct ImmersionData {
    pub target: SpaceForm,
    /// Per-node image point.
    pub x: Vec<AmbientVector>,
    /// Pushforward of the surface tangent basis.
    pub dx: Vec<Vec<AmbientVector>>,
    /// Vector-valued second fundamental form in the tangent basis, row-major
    /// dim x dim ambient vectors per node.
    pub ii_vec: Vec<Vec<AmbientVector>>,
    /// Mean curvature vector (trace of `ii_vec`).
    pub h_vec: Vec<AmbientVector>,
}

impl ImmersionData {
    /// The inclusion of the boundary into its enclosing space form. The
    /// vector-valued second fundamental form of a hypersurface inclusion is
    /// `-II(v,w) nu`, so the mean curvature vector is `-H nu`.
    pub fn inclusion(s: &BoundarySurface) -> Result<Self> {
        let n = s.node_count();
        let d = s.dim;
        let mut ii_vec = Vec::with_capacity(n);
        let mut h_vec = Vec::with_capacity(n);
        for p in 0..n {
            let mut per = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    per.push(&s.normals[p] * (-s.second_form[p][(i, j)]));
                }
            }
            ii_vec.push(per);
            h_vec.push(&s.normals[p] * (-s.mean_curvature[p]));
        }
        Ok(ImmersionData {
            target: s.space,
            x: s.positions.clone(),
            dx: s.tangents.clone(),
            ii_vec,
            h_vec,
        })
    }

    /// Embeds the round boundary sphere of a Euclidean ball of radius
    /// `1/sqrt(k)` as a totally geodesic equator of `S^m_k` (one extra
    /// coordinate, set to zero).
    pub fn equatorial_sphere(s: &BoundarySurface, k: f64) -> Result<Self> {
        if s.space.kind != SpaceFormKind::Euclidean {
            return Err(Error::InvalidInput(
                "equatorial immersion needs a Euclidean-ambient surface".into(),
            ));
        }
        let r = 1.0 / k.sqrt();
        for p in &s.positions {
            if (p.norm() - r).abs() > 1e-8 * r {
                return Err(Error::InconsistentImmersion(format!(
                    "surface is not the round sphere of radius 1/sqrt(k) = {r}"
                )));
            }
        }
        let target = SpaceForm::spherical(s.space.ambient_dim, k)?;
        let pad = |v: &AmbientVector| {
            let mut w = DVector::zeros(v.len() + 1);
            for i in 0..v.len() {
                w[i] = v[i];
            }
            w
        };
        let n = s.node_count();
        let d = s.dim;
        let zero = DVector::zeros(s.space.ambient_dim + 1);
        Ok(ImmersionData {
            target,
            x: s.positions.iter().map(&pad).collect(),
            dx: s
                .tangents
                .iter()
                .map(|ts| ts.iter().map(&pad).collect())
                .collect(),
            ii_vec: vec![vec![zero.clone(); d * d]; n],
            h_vec: vec![zero; n],
        })
    }

    /// Appends zero coordinates (a totally geodesic flat factor), Euclidean
    /// targets only.
    pub fn pad_euclidean(&self, extra: usize) -> Result<Self> {
        if self.target.kind != SpaceFormKind::Euclidean {
            return Err(Error::InvalidInput(
                "zero-padding applies to Euclidean targets only".into(),
            ));
        }
        let target = SpaceForm::euclidean(self.target.ambient_dim + extra);
        let pad = |v: &AmbientVector| {
            let mut w = DVector::zeros(v.len() + extra);
            for i in 0..v.len() {
                w[i] = v[i];
            }
            w
        };
        Ok(ImmersionData {
            target,
            x: self.x.iter().map(&pad).collect(),
            dx: self
                .dx
                .iter()
                .map(|ts| ts.iter().map(&pad).collect())
                .collect(),
            ii_vec: self
                .ii_vec
                .iter()
                .map(|ts| ts.iter().map(&pad).collect())
                .collect(),
            h_vec: self.h_vec.iter().map(&pad).collect(),
        })
    }

    fn mapped(&self, m: &DMatrix<f64>) -> Self {
        let ap = |v: &AmbientVector| m * v;
        ImmersionData {
            target: self.target,
            x: self.x.iter().map(ap).collect(),
            dx: self
                .dx
                .iter()
                .map(|ts| ts.iter().map(ap).collect())
                .collect(),
            ii_vec: self
                .ii_vec
                .iter()
                .map(|ts| ts.iter().map(ap).collect())
                .collect(),
            h_vec: self.h_vec.iter().map(ap).collect(),
        }
    }

    /// Applies a seeded random ambient isometry: an orthogonal map for
    /// Euclidean/spherical targets, a spatial rotation for hyperbolic ones.
    pub fn rotated(&self, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dim = self.target.coord_dim();
        let (off, size) = match self.target.kind {
            SpaceFormKind::Hyperbolic => (1, dim - 1),
            _ => (0, dim),
        };
        let g = DMatrix::from_fn(size, size, |_, _| rng.gen_range(-1.0..1.0f64));
        let qr = g.qr();
        let q = qr.q();
        let mut m = DMatrix::identity(dim, dim);
        for i in 0..size {
            for j in 0..size {
                m[(off + i, off + j)] = q[(i, j)];
            }
        }
        self.mapped(&m)
    }

    /// Lorentz boost of rapidity `eta` in the (x0, x_axis) plane; hyperbolic
    /// targets only.
    pub fn boosted(&self, eta: f64, axis: usize) -> Result<Self> {
        if self.target.kind != SpaceFormKind::Hyperbolic {
            return Err(Error::InvalidInput(
                "Lorentz boosts apply to hyperbolic targets only".into(),
            ));
        }
        let dim = self.target.coord_dim();
        if axis == 0 || axis >= dim {
            return Err(Error::InvalidInput(format!(
                "boost axis must be a spatial index in 1..{dim}"
            )));
        }
        let mut m = DMatrix::identity(dim, dim);
        m[(0, 0)] = eta.cosh();
        m[(axis, axis)] = eta.cosh();
        m[(0, axis)] = eta.sinh();
        m[(axis, 0)] = eta.sinh();
        Ok(self.mapped(&m))
    }

    /// Checks the isometry invariant (Gram of dX equals the induced metric)
    /// and normality of the mean curvature vector.
    pub fn validate(&self, s: &BoundarySurface) -> Result<()> {
        if self.x.len() != s.node_count() {
            return Err(Error::InconsistentImmersion(format!(
                "immersion node count {} does not match surface {}",
                self.x.len(),
                s.node_count()
            )));
        }
        for p in 0..self.x.len() {
            self.target.on_model(&self.x[p]).map_err(|e| {
                Error::InconsistentImmersion(format!("node {p} off the target model: {e}"))
            })?;
            let scale = 1.0 + s.metric[p].norm();
            for i in 0..s.dim {
                for j in 0..s.dim {
                    let g = self.target.inner(&self.dx[p][i], &self.dx[p][j])?;
                    if (g - s.metric[p][(i, j)]).abs() > 1e-8 * scale {
                        return Err(Error::InconsistentImmersion(format!(
                            "isometry violated at node {p}: Gram {g} vs metric {}",
                            s.metric[p][(i, j)]
                        )));
                    }
                }
                let hn = self.target.inner(&self.h_vec[p], &self.dx[p][i])?;
                let hsc = 1.0
                    + self.target.inner(&self.h_vec[p], &self.h_vec[p])?.abs().sqrt()
                        * s.metric[p][(i, i)].sqrt();
                if hn.abs() > 1e-8 * hsc {
                    return Err(Error::InconsistentImmersion(format!(
                        "mean curvature vector not normal at node {p}: <H,dx_{i}> = {hn}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Componentwise surface Laplacian of the immersion coordinates: the mean
    /// curvature vector of the composed immersion into flat (or Minkowski)
    /// coordinates.
    pub fn laplace_coordinates(&self, s: &BoundarySurface) -> Result<Vec<AmbientVector>> {
        let dim = self.target.coord_dim();
        let n = s.node_count();
        let mut cols = Vec::with_capacity(dim);
        for c in 0..dim {
            let f = BoundaryFunction::new(DVector::from_fn(n, |p, _| self.x[p][c]));
            cols.push(s.laplacian(&f)?);
        }
        Ok((0..n)
            .map(|p| DVector::from_fn(dim, |c, _| cols[c][p]))
            .collect())
    }
}

/// Both routes to the mean curvature vector: the trace of the vector-valued
/// second fundamental form, and the coordinate Laplacian decomposed back to
/// the target. Errors if the two disagree beyond the representation's
/// discretization tolerance.
pub fn immersion_mean_curvature(
    s: &BoundarySurface,
    imm: &ImmersionData,
) -> Result<(Vec<AmbientVector>, Vec<AmbientVector>, f64)> {
    imm.validate(s)?;
    let n = s.node_count();
    let d = s.dim;
    let mut trace_route = Vec::with_capacity(n);
    for p in 0..n {
        let gi = &s.metric_inv[p];
        let mut h = DVector::zeros(imm.target.coord_dim());
        for i in 0..d {
            for j in 0..d {
                h += &imm.ii_vec[p][i * d + j] * gi[(i, j)];
            }
        }
        trace_route.push(h);
    }
    let flat = imm.laplace_coordinates(s)?;
    let k = imm.target.curvature;
    let lap_route: Vec<AmbientVector> = (0..n)
        .map(|p| match imm.target.kind {
            SpaceFormKind::Euclidean => flat[p].clone(),
            SpaceFormKind::Spherical => {
                let c = imm.target.inner(&flat[p], &imm.x[p]).unwrap();
                &flat[p] - &imm.x[p] * (k * c)
            }
            SpaceFormKind::Hyperbolic => {
                let c = imm.target.inner(&flat[p], &imm.x[p]).unwrap();
                &flat[p] + &imm.x[p] * (-k * c)
            }
        })
        .collect();
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for p in 0..n {
        worst = worst.max((&trace_route[p] - &lap_route[p]).norm());
        scale = scale.max(trace_route[p].norm());
    }
    // Route agreement is a consistency guard, not a convergence assertion:
    // spectral error on non-round charts at moderate resolution sits well
    // above 1e-6 but inconsistent immersion data produces O(1) gaps.
    let tol = if s.is_parametric() { 5e-2 } else { 0.5 } * scale;
    if worst > tol {
        return Err(Error::InconsistentImmersion(format!(
            "mean curvature routes disagree: max |trace - laplace| = {worst:.3e} (tol {tol:.3e})"
        )));
    }
    Ok((trace_route, lap_route, worst))
}
