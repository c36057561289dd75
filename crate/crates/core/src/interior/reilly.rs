//! Reilly's formula assembled as an identity: the volume side from recovered
//! Hessians with the exact constant-curvature Ricci term, the boundary side
//! from the induced boundary surface and the FEM normal derivative.

use nalgebra::{DMatrix, DVector};

use super::fem::{cell_gradients, recover_cell_hessians, recover_derivatives, recover_gradients, FemField};
use super::mesh::VolumeMesh;
use crate::error::{Error, Result};
use crate::surface::trimesh::{build_triangulated, AnalyticBoundary};
use crate::surface::{BoundaryFunction, BoundarySurface};

#[derive(Debug, Clone)]
pub struct ReillyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub mesh_size: f64,
}

/// Per-boundary-vertex fields needed on the right side of the identity.
pub struct BoundaryFields {
    /// Trace of u.
    pub eta: DVector<f64>,
    /// Normal derivative (metric).
    pub chi: DVector<f64>,
    pub lap_eta: DVector<f64>,
    /// II applied twice to the surface gradient of eta.
    pub ii_grad: DVector<f64>,
    pub h: DVector<f64>,
    pub weights: DVector<f64>,
    /// |grad_Sigma eta|^2 (metric).
    pub grad_sq: DVector<f64>,
}

/// The induced boundary surface of a 3D volume mesh, with the exact normals
/// and (umbilic) second fundamental form of the catalog domain at the
/// projected vertices.
pub fn boundary_surface(mesh: &VolumeMesh) -> Result<BoundarySurface> {
    if mesh.dim != 3 {
        return Err(Error::InvalidInput(
            "boundary_surface applies to 3-dimensional meshes".into(),
        ));
    }
    let space = mesh.domain.space()?;
    let kappa = mesh.domain.boundary_kappa();
    let local: std::collections::BTreeMap<usize, usize> = mesh
        .boundary_vertices
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let verts: Vec<DVector<f64>> = mesh
        .boundary_vertices
        .iter()
        .map(|&v| mesh.domain.embed(&mesh.vertices[v]))
        .collect();
    let faces: Vec<[usize; 3]> = mesh
        .boundary_faces
        .iter()
        .map(|(f, _)| [local[&f[0]], local[&f[1]], local[&f[2]]])
        .collect();
    let domain = mesh.domain;
    let normal = move |x: &DVector<f64>| domain.boundary_normal(x);
    let second_form = move |_x: &DVector<f64>, basis: &[DVector<f64>]| {
        // Umbilic boundary: II = kappa * gamma; orthonormal basis => kappa I.
        let d = basis.len();
        DMatrix::identity(d, d) * kappa
    };
    build_triangulated(
        space,
        verts,
        faces,
        Some(AnalyticBoundary {
            normal: &normal,
            second_form: &second_form,
        }),
    )
}

/// Boundary fields of a FEM solution, indexed like `mesh.boundary_vertices`.
pub fn boundary_fields(mesh: &VolumeMesh, u: &FemField) -> Result<BoundaryFields> {
    let grads = recover_gradients(mesh, u);
    let nb = mesh.boundary_vertices.len();
    let eta = DVector::from_fn(nb, |i, _| u.vertex_values[mesh.boundary_vertices[i]]);
    let mut chi = DVector::zeros(nb);
    for (i, &v) in mesh.boundary_vertices.iter().enumerate() {
        let y = &mesh.vertices[v];
        let radial = y / y.norm();
        chi[i] = grads[v].dot(&radial) / mesh.chart.conf(y);
    }
    match mesh.dim {
        3 => {
            let surf = boundary_surface(mesh)?;
            let eta_f = BoundaryFunction::new(eta.clone());
            let lap_eta = surf.laplacian(&eta_f)?;
            let grad = surf.gradient(&eta_f)?;
            let mut ii_grad = DVector::zeros(nb);
            let mut grad_sq = DVector::zeros(nb);
            for p in 0..nb {
                ii_grad[p] = surf.ii_quadratic(p, &grad[p], &grad[p]);
                grad_sq[p] = surf.metric_inner(p, &grad[p], &grad[p]);
            }
            Ok(BoundaryFields {
                eta,
                chi,
                lap_eta,
                ii_grad,
                h: DVector::from_vec(surf.mean_curvature.clone()),
                weights: DVector::from_vec(surf.weights.clone()),
                grad_sq,
            })
        }
        2 => {
            // Boundary circle: order the polyline, use metric chord lengths.
            let order = boundary_cycle(mesh)?;
            let nb2 = order.len();
            let pos: Vec<DVector<f64>> = order
                .iter()
                .map(|&v| mesh.domain.embed(&mesh.vertices[v]))
                .collect();
            let space = mesh.domain.space()?;
            let mut seg = vec![0.0f64; nb2]; // length of segment (i, i+1)
            for i in 0..nb2 {
                let d = &pos[(i + 1) % nb2] - &pos[i];
                seg[i] = space.inner(&d, &d)?.max(0.0).sqrt();
            }
            let kappa = mesh.domain.boundary_kappa();
            let to_local: std::collections::BTreeMap<usize, usize> = mesh
                .boundary_vertices
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, i))
                .collect();
            let eta_on = |i: usize| eta[to_local[&order[i]]];
            let mut lap_eta = DVector::zeros(nb);
            let mut ii_grad = DVector::zeros(nb);
            let mut grad_sq = DVector::zeros(nb);
            let mut weights = DVector::zeros(nb);
            for i in 0..nb2 {
                let lm = seg[(i + nb2 - 1) % nb2];
                let lp = seg[i];
                let em = eta_on((i + nb2 - 1) % nb2);
                let e0 = eta_on(i);
                let ep = eta_on((i + 1) % nb2);
                let li = to_local[&order[i]];
                lap_eta[li] = ((ep - e0) / lp - (e0 - em) / lm) / (0.5 * (lm + lp));
                let de = (ep - em) / (lm + lp);
                grad_sq[li] = de * de;
                ii_grad[li] = kappa * de * de;
                weights[li] = 0.5 * (lm + lp);
            }
            Ok(BoundaryFields {
                eta,
                chi,
                lap_eta,
                ii_grad,
                h: DVector::from_element(nb, kappa),
                weights,
                grad_sq,
            })
        }
        _ => unreachable!(),
    }
}

fn boundary_cycle(mesh: &VolumeMesh) -> Result<Vec<usize>> {
    use std::collections::BTreeMap;
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (face, _) in &mesh.boundary_faces {
        adj.entry(face[0]).or_default().push(face[1]);
        adj.entry(face[1]).or_default().push(face[0]);
    }
    let start = *adj.keys().next().ok_or_else(|| {
        Error::InconsistentMesh("2D mesh has no boundary edges".into())
    })?;
    let mut cycle = vec![start];
    let mut prev = usize::MAX;
    let mut cur = start;
    loop {
        let nexts = &adj[&cur];
        if nexts.len() != 2 {
            return Err(Error::InconsistentMesh(format!(
                "boundary vertex {cur} has {} neighbors",
                nexts.len()
            )));
        }
        let nxt = if nexts[0] != prev { nexts[0] } else { nexts[1] };
        if nxt == start {
            break;
        }
        cycle.push(nxt);
        prev = cur;
        cur = nxt;
        if cycle.len() > adj.len() {
            return Err(Error::InconsistentMesh("boundary is not a single cycle".into()));
        }
    }
    if cycle.len() != adj.len() {
        return Err(Error::InconsistentMesh(
            "boundary has several components".into(),
        ));
    }
    Ok(cycle)
}

/// Assembles both sides of Reilly's identity for a supplied field:
/// volume integral of `|Hess u|^2 - (Lap u)^2 + Ric(grad u, grad u)` against
/// boundary integral of `-II(grad eta, grad eta) - 2 (Lap eta) chi - H chi^2`.
pub fn reilly_residual(mesh: &VolumeMesh, u: &FemField) -> Result<ReillyReport> {
    let d = mesh.dim;
    let c = mesh.chart.curvature;
    let n_minus_1 = (d - 1) as f64;
    let rec = recover_derivatives(mesh, u);
    let hessians = recover_cell_hessians(mesh, &rec);
    let (qp, qw) = super::fem::quadrature_for(d);
    let mut lhs = 0.0;
    for ci in 0..mesh.cells.len() {
        let cell = &mesh.cells[ci];
        let (grads, vol) = cell_gradients(mesh, ci);
        let mut du = DVector::zeros(d);
        for (l, &v) in cell.iter().enumerate() {
            du += &grads[l] * u.vertex_values[v];
        }
        for (p, w) in qp.iter().zip(&qw) {
            let mut y = DVector::zeros(d);
            for (l, lam) in p.iter().enumerate() {
                y += &mesh.vertices[cell[l]] * *lam;
            }
            let conf = mesh.chart.conf(&y);
            let psi = mesh.chart.psi_grad(&y);
            // Covariant Hessian in chart components.
            let mut hess = hessians[ci].clone();
            let dot = psi.dot(&du);
            for a in 0..d {
                for b in 0..d {
                    hess[(a, b)] -= psi[b] * du[a] + psi[a] * du[b];
                    if a == b {
                        hess[(a, b)] += dot;
                    }
                }
            }
            let inv2 = 1.0 / (conf * conf);
            let hess_sq = hess.iter().map(|v| v * v).sum::<f64>() * inv2 * inv2;
            let lap = hess.trace() * inv2;
            let grad_sq = du.norm_squared() * inv2;
            let integrand = hess_sq - lap * lap + n_minus_1 * c * grad_sq;
            lhs += w * vol * conf.powi(d as i32) * integrand;
        }
    }
    let rhs = boundary_side(mesh, u)?;
    Ok(ReillyReport {
        lhs,
        rhs,
        residual: lhs - rhs,
        mesh_size: mesh.mesh_size(),
    })
}

/// Boundary side assembled through the discrete quadratic forms: with the
/// weak Laplacian L, `int (Lap eta) chi = -chi' L eta` and (umbilic boundary)
/// `int II(grad eta, grad eta) = kappa eta' L eta`, which keeps the
/// summation-by-parts structure of the identity.
fn boundary_side(mesh: &VolumeMesh, u: &FemField) -> Result<f64> {
    let grads = recover_gradients(mesh, u);
    let nb = mesh.boundary_vertices.len();
    let eta = DVector::from_fn(nb, |i, _| u.vertex_values[mesh.boundary_vertices[i]]);
    let mut chi = DVector::zeros(nb);
    for (i, &v) in mesh.boundary_vertices.iter().enumerate() {
        let y = &mesh.vertices[v];
        let radial = y / y.norm();
        chi[i] = grads[v].dot(&radial) / mesh.chart.conf(y);
    }
    let kappa = mesh.domain.boundary_kappa();
    match mesh.dim {
        3 => {
            let surf = boundary_surface(mesh)?;
            let (l_op, lumped) = surf.weak_pair();
            let mut l_eta = DVector::zeros(nb);
            l_op.apply(&eta, &mut l_eta);
            let ii_term = kappa * eta.dot(&l_eta);
            let lap_term = -2.0 * chi.dot(&l_eta);
            let h = 2.0 * kappa;
            let h_term: f64 = (0..nb).map(|i| h * chi[i] * chi[i] * lumped[i]).sum();
            Ok(-ii_term - lap_term - h_term)
        }
        2 => {
            let order = boundary_cycle(mesh)?;
            let space = mesh.domain.space()?;
            let pos: Vec<DVector<f64>> = order
                .iter()
                .map(|&v| mesh.domain.embed(&mesh.vertices[v]))
                .collect();
            let to_local: std::collections::BTreeMap<usize, usize> = mesh
                .boundary_vertices
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, i))
                .collect();
            let nb2 = order.len();
            let mut ii_term = 0.0;
            let mut lap_term = 0.0;
            let mut h_term = 0.0;
            for i in 0..nb2 {
                let j = (i + 1) % nb2;
                let dvec = &pos[j] - &pos[i];
                let len = space.inner(&dvec, &dvec)?.max(0.0).sqrt();
                let de = eta[to_local[&order[j]]] - eta[to_local[&order[i]]];
                let dc = chi[to_local[&order[j]]] - chi[to_local[&order[i]]];
                ii_term += kappa * de * de / len;
                lap_term += -2.0 * de * dc / len;
                let ci_ = chi[to_local[&order[i]]];
                let cj_ = chi[to_local[&order[j]]];
                h_term += kappa * 0.5 * (ci_ * ci_ + cj_ * cj_) * len;
            }
            Ok(-ii_term - lap_term - h_term)
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interior::mesh::{build_interior_mesh, template_text, InteriorDomain};
    use std::f64::consts::PI;

    fn ball(level: usize) -> VolumeMesh {
        let dom = InteriorDomain::EuclideanBall { r: 1.0, dim: 3 };
        build_interior_mesh(dom, &template_text("ball3d").unwrap(), level).unwrap()
    }

    #[test]
    fn linear_field_both_sides_vanish() {
        let mesh = ball(3);
        let u = FemField::from_fn(&mesh, |y| y[0]);
        let rep = reilly_residual(&mesh, &u).unwrap();
        // lhs = 0 exactly for a linear field; rhs -> 0 with h.
        assert!(rep.lhs.abs() < 1e-10, "lhs {}", rep.lhs);
        assert!(rep.rhs.abs() < 0.4, "rhs {}", rep.rhs);
        assert!(rep.residual.abs() < 0.4);
    }

    #[test]
    fn harmonic_quadratic_sides_match_oracle() {
        // u = x^2 - y^2 on the unit ball: both sides equal 32 pi / 3.
        let exact = 32.0 * PI / 3.0;
        let mut prev = f64::INFINITY;
        for level in [2usize, 3, 4] {
            let mesh = ball(level);
            let u = FemField::from_fn(&mesh, |y| y[0] * y[0] - y[1] * y[1]);
            let rep = reilly_residual(&mesh, &u).unwrap();
            let resid = rep.residual.abs();
            assert!(
                resid <= 0.75 * prev + 1e-12,
                "residual did not decay: {resid} vs {prev}"
            );
            prev = resid;
            if level == 4 {
                assert!((rep.lhs - exact).abs() < 0.05 * exact, "lhs {}", rep.lhs);
                assert!((rep.rhs - exact).abs() < 0.05 * exact, "rhs {}", rep.rhs);
                assert!(resid < 1e-3 * rep.rhs.abs().max(1.0) * 10.0);
            }
        }
    }

    #[test]
    fn constant_field_all_zero() {
        let mesh = ball(2);
        let u = FemField::from_fn(&mesh, |_| 5.0);
        let rep = reilly_residual(&mesh, &u).unwrap();
        assert!(rep.lhs.abs() < 1e-12 && rep.rhs.abs() < 1e-12);
    }

    #[test]
    fn disk_reilly_linear() {
        let dom = InteriorDomain::EuclideanBall { r: 1.0, dim: 2 };
        let mesh = build_interior_mesh(dom, &template_text("disk2d").unwrap(), 4).unwrap();
        let u = FemField::from_fn(&mesh, |y| y[0]);
        let rep = reilly_residual(&mesh, &u).unwrap();
        assert!(rep.lhs.abs() < 1e-10);
        assert!(rep.residual.abs() < 0.1, "residual {}", rep.residual);
    }
}
