//! Boundary-maximum probe for the subharmonic combination
//! `phi = |grad u|^2 + u^2` (spherical extension), `|grad u|^2 - u^2`
//! (hyperbolic), or `|grad u|^2` (flat), with the support-function boundary
//! identity and the normal-derivative identity as refinement diagnostics.

use nalgebra::DVector;

use super::fem::{recover_gradients, FemField};
use super::mesh::VolumeMesh;
use super::reilly::{boundary_fields, boundary_surface};
use crate::error::{Error, Result};
use crate::linalg::LinearOp;
use crate::spaceform::AmbientVector;
use crate::surface::BoundaryFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiVariant {
    /// u solves `Lap u + n k u = 0`; phi = |grad u|^2 + k u^2 (unit k: +u^2).
    Spherical,
    /// u solves `Lap u = n k u`; phi = |grad u|^2 - k u^2.
    Hyperbolic,
    /// u solves `Lap u + lambda u = 0` on a flat domain; phi = |grad u|^2.
    EuclideanLambda { lambda: f64 },
}

#[derive(Debug, Clone)]
pub struct PhiReport {
    pub interior_max: f64,
    pub boundary_max: f64,
    pub passed: bool,
    /// Residual of `phi|_Sigma = (+/-)1 + chi^2 - |nabla-perp F|^2` when u
    /// extends a support function (O(h)).
    pub boundary_identity_residual: Option<f64>,
    /// Residual of the normal-derivative identity
    /// `(1/2) d phi / d nu = <grad f, grad chi> - II(grad f, grad f)
    ///  - H chi^2 - <H_S, nabla-perp F> chi` (O(h), spherical caps).
    pub normal_derivative_residual: Option<f64>,
}

/// Weak residual of the claimed extension equation, used to reject a
/// variant/field mismatch before probing.
fn equation_mismatch(mesh: &VolumeMesh, u: &FemField, lambda: f64) -> Result<f64> {
    let (stiff, mass) = super::fem::assemble(mesh);
    let n = mesh.vertices.len();
    let mut su = DVector::zeros(n);
    stiff.apply(&u.vertex_values, &mut su);
    let mut mu = DVector::zeros(n);
    mass.apply(&u.vertex_values, &mut mu);
    let bset: std::collections::BTreeSet<usize> =
        mesh.boundary_vertices.iter().cloned().collect();
    let mdiag = mass.diagonal();
    let mut worst = 0.0f64;
    let scale = u
        .vertex_values
        .iter()
        .cloned()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for v in 0..n {
        if bset.contains(&v) {
            continue;
        }
        let r = (su[v] - lambda * mu[v]) / mdiag[v];
        worst = worst.max(r.abs() / scale);
    }
    Ok(worst)
}

pub fn phi_boundary_max_probe(
    mesh: &VolumeMesh,
    u: &FemField,
    variant: PhiVariant,
    support_alpha: Option<&AmbientVector>,
    tol: f64,
) -> Result<PhiReport> {
    let c = mesh.chart.curvature;
    let (lambda, sign) = match variant {
        PhiVariant::Spherical => {
            if c <= 0.0 {
                return Err(Error::InvalidInput(
                    "spherical phi variant needs a positively curved domain".into(),
                ));
            }
            (mesh.dim as f64 * c, c)
        }
        PhiVariant::Hyperbolic => {
            if c >= 0.0 {
                return Err(Error::InvalidInput(
                    "hyperbolic phi variant needs a negatively curved domain".into(),
                ));
            }
            (mesh.dim as f64 * c, c)
        }
        PhiVariant::EuclideanLambda { lambda } => {
            if c != 0.0 {
                return Err(Error::InvalidInput(
                    "euclidean phi variant needs a flat domain".into(),
                ));
            }
            (lambda, 0.0)
        }
    };
    let mismatch = equation_mismatch(mesh, u, lambda)?;
    let gate = 1.0 + lambda.abs();
    if mismatch > gate {
        return Err(Error::InvalidInput(format!(
            "field does not satisfy the {variant:?} extension equation \
             (weak residual {mismatch:.3e} > {gate:.3e})"
        )));
    }

    // Nodal phi = |grad u|_g^2 + sign * u^2 from the recovered gradients.
    let nodal = recover_gradients(mesh, u);
    let bset: std::collections::BTreeSet<usize> =
        mesh.boundary_vertices.iter().cloned().collect();
    let mut interior_max = f64::NEG_INFINITY;
    let mut boundary_max = f64::NEG_INFINITY;
    for v in 0..mesh.vertices.len() {
        let conf = mesh.chart.conf(&mesh.vertices[v]);
        let phi = nodal[v].norm_squared() / (conf * conf)
            + sign * u.vertex_values[v] * u.vertex_values[v];
        if bset.contains(&v) {
            boundary_max = boundary_max.max(phi);
        } else {
            interior_max = interior_max.max(phi);
        }
    }
    let passed = interior_max <= boundary_max + tol;

    // Optional support-function cross-checks at boundary vertices.
    let mut boundary_identity_residual = None;
    let mut normal_derivative_residual = None;
    if let Some(alpha) = support_alpha {
        if sign == 0.0 {
            return Err(Error::InvalidInput(
                "support-function identity needs a curved domain".into(),
            ));
        }
        let space = mesh.domain.space()?;
        space.on_model(alpha)?;
        let nb = mesh.boundary_vertices.len();
        let bf = boundary_fields(mesh, u)?;
        let mut worst = 0.0f64;
        let mut phi_b = DVector::zeros(nb);
        let mut nu_dot_grad_f = DVector::zeros(nb);
        let mut f_vals = DVector::zeros(nb);
        for (i, &v) in mesh.boundary_vertices.iter().enumerate() {
            let y = &mesh.vertices[v];
            let conf = mesh.chart.conf(y);
            let phi_v = nodal[v].norm_squared() / (conf * conf)
                + sign * u.vertex_values[v] * u.vertex_values[v];
            phi_b[i] = phi_v;
            let x = mesh.domain.embed(y);
            let f = space.inner(alpha, &x)?;
            f_vals[i] = f;
            // grad_bar F = alpha -/+ k f X (sphere: -, hyperboloid: +).
            let grad_bar = alpha - &x * (c * f);
            let nu = mesh.domain.boundary_normal(&x);
            let perp = space.inner(&grad_bar, &nu)?;
            nu_dot_grad_f[i] = perp;
            let unit = if sign > 0.0 { 1.0 } else { -1.0 };
            let ident = unit + bf.chi[i] * bf.chi[i] - perp * perp;
            worst = worst.max((phi_v - ident).abs());
        }
        boundary_identity_residual = Some(worst);

        // Normal-derivative identity (spherical caps): (1/2) d phi / d nu
        // against the boundary combination.
        if sign > 0.0 && mesh.dim == 3 {
            let phi_field = FemField::new(mesh, {
                let mut vals = DVector::zeros(mesh.vertices.len());
                let nodal_phi: Vec<f64> = (0..mesh.vertices.len())
                    .map(|v| {
                        let conf = mesh.chart.conf(&mesh.vertices[v]);
                        nodal[v].norm_squared() / (conf * conf)
                            + sign * u.vertex_values[v] * u.vertex_values[v]
                    })
                    .collect();
                for (v, val) in nodal_phi.iter().enumerate() {
                    vals[v] = *val;
                }
                vals
            })?;
            let phi_grads = recover_gradients(mesh, &phi_field);
            let surf = boundary_surface(mesh)?;
            let f_field = BoundaryFunction::new(f_vals.clone());
            let chi_field = BoundaryFunction::new(bf.chi.clone());
            let grad_f = surf.gradient(&f_field)?;
            let grad_chi = surf.gradient(&chi_field)?;
            let mut worst44 = 0.0f64;
            for (i, &v) in mesh.boundary_vertices.iter().enumerate() {
                let y = &mesh.vertices[v];
                let conf = mesh.chart.conf(y);
                let radial = y / y.norm();
                let dphi_dnu = phi_grads[v].dot(&radial) / conf;
                let gf_gchi = surf.metric_inner(i, &grad_f[i], &grad_chi[i]);
                let ii_ff = surf.ii_quadratic(i, &grad_f[i], &grad_f[i]);
                let h = surf.mean_curvature[i];
                // Inclusion immersion: <H_S, nabla-perp F> = -H <nu, grad F>.
                let hs_perp = -h * nu_dot_grad_f[i];
                let rhs44 =
                    gf_gchi - ii_ff - h * bf.chi[i] * bf.chi[i] - hs_perp * bf.chi[i];
                worst44 = worst44.max((0.5 * dphi_dnu - rhs44).abs());
            }
            normal_derivative_residual = Some(worst44);
        }
    }

    Ok(PhiReport {
        interior_max,
        boundary_max,
        passed,
        boundary_identity_residual,
        normal_derivative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interior::fem::solve_helmholtz_dirichlet;
    use crate::interior::mesh::{build_interior_mesh, template_text, InteriorDomain};
    use std::f64::consts::PI;

    #[test]
    fn flat_linear_field_phi_constant() {
        let dom = InteriorDomain::EuclideanBall { r: 1.0, dim: 3 };
        let mesh = build_interior_mesh(dom, &template_text("ball3d").unwrap(), 2).unwrap();
        let u = FemField::from_fn(&mesh, |y| y[0]);
        let rep = phi_boundary_max_probe(
            &mesh,
            &u,
            PhiVariant::EuclideanLambda { lambda: 0.0 },
            None,
            1e-9,
        )
        .unwrap();
        assert!((rep.interior_max - 1.0).abs() < 1e-9);
        assert!((rep.boundary_max - 1.0).abs() < 1e-9);
        assert!(rep.passed);
    }

    #[test]
    fn hemisphere_coordinate_field_phi_constant_one() {
        // u = the ambient coordinate x1 on the hemisphere: phi = 1 exactly.
        let dom = InteriorDomain::SphericalCap {
            k: 1.0,
            r0: PI / 2.0,
            dim: 3,
        };
        let mesh = build_interior_mesh(dom, &template_text("ball3d").unwrap(), 3).unwrap();
        let u = FemField::from_fn(&mesh, |y| dom.embed(y)[0]);
        let rep = phi_boundary_max_probe(&mesh, &u, PhiVariant::Spherical, None, 5e-2).unwrap();
        assert!(
            (rep.interior_max - 1.0).abs() < 5e-2,
            "interior max {}",
            rep.interior_max
        );
        assert!(rep.passed);
    }

    #[test]
    fn variant_mismatch_rejected() {
        let dom = InteriorDomain::EuclideanBall { r: 1.0, dim: 3 };
        let mesh = build_interior_mesh(dom, &template_text("ball3d").unwrap(), 2).unwrap();
        // A quadratic with Lap u = 6 != 0 is not harmonic: lambda = 0 variant
        // must reject it.
        let u = FemField::from_fn(&mesh, |y| y.norm_squared());
        assert!(matches!(
            phi_boundary_max_probe(
                &mesh,
                &u,
                PhiVariant::EuclideanLambda { lambda: 0.0 },
                None,
                1e-6
            ),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn hyperbolic_support_extension_probe() {
        // u = F_alpha restricted: on H^3, Lap u = 3 u, phi = |grad u|^2 - u^2.
        let dom = InteriorDomain::HyperbolicBall {
            k: 1.0,
            r0: 1.0,
            dim: 3,
        };
        let mesh = build_interior_mesh(dom, &template_text("ball3d").unwrap(), 4).unwrap();
        let mut alpha = nalgebra::DVector::zeros(4);
        alpha[0] = 0.5f64.cosh();
        alpha[1] = 0.5f64.sinh();
        let space = dom.space().unwrap();
        let u = FemField::from_fn(&mesh, |y| {
            space.inner(&alpha, &dom.embed(y)).unwrap()
        });
        let rep =
            phi_boundary_max_probe(&mesh, &u, PhiVariant::Hyperbolic, Some(&alpha), 0.15)
                .unwrap();
        // phi = -1 + F^2 - ... for support functions phi = |grad F|^2 - F^2 = -1.
        assert!(rep.passed);
        let resid = rep.boundary_identity_residual.unwrap();
        assert!(resid < 0.1, "support identity residual {resid}");
    }

    #[test]
    fn hemisphere_solve_then_probe() {
        let dom = InteriorDomain::SphericalCap {
            k: 1.0,
            r0: PI / 2.0,
            dim: 3,
        };
        let mesh = build_interior_mesh(dom, &template_text("ball3d").unwrap(), 3).unwrap();
        // eta = trace of the ambient coordinate x1 on the equator.
        let eta = BoundaryFunction::new(DVector::from_fn(
            mesh.boundary_vertices.len(),
            |i, _| dom.embed(&mesh.vertices[mesh.boundary_vertices[i]])[0],
        ));
        let u = solve_helmholtz_dirichlet(&mesh, 3.0, &eta).unwrap();
        // The solve should land near the closed-form coordinate field.
        let exact = FemField::from_fn(&mesh, |y| dom.embed(y)[0]);
        let mut worst = 0.0f64;
        for v in 0..mesh.vertices.len() {
            worst = worst.max((u.vertex_values[v] - exact.vertex_values[v]).abs());
        }
        assert!(worst < 5e-2, "solve deviates by {worst}");
        let rep = phi_boundary_max_probe(&mesh, &u, PhiVariant::Spherical, None, 5e-2).unwrap();
        assert!(rep.passed);
    }
}
