#[test]
fn scratch_phi_pass() {
    use rbl_core::interior::mesh::{build_interior_mesh, template_text, InteriorDomain};
    use rbl_core::interior::fem::FemField;
    use rbl_core::interior::phi::{phi_boundary_max_probe, PhiVariant};
    let dom = InteriorDomain::HyperbolicBall { k: 1.0, r0: 1.0, dim: 3 };
    let mesh = build_interior_mesh(dom, &template_text("ball3d").unwrap(), 3).unwrap();
    let mut alpha = nalgebra::DVector::zeros(4);
    alpha[0] = 0.5f64.cosh();
    alpha[1] = 0.5f64.sinh();
    let space = dom.space().unwrap();
    let u = FemField::from_fn(&mesh, |y| space.inner(&alpha, &dom.embed(y)).unwrap());
    let rep = phi_boundary_max_probe(&mesh, &u, PhiVariant::Hyperbolic, Some(&alpha), 0.15).unwrap();
    println!("interior {} boundary {} ident {:?}", rep.interior_max, rep.boundary_max, rep.boundary_identity_residual);
}
