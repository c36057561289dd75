//! Closed-form catalog of boundary surfaces: round spheres bounding balls in
//! the three model ambients, ellipsoids, tube domains in the sphere and polar
//! Fourier curves in the plane. All per-node fields are filled analytically.

use nalgebra::{DMatrix, DVector};

use super::immersion::ImmersionData;
use super::{BoundarySurface, ParamOps, SurfaceFamily, SurfaceRep};
use crate::error::{Error, Result};
use crate::spaceform::{AmbientVector, SpaceForm};

/// Minimum resolutions per family (below this the quadrature error estimates
/// in the check layer are meaningless).
const MIN_RES_SPHERE: usize = 6;
const MIN_RES_CURVE: usize = 4;

pub fn catalog_names() -> Vec<&'static str> {
    vec![
        "euclidean_ball",
        "euclidean_ellipsoid",
        "spherical_cap",
        "spherical_tube_domain",
        "hyperbolic_ball",
        "curve_domain_2d",
    ]
}

/// Builds a catalog surface together with its inclusion immersion.
///
/// `domain_dim` is the dimension n of the enclosing domain (boundary has
/// intrinsic dimension n-1); families that are 3-dimensional only reject
/// other values.
pub fn build_catalog_surface(
    name: &str,
    params: &[f64],
    resolution: usize,
    domain_dim: usize,
) -> Result<(BoundarySurface, ImmersionData)> {
    match name {
        "euclidean_ball" => {
            let r = param(params, 0, "euclidean_ball(r)")?;
            if r <= 0.0 {
                return Err(Error::InvalidGeometry("ball radius must be positive".into()));
            }
            euclidean_ball(r, resolution, domain_dim)
        }
        "euclidean_ellipsoid" => {
            if domain_dim != 3 {
                return Err(Error::InvalidGeometry(
                    "euclidean_ellipsoid requires domain dimension 3".into(),
                ));
            }
            let a = param(params, 0, "euclidean_ellipsoid(a,b,c)")?;
            let b = param(params, 1, "euclidean_ellipsoid(a,b,c)")?;
            let c = param(params, 2, "euclidean_ellipsoid(a,b,c)")?;
            if a <= 0.0 || b <= 0.0 || c <= 0.0 {
                return Err(Error::InvalidGeometry(
                    "ellipsoid semi-axes must be positive".into(),
                ));
            }
            ellipsoid(a, b, c, resolution)
        }
        "spherical_cap" => {
            let k = param(params, 0, "spherical_cap(k, r0)")?;
            let r0 = param(params, 1, "spherical_cap(k, r0)")?;
            if k <= 0.0 {
                return Err(Error::InvalidGeometry("cap requires k > 0".into()));
            }
            let a = k.sqrt() * r0;
            if !(0.0..std::f64::consts::PI).contains(&a) || a == 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "cap radius out of range: sqrt(k) r0 = {a} must lie in (0, pi)"
                )));
            }
            spherical_cap(k, r0, resolution, domain_dim)
        }
        "spherical_tube_domain" => {
            if domain_dim != 3 {
                return Err(Error::InvalidGeometry(
                    "spherical_tube_domain requires domain dimension 3".into(),
                ));
            }
            let k = param(params, 0, "spherical_tube_domain(k, alpha)")?;
            let alpha = param(params, 1, "spherical_tube_domain(k, alpha)")?;
            if k <= 0.0 || !(0.0..std::f64::consts::FRAC_PI_2).contains(&alpha) || alpha == 0.0 {
                return Err(Error::InvalidGeometry(
                    "tube requires k > 0 and alpha in (0, pi/2)".into(),
                ));
            }
            spherical_tube(k, alpha, resolution)
        }
        "hyperbolic_ball" => {
            let k = param(params, 0, "hyperbolic_ball(k, r0)")?;
            let r0 = param(params, 1, "hyperbolic_ball(k, r0)")?;
            if k <= 0.0 || r0 <= 0.0 {
                return Err(Error::InvalidGeometry(
                    "hyperbolic ball requires k > 0 and r0 > 0".into(),
                ));
            }
            hyperbolic_ball(k, r0, resolution, domain_dim)
        }
        "curve_domain_2d" => {
            if domain_dim != 2 {
                return Err(Error::InvalidGeometry(
                    "curve_domain_2d requires domain dimension 2".into(),
                ));
            }
            if params.is_empty() {
                return Err(Error::InvalidGeometry(
                    "curve_domain_2d needs Fourier coefficients [c0, a1, b1, ...]".into(),
                ));
            }
            curve_domain(params.to_vec(), resolution)
        }
        other => Err(Error::InvalidGeometry(format!(
            "unknown catalog family '{other}'"
        ))),
    }
}

fn param(params: &[f64], i: usize, sig: &str) -> Result<f64> {
    params
        .get(i)
        .copied()
        .ok_or_else(|| Error::InvalidGeometry(format!("missing parameter {i} for {sig}")))
}

/// Unit-sphere chart point and derivatives in (theta, phi).
fn omega(theta: f64, phi: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let (st, ct) = (theta.sin(), theta.cos());
    let (cp, sp) = (phi.cos(), phi.sin());
    let w = DVector::from_vec(vec![st * cp, st * sp, ct]);
    let dth = DVector::from_vec(vec![ct * cp, ct * sp, -st]);
    let dphi = DVector::from_vec(vec![-st * sp, st * cp, 0.0]);
    (w, dth, dphi)
}

struct NodeData {
    position: AmbientVector,
    tangents: Vec<AmbientVector>,
    normal: AmbientVector,
    second_form: DMatrix<f64>,
}

fn assemble(
    space: SpaceForm,
    dim: usize,
    ops: ParamOps,
    nodes: Vec<NodeData>,
    family: SurfaceFamily,
) -> Result<(BoundarySurface, ImmersionData)> {
    let n = nodes.len();
    let mut positions = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut metric = Vec::with_capacity(n);
    let mut metric_inv = Vec::with_capacity(n);
    let mut second_form = Vec::with_capacity(n);
    let mut mean = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (p, nd) in nodes.into_iter().enumerate() {
        let mut g = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = space.inner(&nd.tangents[i], &nd.tangents[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let gi = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidGeometry(format!("singular metric at node {p}")))?;
        let h = (&gi * &nd.second_form).trace();
        weights.push(ops.cell[p] * g.determinant().max(0.0).sqrt());
        positions.push(nd.position);
        tangents.push(nd.tangents);
        normals.push(nd.normal);
        metric.push(g);
        metric_inv.push(gi);
        second_form.push(nd.second_form);
        mean.push(h);
    }
    let surface = BoundarySurface {
        space,
        dim,
        positions,
        tangents,
        normals,
        metric,
        metric_inv,
        second_form,
        mean_curvature: mean,
        weights,
        rep: SurfaceRep::Parametric(ops),
        family,
    };
    surface.validate()?;
    let immersion = ImmersionData::inclusion(&surface)?;
    Ok((surface, immersion))
}

fn euclidean_ball(
    r: f64,
    resolution: usize,
    domain_dim: usize,
) -> Result<(BoundarySurface, ImmersionData)> {
    let family = SurfaceFamily::EuclideanBall { r };
    match domain_dim {
        3 => {
            check_res(resolution, MIN_RES_SPHERE)?;
            let (ops, theta) = ParamOps::polar_sphere(resolution, 2 * resolution + 1);
            let n_phi = 2 * resolution + 1;
            let space = SpaceForm::euclidean(3);
            let mut nodes = Vec::with_capacity(resolution * n_phi);
            for th in &theta {
                for j in 0..n_phi {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                    let (w, wm, wp) = omega(*th, phi);
                    let t = vec![&wm * r, &wp * r];
                    // II = gamma / r for the round sphere.
                    let mut ii = DMatrix::zeros(2, 2);
                    for a in 0..2 {
                        for b in 0..2 {
                            ii[(a, b)] = t[a].dot(&t[b]) / r;
                        }
                    }
                    nodes.push(NodeData {
                        position: &w * r,
                        tangents: t,
                        normal: w,
                        second_form: ii,
                    });
                }
            }
            assemble(space, 2, ops, nodes, family)
        }
        2 => {
            check_res(resolution, MIN_RES_CURVE)?;
            let n = 4 * resolution + 1;
            let ops = ParamOps::curve(n);
            let space = SpaceForm::euclidean(2);
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let pos = DVector::from_vec(vec![r * th.cos(), r * th.sin()]);
                let t = DVector::from_vec(vec![-r * th.sin(), r * th.cos()]);
                let nu = DVector::from_vec(vec![th.cos(), th.sin()]);
                nodes.push(NodeData {
                    position: pos,
                    tangents: vec![t],
                    normal: nu,
                    second_form: DMatrix::from_element(1, 1, r),
                });
            }
            assemble(space, 1, ops, nodes, family)
        }
        d => Err(Error::InvalidGeometry(format!(
            "euclidean_ball supports domain dimension 2 or 3, got {d}"
        ))),
    }
}

fn ellipsoid(a: f64, b: f64, c: f64, resolution: usize) -> Result<(BoundarySurface, ImmersionData)> {
    check_res(resolution, MIN_RES_SPHERE)?;
    let (ops, theta) = ParamOps::polar_sphere(resolution, 2 * resolution + 1);
    let n_phi = 2 * resolution + 1;
    let space = SpaceForm::euclidean(3);
    let mut nodes = Vec::with_capacity(resolution * n_phi);
    for th in &theta {
        let (st, ct) = (th.sin(), th.cos());
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            let (cp, sp) = (phi.cos(), phi.sin());
            let pos = DVector::from_vec(vec![a * st * cp, b * st * sp, c * ct]);
            let xt = DVector::from_vec(vec![a * ct * cp, b * ct * sp, -c * st]);
            let xp = DVector::from_vec(vec![-a * st * sp, b * st * cp, 0.0]);
            let xtt = DVector::from_vec(vec![-a * st * cp, -b * st * sp, -c * ct]);
            let xtp = DVector::from_vec(vec![-a * ct * sp, b * ct * cp, 0.0]);
            let xpp = DVector::from_vec(vec![-a * st * cp, -b * st * sp, 0.0]);
            // Outward normal: X_theta x X_phi.
            let nu = DVector::from_vec(vec![
                xt[1] * xp[2] - xt[2] * xp[1],
                xt[2] * xp[0] - xt[0] * xp[2],
                xt[0] * xp[1] - xt[1] * xp[0],
            ]);
            let nu = &nu / nu.norm();
            let mut ii = DMatrix::zeros(2, 2);
            ii[(0, 0)] = -nu.dot(&xtt);
            ii[(0, 1)] = -nu.dot(&xtp);
            ii[(1, 0)] = ii[(0, 1)];
            ii[(1, 1)] = -nu.dot(&xpp);
            nodes.push(NodeData {
                position: pos,
                tangents: vec![xt, xp],
                normal: nu,
                second_form: ii,
            });
        }
    }
    assemble(
        space,
        2,
        ops,
        nodes,
        SurfaceFamily::EuclideanEllipsoid { a, b, c },
    )
}

fn spherical_cap(
    k: f64,
    r0: f64,
    resolution: usize,
    domain_dim: usize,
) -> Result<(BoundarySurface, ImmersionData)> {
    let rr = 1.0 / k.sqrt();
    let ang = k.sqrt() * r0;
    let (sa, ca) = (ang.sin(), ang.cos());
    let rho = rr * sa;
    let kappa = k.sqrt() * ca / sa; // principal curvature sqrt(k) cot(sqrt(k) r0)
    let family = SurfaceFamily::SphericalCap { k, r0 };
    match domain_dim {
        3 => {
            check_res(resolution, MIN_RES_SPHERE)?;
            let (ops, theta) = ParamOps::polar_sphere(resolution, 2 * resolution + 1);
            let n_phi = 2 * resolution + 1;
            let space = SpaceForm::spherical(3, k)?;
            let mut nodes = Vec::with_capacity(resolution * n_phi);
            for th in &theta {
                for j in 0..n_phi {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                    let (w, wm, wp) = omega(*th, phi);
                    let pos =
                        DVector::from_vec(vec![rho * w[0], rho * w[1], rho * w[2], rr * ca]);
                    let t = vec![
                        DVector::from_vec(vec![rho * wm[0], rho * wm[1], rho * wm[2], 0.0]),
                        DVector::from_vec(vec![rho * wp[0], rho * wp[1], rho * wp[2], 0.0]),
                    ];
                    let nu = DVector::from_vec(vec![ca * w[0], ca * w[1], ca * w[2], -sa]);
                    let mut ii = DMatrix::zeros(2, 2);
                    for x in 0..2 {
                        for y in 0..2 {
                            ii[(x, y)] = kappa * t[x].dot(&t[y]);
                        }
                    }
                    nodes.push(NodeData {
                        position: pos,
                        tangents: t,
                        normal: nu,
                        second_form: ii,
                    });
                }
            }
            assemble(space, 2, ops, nodes, family)
        }
        2 => {
            check_res(resolution, MIN_RES_CURVE)?;
            let n = 4 * resolution + 1;
            let ops = ParamOps::curve(n);
            let space = SpaceForm::spherical(2, k)?;
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let pos = DVector::from_vec(vec![rho * th.cos(), rho * th.sin(), rr * ca]);
                let t = DVector::from_vec(vec![-rho * th.sin(), rho * th.cos(), 0.0]);
                let nu = DVector::from_vec(vec![ca * th.cos(), ca * th.sin(), -sa]);
                let ii = DMatrix::from_element(1, 1, kappa * rho * rho);
                nodes.push(NodeData {
                    position: pos,
                    tangents: vec![t],
                    normal: nu,
                    second_form: ii,
                });
            }
            assemble(space, 1, ops, nodes, family)
        }
        d => Err(Error::InvalidGeometry(format!(
            "spherical_cap supports domain dimension 2 or 3, got {d}"
        ))),
    }
}

fn spherical_tube(k: f64, alpha: f64, resolution: usize) -> Result<(BoundarySurface, ImmersionData)> {
    check_res(resolution, MIN_RES_CURVE)?;
    let n_u = 2 * resolution + 1;
    let n_v = 2 * resolution + 1;
    let ops = ParamOps::bi_periodic(n_u, n_v);
    let rr = 1.0 / k.sqrt();
    let (sa, ca) = (alpha.sin(), alpha.cos());
    let space = SpaceForm::spherical(3, k)?;
    let mut nodes = Vec::with_capacity(n_u * n_v);
    for i in 0..n_u {
        let u = 2.0 * std::f64::consts::PI * i as f64 / n_u as f64;
        for j in 0..n_v {
            let v = 2.0 * std::f64::consts::PI * j as f64 / n_v as f64;
            let pos = DVector::from_vec(vec![
                rr * ca * u.cos(),
                rr * ca * u.sin(),
                rr * sa * v.cos(),
                rr * sa * v.sin(),
            ]);
            let tu = DVector::from_vec(vec![-rr * ca * u.sin(), rr * ca * u.cos(), 0.0, 0.0]);
            let tv = DVector::from_vec(vec![0.0, 0.0, -rr * sa * v.sin(), rr * sa * v.cos()]);
            // Outward from the solid tube around the {x3 = x4 = 0} circle.
            let nu = DVector::from_vec(vec![
                -sa * u.cos(),
                -sa * u.sin(),
                ca * v.cos(),
                ca * v.sin(),
            ]);
            let mut ii = DMatrix::zeros(2, 2);
            ii[(0, 0)] = -rr * sa * ca; // principal curvature -sqrt(k) tan(alpha)
            ii[(1, 1)] = rr * sa * ca; // principal curvature  sqrt(k) cot(alpha)
            nodes.push(NodeData {
                position: pos,
                tangents: vec![tu, tv],
                normal: nu,
                second_form: ii,
            });
        }
    }
    assemble(space, 2, ops, nodes, SurfaceFamily::SphericalTube { k, alpha })
}

fn hyperbolic_ball(
    k: f64,
    r0: f64,
    resolution: usize,
    domain_dim: usize,
) -> Result<(BoundarySurface, ImmersionData)> {
    let rr = 1.0 / k.sqrt();
    let ang = k.sqrt() * r0;
    let (sh, ch) = (ang.sinh(), ang.cosh());
    let rho = rr * sh;
    let kappa = k.sqrt() * ch / sh; // sqrt(k) coth(sqrt(k) r0)
    let family = SurfaceFamily::HyperbolicBall { k, r0 };
    match domain_dim {
        3 => {
            check_res(resolution, MIN_RES_SPHERE)?;
            let (ops, theta) = ParamOps::polar_sphere(resolution, 2 * resolution + 1);
            let n_phi = 2 * resolution + 1;
            let space = SpaceForm::hyperbolic(3, k)?;
            let mut nodes = Vec::with_capacity(resolution * n_phi);
            for th in &theta {
                for j in 0..n_phi {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
                    let (w, wm, wp) = omega(*th, phi);
                    let pos =
                        DVector::from_vec(vec![rr * ch, rho * w[0], rho * w[1], rho * w[2]]);
                    let t = vec![
                        DVector::from_vec(vec![0.0, rho * wm[0], rho * wm[1], rho * wm[2]]),
                        DVector::from_vec(vec![0.0, rho * wp[0], rho * wp[1], rho * wp[2]]),
                    ];
                    let nu = DVector::from_vec(vec![sh, ch * w[0], ch * w[1], ch * w[2]]);
                    let mut ii = DMatrix::zeros(2, 2);
                    for x in 0..2 {
                        for y in 0..2 {
                            // tangents have no time component, plain dot works
                            ii[(x, y)] = kappa * t[x].dot(&t[y]);
                        }
                    }
                    nodes.push(NodeData {
                        position: pos,
                        tangents: t,
                        normal: nu,
                        second_form: ii,
                    });
                }
            }
            assemble(space, 2, ops, nodes, family)
        }
        2 => {
            check_res(resolution, MIN_RES_CURVE)?;
            let n = 4 * resolution + 1;
            let ops = ParamOps::curve(n);
            let space = SpaceForm::hyperbolic(2, k)?;
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let pos = DVector::from_vec(vec![rr * ch, rho * th.cos(), rho * th.sin()]);
                let t = DVector::from_vec(vec![0.0, -rho * th.sin(), rho * th.cos()]);
                let nu = DVector::from_vec(vec![sh, ch * th.cos(), ch * th.sin()]);
                let ii = DMatrix::from_element(1, 1, kappa * rho * rho);
                nodes.push(NodeData {
                    position: pos,
                    tangents: vec![t],
                    normal: nu,
                    second_form: ii,
                });
            }
            assemble(space, 1, ops, nodes, family)
        }
        d => Err(Error::InvalidGeometry(format!(
            "hyperbolic_ball supports domain dimension 2 or 3, got {d}"
        ))),
    }
}

/// Polar Fourier curve r(theta) = c0 + sum_j (c_{2j-1} cos j th + c_{2j} sin j th).
fn curve_domain(coeffs: Vec<f64>, resolution: usize) -> Result<(BoundarySurface, ImmersionData)> {
    check_res(resolution, MIN_RES_CURVE)?;
    let n = 4 * resolution + 1;
    let eval = |th: f64| -> (f64, f64, f64) {
        let mut r = coeffs[0];
        let mut dr = 0.0;
        let mut ddr = 0.0;
        let mut j = 1usize;
        let mut idx = 1usize;
        while idx < coeffs.len() {
            let jf = j as f64;
            let (cj, sj) = ((jf * th).cos(), (jf * th).sin());
            let a = coeffs[idx];
            r += a * cj;
            dr += -a * jf * sj;
            ddr += -a * jf * jf * cj;
            if idx + 1 < coeffs.len() {
                let b = coeffs[idx + 1];
                r += b * sj;
                dr += b * jf * cj;
                ddr += -b * jf * jf * sj;
            }
            idx += 2;
            j += 1;
        }
        (r, dr, ddr)
    };
    // Positivity scan on a fine grid: a polar graph with r > 0 is embedded.
    for i in 0..(16 * n) {
        let th = 2.0 * std::f64::consts::PI * i as f64 / (16 * n) as f64;
        if eval(th).0 <= 0.0 {
            return Err(Error::InvalidGeometry(
                "curve radius r(theta) must stay positive (self-intersecting parameters)".into(),
            ));
        }
    }
    let ops = ParamOps::curve(n);
    let space = SpaceForm::euclidean(2);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let (r, dr, ddr) = eval(th);
        let (ct, st) = (th.cos(), th.sin());
        let pos = DVector::from_vec(vec![r * ct, r * st]);
        let t = DVector::from_vec(vec![dr * ct - r * st, dr * st + r * ct]);
        let speed = (r * r + dr * dr).sqrt();
        // Outward normal: rotate the unit tangent by -pi/2 (CCW parametrization).
        let nu = DVector::from_vec(vec![t[1] / speed, -t[0] / speed]);
        let kappa = (r * r + 2.0 * dr * dr - r * ddr) / speed.powi(3);
        let ii = DMatrix::from_element(1, 1, kappa * speed * speed);
        nodes.push(NodeData {
            position: pos,
            tangents: vec![t],
            normal: nu,
            second_form: ii,
        });
    }
    assemble(space, 1, ops, nodes, SurfaceFamily::Curve2d { coeffs })
}

fn check_res(res: usize, min: usize) -> Result<()> {
    if res < min {
        return Err(Error::InvalidGeometry(format!(
            "resolution {res} below the family minimum {min}"
        )));
    }
    Ok(())
}

impl SurfaceFamily {
    /// Closed-form boundary area where available.
    pub fn exact_area(&self, dim: usize) -> Option<f64> {
        use std::f64::consts::PI;
        match self {
            SurfaceFamily::EuclideanBall { r } => Some(match dim {
                2 => 4.0 * PI * r * r,
                1 => 2.0 * PI * r,
                _ => return None,
            }),
            SurfaceFamily::SphericalCap { k, r0 } => {
                let rho = (k.sqrt() * r0).sin() / k.sqrt();
                Some(match dim {
                    2 => 4.0 * PI * rho * rho,
                    1 => 2.0 * PI * rho,
                    _ => return None,
                })
            }
            SurfaceFamily::HyperbolicBall { k, r0 } => {
                let rho = (k.sqrt() * r0).sinh() / k.sqrt();
                Some(match dim {
                    2 => 4.0 * PI * rho * rho,
                    1 => 2.0 * PI * rho,
                    _ => return None,
                })
            }
            SurfaceFamily::SphericalTube { k, alpha } => {
                Some(4.0 * PI * PI * alpha.sin() * alpha.cos() / k)
            }
            _ => None,
        }
    }

    /// Constant mean curvature where the family has one.
    pub fn exact_mean_curvature(&self, dim: usize) -> Option<f64> {
        let d = dim as f64;
        match self {
            SurfaceFamily::EuclideanBall { r } => Some(d / r),
            SurfaceFamily::SphericalCap { k, r0 } => {
                let a = k.sqrt() * r0;
                Some(d * k.sqrt() * a.cos() / a.sin())
            }
            SurfaceFamily::HyperbolicBall { k, r0 } => {
                let a = k.sqrt() * r0;
                Some(d * k.sqrt() * a.cosh() / a.sinh())
            }
            SurfaceFamily::SphericalTube { k, alpha } => {
                Some(k.sqrt() * (alpha.cos() / alpha.sin() - alpha.sin() / alpha.cos()))
            }
            _ => None,
        }
    }
}
