//! Piecewise-linear conforming finite elements on the chart meshes: weighted
//! stiffness/mass assembly (the conformal factor carries the exact constant-
//! curvature metric), the Helmholtz Dirichlet extension, the first Dirichlet
//! eigenvalue, and gradient/Hessian recovery.

use nalgebra::{DMatrix, DVector};

use super::mesh::VolumeMesh;
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, smallest_eigenpairs, CsrMatrix, JacobiPrecond, LinearOp};
use crate::surface::BoundaryFunction;

/// A P1 field on a volume mesh.
#[derive(Debug, Clone)]
pub struct FemField {
    pub vertex_values: DVector<f64>,
}

impl FemField {
    pub fn new(mesh: &VolumeMesh, vertex_values: DVector<f64>) -> Result<Self> {
        if vertex_values.len() != mesh.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.vertices.len(),
                got: vertex_values.len(),
            });
        }
        Ok(FemField { vertex_values })
    }

    pub fn from_fn(mesh: &VolumeMesh, f: impl Fn(&DVector<f64>) -> f64) -> Self {
        FemField {
            vertex_values: DVector::from_fn(mesh.vertices.len(), |i, _| f(&mesh.vertices[i])),
        }
    }
}

/// Degree-2 quadrature points/weights in barycentric coordinates.
pub fn quadrature_for(dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    match dim {
        2 => {
            // Midpoint rule, exact for quadratics.
            let p = vec![
                vec![0.5, 0.5, 0.0],
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.0, 0.5],
            ];
            (p, vec![1.0 / 3.0; 3])
        }
        3 => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            let p = vec![
                vec![a, b, b, b],
                vec![b, a, b, b],
                vec![b, b, a, b],
                vec![b, b, b, a],
            ];
            (p, vec![0.25; 4])
        }
        _ => unreachable!("only 2- and 3-dimensional meshes are supported"),
    }
}

/// Per-cell P1 data: constant basis gradients (chart coordinates) and the
/// flat cell volume.
pub fn cell_gradients(mesh: &VolumeMesh, ci: usize) -> (Vec<DVector<f64>>, f64) {
    let d = mesh.dim;
    let cell = &mesh.cells[ci];
    let mut e = DMatrix::zeros(d, d);
    for j in 1..=d {
        let col = &mesh.vertices[cell[j]] - &mesh.vertices[cell[0]];
        for i in 0..d {
            e[(i, j - 1)] = col[i];
        }
    }
    let fact: f64 = (1..=d).map(|i| i as f64).product();
    let vol = e.determinant() / fact;
    let inv_t = e.try_inverse().expect("validated mesh").transpose();
    let mut grads = Vec::with_capacity(d + 1);
    let mut g0 = DVector::zeros(d);
    for j in 0..d {
        let g = inv_t.column(j).into_owned();
        g0 -= &g;
        grads.push(g);
    }
    grads.insert(0, g0);
    (grads, vol)
}

/// Assembles the weighted stiffness and consistent mass matrices:
/// `S_ij = int conf^{d-2} grad phi_i . grad phi_j dy`,
/// `M_ij = int conf^d phi_i phi_j dy`.
pub fn assemble(mesh: &VolumeMesh) -> (CsrMatrix, CsrMatrix) {
    let d = mesh.dim;
    let nv = mesh.vertices.len();
    let (qp, qw) = quadrature_for(d);
    let mut st = Vec::with_capacity(mesh.cells.len() * (d + 1) * (d + 1));
    let mut mt = Vec::with_capacity(st.capacity());
    for ci in 0..mesh.cells.len() {
        let cell = &mesh.cells[ci];
        let (grads, vol) = cell_gradients(mesh, ci);
        let mut stiff_w = 0.0;
        for (p, w) in qp.iter().zip(&qw) {
            let mut y = DVector::zeros(d);
            for (l, lam) in p.iter().enumerate() {
                y += &mesh.vertices[cell[l]] * *lam;
            }
            stiff_w += w * mesh.chart.conf(&y).powi(d as i32 - 2);
        }
        for i in 0..=d {
            for j in 0..=d {
                st.push((cell[i], cell[j], grads[i].dot(&grads[j]) * vol * stiff_w));
                let mut mass = 0.0;
                for (p, w) in qp.iter().zip(&qw) {
                    let mut y = DVector::zeros(d);
                    for (l, lam) in p.iter().enumerate() {
                        y += &mesh.vertices[cell[l]] * *lam;
                    }
                    mass += w * mesh.chart.conf(&y).powi(d as i32) * p[i] * p[j];
                }
                mt.push((cell[i], cell[j], mass * vol));
            }
        }
    }
    (
        CsrMatrix::from_triplets(nv, st),
        CsrMatrix::from_triplets(nv, mt),
    )
}

/// Restriction of a CSR matrix to given index sets (rows x cols).
fn restrict(m: &CsrMatrix, rows: &[usize], cols_map: &[isize]) -> CsrMatrix {
    let mut trip = Vec::new();
    for (new_r, &r) in rows.iter().enumerate() {
        for idx in m.row_ptr[r]..m.row_ptr[r + 1] {
            let c = m.cols[idx];
            if cols_map[c] >= 0 {
                trip.push((new_r, cols_map[c] as usize, m.vals[idx]));
            }
        }
    }
    CsrMatrix::from_triplets(rows.len(), trip)
}

fn interior_index(mesh: &VolumeMesh) -> (Vec<usize>, Vec<isize>) {
    let nv = mesh.vertices.len();
    let bset: std::collections::BTreeSet<usize> =
        mesh.boundary_vertices.iter().cloned().collect();
    let interior: Vec<usize> = (0..nv).filter(|v| !bset.contains(v)).collect();
    let mut map = vec![-1isize; nv];
    for (i, &v) in interior.iter().enumerate() {
        map[v] = i as isize;
    }
    (interior, map)
}

/// Solves the Dirichlet extension `Lap u + lambda u = 0`, `u = eta` on the
/// boundary. `eta` is indexed like `mesh.boundary_vertices`. The shift must
/// stay below (and separated from) the discrete Dirichlet spectrum.
pub fn solve_helmholtz_dirichlet(
    mesh: &VolumeMesh,
    lambda: f64,
    eta: &BoundaryFunction,
) -> Result<FemField> {
    if eta.values.len() != mesh.boundary_vertices.len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.boundary_vertices.len(),
            got: eta.values.len(),
        });
    }
    let (stiff, mass) = assemble(mesh);
    let (interior, map) = interior_index(mesh);
    let s_ii = restrict(&stiff, &interior, &map);
    let m_ii = restrict(&mass, &interior, &map);
    if lambda > 0.0 {
        // Near-resonance guard: the discrete spectrum must keep its distance.
        let sigma = 1.0 + lambda.abs();
        let (evs, _) = smallest_eigenpairs(&s_ii, &m_ii, 4, sigma, 0x0d15_ea5e, None)?;
        for ev in &evs {
            if (ev - lambda).abs() < 1e-6 {
                return Err(Error::NearResonance {
                    lambda,
                    dist: (ev - lambda).abs(),
                });
            }
        }
        if lambda >= evs[0] {
            return Err(Error::NearResonance {
                lambda,
                dist: lambda - evs[0],
            });
        }
    }
    // rhs = -(S - lambda M)_{I,Gamma} eta
    let nv = mesh.vertices.len();
    let mut full = DVector::zeros(nv);
    for (bi, &v) in mesh.boundary_vertices.iter().enumerate() {
        full[v] = eta.values[bi];
    }
    let mut s_full = DVector::zeros(nv);
    stiff.apply(&full, &mut s_full);
    let mut m_full = DVector::zeros(nv);
    mass.apply(&full, &mut m_full);
    let rhs = DVector::from_fn(interior.len(), |i, _| {
        -(s_full[interior[i]] - lambda * m_full[interior[i]])
    });
    let shifted = ShiftedPencil {
        s: &s_ii,
        m: &m_ii,
        lambda,
    };
    let mut diag = s_ii.diagonal();
    diag.axpy(-lambda, &m_ii.diagonal(), 1.0);
    let diag = diag.map(|v| if v <= 0.0 { 1.0 } else { v });
    let pre = JacobiPrecond::new(&diag);
    let maxit = 200 * ((interior.len() as f64).sqrt() as usize + 30);
    let (u_i, _) = cg_solve(&shifted, &rhs, &pre, 1e-12, maxit)?;
    // Discrete residual check.
    let mut res = DVector::zeros(interior.len());
    shifted.apply(&u_i, &mut res);
    res -= &rhs;
    if res.norm() > 1e-10 * rhs.norm().max(1e-300) {
        return Err(Error::NoConvergence(format!(
            "discrete Helmholtz residual {:.3e}",
            res.norm() / rhs.norm()
        )));
    }
    let mut values = full;
    for (i, &v) in interior.iter().enumerate() {
        values[v] = u_i[i];
    }
    Ok(FemField {
        vertex_values: values,
    })
}

struct ShiftedPencil<'a> {
    s: &'a CsrMatrix,
    m: &'a CsrMatrix,
    lambda: f64,
}

impl LinearOp for ShiftedPencil<'_> {
    fn dim(&self) -> usize {
        self.s.n
    }
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.s.apply(x, y);
        if self.lambda != 0.0 {
            let mut t = DVector::zeros(x.len());
            self.m.apply(x, &mut t);
            y.axpy(-self.lambda, &t, 1.0);
        }
    }
    fn diagonal(&self) -> DVector<f64> {
        let mut d = self.s.diagonal();
        d.axpy(-self.lambda, &self.m.diagonal(), 1.0);
        d
    }
}

/// Smallest Dirichlet eigenvalue of the Laplacian on the mesh.
pub fn dirichlet_lambda1(mesh: &VolumeMesh) -> Result<f64> {
    let (stiff, mass) = assemble(mesh);
    let (interior, map) = interior_index(mesh);
    let s_ii = restrict(&stiff, &interior, &map);
    let m_ii = restrict(&mass, &interior, &map);
    let scale = mesh.chart.chart_radius.max(0.1);
    let sigma = 1.0 / (scale * scale);
    let (evs, _) = smallest_eigenpairs(&s_ii, &m_ii, 1, sigma, 0x0d15_ea5e, None)?;
    Ok(evs[0])
}

/// Recovered nodal derivatives from local quadratic least-squares fits of
/// the vertex values over each vertex patch (1-ring, extended until the fit
/// is well-posed). The fit reproduces quadratics exactly, boundary vertices
/// included, which is what the Reilly volume terms need.
pub struct RecoveredDerivatives {
    pub gradients: Vec<DVector<f64>>,
    pub hessians: Vec<DMatrix<f64>>,
}

pub fn recover_derivatives(mesh: &VolumeMesh, u: &FemField) -> RecoveredDerivatives {
    let d = mesh.dim;
    let nv = mesh.vertices.len();
    let n_mono = 1 + d + d * (d + 1) / 2;
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for cell in &mesh.cells {
        for &a in cell {
            for &b in cell {
                if a != b && !neighbors[a].contains(&b) {
                    neighbors[a].push(b);
                }
            }
        }
    }
    let mut gradients = Vec::with_capacity(nv);
    let mut hessians = Vec::with_capacity(nv);
    for v in 0..nv {
        let mut patch: Vec<usize> = neighbors[v].clone();
        // Extend through rings until the quadratic fit has enough points.
        let mut ring = patch.clone();
        while patch.len() < n_mono + d {
            let mut next: Vec<usize> = Vec::new();
            for &w in &ring {
                for &x in &neighbors[w] {
                    if x != v && !patch.contains(&x) && !next.contains(&x) {
                        next.push(x);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            patch.extend(next.iter().cloned());
            ring = next;
        }
        let rows = patch.len() + 1;
        // Scale offsets to unit RMS for conditioning.
        let mut scale = 0.0f64;
        for &w in &patch {
            scale += (&mesh.vertices[w] - &mesh.vertices[v]).norm_squared();
        }
        let ell = (scale / patch.len() as f64).sqrt().max(1e-300);
        let mut a = DMatrix::zeros(rows, n_mono);
        let mut rhs = DVector::zeros(rows);
        for (r, &w) in std::iter::once(&v).chain(patch.iter()).enumerate() {
            let z = (&mesh.vertices[w] - &mesh.vertices[v]) / ell;
            let mut col = 0usize;
            a[(r, col)] = 1.0;
            col += 1;
            for i in 0..d {
                a[(r, col)] = z[i];
                col += 1;
            }
            for i in 0..d {
                for j in i..d {
                    a[(r, col)] = z[i] * z[j];
                    col += 1;
                }
            }
            rhs[r] = u.vertex_values[w];
        }
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &rhs;
        let sol = ata
            .lu()
            .solve(&atb)
            .unwrap_or_else(|| DVector::zeros(n_mono));
        let mut g = DVector::zeros(d);
        for i in 0..d {
            g[i] = sol[1 + i] / ell;
        }
        let mut h = DMatrix::zeros(d, d);
        let mut col = 1 + d;
        for i in 0..d {
            for j in i..d {
                let c = sol[col] / (ell * ell);
                if i == j {
                    h[(i, i)] = 2.0 * c;
                } else {
                    h[(i, j)] = c;
                    h[(j, i)] = c;
                }
                col += 1;
            }
        }
        gradients.push(g);
        hessians.push(h);
    }
    RecoveredDerivatives {
        gradients,
        hessians,
    }
}

/// Nodal gradients from the quadratic-fit recovery.
pub fn recover_gradients(mesh: &VolumeMesh, u: &FemField) -> Vec<DVector<f64>> {
    recover_derivatives(mesh, u).gradients
}

/// Constant per-cell flat Hessian: the mean of the vertex-fit Hessians.
pub fn recover_cell_hessians(
    mesh: &VolumeMesh,
    rec: &RecoveredDerivatives,
) -> Vec<DMatrix<f64>> {
    let d = mesh.dim;
    let mut out = Vec::with_capacity(mesh.cells.len());
    for cell in &mesh.cells {
        let mut h = DMatrix::zeros(d, d);
        for &v in cell {
            h += &rec.hessians[v];
        }
        out.push(h / (d + 1) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interior::mesh::{build_interior_mesh, template_text, InteriorDomain};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ball(level: usize) -> VolumeMesh {
        let dom = InteriorDomain::EuclideanBall { r: 1.0, dim: 3 };
        build_interior_mesh(dom, &template_text("ball3d").unwrap(), level).unwrap()
    }

    fn boundary_trace(mesh: &VolumeMesh, f: impl Fn(&DVector<f64>) -> f64) -> BoundaryFunction {
        BoundaryFunction::new(DVector::from_fn(mesh.boundary_vertices.len(), |i, _| {
            f(&mesh.vertices[mesh.boundary_vertices[i]])
        }))
    }

    #[test]
    fn harmonic_linear_is_exact() {
        let mesh = ball(2);
        let eta = boundary_trace(&mesh, |y| y[0]);
        let u = solve_helmholtz_dirichlet(&mesh, 0.0, &eta).unwrap();
        for (i, y) in mesh.vertices.iter().enumerate() {
            assert_abs_diff_eq!(u.vertex_values[i], y[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn harmonic_quadratic_second_order() {
        let exact = |y: &DVector<f64>| y[0] * y[0] - y[1] * y[1];
        let mut errs = Vec::new();
        for level in [2usize, 3] {
            let mesh = ball(level);
            let eta = boundary_trace(&mesh, exact);
            let u = solve_helmholtz_dirichlet(&mesh, 0.0, &eta).unwrap();
            let mut worst = 0.0f64;
            for (i, y) in mesh.vertices.iter().enumerate() {
                worst = worst.max((u.vertex_values[i] - exact(y)).abs());
            }
            errs.push(worst);
        }
        assert!(
            errs[1] < 0.45 * errs[0],
            "expected ~O(h^2) decay, got {errs:?}"
        );
    }

    #[test]
    fn discrete_maximum_principle_on_disk() {
        // The hexagonal disk refinement keeps non-obtuse triangles, so the
        // lambda = 0 solve satisfies the discrete maximum principle.
        let dom = InteriorDomain::EuclideanBall { r: 1.0, dim: 2 };
        let mesh = build_interior_mesh(dom, &template_text("disk2d").unwrap(), 3).unwrap();
        let eta = boundary_trace(&mesh, |y| (3.0 * y[0] + 0.5 * y[1]).sin());
        let u = solve_helmholtz_dirichlet(&mesh, 0.0, &eta).unwrap();
        let bmin = eta.values.min();
        let bmax = eta.values.max();
        for v in u.vertex_values.iter() {
            assert!(*v >= bmin - 1e-10 && *v <= bmax + 1e-10);
        }
    }

    #[test]
    fn lambda1_unit_ball_from_above() {
        // lambda_1(B^3) = pi^2; conforming elements converge from above.
        let mut prev = f64::INFINITY;
        for level in [2usize, 3] {
            let mesh = ball(level);
            let l1 = dirichlet_lambda1(&mesh).unwrap();
            assert!(l1 >= PI * PI - 1e-9, "discrete lambda1 below the limit");
            assert!(l1 <= prev + 1e-12, "must be monotone under refinement");
            prev = l1;
        }
    }

    #[test]
    fn near_resonance_rejected() {
        let mesh = ball(2);
        let l1 = dirichlet_lambda1(&mesh).unwrap();
        let eta = boundary_trace(&mesh, |y| y[0]);
        match solve_helmholtz_dirichlet(&mesh, l1, &eta) {
            Err(Error::NearResonance { .. }) => {}
            other => panic!("expected near-resonance rejection, got {other:?}"),
        }
    }

    #[test]
    fn gradient_recovery_on_linear_field() {
        let mesh = ball(2);
        let u = FemField::from_fn(&mesh, |y| 2.0 * y[0] - y[2]);
        let rec = recover_derivatives(&mesh, &u);
        for g in &rec.gradients {
            assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(g[2], -1.0, epsilon = 1e-9);
        }
        let hess = recover_cell_hessians(&mesh, &rec);
        for h in &hess {
            assert!(h.norm() < 1e-8);
        }
    }
}
