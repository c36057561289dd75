//! Triangulated boundary surfaces: OFF input, cotangent-weight weak Laplacian
//! with lumped mass, per-face gradients, and quadric-fit curvature estimation.
//! All edge geometry uses the enclosing model's bilinear form, so the same
//! code serves Euclidean, spherical and hyperboloid ambients (chordal edges).

use nalgebra::{DMatrix, DVector};

use super::{BoundarySurface, SurfaceFamily, SurfaceRep, TriOps};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::spaceform::{AmbientVector, SpaceForm, SpaceFormKind};

/// Per-vertex analytic geometry supplied by callers that know the exact
/// boundary (catalog domains meshed for the interior checks).
pub struct AnalyticBoundary<'a> {
    /// Unit outward normal at a vertex position.
    pub normal: &'a dyn Fn(&AmbientVector) -> AmbientVector,
    /// Scalar II in a given orthonormal tangent basis.
    pub second_form: &'a dyn Fn(&AmbientVector, &[AmbientVector]) -> DMatrix<f64>,
}

/// Parses OFF text: `OFF`, counts line `nv nf ne`, vertex lines, then
/// triangle lines `3 i j k`. Vertex lines must carry exactly `coord_dim`
/// coordinates.
pub fn parse_off(text: &str, coord_dim: usize) -> Result<(Vec<AmbientVector>, Vec<[usize; 3]>)> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>());
    let header = tokens
        .next()
        .ok_or_else(|| Error::Parse("empty OFF file".into()))?;
    if header != "OFF" {
        return Err(Error::Parse(format!("expected OFF header, got '{header}'")));
    }
    let mut next_usize = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
    };
    let nv = next_usize("vertex count")?;
    let nf = next_usize("face count")?;
    let _ne = next_usize("edge count")?;
    let mut verts = Vec::with_capacity(nv);
    let mut rest: Vec<String> = tokens.collect();
    let mut cursor = 0usize;
    let mut take = |what: &str| -> Result<String> {
        let t = rest
            .get(cursor)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?;
        cursor += 1;
        Ok(t)
    };
    for i in 0..nv {
        let mut v = DVector::zeros(coord_dim);
        for c in 0..coord_dim {
            v[c] = take(&format!("coordinate {c} of vertex {i}"))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("vertex {i}: {e}")))?;
        }
        verts.push(v);
    }
    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let arity = take(&format!("arity of face {f}"))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("face {f}: {e}")))?;
        if arity != 3 {
            return Err(Error::Parse(format!(
                "face {f} has {arity} vertices; only triangles are supported"
            )));
        }
        let mut idx = [0usize; 3];
        for slot in &mut idx {
            *slot = take("face index")?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("face {f}: {e}")))?;
            if *slot >= nv {
                return Err(Error::Parse(format!("face {f} references vertex {slot}")));
            }
        }
        faces.push(idx);
    }
    let _ = rest.split_off(0);
    Ok((verts, faces))
}

/// Generalized cross product: the vector whose Euclidean dot with each row of
/// `rows` ((dim-1) x dim) vanishes, components from cofactor determinants.
fn generalized_cross(rows: &[AmbientVector], dim: usize) -> AmbientVector {
    debug_assert_eq!(rows.len(), dim - 1);
    let mut n = DVector::zeros(dim);
    for c in 0..dim {
        let mut minor = DMatrix::zeros(dim - 1, dim - 1);
        for (r, row) in rows.iter().enumerate() {
            let mut cc = 0;
            for col in 0..dim {
                if col != c {
                    minor[(r, cc)] = row[col];
                    cc += 1;
                }
            }
        }
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        n[c] = sign * minor.determinant();
    }
    n
}

/// Unit vector orthogonal (in the model's bilinear form) to the face edges
/// and, for curved models, to the quadric direction; oriented by the face
/// winding.
fn face_normal(
    space: &SpaceForm,
    e1: &AmbientVector,
    e2: &AmbientVector,
    base: &AmbientVector,
) -> Result<AmbientVector> {
    let dim = space.coord_dim();
    // Applying the signature matrix G to the rows turns G-orthogonality into
    // plain orthogonality, so the generalized cross product applies directly.
    let apply_g = |v: &AmbientVector| -> AmbientVector {
        let mut w = v.clone();
        if space.kind == SpaceFormKind::Hyperbolic {
            w[0] = -w[0];
        }
        w
    };
    let mut rows: Vec<AmbientVector> = vec![apply_g(e1), apply_g(e2)];
    if space.kind != SpaceFormKind::Euclidean {
        rows.push(apply_g(base));
    }
    let n = generalized_cross(&rows, dim);
    let nn = space.inner(&n, &n)?;
    if nn <= 0.0 {
        return Err(Error::InvalidGeometry(
            "face normal is not spacelike; degenerate face".into(),
        ));
    }
    let mut n = n / nn.sqrt();
    // Orient by the winding: det[e1, e2, n (, base)] > 0.
    let mut m = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        m[(c, 0)] = e1[c];
        m[(c, 1)] = e2[c];
        m[(c, 2)] = n[c];
        if dim == 4 {
            m[(c, 3)] = base[c];
        }
    }
    if m.determinant() < 0.0 {
        n = -n;
    }
    Ok(n)
}

/// Builds a triangulated `BoundarySurface`. Vertex normals and II come from
/// `analytic` when provided, otherwise from face-normal averaging and a local
/// quadric fit (tolerances are correspondingly loose).
pub fn build_triangulated(
    space: SpaceForm,
    vertices: Vec<AmbientVector>,
    faces: Vec<[usize; 3]>,
    analytic: Option<AnalyticBoundary<'_>>,
) -> Result<BoundarySurface> {
    let nv = vertices.len();
    if nv == 0 || faces.is_empty() {
        return Err(Error::InvalidGeometry("empty mesh".into()));
    }
    let mut vertices = vertices;
    for v in vertices.iter_mut() {
        let p = space.normalize_to_model(v)?;
        if (&p - &*v).norm() > 1e-6 * (1.0 + v.norm()) {
            return Err(Error::InvalidGeometry(
                "mesh vertex off the model quadric beyond tolerance".into(),
            ));
        }
        *v = p;
    }

    // Face geometry: metric areas, cot weights, oriented normals.
    let mut face_normals = Vec::with_capacity(faces.len());
    let mut face_areas = Vec::with_capacity(faces.len());
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(faces.len() * 9);
    let mut lumped = DVector::zeros(nv);
    for f in &faces {
        let [i, j, k] = *f;
        let e1 = &vertices[j] - &vertices[i];
        let e2 = &vertices[k] - &vertices[i];
        let g11 = space.inner(&e1, &e1)?;
        let g22 = space.inner(&e2, &e2)?;
        let g12 = space.inner(&e1, &e2)?;
        let cross_sq = g11 * g22 - g12 * g12;
        if !(cross_sq > 0.0) || g11 <= 0.0 || g22 <= 0.0 {
            return Err(Error::InvalidGeometry("degenerate or non-spacelike face".into()));
        }
        let area = 0.5 * cross_sq.sqrt();
        face_areas.push(area);
        face_normals.push(face_normal(&space, &e1, &e2, &vertices[i])?);
        for corner in 0..3 {
            lumped[f[corner]] += area / 3.0;
            // Cotangent opposite the edge (a, b) at corner c.
            let (a, b, c) = (f[corner], f[(corner + 1) % 3], f[(corner + 2) % 3]);
            let ea = &vertices[a] - &vertices[c];
            let eb = &vertices[b] - &vertices[c];
            let dot = space.inner(&ea, &eb)?;
            let na = space.inner(&ea, &ea)?;
            let nb = space.inner(&eb, &eb)?;
            let cross = (na * nb - dot * dot).max(1e-300).sqrt();
            let w = 0.5 * dot / cross;
            trip.push((a, a, w));
            trip.push((b, b, w));
            trip.push((a, b, -w));
            trip.push((b, a, -w));
        }
    }
    let stiffness = CsrMatrix::from_triplets(nv, trip);

    // Vertex normals.
    let mut normals: Vec<AmbientVector> = Vec::with_capacity(nv);
    if let Some(an) = &analytic {
        for v in &vertices {
            normals.push((an.normal)(v));
        }
    } else {
        let mut acc = vec![DVector::zeros(space.coord_dim()); nv];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                acc[v] += &face_normals[fi] * face_areas[fi];
            }
        }
        for (vi, mut n) in acc.into_iter().enumerate() {
            if space.kind != SpaceFormKind::Euclidean {
                // Keep the normal tangent to the model at the vertex.
                let x = &vertices[vi];
                let c = space.inner(&n, x)? / space.inner(x, x)?;
                n -= x * c;
            }
            let nn = space.inner(&n, &n)?;
            if nn <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "cannot orient vertex {vi} normal"
                )));
            }
            normals.push(n / nn.sqrt());
        }
    }

    // Orthonormal tangent basis per vertex (metric = identity).
    let mut tangents: Vec<Vec<AmbientVector>> = Vec::with_capacity(nv);
    for vi in 0..nv {
        let x = &vertices[vi];
        let mut basis: Vec<AmbientVector> = Vec::new();
        for c in 0..space.coord_dim() {
            if basis.len() == 2 {
                break;
            }
            let mut e = DVector::zeros(space.coord_dim());
            e[c] = 1.0;
            if space.kind != SpaceFormKind::Euclidean {
                let cc = space.inner(&e, x)? / space.inner(x, x)?;
                e -= x * cc;
            }
            let cn = space.inner(&e, &normals[vi])?;
            e -= &normals[vi] * cn;
            for b in &basis {
                let cb = space.inner(&e, b)?;
                e -= b * cb;
            }
            let nn = space.inner(&e, &e)?;
            if nn > 1e-10 {
                basis.push(e / nn.sqrt());
            }
        }
        if basis.len() != 2 {
            return Err(Error::InvalidGeometry(format!(
                "could not build tangent basis at vertex {vi}"
            )));
        }
        tangents.push(basis);
    }

    // Second fundamental form: analytic or quadric fit over the 1-ring.
    let mut neighbor_sets: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for f in &faces {
        for c in 0..3 {
            let (a, b) = (f[c], f[(c + 1) % 3]);
            if !neighbor_sets[a].contains(&b) {
                neighbor_sets[a].push(b);
            }
            if !neighbor_sets[b].contains(&a) {
                neighbor_sets[b].push(a);
            }
        }
    }
    let mut second_form = Vec::with_capacity(nv);
    let mut mean_curvature = Vec::with_capacity(nv);
    for vi in 0..nv {
        let ii = if let Some(an) = &analytic {
            (an.second_form)(&vertices[vi], &tangents[vi])
        } else {
            // Extend to the 2-ring when the stencil is thin.
            let mut ring: Vec<usize> = neighbor_sets[vi].clone();
            if ring.len() < 6 {
                let direct = ring.clone();
                for &w in &direct {
                    for &w2 in &neighbor_sets[w] {
                        if w2 != vi && !ring.contains(&w2) {
                            ring.push(w2);
                        }
                    }
                }
            }
            quadric_fit_ii(&space, &vertices, vi, &ring, &tangents[vi], &normals[vi])?
        };
        let h = ii.trace(); // orthonormal basis: trace_gamma = plain trace
        second_form.push(ii);
        mean_curvature.push(h);
    }

    let weights: Vec<f64> = lumped.iter().cloned().collect();
    let surface = BoundarySurface {
        space,
        dim: 2,
        positions: vertices,
        tangents,
        normals,
        metric: vec![DMatrix::identity(2, 2); nv],
        metric_inv: vec![DMatrix::identity(2, 2); nv],
        second_form,
        mean_curvature,
        weights,
        rep: SurfaceRep::Triangulated(TriOps {
            faces,
            stiffness,
            lumped_mass: lumped,
            edge_lengths_ok: true,
        }),
        family: SurfaceFamily::Mesh,
    };
    surface.validate()?;
    Ok(surface)
}

/// Least-squares quadric fit of neighbor offsets in the vertex frame; II in
/// our outward-normal convention is minus the fitted Hessian.
fn quadric_fit_ii(
    space: &SpaceForm,
    vertices: &[AmbientVector],
    vi: usize,
    ring: &[usize],
    basis: &[AmbientVector],
    normal: &AmbientVector,
) -> Result<DMatrix<f64>> {
    let m = ring.len();
    if m < 5 {
        return Err(Error::InvalidGeometry(format!(
            "vertex {vi} has only {m} fit neighbors"
        )));
    }
    let mut a = DMatrix::zeros(m, 5);
    let mut rhs = DVector::zeros(m);
    for (r, &w) in ring.iter().enumerate() {
        let d = &vertices[w] - &vertices[vi];
        let u = space.inner(&d, &basis[0])?;
        let v = space.inner(&d, &basis[1])?;
        let h = space.inner(&d, normal)?;
        a[(r, 0)] = 0.5 * u * u;
        a[(r, 1)] = u * v;
        a[(r, 2)] = 0.5 * v * v;
        a[(r, 3)] = u;
        a[(r, 4)] = v;
        rhs[r] = h;
    }
    let ata = a.transpose() * &a;
    let atb = a.transpose() * rhs;
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::InvalidGeometry(format!("quadric fit singular at vertex {vi}")))?;
    let mut ii = DMatrix::zeros(2, 2);
    ii[(0, 0)] = -sol[0];
    ii[(0, 1)] = -sol[1];
    ii[(1, 0)] = -sol[1];
    ii[(1, 1)] = -sol[2];
    Ok(ii)
}

/// Surface gradient on a triangulated surface: per-face gradients (Gram solve
/// in the face plane) averaged to vertices with area weights, expressed in the
/// vertex orthonormal tangent basis.
pub fn gradient(s: &BoundarySurface, values: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let SurfaceRep::Triangulated(ops) = &s.rep else {
        return Err(Error::InvalidInput("not a triangulated surface".into()));
    };
    let nv = s.node_count();
    let mut acc = vec![DVector::zeros(s.space.coord_dim()); nv];
    let mut wsum = vec![0.0f64; nv];
    for f in &ops.faces {
        let [i, j, k] = *f;
        let e1 = &s.positions[j] - &s.positions[i];
        let e2 = &s.positions[k] - &s.positions[i];
        let g11 = s.space.inner(&e1, &e1)?;
        let g22 = s.space.inner(&e2, &e2)?;
        let g12 = s.space.inner(&e1, &e2)?;
        let det = g11 * g22 - g12 * g12;
        let b1 = values[j] - values[i];
        let b2 = values[k] - values[i];
        let c1 = (g22 * b1 - g12 * b2) / det;
        let c2 = (-g12 * b1 + g11 * b2) / det;
        let g = &e1 * c1 + &e2 * c2;
        let area = 0.5 * det.max(0.0).sqrt();
        for &v in f {
            acc[v] += &g * area;
            wsum[v] += area;
        }
    }
    let mut out = Vec::with_capacity(nv);
    for vi in 0..nv {
        let g = &acc[vi] / wsum[vi].max(1e-300);
        // Components in the orthonormal tangent basis.
        let comps = DVector::from_fn(2, |i, _| s.space.inner(&g, &s.tangents[vi][i]).unwrap());
        out.push(comps);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Icosphere-ish mesh: start from an octahedron and refine by edge
    /// midpoint subdivision, projecting onto the unit sphere.
    pub(crate) fn octasphere(levels: usize) -> (Vec<AmbientVector>, Vec<[usize; 3]>) {
        let mut verts: Vec<AmbientVector> = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![-1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, -1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0, -1.0]),
        ];
        // Outward winding.
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        for _ in 0..levels {
            let mut midpoints = std::collections::HashMap::new();
            let mut new_faces = Vec::with_capacity(faces.len() * 4);
            for f in &faces {
                let mut mids = [0usize; 3];
                for c in 0..3 {
                    let (a, b) = (f[c].min(f[(c + 1) % 3]), f[c].max(f[(c + 1) % 3]));
                    mids[c] = *midpoints.entry((a, b)).or_insert_with(|| {
                        let m = (&verts[a] + &verts[b]) * 0.5;
                        let m = &m / m.norm();
                        verts.push(m);
                        verts.len() - 1
                    });
                }
                new_faces.push([f[0], mids[0], mids[2]]);
                new_faces.push([f[1], mids[1], mids[0]]);
                new_faces.push([f[2], mids[2], mids[1]]);
                new_faces.push([mids[0], mids[1], mids[2]]);
            }
            faces = new_faces;
        }
        (verts, faces)
    }

    #[test]
    fn off_round_trip() {
        let text = "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 2 3\n";
        let (v, f) = parse_off(text, 3).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(f, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(parse_off("NOFF\n", 3).is_err());
    }

    #[test]
    fn estimated_sphere_geometry() {
        let (v, f) = octasphere(4);
        let s = build_triangulated(SpaceForm::euclidean(3), v, f, None).unwrap();
        // Area loose (chordal underestimates), H estimate loose.
        let area = s.area();
        assert!(
            (area - 4.0 * std::f64::consts::PI).abs() < 0.05 * 4.0 * std::f64::consts::PI,
            "area {area}"
        );
        let mean_h = s.mean_curvature.iter().sum::<f64>() / s.node_count() as f64;
        assert!((mean_h - 2.0).abs() < 0.15, "mean H {mean_h}");
        // Outward normals.
        for p in 0..s.node_count() {
            assert!(s.normals[p].dot(&s.positions[p]) > 0.9);
        }
    }

    #[test]
    fn laplacian_of_coordinate_on_mesh_sphere() {
        let (v, f) = octasphere(5);
        let s = build_triangulated(SpaceForm::euclidean(3), v, f, None).unwrap();
        let x1 = super::super::BoundaryFunction::new(DVector::from_fn(s.node_count(), |p, _| {
            s.positions[p][0]
        }));
        let lap = s.laplacian(&x1).unwrap();
        // Mass-lumped cotangent Laplacian converges in L2 but not pointwise
        // at irregular-valence vertices.
        let err2 = s.integrate(&DVector::from_fn(s.node_count(), |p, _| {
            let r = lap[p] + 2.0 * s.positions[p][0];
            r * r
        }));
        let l2 = err2.max(0.0).sqrt();
        assert!(l2 < 0.1, "L2 residual {l2}");
        // Integral of a Laplacian vanishes on a closed surface.
        let total = s.integrate(&lap);
        assert!(total.abs() < 1e-10);
    }
}
