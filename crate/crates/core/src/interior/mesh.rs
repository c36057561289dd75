//! Volume meshes for the interior checks: simplex meshes of ball-type
//! domains in a conformal chart (identity for flat domains, stereographic /
//! Poincare for the curved ones), built by structured red refinement of
//! shipped template meshes with boundary vertices projected onto the true
//! boundary sphere.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spaceform::AmbientVector;

/// Conformal chart carrying the exact constant-curvature metric
/// `g = conf(y)^2 dy^2` with `conf = 2 / (1 + c |y|^2)` (curved) or 1 (flat).
#[derive(Debug, Clone, Copy)]
pub struct DomainChart {
    /// Signed curvature c of the space form (0, +k, -k).
    pub curvature: f64,
    /// Chart radius of the meshed ball.
    pub chart_radius: f64,
}

impl DomainChart {
    pub fn conf(&self, y: &DVector<f64>) -> f64 {
        if self.curvature == 0.0 {
            1.0
        } else {
            2.0 / (1.0 + self.curvature * y.norm_squared())
        }
    }

    /// Gradient of log conf.
    pub fn psi_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.curvature == 0.0 {
            DVector::zeros(y.len())
        } else {
            y * (-2.0 * self.curvature / (1.0 + self.curvature * y.norm_squared()))
        }
    }
}

/// The ball-type catalog domains the interior module can mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteriorDomain {
    EuclideanBall { r: f64, dim: usize },
    SphericalCap { k: f64, r0: f64, dim: usize },
    HyperbolicBall { k: f64, r0: f64, dim: usize },
}

impl InteriorDomain {
    pub fn dim(&self) -> usize {
        match self {
            InteriorDomain::EuclideanBall { dim, .. }
            | InteriorDomain::SphericalCap { dim, .. }
            | InteriorDomain::HyperbolicBall { dim, .. } => *dim,
        }
    }

    pub fn chart(&self) -> Result<DomainChart> {
        match *self {
            InteriorDomain::EuclideanBall { r, .. } => {
                if r <= 0.0 {
                    return Err(Error::InvalidGeometry("ball radius must be positive".into()));
                }
                Ok(DomainChart {
                    curvature: 0.0,
                    chart_radius: r,
                })
            }
            InteriorDomain::SphericalCap { k, r0, .. } => {
                let a = k.sqrt() * r0;
                if k <= 0.0 || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&a) || a == 0.0 {
                    return Err(Error::InvalidGeometry(
                        "cap needs k > 0 and sqrt(k) r0 in (0, pi/2] (up to the hemisphere)"
                            .into(),
                    ));
                }
                Ok(DomainChart {
                    curvature: k,
                    chart_radius: (a / 2.0).tan() / k.sqrt(),
                })
            }
            InteriorDomain::HyperbolicBall { k, r0, .. } => {
                if k <= 0.0 || r0 <= 0.0 {
                    return Err(Error::InvalidGeometry(
                        "hyperbolic ball needs k > 0 and r0 > 0".into(),
                    ));
                }
                let a = k.sqrt() * r0;
                Ok(DomainChart {
                    curvature: -k,
                    chart_radius: (a / 2.0).tanh() / k.sqrt(),
                })
            }
        }
    }

    /// Chart point to model coordinates (identity for flat domains,
    /// inverse stereographic / Poincare otherwise, matching the catalog
    /// embeddings: pole coordinate last for the sphere, first for the
    /// hyperboloid).
    pub fn embed(&self, y: &DVector<f64>) -> AmbientVector {
        match *self {
            InteriorDomain::EuclideanBall { .. } => y.clone(),
            InteriorDomain::SphericalCap { k, .. } => {
                let q = 1.0 + k * y.norm_squared();
                let mut x = DVector::zeros(y.len() + 1);
                for i in 0..y.len() {
                    x[i] = 2.0 * y[i] / q;
                }
                x[y.len()] = (2.0 - q) / (k.sqrt() * q);
                x
            }
            InteriorDomain::HyperbolicBall { k, .. } => {
                let q = 1.0 - k * y.norm_squared();
                let mut x = DVector::zeros(y.len() + 1);
                x[0] = (2.0 - q) / (k.sqrt() * q);
                for i in 0..y.len() {
                    x[i + 1] = 2.0 * y[i] / q;
                }
                x
            }
        }
    }

    /// Outward unit normal (in the model) at an embedded boundary point.
    pub fn boundary_normal(&self, x: &AmbientVector) -> AmbientVector {
        match *self {
            InteriorDomain::EuclideanBall { .. } => x / x.norm(),
            InteriorDomain::SphericalCap { k, r0, .. } => {
                let a = k.sqrt() * r0;
                let d = x.len() - 1;
                let rho = a.sin() / k.sqrt();
                let mut nu = DVector::zeros(x.len());
                for i in 0..d {
                    nu[i] = a.cos() * x[i] / rho;
                }
                nu[d] = -a.sin();
                nu
            }
            InteriorDomain::HyperbolicBall { k, r0, .. } => {
                let a = k.sqrt() * r0;
                let rho = a.sinh() / k.sqrt();
                let mut nu = DVector::zeros(x.len());
                nu[0] = a.sinh();
                for i in 1..x.len() {
                    nu[i] = a.cosh() * x[i] / rho;
                }
                nu
            }
        }
    }

    /// Principal curvature of the (umbilic) boundary sphere.
    pub fn boundary_kappa(&self) -> f64 {
        match *self {
            InteriorDomain::EuclideanBall { r, .. } => 1.0 / r,
            InteriorDomain::SphericalCap { k, r0, .. } => {
                let a = k.sqrt() * r0;
                k.sqrt() * a.cos() / a.sin()
            }
            InteriorDomain::HyperbolicBall { k, r0, .. } => {
                let a = k.sqrt() * r0;
                k.sqrt() * a.cosh() / a.sinh()
            }
        }
    }

    /// The space form the domain lives in.
    pub fn space(&self) -> Result<crate::spaceform::SpaceForm> {
        match *self {
            InteriorDomain::EuclideanBall { dim, .. } => {
                Ok(crate::spaceform::SpaceForm::euclidean(dim))
            }
            InteriorDomain::SphericalCap { k, dim, .. } => {
                crate::spaceform::SpaceForm::spherical(dim, k)
            }
            InteriorDomain::HyperbolicBall { k, dim, .. } => {
                crate::spaceform::SpaceForm::hyperbolic(dim, k)
            }
        }
    }
}

/// Simplex mesh of a chart ball with the conformal metric attached.
#[derive(Debug, Clone)]
pub struct VolumeMesh {
    pub domain: InteriorDomain,
    pub chart: DomainChart,
    pub dim: usize,
    pub vertices: Vec<DVector<f64>>,
    /// d+1 vertex ids per cell, positively oriented.
    pub cells: Vec<Vec<usize>>,
    /// Boundary faces (d ids each) with the owning cell.
    pub boundary_faces: Vec<(Vec<usize>, usize)>,
    /// Sorted boundary vertex ids.
    pub boundary_vertices: Vec<usize>,
    /// Refinement level this mesh was built at.
    pub level: usize,
}

/// Text template format: `rbl-mesh 1`, `dim D`, `vertices N`, N coordinate
/// lines, `cells M`, M index lines.
pub fn parse_template(text: &str) -> Result<(usize, Vec<DVector<f64>>, Vec<Vec<usize>>)> {
    let mut tok = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>());
    let magic = tok.next().ok_or_else(|| Error::Parse("empty mesh template".into()))?;
    let version = tok.next().unwrap_or_default();
    if magic != "rbl-mesh" || version != "1" {
        return Err(Error::Parse("expected 'rbl-mesh 1' header".into()));
    }
    let expect = |tok: &mut dyn Iterator<Item = String>, what: &str| -> Result<String> {
        tok.next().ok_or_else(|| Error::Parse(format!("missing {what}")))
    };
    if expect(&mut tok, "dim keyword")? != "dim" {
        return Err(Error::Parse("expected 'dim'".into()));
    }
    let dim: usize = expect(&mut tok, "dimension")?
        .parse()
        .map_err(|e| Error::Parse(format!("bad dim: {e}")))?;
    if expect(&mut tok, "vertices keyword")? != "vertices" {
        return Err(Error::Parse("expected 'vertices'".into()));
    }
    let nv: usize = expect(&mut tok, "vertex count")?
        .parse()
        .map_err(|e| Error::Parse(format!("bad vertex count: {e}")))?;
    let mut verts = Vec::with_capacity(nv);
    for i in 0..nv {
        let mut v = DVector::zeros(dim);
        for c in 0..dim {
            v[c] = expect(&mut tok, &format!("vertex {i} coordinate {c}"))?
                .parse()
                .map_err(|e| Error::Parse(format!("vertex {i}: {e}")))?;
        }
        verts.push(v);
    }
    if expect(&mut tok, "cells keyword")? != "cells" {
        return Err(Error::Parse("expected 'cells'".into()));
    }
    let nc: usize = expect(&mut tok, "cell count")?
        .parse()
        .map_err(|e| Error::Parse(format!("bad cell count: {e}")))?;
    let mut cells = Vec::with_capacity(nc);
    for i in 0..nc {
        let mut cell = Vec::with_capacity(dim + 1);
        for _ in 0..=dim {
            let id: usize = expect(&mut tok, &format!("cell {i} index"))?
                .parse()
                .map_err(|e| Error::Parse(format!("cell {i}: {e}")))?;
            if id >= nv {
                return Err(Error::Parse(format!("cell {i} references vertex {id}")));
            }
            cell.push(id);
        }
        cells.push(cell);
    }
    Ok((dim, verts, cells))
}

fn signed_volume(verts: &[DVector<f64>], cell: &[usize]) -> f64 {
    let d = verts[cell[0]].len();
    let mut e = DMatrix::zeros(d, d);
    for j in 1..=d {
        let col = &verts[cell[j]] - &verts[cell[0]];
        for i in 0..d {
            e[(i, j - 1)] = col[i];
        }
    }
    let fact: f64 = (1..=d).map(|i| i as f64).product();
    e.determinant() / fact
}

fn orient_cells(verts: &[DVector<f64>], cells: &mut [Vec<usize>]) -> Result<()> {
    for cell in cells.iter_mut() {
        let v = signed_volume(verts, cell);
        if v == 0.0 {
            return Err(Error::InvalidGeometry("degenerate cell in mesh".into()));
        }
        if v < 0.0 {
            cell.swap(0, 1);
        }
    }
    Ok(())
}

/// One uniform red refinement step: each edge gains a midpoint; triangles
/// split into 4, tetrahedra into 8 (Bey's rule with the shortest interior
/// diagonal).
fn refine_once(
    verts: &mut Vec<DVector<f64>>,
    cells: &[Vec<usize>],
    dim: usize,
) -> Vec<Vec<usize>> {
    use std::collections::HashMap;
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, verts: &mut Vec<DVector<f64>>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let m = (&verts[a] + &verts[b]) * 0.5;
            verts.push(m);
            verts.len() - 1
        })
    };
    let mut out = Vec::with_capacity(cells.len() * if dim == 2 { 4 } else { 8 });
    for cell in cells {
        if dim == 2 {
            let [a, b, c] = [cell[0], cell[1], cell[2]];
            let ab = mid(a, b, verts);
            let bc = mid(b, c, verts);
            let ca = mid(c, a, verts);
            out.push(vec![a, ab, ca]);
            out.push(vec![b, bc, ab]);
            out.push(vec![c, ca, bc]);
            out.push(vec![ab, bc, ca]);
        } else {
            let [a, b, c, d] = [cell[0], cell[1], cell[2], cell[3]];
            let m01 = mid(a, b, verts);
            let m02 = mid(a, c, verts);
            let m03 = mid(a, d, verts);
            let m12 = mid(b, c, verts);
            let m13 = mid(b, d, verts);
            let m23 = mid(c, d, verts);
            out.push(vec![a, m01, m02, m03]);
            out.push(vec![b, m01, m12, m13]);
            out.push(vec![c, m02, m12, m23]);
            out.push(vec![d, m03, m13, m23]);
            // Interior octahedron: split along the shortest diagonal.
            let diags = [(m01, m23), (m02, m13), (m03, m12)];
            let (da, db) = *diags
                .iter()
                .min_by(|x, y| {
                    let lx = (&verts[x.0] - &verts[x.1]).norm();
                    let ly = (&verts[y.0] - &verts[y.1]).norm();
                    lx.partial_cmp(&ly).unwrap()
                })
                .unwrap();
            // Equatorial ring ordered so consecutive members share a parent
            // vertex (adjacent octahedron corners).
            let ring: [usize; 4] = match (da, db) {
                (x, y) if (x, y) == (m01, m23) => [m02, m03, m13, m12],
                (x, y) if (x, y) == (m02, m13) => [m01, m03, m23, m12],
                _ => [m01, m02, m23, m13],
            };
            for i in 0..4 {
                out.push(vec![da, db, ring[i], ring[(i + 1) % 4]]);
            }
        }
    }
    out
}

fn extract_boundary(
    cells: &[Vec<usize>],
    dim: usize,
) -> (Vec<(Vec<usize>, usize)>, Vec<usize>) {
    use std::collections::HashMap;
    let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
    for (ci, cell) in cells.iter().enumerate() {
        for skip in 0..=dim {
            let mut face: Vec<usize> = cell
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| *v)
                .collect();
            let orig = face.clone();
            face.sort_unstable();
            count
                .entry(face)
                .and_modify(|e| e.0 += 1)
                .or_insert((1, {
                    let mut o = orig;
                    o.push(ci);
                    o
                }));
        }
    }
    let mut faces = Vec::new();
    let mut bset = std::collections::BTreeSet::new();
    for (_, (cnt, data)) in count {
        if cnt == 1 {
            let ci = *data.last().unwrap();
            let face = data[..data.len() - 1].to_vec();
            for &v in &face {
                bset.insert(v);
            }
            faces.push((face, ci));
        }
    }
    faces.sort();
    (faces, bset.into_iter().collect())
}

/// Builds the mesh of a catalog domain at the given refinement level from a
/// template (scaled to the chart radius, boundary vertices projected onto the
/// chart sphere after every refinement step).
pub fn build_interior_mesh(
    domain: InteriorDomain,
    template_text: &str,
    level: usize,
) -> Result<VolumeMesh> {
    let chart = domain.chart()?;
    let (dim, mut verts, mut cells) = parse_template(template_text)?;
    if dim != domain.dim() {
        return Err(Error::InconsistentMesh(format!(
            "template dimension {dim} does not match domain dimension {}",
            domain.dim()
        )));
    }
    for v in verts.iter_mut() {
        *v *= chart.chart_radius;
    }
    let project = |verts: &mut Vec<DVector<f64>>, bverts: &[usize]| {
        for &b in bverts {
            let n = verts[b].norm();
            if n > 0.0 {
                verts[b] *= chart.chart_radius / n;
            }
        }
    };
    let (_, bverts) = extract_boundary(&cells, dim);
    project(&mut verts, &bverts);
    for _ in 0..level {
        cells = refine_once(&mut verts, &cells, dim);
        let (_, bverts) = extract_boundary(&cells, dim);
        project(&mut verts, &bverts);
    }
    orient_cells(&verts, &mut cells)?;
    let (boundary_faces, boundary_vertices) = extract_boundary(&cells, dim);
    let mesh = VolumeMesh {
        domain,
        chart,
        dim,
        vertices: verts,
        cells,
        boundary_faces,
        boundary_vertices,
        level,
    };
    mesh.validate()?;
    Ok(mesh)
}

impl VolumeMesh {
    pub fn validate(&self) -> Result<()> {
        for (ci, cell) in self.cells.iter().enumerate() {
            if signed_volume(&self.vertices, cell) <= 0.0 {
                return Err(Error::InconsistentMesh(format!(
                    "non-positive volume in cell {ci}"
                )));
            }
        }
        if self.boundary_vertices.is_empty() {
            return Err(Error::InconsistentMesh("mesh has no boundary".into()));
        }
        Ok(())
    }

    pub fn cell_volume(&self, ci: usize) -> f64 {
        signed_volume(&self.vertices, &self.cells[ci])
    }

    /// Largest metric edge length.
    pub fn mesh_size(&self) -> f64 {
        let mut h = 0.0f64;
        for cell in &self.cells {
            for i in 0..cell.len() {
                for j in (i + 1)..cell.len() {
                    let a = &self.vertices[cell[i]];
                    let b = &self.vertices[cell[j]];
                    let mid = (a + b) * 0.5;
                    h = h.max((a - b).norm() * self.chart.conf(&mid));
                }
            }
        }
        h
    }

    /// Metric volume of the domain (for sanity tests).
    pub fn metric_volume(&self) -> f64 {
        let d = self.dim as i32;
        let mut vol = 0.0;
        for (ci, cell) in self.cells.iter().enumerate() {
            let flat = self.cell_volume(ci);
            // One-point centroid rule is enough for sanity checks.
            let mut centroid = DVector::zeros(self.dim);
            for &v in cell {
                centroid += &self.vertices[v];
            }
            centroid /= (self.dim + 1) as f64;
            vol += flat * self.chart.conf(&centroid).powi(d);
        }
        vol
    }
}

/// Shipped template meshes; `RBL_DATA_DIR` overrides the location of the
/// template files, otherwise the compiled-in copies are used.
pub fn template_text(name: &str) -> Result<String> {
    if let Ok(dir) = std::env::var("RBL_DATA_DIR") {
        let path = std::path::Path::new(&dir).join(format!("{name}.mesh"));
        return Ok(std::fs::read_to_string(&path)?);
    }
    match name {
        "ball3d" => Ok(include_str!("../../data/ball3d.mesh").to_owned()),
        "disk2d" => Ok(include_str!("../../data/disk2d.mesh").to_owned()),
        other => Err(Error::InvalidInput(format!("unknown template '{other}'"))),
    }
}

/// Template name for a domain.
pub fn template_for(domain: &InteriorDomain) -> &'static str {
    if domain.dim() == 2 {
        "disk2d"
    } else {
        "ball3d"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn ball_mesh_volume_converges() {
        let dom = InteriorDomain::EuclideanBall { r: 1.0, dim: 3 };
        let text = template_text("ball3d").unwrap();
        let mut prev_err = f64::INFINITY;
        for level in [1usize, 2, 3] {
            let mesh = build_interior_mesh(dom, &text, level).unwrap();
            let err = (mesh.metric_volume() - 4.0 * PI / 3.0).abs();
            assert!(err < prev_err, "volume error must shrink");
            prev_err = err;
        }
        let mesh = build_interior_mesh(dom, &text, 3).unwrap();
        assert!((mesh.metric_volume() - 4.0 * PI / 3.0).abs() < 0.15);
    }

    #[test]
    fn hemisphere_mesh_volume() {
        // Hemisphere of S^3 (k=1): volume = pi^2 (half of 2 pi^2).
        let dom = InteriorDomain::SphericalCap {
            k: 1.0,
            r0: PI / 2.0,
            dim: 3,
        };
        let text = template_text("ball3d").unwrap();
        let mesh = build_interior_mesh(dom, &text, 3).unwrap();
        let exact = PI * PI;
        assert!(
            (mesh.metric_volume() - exact).abs() < 0.05 * exact,
            "got {} want {exact}",
            mesh.metric_volume()
        );
    }

    #[test]
    fn disk_mesh_and_embedding() {
        let dom = InteriorDomain::HyperbolicBall {
            k: 1.0,
            r0: 0.8,
            dim: 2,
        };
        let text = template_text("disk2d").unwrap();
        let mesh = build_interior_mesh(dom, &text, 3).unwrap();
        // Hyperbolic disk area: 2 pi (cosh r0 - 1).
        let exact = 2.0 * PI * (0.8f64.cosh() - 1.0);
        assert!((mesh.metric_volume() - exact).abs() < 0.02 * exact);
        // Boundary vertices embed onto the geodesic circle.
        let space = dom.space().unwrap();
        for &b in &mesh.boundary_vertices {
            let x = dom.embed(&mesh.vertices[b]);
            space.on_model(&x).unwrap();
            // Geodesic distance from the pole = r0: cosh d = x0 (k = 1).
            assert_abs_diff_eq!(x[0], 0.8f64.cosh(), epsilon = 1e-12);
        }
    }

    #[test]
    fn template_parse_errors() {
        assert!(parse_template("garbage").is_err());
        assert!(parse_template("rbl-mesh 2\ndim 3").is_err());
    }
}
