//! Boundary functionals A, B, C, the quadratic form Q_eta(t), the main
//! boundary inequality, the two-case dichotomy, and the eigenvalue-band
//! estimates they imply for convex boundary components.



use crate::error::{Error, Result};
use crate::linalg::min_generalized_eigenvalue;
use crate::surface::{BoundaryFunction, BoundarySurface};

/// Default floor enforced on the mean curvature: the H >= 0 version of the
/// inequality carries an exclusion set that a quadrature cannot represent
/// robustly, so geometries with H below this floor are out of numerical
/// scope.
pub const DEFAULT_H_MIN: f64 = 1e-8;

/// Result of one functional/inequality evaluation.
#[derive(Debug, Clone)]
pub struct FunctionalReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t_used: f64,
    pub q_value: f64,
    /// Integral of II(grad eta, grad eta).
    pub lhs: f64,
    /// Integral of (Lap eta + t eta)^2 / H.
    pub rhs: f64,
    pub margin: f64,
    pub case1_holds: bool,
    pub case2_bound: Option<f64>,
    pub passed: bool,
    pub equality: bool,
    pub excluded_fraction: f64,
    pub tol_num: f64,
}

/// The three boundary functionals:
/// `A = int eta^2 / H`, `B = int eta Lap eta / H`,
/// `C = int [(Lap eta)^2 / H - II(grad eta, grad eta)]`.
pub fn functionals_abc(
    s: &BoundarySurface,
    eta: &BoundaryFunction,
    h_min: f64,
) -> Result<(f64, f64, f64)> {
    check_mean_convex(s, h_min)?;
    if eta.norm_l2(s) <= 0.0 {
        return Err(Error::InvalidInput("trivial test function".into()));
    }
    let lap = s.laplacian(eta)?;
    let grad = s.gradient(eta)?;
    let n = s.node_count();
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for p in 0..n {
        let h = s.mean_curvature[p];
        let w = s.weights[p];
        let e = eta.values[p];
        a += w * e * e / h;
        b += w * e * lap[p] / h;
        c += w * (lap[p] * lap[p] / h - s.ii_quadratic(p, &grad[p], &grad[p]));
    }
    Ok((a, b, c))
}

fn check_mean_convex(s: &BoundarySurface, h_min: f64) -> Result<()> {
    for (p, h) in s.mean_curvature.iter().enumerate() {
        if *h < h_min {
            return Err(Error::UnsupportedGeometry(format!(
                "mean curvature {h} below the floor {h_min} at node {p}"
            )));
        }
    }
    Ok(())
}

/// Verifies `int II(grad eta, grad eta) <= int (Lap eta + t eta)^2 / H` for
/// an admissible shift `t <= (n-1) k / 2`. With H > 0 enforced the exclusion
/// set is empty and the simplified form applies. The margin must exceed
/// `-tol_num`; `|margin| <= tol_num` raises the equality flag (an annotation,
/// never a rigidity claim about the interior).
pub fn check_main_inequality(
    s: &BoundarySurface,
    eta: &BoundaryFunction,
    t: f64,
    k: f64,
    tol_num: f64,
    h_min: f64,
) -> Result<FunctionalReport> {
    let n_minus_1 = s.dim as f64;
    let t_cap = 0.5 * n_minus_1 * k;
    if t > t_cap + 1e-12 * (1.0 + t_cap.abs()) {
        return Err(Error::InvalidInput(format!(
            "t = {t} exceeds the admissible bound (n-1)k/2 = {t_cap}"
        )));
    }
    let (a, b, c) = functionals_abc(s, eta, h_min)?;
    let lap = s.laplacian(eta)?;
    let grad = s.gradient(eta)?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for p in 0..s.node_count() {
        let w = s.weights[p];
        lhs += w * s.ii_quadratic(p, &grad[p], &grad[p]);
        let r = lap[p] + t * eta.values[p];
        rhs += w * r * r / s.mean_curvature[p];
    }
    let margin = rhs - lhs;
    Ok(FunctionalReport {
        a,
        b,
        c,
        t_used: t,
        q_value: a * t * t + 2.0 * b * t + c,
        lhs,
        rhs,
        margin,
        case1_holds: b * b <= a * c,
        case2_bound: None,
        passed: margin >= -tol_num,
        equality: margin.abs() <= tol_num,
        excluded_fraction: 0.0,
        tol_num,
    })
}

/// The dichotomy: either `(B/A)^2 <= C/A`, or the Ricci bound obeys
/// `K/2 = (n-1)k/2 <= -B/A - sqrt((B/A)^2 - C/A)`.
pub fn dichotomy(
    s: &BoundarySurface,
    eta: &BoundaryFunction,
    k: f64,
    tol: f64,
    h_min: f64,
) -> Result<FunctionalReport> {
    let (a, b, c) = functionals_abc(s, eta, h_min)?;
    let ba = b / a;
    let ca = c / a;
    let case1 = ba * ba <= ca + 1e-12 * (1.0 + ba * ba + ca.abs());
    let half_k = 0.5 * s.dim as f64 * k;
    let (case2_bound, passed) = if case1 {
        (None, true)
    } else {
        let bound = -ba - (ba * ba - ca).sqrt();
        (Some(bound), half_k <= bound + tol)
    };
    Ok(FunctionalReport {
        a,
        b,
        c,
        t_used: half_k,
        q_value: a * half_k * half_k + 2.0 * b * half_k + c,
        lhs: 0.0,
        rhs: 0.0,
        margin: case2_bound.map(|bd| bd - half_k).unwrap_or(0.0),
        case1_holds: case1,
        case2_bound,
        passed,
        equality: false,
        excluded_fraction: 0.0,
        tol_num: tol,
    })
}

/// Outcome of the eigenvalue-band check.
#[derive(Debug, Clone)]
pub struct EigenBandReport {
    pub band: (f64, f64),
    /// (eigenvalue, admissible) for each positive eigenvalue supplied.
    pub eigenvalues: Vec<(f64, bool)>,
    /// When k >= 0: does the first nonzero eigenvalue reach the right
    /// endpoint bound?
    pub lambda1_bound_ok: Option<bool>,
    pub passed: bool,
}

/// Checks that no positive Laplace eigenvalue falls inside the open interval
/// `((n-1)/4 (kappa - sqrt(kappa^2+2k))^2, (n-1)/4 (kappa + sqrt(kappa^2+2k))^2)`,
/// and for k >= 0 that the first nonzero eigenvalue reaches the right
/// endpoint. `kappa` must be a valid lower bound II >= kappa gamma, verified
/// nodewise against the stored second fundamental form.
pub fn eigen_band_check(
    spectrum: &[f64],
    s: &BoundarySurface,
    kappa: f64,
    k: f64,
    tol: f64,
) -> Result<EigenBandReport> {
    if kappa <= 0.0 {
        return Err(Error::InvalidInput("kappa must be positive".into()));
    }
    if kappa * kappa + 2.0 * k <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "kappa^2 + 2k = {} must be positive",
            kappa * kappa + 2.0 * k
        )));
    }
    for p in 0..s.node_count() {
        let min_ev = min_generalized_eigenvalue(&s.second_form[p], &s.metric[p])?;
        if min_ev < kappa - 1e-10 {
            return Err(Error::InvalidInput(format!(
                "kappa = {kappa} is not a valid II lower bound: min eigenvalue {min_ev} at node {p}"
            )));
        }
    }
    let n_minus_1 = s.dim as f64;
    let root = (kappa * kappa + 2.0 * k).sqrt();
    let left = 0.25 * n_minus_1 * (kappa - root) * (kappa - root);
    let right = 0.25 * n_minus_1 * (kappa + root) * (kappa + root);
    let zero_cut = 1e-9 * right.max(1.0);
    let mut rows = Vec::new();
    let mut passed = true;
    let mut lambda1: Option<f64> = None;
    for &l in spectrum {
        if l <= zero_cut {
            continue;
        }
        if lambda1.is_none() {
            lambda1 = Some(l);
        }
        let inside = l - left > tol && right - l > tol;
        if inside {
            passed = false;
        }
        rows.push((l, !inside));
    }
    let lambda1_bound_ok = if k >= 0.0 {
        let ok = lambda1.map(|l| l >= right - tol).unwrap_or(false);
        if !ok {
            passed = false;
        }
        Some(ok)
    } else {
        None
    };
    Ok(EigenBandReport {
        band: (left, right),
        eigenvalues: rows,
        lambda1_bound_ok,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::catalog::build_catalog_surface;
    use crate::surface::eigen::eigen_decomposition;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn coord_field(s: &BoundarySurface, c: usize) -> BoundaryFunction {
        BoundaryFunction::new(DVector::from_fn(s.node_count(), |p, _| s.positions[p][c]))
    }

    #[test]
    fn abc_on_unit_sphere_coordinate() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 32, 3).unwrap();
        let eta = coord_field(&s, 0);
        let (a, b, c) = functionals_abc(&s, &eta, DEFAULT_H_MIN).unwrap();
        assert_abs_diff_eq!(a, 2.0 * PI / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b, -4.0 * PI / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn abc_constant_field() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 16, 3).unwrap();
        let eta = BoundaryFunction::constant(&s, 3.0);
        let (a, b, c) = functionals_abc(&s, &eta, DEFAULT_H_MIN).unwrap();
        assert_abs_diff_eq!(a, 9.0 * s.area() / 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn abc_rejects_trivial_and_nonconvex() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 16, 3).unwrap();
        let zero = BoundaryFunction::new(DVector::zeros(s.node_count()));
        assert!(matches!(
            functionals_abc(&s, &zero, DEFAULT_H_MIN),
            Err(Error::InvalidInput(_))
        ));
        // Great-sphere cap limit: H = 0 violates the floor.
        let (flat, _) =
            build_catalog_surface("spherical_cap", &[1.0, PI / 2.0], 16, 3).unwrap();
        let eta = coord_field(&flat, 0);
        assert!(matches!(
            functionals_abc(&flat, &eta, DEFAULT_H_MIN),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn main_inequality_equality_case() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 48, 3).unwrap();
        let eta = coord_field(&s, 0);
        let rep = check_main_inequality(&s, &eta, 0.0, 0.0, 1e-6, DEFAULT_H_MIN).unwrap();
        assert_abs_diff_eq!(rep.lhs, 8.0 * PI / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rep.rhs, 8.0 * PI / 3.0, epsilon = 1e-6);
        assert!(rep.passed && rep.equality);

        // t = -1 is admissible for k = 0 and strictly inside.
        let rep = check_main_inequality(&s, &eta, -1.0, 0.0, 1e-6, DEFAULT_H_MIN).unwrap();
        assert_abs_diff_eq!(rep.rhs, 6.0 * PI, epsilon = 1e-5);
        assert!(rep.margin > 1.0);

        // t above the admissible ray is rejected.
        assert!(check_main_inequality(&s, &eta, 0.5, 0.0, 1e-6, DEFAULT_H_MIN).is_err());
    }

    #[test]
    fn main_inequality_constant_field() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 16, 3).unwrap();
        let eta = BoundaryFunction::constant(&s, 1.0);
        let rep = check_main_inequality(&s, &eta, 0.0, 0.0, 1e-8, DEFAULT_H_MIN).unwrap();
        assert_abs_diff_eq!(rep.lhs, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.rhs, 0.0, epsilon = 1e-12);
        assert!(rep.passed && rep.equality);
    }

    #[test]
    fn dichotomy_unit_sphere_coordinate() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 32, 3).unwrap();
        let eta = coord_field(&s, 0);
        let rep = dichotomy(&s, &eta, 0.0, 1e-6, DEFAULT_H_MIN).unwrap();
        assert!(!rep.case1_holds);
        let bound = rep.case2_bound.unwrap();
        assert_abs_diff_eq!(bound, 0.0, epsilon = 1e-6);
        assert!(rep.passed);
    }

    #[test]
    fn dichotomy_constant_holds_case1() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 16, 3).unwrap();
        let eta = BoundaryFunction::constant(&s, 2.0);
        let rep = dichotomy(&s, &eta, 0.0, 1e-8, DEFAULT_H_MIN).unwrap();
        assert!(rep.case1_holds && rep.passed);
    }

    #[test]
    fn dichotomy_spherical_cap_eigenfunction() {
        // Cap r0 = pi/3 in S^3 (k = 1): with the first nonzero eigenfunction,
        // case 2 gives the bound 8/3 - 4/3 = 4/3 >= K/2 = 1.
        let (s, _) = build_catalog_surface("spherical_cap", &[1.0, PI / 3.0], 24, 3).unwrap();
        let pairs = eigen_decomposition(&s, 2).unwrap();
        let (lam, eta) = &pairs[1];
        assert_abs_diff_eq!(*lam, 8.0 / 3.0, epsilon = 1e-8);
        let rep = dichotomy(&s, eta, 1.0, 1e-6, DEFAULT_H_MIN).unwrap();
        assert!(!rep.case1_holds);
        assert_abs_diff_eq!(rep.case2_bound.unwrap(), 4.0 / 3.0, epsilon = 1e-6);
        assert!(rep.passed);
    }

    #[test]
    fn scaling_covariance_of_abc() {
        let (s, _) = build_catalog_surface("euclidean_ellipsoid", &[1.0, 0.8, 1.3], 20, 3).unwrap();
        let eta = coord_field(&s, 2);
        let scaled = BoundaryFunction::new(&eta.values * 5.0);
        let (a, b, c) = functionals_abc(&s, &eta, DEFAULT_H_MIN).unwrap();
        let (a2, b2, c2) = functionals_abc(&s, &scaled, DEFAULT_H_MIN).unwrap();
        assert_abs_diff_eq!(a2 / a, 25.0, epsilon = 1e-12 * 25.0);
        assert_abs_diff_eq!(b2 / b, 25.0, epsilon = 1e-12 * 25.0);
        assert_abs_diff_eq!(c2 / c, 25.0, epsilon = 1e-9 * 25.0);
        let d1 = dichotomy(&s, &eta, 0.0, 1e-9, DEFAULT_H_MIN).unwrap();
        let d2 = dichotomy(&s, &scaled, 0.0, 1e-9, DEFAULT_H_MIN).unwrap();
        assert_eq!(d1.case1_holds, d2.case1_holds);
        match (d1.case2_bound, d2.case2_bound) {
            (Some(x), Some(y)) => assert_abs_diff_eq!(x, y, epsilon = 1e-9 * (1.0 + x.abs())),
            (None, None) => {}
            other => panic!("scaling changed the dichotomy case: {other:?}"),
        }
    }

    #[test]
    fn eigen_band_unit_sphere() {
        let (s, _) = build_catalog_surface("euclidean_ball", &[1.0], 32, 3).unwrap();
        let spectrum: Vec<f64> = eigen_decomposition(&s, 9)
            .unwrap()
            .iter()
            .map(|(l, _)| *l)
            .collect();
        let rep = eigen_band_check(&spectrum, &s, 1.0, 0.0, 1e-3).unwrap();
        assert_abs_diff_eq!(rep.band.0, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.band.1, 2.0, epsilon = 1e-12);
        assert!(rep.passed);
        assert_eq!(rep.lambda1_bound_ok, Some(true));

        // kappa above the true bound is rejected with the offending node.
        assert!(eigen_band_check(&spectrum, &s, 1.5, 0.0, 1e-3).is_err());
    }

    #[test]
    fn eigen_band_small_sphere() {
        // Radius 1/2: kappa = 2, right endpoint (n-1) kappa^2 = 8 = lambda_1.
        let (s, _) = build_catalog_surface("euclidean_ball", &[0.5], 24, 3).unwrap();
        let spectrum: Vec<f64> = eigen_decomposition(&s, 5)
            .unwrap()
            .iter()
            .map(|(l, _)| *l)
            .collect();
        let rep = eigen_band_check(&spectrum, &s, 2.0, 0.0, 1e-3).unwrap();
        assert_abs_diff_eq!(rep.band.1, 8.0, epsilon = 1e-12);
        assert!(rep.passed);
    }
}
