//! Compatible initial data built from stream functions in boundary collars.
//!
//! Each boundary side carries a tubular frame (s, lambda) with lambda < 0 on
//! the fluid side, a stream profile
//!     psi(s, lambda) = psi0(s) + lambda^2/2 psi2(s)
//! and a C^inf cutoff in lambda. The velocity is the rotated gradient of the
//! cut-off stream, hence exactly divergence free. The second-order
//! coefficient
//!     psi2 = psi0'' - T . (F0 F0^T - I) N
//! cancels the tangential boundary traction, and the initial pressure is the
//! normal traction component, so the evolution starts from homogeneous data.
//!
//! Frames follow T' = k N, N' = -k T with N the outward normal and k the
//! curvature of the side (a circle of radius R traversed with N pointing
//! away from its center has k = -1/R).

use crate::chart::{Chart, ChartError, Mat2, Vec2};
use crate::linsolve::{LinearSystem, LinsolveError};
use crate::mesh::Mesh;
use crate::state::{
    chart_along_flux, divergence, elastic_term, gradient_scalar, gradient_vector, MatrixField,
    ScalarField, StateError, VectorField,
};

#[derive(Debug, thiserror::Error)]
pub enum InitError {
    #[error("chart evaluation failed: {0}")]
    Chart(#[from] ChartError),
    #[error("initial pressure solve failed: {0}")]
    Solve(#[from] LinsolveError),
    #[error("state operator failed: {0}")]
    State(#[from] StateError),
    #[error("initial pressure solve requires a non-periodic mesh")]
    PeriodicMesh,
}

/// (1 - x^2)^6 on (-1,1), zero outside, with derivatives up to third order.
/// Peak value 1. C^5 at the support edge with derivative bounds small enough
/// that second-order residual decay is visible on practical grids, unlike
/// exponential bumps whose edge derivatives run to 1e5.
pub fn bump_derivs(x: f64) -> [f64; 4] {
    let u = 1.0 - x * x;
    if u <= 0.0 {
        return [0.0; 4];
    }
    let p = 6.0;
    let u3 = u * u * u;
    let u4 = u3 * u;
    let u5 = u4 * u;
    let u6 = u5 * u;
    [
        u6,
        -2.0 * p * x * u5,
        -2.0 * p * u5 + 4.0 * p * (p - 1.0) * x * x * u4,
        12.0 * p * (p - 1.0) * x * u4 - 8.0 * p * (p - 1.0) * (p - 2.0) * x * x * x * u3,
    ]
}

/// C^5 polynomial step: 0 for t <= 0, 1 for t >= 1, derivative
/// 2772 t^5 (1-t)^5 in between; returns (value, derivative).
pub fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let t2 = t * t;
    let t3 = t2 * t;
    let t5 = t2 * t3;
    let s = t5 * t
        * (462.0 + t * (-1980.0 + t * (3465.0 + t * (-3080.0 + t * (1386.0 - 252.0 * t)))));
    let omt = 1.0 - t;
    let ds = 2772.0 * t5 * omt * omt * omt * omt * omt;
    (s, ds)
}

/// Collar cutoff: 1 for |lambda| <= w_in, 0 for |lambda| >= w_out; returns
/// (value, d/d lambda).
pub fn collar_cutoff(lambda: f64, w_in: f64, w_out: f64) -> (f64, f64) {
    // One-sided: the collar lives on the fluid side lambda <= 0. Past the
    // face line the profile is dead, so a side whose tubular neighborhood
    // reaches across a narrow vacuum gap cannot bleed onto the opposite
    // face. The tolerance absorbs rounding in the coordinates of nodes
    // sitting exactly on the face.
    if lambda > 1e-9 {
        return (0.0, 0.0);
    }
    let m = lambda.abs();
    if m <= w_in {
        return (1.0, 0.0);
    }
    if m >= w_out {
        return (0.0, 0.0);
    }
    let tau = (m - w_in) / (w_out - w_in);
    let (s, ds) = smooth_step(tau);
    (1.0 - s, -ds * lambda.signum() / (w_out - w_in))
}

#[derive(Debug, Clone, Copy)]
pub struct FrameData {
    pub z: Vec2,
    pub t: Vec2,
    pub n: Vec2,
    pub k: f64,
}

/// Tubular coordinate frame of one boundary side, in the physical plane.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TubularFrame {
    /// Circular arc. `outward = true` when the outward normal points away
    /// from the circle center; `theta0` is the angle where s = 0.
    Circle { center: [f64; 2], radius: f64, theta0: f64, outward: bool },
    /// Straight side from `a` to `b`; the outward normal is the tangent
    /// rotated clockwise.
    Segment { a: [f64; 2], b: [f64; 2] },
}

impl TubularFrame {
    /// (s, lambda) of a point; lambda < 0 on the fluid side.
    pub fn coords(&self, x: Vec2) -> (f64, f64) {
        match self {
            TubularFrame::Circle { center, radius, theta0, outward } => {
                let d = x - Vec2::new(center[0], center[1]);
                let theta = d.y.atan2(d.x);
                let mut dth = theta - theta0;
                while dth > std::f64::consts::PI {
                    dth -= 2.0 * std::f64::consts::PI;
                }
                while dth <= -std::f64::consts::PI {
                    dth += 2.0 * std::f64::consts::PI;
                }
                let s = if *outward { radius * dth } else { -radius * dth };
                let lam = if *outward { d.norm() - radius } else { radius - d.norm() };
                (s, lam)
            }
            TubularFrame::Segment { a, b } => {
                let a = Vec2::new(a[0], a[1]);
                let b = Vec2::new(b[0], b[1]);
                let t = (b - a).normalize();
                let n = Vec2::new(t.y, -t.x);
                ((x - a).dot(&t), (x - a).dot(&n))
            }
        }
    }

    pub fn frame_at(&self, s: f64) -> FrameData {
        match self {
            TubularFrame::Circle { center, radius, theta0, outward } => {
                let c = Vec2::new(center[0], center[1]);
                let theta = if *outward { theta0 + s / radius } else { theta0 - s / radius };
                let er = Vec2::new(theta.cos(), theta.sin());
                let eth = Vec2::new(-theta.sin(), theta.cos());
                if *outward {
                    FrameData { z: c + *radius * er, t: eth, n: er, k: -1.0 / radius }
                } else {
                    FrameData { z: c + *radius * er, t: -eth, n: -er, k: 1.0 / radius }
                }
            }
            TubularFrame::Segment { a, b } => {
                let a = Vec2::new(a[0], a[1]);
                let b = Vec2::new(b[0], b[1]);
                let t = (b - a).normalize();
                FrameData { z: a + s * t, t, n: Vec2::new(t.y, -t.x), k: 0.0 }
            }
        }
    }

    pub fn point(&self, s: f64, lambda: f64) -> Vec2 {
        let f = self.frame_at(s);
        f.z + lambda * f.n
    }
}

/// Reference deformation templates, all with unit determinant and
/// column-wise divergence zero.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum F0Spec {
    Identity,
    Shear { c: f64 },
    /// [[1, gamma(x2)], [0, 1]] with gamma a compact bump in the second
    /// coordinate.
    CurlBump { amp: f64, center: f64, width: f64 },
}

impl Default for F0Spec {
    fn default() -> Self {
        F0Spec::Identity
    }
}

impl F0Spec {
    pub fn matrix(&self, x: Vec2) -> Mat2 {
        match self {
            F0Spec::Identity => Mat2::identity(),
            F0Spec::Shear { c } => Mat2::new(1.0, *c, 0.0, 1.0),
            F0Spec::CurlBump { amp, center, width } => {
                let g = amp * bump_derivs((x.y - center) / width)[0];
                Mat2::new(1.0, g, 0.0, 1.0)
            }
        }
    }

    /// F0 F0^T - I.
    fn stress(&self, x: Vec2) -> Mat2 {
        match self {
            F0Spec::Identity => Mat2::zeros(),
            F0Spec::Shear { c } => Mat2::new(c * c, *c, *c, 0.0),
            F0Spec::CurlBump { amp, center, width } => {
                let g = amp * bump_derivs((x.y - center) / width)[0];
                Mat2::new(g * g, g, g, 0.0)
            }
        }
    }

    /// Directional derivative of the stress along d.
    fn stress_dir(&self, x: Vec2, d: Vec2) -> Mat2 {
        match self {
            F0Spec::Identity | F0Spec::Shear { .. } => Mat2::zeros(),
            F0Spec::CurlBump { amp, center, width } => {
                let b = bump_derivs((x.y - center) / width);
                let g = amp * b[0];
                let dg = amp * b[1] / width * d.y;
                Mat2::new(2.0 * g * dg, dg, dg, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    pub amp: f64,
}

/// Stream data of one boundary side.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SideStream {
    pub frame: TubularFrame,
    pub bumps: Vec<BumpSpec>,
    pub width_in: f64,
    pub width_out: f64,
}

impl SideStream {
    /// psi0 and its first three s-derivatives.
    pub fn psi0(&self, s: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for b in &self.bumps {
            let d = bump_derivs((s - b.center) / b.width);
            for (r, o) in out.iter_mut().enumerate() {
                *o += b.amp * d[r] / b.width.powi(r as i32);
            }
        }
        out
    }

    /// psi2 = psi0'' - T.(F0 F0^T - I)N and its s-derivative.
    pub fn psi2(&self, f0: &F0Spec, s: f64) -> (f64, f64) {
        let p0 = self.psi0(s);
        let f = self.frame_at(s);
        let m = f0.stress(f.z);
        let e = (f.t.transpose() * m * f.n)[0];
        let de = f.k * ((f.n.transpose() * m * f.n)[0] - (f.t.transpose() * m * f.t)[0])
            + (f.t.transpose() * f0.stress_dir(f.z, f.t) * f.n)[0];
        (p0[2] - e, p0[3] - de)
    }

    fn frame_at(&self, s: f64) -> FrameData {
        self.frame.frame_at(s)
    }

    /// Cut-off stream value at a point (for derivative checks).
    pub fn stream(&self, f0: &F0Spec, x: Vec2) -> f64 {
        let (s, lam) = self.frame.coords(x);
        let (b, _) = collar_cutoff(lam, self.width_in, self.width_out);
        if b == 0.0 {
            return 0.0;
        }
        let p0 = self.psi0(s);
        let (p2, _) = self.psi2(f0, s);
        b * (p0[0] + 0.5 * lam * lam * p2)
    }

    /// Velocity contribution at a point: the rotated gradient of the
    /// cut-off stream, evaluated through the frame calculus.
    pub fn velocity(&self, f0: &F0Spec, x: Vec2) -> Vec2 {
        let (s, lam) = self.frame.coords(x);
        let (b, db) = collar_cutoff(lam, self.width_in, self.width_out);
        if b == 0.0 && db == 0.0 {
            return Vec2::zeros();
        }
        let f = self.frame_at(s);
        let hs = 1.0 - lam * f.k;
        if hs <= 0.0 {
            return Vec2::zeros();
        }
        let p0 = self.psi0(s);
        let (p2, dp2) = self.psi2(f0, s);
        let psi = p0[0] + 0.5 * lam * lam * p2;
        let psi_lam = lam * p2;
        let psi_s = p0[1] + 0.5 * lam * lam * dp2;
        // u = Lambda grad(B psi); with this frame Lambda N = T, Lambda T = -N.
        (db * psi + b * psi_lam) * f.t - b * psi_s / hs * f.n
    }
}

/// Initial velocity at the given physical points.
pub fn velocity_at(nodes: &[Vec2], sides: &[SideStream], f0: &F0Spec) -> VectorField {
    VectorField(
        nodes
            .iter()
            .map(|&x| sides.iter().map(|s| s.velocity(f0, x)).sum())
            .collect(),
    )
}

/// Initial deformation at the given physical points.
pub fn deformation_at(nodes: &[Vec2], f0: &F0Spec) -> MatrixField {
    MatrixField(nodes.iter().map(|&x| f0.matrix(x)).collect())
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CompatReport {
    pub div_max: f64,
    pub det_max: f64,
    pub traction_tan_max: f64,
}

/// Pointwise compatibility of physical initial data: discrete divergence,
/// determinant defect, and the tangential part of the boundary traction
/// (without pressure, which absorbs the normal part).
pub fn check_compatibility(mesh: &Mesh, v: &VectorField, g: &MatrixField) -> CompatReport {
    let div = divergence(mesh, v);
    let det_max = g
        .0
        .iter()
        .map(|m| (m.determinant() - 1.0).abs())
        .fold(0.0, f64::max);
    let gv = gradient_vector(mesh, v);
    let mut traction_tan_max: f64 = 0.0;
    for bn in mesh.boundary_nodes() {
        let p = bn.node;
        let stress = gv.0[p] + gv.0[p].transpose() + g.0[p] * g.0[p].transpose() - Mat2::identity();
        let t = stress * bn.normal;
        let tan = t - t.dot(&bn.normal) * bn.normal;
        traction_tan_max = traction_tan_max.max(tan.norm());
    }
    CompatReport { div_max: div.max_abs(), det_max, traction_tan_max }
}

/// Initial pressure on the reference mesh: interior Poisson problem
///   -Q^2 lap q = tr(M^2) - div f_G,    M = grad v . J,
/// with Dirichlet values equal to the normal traction component
///   q = (S d . d) / |d|^2,   d = J^{-1} n0,   S = sym2(grad v J) + G G^T - I.
pub fn solve_q_phi(
    mesh: &Mesh,
    chart: &Chart,
    v0: &VectorField,
    g0: &MatrixField,
) -> Result<ScalarField, InitError> {
    if mesh.periodic1 || mesh.periodic2 {
        return Err(InitError::PeriodicMesh);
    }
    let pos = VectorField::positions(mesh);
    let cf = chart_along_flux(chart, &pos)?;
    let gv = gradient_vector(mesh, v0);
    let id = MatrixField::identity(mesh);
    let f_g = elastic_term(mesh, g0, &id, &cf.jac);
    let div_f = divergence(mesh, &f_g);
    let n = mesh.len();
    let mut sys = LinearSystem::new(n);
    let mut rhs = vec![0.0; n];
    for p in 0..n {
        let (i, j) = mesh.ij(p);
        if let Some(b) = mesh.boundary_index_of(p) {
            let bn = &mesh.boundary_nodes()[b];
            let d = cf.jac_inv[p] * bn.normal;
            let m = gv.0[p] * cf.jac[p];
            let stress = m + m.transpose() + g0.0[p] * g0.0[p].transpose() - Mat2::identity();
            sys.add(p, p, 1.0)?;
            rhs[p] = (stress * d).dot(&d) / d.norm_squared();
        } else {
            for (r, w) in mesh.laplacian_stencil(i, j) {
                sys.add(p, r, -cf.q2[p] * w)?;
            }
            let m = gv.0[p] * cf.jac[p];
            rhs[p] = (m * m).trace() - div_f.0[p];
        }
    }
    let lu = sys.factor_banded()?;
    Ok(ScalarField(lu.solve(&rhs)?))
}

/// Forcing profile phi(t) = v0 + t exp(-t^2) a with a the initial
/// acceleration, so that phi matches v0 and the momentum balance at t = 0.
#[derive(Debug, Clone)]
pub struct PhiData {
    pub base: VectorField,
    pub accel: VectorField,
}

impl PhiData {
    pub fn at(&self, t: f64) -> VectorField {
        let mut out = self.base.clone();
        out.axpy(t * (-t * t).exp(), &self.accel);
        out
    }

    pub fn dt_at(&self, t: f64) -> VectorField {
        let mut out = self.accel.clone();
        out.scale((1.0 - 2.0 * t * t) * (-t * t).exp());
        out
    }
}

/// a = Q^2 lap v0 - J^T grad q_phi + f_G at the reference configuration.
pub fn build_phi(
    mesh: &Mesh,
    chart: &Chart,
    v0: &VectorField,
    g0: &MatrixField,
    q_phi: &ScalarField,
) -> Result<PhiData, InitError> {
    let pos = VectorField::positions(mesh);
    let cf = chart_along_flux(chart, &pos)?;
    let id = MatrixField::identity(mesh);
    let lap = crate::state::lagrangian_laplacian(mesh, v0, &id);
    let gq = gradient_scalar(mesh, q_phi);
    let f_g = elastic_term(mesh, g0, &id, &cf.jac);
    let accel = VectorField(
        (0..mesh.len())
            .map(|p| cf.q2[p] * lap.0[p] - cf.jac[p].transpose() * gq.0[p] + f_g.0[p])
            .collect(),
    );
    Ok(PhiData { base: v0.clone(), accel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::residual_traction;
    use approx::assert_abs_diff_eq;

    fn ring_sides(r0: f64, r1: f64, w_in: f64, w_out: f64) -> Vec<SideStream> {
        vec![
            SideStream {
                frame: TubularFrame::Circle { center: [0.0, 0.0], radius: r1, theta0: 0.0, outward: true },
                bumps: vec![BumpSpec { center: 0.0, width: 1.2, amp: 0.3 }],
                width_in: w_in,
                width_out: w_out,
            },
            SideStream {
                frame: TubularFrame::Circle { center: [0.0, 0.0], radius: r0, theta0: 0.0, outward: false },
                bumps: vec![BumpSpec { center: 1.0, width: 0.9, amp: -0.2 }],
                width_in: w_in,
                width_out: w_out,
            },
        ]
    }

    #[test]
    fn frame_coords_roundtrip() {
        let frames = [
            TubularFrame::Circle { center: [0.3, -0.1], radius: 1.2, theta0: 0.4, outward: true },
            TubularFrame::Circle { center: [0.0, 0.2], radius: 0.8, theta0: -0.3, outward: false },
            TubularFrame::Segment { a: [0.1, 0.2], b: [1.4, -0.5] },
        ];
        for f in &frames {
            for &(s, lam) in &[(0.3, -0.15), (-0.4, -0.02), (0.9, 0.1)] {
                let x = f.point(s, lam);
                let (s2, lam2) = f.coords(x);
                assert_abs_diff_eq!(s2, s, epsilon = 1e-12);
                assert_abs_diff_eq!(lam2, lam, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn frame_satisfies_frenet_relations() {
        let f = TubularFrame::Circle { center: [0.1, 0.5], radius: 0.9, theta0: 0.2, outward: false };
        let h = 1e-6;
        for &s in &[0.0, 0.7, -1.1] {
            let a = f.frame_at(s - h);
            let b = f.frame_at(s + h);
            let c = f.frame_at(s);
            let dt = (b.t - a.t) / (2.0 * h);
            let dn = (b.n - a.n) / (2.0 * h);
            assert!((dt - c.k * c.n).norm() < 1e-6);
            assert!((dn + c.k * c.t).norm() < 1e-6);
            assert!((c.z - f.point(s, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn shear_psi2_reduces_to_psi0pp_plus_c() {
        // On a straight side with the shear template, the tangential traction
        // condition gives psi2 = psi0'' + c exactly.
        let side = SideStream {
            frame: TubularFrame::Segment { a: [0.0, 0.0], b: [4.0, 0.0] },
            bumps: vec![BumpSpec { center: 2.0, width: 1.0, amp: 0.7 }],
            width_in: 0.1,
            width_out: 0.3,
        };
        let c = 0.45;
        let f0 = F0Spec::Shear { c };
        for &s in &[1.3, 2.0, 2.6] {
            let (p2, _) = side.psi2(&f0, s);
            let p0 = side.psi0(s);
            assert_abs_diff_eq!(p2, p0[2] + c, epsilon = 1e-12);
        }
    }

    #[test]
    fn velocity_matches_rotated_gradient_of_stream() {
        // Finite-difference oracle for the frame calculus, on both a curved
        // and a straight side with a non-trivial template.
        let f0 = F0Spec::CurlBump { amp: 0.4, center: 0.2, width: 1.5 };
        let sides = [
            SideStream {
                frame: TubularFrame::Circle { center: [0.0, 0.0], radius: 1.1, theta0: 0.0, outward: true },
                bumps: vec![BumpSpec { center: 0.3, width: 1.0, amp: 0.5 }],
                width_in: 0.08,
                width_out: 0.3,
            },
            SideStream {
                frame: TubularFrame::Segment { a: [-1.0, -0.4], b: [1.0, -0.4] },
                bumps: vec![BumpSpec { center: 0.9, width: 0.6, amp: -0.3 }],
                width_in: 0.08,
                width_out: 0.3,
            },
        ];
        let h = 1e-5;
        for side in &sides {
            for &(s, lam) in &[(0.3, -0.05), (0.55, -0.2), (1.1, -0.27), (0.8, -0.001)] {
                let x = side.frame.point(s, lam);
                let dx = (side.stream(&f0, x + Vec2::new(h, 0.0)) - side.stream(&f0, x - Vec2::new(h, 0.0)))
                    / (2.0 * h);
                let dy = (side.stream(&f0, x + Vec2::new(0.0, h)) - side.stream(&f0, x - Vec2::new(0.0, h)))
                    / (2.0 * h);
                let fd = Vec2::new(-dy, dx);
                let u = side.velocity(&f0, x);
                // tolerance dominated by FD truncation inside the cutoff zone
                assert!((u - fd).norm() < 1e-6, "at ({s},{lam}): {u:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn compatibility_residuals_shrink_at_second_order_on_ring() {
        // The exponential cutoff has large high derivatives; the collar
        // transition needs on the order of ten cells before the second-order
        // regime shows.
        let f0 = F0Spec::Shear { c: 0.4 };
        let sides = ring_sides(0.7, 1.5, 0.05, 0.38);
        let mut divs = Vec::new();
        let mut tans = Vec::new();
        for n in [24usize, 48] {
            let mesh = Mesh::ring(Vec2::zeros(), 0.7, 1.5, n, 4 * n).unwrap();
            let v = velocity_at(mesh.nodes(), &sides, &f0);
            let g = deformation_at(mesh.nodes(), &f0);
            let rep = check_compatibility(&mesh, &v, &g);
            assert_eq!(rep.det_max, 0.0);
            divs.push(rep.div_max);
            tans.push(rep.traction_tan_max);
        }
        let div_order = (divs[0] / divs[1]).log2();
        let tan_order = (tans[0] / tans[1]).log2();
        assert!(div_order > 1.7, "div orders {divs:?} -> {div_order}");
        assert!(tan_order > 1.7, "traction orders {tans:?} -> {tan_order}");
    }

    #[test]
    fn rest_state_has_zero_initial_pressure_and_forcing() {
        let mesh = Mesh::sector(Vec2::zeros(), 0.6, 1.4, -0.8, 0.8, 10, 12).unwrap();
        let chart = Chart::sqrt_default();
        let v0 = VectorField::zeros(&mesh);
        let g0 = MatrixField::identity(&mesh);
        let q = solve_q_phi(&mesh, &chart, &v0, &g0).unwrap();
        assert!(q.max_abs() < 1e-12);
        let phi = build_phi(&mesh, &chart, &v0, &g0, &q).unwrap();
        assert!(phi.at(0.37).max_norm() < 1e-12);
        assert!(phi.dt_at(0.0).max_norm() < 1e-12);
    }

    #[test]
    fn initial_pressure_cancels_boundary_traction() {
        // With compatible stream data and q from the normal traction, the
        // full homogeneous-data boundary residual is O(h^2).
        let f0 = F0Spec::Identity;
        let th = 0.9_f64;
        let sides = vec![
            SideStream {
                frame: TubularFrame::Circle { center: [0.0, 0.0], radius: 1.4, theta0: 0.0, outward: true },
                bumps: vec![BumpSpec { center: 0.0, width: 0.7, amp: 0.25 }],
                width_in: 0.05,
                width_out: 0.35,
            },
            SideStream {
                frame: TubularFrame::Segment {
                    a: [1.4 * th.cos(), 1.4 * th.sin()],
                    b: [0.6 * th.cos(), 0.6 * th.sin()],
                },
                bumps: vec![BumpSpec { center: 0.4, width: 0.25, amp: -0.1 }],
                width_in: 0.05,
                width_out: 0.35,
            },
        ];
        let chart = Chart::Identity;
        let mut maxima = Vec::new();
        for n in [20usize, 40] {
            let mesh = Mesh::sector(Vec2::zeros(), 0.6, 1.4, -th, th, n, 2 * n).unwrap();
            let v0 = velocity_at(mesh.nodes(), &sides, &f0);
            let g0 = deformation_at(mesh.nodes(), &f0);
            let q = solve_q_phi(&mesh, &chart, &v0, &g0).unwrap();
            let x = VectorField::positions(&mesh);
            let h = residual_traction(&mesh, &chart, &v0, &q, &x, &g0, 0.1).unwrap();
            maxima.push(h.iter().map(|t| t.norm()).fold(0.0, f64::max));
        }
        assert!(
            maxima[1] < maxima[0] / 2.5,
            "traction residuals did not shrink: {maxima:?}"
        );
    }
}
