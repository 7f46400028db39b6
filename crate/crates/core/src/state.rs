//! Nodal fields on a mesh and the discrete operators of the Lagrangian
//! conformal system.
//!
//! Matrix convention throughout: gradients have rows = components, columns =
//! derivatives, (grad v)_{ik} = d_k v_i. The flux gradient inverse
//! zeta = (grad X)^{-1} turns reference derivatives into derivatives at the
//! transported position: the pullback derivative of a scalar is
//! D f = zeta^T grad f, and the transported velocity gradient is
//! grad v . zeta . J^P(X), whose trace is the incompressibility residual and
//! whose symmetrization enters the traction.

use crate::chart::{lambda, Chart, ChartError, Mat2, Vec2};
use crate::mesh::Mesh;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("field length {0} does not match mesh size {1}")]
    SizeMismatch(usize, usize),
    #[error("flux gradient degenerate at node {index}: det {det:.3e} below floor {floor:.3e}")]
    DegenerateFlux { index: usize, det: f64, floor: f64 },
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub Vec<Vec2>);

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField(pub Vec<Mat2>);

impl ScalarField {
    pub fn zeros(mesh: &Mesh) -> Self {
        ScalarField(vec![0.0; mesh.len()])
    }
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> f64) -> Self {
        ScalarField(mesh.nodes().iter().map(|&p| f(p)).collect())
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (s, o) in self.0.iter_mut().zip(&other.0) {
            *s += a * o;
        }
    }
    pub fn scale(&mut self, a: f64) {
        for s in &mut self.0 {
            *s *= a;
        }
    }
    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl VectorField {
    pub fn zeros(mesh: &Mesh) -> Self {
        VectorField(vec![Vec2::zeros(); mesh.len()])
    }
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> Vec2) -> Self {
        VectorField(mesh.nodes().iter().map(|&p| f(p)).collect())
    }
    /// The reference configuration itself: X(0) = alpha.
    pub fn positions(mesh: &Mesh) -> Self {
        VectorField(mesh.nodes().to_vec())
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }
    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (s, o) in self.0.iter_mut().zip(&other.0) {
            *s += o * a;
        }
    }
    pub fn scale(&mut self, a: f64) {
        for s in &mut self.0 {
            *s *= a;
        }
    }
    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.0.iter().map(|v| v[k]).collect()
    }
}

impl MatrixField {
    pub fn identity(mesh: &Mesh) -> Self {
        MatrixField(vec![Mat2::identity(); mesh.len()])
    }
    pub fn zeros(mesh: &Mesh) -> Self {
        MatrixField(vec![Mat2::zeros(); mesh.len()])
    }
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> Mat2) -> Self {
        MatrixField(mesh.nodes().iter().map(|&p| f(p)).collect())
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }
    pub fn axpy(&mut self, a: f64, other: &MatrixField) {
        for (s, o) in self.0.iter_mut().zip(&other.0) {
            *s += o * a;
        }
    }
    pub fn scale(&mut self, a: f64) {
        for s in &mut self.0 {
            *s *= a;
        }
    }
    pub fn sub(&self, other: &MatrixField) -> MatrixField {
        MatrixField(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
    pub fn entry(&self, r: usize, c: usize) -> Vec<f64> {
        self.0.iter().map(|m| m[(r, c)]).collect()
    }
}

/// Physical gradient of a scalar field (per node).
pub fn gradient_scalar(mesh: &Mesh, f: &ScalarField) -> VectorField {
    let mut out = vec![Vec2::zeros(); mesh.len()];
    for j in 0..mesh.n2 {
        for i in 0..mesh.n1 {
            out[mesh.idx(i, j)] = mesh.grad_at(&f.0, i, j);
        }
    }
    VectorField(out)
}

/// Gradient of a vector field: rows components, columns derivatives.
pub fn gradient_vector(mesh: &Mesh, v: &VectorField) -> MatrixField {
    let fx: Vec<f64> = v.0.iter().map(|u| u.x).collect();
    let fy: Vec<f64> = v.0.iter().map(|u| u.y).collect();
    let mut out = vec![Mat2::zeros(); mesh.len()];
    for j in 0..mesh.n2 {
        for i in 0..mesh.n1 {
            let gx = mesh.grad_at(&fx, i, j);
            let gy = mesh.grad_at(&fy, i, j);
            out[mesh.idx(i, j)] = Mat2::new(gx.x, gx.y, gy.x, gy.y);
        }
    }
    MatrixField(out)
}

/// Derivatives of a matrix field: result[l] holds d_l G at each node.
pub fn gradient_matrix(mesh: &Mesh, g: &MatrixField) -> [MatrixField; 2] {
    let comps: Vec<Vec<f64>> = (0..4)
        .map(|k| {
            let (r, c) = (k / 2, k % 2);
            g.0.iter().map(|m| m[(r, c)]).collect()
        })
        .collect();
    let mut d1 = vec![Mat2::zeros(); mesh.len()];
    let mut d2 = vec![Mat2::zeros(); mesh.len()];
    for j in 0..mesh.n2 {
        for i in 0..mesh.n1 {
            let p = mesh.idx(i, j);
            for k in 0..4 {
                let (r, c) = (k / 2, k % 2);
                let grad = mesh.grad_at(&comps[k], i, j);
                d1[p][(r, c)] = grad.x;
                d2[p][(r, c)] = grad.y;
            }
        }
    }
    [MatrixField(d1), MatrixField(d2)]
}

pub fn divergence(mesh: &Mesh, v: &VectorField) -> ScalarField {
    let g = gradient_vector(mesh, v);
    ScalarField(g.0.iter().map(|m| m.trace()).collect())
}

/// Column-wise divergence of a matrix field: out_j = sum_i d_i M_{ij}.
pub fn divergence_matrix_columns(mesh: &Mesh, m: &MatrixField) -> VectorField {
    let d = gradient_matrix(mesh, m);
    let mut out = vec![Vec2::zeros(); m.len()];
    for p in 0..m.len() {
        // (div M)_j = d_1 M_{1j} + d_2 M_{2j}
        out[p] = Vec2::new(
            d[0].0[p][(0, 0)] + d[1].0[p][(1, 0)],
            d[0].0[p][(0, 1)] + d[1].0[p][(1, 1)],
        );
    }
    VectorField(out)
}

/// zeta = (grad X)^{-1} per node, guarded by a determinant floor.
pub fn zeta(mesh: &Mesh, x: &VectorField, det_floor: f64) -> Result<MatrixField, StateError> {
    let gx = gradient_vector(mesh, x);
    let mut out = Vec::with_capacity(gx.len());
    for (p, m) in gx.0.iter().enumerate() {
        let det = m.determinant();
        if det.abs() < det_floor {
            return Err(StateError::DegenerateFlux { index: p, det, floor: det_floor });
        }
        out.push(m.try_inverse().expect("determinant checked above"));
    }
    Ok(MatrixField(out))
}

/// Smallest |det grad X| over the mesh (flux health indicator).
pub fn min_flux_det(mesh: &Mesh, x: &VectorField) -> f64 {
    gradient_vector(mesh, x)
        .0
        .iter()
        .map(|m| m.determinant().abs())
        .fold(f64::INFINITY, f64::min)
}

/// Cofactor matrix -Lambda A Lambda; maps reference normals to (unnormalized)
/// transported normals.
pub fn cofactor(a: Mat2) -> Mat2 {
    let l = lambda();
    -(l * a * l)
}

/// Chart values along the transported positions X; the coefficients every
/// nonlinear term needs.
pub struct ChartAlongFlux {
    pub jac: Vec<Mat2>,
    pub jac_inv: Vec<Mat2>,
    pub q2: Vec<f64>,
}

pub fn chart_along_flux(chart: &Chart, x: &VectorField) -> Result<ChartAlongFlux, StateError> {
    let mut jac = Vec::with_capacity(x.len());
    let mut jac_inv = Vec::with_capacity(x.len());
    let mut q2 = Vec::with_capacity(x.len());
    for &p in &x.0 {
        jac.push(chart.jacobian(p)?);
        jac_inv.push(chart.jacobian_inv(p)?);
        q2.push(chart.metric_q2(p)?);
    }
    Ok(ChartAlongFlux { jac, jac_inv, q2 })
}

/// Pullback derivative of a scalar along the flux: D f = zeta^T grad f.
pub fn pullback_gradient(mesh: &Mesh, f: &ScalarField, zeta: &MatrixField) -> VectorField {
    let g = gradient_scalar(mesh, f);
    VectorField(
        g.0.iter()
            .zip(&zeta.0)
            .map(|(gr, z)| z.transpose() * gr)
            .collect(),
    )
}

/// Transported velocity gradient grad v . zeta . J^P(X) per node.
pub fn transported_gradient(
    mesh: &Mesh,
    v: &VectorField,
    zeta: &MatrixField,
    jac_at_x: &[Mat2],
) -> MatrixField {
    let gv = gradient_vector(mesh, v);
    MatrixField(
        gv.0.iter()
            .zip(zeta.0.iter().zip(jac_at_x))
            .map(|(g, (z, j))| g * z * j)
            .collect(),
    )
}

/// Componentwise Lagrangian Laplacian sum_k D_k(D_k v_i) with D = zeta^T grad.
pub fn lagrangian_laplacian(mesh: &Mesh, v: &VectorField, zeta: &MatrixField) -> VectorField {
    let mut out = vec![Vec2::zeros(); mesh.len()];
    for comp in 0..2 {
        let vals = ScalarField(v.0.iter().map(|u| u[comp]).collect());
        let d = pullback_gradient(mesh, &vals, zeta);
        for k in 0..2 {
            let dk = ScalarField(d.0.iter().map(|g| g[k]).collect());
            let ddk = pullback_gradient(mesh, &dk, zeta);
            for p in 0..mesh.len() {
                out[p][comp] += ddk.0[p][k];
            }
        }
    }
    VectorField(out)
}

/// Elastic self-advection term: component j is
/// sum_k (J^P(X) G)_{.k} . D(G_{jk}), the transported divergence of G G^T
/// for column-divergence-free G.
pub fn elastic_term(
    mesh: &Mesh,
    g: &MatrixField,
    zeta: &MatrixField,
    jac_at_x: &[Mat2],
) -> VectorField {
    let grads = gradient_matrix(mesh, g); // grads[l] = d_l G
    let mut out = vec![Vec2::zeros(); mesh.len()];
    for p in 0..mesh.len() {
        let jg = jac_at_x[p] * g.0[p];
        let zt = zeta.0[p].transpose();
        for jcomp in 0..2 {
            let mut acc = 0.0;
            for k in 0..2 {
                // D(G_{jk}) = zeta^T (d_1 G_{jk}, d_2 G_{jk})
                let dg = zt * Vec2::new(grads[0].0[p][(jcomp, k)], grads[1].0[p][(jcomp, k)]);
                acc += jg[(0, k)] * dg[0] + jg[(1, k)] * dg[1];
            }
            out[p][jcomp] = acc;
        }
    }
    VectorField(out)
}

/// Trace of the transported velocity gradient; zero for incompressible flow.
pub fn residual_incompressibility(
    mesh: &Mesh,
    chart: &Chart,
    v: &VectorField,
    x: &VectorField,
    det_floor: f64,
) -> Result<ScalarField, StateError> {
    let z = zeta(mesh, x, det_floor)?;
    let cf = chart_along_flux(chart, x)?;
    let tg = transported_gradient(mesh, v, &z, &cf.jac);
    Ok(ScalarField(tg.0.iter().map(|m| m.trace()).collect()))
}

/// det G - 1 per node; exact zero is conserved by the continuous transport.
pub fn residual_det_g(g: &MatrixField) -> ScalarField {
    ScalarField(g.0.iter().map(|m| m.determinant() - 1.0).collect())
}

/// Traction residual on each boundary node:
/// [-q I + sym(grad v . zeta . J^P(X)) + G G^T - I] (J^P(X))^{-1} cof(grad X) n0.
pub fn residual_traction(
    mesh: &Mesh,
    chart: &Chart,
    v: &VectorField,
    q: &ScalarField,
    x: &VectorField,
    g: &MatrixField,
    det_floor: f64,
) -> Result<Vec<Vec2>, StateError> {
    let z = zeta(mesh, x, det_floor)?;
    let cf = chart_along_flux(chart, x)?;
    let tg = transported_gradient(mesh, v, &z, &cf.jac);
    let gx = gradient_vector(mesh, x);
    let mut out = Vec::with_capacity(mesh.boundary_nodes().len());
    for b in mesh.boundary_nodes() {
        let p = b.node;
        let sym = tg.0[p] + tg.0[p].transpose();
        let stress = -q.0[p] * Mat2::identity() + sym + g.0[p] * g.0[p].transpose() - Mat2::identity();
        let dir = cf.jac_inv[p] * cofactor(gx.0[p]) * b.normal;
        out.push(stress * dir);
    }
    Ok(out)
}

/// Interior momentum residual of the transported system at one time level,
/// with backward-difference time derivative:
/// (v - v_prev)/dt - Q^2(X) lap v + (J^P(X))^T D q - elastic(G).
/// Boundary nodes are reported as zero (they carry the traction condition).
#[allow(clippy::too_many_arguments)]
pub fn residual_momentum(
    mesh: &Mesh,
    chart: &Chart,
    v: &VectorField,
    v_prev: &VectorField,
    dt: f64,
    q: &ScalarField,
    x: &VectorField,
    g: &MatrixField,
    det_floor: f64,
) -> Result<VectorField, StateError> {
    let z = zeta(mesh, x, det_floor)?;
    let cf = chart_along_flux(chart, x)?;
    let lap = lagrangian_laplacian(mesh, v, &z);
    let dq = pullback_gradient(mesh, q, &z);
    let el = elastic_term(mesh, g, &z, &cf.jac);
    let mut out = vec![Vec2::zeros(); mesh.len()];
    for p in 0..mesh.len() {
        if mesh.is_boundary(p) {
            continue;
        }
        let dvdt = (v.0[p] - v_prev.0[p]) / dt;
        out[p] = dvdt - cf.q2[p] * lap.0[p] + cf.jac[p].transpose() * dq.0[p] - el.0[p];
    }
    Ok(VectorField(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sector() -> Mesh {
        Mesh::sector(Vec2::zeros(), 0.6, 1.4, -1.0, 1.0, 12, 16).unwrap()
    }

    #[test]
    fn zeta_is_identity_at_reference() {
        let mesh = sector();
        let x = VectorField::positions(&mesh);
        let z = zeta(&mesh, &x, 0.1).unwrap();
        for m in &z.0 {
            assert!((m - Mat2::identity()).norm() < 1e-11);
        }
    }

    #[test]
    fn zeta_inverts_linear_flux_exactly() {
        let mesh = sector();
        let a = Mat2::new(1.1, 0.3, -0.2, 0.9);
        let x = VectorField(mesh.nodes().iter().map(|&p| a * p).collect());
        let z = zeta(&mesh, &x, 0.1).unwrap();
        let ainv = a.try_inverse().unwrap();
        for m in &z.0 {
            assert!((m - ainv).norm() < 1e-10);
        }
    }

    #[test]
    fn zeta_rejects_collapsed_flux() {
        let mesh = sector();
        let x = VectorField(mesh.nodes().iter().map(|&p| Vec2::new(p.x, 0.0)).collect());
        assert!(matches!(
            zeta(&mesh, &x, 0.1),
            Err(StateError::DegenerateFlux { .. })
        ));
    }

    #[test]
    fn incompressibility_identity_chart_matches_divergence() {
        let mesh = sector();
        let v = VectorField::from_fn(&mesh, |p| Vec2::new((p.y * 1.3).sin(), (p.x * 0.7).cos()));
        let x = VectorField::positions(&mesh);
        let r = residual_incompressibility(&mesh, &Chart::Identity, &v, &x, 0.1).unwrap();
        let d = divergence(&mesh, &v);
        for (a, b) in r.0.iter().zip(&d.0) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn incompressibility_conformal_divfree_field_is_small() {
        // u(x) = grad^perp psi is divergence free; its chart transport must
        // produce an O(h^2) residual through the composed operators.
        let residual = |n: usize| {
            let mesh = Mesh::sector(Vec2::zeros(), 0.7, 1.3, 0.4, 1.2, n, n).unwrap();
            let chart = Chart::sqrt_default();
            // Tilde-plane mesh: nodes are alpha; v0(alpha) = u0(P^{-1}(alpha))
            // with u0 = grad^perp of psi(z) = sin(z1) cos(z2).
            let v = VectorField(
                mesh.nodes()
                    .iter()
                    .map(|&a| {
                        let zp = chart.inverse(a);
                        Vec2::new(
                            (zp.x).sin() * (zp.y).sin(), // -d2 psi
                            (zp.x).cos() * (zp.y).cos(), // d1 psi
                        )
                    })
                    .collect(),
            );
            let x = VectorField::positions(&mesh);
            residual_incompressibility(&mesh, &chart, &v, &x, 0.1)
                .unwrap()
                .max_abs()
        };
        let e1 = residual(13);
        let e2 = residual(25);
        let order = (e1 / e2).log2();
        assert!(order > 1.7, "order {order:.2} ({e1:.2e} -> {e2:.2e})");
    }

    #[test]
    fn det_g_residual_trivial_cases() {
        let mesh = sector();
        assert_eq!(residual_det_g(&MatrixField::identity(&mesh)).max_abs(), 0.0);
        let shear = MatrixField::from_fn(&mesh, |_| Mat2::new(1.0, 0.4, 0.0, 1.0));
        assert_eq!(residual_det_g(&shear).max_abs(), 0.0);
        let bad = MatrixField::from_fn(&mesh, |_| Mat2::new(1.1, 0.0, 0.0, 1.0));
        assert_abs_diff_eq!(residual_det_g(&bad).max_abs(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn traction_rest_state_examples() {
        // v = 0, q = 1, X = alpha, G = I: residual is -(J^P)^{-1} n0, which for
        // the identity chart is -n0.
        let mesh = sector();
        let v = VectorField::zeros(&mesh);
        let q = ScalarField(vec![1.0; mesh.len()]);
        let x = VectorField::positions(&mesh);
        let g = MatrixField::identity(&mesh);
        let r = residual_traction(&mesh, &Chart::Identity, &v, &q, &x, &g, 0.1).unwrap();
        for (r, b) in r.iter().zip(mesh.boundary_nodes()) {
            assert!((r + b.normal).norm() < 1e-10);
        }
        let chart = Chart::sqrt_default();
        let r = residual_traction(&mesh, &chart, &v, &q, &x, &g, 0.1).unwrap();
        for (r, b) in r.iter().zip(mesh.boundary_nodes()) {
            let expect = -(chart.jacobian_inv(mesh.node(b.node)).unwrap() * b.normal);
            assert!((r - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn elastic_term_vanishes_for_constant_g() {
        let mesh = sector();
        let chart = Chart::sqrt_default();
        let x = VectorField::positions(&mesh);
        let z = zeta(&mesh, &x, 0.1).unwrap();
        let cf = chart_along_flux(&chart, &x).unwrap();
        let g = MatrixField::from_fn(&mesh, |_| Mat2::new(1.0, 0.3, 0.0, 1.0));
        let e = elastic_term(&mesh, &g, &z, &cf.jac);
        assert!(e.max_norm() < 1e-10);
    }

    #[test]
    fn elastic_term_matches_divergence_of_gg_at_reference() {
        // At X = alpha with the identity chart, the elastic term must equal
        // div(G G^T) columnwise whenever div G = 0 (columnwise). Use
        // G = [[1, gamma(x2)], [0, 1]].
        let mesh = Mesh::rect(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 48, 48).unwrap();
        let x = VectorField::positions(&mesh);
        let z = zeta(&mesh, &x, 0.1).unwrap();
        let cf = chart_along_flux(&Chart::Identity, &x).unwrap();
        let gamma = |y: f64| 0.3 * (2.0 * y).sin();
        let g = MatrixField::from_fn(&mesh, |p| Mat2::new(1.0, gamma(p.y), 0.0, 1.0));
        let e = elastic_term(&mesh, &g, &z, &cf.jac);
        let gg = MatrixField(g.0.iter().map(|m| m * m.transpose()).collect());
        let dv = divergence_matrix_columns(&mesh, &gg);
        let mut worst = 0.0f64;
        for p in 0..mesh.len() {
            worst = worst.max((e.0[p] - dv.0[p]).norm());
        }
        assert!(worst < 2e-3, "mismatch {worst:.2e}");
    }

    #[test]
    fn lagrangian_laplacian_matches_plain_laplacian_at_reference() {
        let mesh = Mesh::rect(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 64, 64).unwrap();
        let x = VectorField::positions(&mesh);
        let z = zeta(&mesh, &x, 0.1).unwrap();
        let v = VectorField::from_fn(&mesh, |p| {
            Vec2::new((2.0 * p.x).sin() * p.y, p.x * p.x - p.y * p.y)
        });
        let lap = lagrangian_laplacian(&mesh, &v, &z);
        let mut worst = 0.0f64;
        for j in 2..mesh.n2 - 2 {
            for i in 2..mesh.n1 - 2 {
                let p = mesh.idx(i, j);
                let pt = mesh.node(p);
                let exact = Vec2::new(-4.0 * (2.0 * pt.x).sin() * pt.y, 0.0);
                worst = worst.max((lap.0[p] - exact).norm());
            }
        }
        assert!(worst < 5e-3, "interior laplacian error {worst:.2e}");
    }

    #[test]
    fn momentum_residual_zero_at_rest() {
        let mesh = sector();
        let chart = Chart::sqrt_default();
        let v = VectorField::zeros(&mesh);
        let q = ScalarField::zeros(&mesh);
        let x = VectorField::positions(&mesh);
        let g = MatrixField::identity(&mesh);
        let r = residual_momentum(&mesh, &chart, &v, &v, 0.01, &q, &x, &g, 0.1).unwrap();
        assert!(r.max_norm() < 1e-12);
    }
}
