//! Window-based time marching for the transported free-boundary system.
//!
//! Each window solves a fixed-point problem for the velocity correction w on
//! [0, T]: the backward-Euler system with coefficients frozen at the window's
//! reference configuration is assembled and factored once, and every
//! configuration-dependent term is evaluated at the previous iterate and moved
//! to the right-hand side. The flux map X and deformation gradient G are
//! updated by trapezoid quadrature of their transport identities, so the
//! whole iterate stays second order in time.

use thiserror::Error;

use crate::chart::{Chart, Mat2, Vec2};
use crate::curve::{CurveError, PlanarCurve};
use crate::initial::{build_phi, solve_q_phi, InitError, PhiData};
use crate::linsolve::{BandedLu, LinearSystem, LinsolveError};
use crate::mesh::{Mesh, MeshError};
use crate::norms::{trajectory_diff_norm, NormConfig};
use crate::state::{
    chart_along_flux, cofactor, elastic_term, gradient_scalar, gradient_vector,
    lagrangian_laplacian, pullback_gradient, residual_det_g, residual_incompressibility,
    residual_momentum, residual_traction, transported_gradient, zeta, MatrixField, ScalarField,
    StateError, VectorField,
};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("linear solve failed: {0}")]
    Lin(#[from] LinsolveError),
    #[error("state operator failed: {0}")]
    State(#[from] StateError),
    #[error("initial data failed: {0}")]
    Init(#[from] InitError),
    #[error("mesh rebuild failed: {0}")]
    Mesh(#[from] MeshError),
    #[error("boundary curve failed: {0}")]
    Curve(#[from] CurveError),
    #[error("frozen system requires a non-periodic mesh")]
    PeriodicMesh,
    #[error("fixed point stalled after {iters} iterations (last diff {last_diff:.3e})")]
    NotConverged { iters: usize, last_diff: f64 },
}

/// One velocity/pressure/flux/deformation iterate sampled at the K+1 time
/// levels of a window. `w` and `q_w` are the corrections on top of the
/// forcing profile phi and the initial pressure; level 0 is always
/// (0, 0, alpha, G0).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub w: Vec<VectorField>,
    pub q_w: Vec<ScalarField>,
    pub x: Vec<VectorField>,
    pub g: Vec<MatrixField>,
}

impl Trajectory {
    pub fn levels(&self) -> usize {
        self.w.len()
    }

    /// Total velocity phi(t_j) + w_j.
    pub fn velocity(&self, phi: &PhiData, dt: f64, j: usize) -> VectorField {
        let mut v = phi.at(j as f64 * dt);
        v.axpy(1.0, &self.w[j]);
        v
    }

    /// Total pressure q_phi + q_w,j.
    pub fn pressure(&self, q_phi: &ScalarField, j: usize) -> ScalarField {
        let mut q = q_phi.clone();
        q.axpy(1.0, &self.q_w[j]);
        q
    }
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    /// Composite norm of the difference between successive iterates.
    pub diffs: Vec<f64>,
    /// diffs[i] / diffs[i-1].
    pub ratios: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
}

impl IterationReport {
    /// Worst contraction ratio, ignoring the first (the distance from the
    /// zero-correction initial guess is not informative about the map).
    pub fn contraction_ratio(&self) -> Option<f64> {
        match self.ratios.len() {
            0 => None,
            1 => Some(self.ratios[0]),
            _ => Some(self.ratios[1..].iter().fold(f64::MIN, |a, &r| a.max(r))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardParams {
    pub max_iters: usize,
    /// Tolerance on the composite iterate-difference norm, relative to the
    /// first difference; the norm's absolute scale depends on the mesh and
    /// window, so an absolute cutoff would not be portable across configs.
    pub tol: f64,
    /// Under-relaxation factor in (0, 1]; 1 is a plain Picard update.
    pub relax: f64,
    /// Abort threshold on det(grad X).
    pub det_floor: f64,
    /// Pressure-stabilization coefficient for the frozen system.
    pub beta: f64,
    pub norms: NormConfig,
}

impl Default for PicardParams {
    fn default() -> Self {
        PicardParams {
            max_iters: 40,
            // The difference norm bottoms out near 1e-10 relative on
            // thousand-node grids (conditioning of the banded solves), so a
            // tighter default would stall at the rounding floor.
            tol: 1e-9,
            relax: 1.0,
            det_floor: 0.1,
            beta: 0.07,
            norms: NormConfig::default(),
        }
    }
}

/// Right-hand side of the frozen linear system at one time level.
#[derive(Debug, Clone)]
pub struct LevelData {
    pub f_mom: VectorField,
    pub g_rhs: ScalarField,
    /// Traction data per boundary node, in `mesh.boundary_nodes()` order.
    pub h_bnd: Vec<Vec2>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct RhsOptions {
    /// Test hook: flips the sign of the elastic stress in the traction data.
    pub flip_elastic_traction_sign: bool,
}

pub(crate) fn sym2(m: Mat2) -> Mat2 {
    m + m.transpose()
}

/// Frozen backward-Euler saddle system on the reference configuration,
/// factored once per window. Unknown layout per node p: (v1, v2, q) at rows
/// 3p, 3p+1, 3p+2. Interior nodes carry two momentum rows and the stabilized
/// trace row; boundary nodes carry two traction rows and the raw trace row.
pub struct FrozenSystem {
    pub dt: f64,
    pub beta: f64,
    lu: BandedLu,
}

/// Assemble the frozen system matrix. Exposed separately so small instances
/// can be cross-checked against a dense factorization.
pub fn assemble_saddle(
    mesh: &Mesh,
    chart: &Chart,
    dt: f64,
    beta: f64,
) -> Result<LinearSystem, SolveError> {
    if mesh.periodic1 || mesh.periodic2 {
        return Err(SolveError::PeriodicMesh);
    }
    let pos = VectorField::positions(mesh);
    let cf = chart_along_flux(chart, &pos)?;
    let n = mesh.len();
    let mut sys = LinearSystem::new(3 * n);
    for p in 0..n {
        let (i, j) = mesh.ij(p);
        let jm = cf.jac[p];
        let jcol = [Vec2::new(jm[(0, 0)], jm[(1, 0)]), Vec2::new(jm[(0, 1)], jm[(1, 1)])];
        let gs = mesh.grad_stencil(i, j);
        if let Some(b) = mesh.boundary_index_of(p) {
            let d = cf.jac_inv[p] * mesh.boundary_nodes()[b].normal;
            let jd = jm * d;
            for rc in 0..2 {
                let row = 3 * p + rc;
                // [-q I + (grad v J) + (grad v J)^T] d, component rc.
                sys.add(row, 3 * p + 2, -d[rc])?;
                for (r, w) in &gs {
                    sys.add(row, 3 * r + rc, w.dot(&jd))?;
                    let wj = w.dot(&jcol[rc]);
                    for vc in 0..2 {
                        sys.add(row, 3 * r + vc, d[vc] * wj)?;
                    }
                }
            }
            let row = 3 * p + 2;
            for (r, w) in &gs {
                for vc in 0..2 {
                    sys.add(row, 3 * r + vc, w.dot(&jcol[vc]))?;
                }
            }
        } else {
            let lap = mesh.laplacian_stencil(i, j);
            for rc in 0..2 {
                let row = 3 * p + rc;
                sys.add(row, 3 * p + rc, 1.0 / dt)?;
                for (r, w) in &lap {
                    sys.add(row, 3 * r + rc, -cf.q2[p] * w)?;
                }
                for (r, w) in &gs {
                    sys.add(row, 3 * r + 2, w.dot(&jcol[rc]))?;
                }
            }
            let row = 3 * p + 2;
            for (r, w) in &gs {
                for vc in 0..2 {
                    sys.add(row, 3 * r + vc, w.dot(&jcol[vc]))?;
                }
            }
            // Pressure stabilization, -beta h^2 lap q: unscaled index-space
            // second differences act as h_phys^2 d^2 q/ds^2 per axis, which
            // removes the checkerboard mode the centered gradient cannot see.
            // The sign must oppose the laplacian: with the opposite sign the
            // continuity row is singular at wavenumbers k^2 = 1/beta - 1/dt.
            // Interior nodes of a bounded axis always have both neighbors.
            sys.add(row, 3 * mesh.idx(i - 1, j) + 2, -beta)?;
            sys.add(row, 3 * mesh.idx(i + 1, j) + 2, -beta)?;
            sys.add(row, 3 * mesh.idx(i, j - 1) + 2, -beta)?;
            sys.add(row, 3 * mesh.idx(i, j + 1) + 2, -beta)?;
            sys.add(row, 3 * p + 2, 4.0 * beta)?;
        }
    }
    Ok(sys)
}

pub fn build_frozen(
    mesh: &Mesh,
    chart: &Chart,
    dt: f64,
    beta: f64,
) -> Result<FrozenSystem, SolveError> {
    let sys = assemble_saddle(mesh, chart, dt, beta)?;
    Ok(FrozenSystem { dt, beta, lu: sys.factor_banded()? })
}

impl FrozenSystem {
    /// One backward-Euler level: solve for (w_j, q_j) given the level data and
    /// the previous level's w.
    pub fn solve_level(
        &self,
        mesh: &Mesh,
        data: &LevelData,
        w_prev: &VectorField,
    ) -> Result<(VectorField, ScalarField), SolveError> {
        let n = mesh.len();
        let mut rhs = vec![0.0; 3 * n];
        for p in 0..n {
            if let Some(b) = mesh.boundary_index_of(p) {
                rhs[3 * p] = data.h_bnd[b][0];
                rhs[3 * p + 1] = data.h_bnd[b][1];
            } else {
                rhs[3 * p] = data.f_mom.0[p][0] + w_prev.0[p][0] / self.dt;
                rhs[3 * p + 1] = data.f_mom.0[p][1] + w_prev.0[p][1] / self.dt;
            }
            rhs[3 * p + 2] = data.g_rhs.0[p];
        }
        let sol = self.lu.solve(&rhs)?;
        let mut w = vec![Vec2::zeros(); n];
        let mut q = vec![0.0; n];
        for p in 0..n {
            w[p] = Vec2::new(sol[3 * p], sol[3 * p + 1]);
            q[p] = sol[3 * p + 2];
        }
        Ok((VectorField(w), ScalarField(q)))
    }
}

/// J^P(x) v per node.
fn chart_velocity(chart: &Chart, x: &VectorField, v: &VectorField) -> Result<VectorField, SolveError> {
    let cf = chart_along_flux(chart, x)?;
    Ok(VectorField((0..x.0.len()).map(|p| cf.jac[p] * v.0[p]).collect()))
}

/// Flux trajectory of the forcing profile alone, dX/dt = J^P(X) phi(t), by
/// Heun's predictor-corrector. Used as the zeroth iterate.
pub fn heun_flow(
    mesh: &Mesh,
    chart: &Chart,
    phi: &PhiData,
    dt: f64,
    k: usize,
) -> Result<Vec<VectorField>, SolveError> {
    let mut xs = vec![VectorField::positions(mesh)];
    for j in 0..k {
        let t = j as f64 * dt;
        let f1 = chart_velocity(chart, &xs[j], &phi.at(t))?;
        let mut xstar = xs[j].clone();
        xstar.axpy(dt, &f1);
        let f2 = chart_velocity(chart, &xstar, &phi.at(t + dt))?;
        let mut xn = xs[j].clone();
        xn.axpy(0.5 * dt, &f1);
        xn.axpy(0.5 * dt, &f2);
        xs.push(xn);
    }
    Ok(xs)
}

/// Next flux iterate: X_k = alpha + cumulative trapezoid of J^P(X_j) v_j,
/// with X and v taken from the previous iterate.
pub fn step_x(
    mesh: &Mesh,
    chart: &Chart,
    v: &[VectorField],
    x_prev: &[VectorField],
    dt: f64,
) -> Result<Vec<VectorField>, SolveError> {
    let k = v.len() - 1;
    let mut integrand = Vec::with_capacity(k + 1);
    for j in 0..=k {
        integrand.push(chart_velocity(chart, &x_prev[j], &v[j])?);
    }
    let mut acc = VectorField::positions(mesh);
    let mut out = vec![acc.clone()];
    for j in 0..k {
        acc.axpy(0.5 * dt, &integrand[j]);
        acc.axpy(0.5 * dt, &integrand[j + 1]);
        out.push(acc.clone());
    }
    Ok(out)
}

/// Next deformation iterate: G_k = G0 + cumulative trapezoid of the transport
/// generator (grad v zeta J^P(X)) G, all from the previous iterate.
#[allow(clippy::too_many_arguments)]
pub fn step_g(
    mesh: &Mesh,
    chart: &Chart,
    v: &[VectorField],
    x_prev: &[VectorField],
    g_prev: &[MatrixField],
    g0: &MatrixField,
    dt: f64,
    det_floor: f64,
) -> Result<Vec<MatrixField>, SolveError> {
    let k = v.len() - 1;
    let mut integrand = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let z = zeta(mesh, &x_prev[j], det_floor)?;
        let cf = chart_along_flux(chart, &x_prev[j])?;
        let tg = transported_gradient(mesh, &v[j], &z, &cf.jac);
        integrand.push(MatrixField(
            (0..mesh.len()).map(|p| tg.0[p] * g_prev[j].0[p]).collect(),
        ));
    }
    let mut acc = g0.clone();
    let mut out = vec![acc.clone()];
    for j in 0..k {
        acc.axpy(0.5 * dt, &integrand[j]);
        acc.axpy(0.5 * dt, &integrand[j + 1]);
        out.push(acc.clone());
    }
    Ok(out)
}

/// Right-hand side of the frozen system at levels 1..=K, evaluated on the
/// previous iterate. The reference-frozen operator applied to the old w and
/// q_w is subtracted back so that at a fixed point the solved w satisfies the
/// flowed-configuration equations; the forcing-profile terms carry the
/// momentum balance, trace defect, and boundary traction of phi itself.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_rhs_opts(
    mesh: &Mesh,
    chart: &Chart,
    traj: &Trajectory,
    phi: &PhiData,
    q_phi: &ScalarField,
    dt: f64,
    det_floor: f64,
    opts: &RhsOptions,
) -> Result<Vec<LevelData>, SolveError> {
    let k = traj.levels() - 1;
    let n = mesh.len();
    let pos = VectorField::positions(mesh);
    let cf_ref = chart_along_flux(chart, &pos)?;
    let id = MatrixField::identity(mesh);
    let elast_sign = if opts.flip_elastic_traction_sign { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(k);
    for j in 1..=k {
        let t = j as f64 * dt;
        let w = &traj.w[j];
        let qw = &traj.q_w[j];
        let x = &traj.x[j];
        let g = &traj.g[j];
        let phi_t = phi.at(t);
        let dphi_t = phi.dt_at(t);
        let z = zeta(mesh, x, det_floor)?;
        let cf_x = chart_along_flux(chart, x)?;

        let lap_w_ref = lagrangian_laplacian(mesh, w, &id);
        let gqw_ref = gradient_scalar(mesh, qw);
        let lap_w_x = lagrangian_laplacian(mesh, w, &z);
        let dqw_x = pullback_gradient(mesh, qw, &z);
        let lap_phi_x = lagrangian_laplacian(mesh, &phi_t, &z);
        let dqphi_x = pullback_gradient(mesh, q_phi, &z);
        let el = elastic_term(mesh, g, &z, &cf_x.jac);

        let mut f = vec![Vec2::zeros(); n];
        for p in 0..n {
            f[p] = -cf_ref.q2[p] * lap_w_ref.0[p]
                + cf_ref.jac[p].transpose() * gqw_ref.0[p]
                + cf_x.q2[p] * lap_w_x.0[p]
                - cf_x.jac[p].transpose() * dqw_x.0[p]
                + el.0[p]
                - dphi_t.0[p]
                + cf_x.q2[p] * lap_phi_x.0[p]
                - cf_x.jac[p].transpose() * dqphi_x.0[p];
        }

        let tg_w_ref = transported_gradient(mesh, w, &id, &cf_ref.jac);
        let tg_w_x = transported_gradient(mesh, w, &z, &cf_x.jac);
        let tg_phi_x = transported_gradient(mesh, &phi_t, &z, &cf_x.jac);
        let mut gr = vec![0.0; n];
        for p in 0..n {
            gr[p] = tg_w_ref.0[p].trace() - tg_w_x.0[p].trace() - tg_phi_x.0[p].trace();
        }

        let gx = gradient_vector(mesh, x);
        let mut h = Vec::with_capacity(mesh.boundary_nodes().len());
        for b in mesh.boundary_nodes() {
            let p = b.node;
            let d_ref = cf_ref.jac_inv[p] * b.normal;
            let d_x = cf_x.jac_inv[p] * cofactor(gx.0[p]) * b.normal;
            let gg = g.0[p] * g.0[p].transpose() - Mat2::identity();
            h.push(
                -qw.0[p] * d_ref + qw.0[p] * d_x + sym2(tg_w_ref.0[p]) * d_ref
                    - sym2(tg_w_x.0[p]) * d_x
                    + elast_sign * (gg * d_x)
                    + q_phi.0[p] * d_x
                    - sym2(tg_phi_x.0[p]) * d_x,
            );
        }

        out.push(LevelData { f_mom: VectorField(f), g_rhs: ScalarField(gr), h_bnd: h });
    }
    Ok(out)
}

pub fn assemble_rhs(
    mesh: &Mesh,
    chart: &Chart,
    traj: &Trajectory,
    phi: &PhiData,
    q_phi: &ScalarField,
    dt: f64,
    det_floor: f64,
) -> Result<Vec<LevelData>, SolveError> {
    assemble_rhs_opts(mesh, chart, traj, phi, q_phi, dt, det_floor, &RhsOptions::default())
}

fn blend_scalars(new: &mut [ScalarField], old: &[ScalarField], relax: f64) {
    for (n, o) in new.iter_mut().zip(old) {
        n.scale(relax);
        n.axpy(1.0 - relax, o);
    }
}

fn blend_vectors(new: &mut [VectorField], old: &[VectorField], relax: f64) {
    for (n, o) in new.iter_mut().zip(old) {
        n.scale(relax);
        n.axpy(1.0 - relax, o);
    }
}

fn blend_matrices(new: &mut [MatrixField], old: &[MatrixField], relax: f64) {
    for (n, o) in new.iter_mut().zip(old) {
        n.scale(relax);
        n.axpy(1.0 - relax, o);
    }
}

/// Run the window fixed-point iteration to `tol` or `max_iters`, whichever
/// comes first; exhausting the budget is reported, not an error, so callers
/// can still inspect the contraction history.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    mesh: &Mesh,
    chart: &Chart,
    phi: &PhiData,
    q_phi: &ScalarField,
    g0: &MatrixField,
    horizon: f64,
    k_levels: usize,
    params: &PicardParams,
) -> Result<(Trajectory, IterationReport), SolveError> {
    picard_iterate_opts(mesh, chart, phi, q_phi, g0, horizon, k_levels, params, &RhsOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn picard_iterate_opts(
    mesh: &Mesh,
    chart: &Chart,
    phi: &PhiData,
    q_phi: &ScalarField,
    g0: &MatrixField,
    horizon: f64,
    k_levels: usize,
    params: &PicardParams,
    opts: &RhsOptions,
) -> Result<(Trajectory, IterationReport), SolveError> {
    let k = k_levels;
    let dt = horizon / k as f64;
    let mut traj = Trajectory {
        w: vec![VectorField::zeros(mesh); k + 1],
        q_w: vec![ScalarField::zeros(mesh); k + 1],
        x: heun_flow(mesh, chart, phi, dt, k)?,
        g: vec![g0.clone(); k + 1],
    };
    let frozen = build_frozen(mesh, chart, dt, params.beta)?;
    let mut diffs = Vec::new();
    let mut ratios = Vec::new();
    for it in 1..=params.max_iters {
        let v: Vec<VectorField> = (0..=k).map(|j| traj.velocity(phi, dt, j)).collect();
        let data = assemble_rhs_opts(mesh, chart, &traj, phi, q_phi, dt, params.det_floor, opts)?;
        let mut w_new = vec![VectorField::zeros(mesh)];
        let mut q_new = vec![ScalarField::zeros(mesh)];
        for j in 1..=k {
            let (wj, qj) = frozen.solve_level(mesh, &data[j - 1], &w_new[j - 1])?;
            w_new.push(wj);
            q_new.push(qj);
        }
        let mut x_new = step_x(mesh, chart, &v, &traj.x, dt)?;
        let mut g_new = step_g(mesh, chart, &v, &traj.x, &traj.g, g0, dt, params.det_floor)?;
        if params.relax != 1.0 {
            blend_vectors(&mut w_new, &traj.w, params.relax);
            blend_scalars(&mut q_new, &traj.q_w, params.relax);
            blend_vectors(&mut x_new, &traj.x, params.relax);
            blend_matrices(&mut g_new, &traj.g, params.relax);
        }
        let dw: Vec<VectorField> = (0..=k).map(|j| w_new[j].sub(&traj.w[j])).collect();
        let dq: Vec<ScalarField> = (0..=k).map(|j| q_new[j].sub(&traj.q_w[j])).collect();
        let dx: Vec<VectorField> = (0..=k).map(|j| x_new[j].sub(&traj.x[j])).collect();
        let dg: Vec<MatrixField> = (0..=k).map(|j| g_new[j].sub(&traj.g[j])).collect();
        let diff = trajectory_diff_norm(mesh, &dw, &dq, &dx, &dg, dt, &params.norms);
        if !diff.is_finite() {
            return Err(SolveError::NotConverged { iters: it, last_diff: diff });
        }
        if let Some(&prev) = diffs.last() {
            ratios.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        diffs.push(diff);
        traj = Trajectory { w: w_new, q_w: q_new, x: x_new, g: g_new };
        // Relative to the first difference; at iteration 1 this only fires
        // when the data is an exact fixed point (diff identically zero).
        if diff <= params.tol * diffs[0] {
            let report = IterationReport { diffs, ratios, iters: it, converged: true };
            return Ok((traj, report));
        }
    }
    let iters = params.max_iters;
    let report = IterationReport { diffs, ratios, iters, converged: false };
    Ok((traj, report))
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct GapSample {
    pub t: f64,
    pub gap: f64,
}

/// Snapshot of a window's starting data, kept so a splash bracket can be
/// re-run from the same state at a finer time step.
#[derive(Debug, Clone)]
pub struct WindowState {
    pub nodes: Vec<Vec2>,
    pub v0: VectorField,
    pub g0: MatrixField,
    pub t_start: f64,
}

#[derive(Debug, Clone)]
pub struct WindowRecord {
    pub t_start: f64,
    pub iters: usize,
    pub diffs: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Minimum self-gap of the physical boundary at each checked level.
    pub gaps: Vec<GapSample>,
    /// Divergence defect of the window's (possibly re-based) initial data.
    pub compat_div: f64,
    pub residual_momentum: f64,
    pub residual_incompressibility: f64,
    pub residual_traction: f64,
    pub residual_det_g: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarchEvent {
    /// All windows ran without hitting a threshold.
    Completed,
    /// Physical boundary self-gap dropped below the splash threshold between
    /// consecutive levels.
    SplashBracket { t_lo: f64, t_hi: f64, gap: f64 },
    /// Pulled-back boundary ran into the chart's branch cut.
    CutProximity { t: f64, dist: f64 },
    /// det(grad X) fell below the floor; the flux map stopped being usable.
    FluxDegenerate { t: f64, det: f64 },
    /// Physical boundary curvature exceeded its allowed growth factor.
    CurvatureBound { t: f64, max_curvature: f64 },
}

#[derive(Debug, Clone)]
pub struct MarchParams {
    pub windows: usize,
    pub window_t: f64,
    pub k_levels: usize,
    pub picard: PicardParams,
    /// Abort when boundary curvature exceeds this multiple of its initial max.
    pub curvature_factor: f64,
    /// Abort when the boundary is closer to the cut than this fraction of the
    /// initial physical diameter.
    pub cut_abort_rel: f64,
    /// Splash threshold as a fraction of the initial physical diameter.
    pub splash_rel: f64,
    /// Arclength window excluded around each node in the self-gap search, as
    /// a multiple of the boundary's mean node spacing.
    pub exclusion_factor: f64,
    /// Fixed threshold/exclusion overrides so refinement re-runs measure
    /// against the original geometry.
    pub threshold_abs: Option<f64>,
    pub exclusion_abs: Option<f64>,
}

impl Default for MarchParams {
    fn default() -> Self {
        MarchParams {
            windows: 1,
            window_t: 0.25,
            k_levels: 16,
            picard: PicardParams::default(),
            curvature_factor: 10.0,
            cut_abort_rel: 1e-9,
            splash_rel: 1e-3,
            exclusion_factor: 8.0,
            threshold_abs: None,
            exclusion_abs: None,
        }
    }
}

#[derive(Debug)]
pub struct MarchOutcome {
    pub records: Vec<WindowRecord>,
    pub window_starts: Vec<WindowState>,
    /// State at the end of the last window; only present when every window
    /// completed, since an aborted window has no well-defined end state.
    pub final_state: Option<WindowState>,
    pub event: MarchEvent,
    pub threshold: f64,
    pub exclusion: f64,
}

fn boundary_curve(mesh: &Mesh, positions: &VectorField, loop_id: usize) -> Result<PlanarCurve, CurveError> {
    PlanarCurve::new(mesh.boundary_polyline(loop_id, &positions.0))
}

fn max_abs_curvature(c: &PlanarCurve) -> f64 {
    c.curvature().iter().fold(0.0f64, |a, &k| a.max(k.abs()))
}

/// March the state through consecutive windows, re-basing the reference
/// configuration on the flowed mesh after each one. Gap, cut, flux, and
/// curvature monitors run on every time level; the first trigger ends the
/// march with the corresponding event.
pub fn march(
    mesh0: &Mesh,
    chart: &Chart,
    v0_in: &VectorField,
    g0_in: &MatrixField,
    params: &MarchParams,
) -> Result<MarchOutcome, SolveError> {
    let k = params.k_levels;
    let dt = params.window_t / k as f64;
    let mut mesh = mesh0.clone();
    let mut v0 = v0_in.clone();
    let mut g0 = g0_in.clone();

    let tilde0 = boundary_curve(&mesh, &VectorField::positions(&mesh), 0)?;
    let phys0 = tilde0.pullback(chart)?;
    let threshold = params.threshold_abs.unwrap_or(params.splash_rel * phys0.diameter());
    let exclusion = params.exclusion_abs.unwrap_or(params.exclusion_factor * phys0.mean_spacing());
    let curv_cap = params.curvature_factor * max_abs_curvature(&phys0).max(1e-12);
    let phys_diam0 = phys0.diameter();

    let mut records = Vec::new();
    let mut starts = Vec::new();
    let mut event = MarchEvent::Completed;
    let mut t0 = 0.0;
    'windows: for widx in 0..params.windows {
        starts.push(WindowState {
            nodes: mesh.nodes().to_vec(),
            v0: v0.clone(),
            g0: g0.clone(),
            t_start: t0,
        });
        let compat_div = residual_incompressibility(
            &mesh,
            chart,
            &v0,
            &VectorField::positions(&mesh),
            params.picard.det_floor,
        )?
        .max_abs();
        let q_phi = solve_q_phi(&mesh, chart, &v0, &g0)?;
        let phi = build_phi(&mesh, chart, &v0, &g0, &q_phi)?;
        let (traj, report) = match picard_iterate(
            &mesh, chart, &phi, &q_phi, &g0, params.window_t, k, &params.picard,
        ) {
            Ok(r) => r,
            Err(SolveError::State(StateError::DegenerateFlux { det, .. })) => {
                event = MarchEvent::FluxDegenerate { t: t0, det };
                break 'windows;
            }
            Err(e) => return Err(e),
        };
        if !report.converged {
            return Err(SolveError::NotConverged {
                iters: report.iters,
                last_diff: report.diffs.last().copied().unwrap_or(f64::NAN),
            });
        }

        let mut gaps = Vec::new();
        // Level 0 of a later window equals the previous window's last level.
        let j_start = if widx == 0 { 0 } else { 1 };
        for j in j_start..=k {
            let t = t0 + j as f64 * dt;
            let tilde = boundary_curve(&mesh, &traj.x[j], 0)?;
            let phys = tilde.pullback(chart)?;
            let dcut = phys.distance_to_cut(chart);
            if dcut < params.cut_abort_rel * phys_diam0 {
                event = MarchEvent::CutProximity { t, dist: dcut };
                break;
            }
            let mc = max_abs_curvature(&phys);
            if mc > curv_cap {
                event = MarchEvent::CurvatureBound { t, max_curvature: mc };
                break;
            }
            let gap = phys.min_gap(exclusion);
            gaps.push(GapSample { t, gap });
            if gap < threshold {
                event = MarchEvent::SplashBracket { t_lo: (t - dt).max(0.0), t_hi: t, gap };
                break;
            }
        }

        let vk = traj.velocity(&phi, dt, k);
        let vkm1 = traj.velocity(&phi, dt, k - 1);
        let qk = traj.pressure(&q_phi, k);
        let floor = params.picard.det_floor;
        let rm = residual_momentum(&mesh, chart, &vk, &vkm1, dt, &qk, &traj.x[k], &traj.g[k], floor)?
            .max_norm();
        let ri = residual_incompressibility(&mesh, chart, &vk, &traj.x[k], floor)?.max_abs();
        let rt = residual_traction(&mesh, chart, &vk, &qk, &traj.x[k], &traj.g[k], floor)?
            .iter()
            .fold(0.0f64, |a, r| a.max(r.norm()));
        let rg = residual_det_g(&traj.g[k]).max_abs();
        records.push(WindowRecord {
            t_start: t0,
            iters: report.iters,
            diffs: report.diffs.clone(),
            ratios: report.ratios.clone(),
            gaps,
            compat_div,
            residual_momentum: rm,
            residual_incompressibility: ri,
            residual_traction: rt,
            residual_det_g: rg,
        });
        if !matches!(event, MarchEvent::Completed) {
            break 'windows;
        }

        mesh = Mesh::from_nodes(traj.x[k].0.clone(), mesh.n1, mesh.n2, mesh.periodic1, mesh.periodic2)?;
        v0 = vk;
        g0 = traj.g[k].clone();
        t0 += params.window_t;
    }
    let final_state = matches!(event, MarchEvent::Completed).then(|| WindowState {
        nodes: mesh.nodes().to_vec(),
        v0,
        g0,
        t_start: t0,
    });
    Ok(MarchOutcome { records, window_starts: starts, final_state, event, threshold, exclusion })
}

#[derive(Debug)]
pub struct SplashSearchOutcome {
    pub coarse: MarchOutcome,
    pub refinements: Vec<MarchOutcome>,
    /// Successively halved time brackets around the first gap crossing,
    /// coarsest first, in absolute time.
    pub brackets: Vec<(f64, f64)>,
}

impl SplashSearchOutcome {
    pub fn splash_detected(&self) -> bool {
        !self.brackets.is_empty()
    }
}

/// March until the self-gap threshold trips, then re-run the bracketing
/// window from its stored starting state at successively halved time steps.
/// Each re-run that still crosses tightens the bracket by a factor of two; a
/// re-run that stops crossing keeps the last bracket and ends the search.
pub fn splash_search(
    mesh: &Mesh,
    chart: &Chart,
    v0: &VectorField,
    g0: &MatrixField,
    params: &MarchParams,
    bisect_depth: usize,
) -> Result<SplashSearchOutcome, SolveError> {
    let coarse = march(mesh, chart, v0, g0, params)?;
    let mut brackets = Vec::new();
    let mut refinements = Vec::new();
    if let MarchEvent::SplashBracket { t_lo, t_hi, .. } = coarse.event {
        brackets.push((t_lo, t_hi));
        let ws = coarse.window_starts[coarse.records.len() - 1].clone();
        let mut k = params.k_levels;
        for _ in 0..bisect_depth {
            k *= 2;
            let mesh_w = Mesh::from_nodes(
                ws.nodes.clone(),
                mesh.n1,
                mesh.n2,
                mesh.periodic1,
                mesh.periodic2,
            )?;
            let mut p = params.clone();
            p.windows = 1;
            p.k_levels = k;
            // The attainable difference-norm floor grows with the level
            // count, so a refined re-run cannot hold the base tolerance.
            p.picard.tol = params.picard.tol * (k / params.k_levels) as f64;
            p.threshold_abs = Some(coarse.threshold);
            p.exclusion_abs = Some(coarse.exclusion);
            let re = march(&mesh_w, chart, &ws.v0, &ws.g0, &p)?;
            let crossed = matches!(re.event, MarchEvent::SplashBracket { .. });
            if let MarchEvent::SplashBracket { t_lo, t_hi, .. } = re.event {
                brackets.push((ws.t_start + t_lo, ws.t_start + t_hi));
            }
            refinements.push(re);
            if !crossed {
                break;
            }
        }
    }
    Ok(SplashSearchOutcome { coarse, refinements, brackets })
}
