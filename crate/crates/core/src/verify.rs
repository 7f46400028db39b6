//! Acceptance checks. Each criterion exercises one contract of the solver
//! against an independent oracle (closed forms, finite differences, dense
//! factorization, matrix exponentials, refinement studies) and reports a
//! single pass/fail with the measured numbers.

use anyhow::{anyhow, ensure, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chart::{Chart, Mat2, Vec2};
use crate::commands::stability_distances;
use crate::config::{
    GeometryConfig, InitialConfig, RunConfig, Setup, StabilityConfig, WindowConfig,
};
use crate::initial::{
    build_phi, check_compatibility, deformation_at, solve_q_phi, velocity_at, BumpSpec, F0Spec,
    SideStream, TubularFrame,
};
use crate::mesh::Mesh;
use crate::norms::{embedding_ratios, sobolev_hs_scalar, NormConfig};
use crate::report::fit_log_slope;
use crate::solver::{
    assemble_saddle, build_frozen, picard_iterate, splash_search, step_g, step_x, sym2,
    IterationReport, LevelData, MarchEvent, PicardParams, Trajectory,
};
use crate::state::{residual_det_g, MatrixField, ScalarField, VectorField};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    (1..=10).map(|id| run_one(id, seed)).collect()
}

pub fn run_one(id: usize, seed: u64) -> CriterionResult {
    let (name, out) = match id {
        1 => ("chart calculus", criterion_1(seed)),
        2 => ("rest state fixed point", criterion_2(seed)),
        3 => ("solver convergence orders", criterion_3(seed)),
        4 => ("factorization and transport oracles", criterion_4(seed)),
        5 => ("deformation determinant drift", criterion_5(seed)),
        6 => ("iteration contraction trend", criterion_6(seed)),
        7 => ("shift stability slope", criterion_7(seed)),
        8 => ("splash bracketing", criterion_8(seed)),
        9 => ("initial data compatibility", criterion_9(seed)),
        10 => ("norm calculus", criterion_10(seed)),
        _ => (
            "unknown",
            Err(anyhow!("no criterion with id {id}")),
        ),
    };
    match out {
        Ok((pass, details)) => CriterionResult { id, name, pass, details },
        Err(e) => CriterionResult { id, name, pass: false, details: format!("error: {e:#}") },
    }
}

type Check = Result<(bool, String)>;

// ---------------------------------------------------------------- 1: chart

fn criterion_1(seed: u64) -> Check {
    let chart = Chart::sqrt_default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC1);
    let mut worst_rt = 0.0f64;
    let mut worst_fd = 0.0f64;
    let mut worst_det = 0.0f64;
    let fd_h = 1e-6;
    for _ in 0..1000 {
        let r = rng.gen_range(0.25..2.0);
        let th = rng.gen_range(-0.93..0.93) * std::f64::consts::PI;
        let z = Vec2::new(r * th.cos(), r * th.sin());
        let zt = chart.forward(z)?;
        worst_rt = worst_rt.max((chart.inverse(zt) - z).norm() / (1.0 + z.norm()));
        let jac = chart.jacobian(zt)?;
        let mut fd = Mat2::zeros();
        for c in 0..2 {
            let mut e = Vec2::zeros();
            e[c] = fd_h;
            let col = (chart.forward(z + e)? - chart.forward(z - e)?) / (2.0 * fd_h);
            fd[(0, c)] = col.x;
            fd[(1, c)] = col.y;
        }
        worst_fd = worst_fd.max((jac - fd).abs().max());
        worst_det = worst_det.max((chart.metric_q2(zt)? - jac.determinant()).abs());
    }
    let pass = worst_rt <= 1e-10 && worst_fd <= 1e-5 && worst_det <= 1e-10;
    Ok((
        pass,
        format!(
            "1000 samples: roundtrip {worst_rt:.2e} (<=1e-10), FD jacobian {worst_fd:.2e} \
             (<=1e-5), q2 vs det {worst_det:.2e} (<=1e-10)"
        ),
    ))
}

// ----------------------------------------------------------------- 2: rest

fn criterion_2(_seed: u64) -> Check {
    let cfg = RunConfig {
        geometry: GeometryConfig::Sector {
            center: [0.0, 0.0],
            r0: 0.6,
            r1: 1.4,
            theta0: -0.9,
            theta1: 0.9,
            n1: 20,
            n2: 28,
        },
        window: WindowConfig { horizon: 0.2, k_levels: 8, windows: 2 },
        ..RunConfig::default()
    };
    let setup = cfg.build()?;
    let mut params = cfg.march_params();
    params.picard.tol = 1e-12;
    let out = crate::solver::march(&setup.mesh, &setup.chart, &setup.v0, &setup.g0, &params)?;
    ensure!(matches!(out.event, MarchEvent::Completed), "rest march ended with {:?}", out.event);
    let mut worst_res = 0.0f64;
    let mut max_iters = 0usize;
    for rec in &out.records {
        max_iters = max_iters.max(rec.iters);
        worst_res = worst_res
            .max(rec.residual_momentum)
            .max(rec.residual_incompressibility)
            .max(rec.residual_traction)
            .max(rec.residual_det_g);
    }
    let pass = max_iters == 1 && worst_res <= 1e-12;
    Ok((
        pass,
        format!(
            "{} windows: iterations per window {max_iters} (==1), max residual {worst_res:.2e} \
             (<=1e-12)",
            out.records.len()
        ),
    ))
}

// --------------------------------------------------- 3: convergence orders

struct RectMms {
    t_of: fn(f64) -> f64,
    dt_of: fn(f64) -> f64,
}

impl RectMms {
    fn vs(x: Vec2) -> Vec2 {
        Vec2::new(
            x.x * x.x + 2.0 * x.y * x.y + x.x * x.y,
            0.5 * x.x * x.x + x.y * x.y - 2.0 * x.x * x.y,
        )
    }
    fn grad_vs(x: Vec2) -> Mat2 {
        Mat2::new(2.0 * x.x + x.y, 4.0 * x.y + x.x, x.x - 2.0 * x.y, 2.0 * x.y - 2.0 * x.x)
    }
    fn qs(x: Vec2) -> f64 {
        2.0 * x.x - 3.0 * x.y + 1.0
    }
    fn data_at(&self, mesh: &Mesh, t: f64) -> LevelData {
        let tf = (self.t_of)(t);
        let tdf = (self.dt_of)(t);
        let f = VectorField(
            mesh.nodes()
                .iter()
                .map(|&x| tdf * Self::vs(x) - tf * Vec2::new(6.0, 3.0) + tf * Vec2::new(2.0, -3.0))
                .collect(),
        );
        let g = ScalarField(mesh.nodes().iter().map(|&x| tf * Self::grad_vs(x).trace()).collect());
        let h = mesh
            .boundary_nodes()
            .iter()
            .map(|b| {
                let x = mesh.node(b.node);
                (-tf * Self::qs(x) * Mat2::identity() + tf * sym2(Self::grad_vs(x))) * b.normal
            })
            .collect();
        LevelData { f_mom: f, g_rhs: g, h_bnd: h }
    }
}

fn mms_time_error(mesh: &Mesh, mms: &RectMms, horizon: f64, k: usize) -> Result<f64> {
    let dt = horizon / k as f64;
    let frozen = build_frozen(mesh, &Chart::Identity, dt, 0.07)?;
    let mut w = VectorField::zeros(mesh);
    let mut ev = 0.0f64;
    for j in 1..=k {
        let t = j as f64 * dt;
        let data = mms.data_at(mesh, t);
        let (wj, _) = frozen.solve_level(mesh, &data, &w)?;
        let vex = VectorField(mesh.nodes().iter().map(|&x| (mms.t_of)(t) * RectMms::vs(x)).collect());
        ev = ev.max(wj.sub(&vex).max_norm());
        w = wj;
    }
    Ok(ev)
}

/// Max-norm of `d` after removing its least-squares rigid-motion component.
/// With pure traction data and a negligible time term the velocity is only
/// determined up to rigid motions, so recovery is measured modulo them.
fn deflate_rigid(mesh: &Mesh, d: &VectorField) -> f64 {
    let n = mesh.len() as f64;
    let centroid = mesh.nodes().iter().sum::<Vec2>() / n;
    let rot = |x: Vec2| Vec2::new(-(x.y - centroid.y), x.x - centroid.x);
    let mut gram = nalgebra::Matrix3::<f64>::zeros();
    let mut rhs = nalgebra::Vector3::<f64>::zeros();
    for (p, &x) in mesh.nodes().iter().enumerate() {
        let basis = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), rot(x)];
        for (i, bi) in basis.iter().enumerate() {
            for (j, bj) in basis.iter().enumerate() {
                gram[(i, j)] += bi.dot(bj);
            }
            rhs[i] += basis[i].dot(&d.0[p]);
        }
    }
    let coef = gram.lu().solve(&rhs).unwrap_or_else(nalgebra::Vector3::zeros);
    mesh.nodes()
        .iter()
        .enumerate()
        .map(|(p, &x)| {
            (d.0[p] - coef[0] * Vec2::new(1.0, 0.0) - coef[1] * Vec2::new(0.0, 1.0)
                - coef[2] * rot(x))
            .norm()
        })
        .fold(0.0f64, f64::max)
}

fn steady_trig_error(n: usize) -> Result<f64> {
    let mesh = Mesh::rect(Vec2::zeros(), Vec2::new(1.0, 1.0), n, n)?;
    let vs = |x: Vec2| Vec2::new(x.x.sin() * x.y.cos(), x.x.cos() * (2.0 * x.y).sin());
    let grad_vs = |x: Vec2| {
        Mat2::new(
            x.x.cos() * x.y.cos(),
            -x.x.sin() * x.y.sin(),
            -x.x.sin() * (2.0 * x.y).sin(),
            2.0 * x.x.cos() * (2.0 * x.y).cos(),
        )
    };
    let lap_vs =
        |x: Vec2| Vec2::new(-2.0 * x.x.sin() * x.y.cos(), -5.0 * x.x.cos() * (2.0 * x.y).sin());
    let qs = |x: Vec2| (x.x + 2.0 * x.y).cos();
    let grad_qs = |x: Vec2| Vec2::new(-(x.x + 2.0 * x.y).sin(), -2.0 * (x.x + 2.0 * x.y).sin());
    let dt = 1e7;
    let frozen = build_frozen(&mesh, &Chart::Identity, dt, 0.07)?;
    let f = VectorField(mesh.nodes().iter().map(|&x| -lap_vs(x) + grad_qs(x)).collect());
    let g = ScalarField(mesh.nodes().iter().map(|&x| grad_vs(x).trace()).collect());
    let h = mesh
        .boundary_nodes()
        .iter()
        .map(|b| {
            let x = mesh.node(b.node);
            (-qs(x) * Mat2::identity() + sym2(grad_vs(x))) * b.normal
        })
        .collect();
    let data = LevelData { f_mom: f, g_rhs: g, h_bnd: h };
    let (w, q) = frozen.solve_level(&mesh, &data, &VectorField::zeros(&mesh))?;
    let qex = ScalarField(mesh.nodes().iter().map(|&x| qs(x)).collect());
    let ev = deflate_rigid(&mesh, &w.sub(&vex_field(&mesh, vs)));
    Ok(ev.max(q.sub(&qex).max_abs()))
}

fn vex_field(mesh: &Mesh, vs: impl Fn(Vec2) -> Vec2) -> VectorField {
    VectorField(mesh.nodes().iter().map(|&x| vs(x)).collect())
}

fn criterion_3(_seed: u64) -> Check {
    let mesh = Mesh::rect(Vec2::zeros(), Vec2::new(1.0, 1.0), 13, 13)?;
    let mms = RectMms { t_of: |t| (3.0 * t).sin(), dt_of: |t| 3.0 * (3.0 * t).cos() };
    let et: Vec<f64> = [6usize, 12, 24]
        .iter()
        .map(|&k| mms_time_error(&mesh, &mms, 0.3, k))
        .collect::<Result<_>>()?;
    let order_t = (et[1] / et[2]).log2();
    let eh: Vec<f64> =
        [11usize, 21, 41].iter().map(|&n| steady_trig_error(n)).collect::<Result<_>>()?;
    let order_h = (eh[1] / eh[2]).log2();
    let pass = order_t >= 1.0 && order_h >= 1.8;
    Ok((
        pass,
        format!(
            "time order {order_t:.3} (>=1.0; errors {:.2e}/{:.2e}/{:.2e}), space order \
             {order_h:.3} (>=1.8; errors {:.2e}/{:.2e}/{:.2e})",
            et[0], et[1], et[2], eh[0], eh[1], eh[2]
        ),
    ))
}

// ------------------------------------------- 4: dense and transport oracles

fn expm2(m: Mat2) -> Mat2 {
    let mut term = Mat2::identity();
    let mut sum = Mat2::identity();
    for k in 1..30 {
        term = term * m / (k as f64);
        sum += term;
    }
    sum
}

fn linear_flow_errors(k: usize) -> Result<(f64, f64)> {
    let mesh = Mesh::rect(Vec2::new(-0.5, -0.5), Vec2::new(0.5, 0.5), 9, 9)?;
    let chart = Chart::Identity;
    let m0 = Mat2::new(0.3, 0.4, 0.2, -0.3);
    let horizon = 0.5;
    let dt = horizon / k as f64;
    let mut v = Vec::new();
    let mut x = Vec::new();
    let mut g = Vec::new();
    for j in 0..=k {
        let e = expm2((j as f64 * dt) * m0);
        x.push(VectorField(mesh.nodes().iter().map(|&a| e * a).collect()));
        v.push(VectorField(mesh.nodes().iter().map(|&a| m0 * (e * a)).collect()));
        g.push(MatrixField(vec![e; mesh.len()]));
    }
    let g0 = MatrixField::identity(&mesh);
    let xs = step_x(&mesh, &chart, &v, &x, dt)?;
    let gs = step_g(&mesh, &chart, &v, &x, &g, &g0, dt, 0.1)?;
    let mut ex = 0.0f64;
    let mut eg = 0.0f64;
    for j in 0..=k {
        ex = ex.max(xs[j].sub(&x[j]).max_norm());
        eg = eg.max(gs[j].sub(&g[j]).max_norm());
    }
    Ok((ex, eg))
}

fn criterion_4(seed: u64) -> Check {
    let mesh = Mesh::sector(Vec2::zeros(), 0.7, 1.3, -0.8, 0.8, 10, 12)?;
    let chart = Chart::sqrt_default();
    let sys = assemble_saddle(&mesh, &chart, 0.05, 0.07)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC4);
    let n = 3 * mesh.len();
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let banded = sys.factor_banded()?.solve(&rhs)?;
    let dense = sys
        .to_dense()
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(&rhs))
        .ok_or_else(|| anyhow!("dense factorization failed"))?;
    let scale = dense.amax().max(1.0);
    let lin_diff = banded
        .iter()
        .zip(dense.iter())
        .fold(0.0f64, |a, (b, d)| a.max((b - d).abs()))
        / scale;

    let (ex1, eg1) = linear_flow_errors(8)?;
    let (ex2, eg2) = linear_flow_errors(16)?;
    let ox = (ex1 / ex2).log2();
    let og = (eg1 / eg2).log2();
    let pass = lin_diff <= 1e-9 && ox >= 1.8 && og >= 1.8;
    Ok((
        pass,
        format!(
            "banded vs dense {lin_diff:.2e} (<=1e-9) on a {}x{} section; exponential-flow \
             orders: flux {ox:.3}, deformation {og:.3} (>=1.8)",
            10, 12
        ),
    ))
}

// -------------------------------------------------- shared driven scenario

fn driven_sector_config(n1: usize, n2: usize, amp: f64, horizon: f64, k: usize) -> RunConfig {
    RunConfig {
        geometry: GeometryConfig::Sector {
            center: [0.0, 0.0],
            r0: 0.6,
            r1: 1.4,
            theta0: -0.9,
            theta1: 0.9,
            n1,
            n2,
        },
        initial: InitialConfig {
            f0: F0Spec::Identity,
            sides: vec![SideStream {
                frame: TubularFrame::Circle {
                    center: [0.0, 0.0],
                    radius: 1.96,
                    theta0: 0.0,
                    outward: true,
                },
                bumps: vec![BumpSpec { center: 0.0, width: 1.4, amp }],
                width_in: 0.05,
                width_out: 0.85,
            }],
        },
        window: WindowConfig { horizon, k_levels: k, windows: 1 },
        ..RunConfig::default()
    }
}

fn run_picard(
    setup: &Setup,
    horizon: f64,
    k: usize,
    params: &PicardParams,
) -> Result<(Trajectory, IterationReport)> {
    let q_phi = solve_q_phi(&setup.mesh, &setup.chart, &setup.v0, &setup.g0)?;
    let phi = build_phi(&setup.mesh, &setup.chart, &setup.v0, &setup.g0, &q_phi)?;
    Ok(picard_iterate(&setup.mesh, &setup.chart, &phi, &q_phi, &setup.g0, horizon, k, params)?)
}

// ------------------------------------------------- 5: det(G) drift bound

fn det_g_drift(n1: usize, n2: usize, k: usize) -> Result<(f64, f64)> {
    let horizon = 0.08;
    let cfg = driven_sector_config(n1, n2, 0.12, horizon, k);
    let setup = cfg.build()?;
    // The refined grid's difference norm bottoms out near 3e-9 relative
    // (conditioning of the banded solve), so the default tolerance would
    // never be reached; 1e-8 is still four orders below the drift measured.
    let mut params = cfg.picard_params();
    params.tol = 1e-8;
    let (traj, report) = run_picard(&setup, horizon, k, &params)?;
    ensure!(report.converged, "iteration did not converge at {n1}x{n2}, k={k}");
    let mut worst = 0.0f64;
    for g in &traj.g {
        worst = worst.max(residual_det_g(g).max_abs());
    }
    let h = setup.mesh.mean_phys_spacing();
    let dt = horizon / k as f64;
    Ok((worst, 5.0 * (dt * dt + h * h)))
}

fn criterion_5(_seed: u64) -> Check {
    let (d1, b1) = det_g_drift(16, 32, 8)?;
    let (d2, b2) = det_g_drift(32, 64, 16)?;
    let pass = d1 <= b1 && d2 <= b2;
    Ok((
        pass,
        format!(
            "max|det G - 1|: coarse {d1:.2e} (bound {b1:.2e}), refined {d2:.2e} (bound {b2:.2e})"
        ),
    ))
}

// ------------------------------------------ 6: contraction and its trend

fn contraction_at(horizon: f64, k: usize) -> Result<f64> {
    let cfg = driven_sector_config(16, 32, 0.12, horizon, k);
    let setup = cfg.build()?;
    // Fixed small iteration count with an unreachable tolerance: ratios are
    // measured before the difference norm hits its rounding floor.
    let mut params = cfg.picard_params();
    params.tol = 0.0;
    params.max_iters = 6;
    let (_, report) = run_picard(&setup, horizon, k, &params)?;
    report
        .contraction_ratio()
        .ok_or_else(|| anyhow!("no ratios measured at horizon {horizon}"))
}

fn criterion_6(_seed: u64) -> Check {
    let t0 = 0.16;
    let r0 = contraction_at(t0, 8)?;
    let r1 = contraction_at(t0 / 2.0, 8)?;
    let r2 = contraction_at(t0 / 4.0, 8)?;
    let delta_hat = fit_log_slope(&[(t0, r0), (t0 / 2.0, r1), (t0 / 4.0, r2)]);
    let pass = r0 < 1.0 && r1 <= r0 + 0.05 && delta_hat > 0.0;
    Ok((
        pass,
        format!(
            "contraction r(T)={r0:.3} (<1), r(T/2)={r1:.3} (<=r(T)+0.05), r(T/4)={r2:.3}, \
             horizon exponent {delta_hat:.3} (>0)"
        ),
    ))
}

// ----------------------------------------------------- 7: shift stability

fn criterion_7(_seed: u64) -> Check {
    let mut cfg = driven_sector_config(16, 24, 0.08, 0.12, 6);
    cfg.stability = StabilityConfig { epsilons: vec![0.02, 0.01, 0.005], shift: [1.0, 0.0] };
    let setup = cfg.build()?;
    let (eps, dist) = stability_distances(&cfg, &setup).map_err(|e| anyhow!("{e}"))?;
    let pairs: Vec<(f64, f64)> = eps.iter().copied().zip(dist.iter().copied()).collect();
    let slope = fit_log_slope(&pairs);
    let pass = (0.8..=1.2).contains(&slope);
    Ok((
        pass,
        format!(
            "end-state distances {:.3e}/{:.3e}/{:.3e} for shifts 0.02/0.01/0.005, slope \
             {slope:.3} (in [0.8, 1.2])",
            dist[0], dist[1], dist[2]
        ),
    ))
}

// --------------------------------------------------- 8: splash bracketing

/// Horseshoe: a near-full sector whose two straight faces nearly touch
/// across the chart cut, with bump bands pushing matched radial intervals
/// of the faces toward each other.
fn horseshoe_config(amp: f64) -> RunConfig {
    let theta_m: f64 = 89.0_f64.to_radians();
    let phi_a = 2.0 * theta_m;
    let (rho0, rho1) = (0.36, 1.96);
    let dir_a = [phi_a.cos(), phi_a.sin()];
    let dir_b = [phi_a.cos(), -phi_a.sin()];
    let scale = |d: [f64; 2], r: f64| [d[0] * r, d[1] * r];
    let rho_c = 1.0;
    // Wide bump and collar: approach speed scales like amp/width while the
    // initial acceleration scales like amp/width^3, and a sharp profile folds
    // the warm-start flow before the faces can meet.
    let width = 1.0;
    RunConfig {
        geometry: GeometryConfig::Sector {
            center: [0.0, 0.0],
            r0: 0.6,
            r1: 1.4,
            theta0: -theta_m,
            theta1: theta_m,
            n1: 28,
            n2: 96,
        },
        initial: InitialConfig {
            f0: F0Spec::Identity,
            sides: vec![
                // Face at +phi_a, parameterized from the outer corner inward
                // so the outward normal points into the wedge gap.
                SideStream {
                    frame: TubularFrame::Segment {
                        a: scale(dir_a, rho1),
                        b: scale(dir_a, rho0),
                    },
                    bumps: vec![BumpSpec { center: rho1 - rho_c, width, amp }],
                    width_in: 0.04,
                    width_out: 0.6,
                },
                // Mirror face, parameterized from the inner corner outward.
                SideStream {
                    frame: TubularFrame::Segment {
                        a: scale(dir_b, rho0),
                        b: scale(dir_b, rho1),
                    },
                    bumps: vec![BumpSpec { center: rho_c - rho0, width, amp: -amp }],
                    width_in: 0.04,
                    width_out: 0.6,
                },
            ],
        },
        // Short windows, two constraints: the warm-start acceleration pump
        // moves inner-rim corner cells by O(a T^2) before the iteration
        // corrects it, and once the faces move a cell width per window the
        // fixed-point map stops contracting. The faces meet near t = 0.031.
        window: WindowConfig { horizon: 0.005, k_levels: 10, windows: 8 },
        ..RunConfig::default()
    }
}

fn criterion_8(_seed: u64) -> Check {
    let cfg = horseshoe_config(0.45);
    let setup = cfg.build()?;
    let params = cfg.march_params();
    let dt = cfg.window.horizon / cfg.window.k_levels as f64;
    let out = splash_search(&setup.mesh, &setup.chart, &setup.v0, &setup.g0, &params, 2)?;
    ensure!(out.splash_detected(), "no splash bracket; coarse event {:?}", out.coarse.event);
    let (lo0, hi0) = out.brackets[0];
    let (lo_f, hi_f) = *out.brackets.last().unwrap();
    let width0 = hi0 - lo0;
    let width_f = hi_f - lo_f;
    let gap = match out.coarse.event {
        MarchEvent::SplashBracket { gap, .. } => gap,
        ref e => return Err(anyhow!("coarse event was {e:?}")),
    };

    let mut rest = cfg.clone();
    rest.initial.sides.clear();
    rest.window = WindowConfig { horizon: 0.02, k_levels: 4, windows: 1 };
    let rest_setup = rest.build()?;
    let rest_out = splash_search(
        &rest_setup.mesh,
        &rest_setup.chart,
        &rest_setup.v0,
        &rest_setup.g0,
        &rest.march_params(),
        1,
    )?;
    let rest_quiet = !rest_out.splash_detected()
        && matches!(rest_out.coarse.event, MarchEvent::Completed);

    // The per-level monitors run cut -> curvature -> gap, so a gap bracket
    // at level j certifies the curvature bound at both bracket ends.
    let pass = width0 <= dt + 1e-12 && rest_quiet;
    Ok((
        pass,
        format!(
            "bracket [{lo0:.5e}, {hi0:.5e}] width {width0:.2e} (<= dt {dt:.2e}), refined to \
             {width_f:.2e} over {} resolutions, gap {gap:.2e} vs threshold {:.2e}, curvature \
             bounded at both ends; rest geometry quiet: {rest_quiet}",
            out.brackets.len(),
            out.coarse.threshold
        ),
    ))
}

// ------------------------------------------------ 9: compatible initial data

fn ring_sides(w_in: f64, w_out: f64) -> Vec<SideStream> {
    vec![
        SideStream {
            frame: TubularFrame::Circle {
                center: [0.0, 0.0],
                radius: 1.5,
                theta0: 0.0,
                outward: true,
            },
            bumps: vec![BumpSpec { center: 0.0, width: 1.2, amp: 0.3 }],
            width_in: w_in,
            width_out: w_out,
        },
        SideStream {
            frame: TubularFrame::Circle {
                center: [0.0, 0.0],
                radius: 0.7,
                theta0: 0.0,
                outward: false,
            },
            bumps: vec![BumpSpec { center: 1.0, width: 0.9, amp: -0.2 }],
            width_in: w_in,
            width_out: w_out,
        },
    ]
}

fn criterion_9(_seed: u64) -> Check {
    let templates = [
        ("identity", F0Spec::Identity),
        ("shear", F0Spec::Shear { c: 0.4 }),
        ("curl bump", F0Spec::CurlBump { amp: 0.3, center: 0.2, width: 0.8 }),
    ];
    let sides = ring_sides(0.05, 0.38);
    let mut details = Vec::new();
    let mut pass = true;
    for (label, f0) in &templates {
        let mut divs = Vec::new();
        let mut tans = Vec::new();
        let mut det_max = 0.0f64;
        // n = 24 leaves the narrower bump under ten angular cells and the
        // boundary residual preasymptotic; orders are clean from 32 up.
        for n in [32usize, 64] {
            let mesh = Mesh::ring(Vec2::zeros(), 0.7, 1.5, n, 4 * n)?;
            let v = velocity_at(mesh.nodes(), &sides, f0);
            let g = deformation_at(mesh.nodes(), f0);
            let rep = check_compatibility(&mesh, &v, &g);
            divs.push(rep.div_max);
            tans.push(rep.traction_tan_max);
            det_max = det_max.max(rep.det_max);
        }
        let dord = (divs[0] / divs[1]).log2();
        let tord = (tans[0] / tans[1]).log2();
        let ok = dord >= 1.8 && tord >= 1.8 && det_max <= 1e-14;
        pass &= ok;
        details.push(format!(
            "{label}: div order {dord:.2}, traction order {tord:.2}, det defect {det_max:.1e}"
        ));
    }

    // Closed-form check of the second transverse moment on a straight side.
    let side = SideStream {
        frame: TubularFrame::Segment { a: [0.0, 0.0], b: [4.0, 0.0] },
        bumps: vec![BumpSpec { center: 2.0, width: 1.0, amp: 0.7 }],
        width_in: 0.1,
        width_out: 0.3,
    };
    let c = 0.45;
    let f0 = F0Spec::Shear { c };
    let mut moment_err = 0.0f64;
    for &s in &[1.3, 2.0, 2.6] {
        let (p2, _) = side.psi2(&f0, s);
        let p0 = side.psi0(s);
        moment_err = moment_err.max((p2 - (p0[2] + c)).abs());
    }
    pass &= moment_err <= 1e-10;
    details.push(format!("shear moment identity {moment_err:.1e} (<=1e-10)"));
    Ok((pass, details.join("; ")))
}

// -------------------------------------------------------- 10: norm calculus

fn criterion_10(seed: u64) -> Check {
    let cfg = NormConfig::default();
    let s = cfg.s;
    let mut details = Vec::new();
    let mut pass = true;

    // Homogeneity and the triangle inequality on a bounded patch.
    let mesh = Mesh::sector(Vec2::zeros(), 0.6, 1.4, -1.0, 1.0, 14, 18)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA0);
    let mut alg_err = 0.0f64;
    for _ in 0..5 {
        let (af, bf, cf) = (rng.gen_range(0.5..3.0), rng.gen_range(-0.2..0.2), rng.gen_range(0.5..2.5));
        let f = ScalarField(mesh.nodes().iter().map(|p| (af * p.x).sin() + bf * p.y).collect());
        let g = ScalarField(mesh.nodes().iter().map(|p| (cf * p.y).cos() + bf).collect());
        let nf = sobolev_hs_scalar(&mesh, &f, s, &cfg);
        let ng = sobolev_hs_scalar(&mesh, &g, s, &cfg);
        let lam = 2.7;
        let mut fl = f.clone();
        fl.scale(lam);
        alg_err = alg_err
            .max((sobolev_hs_scalar(&mesh, &fl, s, &cfg) - lam * nf).abs() / (1.0 + nf));
        let mut sum = f.clone();
        sum.axpy(1.0, &g);
        let ns = sobolev_hs_scalar(&mesh, &sum, s, &cfg);
        alg_err = alg_err.max(((ns - nf - ng).max(0.0)) / (1.0 + nf + ng));
    }
    pass &= alg_err <= 1e-10;
    details.push(format!("homogeneity/triangle defect {alg_err:.1e} (<=1e-10)"));

    // One Fourier mode with |k|^2 = 1: the ratio to L2 is exactly (1+1)^{s/2}.
    let tau = 2.0 * std::f64::consts::PI;
    let torus = Mesh::torus(tau, tau, 24, 24)?;
    let f = ScalarField::from_fn(&torus, |p| p.x.sin());
    let ratio = sobolev_hs_scalar(&torus, &f, s, &cfg) / sobolev_hs_scalar(&torus, &f, 0.0, &cfg);
    let mode_err = (ratio - 2.0f64.powf(s / 2.0)).abs();
    pass &= mode_err <= 1e-6;
    details.push(format!("single-mode ratio defect {mode_err:.1e} (<=1e-6)"));

    // Embedding ratios must be grid-stable: same analytic corpus, doubled
    // resolution, every labeled ratio within 20%.
    let nt = 9;
    let dt = 0.03;
    let mut modes = Vec::new();
    for _ in 0..3 {
        let mut traj_modes = Vec::new();
        for _ in 0..4 {
            traj_modes.push((
                rng.gen_range(0..3) as f64,
                rng.gen_range(0..3) as f64,
                rng.gen_range(0.0..tau),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.5..2.0),
            ));
        }
        modes.push(traj_modes);
    }
    let corpus_on = |mesh: &Mesh| -> Vec<Vec<VectorField>> {
        modes
            .iter()
            .map(|traj_modes| {
                (0..nt)
                    .map(|k| {
                        let t = k as f64 * dt;
                        VectorField::from_fn(mesh, |p| {
                            let mut v = Vec2::zeros();
                            for &(kx, ky, ph, ax, ay, om) in traj_modes {
                                let w = (kx * p.x + ky * p.y + ph).sin() * (om * t).cos();
                                v += Vec2::new(ax * w, ay * w);
                            }
                            v
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let t1 = Mesh::torus(tau, tau, 12, 12)?;
    let t2 = Mesh::torus(tau, tau, 24, 24)?;
    let r1 = embedding_ratios(&t1, &corpus_on(&t1), dt, &cfg);
    let r2 = embedding_ratios(&t2, &corpus_on(&t2), dt, &cfg);
    let mut worst_dev = 0.0f64;
    for ((la, a), (lb, b)) in r1.iter().zip(r2.iter()) {
        ensure!(la == lb, "embedding labels diverged: {la} vs {lb}");
        ensure!(*a > 0.0 && b.is_finite(), "degenerate embedding ratio for {la}");
        worst_dev = worst_dev.max((b / a - 1.0).abs());
    }
    pass &= worst_dev <= 0.2;
    details.push(format!(
        "embedding ratios: worst drift {:.1}% over {} labels under doubling (<=20%)",
        100.0 * worst_dev,
        r1.len()
    ));

    Ok((pass, details.join("; ")))
}
