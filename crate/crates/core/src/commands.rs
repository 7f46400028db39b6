//! Command implementations behind the CLI: build a run from its config,
//! execute it, and write the outputs into one directory.

use std::path::Path;

use crate::chart::Vec2;
use crate::config::{ConfigError, RunConfig, Setup};
use crate::curve::PlanarCurve;
use crate::mesh::Mesh;
use crate::report;
use crate::solver::{march, splash_search, MarchEvent, MarchOutcome, SolveError, WindowState};
use crate::state::VectorField;
use crate::verify;

#[derive(Debug, thiserror::Error)]
pub enum CmdError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("run ended early: {0:?}")]
    Aborted(MarchEvent),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<Setup, CmdError> {
    std::fs::create_dir_all(out)?;
    let rendered = toml::to_string_pretty(cfg).map_err(ConfigError::from)?;
    std::fs::write(out.join("config_used.toml"), rendered)?;
    let setup = cfg.build()?;
    for w in cfg.resolution_warnings(&setup.mesh) {
        eprintln!("warning: {w}");
    }
    Ok(setup)
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let setup = prepare(cfg, out)?;
    let outcome = march(&setup.mesh, &setup.chart, &setup.v0, &setup.g0, &cfg.march_params())?;
    report::write_csv(&out.join("gaps.csv"), report::GAP_HEADER, &report::gap_rows(&outcome))?;
    report::write_csv(
        &out.join("windows.csv"),
        report::WINDOW_HEADER,
        &report::window_rows(&outcome),
    )?;
    let summary = report::summarize_march(&outcome);
    report::write_json(&out.join("summary.json"), &summary)?;
    println!(
        "simulate: {} of {} windows completed, event {:?}",
        summary.windows_completed, cfg.window.windows, outcome.event
    );
    if let Some(g) = summary.min_gap {
        println!("simulate: min boundary gap {g:.6e} (threshold {:.6e})", outcome.threshold);
    }
    Ok(())
}

pub fn cmd_splash_search(cfg: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let setup = prepare(cfg, out)?;
    let outcome = splash_search(
        &setup.mesh,
        &setup.chart,
        &setup.v0,
        &setup.g0,
        &cfg.march_params(),
        cfg.splash.bisect_depth,
    )?;
    report::write_csv(
        &out.join("gaps.csv"),
        report::GAP_HEADER,
        &report::gap_rows(&outcome.coarse),
    )?;
    for (i, re) in outcome.refinements.iter().enumerate() {
        report::write_csv(
            &out.join(format!("gaps_refine{i}.csv")),
            report::GAP_HEADER,
            &report::gap_rows(re),
        )?;
    }
    let summary = report::summarize_splash(&outcome);
    report::write_json(&out.join("splash.json"), &summary)?;
    match summary.final_bracket {
        Some([lo, hi]) => {
            println!("splash-search: bracket [{lo:.9e}, {hi:.9e}], width {:.3e}", hi - lo)
        }
        None => println!("splash-search: no splash bracket within the horizon"),
    }
    Ok(())
}

/// Physical boundary curve of a completed run's end state.
fn final_phys_boundary(
    template: &Mesh,
    outcome: &MarchOutcome,
    setup: &Setup,
) -> Result<PlanarCurve, CmdError> {
    let ws: &WindowState = outcome
        .final_state
        .as_ref()
        .ok_or_else(|| CmdError::Aborted(outcome.event.clone()))?;
    let mesh = Mesh::from_nodes(
        ws.nodes.clone(),
        template.n1,
        template.n2,
        template.periodic1,
        template.periodic2,
    )
    .map_err(SolveError::from)?;
    let tilde = PlanarCurve::new(mesh.boundary_polyline(0, &VectorField::positions(&mesh).0))
        .map_err(SolveError::from)?;
    Ok(tilde.pullback(&setup.chart).map_err(SolveError::from)?)
}

/// Distances between the base end state and end states of runs started from
/// rigidly shifted initial data, mapped back by the same shift.
pub fn stability_distances(
    cfg: &RunConfig,
    setup: &Setup,
) -> Result<(Vec<f64>, Vec<f64>), CmdError> {
    let dir = Vec2::new(cfg.stability.shift[0], cfg.stability.shift[1]);
    if dir.norm() == 0.0 {
        return Err(CmdError::Config(ConfigError::Invalid(
            "stability.shift must be a nonzero direction".into(),
        )));
    }
    let b = dir / dir.norm();
    let params = cfg.march_params();
    let base = march(&setup.mesh, &setup.chart, &setup.v0, &setup.g0, &params)?;
    let base_curve = final_phys_boundary(&setup.mesh, &base, setup)?;
    let mut distances = Vec::new();
    for &eps in &cfg.stability.epsilons {
        let shifted = cfg.build_shifted(eps * b)?;
        let run = march(&shifted.mesh, &shifted.chart, &shifted.v0, &shifted.g0, &params)?;
        let curve = final_phys_boundary(&shifted.mesh, &run, &shifted)?;
        let back: Vec<Vec2> = curve.nodes().iter().map(|&x| x - eps * b).collect();
        let back = PlanarCurve::new(back).map_err(SolveError::from)?;
        distances.push(base_curve.hausdorff(&back));
    }
    Ok((cfg.stability.epsilons.clone(), distances))
}

pub fn cmd_stability(cfg: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let setup = prepare(cfg, out)?;
    let (epsilons, distances) = stability_distances(cfg, &setup)?;
    let pairs: Vec<(f64, f64)> =
        epsilons.iter().copied().zip(distances.iter().copied()).collect();
    let slope = report::fit_log_slope(&pairs);
    let rows: Vec<Vec<f64>> = pairs.iter().map(|&(e, d)| vec![e, d]).collect();
    report::write_csv(&out.join("stability.csv"), "epsilon,distance", &rows)?;
    let summary = report::StabilitySummary { epsilons, distances, slope };
    report::write_json(&out.join("stability.json"), &summary)?;
    println!("stability: slope {slope:.4} over {} perturbation sizes", summary.epsilons.len());
    Ok(())
}

pub fn cmd_verify(seed: u64, out: &Path) -> Result<bool, CmdError> {
    std::fs::create_dir_all(out)?;
    let results = verify::run_all(seed);
    let mut all = true;
    for r in &results {
        println!("criterion {:>2} ({}): {}", r.id, r.name, if r.pass { "PASS" } else { "FAIL" });
        println!("    {}", r.details);
        all &= r.pass;
    }
    report::write_json(&out.join("verify.json"), &results)?;
    println!("verify: {}", if all { "all criteria passed" } else { "FAILURES present" });
    Ok(all)
}
