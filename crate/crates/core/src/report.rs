//! Result writers: flat CSV tables and JSON summaries. Floats are written
//! with full precision so repeated runs can be compared byte for byte.

use std::io;
use std::path::Path;

use serde::Serialize;

use crate::solver::{MarchEvent, MarchOutcome, SplashSearchOutcome};

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> io::Result<()> {
    let mut text = String::with_capacity(header.len() + 1 + rows.len() * 32);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt(x)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

pub const GAP_HEADER: &str = "t,gap";

pub fn gap_rows(out: &MarchOutcome) -> Vec<Vec<f64>> {
    out.records
        .iter()
        .flat_map(|r| r.gaps.iter().map(|g| vec![g.t, g.gap]))
        .collect()
}

pub const WINDOW_HEADER: &str = "t_start,iters,first_diff,last_diff,contraction,compat_div,\
residual_momentum,residual_incompressibility,residual_traction,residual_det_g";

pub fn window_rows(out: &MarchOutcome) -> Vec<Vec<f64>> {
    out.records
        .iter()
        .map(|r| {
            vec![
                r.t_start,
                r.iters as f64,
                r.diffs.first().copied().unwrap_or(0.0),
                r.diffs.last().copied().unwrap_or(0.0),
                r.ratios.iter().skip(1).fold(0.0f64, |a, &x| a.max(x)),
                r.compat_div,
                r.residual_momentum,
                r.residual_incompressibility,
                r.residual_traction,
                r.residual_det_g,
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub momentum: f64,
    pub incompressibility: f64,
    pub traction: f64,
    pub det_g: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub event: MarchEvent,
    pub threshold: f64,
    pub exclusion: f64,
    pub windows_completed: usize,
    pub picard_iters: Vec<usize>,
    pub min_gap: Option<f64>,
    pub final_residuals: Option<Residuals>,
}

pub fn summarize_march(out: &MarchOutcome) -> RunSummary {
    let completed = if matches!(out.event, MarchEvent::Completed) {
        out.records.len()
    } else {
        out.records.len().saturating_sub(1)
    };
    let min_gap = out
        .records
        .iter()
        .flat_map(|r| r.gaps.iter().map(|g| g.gap))
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))));
    let final_residuals = out.records.last().map(|r| Residuals {
        momentum: r.residual_momentum,
        incompressibility: r.residual_incompressibility,
        traction: r.residual_traction,
        det_g: r.residual_det_g,
    });
    RunSummary {
        event: out.event.clone(),
        threshold: out.threshold,
        exclusion: out.exclusion,
        windows_completed: completed,
        picard_iters: out.records.iter().map(|r| r.iters).collect(),
        min_gap,
        final_residuals,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplashSummary {
    pub detected: bool,
    pub threshold: f64,
    pub exclusion: f64,
    /// One bracket per resolution, coarse first; absolute times.
    pub brackets: Vec<[f64; 2]>,
    pub final_bracket: Option<[f64; 2]>,
    pub final_bracket_width: Option<f64>,
}

pub fn summarize_splash(out: &SplashSearchOutcome) -> SplashSummary {
    let brackets: Vec<[f64; 2]> = out.brackets.iter().map(|&(a, b)| [a, b]).collect();
    let last = brackets.last().copied();
    SplashSummary {
        detected: out.splash_detected(),
        threshold: out.coarse.threshold,
        exclusion: out.coarse.exclusion,
        brackets,
        final_bracket: last,
        final_bracket_width: last.map(|[a, b]| b - a),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySummary {
    pub epsilons: Vec<f64>,
    pub distances: Vec<f64>,
    /// Least-squares slope of ln(distance) against ln(epsilon).
    pub slope: f64,
}

/// Least-squares slope of ln y against ln x. Pairs with nonpositive entries
/// are skipped; fewer than two usable pairs give NaN.
pub fn fit_log_slope(pairs: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_slope_recovers_a_power_law() {
        let pairs: Vec<(f64, f64)> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&e: &f64| (e, 3.7 * e.powf(1.25)))
            .collect();
        assert!((fit_log_slope(&pairs) - 1.25).abs() < 1e-12);
        assert!(fit_log_slope(&[(1.0, 2.0)]).is_nan());
        assert!(fit_log_slope(&[(1.0, -2.0), (2.0, 3.0)]).is_nan());
    }

    #[test]
    fn csv_is_written_with_full_precision() {
        let dir = std::env::temp_dir().join("splash2d-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        write_csv(&path, "a,b", &[vec![1.0 / 3.0, 2.0]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("a,b\n"));
        let cell = text.lines().nth(1).unwrap().split(',').next().unwrap();
        let back: f64 = cell.parse().unwrap();
        assert_eq!(back.to_bits(), (1.0f64 / 3.0).to_bits());
    }
}
