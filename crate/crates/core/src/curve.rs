//! Closed polyline curves: the free boundary and its pullback.
//!
//! Everything here is plain computational geometry at desk scale: all-pairs
//! segment tests are fine for the node counts involved (<= 2048), so no
//! spatial acceleration structures.

use crate::chart::{Chart, ChartError, Vec2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("a closed curve needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("curve has {0} nodes, above the supported all-pairs limit {1}")]
    TooManyNodes(usize, usize),
    #[error("degenerate segment of length {len:.3e} at node {index}")]
    DegenerateSegment { index: usize, len: f64 },
    #[error(transparent)]
    Chart(#[from] ChartError),
}

pub const MAX_CURVE_NODES: usize = 2048;

/// Closed polyline, nodes in traversal order (CCW for outer boundaries).
/// Segment i joins node i to node (i+1) mod n.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    nodes: Vec<Vec2>,
    /// Cumulative arclength at each node; seg_len[i] = cum[i+1] - cum[i].
    cum_len: Vec<f64>,
    perimeter: f64,
}

/// A detected self-intersection of a closed curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub point: Vec2,
    pub seg_a: usize,
    pub seg_b: usize,
    /// Arclength coordinates of the contact on each branch.
    pub s_a: f64,
    pub s_b: f64,
}

impl PlanarCurve {
    pub fn new(nodes: Vec<Vec2>) -> Result<Self, CurveError> {
        if nodes.len() < 3 {
            return Err(CurveError::TooFewNodes(nodes.len()));
        }
        if nodes.len() > MAX_CURVE_NODES {
            return Err(CurveError::TooManyNodes(nodes.len(), MAX_CURVE_NODES));
        }
        let n = nodes.len();
        let scale = diameter_of(&nodes).max(f64::MIN_POSITIVE);
        let mut cum_len = Vec::with_capacity(n + 1);
        cum_len.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let len = (nodes[(i + 1) % n] - nodes[i]).norm();
            if len <= 1e-14 * scale {
                return Err(CurveError::DegenerateSegment { index: i, len });
            }
            acc += len;
            cum_len.push(acc);
        }
        Ok(PlanarCurve { nodes, cum_len, perimeter: acc })
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn arclength_at_node(&self, i: usize) -> f64 {
        self.cum_len[i]
    }

    /// Largest pairwise node distance.
    pub fn diameter(&self) -> f64 {
        diameter_of(&self.nodes)
    }

    /// Mean segment length; the unit for neighbor-exclusion windows.
    pub fn mean_spacing(&self) -> f64 {
        self.perimeter / self.nodes.len() as f64
    }

    pub fn translated(&self, b: Vec2) -> PlanarCurve {
        let mut out = self.clone();
        for p in &mut out.nodes {
            *p += b;
        }
        out
    }

    /// Signed area (positive for CCW traversal).
    pub fn signed_area(&self) -> f64 {
        let n = self.nodes.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.nodes[i];
            let q = self.nodes[(i + 1) % n];
            a += p.x * q.y - q.x * p.y;
        }
        0.5 * a
    }

    fn segment(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.nodes.len();
        (self.nodes[i], self.nodes[(i + 1) % n])
    }

    /// First self-intersection between non-adjacent segments, if any.
    pub fn self_intersect(&self) -> Option<Intersection> {
        let n = self.nodes.len();
        let mut best: Option<Intersection> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue; // adjacent segments share a node
                }
                let (a1, a2) = self.segment(i);
                let (b1, b2) = self.segment(j);
                if let Some((t, u, point)) = seg_seg_intersection(a1, a2, b1, b2) {
                    let cand = Intersection {
                        point,
                        seg_a: i,
                        seg_b: j,
                        s_a: self.cum_len[i] + t * (self.cum_len[i + 1] - self.cum_len[i]),
                        s_b: self.cum_len[j] + u * (self.cum_len[j + 1] - self.cum_len[j]),
                    };
                    match &best {
                        Some(b) if b.s_a <= cand.s_a => {}
                        _ => best = Some(cand),
                    }
                }
            }
        }
        best
    }

    /// Minimum distance between segment pairs whose along-curve separation is
    /// at least `exclusion` (both ways around). Returns +inf when nothing
    /// qualifies. This is the quantity that collapses to 0 at a splash.
    pub fn min_gap(&self, exclusion: f64) -> f64 {
        let n = self.nodes.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let fwd = self.cum_len[j] - self.cum_len[i + 1];
                let bwd = self.perimeter - (self.cum_len[j + 1] - self.cum_len[i]);
                if fwd.min(bwd) < exclusion {
                    continue;
                }
                let (a1, a2) = self.segment(i);
                let (b1, b2) = self.segment(j);
                let d = seg_seg_distance(a1, a2, b1, b2);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Hausdorff distance between two curves, evaluated node-to-segment both
    /// ways (exact for polylines up to node sampling of the max side).
    pub fn hausdorff(&self, other: &PlanarCurve) -> f64 {
        let d1 = directed_hausdorff(self, other);
        let d2 = directed_hausdorff(other, self);
        d1.max(d2)
    }

    /// Discrete curvature magnitude at each node (circumradius reciprocal of
    /// each node triple). Corners show up as large values, as they should.
    pub fn curvature(&self) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                let p0 = self.nodes[(i + n - 1) % n];
                let p1 = self.nodes[i];
                let p2 = self.nodes[(i + 1) % n];
                let e1 = p1 - p0;
                let e2 = p2 - p1;
                let chord = p2 - p0;
                let denom = e1.norm() * e2.norm() * chord.norm();
                if denom == 0.0 {
                    0.0
                } else {
                    2.0 * cross2(e1, e2).abs() / denom
                }
            })
            .collect()
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvature().into_iter().fold(0.0, f64::max)
    }

    /// Pull a tilde-plane curve back to the physical plane through the chart
    /// inverse (entire map, never fails).
    pub fn pullback(&self, chart: &Chart) -> Result<PlanarCurve, CurveError> {
        let nodes = self.nodes.iter().map(|&p| chart.inverse(p)).collect();
        PlanarCurve::new(nodes)
    }

    /// Push a physical curve forward through the chart; fails on the cut.
    pub fn pushforward(&self, chart: &Chart) -> Result<PlanarCurve, CurveError> {
        let nodes = self
            .nodes
            .iter()
            .map(|&p| chart.forward(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PlanarCurve::new(nodes)?)
    }

    /// Smallest distance from any node to the chart's branch cut.
    pub fn distance_to_cut(&self, chart: &Chart) -> f64 {
        self.nodes
            .iter()
            .map(|&p| chart.distance_to_cut(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Regular n-gon approximation of a circle, CCW.
    pub fn circle(center: Vec2, radius: f64, n: usize) -> PlanarCurve {
        let nodes = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                center + Vec2::new(radius * t.cos(), radius * t.sin())
            })
            .collect();
        PlanarCurve::new(nodes).expect("circle polyline is valid")
    }
}

fn diameter_of(nodes: &[Vec2]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            d = d.max((nodes[i] - nodes[j]).norm());
        }
    }
    d
}

fn directed_hausdorff(from: &PlanarCurve, to: &PlanarCurve) -> f64 {
    let mut worst = 0.0f64;
    for &p in from.nodes() {
        let mut best = f64::INFINITY;
        for j in 0..to.len() {
            let (a, b) = to.segment(j);
            best = best.min(point_seg_distance(p, a, b));
            if best == 0.0 {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}

pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn point_seg_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Proper or touching intersection of two segments; collinear overlaps report
/// the midpoint of the shared stretch. Returns parameters (t, u) in [0,1].
pub fn seg_seg_intersection(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> Option<(f64, f64, Vec2)> {
    let r = a2 - a1;
    let s = b2 - b1;
    let denom = cross2(r, s);
    let qp = b1 - a1;
    let scale = r.norm().max(s.norm()).max(1e-300);
    if denom.abs() > 1e-14 * scale * scale {
        let t = cross2(qp, s) / denom;
        let u = cross2(qp, r) / denom;
        if (-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
            let t = t.clamp(0.0, 1.0);
            let u = u.clamp(0.0, 1.0);
            return Some((t, u, a1 + r * t));
        }
        return None;
    }
    // Parallel. Only collinear segments can touch.
    if cross2(qp, r).abs() > 1e-12 * scale * scale {
        return None;
    }
    let rlen2 = r.norm_squared();
    if rlen2 == 0.0 {
        return None;
    }
    let t0 = (b1 - a1).dot(&r) / rlen2;
    let t1 = (b2 - a1).dot(&r) / rlen2;
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let lo = lo.max(0.0);
    let hi = hi.min(1.0);
    if lo > hi {
        return None;
    }
    let t = 0.5 * (lo + hi);
    let p = a1 + r * t;
    let u = if t0 <= t1 {
        ((t - t0) / (t1 - t0).max(1e-300)).clamp(0.0, 1.0)
    } else {
        ((t0 - t) / (t0 - t1).max(1e-300)).clamp(0.0, 1.0)
    };
    Some((t, u, p))
}

pub fn seg_seg_distance(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> f64 {
    if seg_seg_intersection(a1, a2, b1, b2).is_some() {
        return 0.0;
    }
    point_seg_distance(a1, b1, b2)
        .min(point_seg_distance(a2, b1, b2))
        .min(point_seg_distance(b1, a1, a2))
        .min(point_seg_distance(b2, a1, a2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn figure_eight(n: usize) -> PlanarCurve {
        // Lemniscate of Gerono: crosses itself at the origin.
        let nodes = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64 + 0.1;
                Vec2::new(t.sin(), t.sin() * t.cos())
            })
            .collect();
        PlanarCurve::new(nodes).unwrap()
    }

    #[test]
    fn circle_has_no_self_intersection() {
        let c = PlanarCurve::circle(Vec2::zeros(), 1.0, 64);
        assert!(c.self_intersect().is_none());
    }

    #[test]
    fn figure_eight_detected() {
        let c = figure_eight(100);
        let hit = c.self_intersect().expect("figure eight must self-intersect");
        assert!(hit.point.norm() < 0.1, "crossing should be near origin, got {:?}", hit.point);
    }

    #[test]
    fn min_gap_quarter_perimeter_example() {
        let c = PlanarCurve::circle(Vec2::zeros(), 1.0, 64);
        let gap = c.min_gap(c.perimeter() / 4.0);
        assert_abs_diff_eq!(gap, std::f64::consts::SQRT_2, epsilon = 2e-3);
    }

    #[test]
    fn min_gap_brute_force_matches_point_oracle() {
        // Independent oracle: dense point sampling of the two qualifying arcs.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let n = 48;
            let nodes: Vec<Vec2> = (0..n)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let r = 1.0 + 0.3 * (3.0 * t).sin() + 0.05 * rng.gen_range(-1.0..1.0);
                    Vec2::new(r * t.cos(), r * t.sin())
                })
                .collect();
            let c = PlanarCurve::new(nodes).unwrap();
            let excl = c.perimeter() / 5.0;
            let fast = c.min_gap(excl);
            // Oracle: sample many points per segment on qualifying pairs.
            let m = c.len();
            let mut oracle = f64::INFINITY;
            for i in 0..m {
                for j in (i + 1)..m {
                    let fwd = c.arclength_at_node(j) - c.arclength_at_node(i + 1);
                    let bwd = c.perimeter()
                        - (c.arclength_at_node((j + 1).min(m)) - c.arclength_at_node(i));
                    if fwd.min(bwd) < excl {
                        continue;
                    }
                    let (a1, a2) = (c.nodes()[i], c.nodes()[(i + 1) % m]);
                    let (b1, b2) = (c.nodes()[j], c.nodes()[(j + 1) % m]);
                    for p in 0..=20 {
                        let t = p as f64 / 20.0;
                        let pa = a1 + (a2 - a1) * t;
                        oracle = oracle.min(point_seg_distance(pa, b1, b2));
                        let pb = b1 + (b2 - b1) * t;
                        oracle = oracle.min(point_seg_distance(pb, a1, a2));
                    }
                }
            }
            assert!((fast - oracle).abs() <= 1e-9 * (1.0 + oracle), "{fast} vs {oracle}");
        }
    }

    #[test]
    fn self_intersect_matches_brute_crossing_count() {
        // Oracle: orientation-predicate proper-crossing test per pair.
        let c = figure_eight(64);
        let n = c.len();
        let mut brute_hits = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a1, a2) = (c.nodes()[i], c.nodes()[(i + 1) % n]);
                let (b1, b2) = (c.nodes()[j], c.nodes()[(j + 1) % n]);
                let d1 = cross2(a2 - a1, b1 - a1);
                let d2 = cross2(a2 - a1, b2 - a1);
                let d3 = cross2(b2 - b1, a1 - b1);
                let d4 = cross2(b2 - b1, a2 - b1);
                if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                    brute_hits += 1;
                }
            }
        }
        assert!(brute_hits > 0);
        assert!(c.self_intersect().is_some());
    }

    #[test]
    fn hausdorff_of_shift_is_shift_norm() {
        let c = PlanarCurve::circle(Vec2::zeros(), 1.0, 128);
        let b = Vec2::new(0.3, -0.4);
        let d = c.hausdorff(&c.translated(b));
        // For convex curves a rigid shift realizes its own norm.
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn curvature_of_circle() {
        let c = PlanarCurve::circle(Vec2::zeros(), 2.0, 256);
        for k in c.curvature() {
            assert_abs_diff_eq!(k, 0.5, epsilon = 1e-3);
        }
    }

    #[test]
    fn pullback_of_right_halfplane_circle() {
        // The pullback through z -> z^2 of a circle living in the right
        // half-plane stays a simple closed curve.
        let ch = Chart::sqrt_default();
        let c = PlanarCurve::circle(Vec2::new(1.5, 0.0), 0.5, 64);
        let pb = c.pullback(&ch).unwrap();
        assert!(pb.self_intersect().is_none());
        // And pushing forward recovers the original nodes.
        let fwd = pb.pushforward(&ch).unwrap();
        for (a, b) in fwd.nodes().iter().zip(c.nodes()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn translation_preserves_gap_and_perimeter(dx in -2.0f64..2.0, dy in -2.0f64..2.0) {
            let c = PlanarCurve::circle(Vec2::zeros(), 1.0, 48);
            let t = c.translated(Vec2::new(dx, dy));
            prop_assert!((c.perimeter() - t.perimeter()).abs() < 1e-12);
            let e = c.perimeter() / 4.0;
            prop_assert!((c.min_gap(e) - t.min_gap(e)).abs() < 1e-12);
        }
    }
}
