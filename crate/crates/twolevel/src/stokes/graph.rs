use super::trace::{trace_stokes_line, LineKind, Side, StokesLine, Termination, TraceOptions};
use super::track::nearest;
use super::{find_turning_points_with, PotentialSource, QFunction, TurningPoint};
use crate::error::{Error, Result};
use crate::numerics::{Rect, RootOptions};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfPlane {
    Upper,
    Lower,
}

impl HalfPlane {
    fn holds(&self, s: C64) -> bool {
        match self {
            HalfPlane::Upper => s.im > 0.0,
            HalfPlane::Lower => s.im < 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphOptions {
    pub kinds: Vec<LineKind>,
    pub max_arc: f64,
    pub h_max: f64,
    pub trace_tol: f64,
    pub pole_radius: f64,
    pub seed_density: usize,
    /// Half-plane searched for the linking line.
    pub half_plane: HalfPlane,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            kinds: vec![LineKind::Stokes],
            max_arc: 40.0,
            h_max: 0.01,
            trace_tol: 1e-10,
            pole_radius: 1e-3,
            seed_density: 20,
            half_plane: HalfPlane::Upper,
        }
    }
}

/// A chain of Stokes lines joining the left and right edges of the region
/// through one or more turning points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkingLine {
    /// Turning points on the chain, left to right.
    pub crossings: Vec<TurningPoint>,
    /// Indices into `StokesGraph::lines`, left to right.
    pub segments: Vec<usize>,
    /// Concatenated polyline, left to right.
    pub points: Vec<C64>,
    pub min_abs_im: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SectorAnchor {
    Pole(C64),
    Infinity(Side),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sector {
    pub anchor: SectorAnchor,
    pub bounding_lines: Vec<usize>,
    pub seed: C64,
    /// `σ = -sign Im W(seed)`, `W` continued from the first bounding line's origin.
    pub sigma: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StokesGraph {
    pub region: Rect,
    pub source: PotentialSource,
    pub turning_points: Vec<TurningPoint>,
    pub singular: Vec<C64>,
    pub lines: Vec<StokesLine>,
    /// Traces that failed: turning point index, direction, error text.
    pub failed: Vec<(usize, u8, String)>,
    pub sectors: Vec<Sector>,
    pub closest: Option<LinkingLine>,
    pub half_plane: HalfPlane,
}

impl StokesGraph {
    pub fn stokes_lines(&self) -> impl Iterator<Item = (usize, &StokesLine)> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LineKind::Stokes)
    }
}

/// Finds all turning points in `region`, traces three lines from each, and classifies the result.
pub fn build_stokes_graph<Q: QFunction + ?Sized>(
    pot: &Q,
    region: &Rect,
    opts: &GraphOptions,
) -> Result<StokesGraph> {
    let root_opts = RootOptions {
        seed_density: opts.seed_density,
        ..RootOptions::default()
    };
    let tps = find_turning_points_with(pot, region, &root_opts)?;
    let singular = pot.singular_points(region);
    let mut topts = TraceOptions::new(*region);
    topts.max_arc = opts.max_arc;
    topts.h_max = opts.h_max;
    topts.trace_tol = opts.trace_tol;
    topts.pole_radius = opts.pole_radius;
    topts.singular = singular.clone();
    let jobs: Vec<(usize, u8, LineKind)> = (0..tps.len())
        .flat_map(|i| {
            opts.kinds
                .iter()
                .flat_map(move |&k| (0..3u8).map(move |d| (i, d, k)))
        })
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(i, d, k)| {
            let mut o = topts.clone();
            o.turning_points = tps
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, t)| t.location)
                .collect();
            (i, d, trace_stokes_line(pot, &tps[i], d, k, &o))
        })
        .collect();
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for (i, d, r) in results {
        match r {
            Ok(l) => lines.push(l),
            Err(e) => {
                log::warn!("trace from turning point {i} direction {d} failed: {e}");
                failed.push((i, d, e.to_string()));
            }
        }
    }
    let mut g = StokesGraph {
        region: *region,
        source: pot.source(),
        turning_points: tps,
        singular,
        lines,
        failed,
        sectors: Vec::new(),
        closest: None,
        half_plane: opts.half_plane,
    };
    g.closest = find_linking(&g, opts.half_plane);
    g.sectors = classify_sectors(pot, &g);
    Ok(g)
}

fn tp_index(g: &StokesGraph, z: C64) -> Option<usize> {
    g.turning_points
        .iter()
        .position(|t| (t.location - z).norm() < 1e-6)
}

#[derive(Clone, Copy, PartialEq)]
enum End {
    Left,
    Right,
    Tp(usize),
}

fn line_end(g: &StokesGraph, l: &StokesLine) -> Option<End> {
    match l.termination {
        Termination::Boundary {
            side: Side::Left, ..
        } => Some(End::Left),
        Termination::Boundary {
            side: Side::Right, ..
        } => Some(End::Right),
        Termination::TurningPoint(z) => tp_index(g, z).map(End::Tp),
        _ => None,
    }
}

fn find_linking(g: &StokesGraph, hp: HalfPlane) -> Option<LinkingLine> {
    // Edges: (line index, from tp, to end).
    let mut edges: Vec<(usize, usize, End)> = Vec::new();
    for (k, l) in g.stokes_lines() {
        if !l.points[1..].iter().all(|p| hp.holds(*p)) || !hp.holds(l.origin.location) {
            continue;
        }
        if let (Some(i), Some(e)) = (tp_index(g, l.origin.location), line_end(g, l)) {
            edges.push((k, i, e));
        }
    }
    let mut best: Option<LinkingLine> = None;
    let starts: Vec<(usize, usize)> = edges
        .iter()
        .filter(|e| e.2 == End::Left)
        .map(|e| (e.0, e.1))
        .collect();
    for (k0, i0) in starts {
        let mut stack = vec![(i0, vec![k0], vec![i0])];
        while let Some((node, segs, visited)) = stack.pop() {
            for &(k, from, to) in &edges {
                // Walk edges in either orientation between turning points.
                let next = if from == node {
                    to
                } else if to == End::Tp(node) {
                    End::Tp(from)
                } else {
                    continue;
                };
                match next {
                    End::Right => {
                        let mut s = segs.clone();
                        s.push(k);
                        let cand = assemble(g, &s, &visited);
                        if best
                            .as_ref()
                            .map_or(true, |b| cand.min_abs_im < b.min_abs_im)
                        {
                            best = Some(cand);
                        }
                    }
                    End::Tp(j) if !visited.contains(&j) => {
                        let mut s = segs.clone();
                        s.push(k);
                        let mut v = visited.clone();
                        v.push(j);
                        stack.push((j, s, v));
                    }
                    _ => {}
                }
            }
        }
    }
    best
}

fn assemble(g: &StokesGraph, segs: &[usize], tps: &[usize]) -> LinkingLine {
    let mut points: Vec<C64> = Vec::new();
    for (n, &k) in segs.iter().enumerate() {
        let l = &g.lines[k];
        let mut p = l.points.clone();
        // Orient each piece so that it starts at the current chain end.
        let start_here = if n == 0 {
            false
        } else {
            (p[0] - *points.last().unwrap()).norm()
                < (p[p.len() - 1] - *points.last().unwrap()).norm()
        };
        if n == 0 || !start_here {
            p.reverse();
        }
        if n == 0 {
            points.extend(p);
        } else {
            points.extend(p.into_iter().skip(1));
        }
    }
    let min_abs_im = points
        .iter()
        .map(|p| p.im.abs())
        .fold(f64::INFINITY, f64::min);
    LinkingLine {
        crossings: tps.iter().map(|&i| g.turning_points[i]).collect(),
        segments: segs.to_vec(),
        points,
        min_abs_im,
    }
}

/// The linking line nearest the real axis in the graph's half-plane.
pub fn closest_stokes_line(graph: &StokesGraph) -> Result<&LinkingLine> {
    graph.closest.as_ref().ok_or(Error::NoLinkingLine)
}

fn classify_sectors<Q: QFunction + ?Sized>(pot: &Q, g: &StokesGraph) -> Vec<Sector> {
    let mut groups: Vec<(SectorAnchor, Vec<usize>)> = Vec::new();
    for (k, l) in g.stokes_lines() {
        let anchor = match l.termination {
            Termination::Pole(z) => SectorAnchor::Pole(z),
            Termination::Boundary { side, .. } => SectorAnchor::Infinity(side),
            _ => continue,
        };
        match groups.iter_mut().find(|(a, _)| *a == anchor) {
            Some((_, v)) => v.push(k),
            None => groups.push((anchor, vec![k])),
        }
    }
    let mut out = Vec::new();
    for (anchor, mut ks) in groups {
        let endp = |k: usize| *g.lines[k].points.last().unwrap();
        match anchor {
            SectorAnchor::Pole(z) => {
                ks.sort_by(|a, b| (endp(*a) - z).arg().total_cmp(&(endp(*b) - z).arg()))
            }
            SectorAnchor::Infinity(Side::Left | Side::Right) => {
                ks.sort_by(|a, b| endp(*a).im.total_cmp(&endp(*b).im))
            }
            SectorAnchor::Infinity(_) => ks.sort_by(|a, b| endp(*a).re.total_cmp(&endp(*b).re)),
        }
        let n = ks.len();
        let pairs: Vec<(usize, usize)> = match anchor {
            SectorAnchor::Pole(_) => (0..n).map(|i| (ks[i], ks[(i + 1) % n])).collect(),
            _ => (0..n.saturating_sub(1))
                .map(|i| (ks[i], ks[i + 1]))
                .collect(),
        };
        for (a, b) in pairs {
            let seed = match anchor {
                SectorAnchor::Pole(z) => {
                    let (ea, eb) = (endp(a) - z, endp(b) - z);
                    let mut th = (eb.arg() + ea.arg()) * 0.5;
                    if a == b || eb.arg() < ea.arg() {
                        th += std::f64::consts::PI;
                    }
                    z + C64::from_polar(ea.norm().max(eb.norm()), th)
                }
                _ => (endp(a) + endp(b)) * 0.5,
            };
            let sigma = sector_sigma(pot, &g.lines[a], seed).unwrap_or(0);
            out.push(Sector {
                anchor,
                bounding_lines: if a == b { vec![a] } else { vec![a, b] },
                seed,
                sigma,
            });
        }
    }
    out
}

fn sector_sigma<Q: QFunction + ?Sized>(pot: &Q, line: &StokesLine, seed: C64) -> Result<i8> {
    let n = line.points.len();
    let (end, w_end) = (line.points[n - 1], line.w[n - 1]);
    // Root at the line end, recovered from the last step's direction of W.
    let prev = line.points[n - 2];
    let hint = (line.w[n - 1] - line.w[n - 2]) / (end - prev);
    let r_end = nearest(pot.q(end)?.sqrt(), hint);
    let path = crate::numerics::ComplexPath::segment(end, seed)?;
    let w = w_end + super::action_w(pot, &path, r_end)?;
    Ok(if w.im > 0.0 { -1 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Potential;
    use crate::fields::*;

    #[test]
    fn tanh_leading_graph_links_through_crossing() {
        let m = make_tanh(1.0, 1.0).unwrap();
        let pot = Potential::leading(&m);
        let g = build_stokes_graph(
            &pot,
            &Rect::new(-4.0, 4.0, -1.2, 1.2).unwrap(),
            &GraphOptions::default(),
        )
        .unwrap();
        assert_eq!(g.turning_points.len(), 2);
        let l = closest_stokes_line(&g).unwrap();
        assert_eq!(l.crossings.len(), 1);
        assert!((l.crossings[0].location.im - std::f64::consts::FRAC_PI_4).abs() < 1e-10);
        let (a, b) = (l.points[0], *l.points.last().unwrap());
        assert!((a.re + 4.0).abs() < 0.1 && (b.re - 4.0).abs() < 0.1);
        assert!(l.min_abs_im > 0.3 && l.min_abs_im < std::f64::consts::FRAC_PI_4);
        for (_, line) in g.stokes_lines() {
            assert!(line.max_defect() < 1e-6);
        }
    }

    #[test]
    fn constant_potential_has_no_lines() {
        let m = make_constant([0.0, 0.0, 1.0], 1.0).unwrap();
        let pot = Potential::leading(&m);
        let g = build_stokes_graph(
            &pot,
            &Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(),
            &GraphOptions::default(),
        )
        .unwrap();
        assert!(g.turning_points.is_empty() && g.lines.is_empty());
        assert!(matches!(closest_stokes_line(&g), Err(Error::NoLinkingLine)));
    }

    #[test]
    fn nikitin_leading_graph() {
        let m = make_nikitin(1.0, 1.0, 1.0).unwrap();
        let pot = Potential::leading(&m);
        let g = build_stokes_graph(
            &pot,
            &Rect::new(-5.0, 5.0, -2.0, 2.0).unwrap(),
            &GraphOptions::default(),
        )
        .unwrap();
        assert_eq!(g.turning_points.len(), 6, "{:?}", g.turning_points);
        assert!(g.failed.is_empty(), "{:?}", g.failed);
        let l = closest_stokes_line(&g).unwrap();
        assert_eq!(l.crossings.len(), 2);
        assert!(l
            .crossings
            .iter()
            .all(|c| (c.location.im - 0.75f64.sqrt()).abs() < 1e-8));
        let poles = g
            .lines
            .iter()
            .filter(|l| matches!(l.termination, Termination::Pole(_)))
            .count();
        assert_eq!(poles, 6);
    }

    #[test]
    fn sech_leading_graph() {
        let m = make_sech(1.0, 2.0, 1.0).unwrap();
        let pot = Potential::leading(&m);
        let g = build_stokes_graph(
            &pot,
            &Rect::new(-5.0, 5.0, -2.0, 2.0).unwrap(),
            &GraphOptions::default(),
        )
        .unwrap();
        let x = 2.0f64.asinh();
        for z in [
            C64::new(x, std::f64::consts::FRAC_PI_2),
            C64::new(-x, std::f64::consts::FRAC_PI_2),
        ] {
            assert!(
                g.turning_points
                    .iter()
                    .any(|t| (t.location - z).norm() < 1e-8),
                "{:?}",
                g.turning_points
            );
        }
        let l = closest_stokes_line(&g).unwrap();
        assert_eq!(l.crossings.len(), 2);
        assert!(l
            .crossings
            .iter()
            .all(|c| (c.location.re.abs() - x).abs() < 1e-8));
    }
}
