use super::graph::StokesGraph;
use super::trace::LineKind;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One row per traced point: `line,kind,origin_re,origin_im,re,im,w_re,w_im`.
pub fn graph_csv(g: &StokesGraph) -> String {
    let mut out = String::from("line,kind,origin_re,origin_im,re,im,w_re,w_im\n");
    for (k, l) in g.lines.iter().enumerate() {
        let kind = match l.kind {
            LineKind::Stokes => "stokes",
            LineKind::AntiStokes => "anti_stokes",
        };
        for (p, w) in l.points.iter().zip(&l.w) {
            let _ = writeln!(
                out,
                "{k},{kind},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                l.origin.location.re, l.origin.location.im, p.re, p.im, w.re, w.im
            );
        }
    }
    out
}

pub fn graph_svg(g: &StokesGraph) -> String {
    let r = &g.region;
    let (w, h) = (r.re_max - r.re_min, r.im_max - r.im_min);
    let px = 800.0;
    let sc = px / w.max(h);
    let (pw, ph) = (w * sc, h * sc);
    let map = |re: f64, im: f64| ((re - r.re_min) * sc, (r.im_max - im) * sc);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{pw:.0}" height="{ph:.0}" viewBox="0 0 {pw:.2} {ph:.2}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if r.im_min < 0.0 && r.im_max > 0.0 {
        let (x0, y0) = map(r.re_min, 0.0);
        let (x1, _) = map(r.re_max, 0.0);
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="gray" stroke-dasharray="4 4"/>"#
        );
    }
    for l in &g.lines {
        let color = match l.kind {
            LineKind::Stokes => "steelblue",
            LineKind::AntiStokes => "darkorange",
        };
        let pts: Vec<String> = l
            .points
            .iter()
            .map(|p| {
                let (x, y) = map(p.re, p.im);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }
    if let Some(c) = &g.closest {
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|p| {
                let (x, y) = map(p.re, p.im);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="crimson" stroke-width="3" opacity="0.6" points="{}"/>"#,
            pts.join(" ")
        );
    }
    for t in &g.turning_points {
        let (x, y) = map(t.location.re, t.location.im);
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#
        );
    }
    for z in &g.singular {
        let (x, y) = map(z.re, z.im);
        let _ = writeln!(
            out,
            r#"<path d="M{:.2},{:.2}l8,8m0,-8l-8,8" stroke="red" stroke-width="2"/>"#,
            x - 4.0,
            y - 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_graph_csv(g: &StokesGraph, path: &Path) -> Result<()> {
    std::fs::write(path, graph_csv(g)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_graph_svg(g: &StokesGraph, path: &Path) -> Result<()> {
    std::fs::write(path, graph_svg(g)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
