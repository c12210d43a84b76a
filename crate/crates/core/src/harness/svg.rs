use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Trajectory;
use crate::maze::MazeLayout;

use super::{EpisodeTrace, ParticleSnapshot};

const SIZE: f64 = 600.0;

fn px(x: f64) -> f64 {
    x * SIZE
}

/// Unit-box y grows upward; SVG y grows downward.
fn py(y: f64) -> f64 {
    (1.0 - y) * SIZE
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, style: &str) {
    let coords: Vec<String> = points.map(|(x, y)| format!("{:.3},{:.3}", px(x), py(y))).collect();
    let _ = writeln!(out, r#"  <polyline points="{}" {style}/>"#, coords.join(" "));
}

/// Layout, demonstration and executed path, with optional particle scatter.
pub fn render_svg(
    trace: &EpisodeTrace,
    layout: &MazeLayout,
    demo: &Trajectory,
    snapshots: &[ParticleSnapshot],
    path: &Path,
) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        s,
        r#"  <rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#
    );
    for r in layout.solids() {
        let _ = writeln!(
            s,
            r##"  <rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#444"/>"##,
            px(r.x_min),
            py(r.y_max),
            px(r.x_max - r.x_min),
            px(r.y_max - r.y_min)
        );
    }
    let g = &layout.goal;
    let _ = writeln!(
        s,
        r##"  <circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#9c9" fill-opacity="0.6"/>"##,
        px(g.x),
        py(g.y),
        px(g.radius)
    );
    for snap in snapshots {
        let _ = writeln!(s, r#"  <g class="particles" data-cycle="{}">"#, snap.cycle);
        for q in snap.particles.iter() {
            let _ = writeln!(
                s,
                r##"    <circle cx="{:.3}" cy="{:.3}" r="1.5" fill="#e66" fill-opacity="0.5"/>"##,
                px(q[0]),
                py(q[1])
            );
        }
        let _ = writeln!(s, "  </g>");
    }
    polyline(
        &mut s,
        demo.states().map(|x| (x[0], x[1])),
        r##"fill="none" stroke="#36c" stroke-width="2" stroke-dasharray="6 4""##,
    );
    let start = (layout.start.x, layout.start.y);
    polyline(
        &mut s,
        std::iter::once(start).chain(trace.rows.iter().map(|r| (r.position[0], r.position[1]))),
        r##"fill="none" stroke="#c30" stroke-width="2""##,
    );
    let _ = writeln!(s, "</svg>");
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
