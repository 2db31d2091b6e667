//! Overhead renderings of a course, with an optional trajectory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::Transcript;
use crate::course::{CourseSpec, ObstacleClass};
use crate::geometry::{Pose, Vec2};

/// Cell size of the ASCII map in meters.
pub const ASCII_CELL: f64 = 0.2;
const SVG_SCALE: f64 = 60.0;

fn class_glyph(class: ObstacleClass) -> char {
    match class {
        ObstacleClass::Wall => '#',
        ObstacleClass::LowOverhang => '=',
        ObstacleClass::Step => '^',
        ObstacleClass::GoalMarker => '*',
    }
}

fn trajectory(course: &CourseSpec, transcript: Option<&Transcript>) -> Vec<Pose> {
    let mut poses = vec![course.start];
    if let Some(t) = transcript {
        poses.extend(t.steps.iter().map(|s| s.pose_after));
    }
    poses
}

/// Rows top (max y) to bottom. `S` start, `G` goal, digits are step indices
/// modulo 10 and `.` the path between them.
pub fn ascii_map(course: &CourseSpec, transcript: Option<&Transcript>) -> String {
    let b = course.bounds;
    let nx = (b.width() / ASCII_CELL).ceil() as usize;
    let ny = (b.height() / ASCII_CELL).ceil() as usize;
    let center = |i: usize, j: usize| {
        Vec2::new(b.min_x + (i as f64 + 0.5) * ASCII_CELL, b.max_y - (j as f64 + 0.5) * ASCII_CELL)
    };
    let mut grid = vec![vec![' '; nx]; ny];
    for (j, row) in grid.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            let c = center(i, j);
            if c.distance(course.goal.center) <= course.goal.radius {
                *cell = 'o';
            }
            if let Some(o) = course.obstacles.iter().find(|o| o.shape.contains(c)) {
                *cell = class_glyph(o.class);
            }
        }
    }
    let cell_of = |p: Vec2| -> Option<(usize, usize)> {
        let i = ((p.x - b.min_x) / ASCII_CELL).floor();
        let j = ((b.max_y - p.y) / ASCII_CELL).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < nx && (j as usize) < ny).then_some((i as usize, j as usize))
    };
    let poses = trajectory(course, transcript);
    for w in poses.windows(2) {
        let (a, c) = (w[0].position(), w[1].position());
        let n = ((a.distance(c) / (ASCII_CELL / 2.0)).ceil() as usize).max(1);
        for k in 1..n {
            let p = a + (c - a) * (k as f64 / n as f64);
            if let Some((i, j)) = cell_of(p) {
                if matches!(grid[j][i], ' ' | 'o') {
                    grid[j][i] = '.';
                }
            }
        }
    }
    for (k, p) in poses.iter().enumerate().skip(1) {
        if let Some((i, j)) = cell_of(p.position()) {
            grid[j][i] = char::from_digit((k % 10) as u32, 10).expect("digit");
        }
    }
    if let Some((i, j)) = cell_of(course.goal.center) {
        grid[j][i] = 'G';
    }
    if let Some((i, j)) = cell_of(course.start.position()) {
        grid[j][i] = 'S';
    }
    let mut out = String::new();
    let border = format!("+{}+\n", "-".repeat(nx));
    out.push_str(&border);
    for row in grid {
        out.push('|');
        out.extend(row);
        out.push_str("|\n");
    }
    out.push_str(&border);
    out.push_str("legend: # wall, = low overhang, ^ step, * marker, o goal, S start, G goal centre, digits step index\n");
    out
}

fn class_fill(class: ObstacleClass) -> &'static str {
    match class {
        ObstacleClass::Wall => "#555555",
        ObstacleClass::LowOverhang => "#8c6d46",
        ObstacleClass::Step => "#4f7f3a",
        ObstacleClass::GoalMarker => "#d04040",
    }
}

pub fn svg_map(course: &CourseSpec, transcript: Option<&Transcript>) -> String {
    let b = course.bounds;
    let w = b.width() * SVG_SCALE;
    let h = b.height() * SVG_SCALE;
    let tx = |p: Vec2| ((p.x - b.min_x) * SVG_SCALE, (b.max_y - p.y) * SVG_SCALE);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#);
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w:.1}" height="{h:.1}" fill="#fafafa" stroke="#000" stroke-width="2"/>"##);
    for o in &course.obstacles {
        let pts: Vec<String> = o
            .shape
            .vertices()
            .iter()
            .map(|&v| {
                let (x, y) = tx(v);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{}" fill-opacity="0.8"/>"#, pts.join(" "), class_fill(o.class));
    }
    let (gx, gy) = tx(course.goal.center);
    let _ = writeln!(
        s,
        r##"<circle cx="{gx:.1}" cy="{gy:.1}" r="{:.1}" fill="#e03030" fill-opacity="0.3" stroke="#e03030"/>"##,
        course.goal.radius * SVG_SCALE
    );
    let poses = trajectory(course, transcript);
    if poses.len() > 1 {
        let pts: Vec<String> = poses
            .iter()
            .map(|p| {
                let (x, y) = tx(p.position());
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f5fbf" stroke-width="2"/>"##, pts.join(" "));
        for (k, p) in poses.iter().enumerate().skip(1) {
            let (x, y) = tx(p.position());
            let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" font-size="10" fill="#1f5fbf">{k}</text>"##, x + 3.0, y - 3.0);
        }
    }
    let (sx, sy) = tx(course.start.position());
    let f = course.start.forward();
    let _ = writeln!(
        s,
        r##"<circle cx="{sx:.1}" cy="{sy:.1}" r="{:.1}" fill="none" stroke="#000"/>"##,
        crate::course::ROBOT_RADIUS * SVG_SCALE
    );
    let _ = writeln!(
        s,
        r##"<line x1="{sx:.1}" y1="{sy:.1}" x2="{:.1}" y2="{:.1}" stroke="#000"/>"##,
        sx + f.x * 0.5 * SVG_SCALE,
        sy - f.y * 0.5 * SVG_SCALE
    );
    s.push_str("</svg>\n");
    s
}

/// Writes `<out>.txt` and `<out>.svg`, returning both paths.
pub fn render_course(course: &CourseSpec, transcript: Option<&Transcript>, out: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let txt = out.with_extension("txt");
    let svg = out.with_extension("svg");
    std::fs::write(&txt, ascii_map(course, transcript))?;
    std::fs::write(&svg, svg_map(course, transcript))?;
    Ok((txt, svg))
}
