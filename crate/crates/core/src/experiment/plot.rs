use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::write_atomic;
use crate::audit::{read_sweep_csv, SweepRow, SWEEP_COLUMNS};
use crate::error::{Error, Result};
use crate::game::GameState;
use crate::learner::{read_curves_csv, LearningCurve};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 42.0;
const LEGEND_H: f64 = 28.0;
/// Series longer than this are thinned to every k-th point (plus the last).
const MAX_POINTS: usize = 400;
const COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

/// One learner's policy over training, stages laid end to end.
struct Panel {
    title: String,
    seed: u64,
    slot: u8,
    /// (x, p_defect per state)
    points: Vec<(f64, [f64; 5])>,
    stage_starts: Vec<f64>,
}

fn panels_from(source: &str, curves: &[LearningCurve]) -> Vec<Panel> {
    let mut keys: Vec<(u64, u8)> = Vec::new();
    for c in curves {
        if !keys.contains(&(c.seed, c.slot)) {
            keys.push((c.seed, c.slot));
        }
    }
    keys.into_iter()
        .map(|(seed, slot)| {
            let mut stages: Vec<&LearningCurve> = curves.iter().filter(|c| c.seed == seed && c.slot == slot).collect();
            stages.sort_by_key(|c| c.stage);
            let mut offset = 0.0;
            let mut points = Vec::new();
            let mut stage_starts = Vec::new();
            for (i, c) in stages.iter().enumerate() {
                if i > 0 {
                    stage_starts.push(offset);
                }
                for p in &c.points {
                    points.push((offset + p.update as f64, p.p_defect));
                }
                offset += c.points.last().map_or(0.0, |p| p.update as f64);
            }
            Panel {
                title: format!("{source}: seed {seed}, player {slot}"),
                seed,
                slot,
                points,
                stage_starts,
            }
        })
        .collect()
}

fn thin<T: Copy>(xs: &[T]) -> Vec<T> {
    if xs.len() <= MAX_POINTS {
        return xs.to_vec();
    }
    let stride = xs.len().div_ceil(MAX_POINTS);
    let mut out: Vec<T> = xs.iter().copied().step_by(stride).collect();
    if !(xs.len() - 1).is_multiple_of(stride) {
        out.push(xs[xs.len() - 1]);
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace("--", "- -")
}

struct Frame {
    x0: f64,
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + MARGIN_L + x / self.x_max * (PANEL_W - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN_T + (1.0 - y / self.y_max) * (PANEL_H - MARGIN_T - MARGIN_B)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str, x_ticks: &[f64], y_ticks: &[f64]) {
        let (l, r) = (self.px(0.0), self.px(self.x_max));
        let (b, t) = (self.py(0.0), self.py(self.y_max));
        let _ = writeln!(
            out,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        for &y in y_ticks {
            let _ = writeln!(
                out,
                r##"<line x1="{l:.2}" y1="{0:.2}" x2="{r:.2}" y2="{0:.2}" stroke="#ddd"/><text x="{1:.2}" y="{2:.2}" text-anchor="end">{y}</text>"##,
                self.py(y),
                l - 4.0,
                self.py(y) + 4.0
            );
        }
        for &x in x_ticks {
            let _ = writeln!(
                out,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x}</text>"##,
                self.px(x),
                b + 16.0
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="20" text-anchor="middle" font-weight="bold">{}</text>"##,
            (l + r) / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"##,
            (l + r) / 2.0,
            b + 34.0
        );
        let _ = writeln!(
            out,
            r##"<text x="{0:.2}" y="{1:.2}" text-anchor="middle" transform="rotate(-90 {0:.2} {1:.2})">{y_label}</text>"##,
            self.x0 + 14.0,
            (t + b) / 2.0
        );
    }

    fn polyline(&self, out: &mut String, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
            coords.join(" ")
        );
    }
}

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn legend(out: &mut String, y: f64, labels: &[&str]) {
    for (i, label) in labels.iter().enumerate() {
        let x = 20.0 + i as f64 * 90.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{label}</text>"#,
            x + 18.0,
            COLORS[i % COLORS.len()],
            x + 22.0,
            y + 4.0
        );
    }
}

fn nice_max(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(x.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= x {
            return m * mag;
        }
    }
    10.0 * mag
}

/// Learning curves as one panel per (source, seed, player), side by side:
/// p_defect for the five states against the update index. Each panel opens
/// with a comment holding its source, size and final probabilities.
pub fn render_curves_svg(sources: &[(String, Vec<LearningCurve>)]) -> Result<String> {
    let panels: Vec<Panel> = sources.iter().flat_map(|(s, c)| panels_from(s, c)).collect();
    if panels.iter().all(|p| p.points.is_empty()) {
        return Err(Error::Parse("no learning-curve rows to plot".into()));
    }
    let width = PANEL_W * panels.len() as f64;
    let mut out = String::new();
    svg_open(&mut out, width, PANEL_H + LEGEND_H);
    for (i, p) in panels.iter().enumerate() {
        let last = p.points.last().map(|(_, v)| *v).unwrap_or([f64::NAN; 5]);
        let _ = writeln!(
            out,
            "<!-- panel {i}: {}; seed={} slot={} points={} stages={} final p_defect start={} cc={} cd={} dc={} dd={} -->",
            escape(&p.title),
            p.seed,
            p.slot,
            p.points.len(),
            p.stage_starts.len() + 1,
            last[0],
            last[1],
            last[2],
            last[3],
            last[4]
        );
        let x_max = p.points.last().map_or(1.0, |(x, _)| x.max(1.0));
        let frame = Frame {
            x0: i as f64 * PANEL_W,
            x_max,
            y_max: 1.0,
        };
        let _ = writeln!(out, "<g>");
        frame.axes(
            &mut out,
            &p.title,
            "update",
            "p(defect)",
            &[0.0, (x_max / 2.0).round(), x_max],
            &[0.0, 0.25, 0.5, 0.75, 1.0],
        );
        for &s in &p.stage_starts {
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                frame.px(s),
                frame.py(1.0),
                frame.py(0.0)
            );
        }
        let thinned = thin(&p.points);
        for (k, color) in COLORS.iter().enumerate() {
            let series: Vec<(f64, f64)> = thinned.iter().map(|(x, v)| (*x, v[k])).collect();
            frame.polyline(&mut out, &series, color);
        }
        let _ = writeln!(out, "</g>");
    }
    let labels = GameState::ALL.map(|s| s.label());
    legend(&mut out, PANEL_H + 12.0, &labels);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Exploitability gaps against the discount factor. Filled markers are
/// epsilon-Nash rows.
pub fn render_sweep_svg(title: &str, rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Parse("no sweep rows to plot".into()));
    }
    let y_max = nice_max(rows.iter().map(|r| r.gap_p1.max(r.gap_p2)).fold(0.0, f64::max));
    let frame = Frame {
        x0: 0.0,
        x_max: 1.0,
        y_max,
    };
    let mut out = String::new();
    svg_open(&mut out, PANEL_W, PANEL_H + LEGEND_H);
    let _ = writeln!(out, "<!-- sweep: {}; rows={} -->", escape(title), rows.len());
    for r in rows {
        let _ = writeln!(
            out,
            "<!-- gamma={} gap_p1={} gap_p2={} is_nash={} -->",
            r.gamma, r.gap_p1, r.gap_p2, r.is_nash
        );
    }
    frame.axes(
        &mut out,
        title,
        "gamma",
        "exploitability gap",
        &[0.0, 0.25, 0.5, 0.75, 1.0],
        &[0.0, y_max / 2.0, y_max],
    );
    for (k, pick) in [|r: &SweepRow| r.gap_p1, |r: &SweepRow| r.gap_p2].iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.gamma, pick(r).max(0.0))).collect();
        frame.polyline(&mut out, &pts, COLORS[k]);
        for r in rows {
            let fill = if r.is_nash { COLORS[k] } else { "white" };
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}" stroke="{}"/>"#,
                frame.px(r.gamma),
                frame.py(pick(r).max(0.0)),
                COLORS[k]
            );
        }
    }
    legend(&mut out, PANEL_H + 12.0, &["player 1", "player 2"]);
    out.push_str("</svg>\n");
    Ok(out)
}

enum Input {
    Curves(Vec<LearningCurve>),
    Sweep(Vec<SweepRow>),
}

fn read_input(path: &Path) -> Result<Input> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(Error::Schema {
            path: path.into(),
            detail: "file is empty".into(),
        });
    }
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let is_sweep = first.starts_with(SWEEP_COLUMNS[0].as_bytes()) && first.get(5) == Some(&b',');
    let input = if is_sweep {
        Input::Sweep(read_sweep_csv(bytes.as_slice(), path)?)
    } else {
        Input::Curves(read_curves_csv(bytes.as_slice(), path)?)
    };
    let empty = match &input {
        Input::Curves(c) => c.iter().all(|c| c.points.is_empty()),
        Input::Sweep(r) => r.is_empty(),
    };
    if empty {
        return Err(Error::Schema {
            path: path.into(),
            detail: "header only, no data rows".into(),
        });
    }
    Ok(input)
}

/// Renders learning-curve CSVs (all panels in one SVG) or a single sweep
/// CSV to `output`. The kind is detected from the header.
pub fn plot(inputs: &[PathBuf], output: &Path) -> Result<PathBuf> {
    if inputs.is_empty() {
        return Err(Error::InvalidConfig("plot needs at least one CSV".into()));
    }
    let mut curves = Vec::new();
    let mut sweeps = Vec::new();
    for path in inputs {
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        match read_input(path)? {
            Input::Curves(c) => curves.push((name, c)),
            Input::Sweep(r) => sweeps.push((name, r)),
        }
    }
    let svg = match (curves.is_empty(), sweeps.as_slice()) {
        (false, []) => render_curves_svg(&curves)?,
        (true, [(name, rows)]) => render_sweep_svg(name, rows)?,
        _ => {
            return Err(Error::InvalidConfig(
                "plot takes learning-curve CSVs or exactly one sweep CSV, not a mix".into(),
            ))
        }
    };
    write_atomic(output, svg.as_bytes())?;
    Ok(output.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::CurvePoint;

    fn curve(seed: u64, slot: u8, stage: usize, n: usize, p: f64) -> LearningCurve {
        LearningCurve {
            seed,
            stage,
            slot,
            points: (1..=n)
                .map(|u| CurvePoint {
                    update: u,
                    p_defect: [p; 5],
                    mean_return: 0.0,
                    mean_discounted_return: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn two_runs_give_two_panels_side_by_side() {
        let svg = render_curves_svg(&[
            ("a".into(), vec![curve(0, 1, 0, 10, 0.2)]),
            ("b".into(), vec![curve(1, 1, 0, 10, 0.9)]),
        ])
        .unwrap();
        assert_eq!(svg.matches("<!-- panel").count(), 2);
        assert!(svg.contains(&format!("width=\"{}\"", 2.0 * PANEL_W)));
        assert_eq!(svg.matches("<polyline").count(), 10);
    }

    #[test]
    fn stages_share_a_panel() {
        let svg = render_curves_svg(&[("c".into(), vec![curve(0, 1, 0, 5, 0.5), curve(0, 1, 1, 5, 0.1)])]).unwrap();
        assert_eq!(svg.matches("<!-- panel").count(), 1);
        assert!(svg.contains("stages=2"));
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn rendering_is_deterministic_and_thinned() {
        let src = vec![("x".into(), vec![curve(0, 1, 0, 2000, 0.3)])];
        let a = render_curves_svg(&src).unwrap();
        assert_eq!(a, render_curves_svg(&src).unwrap());
        let pts = a.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert!(pts.split(' ').count() <= MAX_POINTS + 1);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(render_curves_svg(&[("e".into(), vec![])]).is_err());
        assert!(render_sweep_svg("s", &[]).is_err());
    }

    #[test]
    fn thin_keeps_endpoints() {
        let xs: Vec<usize> = (0..1001).collect();
        let t = thin(&xs);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 1000);
        assert!(t.len() <= MAX_POINTS + 1);
    }
}
