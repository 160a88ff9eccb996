//! Self-contained SVG line charts for the trace figures.

use std::fmt::Write as _;

use super::{DlcCorridor, HarnessError, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Plan view of the path with travel-direction arrows.
    Trajectory,
    /// Lead minus ego speed and spacing error versus time.
    VelocityDifference,
    /// Steering angle, yaw rate and lateral acceleration versus time.
    Lateral,
}

impl Figure {
    pub fn file_name(self) -> &'static str {
        match self {
            Figure::Trajectory => "trajectory.svg",
            Figure::VelocityDifference => "velocity_difference.svg",
            Figure::Lateral => "lateral.svg",
        }
    }
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    arrows: bool,
}

struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
    /// Static line segments drawn in grey (corridor cone lines).
    segments: Vec<((f64, f64), (f64, f64))>,
    equal_aspect: bool,
}

impl Panel {
    fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Panel {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            segments: Vec::new(),
            equal_aspect: false,
        }
    }

    fn series(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points, arrows: false });
        self
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn bounds(panel: &Panel) -> (f64, f64, f64, f64) {
    let pts = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .chain(panel.segments.iter().flat_map(|(a, b)| [*a, *b]));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| if b - a < 1e-9 { (a - 0.5, b + 0.5) } else { (a, b) };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let my = 0.05 * (y1 - y0);
    (x0, x1, y0 - my, y1 + my)
}

fn render(title: &str, panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);
    for (k, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, k as f64 * PANEL_HEIGHT);
    }
    svg.push_str("</svg>\n");
    svg
}

fn render_panel(svg: &mut String, p: &Panel, top: f64) {
    let (mut x0, mut x1, mut y0, mut y1) = bounds(p);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = PANEL_HEIGHT - MARGIN_T - MARGIN_B;
    if p.equal_aspect {
        // same metres per pixel on both axes
        let scale = ((x1 - x0) / pw).max((y1 - y0) / ph);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        x0 = cx - 0.5 * scale * pw;
        x1 = cx + 0.5 * scale * pw;
        y0 = cy - 0.5 * scale * ph;
        y1 = cy + 0.5 * scale * ph;
    }
    let sx = move |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = move |y: f64| top + MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let _ = writeln!(svg, r#"<g class="panel">"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{:.3}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##,
        top + MARGIN_T
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-size="13">{}</text>"#,
        MARGIN_L + 0.5 * pw,
        top + 18.0,
        escape(&p.title)
    );
    for (step, vertical) in [(nice_step(x1 - x0), true), (nice_step(y1 - y0), false)] {
        let (lo, hi) = if vertical { (x0, x1) } else { (y0, y1) };
        let mut v = (lo / step).ceil() * step;
        while v <= hi + 1e-9 * step {
            let label = format_tick(v, step);
            if vertical {
                let x = sx(v);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}" stroke="#ddd"/><text x="{x:.3}" y="{:.3}" text-anchor="middle">{label}</text>"##,
                    top + MARGIN_T,
                    top + MARGIN_T + ph,
                    top + MARGIN_T + ph + 14.0
                );
            } else {
                let y = sy(v);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{MARGIN_L}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="#ddd"/><text x="{:.3}" y="{:.3}" text-anchor="end">{label}</text>"##,
                    MARGIN_L + pw,
                    MARGIN_L - 6.0,
                    y + 4.0
                );
            }
            v += step;
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
        MARGIN_L + 0.5 * pw,
        top + PANEL_HEIGHT - 8.0,
        escape(&p.x_label)
    );
    let yl = top + MARGIN_T + 0.5 * ph;
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{yl:.3}" text-anchor="middle" transform="rotate(-90 16 {yl:.3})">{}</text>"#,
        escape(&p.y_label)
    );
    for (a, b) in &p.segments {
        let _ = writeln!(
            svg,
            r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#f28e2b" stroke-width="2"/>"##,
            sx(a.0),
            sy(a.1),
            sx(b.0),
            sy(b.1)
        );
    }
    for (i, s) in p.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.label),
            pts.join(" ")
        );
        if s.arrows {
            render_arrows(svg, &s.points, color, &sx, &sy);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" fill="{color}">{}</text>"#,
            MARGIN_L + 8.0 + 150.0 * i as f64,
            top + MARGIN_T + 14.0,
            escape(&s.label)
        );
    }
    svg.push_str("</g>\n");
}

fn render_arrows(svg: &mut String, pts: &[(f64, f64)], color: &str, sx: &dyn Fn(f64) -> f64, sy: &dyn Fn(f64) -> f64) {
    let n = pts.len();
    if n < 2 {
        return;
    }
    if let Some(&(x, y)) = pts.first() {
        let _ = writeln!(svg, r#"<circle cx="{:.3}" cy="{:.3}" r="4" fill="{color}"/>"#, sx(x), sy(y));
    }
    let every = (n / 8).max(1);
    for i in (every..n).step_by(every) {
        let (a, b) = (pts[i - 1], pts[i]);
        let (ax, ay, bx, by) = (sx(a.0), sy(a.1), sx(b.0), sy(b.1));
        let ang = (by - ay).atan2(bx - ax);
        if !(bx - ax).is_finite() || (bx - ax).hypot(by - ay) < 1e-9 {
            continue;
        }
        let l = 9.0;
        let p1 = (bx - l * (ang - 0.4).cos(), by - l * (ang - 0.4).sin());
        let p2 = (bx - l * (ang + 0.4).cos(), by - l * (ang + 0.4).sin());
        let _ = writeln!(
            svg,
            r#"<polygon class="arrow" fill="{color}" points="{bx:.3},{by:.3} {:.3},{:.3} {:.3},{:.3}"/>"#,
            p1.0, p1.1, p2.0, p2.1
        );
    }
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn xy(trace: &Trace, x: &str, y: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    Ok(trace.column(x)?.into_iter().zip(trace.column(y)?).collect())
}

/// Every figure the trace's columns support, as `(figure, svg text)`.
pub fn plot_trace(trace: &Trace, corridor: Option<&DlcCorridor>) -> Result<Vec<(Figure, String)>, HarnessError> {
    let mut out = Vec::new();

    let mut traj = Panel::new("Trajectory", "x (m)", "y (m)");
    traj.equal_aspect = true;
    traj.series.push(Series { label: "ego".into(), points: xy(trace, "x", "y")?, arrows: true });
    if trace.has("lead_x") {
        traj.series.push(Series { label: "lead".into(), points: xy(trace, "lead_x", "lead_y")?, arrows: true });
    }
    if let Some(c) = corridor {
        let mut s0 = c.start;
        for s in &c.sections {
            let s1 = s0 + s.length;
            if let Some((lo, hi)) = s.bounds {
                traj.segments.push(((s0, lo), (s1, lo)));
                traj.segments.push(((s0, hi), (s1, hi)));
            }
            s0 = s1;
        }
    }
    out.push((Figure::Trajectory, render("Trajectory", &[traj])));

    if trace.has("delta_v") {
        let panels = [
            Panel::new("Velocity difference (lead - ego)", "t (s)", "dv (m/s)")
                .series("dv", xy(trace, "t", "delta_v")?),
            Panel::new("Spacing error", "t (s)", "e (m)").series("spacing error", xy(trace, "t", "spacing_error")?),
            Panel::new("Speeds", "t (s)", "v (m/s)")
                .series("lead", xy(trace, "t", "lead_vx")?)
                .series("ego", xy(trace, "t", "vx")?),
        ];
        out.push((Figure::VelocityDifference, render("Velocity difference", &panels)));
    }

    let panels = [
        Panel::new("Road-wheel steering angle", "t (s)", "angle (rad)")
            .series("target", xy(trace, "t", "steer_target")?)
            .series("actual", xy(trace, "t", "steer")?),
        Panel::new("Yaw rate", "t (s)", "r (rad/s)").series("yaw rate", xy(trace, "t", "yaw_rate")?),
        Panel::new("Lateral acceleration", "t (s)", "ay (m/s^2)").series("ay", xy(trace, "t", "ay")?),
    ];
    out.push((Figure::Lateral, render("Steering, yaw rate and lateral acceleration", &panels)));
    Ok(out)
}

/// Pulls the `points` of every `<polyline>` back out of an SVG, in pixel
/// coordinates.
pub fn polyline_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .filter_map(|l| {
            let start = l.find("points=\"")? + 8;
            let end = start + l[start..].find('"')?;
            Some(
                l[start..end]
                    .split_whitespace()
                    .filter_map(|p| {
                        let (a, b) = p.split_once(',')?;
                        Some((a.parse().ok()?, b.parse().ok()?))
                    })
                    .collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle() -> Trace {
        let cols = ["t", "x", "y", "heading", "steer_target", "steer", "yaw_rate", "ay"];
        let mut t = Trace::new(cols);
        for i in 0..=200 {
            let th = 2.0 * PI * i as f64 / 200.0;
            t.push(vec![i as f64 * 0.1, 20.0 * th.cos(), 20.0 * th.sin(), th + PI / 2.0, 0.1, 0.1, 0.5, 2.0]);
        }
        t
    }

    #[test]
    fn circular_trajectory_closes() {
        let figs = plot_trace(&circle(), None).unwrap();
        let (fig, svg) = &figs[0];
        assert_eq!(*fig, Figure::Trajectory);
        let lines = polyline_points(svg);
        let pts = &lines[0];
        assert_eq!(pts.len(), 201);
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        assert!((a.0 - b.0).abs() < 1e-3 && (a.1 - b.1).abs() < 1e-3);
        // equal aspect: the circle spans the same pixel width and height
        let w = pts.iter().map(|p| p.0).fold(f64::MIN, f64::max) - pts.iter().map(|p| p.0).fold(f64::MAX, f64::min);
        let h = pts.iter().map(|p| p.1).fold(f64::MIN, f64::max) - pts.iter().map(|p| p.1).fold(f64::MAX, f64::min);
        assert!((w - h).abs() < 0.01, "{w} vs {h}");
    }

    #[test]
    fn figures_follow_columns() {
        let figs = plot_trace(&circle(), None).unwrap();
        assert_eq!(figs.iter().map(|f| f.0).collect::<Vec<_>>(), vec![Figure::Trajectory, Figure::Lateral]);
    }

    #[test]
    fn ticks() {
        assert_eq!(nice_step(10.0), 2.0);
        assert_eq!(format_tick(-0.0001, 0.5), "0.0");
        assert_eq!(format_tick(2.5, 0.5), "2.5");
    }
}
