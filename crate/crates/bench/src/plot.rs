//! Energy-versus-time plots as self-contained SVG.

use std::fmt::Write as _;

use swarm_fusion::swarm::EnergyTrace;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    /// Best pool energy of each trace.
    Global,
    /// Published energy of every worker of every trace.
    PerWorker,
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

fn series(traces: &[(String, EnergyTrace)], view: View) -> Vec<Series> {
    let mut out = Vec::new();
    for (name, t) in traces {
        match view {
            View::Global => out.push(Series {
                name: name.clone(),
                points: t
                    .records()
                    .iter()
                    .map(|r| (r.elapsed_ms, r.best_energy))
                    .collect(),
            }),
            View::PerWorker => {
                for w in t.workers() {
                    out.push(Series {
                        name: format!("{name} w{w}"),
                        points: t.worker(w).map(|r| (r.elapsed_ms, r.energy)).collect(),
                    });
                }
            }
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Enough decimals to tell `TICKS` steps over `span` apart.
fn tick_label(v: f64, span: f64) -> String {
    let step = span / TICKS as f64;
    let decimals = (-step.log10().floor()).clamp(0.0, 6.0) as usize;
    format!("{v:.decimals$}")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Renders the traces, one line per series. Series with a single point are
/// drawn as a dot.
pub fn render(traces: &[(String, EnergyTrace)], view: View) -> String {
    let all = series(traces, view);
    let (x0, x1) = match range(all.iter().flat_map(|s| s.points.iter().map(|p| p.0))) {
        Some((_, hi)) if hi > 0.0 => (0.0, hi),
        _ => (0.0, 1.0),
    };
    let (y0, y1) = match range(all.iter().flat_map(|s| s.points.iter().map(|p| p.1))) {
        Some((lo, hi)) if hi > lo => (lo, hi),
        Some((v, _)) => (v - 1.0, v + 1.0),
        None => (0.0, 1.0),
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g id="axes" stroke="black"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = TOP + ph,
        r = LEFT + pw
    );
    svg.push_str("<g id=\"ticks\">\n");
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + ph + 18.0,
            tick_label(xv, x1 - x0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick_label(yv, y1 - y0)
        );
    }
    svg.push_str("</g>\n");
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">elapsed (ms)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        match view {
            View::Global => "best energy",
            View::PerWorker => "worker energy",
        }
    );

    for (i, s) in all.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let name = escape(&s.name);
        match s.points.as_slice() {
            [] => {}
            [(x, y)] => {
                let _ = writeln!(
                    svg,
                    r#"<circle class="series" data-name="{name}" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(*x),
                    sy(*y)
                );
            }
            pts => {
                let path: Vec<String> = pts
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline class="series" data-name="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
        }
        let ly = TOP + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{name}</text>"#,
            LEFT + pw + 12.0,
            ly
        );
    }
    svg.push_str("</svg>\n");
    svg
}
