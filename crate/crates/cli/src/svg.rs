//! Minimal SVG output: a log-scale line chart and a support raster.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
/// Values are clamped here before taking logs.
const FLOOR: f64 = 1e-16;
const MAX_POINTS: usize = 2000;

pub struct Series {
    pub label: String,
    /// `(x, y)` pairs; non-finite `y` are skipped.
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>
"#,
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        escape(title)
    );
}

/// Line chart with a base-10 logarithmic y axis.
pub fn log_line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    };
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut d_lo, mut d_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite() {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        let d = y.max(FLOOR).log10();
        d_lo = d_lo.min(d);
        d_hi = d_hi.max(d);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, d_lo, d_hi) = (0.0, 1.0, -1.0, 0.0);
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    let (d_lo, d_hi) = (d_lo.floor(), d_hi.ceil().max(d_lo.floor() + 1.0));
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw;
    let py = |y: f64| MARGIN_T + (d_hi - y.max(FLOOR).log10()) / (d_hi - d_lo) * ph;

    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    // decade grid, thinned to at most ~10 labels
    let decades = (d_hi - d_lo) as usize;
    let every = decades.div_ceil(10).max(1);
    for (i, d) in (d_lo as i32..=d_hi as i32).enumerate() {
        let y = MARGIN_T + (d_hi - d as f64) / (d_hi - d_lo) * ph;
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_L}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##,
            MARGIN_L + pw
        );
        if i % every == 0 {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"#,
                MARGIN_L - 6.0,
                y + 4.0
            );
        }
    }
    for k in 0..=5 {
        let x = x_lo + (x_hi - x_lo) * k as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            px(x),
            MARGIN_T + ph + 16.0,
            fmt_tick(x, x_hi - x_lo)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<&(f64, f64)> = s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        let stride = pts.len().div_ceil(MAX_POINTS).max(1);
        let mut path = String::new();
        for p in pts.iter().step_by(stride) {
            let _ = write!(path, "{:.1},{:.1} ", px(p.0), py(p.1));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            path.trim_end()
        );
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_L + pw + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_tick(x: f64, span: f64) -> String {
    if span >= 10.0 {
        format!("{}", x.round() as i64)
    } else {
        format!("{x:.3}")
    }
}

/// Frames along x, indices along y. Correct detections are black, missed
/// indices red and false detections blue.
pub fn support_raster(title: &str, n: usize, t0: usize, truth: &[Vec<usize>], estimate: &[Vec<usize>]) -> String {
    let frames = truth.len().max(1);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let cw = pw / frames as f64;
    let ch = ph / n.max(1) as f64;
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="#fafafa" stroke="#444"/>"##
    );
    for (f, (tru, est)) in truth.iter().zip(estimate).enumerate() {
        let x = MARGIN_L + f as f64 * cw;
        let mut cell = |i: usize, color: &str| {
            let y = MARGIN_T + i as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                cw.max(0.5),
                ch.max(0.5)
            );
        };
        for &i in tru {
            cell(i, if est.binary_search(&i).is_ok() { "black" } else { "#d62728" });
        }
        for &i in est.iter().filter(|i| tru.binary_search(i).is_err()) {
            cell(i, "#1f77b4");
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN_L}" y="{}">t = {t0}</text><text x="{}" y="{}" text-anchor="end">t = {}</text>"#,
        MARGIN_T + ph + 16.0,
        MARGIN_L + pw,
        MARGIN_T + ph + 16.0,
        t0 + frames - 1
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">index 0</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN_L - 6.0,
        MARGIN_T + 10.0,
        MARGIN_L - 6.0,
        MARGIN_T + ph,
        n.saturating_sub(1)
    );
    let lx = MARGIN_L + pw + 10.0;
    for (k, (label, color)) in [("detected", "black"), ("missed", "#d62728"), ("false", "#1f77b4")]
        .iter()
        .enumerate()
    {
        let ly = MARGIN_T + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{lx}" y="{ly}" width="12" height="12" fill="{color}"/><text x="{}" y="{}">{label}</text>"#,
            lx + 18.0,
            ly + 10.0
        );
    }
    out.push_str("</svg>\n");
    out
}
