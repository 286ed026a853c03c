//! Minimal static SVG chart rendering. Charts are pure views of the CSV data;
//! rendering never feeds back into any computation.

use calibrex::binned::DiagramPoints;
use calibrex::density::ReliabilityCurve;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

struct Canvas {
    body: String,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    x_log: bool,
    y_log: bool,
}

impl Canvas {
    fn new(x_range: (f64, f64), y_range: (f64, f64), x_log: bool, y_log: bool) -> Self {
        Self {
            body: String::new(),
            x_min: if x_log { x_range.0.log10() } else { x_range.0 },
            x_max: if x_log { x_range.1.log10() } else { x_range.1 },
            y_min: if y_log { y_range.0.log10() } else { y_range.0 },
            y_max: if y_log { y_range.1.log10() } else { y_range.1 },
            x_log,
            y_log,
        }
    }

    fn x_pixel(&self, x: f64) -> f64 {
        let v = if self.x_log { x.log10() } else { x };
        let t = (v - self.x_min) / (self.x_max - self.x_min);
        MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y_pixel(&self, y: f64) -> f64 {
        let v = if self.y_log { y.log10() } else { y };
        let t = (v - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - MARGIN_BOTTOM - t * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64, dashed: bool) {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.x_pixel(x), self.y_pixel(y)))
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        self.body.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash} points=\"{}\"/>\n",
            coords.join(" ")
        ));
    }

    fn polygon(&mut self, points: &[(f64, f64)], fill: &str, opacity: f64) {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.x_pixel(x), self.y_pixel(y)))
            .collect();
        self.body.push_str(&format!(
            "<polygon fill=\"{fill}\" fill-opacity=\"{opacity}\" stroke=\"none\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, color: &str) {
        self.body.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r}\" fill=\"{color}\"/>\n",
            self.x_pixel(x),
            self.y_pixel(y)
        ));
    }

    fn text(&mut self, px: f64, py: f64, content: &str, size: f64, anchor: &str) {
        self.body.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{py:.2}\" font-size=\"{size}\" font-family=\"sans-serif\" text-anchor=\"{anchor}\">{content}</text>\n"
        ));
    }

    fn x_tick(&mut self, x: f64, label: &str) {
        let px = self.x_pixel(x);
        let py = HEIGHT - MARGIN_BOTTOM;
        self.body.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{py:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
            py + 5.0
        ));
        self.text(px, py + 18.0, label, 11.0, "middle");
    }

    fn y_tick(&mut self, y: f64, label: &str) {
        let px = MARGIN_LEFT;
        let py = self.y_pixel(y);
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{px:.2}\" y2=\"{py:.2}\" stroke=\"#333\"/>\n",
            px - 5.0
        ));
        self.text(px - 8.0, py + 4.0, label, 11.0, "end");
    }

    fn finish(self, title: &str, x_label: &str, y_label: &str) -> String {
        let frame = format!(
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
            WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        );
        let title_el = format!(
            "<text x=\"{:.2}\" y=\"24\" font-size=\"14\" font-family=\"sans-serif\" text-anchor=\"middle\" font-weight=\"bold\">{title}</text>\n",
            MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0
        );
        let x_label_el = format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\">{x_label}</text>\n",
            MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
            HEIGHT - 12.0
        );
        let y_label_el = format!(
            "<text x=\"18\" y=\"{:.2}\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{y_label}</text>\n",
            MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0,
            MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0
        );
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{frame}{title_el}{x_label_el}{y_label_el}{}</svg>\n",
            self.body
        )
    }
}

fn unit_ticks(canvas: &mut Canvas) {
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        canvas.x_tick(v, &format!("{v:.1}"));
        canvas.y_tick(v, &format!("{v:.1}"));
    }
}

/// Reliability curve chart: the y = x reference, the shaded bootstrap band
/// when present, and the curve itself.
pub fn reliability_svg(curve: &ReliabilityCurve, title: &str) -> String {
    let mut canvas = Canvas::new((0.0, 1.0), (0.0, 1.0), false, false);
    unit_ticks(&mut canvas);
    canvas.polyline(&[(0.0, 0.0), (1.0, 1.0)], "#999999", 1.0, true);

    let s = curve.grid().points();
    let every = (s.len() / 400).max(1);
    if let Some(bands) = curve.bands() {
        let mut ring: Vec<(f64, f64)> = Vec::new();
        for j in (0..s.len()).step_by(every) {
            ring.push((s[j], bands.upper[j]));
        }
        for j in (0..s.len()).step_by(every).collect::<Vec<_>>().iter().rev() {
            ring.push((s[*j], bands.lower[*j]));
        }
        canvas.polygon(&ring, "#aec7e8", 0.6);
    }
    let line: Vec<(f64, f64)> = (0..s.len())
        .step_by(every)
        .map(|j| (s[j], curve.rel()[j]))
        .collect();
    canvas.polyline(&line, PALETTE[0], 1.8, false);
    canvas.finish(title, "score s", "rel(s)")
}

/// Reliability diagram chart: one point per nonempty bin against y = x.
pub fn diagram_svg(points: &DiagramPoints, title: &str) -> String {
    let mut canvas = Canvas::new((0.0, 1.0), (0.0, 1.0), false, false);
    unit_ticks(&mut canvas);
    canvas.polyline(&[(0.0, 0.0), (1.0, 1.0)], "#999999", 1.0, true);
    let mut line: Vec<(f64, f64)> = Vec::new();
    for bin in &points.bins {
        if let (Some(x), Some(y)) = (bin.mean_score, bin.event_rate) {
            canvas.circle(x, y, 3.5, PALETTE[1]);
            line.push((x, y));
        }
    }
    if line.len() > 1 {
        canvas.polyline(&line, PALETTE[1], 1.0, false);
    }
    canvas.finish(title, "mean score", "event rate")
}

/// One benchmark series: a labeled error-vs-size line.
pub struct BenchSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Log-log benchmark chart: median percentile error versus evaluation-set
/// size, one line per estimator. Lower is better.
pub fn benchmark_svg(series: &[BenchSeries], title: &str) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|v| *v > 0.0)
        .collect();
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().fold(0.0, f64::max);
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min).min(0.1) * 0.8;
    let y_max = ys.iter().cloned().fold(0.0, f64::max).max(0.2) * 1.25;
    let mut canvas = Canvas::new((x_min * 0.95, x_max * 1.05), (y_min, y_max), true, true);

    for &x in xs.iter() {
        canvas.x_tick(x, &format!("{x:.0}"));
    }
    let mut decade = 10f64.powf(y_min.log10().floor());
    while decade <= y_max {
        if decade >= y_min {
            canvas.y_tick(decade, &format!("{decade}"));
        }
        decade *= 10.0;
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        canvas.polyline(&s.points, color, 1.8, false);
        for &(x, y) in &s.points {
            canvas.circle(x, y, 2.5, color);
        }
        let ly = MARGIN_TOP + 16.0 + 16.0 * i as f64;
        canvas.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            WIDTH - MARGIN_RIGHT + 10.0,
            WIDTH - MARGIN_RIGHT + 28.0
        ));
        canvas.text(WIDTH - MARGIN_RIGHT + 33.0, ly + 4.0, &s.label, 10.0, "start");
    }
    canvas.finish(title, "evaluation set size", "median p95 error (lower is better)")
}
