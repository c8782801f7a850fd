//! Static SVG renderings of the result CSVs. Charts are write-only
//! conveniences: nothing downstream reads them, and all analysis consumes
//! the CSVs. Output is a pure function of the input text.

/// Split one CSV line, honoring double-quoted fields.
fn split_csv(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 55.0;
const SANSKRIT_COLOR: &str = "#4269d0";
const PERSO_COLOR: &str = "#e4572e";

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Svg {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        self.body.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\" fill-opacity=\"{opacity}\"/>\n"
        ));
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        self.body.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"1\"/>\n"
        ));
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
    }

    fn polygon(&mut self, points: &[(f64, f64)], fill: &str, opacity: f64) {
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        self.body.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{fill}\" fill-opacity=\"{opacity}\"/>\n",
            pts.join(" ")
        ));
    }

    fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let escaped = content
            .replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;");
        self.body.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" font-family=\"sans-serif\" fill=\"#333\">{escaped}</text>\n"
        ));
    }

    fn finish(self, title: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<title>{title}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn axes(svg: &mut Svg, y_min: f64, y_max: f64, y_label: &str) {
    svg.line(
        MARGIN,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN,
        "#888",
    );
    svg.line(MARGIN, MARGIN, MARGIN, HEIGHT - MARGIN, "#888");
    svg.text(8.0, MARGIN - 8.0, 11.0, y_label);
    for i in 0..=4 {
        let v = y_min + (y_max - y_min) * i as f64 / 4.0;
        let y = HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * i as f64 / 4.0;
        svg.line(MARGIN - 3.0, y, MARGIN, y, "#888");
        svg.text(10.0, y + 3.0, 10.0, &format!("{v:.2}"));
    }
}

/// Ranked misclassification bars, colored by origin.
fn misclass_chart(rows: &[Vec<String>]) -> String {
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let counts: Vec<(f64, bool)> = rows
        .iter()
        .filter_map(|r| {
            let errs: f64 = r.get(4)?.parse().ok()?;
            Some((errs, r.get(1).map(|o| o == "SANSKRIT").unwrap_or(false)))
        })
        .collect();
    let max = counts.iter().map(|&(e, _)| e).fold(1.0, f64::max);
    axes(&mut svg, 0.0, max, "cumulative misclassifications");
    let span = WIDTH - 2.0 * MARGIN;
    let bar_w = (span / counts.len().max(1) as f64).min(20.0);
    for (i, &(errs, sanskrit)) in counts.iter().enumerate() {
        let h = (HEIGHT - 2.0 * MARGIN) * errs / max;
        let x = MARGIN + i as f64 * span / counts.len() as f64;
        let color = if sanskrit {
            SANSKRIT_COLOR
        } else {
            PERSO_COLOR
        };
        svg.rect(x, HEIGHT - MARGIN - h, bar_w.max(1.0), h, color, 0.9);
    }
    svg.text(
        WIDTH - 290.0,
        24.0,
        11.0,
        "blue = SANSKRIT, orange = PERSO_ARABIC; ranked by errors",
    );
    svg.finish("cumulative misclassifications by word")
}

/// A mean line with a ±std band over an ordered grid.
fn band_chart(rows: &[Vec<String>], x_label: &str) -> String {
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let parsed: Vec<(String, f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            Some((
                r.first()?.clone(),
                r.get(1)?.parse().ok()?,
                r.get(2)?.parse().ok()?,
            ))
        })
        .collect();
    axes(&mut svg, 0.0, 1.0, "accuracy");
    let span = WIDTH - 2.0 * MARGIN;
    let n = parsed.len().max(2) as f64;
    let x_of = |i: usize| MARGIN + span * i as f64 / (n - 1.0);
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v.clamp(0.0, 1.0);
    let mut upper: Vec<(f64, f64)> = Vec::new();
    let mut lower: Vec<(f64, f64)> = Vec::new();
    let mut mean: Vec<(f64, f64)> = Vec::new();
    for (i, (_, m, s)) in parsed.iter().enumerate() {
        upper.push((x_of(i), y_of(m + s)));
        lower.push((x_of(i), y_of(m - s)));
        mean.push((x_of(i), y_of(*m)));
    }
    lower.reverse();
    upper.extend(lower);
    if parsed.len() > 1 {
        svg.polygon(&upper, SANSKRIT_COLOR, 0.18);
    }
    svg.polyline(&mean, SANSKRIT_COLOR);
    for (i, (label, m, _)) in parsed.iter().enumerate() {
        if parsed.len() <= 20 || i % (parsed.len() / 20 + 1) == 0 {
            svg.text(x_of(i) - 6.0, HEIGHT - MARGIN + 14.0, 9.0, label);
        }
        if parsed.len() <= 20 {
            svg.rect(x_of(i) - 1.5, y_of(*m) - 1.5, 3.0, 3.0, SANSKRIT_COLOR, 1.0);
        }
    }
    svg.text(WIDTH / 2.0 - 30.0, HEIGHT - 12.0, 11.0, x_label);
    svg.finish("mean accuracy with std band")
}

/// Per-iteration accuracy trace, downsampled to at most 1000 points.
fn accuracy_chart(rows: &[Vec<String>]) -> String {
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let values: Vec<f64> = rows.iter().filter_map(|r| r.get(1)?.parse().ok()).collect();
    axes(&mut svg, 0.0, 1.0, "accuracy");
    let step = (values.len() / 1000).max(1);
    let sampled: Vec<f64> = values.iter().step_by(step).copied().collect();
    let span = WIDTH - 2.0 * MARGIN;
    let pts: Vec<(f64, f64)> = sampled
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            (
                MARGIN + span * i as f64 / (sampled.len().max(2) - 1) as f64,
                HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v.clamp(0.0, 1.0),
            )
        })
        .collect();
    svg.polyline(&pts, PERSO_COLOR);
    svg.text(WIDTH / 2.0 - 30.0, HEIGHT - 12.0, 11.0, "iteration");
    svg.finish("per-iteration accuracy")
}

/// Correlation heatmaps, one grid per (panel, frequency transform).
type PanelCells = Vec<(String, String, f64)>;

fn correlation_chart(rows: &[Vec<String>]) -> String {
    let mut panels: Vec<(String, PanelCells)> = Vec::new();
    for r in rows {
        if r.len() < 5 {
            continue;
        }
        let key = format!("{} / {}", r[0], r[1]);
        let entry = match panels.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e,
            None => {
                panels.push((key.clone(), Vec::new()));
                panels.last_mut().unwrap()
            }
        };
        if let Ok(v) = r[4].parse::<f64>() {
            entry.1.push((r[2].clone(), r[3].clone(), v));
        }
    }
    let cell = 42.0;
    let grid_h = 4.0 * cell + 90.0;
    let height = panels.len() as f64 * grid_h + 40.0;
    let mut svg = Svg::new(WIDTH, height.max(200.0));
    for (p, (key, cells)) in panels.iter().enumerate() {
        let oy = 40.0 + p as f64 * grid_h;
        svg.text(MARGIN, oy - 8.0, 12.0, key);
        let mut vars: Vec<String> = Vec::new();
        for (a, b, _) in cells {
            if !vars.contains(a) {
                vars.push(a.clone());
            }
            if !vars.contains(b) {
                vars.push(b.clone());
            }
        }
        for (a, b, v) in cells {
            let i = vars.iter().position(|x| x == a).unwrap();
            let j = vars.iter().position(|x| x == b).unwrap();
            // Red for positive, blue for negative correlation.
            let (r, g, bl) = if *v >= 0.0 {
                (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
            } else {
                (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
            };
            let fill = format!("rgb({:.0},{:.0},{:.0})", r, g, bl);
            svg.rect(
                MARGIN + 160.0 + j as f64 * cell,
                oy + i as f64 * cell,
                cell - 2.0,
                cell - 2.0,
                &fill,
                1.0,
            );
            svg.text(
                MARGIN + 160.0 + j as f64 * cell + 4.0,
                oy + i as f64 * cell + cell / 2.0,
                9.0,
                &format!("{v:.2}"),
            );
        }
        for (i, v) in vars.iter().enumerate() {
            svg.text(MARGIN, oy + i as f64 * cell + cell / 2.0, 10.0, v);
        }
    }
    svg.finish("error-correlate Pearson matrices")
}

/// Observed vs expected-random top-k overlap.
fn overlap_chart(rows: &[Vec<String>]) -> String {
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let parsed: Vec<(String, f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            Some((
                r.first()?.clone(),
                r.get(1)?.parse().ok()?,
                r.get(2)?.parse().ok()?,
            ))
        })
        .collect();
    axes(&mut svg, 0.0, 1.0, "jaccard");
    let span = WIDTH - 2.0 * MARGIN;
    let n = parsed.len().max(2) as f64;
    let x_of = |i: usize| MARGIN + span * i as f64 / (n - 1.0);
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v.clamp(0.0, 1.0);
    let observed: Vec<(f64, f64)> = parsed
        .iter()
        .enumerate()
        .map(|(i, (_, j, _))| (x_of(i), y_of(*j)))
        .collect();
    let expected: Vec<(f64, f64)> = parsed
        .iter()
        .enumerate()
        .map(|(i, (_, _, e))| (x_of(i), y_of(*e)))
        .collect();
    svg.polyline(&observed, PERSO_COLOR);
    svg.polyline(&expected, "#999");
    for (i, (k, _, _)) in parsed.iter().enumerate() {
        svg.text(x_of(i) - 4.0, HEIGHT - MARGIN + 14.0, 10.0, k);
    }
    svg.text(
        WIDTH - 330.0,
        24.0,
        11.0,
        "orange = observed, grey = random-subset expectation",
    );
    svg.text(WIDTH / 2.0 - 10.0, HEIGHT - 12.0, 11.0, "k");
    svg.finish("top-k misclassified overlap across corpora")
}

/// SHAP dimension importances as ranked bars with min/max whiskers.
fn shap_chart(rows: &[Vec<String>]) -> String {
    let mut svg = Svg::new(WIDTH, HEIGHT);
    let mut parsed: Vec<(usize, f64, f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            Some((
                r.first()?.parse().ok()?,
                r.get(1)?.parse().ok()?,
                r.get(2)?.parse().ok()?,
                r.get(3)?.parse().ok()?,
            ))
        })
        .collect();
    parsed.sort_by(|a, b| b.1.total_cmp(&a.1));
    parsed.truncate(30);
    let hi = parsed
        .iter()
        .map(|&(_, _, _, max)| max)
        .fold(0.02_f64, f64::max);
    let lo = parsed
        .iter()
        .map(|&(_, _, min, _)| min)
        .fold(-0.02_f64, f64::min);
    axes(&mut svg, lo, hi, "phi");
    let span = WIDTH - 2.0 * MARGIN;
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);
    let zero = y_of(0.0);
    svg.line(MARGIN, zero, WIDTH - MARGIN, zero, "#bbb");
    for (i, &(dim, mean_abs, min, max)) in parsed.iter().enumerate() {
        let x = MARGIN + span * (i as f64 + 0.5) / parsed.len() as f64;
        svg.line(x, y_of(min), x, y_of(max), "#888");
        svg.rect(
            x - 5.0,
            y_of(mean_abs).min(zero),
            10.0,
            (zero - y_of(mean_abs)).abs().max(1.0),
            SANSKRIT_COLOR,
            0.85,
        );
        svg.text(x - 8.0, HEIGHT - MARGIN + 14.0, 9.0, &format!("{dim}"));
    }
    svg.text(
        WIDTH - 400.0,
        24.0,
        11.0,
        "bars = mean |phi| (top 30 dims), whiskers = signed min..max",
    );
    svg.finish("per-dimension SHAP importance")
}

fn empty_chart(name: &str) -> String {
    let mut svg = Svg::new(WIDTH, 120.0);
    svg.text(MARGIN, 60.0, 12.0, &format!("{name}: no data rows"));
    svg.finish(name)
}

/// Render a known result CSV to SVG; `None` for unknown files. A known file
/// with no data rows still renders (a placeholder), so every result CSV maps
/// to exactly one SVG.
pub fn render(file_name: &str, csv: &str) -> Option<String> {
    let name_check = file_name.strip_suffix(".csv")?;
    let known = matches!(
        name_check,
        "misclass"
            | "misclass_excluded"
            | "accuracy"
            | "accuracy_excluded"
            | "correlation"
            | "overlap"
            | "shap_summary"
    ) || name_check.starts_with("sweep_")
        || name_check.starts_with("ablation_");
    if !known {
        return None;
    }
    let mut lines = csv.lines();
    let _header = lines.next()?;
    let rows: Vec<Vec<String>> = lines.map(split_csv).collect();
    if rows.is_empty() {
        return Some(empty_chart(name_check));
    }
    let name = name_check;
    match name {
        "misclass" | "misclass_excluded" => Some(misclass_chart(&rows)),
        "accuracy" | "accuracy_excluded" => Some(accuracy_chart(&rows)),
        "correlation" => Some(correlation_chart(&rows)),
        "overlap" => Some(overlap_chart(&rows)),
        "shap_summary" => Some(shap_chart(&rows)),
        _ if name.starts_with("sweep_") => {
            Some(band_chart(&rows, name.strip_prefix("sweep_").unwrap()))
        }
        _ if name.starts_with("ablation_") => Some(band_chart(&rows, "n_dims")),
        _ => None,
    }
}
