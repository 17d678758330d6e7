//! Report emission: results/summary CSVs, the dataset manifest, and two
//! dependency-free SVG charts (800×500 canvas).

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const SVG_WIDTH: u32 = 800;
pub const SVG_HEIGHT: u32 = 500;

/// One `method,scene,slot,score` row. Slot carries the per-slot f(L[0:i])
/// values; extra per-scene metrics use reserved slot names.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub scene: u32,
    pub slot: String,
    pub score: f64,
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("method,scene,slot,score\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_field(&r.method),
            r.scene,
            csv_field(&r.slot),
            r.score
        );
    }
    out
}

pub fn parse_results_csv(text: &str) -> Vec<ResultRow> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| {
            let parts: Vec<&str> = l.split(',').collect();
            if parts.len() != 4 {
                return None;
            }
            Some(ResultRow {
                method: parts[0].to_string(),
                scene: parts[1].parse().ok()?,
                slot: parts[2].to_string(),
                score: parts[3].parse().ok()?,
            })
        })
        .collect()
}

/// Means per (method, slot) over scenes, as `method,metric,value` rows sorted
/// by method then metric.
pub fn summary_csv(rows: &[ResultRow]) -> String {
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.method.clone(), r.slot.clone())).or_insert((0.0, 0));
        e.0 += r.score;
        e.1 += 1;
    }
    let mut out = String::from("method,metric,value\n");
    for ((method, slot), (sum, n)) in acc {
        let _ = writeln!(
            out,
            "{},mean_{},{}",
            csv_field(&method),
            csv_field(&slot),
            sum / n as f64
        );
    }
    out
}

pub fn sha256_hex(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// One line per scene: `scene_index seed file_path sha256`.
pub fn manifest_line(scene_index: u32, seed: u64, path: &str, contents: &[u8]) -> String {
    format!("{scene_index} {seed} {path} {}\n", sha256_hex(contents))
}

// ---------------------------------------------------------------------------
// SVG charts
// ---------------------------------------------------------------------------

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" \
         viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n\
         <rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        SVG_WIDTH / 2
    )
}

fn axes(max_y: f64, x_label: &str) -> String {
    let x0 = MARGIN_L;
    let x1 = SVG_WIDTH as f64 - MARGIN_R;
    let y0 = SVG_HEIGHT as f64 - MARGIN_B;
    let y1 = MARGIN_T;
    let mut s = format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for t in 0..=4 {
        let v = max_y * t as f64 / 4.0;
        let y = y0 - (y0 - y1) * t as f64 / 4.0;
        let _ = write!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{v:.2}</text>\n\
             <line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = write!(
        s,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{x_label}</text>\n",
        (x0 + x1) / 2.0,
        y0 + 40.0
    );
    s
}

/// Line chart of mean slot score per method: series keyed by method, x = slot
/// index (1-based), y = mean score.
pub fn slot_line_chart(series: &BTreeMap<String, Vec<f64>>) -> String {
    let max_y = series
        .values()
        .flatten()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let max_x = series.values().map(Vec::len).max().unwrap_or(1).max(2);
    let x0 = MARGIN_L;
    let x1 = SVG_WIDTH as f64 - MARGIN_R;
    let y0 = SVG_HEIGHT as f64 - MARGIN_B;
    let y1 = MARGIN_T;
    let px = |slot: usize| x0 + (x1 - x0) * (slot as f64) / (max_x as f64 - 1.0);
    let py = |v: f64| y0 - (y0 - y1) * v / max_y;

    let mut svg = svg_header("Mean slot scores per method");
    svg.push_str(&axes(max_y, "slot"));
    for (i, (method, values)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{:.2},{:.2}", px(k), py(*v)))
            .collect();
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        );
        for (k, v) in values.iter().enumerate() {
            let _ = write!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                px(k),
                py(*v)
            );
        }
        let ly = MARGIN_T + 20.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{:.0}\" y=\"{:.0}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n\
             <text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"12\">{method}</text>\n",
            x1 + 12.0,
            ly,
            x1 + 30.0,
            ly + 11.0
        );
    }
    for k in 0..max_x {
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            px(k),
            y0 + 18.0,
            k + 1
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bar chart of one value per method.
pub fn abo_bar_chart(values: &BTreeMap<String, f64>) -> String {
    let max_y = values.values().cloned().fold(0.0f64, f64::max).max(1e-9);
    let x0 = MARGIN_L;
    let x1 = SVG_WIDTH as f64 - MARGIN_R;
    let y0 = SVG_HEIGHT as f64 - MARGIN_B;
    let y1 = MARGIN_T;
    let n = values.len().max(1);
    let band = (x1 - x0) / n as f64;
    let mut svg = svg_header("Average best overlap per method");
    svg.push_str(&axes(max_y, "method"));
    for (i, (method, v)) in values.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let h = (y0 - y1) * v / max_y;
        let bx = x0 + band * i as f64 + band * 0.2;
        let _ = write!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{method}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{v:.3}</text>\n",
            bx,
            y0 - h,
            band * 0.6,
            h,
            bx + band * 0.3,
            y0 + 18.0,
            bx + band * 0.3,
            y0 - h - 6.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
