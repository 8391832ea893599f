//! Report directory writer. Every file is a pure function of the
//! `SearchReport`, so identical reports give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fairness::Metric;
use crate::frontier::{FeatureConfig, TradeoffPoint};
use crate::search::SearchReport;

pub const REPORT_FILES: [&str; 7] = [
    "report.json",
    "disparities.csv",
    "accuracy.csv",
    "deltas.csv",
    "tradeoff.csv",
    "tradeoff.svg",
    "heatmap.svg",
];

/// Write every report file into `dir`, creating it if needed.
pub fn write_report(report: &SearchReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let contents = [
        report_json(report)?,
        disparities_csv(report)?,
        accuracy_csv(report)?,
        deltas_csv(report)?,
        tradeoff_csv(report)?,
        tradeoff_svg(report),
        heatmap_svg(report),
    ];
    REPORT_FILES
        .iter()
        .zip(contents)
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

pub fn report_json(report: &SearchReport) -> Result<String> {
    let mut v = serde_json::to_value(report)?;
    v["undefined_flags"] = serde_json::to_value(report.undefined_flags())?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One line per candidate, comparison group and metric. Values are unrounded
/// percentage points; the bin is assigned from the rounded value.
pub fn disparities_csv(report: &SearchReport) -> Result<String> {
    let mut rows = Vec::new();
    for c in &report.candidates {
        for row in &c.disparities {
            for cell in &row.cells {
                let raw = row.row.get(cell.metric);
                rows.push(vec![
                    c.family.tag().to_string(),
                    c.feature_config.tag().to_string(),
                    row.row.comparison_group.name().to_string(),
                    cell.metric.tag().to_string(),
                    opt(raw),
                    raw.is_some().to_string(),
                    cell.bin.name().to_string(),
                ]);
            }
        }
    }
    csv_string(
        &[
            "family",
            "feature_config",
            "group",
            "metric",
            "value",
            "defined",
            "bin",
        ],
        rows,
    )
}

pub fn accuracy_csv(report: &SearchReport) -> Result<String> {
    let rows = report
        .candidates
        .iter()
        .flat_map(|c| {
            c.accuracies.iter().enumerate().map(move |(r, a)| {
                vec![
                    c.family.tag().to_string(),
                    c.feature_config.tag().to_string(),
                    r.to_string(),
                    num(*a),
                ]
            })
        })
        .collect();
    csv_string(&["family", "feature_config", "resample", "accuracy"], rows)
}

pub fn deltas_csv(report: &SearchReport) -> Result<String> {
    let rows = report
        .deltas
        .iter()
        .flat_map(|d| {
            d.pairs.iter().map(move |p| {
                vec![
                    d.family.tag().to_string(),
                    p.resample.to_string(),
                    p.split_fingerprint.clone(),
                    num(p.aware_accuracy),
                    num(p.blind_accuracy),
                    num(p.delta),
                ]
            })
        })
        .collect();
    csv_string(
        &[
            "family",
            "resample",
            "split_fingerprint",
            "aware_accuracy",
            "blind_accuracy",
            "delta",
        ],
        rows,
    )
}

pub fn tradeoff_csv(report: &SearchReport) -> Result<String> {
    let on_frontier = |id: &str| report.frontier.frontier.iter().any(|p| p.candidate == id);
    let rows = report
        .candidates
        .iter()
        .map(|c| {
            let p = &c.tradeoff;
            vec![
                p.candidate.clone(),
                p.family.tag().to_string(),
                p.feature_config.tag().to_string(),
                num(p.expected_value_millions),
                opt(p.black_denial_pct),
                num(p.median_accuracy),
                on_frontier(&p.candidate).to_string(),
            ]
        })
        .collect();
    csv_string(
        &[
            "candidate",
            "family",
            "feature_config",
            "expected_value_millions",
            "black_denial_pct",
            "median_accuracy",
            "frontier",
        ],
        rows,
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// `[lo, hi]` widened so that a single value still gets a visible range.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(hi.abs().max(1.0) * 0.02);
    (lo - pad, hi + pad)
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Scatter of expected value against simulated Black denial percentage.
/// Race-aware candidates are filled circles, race-blind ones hollow squares;
/// the frontier is a polyline in ascending denial order.
pub fn tradeoff_svg(report: &SearchReport) -> String {
    let points: Vec<&TradeoffPoint> = report
        .candidates
        .iter()
        .map(|c| &c.tradeoff)
        .filter(|p| p.black_denial_pct.is_some())
        .collect();
    let (x0, x1) = padded_range(points.iter().map(|p| p.black_denial_pct.unwrap()));
    let (y0, y1) = padded_range(points.iter().map(|p| p.expected_value_millions));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#999"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.1}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#999"/><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Simulated Black denial rate (%)</text>"#,
        LEFT + pw / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">Expected value (millions)</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let frontier: Vec<String> = report
        .frontier
        .frontier
        .iter()
        .map(|p| {
            format!(
                "{:.2},{:.2}",
                sx(p.black_denial_pct.unwrap()),
                sy(p.expected_value_millions)
            )
        })
        .collect();
    if !frontier.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#d64545" stroke-width="1.5" stroke-dasharray="5 3"/>"##,
            frontier.join(" ")
        );
    }
    for p in &points {
        let (px, py) = (
            sx(p.black_denial_pct.unwrap()),
            sy(p.expected_value_millions),
        );
        let id = escape(&p.candidate);
        match p.feature_config {
            FeatureConfig::RaceAware => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{px:.2}" cy="{py:.2}" r="5" fill="#1f5fa8"><title>{id}</title></circle>"##
                );
            }
            FeatureConfig::RaceBlind => {
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.2}" y="{:.2}" width="9" height="9" fill="white" stroke="#e07b00" stroke-width="2"><title>{id}</title></rect>"##,
                    px - 4.5,
                    py - 4.5
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{id}</text>"#,
            px + 7.0,
            py - 6.0
        );
    }
    let lx = W - RIGHT + 15.0;
    let _ = writeln!(
        s,
        r##"<circle cx="{lx}" cy="{TOP}" r="5" fill="#1f5fa8"/><text x="{}" y="{}">race-aware</text>"##,
        lx + 10.0,
        TOP + 4.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="9" height="9" fill="white" stroke="#e07b00" stroke-width="2"/><text x="{}" y="{}">race-blind</text>"##,
        lx - 4.5,
        TOP + 15.5,
        lx + 10.0,
        TOP + 24.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#d64545" stroke-width="1.5" stroke-dasharray="5 3"/><text x="{}" y="{}">frontier</text>"##,
        lx - 5.0,
        TOP + 40.0,
        lx + 5.0,
        TOP + 40.0,
        lx + 10.0,
        TOP + 44.0
    );
    s.push_str("</svg>\n");
    s
}

/// Disparity table: one row per candidate and comparison group, one column
/// per metric, cells colored by bin and labelled with the rounded value.
pub fn heatmap_svg(report: &SearchReport) -> String {
    let rows: Vec<(String, &crate::fairness::TableRow)> = report
        .candidates
        .iter()
        .flat_map(|c| {
            c.disparities
                .iter()
                .map(move |r| (format!("{} vs {}", c.id, r.row.comparison_group), r))
        })
        .collect();
    let (label_w, cell_w, cell_h, top) = (200.0, 70.0, 24.0, 40.0);
    let width = label_w + cell_w * Metric::ALL.len() as f64 + 20.0;
    let height = top + cell_h * rows.len() as f64 + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    for (j, m) in Metric::ALL.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{}</text>"#,
            label_w + cell_w * (j as f64 + 0.5),
            top - 10.0,
            m.tag()
        );
    }
    for (i, (label, row)) in rows.iter().enumerate() {
        let y = top + cell_h * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            label_w - 8.0,
            y + cell_h / 2.0 + 4.0,
            escape(label)
        );
        for (j, cell) in row.cells.iter().enumerate() {
            let x = label_w + cell_w * j as f64;
            let text = cell.value.map_or("n/a".to_string(), |v| format!("{v:.0}"));
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cell_w}" height="{cell_h}" fill="{}" stroke="white"/><text x="{:.1}" y="{:.1}" text-anchor="middle">{text}</text>"#,
                cell.bin.fill(),
                x + cell_w / 2.0,
                y + cell_h / 2.0 + 4.0
            );
        }
    }
    let edges = report.manifest.config.sim.bins.edges;
    let legend = [
        (
            crate::fairness::HeatBin::DeepGreen,
            format!("&lt;{}", edges[0]),
        ),
        (
            crate::fairness::HeatBin::LightGreen,
            format!("{}-{}", edges[0], edges[1]),
        ),
        (
            crate::fairness::HeatBin::Yellow,
            format!("{}-{}", edges[1], edges[2]),
        ),
        (
            crate::fairness::HeatBin::Orange,
            format!("{}-{}", edges[2], edges[3]),
        ),
        (
            crate::fairness::HeatBin::Red,
            format!("&#8805;{}", edges[3]),
        ),
        (crate::fairness::HeatBin::Undefined, "undefined".to_string()),
    ];
    let ly = top + cell_h * rows.len() as f64 + 25.0;
    for (k, (bin, text)) in legend.iter().enumerate() {
        let x = 20.0 + 105.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{ly:.1}" width="14" height="14" fill="{}"/><text x="{:.1}" y="{:.1}">{text}</text>"#,
            bin.fill(),
            x + 18.0,
            ly + 11.0
        );
    }
    s.push_str("</svg>\n");
    s
}
