//! Log-log scatter plots of simulation CSV files as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use disttomo_core::NodePartition;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Columns computed from the `partition` label.
const DERIVED: [&str; 3] = ["dimension", "n_qubits", "M"];

/// Mean and standard deviation of `y` at one `x` of one group.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

pub type Series = BTreeMap<String, Vec<Point>>;

fn derived(name: &str, partition: &NodePartition) -> Option<String> {
    match name {
        "dimension" => Some(partition.dim().to_string()),
        "n_qubits" => Some(partition.num_qubits().to_string()),
        "M" => Some(partition.num_nodes().to_string()),
        _ => None,
    }
}

/// Groups rows by `group` and `x` and summarises `y`.
pub fn collect_series(path: &Path, x: &str, y: &str, group: &str) -> Result<Series> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let partition_col = position("partition");
    for name in [x, y, group] {
        let known =
            position(name).is_some() || (DERIVED.contains(&name) && partition_col.is_some());
        if !known {
            bail!("{} has no column {name:?}", path.display());
        }
    }
    let value = |record: &csv::StringRecord, name: &str| -> Result<String> {
        if let Some(i) = position(name) {
            return Ok(record[i].to_string());
        }
        let pc = partition_col.ok_or_else(|| anyhow!("no partition column"))?;
        let partition: NodePartition = record[pc].parse()?;
        derived(name, &partition).ok_or_else(|| anyhow!("unknown column {name:?}"))
    };

    let mut cells: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        rows += 1;
        let ctx = || format!("{} row {}", path.display(), line + 1);
        let xs = value(&record, x).with_context(ctx)?;
        let ys = value(&record, y).with_context(ctx)?;
        if xs.is_empty() || ys.is_empty() {
            continue;
        }
        let xv: f64 = xs.parse().with_context(ctx)?;
        let yv: f64 = ys.parse().with_context(ctx)?;
        let g = value(&record, group).with_context(ctx)?;
        cells
            .entry(g)
            .or_default()
            .entry(xv.to_bits())
            .or_insert_with(|| (xv, Vec::new()))
            .1
            .push(yv);
    }
    if rows == 0 {
        bail!("{} has no data rows", path.display());
    }
    let mut series = Series::new();
    for (g, by_x) in cells {
        let mut points: Vec<Point> = by_x
            .into_values()
            .map(|(x, ys)| {
                let n = ys.len() as f64;
                let mean = ys.iter().sum::<f64>() / n;
                let var = if ys.len() > 1 {
                    ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                Point {
                    x,
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect();
        points.sort_by(|a, b| a.x.total_cmp(&b.x));
        series.insert(g, points);
    }
    Ok(series)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Decade range `[10^lo, 10^hi]` covering every positive value.
fn decades(values: impl Iterator<Item = f64>) -> Option<(i32, i32)> {
    let (mut min, mut max) = (f64::INFINITY, 0.0f64);
    for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
        min = min.min(v);
        max = max.max(v);
    }
    if max == 0.0 {
        return None;
    }
    let lo = min.log10().floor() as i32;
    let hi = (max.log10().ceil() as i32).max(lo + 1);
    Some((lo, hi))
}

pub fn render_svg(
    series: &Series,
    x_label: &str,
    y_label: &str,
    title: Option<&str>,
) -> Result<String> {
    let xs = decades(series.values().flatten().map(|p| p.x))
        .ok_or_else(|| anyhow!("no positive x values"))?;
    let ys = decades(
        series
            .values()
            .flatten()
            .flat_map(|p| [p.mean, p.mean + p.std, p.mean - p.std]),
    )
    .ok_or_else(|| anyhow!("no positive y values"))?;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v.log10() - xs.0 as f64) / (xs.1 - xs.0) as f64 * plot_w;
    let sy = |v: f64| TOP + plot_h - (v.log10() - ys.0 as f64) / (ys.1 - ys.0) as f64 * plot_h;
    let y_floor = 10f64.powi(ys.0);

    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#
    )?;
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )?;
    if let Some(t) = title {
        writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(t)
        )?;
    }
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )?;
    for e in xs.0..=xs.1 {
        let x = sx(10f64.powi(e));
        writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            TOP + plot_h
        )?;
        writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#,
            TOP + plot_h + 18.0
        )?;
    }
    for e in ys.0..=ys.1 {
        let y = sy(10f64.powi(e));
        writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        )?;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            LEFT - 6.0,
            y + 4.0
        )?;
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    )?;
    writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    )?;

    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        writeln!(s, r#"<g stroke="{color}" fill="{color}">"#)?;
        for p in points.iter().filter(|p| p.x > 0.0 && p.mean > 0.0) {
            let (cx, cy) = (sx(p.x), sy(p.mean));
            if p.std > 0.0 {
                let lo = sy((p.mean - p.std).max(y_floor));
                let hi = sy(p.mean + p.std);
                writeln!(
                    s,
                    r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}"/>"#
                )?;
            }
            writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4"/>"#)?;
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 16.0;
        writeln!(s, r#"<circle cx="{lx:.2}" cy="{ly:.2}" r="4"/>"#)?;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" stroke="none" fill="black">{}</text>"#,
            lx + 10.0,
            ly + 4.0,
            escape(name)
        )?;
        writeln!(s, "</g>")?;
    }
    writeln!(s, "</svg>")?;
    Ok(s)
}

pub fn plot(input: &Path, x: &str, y: &str, group: &str, title: Option<&str>) -> Result<String> {
    let series = collect_series(input, x, y, group)?;
    render_svg(&series, x, &format!("mean {y}"), title)
}
