//! SVG charts for result tables and path visualizations.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use svg::node::element::{Group, Line, Polyline, Rectangle, Text, Title};
use svg::Document;

use crate::runner::median;

pub const BAR_METRICS: &[&str] = &["sw2", "mode_weight_abs_err", "weight_hist_tv"];

/// A CSV file held as strings.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let headers = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn has(&self, col: &str) -> bool {
        self.headers.iter().any(|h| h == col)
    }

    fn require(&self, cols: &[&str]) -> Result<Vec<usize>> {
        let missing: Vec<&str> = cols.iter().copied().filter(|c| !self.has(c)).collect();
        if !missing.is_empty() {
            bail!("missing columns: {}", missing.join(", "));
        }
        Ok(cols.iter().map(|c| self.headers.iter().position(|h| h == c).unwrap()).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Results,
    Densities,
    Mass,
}

pub fn detect(table: &Table) -> Result<TableKind> {
    if table.has("density") {
        Ok(TableKind::Densities)
    } else if table.has("strong_mass") {
        Ok(TableKind::Mass)
    } else if BAR_METRICS.iter().any(|m| table.has(m)) {
        Ok(TableKind::Results)
    } else {
        Err(anyhow!("missing columns: expected a metric column ({}), `density` or `strong_mass`", BAR_METRICS.join(", ")))
    }
}

/// Plots every chart a CSV supports into `out_dir`; returns the files written.
pub fn plot_csv(csv_path: &Path, out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let table = Table::read(csv_path)?;
    fs::create_dir_all(out_dir)?;
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let mut written = Vec::new();
    match detect(&table)? {
        TableKind::Results => {
            for m in BAR_METRICS.iter().filter(|m| table.has(m)) {
                let p = out_dir.join(format!("{stem}_{m}.svg"));
                svg::save(&p, &bar_chart(&table, m)?)?;
                written.push(p);
            }
        }
        TableKind::Densities => {
            let p = out_dir.join(format!("{stem}.svg"));
            svg::save(&p, &heatmap(&table)?)?;
            written.push(p);
        }
        TableKind::Mass => {
            let p = out_dir.join(format!("{stem}.svg"));
            svg::save(&p, &mass_lines(&table)?)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Plots one chart of a CSV (`metric` picks the bar metric) into `svg_path`.
pub fn plot_csv_to(csv_path: &Path, svg_path: &Path, metric: &str) -> Result<()> {
    let table = Table::read(csv_path)?;
    let doc = match detect(&table)? {
        TableKind::Results => bar_chart(&table, metric)?,
        TableKind::Densities => heatmap(&table)?,
        TableKind::Mass => mass_lines(&table)?,
    };
    svg::save(svg_path, &doc)?;
    Ok(())
}

type Rgb = (f64, f64, f64);

fn transition_color(sampler: &str, transition: &str) -> Rgb {
    if sampler == "exact" {
        return (0.55, 0.55, 0.55);
    }
    match transition {
        "none" => (0.85, 0.15, 0.15),
        "stoch1" => (0.15, 0.35, 0.85),
        "stoch2" => (0.10, 0.65, 0.25),
        "det_hessian" => (0.90, 0.35, 0.70),
        "det_hutchinson" => (0.90, 0.75, 0.10),
        _ => (0.40, 0.40, 0.40),
    }
}

/// Lighter for the smallest K, darker for the largest.
pub fn shade(base: Rgb, rank: usize, n: usize) -> Rgb {
    let t = if n <= 1 { 1.0 } else { rank as f64 / (n - 1) as f64 };
    let tint = 0.65 * (1.0 - t);
    let dark = 1.0 - 0.35 * t;
    let mix = |c: f64| (c + (1.0 - c) * tint) * dark;
    (mix(base.0), mix(base.1), mix(base.2))
}

fn hex(c: Rgb) -> String {
    let b = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", b(c.0), b(c.1), b(c.2))
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 100.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Smallest 1, 2, 2.5 or 5 times a power of ten that is at least `v`.
fn nice_ceil(v: f64) -> f64 {
    let p = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * p).find(|c| *c >= v).unwrap_or(10.0 * p)
}

fn text(x: f64, y: f64, s: impl Into<String>, anchor: &str, size: f64) -> Text {
    Text::new(s)
        .set("x", x)
        .set("y", y)
        .set("text-anchor", anchor)
        .set("font-size", size)
        .set("font-family", "sans-serif")
}

fn line(x1: f64, y1: f64, x2: f64, y2: f64) -> Line {
    Line::new().set("x1", x1).set("y1", y1).set("x2", x2).set("y2", y2).set("stroke", "black").set("stroke-width", 1)
}

/// Left/bottom axes with y ticks over `[0, ymax]`.
fn axes(x0: f64, y0: f64, w: f64, h: f64, ymax: f64, ylabel: &str) -> Group {
    let mut g = Group::new().set("class", "axes");
    g = g.add(line(x0, y0, x0, y0 + h)).add(line(x0, y0 + h, x0 + w, y0 + h));
    for i in 0..=4 {
        let v = ymax * i as f64 / 4.0;
        let y = y0 + h - h * i as f64 / 4.0;
        g = g.add(line(x0 - 4.0, y, x0, y)).add(text(x0 - 6.0, y + 4.0, fmt_tick(v), "end", 10.0));
    }
    g.add(
        text(0.0, 0.0, ylabel, "middle", 11.0)
            .set("transform", format!("translate({}, {}) rotate(-90)", x0 - 46.0, y0 + h / 2.0)),
    )
}

fn push_unique<T: PartialEq + Clone>(v: &mut Vec<T>, x: &T) {
    if !v.contains(x) {
        v.push(x.clone());
    }
}

/// Grouped bars per target panel: one group per (sampler, path, transition), one bar per K.
pub fn bar_chart(table: &Table, metric: &str) -> Result<Document> {
    let idx = table.require(&["target", "sampler", "path", "transition", "k", metric])?;
    let cell = |r: &Vec<String>, i: usize| r[idx[i]].clone();
    let mut targets: Vec<String> = Vec::new();
    for r in &table.rows {
        push_unique(&mut targets, &cell(r, 0));
    }
    if targets.is_empty() {
        targets.push(String::new());
    }
    const PANEL_H: f64 = 220.0;
    const TOP: f64 = 40.0;
    const LEFT: f64 = 70.0;
    const BAR_W: f64 = 12.0;
    const GAP: f64 = 24.0;
    let mut panels = Vec::new();
    let mut width: f64 = 320.0;
    for t in &targets {
        let rows: Vec<&Vec<String>> = table.rows.iter().filter(|r| &cell(r, 0) == t).collect();
        let mut groups: Vec<(String, String, String)> = Vec::new();
        let mut ks: Vec<usize> = Vec::new();
        for r in &rows {
            push_unique(&mut groups, &(cell(r, 1), cell(r, 2), cell(r, 3)));
            let k: usize = cell(r, 4).parse().with_context(|| format!("bad k `{}`", cell(r, 4)))?;
            push_unique(&mut ks, &k);
        }
        ks.sort_unstable();
        let mut bars = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            let gks: Vec<usize> = ks
                .iter()
                .copied()
                .filter(|k| rows.iter().any(|r| (cell(r, 1), cell(r, 2), cell(r, 3)) == *g && cell(r, 4) == k.to_string()))
                .collect();
            for (rank, &k) in gks.iter().enumerate() {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| (cell(r, 1), cell(r, 2), cell(r, 3)) == *g && cell(r, 4) == k.to_string())
                    .filter_map(|r| cell(r, 5).parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .collect();
                let v = median(vals);
                if v.is_finite() {
                    bars.push((gi, rank, gks.len(), k, v));
                }
            }
        }
        let n_slots = groups.len().max(1) * ks.len().max(1);
        let plot_w = (n_slots as f64 * BAR_W + groups.len().max(1) as f64 * GAP).max(240.0);
        width = width.max(LEFT + plot_w + 30.0);
        panels.push((t.clone(), groups, ks.len().max(1), bars, plot_w));
    }
    let height = TOP + targets.len() as f64 * (PANEL_H + 90.0);
    let mut doc = Document::new()
        .set("viewBox", (0, 0, width, height))
        .set("width", width)
        .set("height", height)
        .add(Title::new(metric));
    for (pi, (t, groups, nk, bars, plot_w)) in panels.into_iter().enumerate() {
        let y0 = TOP + pi as f64 * (PANEL_H + 90.0);
        let ymax = bars.iter().map(|b| b.4).fold(0.0f64, f64::max);
        let ymax = if ymax > 0.0 { nice_ceil(ymax * 1.05) } else { 1.0 };
        let mut panel = Group::new().set("class", "panel").set("data-target", t.as_str());
        panel = panel.add(text(LEFT, y0 - 10.0, if t.is_empty() { "(no rows)".to_string() } else { t }, "start", 12.0));
        panel = panel.add(axes(LEFT, y0, plot_w, PANEL_H, ymax, metric));
        let group_w = nk as f64 * BAR_W + GAP;
        for (gi, (s, p, tr)) in groups.iter().enumerate() {
            let gx = LEFT + GAP / 2.0 + gi as f64 * group_w;
            let label = format!("{s}/{p}/{tr}");
            panel = panel.add(
                text(0.0, 0.0, label, "end", 9.0)
                    .set("transform", format!("translate({}, {}) rotate(-35)", gx + nk as f64 * BAR_W / 2.0, y0 + PANEL_H + 14.0)),
            );
        }
        for (gi, rank, n, k, v) in bars {
            let (s, _, tr) = &groups[gi];
            let h = PANEL_H * v / ymax;
            let x = LEFT + GAP / 2.0 + gi as f64 * group_w + rank as f64 * BAR_W;
            let rect = Rectangle::new()
                .set("class", "bar")
                .set("data-k", k)
                .set("data-value", v)
                .set("x", x)
                .set("y", y0 + PANEL_H - h)
                .set("width", BAR_W - 1.0)
                .set("height", h)
                .set("fill", hex(shade(transition_color(s, tr), rank, n)))
                .add(Title::new(format!("K={k}: {v}")));
            panel = panel.add(rect);
        }
        doc = doc.add(panel);
    }
    Ok(doc)
}

fn ramp(t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    (1.0 - 0.95 * t, 1.0 - 0.75 * t, 1.0 - 0.35 * t)
}

/// Level-by-x density image, one panel per path; each level row is scaled to its own maximum.
pub fn heatmap(table: &Table) -> Result<Document> {
    let idx = table.require(&["path", "level", "x", "density"])?;
    let mut paths: Vec<String> = Vec::new();
    for r in &table.rows {
        push_unique(&mut paths, &r[idx[0]]);
    }
    const W: f64 = 480.0;
    const H: f64 = 260.0;
    const LEFT: f64 = 70.0;
    const TOP: f64 = 40.0;
    const MAX_BINS: usize = 160;
    let height = TOP + paths.len().max(1) as f64 * (H + 70.0);
    let mut doc = Document::new()
        .set("viewBox", (0, 0, LEFT + W + 30.0, height))
        .set("width", LEFT + W + 30.0)
        .set("height", height)
        .add(Title::new("density"));
    for (pi, p) in paths.iter().enumerate() {
        let y0 = TOP + pi as f64 * (H + 70.0);
        let mut pts: Vec<(usize, f64, f64)> = Vec::new();
        for r in table.rows.iter().filter(|r| &r[idx[0]] == p) {
            pts.push((r[idx[1]].parse()?, r[idx[2]].parse()?, r[idx[3]].parse()?));
        }
        let n_levels = pts.iter().map(|q| q.0).max().unwrap_or(0) + 1;
        let xmin = pts.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
        let xmax = pts.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
        let n_x = pts.iter().filter(|q| q.0 == 0).count().max(1);
        let bins = n_x.min(MAX_BINS);
        let mut grid = vec![vec![0.0f64; bins]; n_levels];
        for &(l, x, d) in &pts {
            let b = (((x - xmin) / (xmax - xmin).max(f64::MIN_POSITIVE)) * bins as f64) as usize;
            let cell = &mut grid[l][b.min(bins - 1)];
            *cell = cell.max(d);
        }
        let mut panel = Group::new().set("class", "panel").set("data-path", p.as_str());
        panel = panel.add(text(LEFT, y0 - 10.0, format!("{p} path"), "start", 12.0));
        let (cw, ch) = (W / bins as f64, H / n_levels as f64);
        for (l, row) in grid.iter().enumerate() {
            let m = row.iter().copied().fold(0.0, f64::max);
            for (b, &d) in row.iter().enumerate() {
                let t = if m > 0.0 { d / m } else { 0.0 };
                panel = panel.add(
                    Rectangle::new()
                        .set("x", LEFT + b as f64 * cw)
                        .set("y", y0 + H - (l + 1) as f64 * ch)
                        .set("width", cw + 0.05)
                        .set("height", ch + 0.05)
                        .set("fill", hex(ramp(t))),
                );
            }
        }
        panel = panel
            .add(line(LEFT, y0, LEFT, y0 + H))
            .add(line(LEFT, y0 + H, LEFT + W, y0 + H))
            .add(text(LEFT, y0 + H + 16.0, fmt_tick(xmin), "middle", 10.0))
            .add(text(LEFT + W, y0 + H + 16.0, fmt_tick(xmax), "middle", 10.0))
            .add(text(LEFT + W / 2.0, y0 + H + 30.0, "x", "middle", 11.0))
            .add(text(LEFT - 6.0, y0 + H, "0", "end", 10.0))
            .add(text(LEFT - 6.0, y0 + 10.0, format!("{}", n_levels - 1), "end", 10.0))
            .add(
                text(0.0, 0.0, "level", "middle", 11.0)
                    .set("transform", format!("translate({}, {}) rotate(-90)", LEFT - 30.0, y0 + H / 2.0)),
            );
        doc = doc.add(panel);
    }
    Ok(doc)
}

/// Strongest-mode mass per level, one line per path.
pub fn mass_lines(table: &Table) -> Result<Document> {
    let idx = table.require(&["path", "level", "strong_mass"])?;
    let mut paths: Vec<String> = Vec::new();
    for r in &table.rows {
        push_unique(&mut paths, &r[idx[0]]);
    }
    const W: f64 = 480.0;
    const H: f64 = 260.0;
    const LEFT: f64 = 70.0;
    const TOP: f64 = 30.0;
    let kmax = table.rows.iter().filter_map(|r| r[idx[1]].parse::<usize>().ok()).max().unwrap_or(1).max(1);
    let mut doc = Document::new()
        .set("viewBox", (0, 0, LEFT + W + 140.0, TOP + H + 50.0))
        .set("width", LEFT + W + 140.0)
        .set("height", TOP + H + 50.0)
        .add(Title::new("strong_mass"))
        .add(axes(LEFT, TOP, W, H, 1.0, "strongest-mode mass"))
        .add(text(LEFT + W / 2.0, TOP + H + 30.0, "level", "middle", 11.0))
        .add(text(LEFT + W, TOP + H + 16.0, kmax.to_string(), "middle", 10.0));
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (pi, p) in paths.iter().enumerate() {
        let mut pts = Vec::new();
        for r in table.rows.iter().filter(|r| &r[idx[0]] == p) {
            let (l, m): (usize, f64) = (r[idx[1]].parse()?, r[idx[2]].parse()?);
            pts.push(format!("{:.2},{:.2}", LEFT + W * l as f64 / kmax as f64, TOP + H * (1.0 - m.clamp(0.0, 1.0))));
        }
        let c = colors[pi % colors.len()];
        doc = doc
            .add(
                Polyline::new()
                    .set("class", "series")
                    .set("data-path", p.as_str())
                    .set("points", pts.join(" "))
                    .set("fill", "none")
                    .set("stroke", c)
                    .set("stroke-width", 2),
            )
            .add(text(LEFT + W + 10.0, TOP + 20.0 + 16.0 * pi as f64, p.as_str(), "start", 11.0).set("fill", c));
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luminance(c: Rgb) -> f64 {
        0.2126 * c.0 + 0.7152 * c.1 + 0.0722 * c.2
    }

    fn table(rows: &[[&str; 6]]) -> Table {
        Table {
            headers: ["target", "sampler", "path", "transition", "k", "sw2"].map(String::from).to_vec(),
            rows: rows.iter().map(|r| r.map(String::from).to_vec()).collect(),
        }
    }

    #[test]
    fn shading_darkens_with_k() {
        for base in [(0.85, 0.15, 0.15), (0.1, 0.65, 0.25), (0.55, 0.55, 0.55)] {
            let l: Vec<f64> = (0..5).map(|r| luminance(shade(base, r, 5))).collect();
            assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
        }
    }

    #[test]
    fn one_group_with_five_ks_gives_five_shaded_bars() {
        let rows: Vec<[&str; 6]> = ["16", "32", "64", "128", "256"]
            .iter()
            .map(|k| ["t", "smc", "diffusion", "none", *k, "0.5"])
            .collect();
        let svg = bar_chart(&table(&rows), "sw2").unwrap().to_string();
        assert_eq!(svg.matches("class=\"bar\"").count(), 5);
        let ks: Vec<&str> = svg.split("data-k=\"").skip(1).map(|s| &s[..s.find('"').unwrap()]).collect();
        assert_eq!(ks, ["16", "32", "64", "128", "256"]);
    }

    #[test]
    fn empty_table_draws_axes_only() {
        let svg = bar_chart(&table(&[]), "sw2").unwrap().to_string();
        assert!(svg.contains("class=\"axes\""));
        assert_eq!(svg.matches("class=\"bar\"").count(), 0);
    }

    #[test]
    fn missing_columns_are_named() {
        let t = Table { headers: vec!["target".into(), "sw2".into()], rows: vec![] };
        let e = bar_chart(&t, "sw2").unwrap_err().to_string();
        assert!(e.contains("sampler") && e.contains("k"), "{e}");
        let t = Table { headers: vec!["foo".into()], rows: vec![] };
        assert!(detect(&t).is_err());
    }

    #[test]
    fn panels_follow_targets() {
        let svg = bar_chart(
            &table(&[["a", "ais", "diffusion", "stoch1", "64", "1"], ["b", "ais", "diffusion", "stoch2", "64", "2"]]),
            "sw2",
        )
        .unwrap()
        .to_string();
        assert_eq!(svg.matches("class=\"panel\"").count(), 2);
    }
}
