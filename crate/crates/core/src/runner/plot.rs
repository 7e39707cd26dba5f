//! Deterministic SVG charts on a fixed 640×480 canvas. Output depends only
//! on the input tables and their order: no timestamps, fixed color cycle.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datagen::{toy_dataset, ToyData};
use crate::error::{Error, Result};
use crate::instrument::histogram;

use super::csv_io::Table;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 610.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 420.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// First-layer irrelevant norm against step, log-scale y, one curve per table.
    NormCurves,
    /// `row,col,value` table as a colored matrix.
    GramHeatmap,
    /// Histogram of an `eigenvalue` column.
    EigenHistogram,
    /// Toy-model `(a, b)` paths over loss level sets.
    Landscape2d,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::NormCurves, PlotKind::GramHeatmap, PlotKind::EigenHistogram, PlotKind::Landscape2d];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::NormCurves => "norm-curves",
            PlotKind::GramHeatmap => "gram-heatmap",
            PlotKind::EigenHistogram => "eigen-histogram",
            PlotKind::Landscape2d => "landscape-2d",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Param(format!("unknown plot kind `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct PlotOptions {
    /// Dataset whose loss level sets are drawn under landscape paths.
    pub toy: ToyData,
    pub bins: usize,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { toy: ToyData::D1, bins: 20 }
    }
}

/// Renders `tables` and writes the SVG files into `out`. Curve and path
/// plots combine all inputs into `<kind>.svg`; matrix and histogram plots
/// write one `<stem>-<kind>.svg` per input.
pub fn plot(paths: &[PathBuf], kind: PlotKind, opts: &PlotOptions, out: &Path) -> Result<Vec<PathBuf>> {
    if paths.is_empty() {
        return Err(Error::Param("no input tables".into()));
    }
    let tables = paths.iter().map(|p| Table::read(p)).collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let mut emit = |name: String, svg: String| -> Result<()> {
        let p = out.join(name);
        std::fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    match kind {
        PlotKind::NormCurves => emit(format!("{}.svg", kind.name()), norm_curves(&tables)?)?,
        PlotKind::Landscape2d => emit(format!("{}.svg", kind.name()), landscape(&tables, opts.toy)?)?,
        PlotKind::GramHeatmap | PlotKind::EigenHistogram => {
            for t in &tables {
                let svg = if kind == PlotKind::GramHeatmap { gram_heatmap(t)? } else { eigen_histogram(t, opts.bins)? };
                emit(format!("{}-{}.svg", label(&t.path), kind.name()), svg)?;
            }
        }
    }
    Ok(written)
}

/// Curve label: the file stem, or the parent directory for `trajectory.csv`.
pub fn label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if stem == "trajectory" {
        if let Some(parent) = path.parent().and_then(Path::file_name) {
            return parent.to_string_lossy().into_owned();
        }
    }
    stem
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">"#);
        let _ = writeln!(body, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(body, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, esc(title));
        Self { body }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(self.body, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#);
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(self.body, r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"#, esc(s));
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#, coords.join(" "));
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#);
    }

    fn frame(&mut self, xlabel: &str, ylabel: &str) {
        let _ = writeln!(self.body, r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#333333"/>"##, RIGHT - LEFT, BOTTOM - TOP);
        self.text((LEFT + RIGHT) / 2.0, H - 20.0, "middle", xlabel);
        let _ = writeln!(
            self.body,
            r#"<text x="18" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (TOP + BOTTOM) / 2.0,
            (TOP + BOTTOM) / 2.0,
            esc(ylabel)
        );
    }

    fn legend(&mut self, labels: &[String]) {
        for (k, l) in labels.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * k as f64;
            self.line(RIGHT - 150.0, y, RIGHT - 130.0, y, COLORS[k % COLORS.len()], 2.0);
            self.text(RIGHT - 125.0, y + 4.0, "start", l);
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map of `[lo, hi]` onto `[a, b]`.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi == lo {
        (a + b) / 2.0
    } else {
        a + (v - lo) / (hi - lo) * (b - a)
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

fn x_ticks(svg: &mut Svg, lo: f64, hi: f64) {
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let x = scale(v, lo, hi, LEFT, RIGHT);
        svg.line(x, BOTTOM, x, BOTTOM + 5.0, "#333333", 1.0);
        svg.text(x, BOTTOM + 18.0, "middle", &tick(v));
    }
}

fn y_ticks(svg: &mut Svg, lo: f64, hi: f64, log: bool) {
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = scale(v, lo, hi, BOTTOM, TOP);
        svg.line(LEFT - 5.0, y, LEFT, y, "#333333", 1.0);
        let s = if log { format!("1e{:.1}", v) } else { tick(v) };
        svg.text(LEFT - 8.0, y + 4.0, "end", &s);
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    vals.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

pub fn norm_curves(tables: &[Table]) -> Result<String> {
    let mut series = Vec::new();
    for t in tables {
        let steps = t.column("step")?;
        let norms = t.column("irrel_norm_L1")?;
        let pts: Vec<(f64, f64)> =
            steps.into_iter().zip(norms).filter(|(_, n)| *n > 0.0 && n.is_finite()).map(|(s, n)| (s, n.log10())).collect();
        series.push((label(&t.path), pts));
    }
    let (x0, x1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0))).unwrap_or((0.0, 1.0));
    let (y0, y1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1))).unwrap_or((0.0, 1.0));
    let mut svg = Svg::new("First-layer irrelevant weight norm");
    svg.frame("step", "log10 ‖W1[:, irrelevant]‖");
    x_ticks(&mut svg, x0, x1);
    y_ticks(&mut svg, y0, y1, true);
    for (k, (_, pts)) in series.iter().enumerate() {
        let mapped: Vec<(f64, f64)> =
            pts.iter().map(|&(x, y)| (scale(x, x0, x1, LEFT, RIGHT), scale(y, y0, y1, BOTTOM, TOP))).collect();
        svg.polyline(&mapped, COLORS[k % COLORS.len()], 1.5);
    }
    svg.legend(&series.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>());
    Ok(svg.finish())
}

/// Diverging blue-white-red color for `v ∈ [−1, 1]`.
fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

pub fn gram_heatmap(t: &Table) -> Result<String> {
    let rows = t.column("row")?;
    let cols = t.column("col")?;
    let vals = t.column("value")?;
    let n = rows.iter().chain(&cols).fold(0usize, |m, v| m.max(*v as usize + 1));
    let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let side = (BOTTOM - TOP).min(RIGHT - LEFT);
    let cell = if n == 0 { 0.0 } else { side / n as f64 };
    let x_off = LEFT + (RIGHT - LEFT - side) / 2.0;
    let mut svg = Svg::new(&format!("Gram matrix ({n}×{n}), max |entry| {}", tick(max)));
    for ((r, c), v) in rows.iter().zip(&cols).zip(&vals) {
        let color = diverging(if max > 0.0 { v / max } else { 0.0 });
        svg.rect(x_off + *c * cell, TOP + *r * cell, cell, cell, &color);
    }
    let _ = writeln!(svg.body, r##"<rect x="{x_off:.2}" y="{TOP}" width="{side:.2}" height="{side:.2}" fill="none" stroke="#333333"/>"##);
    Ok(svg.finish())
}

pub fn eigen_histogram(t: &Table, bins: usize) -> Result<String> {
    let vals = t.column("eigenvalue")?;
    let h = histogram(&vals, bins);
    let maxc = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let (lo, hi) = (h.edges[0], *h.edges.last().expect("edges"));
    let mut svg = Svg::new(&format!("Gram eigenvalues ({} values)", vals.len()));
    svg.frame("eigenvalue", "count");
    x_ticks(&mut svg, lo, hi);
    y_ticks(&mut svg, 0.0, maxc, false);
    for (k, &c) in h.counts.iter().enumerate() {
        let x0 = scale(h.edges[k], lo, hi, LEFT, RIGHT);
        let x1 = scale(h.edges[k + 1], lo, hi, LEFT, RIGHT);
        let y = scale(c as f64, 0.0, maxc, BOTTOM, TOP);
        svg.rect(x0, y, (x1 - x0 - 1.0).max(0.5), BOTTOM - y, COLORS[0]);
    }
    Ok(svg.finish())
}

/// Loss of `f(x) = a·b·x` depends on `p = ab` only:
/// `L(p) = ½·(E[x²]p² − 2E[yx]p + E[y²])`.
fn toy_loss_coeffs(which: ToyData) -> (f64, f64, f64) {
    let pts = toy_dataset(which);
    let n = pts.len() as f64;
    let exx = pts.iter().map(|p| p.x * p.x).sum::<f64>() / n;
    let eyx = pts.iter().map(|p| p.y * p.x).sum::<f64>() / n;
    let eyy = pts.iter().map(|p| p.y * p.y).sum::<f64>() / n;
    (exx, eyx, eyy)
}

pub fn landscape(tables: &[Table], which: ToyData) -> Result<String> {
    let mut paths = Vec::new();
    for t in tables {
        let b = t.column("chain_c0_w1")?;
        let a = t.column("chain_c0_w2")?;
        paths.push((label(&t.path), a.into_iter().zip(b).collect::<Vec<(f64, f64)>>()));
    }
    let reach = paths.iter().flat_map(|(_, p)| p.iter().map(|(a, b)| a.abs().max(b.abs()))).filter(|v| v.is_finite()).fold(1.0f64, f64::max);
    let lim = (reach * 1.1 * 10.0).ceil() / 10.0;
    let (exx, eyx, _) = toy_loss_coeffs(which);
    let p_star = if exx > 0.0 { eyx / exx } else { 0.0 };
    let to_px = |a: f64, b: f64| (scale(a, -lim, lim, LEFT, RIGHT), scale(b, -lim, lim, BOTTOM, TOP));

    let mut svg = Svg::new(&format!("Toy landscape ({which:?}): loss level sets and (a, b) paths"));
    svg.frame("a (second layer)", "b (first layer)");
    x_ticks(&mut svg, -lim, lim);
    y_ticks(&mut svg, -lim, lim, false);
    // Level sets are hyperbolas ab = p* ± Δ; the minimum set is ab = p*.
    let hyperbola = |svg: &mut Svg, p: f64, stroke: &str, width: f64| {
        if p == 0.0 {
            let (x0, y0) = to_px(-lim, 0.0);
            let (x1, _) = to_px(lim, 0.0);
            svg.line(x0, y0, x1, y0, stroke, width);
            let (xa, ya) = to_px(0.0, -lim);
            let (_, yb) = to_px(0.0, lim);
            svg.line(xa, ya, xa, yb, stroke, width);
            return;
        }
        for sign in [1.0, -1.0] {
            let amin = (p.abs() / lim).max(1e-9);
            let pts: Vec<(f64, f64)> = (0..=120)
                .map(|k| sign * (amin + (lim - amin) * k as f64 / 120.0))
                .map(|a| to_px(a, p / a))
                .collect();
            svg.polyline(&pts, stroke, width);
        }
    };
    for k in 1..=6 {
        let delta = lim * lim * k as f64 / 6.0;
        hyperbola(&mut svg, p_star + delta, "#cccccc", 1.0);
        hyperbola(&mut svg, p_star - delta, "#cccccc", 1.0);
    }
    hyperbola(&mut svg, p_star, "#000000", 1.5);
    for (k, (_, pts)) in paths.iter().enumerate() {
        let mapped: Vec<(f64, f64)> = pts.iter().filter(|(a, b)| a.is_finite() && b.is_finite()).map(|&(a, b)| to_px(a, b)).collect();
        let color = COLORS[k % COLORS.len()];
        svg.polyline(&mapped, color, 1.5);
        if let Some(&(x, y)) = mapped.last() {
            let _ = writeln!(svg.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
    }
    svg.legend(&paths.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>());
    Ok(svg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::csv_io::write_table;

    fn table(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>]) -> PathBuf {
        let p = dir.join(name);
        let h: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        let r: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
        write_table(&p, &h, &r).unwrap();
        p
    }

    #[test]
    fn kinds_parse() {
        for k in PlotKind::ALL {
            assert_eq!(k.name().parse::<PlotKind>().unwrap(), k);
        }
        assert!("pie".parse::<PlotKind>().is_err());
    }

    #[test]
    fn norm_curves_two_labels_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let gd = table(dir.path(), "gd.csv", &["step", "irrel_norm_L1"], &[vec![1.0, 1.0], vec![2.0, 0.5], vec![3.0, 0.4]]);
        let sgd = table(dir.path(), "sgd.csv", &["step", "irrel_norm_L1"], &[vec![1.0, 1.0], vec![2.0, 0.1], vec![3.0, 0.01]]);
        let a = plot(&[gd.clone(), sgd.clone()], PlotKind::NormCurves, &PlotOptions::default(), &dir.path().join("a")).unwrap();
        let b = plot(&[gd, sgd], PlotKind::NormCurves, &PlotOptions::default(), &dir.path().join("b")).unwrap();
        let sa = std::fs::read_to_string(&a[0]).unwrap();
        assert_eq!(sa, std::fs::read_to_string(&b[0]).unwrap());
        assert_eq!(sa.matches("<polyline").count(), 2);
        assert!(sa.contains(">gd<") && sa.contains(">sgd<"));
        assert!(sa.contains("log10"));
    }

    #[test]
    fn identity_gram_is_uniform_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<Vec<f64>> =
            (0..3).flat_map(|i| (0..3).map(move |j| vec![i as f64, j as f64, if i == j { 1.0 } else { 0.0 }])).collect();
        let p = table(dir.path(), "gram.csv", &["row", "col", "value"], &rows);
        let svg = gram_heatmap(&Table::read(&p).unwrap()).unwrap();
        assert_eq!(svg.matches(r##"fill="#ff0000""##).count(), 3);
        assert_eq!(svg.matches(r##"fill="#ffffff""##).count(), 6);
    }

    #[test]
    fn schema_mismatch_names_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = table(dir.path(), "t.csv", &["step", "loss"], &[vec![1.0, 2.0]]);
        for (kind, col) in [
            (PlotKind::NormCurves, "irrel_norm_L1"),
            (PlotKind::GramHeatmap, "row"),
            (PlotKind::EigenHistogram, "eigenvalue"),
            (PlotKind::Landscape2d, "chain_c0_w1"),
        ] {
            match plot(&[p.clone()], kind, &PlotOptions::default(), dir.path()) {
                Err(Error::Schema { column, .. }) => assert_eq!(column, col),
                other => panic!("{kind:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn histogram_bars() {
        let dir = tempfile::tempdir().unwrap();
        let p = table(dir.path(), "eigen.csv", &["index", "eigenvalue"], &[vec![0.0, 3.0], vec![1.0, 1.0], vec![2.0, 0.0]]);
        let svg = eigen_histogram(&Table::read(&p).unwrap(), 3).unwrap();
        assert_eq!(svg.matches(r##"fill="#1f77b4""##).count(), 3);
    }

    #[test]
    fn labels() {
        assert_eq!(label(Path::new("/x/sgd/trajectory.csv")), "sgd");
        assert_eq!(label(Path::new("/x/gd.csv")), "gd");
    }
}
