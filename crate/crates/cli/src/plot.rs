//! Static SVG line plots of CSV tables.

use std::fmt::Write as _;

use loglab_core::{Error, Result};

use crate::config::PlotSpec;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A CSV table with a header row; lines starting with `#` are skipped.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("CSV has no header".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let rows = lines
            .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
            .collect();
        Ok(Self { header, rows })
    }

    /// Parsed values of a column; unparsable cells become `NaN`.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("no column {name:?} in {:?}", self.header)))?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.get(k).and_then(|c| c.parse().ok()).unwrap_or(f64::NAN))
            .collect())
    }
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter_map(|v| transform(v, log)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo <= 1e-300 {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Self { log, lo, hi })
    }

    fn map(&self, v: f64, from: f64, to: f64) -> Option<f64> {
        transform(v, self.log).map(|t| from + (t - self.lo) / (self.hi - self.lo) * (to - from))
    }

    fn label(&self, t: f64) -> String {
        if self.log {
            format!("{:.3e}", 10f64.powf(t))
        } else {
            format!("{t:.4e}")
        }
    }
}

fn transform(v: f64, log: bool) -> Option<f64> {
    match (v.is_finite(), log) {
        (false, _) => None,
        (true, true) if v <= 0.0 => None,
        (true, true) => Some(v.log10()),
        (true, false) => Some(v),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One polyline per `y` column. Points that cannot be drawn (non-finite, or
/// non-positive on a log axis) are dropped. `metadata` is embedded verbatim
/// in a `<metadata>` element.
pub fn render(table: &Table, spec: &PlotSpec, metadata: &str) -> Result<String> {
    if spec.y.is_empty() {
        return Err(Error::Config("plot needs at least one y column".into()));
    }
    let x = table.column(&spec.x)?;
    let ys = spec
        .y
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let xa = Axis::new(x.iter().cloned(), spec.log_x)
        .ok_or_else(|| Error::InsufficientData(format!("no plottable values in column {:?}", spec.x)))?;
    let ya = Axis::new(ys.iter().flatten().cloned(), spec.log_y)
        .ok_or_else(|| Error::InsufficientData("no plottable y values".into()))?;

    let (w, h) = (spec.size.0 as f64, spec.size.1 as f64);
    let (left, right, top, bottom) = (80.0, w - 20.0, 40.0, h - 50.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", escape(metadata));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    if let Some(t) = &spec.title {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
            w / 2.0,
            escape(t)
        );
    }
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
            escape(body)
        );
    };
    text(&mut s, left, bottom + 16.0, "start", &xa.label(xa.lo));
    text(&mut s, right, bottom + 16.0, "end", &xa.label(xa.hi));
    text(&mut s, left - 4.0, bottom, "end", &ya.label(ya.lo));
    text(&mut s, left - 4.0, top + 10.0, "end", &ya.label(ya.hi));
    let xname = if spec.log_x { format!("{} (log)", spec.x) } else { spec.x.clone() };
    text(&mut s, (left + right) / 2.0, h - 12.0, "middle", &xname);

    for (k, (name, y)) in spec.y.iter().zip(&ys).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = String::new();
        for (&xv, &yv) in x.iter().zip(y) {
            if let (Some(px), Some(py)) = (xa.map(xv, left, right), ya.map(yv, bottom, top)) {
                if !pts.is_empty() {
                    pts.push(' ');
                }
                let _ = write!(pts, "{px:.2},{py:.2}");
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"><title>{}</title></polyline>"#,
            escape(name)
        );
        let ly = top + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" text-anchor="end" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            right - 6.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
