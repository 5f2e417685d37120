//! Study tables, rate fits, CSV and SVG emission.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            Value::Text(_) => None,
        }
    }

    fn render(&self, precision: usize) -> String {
        match self {
            Value::Num(x) => format!("{:.*e}", precision.saturating_sub(1), x),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn parse(s: &str) -> Self {
        if let Ok(i) = s.parse::<i64>() {
            return Value::Int(i);
        }
        match s.parse::<f64>() {
            Ok(x) => Value::Num(x),
            Err(_) => Value::Text(s.to_string()),
        }
    }
}

/// Least-squares fit of `log y = slope·log x + intercept`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub column: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Rows that entered the fit.
    pub used: usize,
}

/// Ordinary least squares on `(ln x, ln y)`.
///
/// Pairs with a nonpositive or non-finite entry are dropped with a warning; fewer than three
/// remaining pairs is an error.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension("fit_rate needs equal-length columns".into()));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| {
            let ok = **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite();
            if !ok {
                log::warn!("fit_rate: dropping pair ({x}, {y})");
            }
            ok
        })
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "fit_rate needs at least 3 positive pairs, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit_rate needs at least two distinct x".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// A study result: a table plus fitted rates and free-form notes.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub kind: String,
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Column against which rates are fitted (usually `eps`).
    pub abscissa: String,
    /// Columns plotted and fitted against the abscissa.
    pub error_columns: Vec<String>,
    pub fits: Vec<Fit>,
    pub comments: Vec<String>,
}

impl StudyReport {
    pub fn new(kind: &str, name: &str, columns: &[&str]) -> Self {
        Self {
            kind: kind.to_string(),
            name: name.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            abscissa: "eps".into(),
            error_columns: Vec::new(),
            fits: Vec::new(),
            comments: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; text cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Fits every error column against the abscissa; columns that cannot be fitted get a note.
    pub fn refit(&mut self) {
        self.fits.clear();
        let Some(xs) = self.column(&self.abscissa) else {
            return;
        };
        for c in self.error_columns.clone() {
            let Some(ys) = self.column(&c) else { continue };
            match fit_rate(&xs, &ys) {
                Ok((slope, intercept, r2)) => self.fits.push(Fit {
                    column: c,
                    slope,
                    intercept,
                    r2,
                    used: xs.iter().zip(&ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).count(),
                }),
                Err(e) => self.comments.push(format!("fit {c}: skipped ({e})")),
            }
        }
    }

    pub fn fit(&self, column: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.column == column)
    }

    /// CSV text: `#` comments (config echo, metadata, fits), header, rows.
    pub fn to_csv(&self, config_source: &str, precision: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# homlab {} study `{}`", self.kind, self.name);
        for line in config_source.lines() {
            let _ = writeln!(s, "# config: {line}");
        }
        let _ = writeln!(s, "# abscissa: {}", self.abscissa);
        let _ = writeln!(s, "# error_columns: {}", self.error_columns.join(","));
        for c in &self.comments {
            let _ = writeln!(s, "# note: {c}");
        }
        for f in &self.fits {
            let _ = writeln!(
                s,
                "# fit: {} slope={:.*e} intercept={:.*e} r2={:.*e} rows={}",
                f.column,
                precision - 1,
                f.slope,
                precision - 1,
                f.intercept,
                precision - 1,
                f.r2,
                f.used
            );
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.render(precision)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    /// Reads a CSV written by [`StudyReport::to_csv`] and recomputes the fits from its rows.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rep = StudyReport::new("unknown", "unknown", &[]);
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                if let Some(rest) = c.strip_prefix("homlab ") {
                    let mut it = rest.split_whitespace();
                    rep.kind = it.next().unwrap_or("unknown").to_string();
                    rep.name = rest
                        .split('`')
                        .nth(1)
                        .unwrap_or("unknown")
                        .to_string();
                } else if let Some(a) = c.strip_prefix("abscissa:") {
                    rep.abscissa = a.trim().to_string();
                } else if let Some(a) = c.strip_prefix("error_columns:") {
                    rep.error_columns = a.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
                } else if let Some(a) = c.strip_prefix("note:") {
                    rep.comments.push(a.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if !header {
                rep.columns = cells.iter().map(|s| s.to_string()).collect();
                header = true;
            } else if cells.len() != rep.columns.len() {
                return Err(Error::ConfigParse(format!(
                    "line {}: expected {} fields, found {}",
                    i + 1,
                    rep.columns.len(),
                    cells.len()
                )));
            } else {
                rep.rows.push(cells.iter().map(|s| Value::parse(s)).collect());
            }
        }
        if !header {
            return Err(Error::ConfigParse("no CSV header found".into()));
        }
        rep.comments.retain(|c| !c.starts_with("fit "));
        rep.refit();
        Ok(rep)
    }

    pub fn write_csv(&self, path: &Path, config_source: &str, precision: usize) -> Result<()> {
        std::fs::write(path, self.to_csv(config_source, precision)).map_err(|e| io_error(path, e))
    }

    pub fn write_plot(&self, path: &Path) -> Result<()> {
        emit_plot(self, path)
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-log SVG of every error column against the abscissa, with slope-1/2 and slope-1 guides.
pub fn render_svg(report: &StudyReport) -> String {
    let (w, h, m) = (640.0, 440.0, 60.0);
    let xs = report.column(&report.abscissa).unwrap_or_default();
    let series: Vec<(String, Vec<(f64, f64)>)> = report
        .error_columns
        .iter()
        .filter_map(|c| {
            let ys = report.column(c)?;
            let pts: Vec<(f64, f64)> = xs
                .iter()
                .zip(&ys)
                .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
                .map(|(x, y)| (x.log10(), y.log10()))
                .collect();
            Some((c.clone(), pts))
        })
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (-2.0, 0.0, -2.0, 0.0);
    if !all.is_empty() {
        x0 = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor();
        x1 = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil();
        y0 = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
        y1 = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil();
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{} ({})</text>"#,
        w / 2.0,
        escape(&report.name),
        escape(&report.kind)
    );
    // Axes with decade ticks.
    let _ = writeln!(
        s,
        r#"<path d="M{m} {} H{} M{m} {} V{m}" stroke="black" fill="none"/>"#,
        h - m,
        w - m,
        h - m
    );
    for k in (x0 as i64)..=(x1 as i64) {
        let x = px(k as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{k}</text>"#,
            h - m,
            h - m + 5.0,
            h - m + 20.0
        );
    }
    for k in (y0 as i64)..=(y1 as i64) {
        let y = py(k as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{m}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">1e{k}</text>"#,
            m - 5.0,
            m - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 15.0,
        escape(&report.abscissa)
    );
    // Guides through the lower-left corner.
    for (slope, label) in [(0.5, "slope 1/2"), (1.0, "slope 1")] {
        let (gx0, gy0) = (x0, y0);
        let gx1 = x1.min(x0 + (y1 - y0) / slope);
        let gy1 = gy0 + slope * (gx1 - gx0);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 4"/><text x="{:.2}" y="{:.2}" fill="#888">{label}</text>"##,
            px(gx0),
            py(gy0),
            px(gx1),
            py(gy1),
            px(gx1) - 60.0,
            py(gy1) + 14.0
        );
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !pts.is_empty() {
            let d: Vec<String> = pts
                .iter()
                .enumerate()
                .map(|(j, p)| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, px(p.0), py(p.1)))
                .collect();
            let _ = writeln!(s, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
            for p in pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(p.0), py(p.1));
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - m - 120.0,
            m + 16.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_plot(report: &StudyReport, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(report)).map_err(|e| io_error(path, e))
}
