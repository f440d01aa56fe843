//! Artifact writers: ensemble-mean CSV, PGM images, SVG line plots, vector CSV input.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use banach_sgd::diagnostics::{summarize, ConvergenceRecord, EnsembleSummary, CSV_HEADER};

use crate::Failure;

type Column = (&'static str, fn(&banach_sgd::EpochRow) -> Option<f64>);

/// Column accessors in CSV order, after `epoch`.
const COLUMNS: [Column; 6] = [
    ("objective", |r| Some(r.objective)),
    ("residual", |r| Some(r.residual)),
    ("bregman", |r| r.bregman),
    ("delta1", |r| r.delta1),
    ("delta2", |r| r.delta2),
    ("step", |r| Some(r.step)),
];

/// Per-epoch mean and standard error of every recorded column over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrace {
    pub epochs: Vec<u64>,
    /// One entry per column of [`COLUMNS`]; `None` when the column was not recorded.
    pub columns: Vec<Option<EnsembleSummary>>,
}

impl MeanTrace {
    /// Averages the rows the records share. Records of different length
    /// (a-priori stopping at different noise levels) are cut to the shortest.
    pub fn from_records(records: &[&ConvergenceRecord]) -> anyhow::Result<Self> {
        let len = records.iter().map(|r| r.rows().len()).min().unwrap_or(0);
        let epochs: Vec<u64> = records
            .first()
            .map(|r| r.rows()[..len].iter().map(|row| row.epoch).collect())
            .unwrap_or_default();
        for r in records {
            if r.rows()[..len]
                .iter()
                .map(|row| row.epoch)
                .ne(epochs.iter().copied())
            {
                return Err(
                    Failure::Invariant("seed traces record different epochs".into()).into(),
                );
            }
        }
        let columns = COLUMNS
            .iter()
            .map(|(_, get)| {
                let traces: Option<Vec<Vec<f64>>> = records
                    .iter()
                    .map(|r| {
                        r.rows()[..len]
                            .iter()
                            .map(get)
                            .collect::<Option<Vec<f64>>>()
                    })
                    .collect();
                match traces {
                    Some(t) if t.len() >= 2 => summarize(&t).map(Some),
                    Some(t) if t.len() == 1 => Ok(Some(EnsembleSummary {
                        mean: t[0].clone(),
                        std_err: vec![0.0; len],
                        n_seeds: 1,
                    })),
                    _ => Ok(None),
                }
            })
            .collect::<banach_sgd::Result<_>>()?;
        Ok(Self { epochs, columns })
    }

    pub fn column(&self, name: &str) -> Option<&EnsembleSummary> {
        let idx = COLUMNS.iter().position(|(n, _)| *n == name)?;
        self.columns[idx].as_ref()
    }

    /// Record header followed by one `_se` column per quantity.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let se: Vec<String> = COLUMNS.iter().map(|(n, _)| format!("{n}_se")).collect();
        writeln!(w, "{CSV_HEADER},{}", se.join(","))?;
        for (i, epoch) in self.epochs.iter().enumerate() {
            let mut line = epoch.to_string();
            for part in [0, 1] {
                for c in &self.columns {
                    line.push(',');
                    if let Some(s) = c {
                        let v = if part == 0 { s.mean[i] } else { s.std_err[i] };
                        write!(line, "{v:?}").expect("writing to a String");
                    }
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Binary 8-bit PGM of a `side × side` image stored row-major, min–max scaled.
pub fn write_pgm<W: Write>(x: &[f64], side: usize, mut w: W) -> std::io::Result<()> {
    assert_eq!(x.len(), side * side, "image length must be side²");
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    write!(w, "P5\n{side} {side}\n255\n")?;
    let bytes: Vec<u8> = x
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    w.write_all(&bytes)
}

/// Reads a vector stored one value per line or comma-separated on one line.
pub fn read_vector_csv<R: BufRead>(r: R) -> anyhow::Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| {
                Failure::Validation(format!("line {}: `{tok}` is not a number", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(
                    Failure::Validation(format!("line {}: non-finite value", lineno + 1)).into(),
                );
            }
            out.push(v);
        }
    }
    Ok(out)
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Self-contained SVG line chart with a log10 ordinate. Non-positive values are skipped.
pub fn line_plot_svg(title: &str, x_label: &str, series: &[Series<'_>]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
    };
    let x_max = pts().map(|p| p.0).fold(1.0_f64, f64::max);
    let x_min = pts().map(|p| p.0).fold(x_max, f64::min).min(0.0);
    let mut y_lo = pts()
        .map(|p| p.1.log10().floor())
        .fold(f64::INFINITY, f64::min);
    let mut y_hi = pts()
        .map(|p| p.1.log10().ceil())
        .fold(f64::NEG_INFINITY, f64::max);
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let sx = |x: f64| left + (x - x_min) / (x_max - x_min).max(1e-300) * (w - left - right);
    let sy = |y: f64| top + (y_hi - y.log10()) / (y_hi - y_lo) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    let mut decade = y_lo;
    while decade <= y_hi {
        let y = top + (y_hi - decade) / (y_hi - y_lo) * (h - top - bottom);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##,
            w - right
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">1e{}</text>"#,
            left - 6.0,
            y + 4.0,
            decade as i64
        );
        decade += 1.0;
    }
    for (x, anchor) in [(x_min, "start"), (x_max, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{x}</text>"#,
            sx(x),
            h - bottom + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 12.0,
        escape(x_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            w - right - 140.0,
            w - right - 120.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            w - right - 114.0,
            ly + 4.0,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
