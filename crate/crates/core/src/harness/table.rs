use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Format with at most 12 significant digits and no exponent.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Phase,
    Recovery,
    Bounded,
    Gaussian,
}

impl ExperimentKind {
    fn x_label(self) -> &'static str {
        match self {
            ExperimentKind::Phase => "s",
            ExperimentKind::Recovery => "k",
            ExperimentKind::Bounded => "gamma",
            ExperimentKind::Gaussian => "alpha",
        }
    }
}

/// One CSV row. Condition-only rows (phase transition verdicts) carry no
/// success rate or RMSE; recovery rows may carry no verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub point_k: usize,
    /// `s`, `gamma` or `alpha` depending on the experiment; `k` again in the recovery sweep.
    pub point_x: f64,
    pub method: String,
    pub successes: Option<usize>,
    pub rmse: Option<f64>,
    pub lhs: Option<f64>,
    pub holds: Option<bool>,
    pub valid: Option<bool>,
    pub trials: usize,
}

impl Row {
    pub fn success_rate(&self) -> Option<f64> {
        self.successes.map(|s| s as f64 / self.trials as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentTable {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub rows: Vec<Row>,
}

pub const CSV_HEADER: &str = "point_k,point_s_or_gamma_or_alpha,method,success_rate,rmse,lhs,holds,valid,trials,seed";

impl ExperimentTable {
    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a Row> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        let opt_num = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        let opt_bool = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.point_k,
                fmt_num(r.point_x),
                r.method,
                opt_num(r.success_rate()),
                opt_num(r.rmse),
                opt_num(r.lhs),
                opt_bool(r.holds),
                opt_bool(r.valid),
                r.trials,
                self.seed
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Write `<base>.csv` and `<base>.svg`; returns both paths.
    pub fn write_files(&self, base: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv = base.with_extension("csv");
        let svg = base.with_extension("svg");
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        std::fs::write(&svg, self.to_svg()).map_err(|e| Error::io(&svg, e))?;
        Ok((csv, svg))
    }

    pub fn to_svg(&self) -> String {
        match self.kind {
            ExperimentKind::Phase => self.heat_map_svg(),
            _ => self.line_svg(),
        }
    }

    /// Cells over `(k, s)`: green where the condition holds, red where it
    /// fails, grey where the bound is invalid. Empirical success rates, when
    /// present, are printed in the cell.
    fn heat_map_svg(&self) -> String {
        let cells: Vec<&Row> = self.rows.iter().filter(|r| r.holds.is_some()).collect();
        let k_max = cells.iter().map(|r| r.point_k).max().unwrap_or(1);
        let k_min = cells.iter().map(|r| r.point_k).min().unwrap_or(1);
        let s_max = cells.iter().map(|r| r.point_x as usize).max().unwrap_or(1);
        let cell = 24.0;
        let (left, top) = (50.0, 40.0);
        let width = left + cell * (k_max - k_min + 1) as f64 + 20.0;
        let height = top + cell * s_max as f64 + 40.0;
        let mut out = svg_open(width, height, &format!("refined condition (seed {})", self.seed));
        for r in &cells {
            let x = left + cell * (r.point_k - k_min) as f64;
            let y = top + cell * (s_max - r.point_x as usize) as f64;
            let fill = match (r.valid, r.holds) {
                (Some(false), _) => "#bbbbbb",
                (_, Some(true)) => "#4caf50",
                _ => "#e53935",
            };
            let _ =
                writeln!(out, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/>"#);
            let rate = self
                .rows
                .iter()
                .find(|e| e.method == "omp" && e.point_k == r.point_k && e.point_x == r.point_x)
                .and_then(Row::success_rate);
            if let Some(rate) = rate {
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" font-size="8" text-anchor="middle">{:.2}</text>"#,
                    x + cell / 2.0,
                    y + cell / 2.0 + 3.0,
                    rate
                );
            }
        }
        for k in k_min..=k_max {
            let x = left + cell * (k - k_min) as f64 + cell / 2.0;
            let _ = writeln!(
                out,
                r#"<text x="{x}" y="{}" font-size="10" text-anchor="middle">{k}</text>"#,
                top + cell * s_max as f64 + 14.0
            );
        }
        for s in 1..=s_max {
            let y = top + cell * (s_max - s) as f64 + cell / 2.0 + 4.0;
            let _ = writeln!(out, r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{s}</text>"#, left - 6.0);
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">k</text>"#,
            width / 2.0,
            height - 6.0
        );
        let _ = writeln!(out, r#"<text x="14" y="{}" font-size="12">s</text>"#, top + cell * s_max as f64 / 2.0);
        out.push_str("</svg>\n");
        out
    }

    /// Success rate against the swept parameter, one polyline per method.
    fn line_svg(&self) -> String {
        let (w, h) = (480.0, 300.0);
        let (left, right, top, bottom) = (50.0, 20.0, 40.0, 40.0);
        let pw = w - left - right;
        let ph = h - top - bottom;
        let xs: Vec<f64> = self.rows.iter().filter(|r| r.successes.is_some()).map(|r| r.point_x).collect();
        let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let x1 = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if x1 > x0 { x1 - x0 } else { 1.0 };
        let px = |x: f64| left + pw * (x - x0.min(x1)) / span;
        let py = |rate: f64| top + ph * (1.0 - rate);

        let mut out = svg_open(w, h, &format!("success rate vs {} (seed {})", self.kind.x_label(), self.seed));
        let _ = writeln!(out, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for (i, (method, colour)) in [("omp", "#1565c0"), ("bp", "#e65100")].iter().enumerate() {
            let pts: Vec<String> = self
                .rows_for(method)
                .filter_map(|r| r.success_rate().map(|s| format!("{:.2},{:.2}", px(r.point_x), py(s))))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="11" fill="{colour}">{method}</text>"#,
                left + pw - 40.0,
                top + ph - 10.0 - 14.0 * i as f64
            );
        }
        for (v, label) in [(0.0, "0"), (1.0, "1")] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{label}</text>"#,
                left - 6.0,
                py(v) + 4.0
            );
        }
        if x1.is_finite() {
            let _ = writeln!(out, r#"<text x="{left}" y="{}" font-size="10">{}</text>"#, top + ph + 14.0, fmt_num(x0));
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
                left + pw,
                top + ph + 14.0,
                fmt_num(x1)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            h - 8.0,
            self.kind.x_label()
        );
        out.push_str("</svg>\n");
        out
    }
}

fn svg_open(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, x: f64, method: &str, successes: Option<usize>) -> Row {
        Row {
            point_k: k,
            point_x: x,
            method: method.into(),
            successes,
            rmse: Some(0.0),
            lhs: None,
            holds: None,
            valid: None,
            trials: 4,
        }
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.528511028767345), "0.528511028767");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-2.5e-13), "-0.00000000000025");
        assert_eq!(fmt_num(6.715470123456789), "6.71547012346");
    }

    #[test]
    fn csv_layout() {
        let t = ExperimentTable { kind: ExperimentKind::Bounded, seed: 9, rows: vec![row(4, 1.25, "omp", Some(3))] };
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("4,1.25,omp,0.75,0,,,,4,9"));
        assert!(t.to_svg().contains("polyline"));
    }

    #[test]
    fn heat_map_renders_cells() {
        let mut r = row(4, 1.0, "refined", None);
        r.holds = Some(true);
        r.valid = Some(true);
        let t = ExperimentTable { kind: ExperimentKind::Phase, seed: 1, rows: vec![r] };
        assert!(t.to_svg().contains("#4caf50"));
    }
}
