//! Experiment reports: verdicts, tables, fields and plots, written as CSV,
//! gnuplot `.dat` files, self-contained SVG and a plain-text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported but not counted toward the verdict.
    Advisory,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Advisory => "ADVISORY",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct LinePlot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub fields: Vec<(String, Field)>,
    pub plots: Vec<LinePlot>,
    /// Named free-form text records (`name.txt`).
    pub records: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report { title: title.into(), ..Default::default() }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        });
    }

    pub fn advisory(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), status: Status::Advisory, detail: detail.into() });
    }

    /// True when no check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn field(&mut self, name: impl Into<String>, f: Field) {
        self.fields.push((name.into(), f));
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<f64>>) {
        self.tables.push(Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        });
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.title);
        let _ = writeln!(s);
        let pass = self.checks.iter().filter(|c| c.status == Status::Pass).count();
        let fail = self.checks.iter().filter(|c| c.status == Status::Fail).count();
        let _ = writeln!(s, "checks: {} ({pass} passed, {fail} failed)", self.checks.len());
        for c in &self.checks {
            let _ = writeln!(s, "{:<8} {}: {}", c.status.label(), c.name, c.detail);
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s);
            for n in &self.notes {
                let _ = writeln!(s, "note: {n}");
            }
        }
        for t in &self.tables {
            let _ = writeln!(s, "table {}: {} rows", t.name, t.rows.len());
        }
        let _ = writeln!(s, "verdict: {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn table_csv(t: &Table) -> String {
    let mut s = t.header.join(",");
    s.push('\n');
    for r in &t.rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.17e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn table_dat(t: &Table) -> String {
    let mut s = format!("# {}\n", t.header.join(" "));
    for r in &t.rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.17e}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

/// One gnuplot data block per series, separated by two blank lines.
fn plot_dat(p: &LinePlot) -> String {
    let mut s = String::new();
    for (i, ser) in p.series.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# {} ({} {})", ser.label, p.x_label, p.y_label);
        for (x, y) in &ser.points {
            let _ = writeln!(s, "{x:.17e} {y:.17e}");
        }
    }
    s
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1e-12) };
    (lo - pad, hi + pad)
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("plot rendering failed: {e}"))
}

/// Renders a line plot as a standalone SVG document.
pub fn line_plot_svg(p: &LinePlot) -> Result<String> {
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, (720, 440)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let pts = || p.series.iter().flat_map(|s| s.points.iter());
        let (ylo, yhi) = bounds(pts().map(|q| q.1));
        let mut builder = ChartBuilder::on(&root);
        builder
            .caption(&p.title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70);
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart
                    .configure_mesh()
                    .x_desc(p.x_label.as_str())
                    .y_desc(p.y_label.as_str())
                    .draw()
                    .map_err(plot_err)?;
                for (i, s) in p.series.iter().enumerate() {
                    let color = PALETTE[i % PALETTE.len()];
                    chart
                        .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
                        .map_err(plot_err)?
                        .label(s.label.as_str())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
                }
                if p.series.len() > 1 {
                    chart
                        .configure_series_labels()
                        .background_style(WHITE.mix(0.8))
                        .border_style(BLACK)
                        .draw()
                        .map_err(plot_err)?;
                }
            }};
        }
        if p.log_x {
            let (xlo, xhi) = pts()
                .map(|q| q.0)
                .filter(|x| *x > 0.0)
                .fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
            let (xlo, xhi) = if xlo.is_finite() && xhi > xlo { (xlo, xhi) } else { (1e-3, 1.0) };
            draw!(builder
                .build_cartesian_2d((xlo..xhi).log_scale(), ylo..yhi)
                .map_err(plot_err)?);
        } else {
            let (xlo, xhi) = bounds(pts().map(|q| q.0));
            draw!(builder.build_cartesian_2d(xlo..xhi, ylo..yhi).map_err(plot_err)?);
        }
        root.present().map_err(plot_err)?;
    }
    Ok(out)
}

/// Cell-value heat map of a 2D field.
pub fn heatmap_svg(title: &str, f: &Field) -> Result<String> {
    let g = f.grid();
    let (lo, hi) = (f.min(), f.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = String::new();
    {
        let (a, b) = (g.extent(0), g.extent(1));
        let height = 480u32;
        let width = ((height as f64 - 60.0) * a / b + 100.0).round().max(200.0) as u32;
        let root = SVGBackend::with_string(&mut out, (width, height)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 16))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(0.0..a, 0.0..b)
            .map_err(plot_err)?;
        chart.configure_mesh().disable_mesh().draw().map_err(plot_err)?;
        let (hx, hy) = (g.spacing(0), g.spacing(1));
        chart
            .draw_series(f.values().iter().enumerate().map(|(k, &v)| {
                let (i, j) = g.coords(k);
                let t = (v - lo) / span;
                let shade = (255.0 * (1.0 - t)).round() as u8;
                let x0 = i as f64 * hx;
                let y0 = j as f64 * hy;
                Rectangle::new([(x0, y0), (x0 + hx, y0 + hy)], RGBColor(shade, shade, 255).filled())
            }))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(out)
}

fn field_plot(name: &str, f: &Field) -> LinePlot {
    let g = f.grid();
    LinePlot {
        name: name.into(),
        title: name.into(),
        x_label: "x".into(),
        y_label: "value".into(),
        log_x: false,
        series: vec![Series {
            label: name.into(),
            points: (0..f.len()).map(|k| (g.center(k)[0], f.values()[k])).collect(),
        }],
    }
}

/// Writes every part of the report into `outdir`; returns the files written.
pub fn emit_report(report: &Report, outdir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = Vec::new();
    write(outdir.join("summary.txt"), &report.summary(), &mut written)?;
    let mut verdicts = String::from("check,status,detail\n");
    for c in &report.checks {
        let _ = writeln!(verdicts, "{},{},\"{}\"", c.name, c.status.label(), c.detail.replace('"', "'"));
    }
    write(outdir.join("verdicts.csv"), &verdicts, &mut written)?;
    for t in &report.tables {
        write(outdir.join(format!("{}.csv", t.name)), &table_csv(t), &mut written)?;
        write(outdir.join(format!("{}.dat", t.name)), &table_dat(t), &mut written)?;
    }
    for (name, f) in &report.fields {
        let csv = outdir.join(format!("{name}.csv"));
        f.write_csv(&csv)?;
        written.push(csv);
        if f.grid().dim() == 1 {
            let p = field_plot(name, f);
            write(outdir.join(format!("{name}.svg")), &line_plot_svg(&p)?, &mut written)?;
            write(outdir.join(format!("{name}.dat")), &plot_dat(&p), &mut written)?;
        } else {
            write(outdir.join(format!("{name}.svg")), &heatmap_svg(name, f)?, &mut written)?;
        }
    }
    for p in &report.plots {
        write(outdir.join(format!("{}.svg", p.name)), &line_plot_svg(p)?, &mut written)?;
        write(outdir.join(format!("{}.dat", p.name)), &plot_dat(p), &mut written)?;
    }
    for (name, text) in &report.records {
        write(outdir.join(format!("{name}.txt")), text, &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn empty_report_passes_and_writes_summary() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&Report::new("empty"), dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let s = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(s.contains("checks: 0"));
        assert!(s.contains("verdict: pass"));
    }

    #[test]
    fn fields_and_plots_are_emitted() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new("demo");
        r.check("ok", true, "fine");
        r.advisory("maybe", "not counted");
        r.field("u", Field::from_fn(Grid::unit_interval(16).unwrap(), |x, _| x * x));
        r.field("v", Field::from_fn(Grid::rectangle(1.0, 2.0, 4, 8).unwrap(), |x, y| x + y));
        r.table("t", &["a", "b"], vec![vec![1.0, 2.0]]);
        r.plots.push(LinePlot {
            name: "sweep".into(),
            title: "sweep".into(),
            x_label: "mu".into(),
            y_label: "F".into(),
            log_x: true,
            series: vec![
                Series { label: "one".into(), points: vec![(0.01, 1.0), (1.0, 2.0)] },
                Series { label: "two".into(), points: vec![(0.01, 2.0), (1.0, 1.0)] },
            ],
        });
        emit_report(&r, dir.path()).unwrap();
        assert!(r.passed());
        for f in ["u.csv", "u.svg", "u.dat", "v.svg", "t.csv", "t.dat", "sweep.svg", "sweep.dat", "verdicts.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let svg = fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        let dat = fs::read_to_string(dir.path().join("sweep.dat")).unwrap();
        assert_eq!(dat.matches("\n\n\n").count(), 1);
    }

    #[test]
    fn failed_check_fails_the_report() {
        let mut r = Report::new("x");
        r.check("bad", false, "");
        assert!(!r.passed());
        assert!(r.summary().contains("FAIL"));
    }
}
