//! Writes a [`ComparisonReport`] to disk: one JSON document (plus a CSV
//! table) per variable and metric, a scalar summary, and SVG charts.
//!
//! Layout under the output directory:
//!
//! ```text
//! metadata.json            tool, version, resolved config
//! report.json              the full report, for re-rendering
//! summary.json             measurement scalars, "value (reference v)"
//! failures.json            metrics that could not be computed
//! {variable}/{metric}.h{h}.(json|csv|svg)
//! {variable}/{metric}.(json|csv|svg)      bandwidth-free metrics
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::covariance::{RankVariabilityDistribution, TransitionProfile, VariogramSeries};
use crate::error::{Error, Result};
use crate::evaluate::{ComparisonReport, Paired, ReferenceReport, SmoothedMetrics, VariableReport};
use crate::individual::TrajectoryPanel;
use crate::marginal::{Outlier, ProfileSeries};
use crate::measurement::{MeasurementReport, ProtocolBlock, Summary};
use crate::svg::{render, Chart, Line, Panel, PanelContent};

/// Writes `bytes` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Directory-safe form of a variable id.
pub fn variable_dir(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn bandwidth_tag(h: f64) -> String {
    format!("h{h}")
}

fn stem(metric: &str, h: Option<f64>) -> String {
    match h {
        Some(h) => format!("{metric}.{}", bandwidth_tag(h)),
        None => metric.to_string(),
    }
}

fn document<T: Serialize>(
    variable: &str,
    metric: &str,
    h: Option<f64>,
    parameters: Value,
    paired: &T,
) -> Result<Value> {
    let mut doc = json!({
        "variable": variable,
        "metric": metric,
        "parameters": parameters,
    });
    if let Some(h) = h {
        doc["bandwidth"] = json!(h);
    }
    let sides = serde_json::to_value(paired)?;
    if let Value::Object(map) = sides {
        for (k, v) in map {
            doc[k] = v;
        }
    }
    Ok(doc)
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<()> {
        self.writer.write_record(fields.into_iter().collect::<Vec<_>>())?;
        Ok(())
    }

    fn finish(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Validation(format!("csv buffer: {e}")))
    }
}

fn header(fixed: &[&str], rest: &[String]) -> Vec<String> {
    fixed
        .iter()
        .map(|s| s.to_string())
        .chain(rest.iter().cloned())
        .collect()
}

const SIDES: [&str; 2] = ["original", "synthetic"];

fn sides<T>(p: &Paired<T>) -> [(&'static str, &T); 2] {
    [(SIDES[0], &p.original), (SIDES[1], &p.synthetic)]
}

fn profile_csv(p: &Paired<ProfileSeries>) -> Result<Vec<u8>> {
    let with_ess = p.original.ess.is_some();
    let mut cols = p.original.columns.clone();
    if with_ess {
        cols.push("ess".into());
    }
    let mut t = Table::new(&header(&["side", "time"], &cols))?;
    for (side, s) in sides(p) {
        for (k, (time, row)) in s.grid.iter().zip(&s.values).enumerate() {
            let mut fields = vec![side.to_string(), time.to_string()];
            fields.extend(row.iter().map(f64::to_string));
            if let Some(ess) = &s.ess {
                fields.push(ess[k].to_string());
            }
            t.row(fields)?;
        }
    }
    t.finish()
}

fn variogram_csv(p: &Paired<VariogramSeries>) -> Result<Vec<u8>> {
    let mut t = Table::new(&header(&["side", "lag", "gamma"], &[]))?;
    for (side, s) in sides(p) {
        for (u, g) in s.lags.iter().zip(&s.gamma) {
            t.row([side.to_string(), u.to_string(), g.to_string()])?;
        }
    }
    t.finish()
}

fn rank_csv(p: &Paired<RankVariabilityDistribution>) -> Result<Vec<u8>> {
    let mut t = Table::new(&header(&["side", "subject_id", "value"], &[]))?;
    for (side, s) in sides(p) {
        for (id, v) in s.subjects.iter().zip(&s.values) {
            t.row([side.to_string(), id.clone(), v.to_string()])?;
        }
    }
    t.finish()
}

fn trajectories_csv(p: &Paired<TrajectoryPanel>) -> Result<Vec<u8>> {
    let mut t = Table::new(&header(&["side", "stratum", "subject_id", "time", "value"], &[]))?;
    for (side, panel) in sides(p) {
        for stratum in &panel.strata {
            for tr in &stratum.trajectories {
                for (time, v) in tr.times.iter().zip(&tr.values) {
                    t.row([
                        side.into(),
                        stratum.label.clone(),
                        tr.subject.clone(),
                        time.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
    }
    t.finish()
}

fn outliers_csv(p: &Paired<Vec<Outlier>>) -> Result<Vec<u8>> {
    let mut t = Table::new(&header(&["side", "subject_id", "time", "value", "direction"], &[]))?;
    for (side, list) in sides(p) {
        for o in list {
            let dir = serde_json::to_value(o.side)?.as_str().unwrap_or_default().to_string();
            t.row([
                side.into(),
                o.subject.clone(),
                o.time.to_string(),
                o.value.to_string(),
                dir,
            ])?;
        }
    }
    t.finish()
}

fn transitions_csv(p: &Paired<TransitionProfile>) -> Result<Vec<u8>> {
    let mut t = Table::new(&header(&["side", "time", "from", "to", "probability"], &[]))?;
    for (side, tp) in sides(p) {
        for (time, m) in tp.grid.iter().zip(&tp.matrices) {
            for (a, row) in m.iter().enumerate() {
                for b in 0..tp.classes.len() {
                    let prob = row.as_ref().map(|r| r[b].to_string()).unwrap_or_default();
                    t.row([
                        side.into(),
                        time.to_string(),
                        tp.classes[a].clone(),
                        tp.classes[b].clone(),
                        prob,
                    ])?;
                }
            }
        }
    }
    t.finish()
}

fn measurement_csv(m: &MeasurementReport) -> Result<Vec<u8>> {
    let mut t = Table::new(&header(&["block", "statistic", "mean", "sd", "subsample_size"], &[]))?;
    let blocks = std::iter::once(("comparison", &m.comparison)).chain(m.reference.as_ref().map(|r| ("reference", r)));
    for (name, b) in blocks {
        for (stat, s) in [
            ("similarity", b.similarity),
            ("frobenius", b.frobenius),
            ("dropout_divergence", b.dropout_divergence),
        ] {
            t.row([
                name.into(),
                stat.into(),
                s.mean.to_string(),
                s.sd.map(|v| v.to_string()).unwrap_or_default(),
                b.subsample_size.to_string(),
            ])?;
        }
    }
    t.finish()
}

struct Emitter<'a> {
    dir: PathBuf,
    variable: &'a str,
    written: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn put<T: Serialize>(
        &mut self,
        metric: &str,
        h: Option<f64>,
        parameters: Value,
        value: &T,
        csv: Result<Vec<u8>>,
    ) -> Result<()> {
        let name = stem(metric, h);
        let json_path = self.dir.join(format!("{name}.json"));
        write_json(&json_path, &document(self.variable, metric, h, parameters, value)?)?;
        let csv_path = self.dir.join(format!("{name}.csv"));
        write_atomic(&csv_path, &csv?)?;
        self.written.push(json_path);
        self.written.push(csv_path);
        Ok(())
    }
}

fn emit_smoothed(e: &mut Emitter, m: &SmoothedMetrics, report: &ComparisonReport) -> Result<()> {
    let h = Some(m.bandwidth);
    let cfg = &report.metadata.config;
    if let Some(p) = &m.mean {
        e.put("mean", h, json!({}), p, profile_csv(p))?;
    }
    if let Some(p) = &m.quantile {
        e.put("quantile", h, json!({ "levels": cfg.quantiles }), p, profile_csv(p))?;
    }
    if let Some(p) = &m.variance {
        e.put("variance", h, json!({}), p, profile_csv(p))?;
    }
    if let Some(p) = &m.variogram {
        let params = json!({
            "lag_bandwidth": m.variogram_bandwidth,
            "decomposition": m.decomposition,
        });
        e.put("variogram", h, params, p, variogram_csv(p))?;
    }
    if let Some(p) = &m.rank_variability {
        e.put(
            "rank_variability",
            h,
            json!({ "levels": cfg.quantiles }),
            p,
            rank_csv(p),
        )?;
    }
    if let Some(p) = &m.trajectories {
        let params = json!({
            "per_stratum": cfg.per_stratum,
            "seed": cfg.seed,
            "strata": if cfg.strata.is_some() { "external" } else { "baseline quantile class" },
        });
        e.put("trajectories", h, params, p, trajectories_csv(p))?;
    }
    if let Some(p) = &m.outliers {
        e.put("outliers", h, json!({ "band": cfg.outlier_band }), p, outliers_csv(p))?;
    }
    if let Some(p) = &m.class {
        e.put("class", h, json!({}), p, profile_csv(p))?;
    }
    if let Some(p) = &m.transitions {
        e.put(
            "transitions",
            h,
            json!({ "max_gap": cfg.max_gap }),
            p,
            transitions_csv(p),
        )?;
    }
    Ok(())
}

/// Writes every series document and table. An empty report produces
/// `metadata.json` only.
pub fn emit_series(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let meta = dir.join("metadata.json");
    write_json(&meta, &report.metadata)?;
    written.push(meta);
    if !report.failures.is_empty() {
        let path = dir.join("failures.json");
        write_json(&path, &report.failures)?;
        written.push(path);
    }
    if report.variables.is_empty() {
        return Ok(written);
    }
    let path = dir.join("report.json");
    write_json(&path, report)?;
    written.push(path);
    let path = dir.join("summary.json");
    write_json(&path, &summarize(report))?;
    written.push(path);
    for v in &report.variables {
        let mut e = Emitter {
            dir: dir.join(variable_dir(&v.variable)),
            variable: &v.variable,
            written: Vec::new(),
        };
        for m in &v.smoothed {
            emit_smoothed(&mut e, m, report)?;
        }
        if let Some(p) = &v.at_risk {
            e.put("at_risk", None, json!({}), p, profile_csv(p))?;
        }
        if let Some(m) = &v.measurement {
            let density = Paired {
                original: m.density_original.clone(),
                synthetic: m.density_synthetic.clone(),
            };
            e.put("density", None, json!({}), &density, profile_csv(&density))?;
            let params = json!({
                "iterations": m.iterations,
                "seed": m.seed,
                "epsilon": m.epsilon,
            });
            e.put("measurement", None, params, m, measurement_csv(m))?;
        }
        written.extend(e.written);
    }
    Ok(written)
}

/// A scalar with its reference counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: f64,
    pub sd: Option<f64>,
    pub reference: Option<f64>,
    pub reference_sd: Option<f64>,
    /// `value (reference r)` with two decimals.
    pub display: String,
}

impl Scalar {
    fn new(value: Summary, reference: Option<Summary>) -> Self {
        let display = match reference {
            Some(r) => format!("{:.2} (reference {:.2})", value.mean, r.mean),
            None => format!("{:.2}", value.mean),
        };
        Self {
            value: value.mean,
            sd: value.sd,
            reference: reference.map(|r| r.mean),
            reference_sd: reference.and_then(|r| r.sd),
            display,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: String,
    pub subsample_size: usize,
    pub reference_subsample_size: Option<usize>,
    pub iterations: usize,
    pub similarity: Scalar,
    pub frobenius: Scalar,
    pub dropout_divergence: Scalar,
}

pub fn summarize_measurement(variable: &str, m: &MeasurementReport) -> VariableSummary {
    let r = m.reference.as_ref();
    VariableSummary {
        variable: variable.to_string(),
        subsample_size: m.comparison.subsample_size,
        reference_subsample_size: r.map(|b| b.subsample_size),
        iterations: m.iterations,
        similarity: Scalar::new(m.comparison.similarity, r.map(|b| b.similarity)),
        frobenius: Scalar::new(m.comparison.frobenius, r.map(|b| b.frobenius)),
        dropout_divergence: Scalar::new(m.comparison.dropout_divergence, r.map(|b| b.dropout_divergence)),
    }
}

pub fn summarize(report: &ComparisonReport) -> Vec<VariableSummary> {
    report
        .variables
        .iter()
        .filter_map(|v| v.measurement.as_ref().map(|m| summarize_measurement(&v.variable, m)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub variable: String,
    pub subsample_size: usize,
    pub similarity: Scalar,
    pub frobenius: Scalar,
    pub dropout_divergence: Scalar,
}

fn reference_summary(variable: &str, b: &ProtocolBlock) -> ReferenceSummary {
    ReferenceSummary {
        variable: variable.to_string(),
        subsample_size: b.subsample_size,
        similarity: Scalar::new(b.similarity, None),
        frobenius: Scalar::new(b.frobenius, None),
        dropout_divergence: Scalar::new(b.dropout_divergence, None),
    }
}

pub fn summarize_reference(report: &ReferenceReport) -> Vec<ReferenceSummary> {
    report
        .variables
        .iter()
        .map(|e| reference_summary(&e.variable, &e.reference))
        .collect()
}

/// Writes `metadata.json`, `reference.json`, `summary.json` and, when
/// needed, `failures.json`.
pub fn emit_reference(report: &ReferenceReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let items: [(&str, Value); 3] = [
        ("metadata.json", serde_json::to_value(&report.metadata)?),
        ("reference.json", serde_json::to_value(report)?),
        ("summary.json", serde_json::to_value(summarize_reference(report))?),
    ];
    for (name, value) in items {
        let path = dir.join(name);
        write_json(&path, &value)?;
        written.push(path);
    }
    if !report.failures.is_empty() {
        let path = dir.join("failures.json");
        write_json(&path, &report.failures)?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<ComparisonReport> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChartOptions {
    pub free_y: bool,
    pub overlay: bool,
}

fn profile_lines(p: &ProfileSeries, dashed: bool) -> Vec<Line> {
    (0..p.columns.len())
        .map(|k| Line {
            color: k,
            dashed,
            points: p
                .grid
                .iter()
                .zip(&p.values)
                .map(|(t, row)| (*t, Some(row[k])))
                .collect(),
        })
        .collect()
}

fn legend(columns: &[String], options: ChartOptions) -> Vec<(String, usize, bool)> {
    let mut out = Vec::new();
    for (k, c) in columns.iter().enumerate() {
        if options.overlay {
            out.push((format!("{c} (original)"), k, false));
            out.push((format!("{c} (synthetic)"), k, true));
        } else if columns.len() > 1 {
            out.push((c.clone(), k, false));
        }
    }
    out
}

struct ChartSpec<'a> {
    title: String,
    x_label: &'a str,
    y_label: &'a str,
}

fn line_chart(spec: ChartSpec, sides: [Vec<Line>; 2], columns: &[String], options: ChartOptions) -> Chart {
    let [a, b] = sides;
    let panels = if options.overlay {
        let mut lines = a;
        lines.extend(b.into_iter().map(|l| Line { dashed: true, ..l }));
        vec![Panel::new("Original vs synthetic", PanelContent::Lines(lines))]
    } else {
        vec![
            Panel::new("Original", PanelContent::Lines(a)),
            Panel::new("Synthetic", PanelContent::Lines(b)),
        ]
    };
    Chart {
        title: spec.title,
        x_label: spec.x_label.into(),
        y_label: spec.y_label.into(),
        columns: panels.len(),
        panels,
        shared_axis: !options.free_y,
        legend: legend(columns, options),
    }
}

fn profile_chart(title: String, y_label: &str, p: &Paired<ProfileSeries>, options: ChartOptions) -> Chart {
    line_chart(
        ChartSpec {
            title,
            x_label: "time",
            y_label,
        },
        [profile_lines(&p.original, false), profile_lines(&p.synthetic, false)],
        &p.original.columns,
        options,
    )
}

fn stacked_chart(title: String, x: [&[f64]; 2], rows: [Vec<Option<Vec<f64>>>; 2], classes: &[String]) -> Chart {
    let [ra, rb] = rows;
    Chart {
        title,
        x_label: "time".into(),
        y_label: "share".into(),
        panels: vec![
            Panel::new(
                "Original",
                PanelContent::Stacked {
                    x: x[0].to_vec(),
                    rows: ra,
                },
            ),
            Panel::new(
                "Synthetic",
                PanelContent::Stacked {
                    x: x[1].to_vec(),
                    rows: rb,
                },
            ),
        ],
        shared_axis: true,
        columns: 2,
        legend: classes.iter().enumerate().map(|(k, c)| (c.clone(), k, false)).collect(),
    }
}

fn trajectory_chart(title: String, p: &Paired<TrajectoryPanel>, options: ChartOptions) -> Chart {
    let mut panels = Vec::new();
    for (side, panel) in sides(p) {
        for stratum in &panel.strata {
            let lines = stratum
                .trajectories
                .iter()
                .enumerate()
                .map(|(k, tr)| Line {
                    color: k,
                    dashed: false,
                    points: tr.times.iter().zip(&tr.values).map(|(t, v)| (*t, Some(*v))).collect(),
                })
                .collect();
            let side = if side == "original" { "Original" } else { "Synthetic" };
            panels.push(Panel::new(
                format!("{side} {} (n={})", stratum.label, stratum.size),
                PanelContent::Lines(lines),
            ));
        }
    }
    let columns = p.original.strata.len().max(1);
    Chart {
        title,
        x_label: "time".into(),
        y_label: "value".into(),
        panels,
        shared_axis: !options.free_y,
        columns,
        legend: Vec::new(),
    }
}

fn distribution_chart(title: String, p: &Paired<RankVariabilityDistribution>, options: ChartOptions) -> Chart {
    Chart {
        title,
        x_label: String::new(),
        y_label: "rank-order variability".into(),
        panels: vec![
            Panel::new(
                "Original",
                PanelContent::Distribution {
                    values: p.original.values.clone(),
                    color: 0,
                },
            ),
            Panel::new(
                "Synthetic",
                PanelContent::Distribution {
                    values: p.synthetic.values.clone(),
                    color: 0,
                },
            ),
        ],
        shared_axis: !options.free_y,
        columns: 2,
        legend: Vec::new(),
    }
}

fn charts_for(v: &VariableReport, options: ChartOptions) -> Vec<(String, Chart)> {
    let id = &v.variable;
    let mut out = Vec::new();
    for m in &v.smoothed {
        let h = m.bandwidth;
        let tag = |metric: &str| stem(metric, Some(h));
        if let Some(p) = &m.mean {
            out.push((
                tag("mean"),
                profile_chart(format!("{id}: mean (h={h})"), id, p, options),
            ));
        }
        if let Some(p) = &m.quantile {
            let mut chart = profile_chart(format!("{id}: quantiles (h={h})"), id, p, options);
            if let Some(o) = &m.outliers {
                let marks = |list: &[Outlier]| list.iter().map(|o| (o.time, o.value, 7)).collect::<Vec<_>>();
                if options.overlay {
                    chart.panels[0].markers = marks(&o.original);
                } else {
                    chart.panels[0].markers = marks(&o.original);
                    chart.panels[1].markers = marks(&o.synthetic);
                }
            }
            out.push((tag("quantile"), chart));
        }
        if let Some(p) = &m.variance {
            out.push((
                tag("variance"),
                profile_chart(format!("{id}: variance (h={h})"), "variance", p, options),
            ));
        }
        if let Some(p) = &m.variogram {
            let lines = |g: &VariogramSeries| {
                vec![Line {
                    color: 0,
                    dashed: false,
                    points: g.lags.iter().zip(&g.gamma).map(|(u, y)| (*u, Some(*y))).collect(),
                }]
            };
            let hv = m.variogram_bandwidth.unwrap_or(h);
            out.push((
                tag("variogram"),
                line_chart(
                    ChartSpec {
                        title: format!("{id}: variogram (lag h={hv})"),
                        x_label: "lag",
                        y_label: "semivariance",
                    },
                    [lines(&p.original), lines(&p.synthetic)],
                    &["gamma".to_string()],
                    options,
                ),
            ));
        }
        if let Some(p) = &m.rank_variability {
            out.push((
                tag("rank_variability"),
                distribution_chart(format!("{id}: rank-order variability (h={h})"), p, options),
            ));
        }
        if let Some(p) = &m.trajectories {
            out.push((
                tag("trajectories"),
                trajectory_chart(format!("{id}: trajectories (h={h})"), p, options),
            ));
        }
        if let Some(p) = &m.class {
            let chart = if options.overlay {
                profile_chart(format!("{id}: class profile (h={h})"), "share", p, options)
            } else {
                let rows = |s: &ProfileSeries| s.values.iter().cloned().map(Some).collect::<Vec<_>>();
                stacked_chart(
                    format!("{id}: class profile (h={h})"),
                    [&p.original.grid, &p.synthetic.grid],
                    [rows(&p.original), rows(&p.synthetic)],
                    &p.original.columns,
                )
            };
            out.push((tag("class"), chart));
        }
        if let Some(p) = &m.transitions {
            for (a, from) in p.original.classes.iter().enumerate() {
                out.push((
                    format!("{}.from-{}", tag("transitions"), variable_dir(from)),
                    stacked_chart(
                        format!("{id}: transitions from {from} (h={h})"),
                        [&p.original.grid, &p.synthetic.grid],
                        [p.original.row_series(a), p.synthetic.row_series(a)],
                        &p.original.classes,
                    ),
                ));
            }
        }
    }
    if let Some(p) = &v.at_risk {
        out.push((
            "at_risk".into(),
            profile_chart(format!("{id}: subjects at risk"), "share", p, options),
        ));
    }
    if let Some(m) = &v.measurement {
        let p = Paired {
            original: m.density_original.clone(),
            synthetic: m.density_synthetic.clone(),
        };
        out.push((
            "density".into(),
            profile_chart(format!("{id}: measurement density"), "share measured", &p, options),
        ));
    }
    out
}

/// Renders one SVG per chart next to the series documents.
pub fn render_charts(report: &ComparisonReport, dir: &Path, options: ChartOptions) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for v in &report.variables {
        let vdir = dir.join(variable_dir(&v.variable));
        for (name, chart) in charts_for(v, options) {
            let path = vdir.join(format!("{name}.svg"));
            write_atomic(&path, render(&chart).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}
