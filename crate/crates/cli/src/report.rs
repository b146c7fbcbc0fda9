//! Report rows, CSV/JSON/SVG rendering and all-or-nothing output writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gripdecode::eval::{AblationTable, MetricsReport, PairId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub combination: u8,
    pub pair: String,
    pub pipeline: String,
    pub model: String,
    pub n_test: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub f1: f64,
    pub chance_level: f64,
    pub above_chance: bool,
    pub class_dis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldRow {
    pub combination: u8,
    pub pair: String,
    pub pipeline: String,
    pub model: String,
    pub fold: usize,
    pub n_test: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub set_a: String,
    pub set_b: String,
    /// `all` or a model name.
    pub scope: String,
    pub n_paired: usize,
    pub wilcoxon_p: f64,
    pub reps: usize,
    pub subset: usize,
    /// Empty when the scope has fewer rows than the bootstrap subset.
    pub fraction_significant: Option<f64>,
    pub median_p: Option<f64>,
}

pub fn result_rows(combination: u8, reports: &[MetricsReport]) -> Vec<ResultRow> {
    reports
        .iter()
        .map(|r| ResultRow {
            combination,
            pair: r.pair.name(),
            pipeline: r.pipeline.name().to_string(),
            model: r.model.name().to_string(),
            n_test: r.n_test(),
            accuracy: r.mean.accuracy,
            precision: r.mean.precision,
            f1: r.mean.f1,
            chance_level: r.chance_level,
            above_chance: r.mean.accuracy > r.chance_level,
            class_dis: r.class_dis,
        })
        .collect()
}

pub fn fold_rows(combination: u8, reports: &[MetricsReport]) -> Vec<FoldRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.folds.iter().map(move |f| FoldRow {
                combination,
                pair: r.pair.name(),
                pipeline: r.pipeline.name().to_string(),
                model: r.model.name().to_string(),
                fold: f.fold,
                n_test: f.n_test,
                tp: f.confusion.tp,
                fp: f.confusion.fp,
                tn: f.confusion.tn,
                fn_: f.confusion.fn_,
                accuracy: f.metrics.accuracy,
                precision: f.metrics.precision,
                f1: f.metrics.f1,
            })
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PAIR_COLOURS: [&str; 6] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948"];

/// Grouped bar chart: one group per combination, one bar per pair showing
/// accuracy averaged over models.
pub fn ablation_svg(table: &AblationTable) -> String {
    let mut combos: Vec<u8> = table.rows.iter().map(|r| r.combination).collect();
    combos.dedup();
    let pairs: Vec<PairId> = PairId::ALL
        .into_iter()
        .filter(|p| table.rows.iter().any(|r| r.pair == *p))
        .collect();
    let (bar, gap, left, top, plot_h) = (14.0, 18.0, 50.0, 30.0, 240.0);
    let group_w = bar * pairs.len() as f64 + gap;
    let width = left + group_w * combos.len() as f64 + 160.0;
    let height = top + plot_h + 50.0;
    let y = |acc: f64| top + plot_h * (1.0 - acc);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"  <title>Mean accuracy per electrode combination</title>"#);
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r##"  <line x1="{left}" x2="{x2}" y1="{yy}" y2="{yy}" stroke="#ddd"/><text x="{tx}" y="{ty}" text-anchor="end">{tick:.2}</text>"##,
            x2 = left + group_w * combos.len() as f64,
            yy = y(tick),
            tx = left - 6.0,
            ty = y(tick) + 4.0,
        );
    }
    for (gi, c) in combos.iter().enumerate() {
        let x0 = left + gap / 2.0 + gi as f64 * group_w;
        let _ = writeln!(s, r#"  <g class="combination" data-combination="{c}">"#);
        for (pi, p) in pairs.iter().enumerate() {
            let acc: Vec<f64> = table
                .rows
                .iter()
                .filter(|r| r.combination == *c && r.pair == *p)
                .map(|r| r.accuracy)
                .collect();
            let mean = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
            let _ = writeln!(
                s,
                r#"    <rect class="bar" data-pair="{name}" x="{x:.1}" y="{yy:.3}" width="{bar}" height="{h:.3}" fill="{fill}"><title>{name}: {mean:.3}</title></rect>"#,
                name = escape(&p.name()),
                x = x0 + pi as f64 * bar,
                yy = y(mean),
                h = plot_h * mean,
                fill = PAIR_COLOURS[pi % PAIR_COLOURS.len()],
            );
        }
        let _ = writeln!(
            s,
            r#"    <text x="{x:.1}" y="{ty}" text-anchor="middle">{c}</text>"#,
            x = x0 + bar * pairs.len() as f64 / 2.0,
            ty = top + plot_h + 16.0,
        );
        let _ = writeln!(s, "  </g>");
    }
    let _ = writeln!(
        s,
        r#"  <text x="{x}" y="{ty}" text-anchor="middle">combination</text>"#,
        x = left + group_w * combos.len() as f64 / 2.0,
        ty = top + plot_h + 36.0,
    );
    let lx = left + group_w * combos.len() as f64 + 20.0;
    for (pi, p) in pairs.iter().enumerate() {
        let ly = top + 16.0 * pi as f64;
        let _ = writeln!(
            s,
            r#"  <rect x="{lx}" y="{ly}" width="10" height="10" fill="{fill}"/><text x="{tx}" y="{ty}">{name}</text>"#,
            fill = PAIR_COLOURS[pi % PAIR_COLOURS.len()],
            tx = lx + 14.0,
            ty = ly + 9.0,
            name = escape(&p.name()),
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Files are staged in memory and written only once everything succeeded,
/// each through a temporary sibling and a rename.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let tmp = path.with_file_name(format!(".{name}.partial"));
            std::fs::write(&tmp, &bytes).with_context(|| format!("writing {}", tmp.display()))?;
            std::fs::rename(&tmp, &path).with_context(|| format!("moving into {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}
