//! Report bundle: band selection, per-group category bias tables, the
//! nDCG frontier, and static SVG charts, all derived from a ledger directory.
//!
//! [`render`] is pure, so [`verify`] can rebuild a bundle from the ledger
//! and compare it byte for byte with what is on disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{frontier, select_equal_ndcg, Bands, FrontierPoint, Ledger, Selection, SelectionStatus};
use crate::metrics::{reported_disparity, CategoryBiasRecord, CategoryRanking};
use crate::models::{Algorithm, Family};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub bands: Bands,
    pub top_categories: usize,
    pub ranking: CategoryRanking,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            bands: Bands::default(),
            top_categories: 10,
            ranking: CategoryRanking::PreferenceRatio,
        }
    }
}

impl ReportOptions {
    /// Defaults with the bands recorded by the sweep in `ledger_dir`, if any.
    pub fn for_ledger(ledger_dir: &Path) -> Result<Self> {
        let mut opts = Self::default();
        let manifest = ledger_dir.join("sweep.json");
        if manifest.exists() {
            let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            if let Some(b) = v.pointer("/config/bands") {
                opts.bands = serde_json::from_value(b.clone())?;
            }
        }
        Ok(opts)
    }
}

/// One cell group of a bias chart: a selected algorithm on one of a group's
/// top categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub family: Family,
    pub group: String,
    pub rank: usize,
    pub category: String,
    pub algorithm: Algorithm,
    pub params: String,
    pub ndcg: f64,
    pub pr_train: Option<f64>,
    pub bias_train: Option<f64>,
    pub bias_recs: Option<f64>,
    pub disparity: Option<f64>,
    /// Smallest |disparity| among the family's algorithms for this group
    /// and category.
    pub lowest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub options: ReportOptions,
    pub dataset: Option<serde_json::Value>,
    pub selections: Vec<Selection>,
    pub bias_table: Vec<BiasRow>,
    pub frontier: Vec<FrontierPoint>,
}

impl ReportBundle {
    pub fn excluded(&self) -> impl Iterator<Item = &Selection> {
        self.selections.iter().filter(|s| s.selected().is_none())
    }
}

/// Categories per group ordered by training preference, from the first
/// completed aggregate (all share the same folds).
fn ranked_categories(ledger: &Ledger, opts: &ReportOptions) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<&CategoryBiasRecord>> = BTreeMap::new();
    if let Some(agg) = ledger.completed_aggregates().next() {
        for rec in &agg.mean().expect("completed").categories {
            out.entry(rec.group.clone()).or_default().push(rec);
        }
    }
    out.into_iter()
        .map(|(group, mut recs)| {
            let key = |r: &CategoryBiasRecord| {
                match opts.ranking {
                    CategoryRanking::PreferenceRatio => r.pr_train,
                    CategoryRanking::Bias => r.bias_train,
                }
                .unwrap_or(0.0)
            };
            recs.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.category.cmp(&b.category)));
            let top = recs
                .into_iter()
                .take(opts.top_categories)
                .map(|r| r.category.clone())
                .collect();
            (group, top)
        })
        .collect()
}

pub fn build_report(ledger_dir: &Path, opts: &ReportOptions) -> Result<ReportBundle> {
    let ledger = Ledger::load(ledger_dir)?;
    let selections = select_equal_ndcg(&ledger.aggregates, &opts.bands)?;
    let summary_path = ledger_dir.join("dataset_summary.json");
    let dataset = if summary_path.exists() {
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };

    let ranked = ranked_categories(&ledger, opts);
    let mut bias_table = Vec::new();
    for family in [Family::ModelBased, Family::Neighborhood] {
        let chosen: Vec<(&Selection, _)> = selections
            .iter()
            .filter(|s| s.family == family)
            .filter_map(|s| {
                let point = s.selected()?;
                let agg = ledger.aggregates.iter().find(|a| a.key == point.key)?;
                Some((s, agg))
            })
            .collect();
        for (group, categories) in &ranked {
            for (rank, category) in categories.iter().enumerate() {
                let start = bias_table.len();
                for (sel, agg) in &chosen {
                    let rec = agg
                        .mean()
                        .expect("selected points are completed")
                        .categories
                        .iter()
                        .find(|r| &r.group == group && &r.category == category)
                        .ok_or_else(|| {
                            Error::Validation(format!("{}: no record for {group}/{category}", agg.key))
                        })?;
                    bias_table.push(BiasRow {
                        family,
                        group: group.clone(),
                        rank: rank + 1,
                        category: category.clone(),
                        algorithm: sel.algorithm,
                        params: agg.params.canonical(),
                        ndcg: sel.selected().expect("chosen").ndcg,
                        pr_train: rec.pr_train,
                        bias_train: rec.bias_train,
                        bias_recs: rec.bias_recs,
                        disparity: reported_disparity(rec.bias_train, rec.bias_recs),
                        lowest: false,
                    });
                }
                let cell = &mut bias_table[start..];
                let min = cell
                    .iter()
                    .filter_map(|r| r.disparity.map(f64::abs))
                    .min_by(f64::total_cmp);
                if let Some(min) = min {
                    for r in cell.iter_mut() {
                        r.lowest = r.disparity.map(f64::abs) == Some(min);
                    }
                }
            }
        }
    }

    Ok(ReportBundle {
        options: opts.clone(),
        dataset,
        selections,
        bias_table,
        frontier: frontier(&ledger.aggregates),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| x.to_string())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let err = |e: csv::Error| Error::Validation(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Validation(format!("csv: {e}")))
}

pub const BIAS_TABLE_HEADER: [&str; 12] = [
    "family", "group", "rank", "category", "algorithm", "params", "ndcg", "pr_train", "bias_train", "bias_recs", "disparity", "lowest",
];

/// File name to content for every file of the bundle.
pub fn render(bundle: &ReportBundle) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();

    let rows = bundle.bias_table.iter().map(|r| {
        vec![
            r.family.to_string(),
            r.group.clone(),
            r.rank.to_string(),
            r.category.clone(),
            r.algorithm.name().to_owned(),
            r.params.clone(),
            r.ndcg.to_string(),
            opt(r.pr_train),
            opt(r.bias_train),
            opt(r.bias_recs),
            opt(r.disparity),
            if r.lowest { "*".to_owned() } else { String::new() },
        ]
    });
    files.insert("bias_table.csv".to_owned(), csv_bytes(&BIAS_TABLE_HEADER, rows)?);

    let rows = bundle.selections.iter().map(|s| {
        let (status, point) = match &s.status {
            SelectionStatus::Selected { point } => ("selected", Some(point)),
            SelectionStatus::Excluded { closest } => ("excluded", closest.as_ref()),
        };
        vec![
            s.family.to_string(),
            s.algorithm.name().to_owned(),
            status.to_owned(),
            s.band.center.to_string(),
            s.band.halfwidth.to_string(),
            point.map(|p| p.params.canonical()).unwrap_or_default(),
            opt(point.map(|p| p.ndcg)),
            opt(point.map(|p| p.coverage)),
            opt(point.and_then(|p| p.average_disparity)),
        ]
    });
    let header = ["family", "algorithm", "status", "band_center", "band_halfwidth", "params", "ndcg", "coverage", "average_disparity"];
    files.insert("selection.csv".to_owned(), csv_bytes(&header, rows)?);

    let rows = bundle.frontier.iter().map(|f| {
        vec![
            f.algorithm.name().to_owned(),
            f.family.to_string(),
            f.best.params.canonical(),
            f.best.ndcg.to_string(),
            f.best.coverage.to_string(),
            opt(f.best.average_disparity),
            f.worst.params.canonical(),
            f.worst.ndcg.to_string(),
            f.worst.coverage.to_string(),
            opt(f.worst.average_disparity),
        ]
    });
    let header = [
        "algorithm", "family", "best_params", "best_ndcg", "best_coverage", "best_average_disparity",
        "worst_params", "worst_ndcg", "worst_coverage", "worst_average_disparity",
    ];
    files.insert("frontier.csv".to_owned(), csv_bytes(&header, rows)?);

    let mut json = serde_json::to_string_pretty(bundle)?;
    json.push('\n');
    files.insert("report.json".to_owned(), json.into_bytes());

    let mut charts: BTreeMap<(Family, &str), Vec<&BiasRow>> = BTreeMap::new();
    for r in &bundle.bias_table {
        charts.entry((r.family, &r.group)).or_default().push(r);
    }
    for ((family, group), rows) in charts {
        let name = format!("bias_{family}_{}.svg", file_safe(group));
        files.insert(name, svg_chart(&format!("{family} / {group}"), &rows).into_bytes());
    }
    Ok(files)
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7"];

/// Grouped bars of recommendation bias per category, one bar per
/// algorithm, each labelled with its disparity; a tick marks training bias.
fn svg_chart(title: &str, rows: &[&BiasRow]) -> String {
    let mut categories: Vec<(usize, &str)> = rows.iter().map(|r| (r.rank, r.category.as_str())).collect();
    categories.sort();
    categories.dedup();
    let mut algorithms: Vec<Algorithm> = rows.iter().map(|r| r.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();

    let (bar, gap, left, top, height) = (18.0, 16.0, 50.0, 40.0, 260.0);
    let group_w = bar * algorithms.len() as f64 + gap;
    let width = left + group_w * categories.len() as f64 + 20.0;
    let legend_y = top + height + 90.0;
    let total_h = legend_y + 20.0 * algorithms.len() as f64 + 10.0;
    let max = rows
        .iter()
        .flat_map(|r| [r.bias_recs, r.bias_train])
        .flatten()
        .fold(1.0f64, f64::max)
        * 1.15;
    let y = |v: f64| top + height - v / max * height;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{total_h:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="13">{}</text>"#, xml_escape(title));
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000"/>"##,
        y(0.0),
        width - 10.0,
        y(0.0)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        y(1.0),
        width - 10.0,
        y(1.0)
    );
    let _ = writeln!(s, r#"<text x="4" y="{:.2}">1.0</text>"#, y(1.0) + 3.0);
    for (ci, (_, cat)) in categories.iter().enumerate() {
        let x0 = left + ci as f64 * group_w + gap / 2.0;
        for (ai, alg) in algorithms.iter().enumerate() {
            let Some(r) = rows.iter().find(|r| r.algorithm == *alg && r.category == *cat) else { continue };
            let x = x0 + ai as f64 * bar;
            let v = r.bias_recs.unwrap_or(0.0);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                y(v),
                bar - 2.0,
                y(0.0) - y(v),
                PALETTE[ai % PALETTE.len()]
            );
            let label = r.disparity.map_or_else(|| "n/a".to_owned(), |d| format!("{d:.2}"));
            let weight = if r.lowest { "bold" } else { "normal" };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="8" font-weight="{weight}" transform="rotate(-90 {:.2} {:.2})">{label}</text>"#,
                x + bar / 2.0 + 3.0,
                y(v) - 3.0,
                x + bar / 2.0 + 3.0,
                y(v) - 3.0
            );
        }
        if let Some(bt) = rows.iter().find(|r| r.category == *cat).and_then(|r| r.bias_train) {
            let _ = writeln!(
                s,
                r##"<line x1="{x0:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000" stroke-width="2"/>"##,
                y(bt),
                x0 + bar * algorithms.len() as f64 - 2.0,
                y(bt)
            );
        }
        let lx = x0 + bar * algorithms.len() as f64 / 2.0;
        let ly = y(0.0) + 10.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-45 {lx:.2} {ly:.2})">{}</text>"#,
            xml_escape(cat)
        );
    }
    for (ai, alg) in algorithms.iter().enumerate() {
        let ly = legend_y + 20.0 * ai as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{:.2}" width="12" height="12" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            ly - 10.0,
            PALETTE[ai % PALETTE.len()],
            left + 18.0,
            ly,
            xml_escape(alg.name())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the bundle; returns the written paths.
pub fn write_report(bundle: &ReportBundle, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    render(bundle)?
        .into_iter()
        .map(|(name, bytes)| {
            let path = out.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyOutcome {
    pub files_checked: usize,
    pub cells_checked: usize,
    pub mismatches: Vec<String>,
}

impl VerifyOutcome {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, String> {
    if s == "n/a" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| format!("bad number {s:?}"))
}

/// Checks every disparity cell of a bias table against its bias columns.
pub fn check_bias_table(bytes: &[u8]) -> (usize, Vec<String>) {
    let mut problems = Vec::new();
    let mut cells = 0;
    let mut r = csv::Reader::from_reader(bytes);
    for (n, row) in r.records().enumerate() {
        let line = n + 2;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                problems.push(format!("bias_table.csv:{line}: {e}"));
                continue;
            }
        };
        let field = |name: &str| {
            let idx = BIAS_TABLE_HEADER.iter().position(|h| *h == name).expect("known column");
            parse_opt(row.get(idx).unwrap_or(""))
        };
        match (field("bias_train"), field("bias_recs"), field("disparity")) {
            (Ok(bt), Ok(br), Ok(bd)) => {
                cells += 1;
                let expected = reported_disparity(bt, br);
                if expected.map(f64::to_bits) != bd.map(f64::to_bits) {
                    problems.push(format!("bias_table.csv:{line}: disparity {} but biases give {}", opt(bd), opt(expected)));
                }
            }
            (a, b, c) => {
                for e in [a.err(), b.err(), c.err()].into_iter().flatten() {
                    problems.push(format!("bias_table.csv:{line}: {e}"));
                }
            }
        }
    }
    (cells, problems)
}

/// Rebuilds the report in `report_dir` from `ledger_dir` with the options
/// stored in its `report.json`, and diffs every file.
pub fn verify(ledger_dir: &Path, report_dir: &Path) -> Result<VerifyOutcome> {
    let manifest = report_dir.join("report.json");
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let stored: ReportBundle = serde_json::from_str(&text)?;
    let expected = render(&build_report(ledger_dir, &stored.options)?)?;
    let mut out = VerifyOutcome::default();
    for (name, bytes) in &expected {
        out.files_checked += 1;
        let path = report_dir.join(name);
        match fs::read(&path) {
            Ok(actual) if actual == *bytes => {}
            Ok(_) => out.mismatches.push(format!("{name}: differs from the ledger-derived version")),
            Err(_) => out.mismatches.push(format!("{name}: missing")),
        }
    }
    if let Ok(actual) = fs::read(report_dir.join("bias_table.csv")) {
        let (cells, problems) = check_bias_table(&actual);
        out.cells_checked = cells;
        out.mismatches.extend(problems);
    }
    Ok(out)
}
