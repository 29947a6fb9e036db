use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    CategoryMap, Dataset, GroupAssignment, IdMap, Rating, RatingMatrix, TrustGraph, MAX_RATING,
    MIN_RATING,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub ratings: PathBuf,
    pub trust: PathBuf,
    pub groups: PathBuf,
    pub categories: PathBuf,
}

impl DatasetPaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            ratings: dir.join("ratings.txt"),
            trust: dir.join("trust.txt"),
            groups: dir.join("groups.txt"),
            categories: dir.join("categories.txt"),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.ratings, &self.trust, &self.groups, &self.categories]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDesignation {
    pub protected: String,
    pub unprotected: String,
}

impl Default for GroupDesignation {
    fn default() -> Self {
        Self {
            protected: "female".to_owned(),
            unprotected: "male".to_owned(),
        }
    }
}

/// Rows the loader accepted but did not turn into data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub ratings_header: bool,
    pub trust_self_loops: usize,
    pub trust_duplicates: usize,
    pub quarantined_trust_ids: usize,
    pub quarantined_trust_edges: usize,
    pub groups_unknown_users: usize,
    pub categories_unknown_items: usize,
    pub uncategorized_items: usize,
    pub ungrouped_users: usize,
}

fn read(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.strip_prefix('\u{feff}').map(str::to_owned).unwrap_or(text))
}

/// Non-blank lines as (1-based line number, fields). Fields are split on tabs
/// when the line has one, on commas otherwise.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(n, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            return None;
        }
        let sep = if line.contains('\t') { '\t' } else { ',' };
        Some((n + 1, line.split(sep).map(str::trim).collect()))
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

fn expect_fields<'a>(
    path: &Path,
    line: usize,
    fields: &[&'a str],
    min: usize,
    max: usize,
) -> Result<()> {
    if fields.len() < min || fields.len() > max {
        return Err(parse_err(
            path,
            line,
            format!("expected {min}..={max} fields, found {}", fields.len()),
        ));
    }
    if let Some(pos) = fields.iter().take(2).position(|f| f.is_empty()) {
        return Err(parse_err(path, line, format!("field {} is empty", pos + 1)));
    }
    Ok(())
}

fn load_ratings(path: &Path) -> Result<(RatingMatrix, bool)> {
    let text = read(path)?;
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut entries = Vec::new();
    let mut first_line: HashMap<(usize, usize), usize> = HashMap::new();
    let mut header = false;
    for (k, (line, fields)) in records(&text).enumerate() {
        expect_fields(path, line, &fields, 3, 3)?;
        let value = match fields[2].parse::<f64>() {
            Ok(v) => v,
            Err(_) if k == 0 => {
                header = true;
                continue;
            }
            Err(_) => {
                return Err(parse_err(
                    path,
                    line,
                    format!("rating {:?} is not a number", fields[2]),
                ))
            }
        };
        if !(MIN_RATING..=MAX_RATING).contains(&value) {
            return Err(Error::RatingOutOfRange {
                path: path.to_owned(),
                line,
                value,
            });
        }
        let user = users.get_or_insert(fields[0]);
        let item = items.get_or_insert(fields[1]);
        if let Some(&prev) = first_line.get(&(user, item)) {
            return Err(Error::DuplicateRating {
                path: path.to_owned(),
                user: fields[0].to_owned(),
                item: fields[1].to_owned(),
                first_line: prev,
                second_line: line,
            });
        }
        first_line.insert((user, item), line);
        entries.push(Rating { user, item, value });
    }
    if entries.is_empty() {
        return Err(Error::NoInteractions {
            path: path.to_owned(),
        });
    }
    Ok((RatingMatrix::new(users, items, entries)?, header))
}

fn load_trust(path: &Path, users: &IdMap, report: &mut LoadReport) -> Result<TrustGraph> {
    let text = read(path)?;
    let mut quarantined = IdMap::new();
    let mut raw = Vec::new();
    for (line, fields) in records(&text) {
        expect_fields(path, line, &fields, 2, 3)?;
        if let Some(v) = fields.get(2) {
            match v.parse::<f64>() {
                Ok(x) if x == 1.0 => {}
                _ => {
                    return Err(parse_err(
                        path,
                        line,
                        format!("trust value must be 1, found {v:?}"),
                    ))
                }
            }
        }
        let mut node = |id: &str| match users.index_of(id) {
            Some(u) => u,
            None => users.len() + quarantined.get_or_insert(id),
        };
        let a = node(fields[0]);
        let b = node(fields[1]);
        raw.push((a, b));
    }
    let (graph, loops, dups) = TrustGraph::new(users.len(), quarantined, raw);
    report.trust_self_loops = loops;
    report.trust_duplicates = dups;
    report.quarantined_trust_ids = graph.quarantined().len();
    report.quarantined_trust_edges = graph.quarantined_edge_count();
    Ok(graph)
}

fn load_groups(
    path: &Path,
    users: &IdMap,
    designation: &GroupDesignation,
    report: &mut LoadReport,
) -> Result<GroupAssignment> {
    let text = read(path)?;
    let mut labels: Vec<Option<String>> = vec![None; users.len()];
    let mut label_line = vec![0usize; users.len()];
    for (line, fields) in records(&text) {
        expect_fields(path, line, &fields, 2, 2)?;
        let Some(u) = users.index_of(fields[0]) else {
            report.groups_unknown_users += 1;
            continue;
        };
        match &labels[u] {
            Some(prev) if prev != fields[1] => {
                return Err(parse_err(
                    path,
                    line,
                    format!(
                        "user {:?} already labelled {prev:?} on line {}",
                        fields[0], label_line[u]
                    ),
                ))
            }
            Some(_) => {}
            None => {
                labels[u] = Some(fields[1].to_owned());
                label_line[u] = line;
            }
        }
    }
    let groups = GroupAssignment::new(&labels, &designation.protected, &designation.unprotected)
        .map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
            other => other,
        })?;
    report.ungrouped_users = groups.ungrouped_count();
    Ok(groups)
}

fn load_categories(path: &Path, items: &IdMap, report: &mut LoadReport) -> Result<CategoryMap> {
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (line, fields) in records(&text) {
        expect_fields(path, line, &fields, 2, 2)?;
        match items.index_of(fields[0]) {
            Some(i) => pairs.push((i, fields[1].to_owned())),
            None => report.categories_unknown_items += 1,
        }
    }
    let map = CategoryMap::new(items.len(), pairs);
    report.uncategorized_items = map.uncategorized().len();
    Ok(map)
}

/// Loads and cross-indexes the four input files.
pub fn load_dataset(paths: &DatasetPaths, designation: &GroupDesignation) -> Result<Dataset> {
    let mut report = LoadReport::default();
    let (ratings, header) = load_ratings(&paths.ratings)?;
    report.ratings_header = header;
    let trust = load_trust(&paths.trust, &ratings.users, &mut report)?;
    let groups = load_groups(&paths.groups, &ratings.users, designation, &mut report)?;
    let categories = load_categories(&paths.categories, &ratings.items, &mut report)?;
    Ok(Dataset {
        ratings,
        trust,
        groups,
        categories,
        report,
    })
}

impl Dataset {
    /// Writes the dataset back out in the tab-separated input format, in an
    /// order that reloads to the same index maps.
    pub fn write(&self, paths: &DatasetPaths) -> Result<()> {
        let users = &self.ratings.users;
        let items = &self.ratings.items;
        let mut ratings = String::new();
        for r in self.ratings.interactions().entries() {
            ratings.push_str(&format!(
                "{}\t{}\t{}\n",
                users.id(r.user),
                items.id(r.item),
                r.value
            ));
        }
        let node_id = |n: usize| -> &str {
            if n < users.len() {
                users.id(n)
            } else {
                self.trust.quarantined().id(n - users.len())
            }
        };
        let mut trust = String::new();
        for &(a, b) in self.trust.edges() {
            trust.push_str(&format!("{}\t{}\n", node_id(a), node_id(b)));
        }
        let mut groups = String::new();
        for u in 0..users.len() {
            if let Some(g) = self.groups.group_of(u) {
                groups.push_str(&format!("{}\t{}\n", users.id(u), self.groups.label(g)));
            }
        }
        let mut categories = String::new();
        for i in 0..items.len() {
            for &c in self.categories.categories_of(i) {
                categories.push_str(&format!("{}\t{}\n", items.id(i), self.categories.label(c)));
            }
        }
        for (path, body) in [
            (&paths.ratings, ratings),
            (&paths.trust, trust),
            (&paths.groups, groups),
            (&paths.categories, categories),
        ] {
            fs::write(path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}
