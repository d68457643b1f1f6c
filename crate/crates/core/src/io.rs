//! CSV and JSON file formats.
//!
//! Item and annotator identifiers are free-form strings, mapped to dense
//! indices in order of first appearance. Loading a dataset runs the response,
//! truth and constraint files through one shared item registry, so an item
//! that only appears in the truth or constraint file still gets an index.
//! Labels are 1-based in files.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, LabelConstraints};
use crate::model::{GroundTruth, IdIndex, PriorConfig, Response, ResponseMatrix};
use crate::numerics::Real;
use crate::selection::QueryPlan;
use crate::{Error, Result};

pub const RESPONSES_HEADER: [&str; 3] = ["item", "annotator", "label"];
pub const TRUTH_HEADER: [&str; 2] = ["item", "label"];
pub const CONSTRAINTS_HEADER: [&str; 3] = ["kind", "a", "b"];

fn format_err(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: source.to_owned(),
        line,
        message: message.into(),
    }
}

/// Iterates data records after checking the header, yielding (line, record).
fn records<R: Read>(
    reader: R,
    source: &str,
    header: &[&str],
) -> Result<impl Iterator<Item = Result<(u64, StringRecord)>>> {
    let mut rdr = ReaderBuilder::new().trim(Trim::All).from_reader(reader);
    let found = rdr
        .headers()
        .map_err(|e| format_err(source, 1, e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(format_err(
            source,
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let source = source.to_owned();
    Ok(rdr.into_records().map(move |rec| match rec {
        Ok(r) => {
            let line = r.position().map_or(0, |p| p.line());
            Ok((line, r))
        }
        Err(e) => {
            let line = e.position().map_or(0, |p| p.line());
            Err(format_err(&source, line, e.to_string()))
        }
    }))
}

/// Parses a 1-based class label; `Ok(None)` for the blank or 0 no-response marker.
fn parse_label(field: &str, n_classes: Option<usize>) -> std::result::Result<Option<usize>, String> {
    if field.is_empty() {
        return Ok(None);
    }
    let v: usize = field
        .parse()
        .map_err(|_| format!("label `{field}` is not a non-negative integer"))?;
    if v == 0 {
        return Ok(None);
    }
    if let Some(k) = n_classes {
        if v > k {
            return Err(format!("label {v} outside 1..{k}"));
        }
    }
    Ok(Some(v - 1))
}

fn required_label(field: &str, n_classes: Option<usize>) -> std::result::Result<usize, String> {
    parse_label(field, n_classes)?.ok_or_else(|| format!("label `{field}` must be at least 1"))
}

fn nonempty<'a>(field: &'a str, what: &str) -> std::result::Result<&'a str, String> {
    if field.is_empty() {
        Err(format!("empty {what}"))
    } else {
        Ok(field)
    }
}

/// Parses a responses CSV (`item,annotator,label`).
///
/// Rows with a blank or 0 label are skipped. Returned labels are 0-based.
pub fn parse_responses<R: Read>(
    reader: R,
    source: &str,
    items: &mut IdIndex,
    annotators: &mut IdIndex,
    n_classes: Option<usize>,
) -> Result<Vec<Response>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in records(reader, source, &RESPONSES_HEADER)? {
        let (line, r) = rec?;
        let err = |m: String| format_err(source, line, m);
        let item = nonempty(&r[0], "item id").map_err(err)?;
        let annotator = nonempty(&r[1], "annotator id").map_err(err)?;
        let Some(label) = parse_label(&r[2], n_classes).map_err(err)? else {
            continue;
        };
        let (n, m) = (items.intern(item), annotators.intern(annotator));
        if !seen.insert((n, m)) {
            return Err(err(format!(
                "second response of annotator `{annotator}` on item `{item}`"
            )));
        }
        out.push(Response {
            item: n,
            annotator: m,
            label,
        });
    }
    Ok(out)
}

/// Parses a truth CSV (`item,label`) into (item, 0-based class) pairs.
pub fn parse_truth<R: Read>(
    reader: R,
    source: &str,
    items: &mut IdIndex,
    n_classes: Option<usize>,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in records(reader, source, &TRUTH_HEADER)? {
        let (line, r) = rec?;
        let err = |m: String| format_err(source, line, m);
        let item = nonempty(&r[0], "item id").map_err(err)?;
        let label = required_label(&r[1], n_classes).map_err(err)?;
        let n = items.intern(item);
        if !seen.insert(n) {
            return Err(err(format!("item `{item}` listed twice")));
        }
        out.push((n, label));
    }
    Ok(out)
}

/// Contents of a constraints CSV, in item indices and 0-based classes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintRecords {
    pub must_link: Vec<(usize, usize)>,
    pub cannot_link: Vec<(usize, usize)>,
    pub labels: Vec<(usize, usize)>,
    /// Unanswered QUERY rows.
    pub queries: Vec<(usize, usize)>,
}

impl ConstraintRecords {
    /// The instance-level constraints, unclosed.
    pub fn constraint_set(&self) -> Result<ConstraintSet> {
        ConstraintSet::from_pairs(self.must_link.iter().copied(), self.cannot_link.iter().copied())
    }

    pub fn label_constraints(&self) -> Result<LabelConstraints> {
        LabelConstraints::from_pairs(self.labels.iter().copied())
    }

    pub fn max_label(&self) -> Option<usize> {
        self.labels.iter().map(|&(_, c)| c).max()
    }
}

/// Parses a constraints CSV (`kind,a,b` with kinds ML, CL, LABEL, QUERY).
pub fn parse_constraints<R: Read>(
    reader: R,
    source: &str,
    items: &mut IdIndex,
    n_classes: Option<usize>,
) -> Result<ConstraintRecords> {
    let mut out = ConstraintRecords::default();
    for rec in records(reader, source, &CONSTRAINTS_HEADER)? {
        let (line, r) = rec?;
        let err = |m: String| format_err(source, line, m);
        let a = nonempty(&r[1], "item id").map_err(err)?;
        let kind = r[0].to_ascii_uppercase();
        if kind == "LABEL" {
            let class = required_label(&r[2], n_classes).map_err(err)?;
            out.labels.push((items.intern(a), class));
            continue;
        }
        let b = nonempty(&r[2], "item id").map_err(err)?;
        if a == b {
            return Err(err(format!("{kind} pair links item `{a}` to itself")));
        }
        let pair = (items.intern(a), items.intern(b));
        match kind.as_str() {
            "ML" => out.must_link.push(pair),
            "CL" => out.cannot_link.push(pair),
            "QUERY" => out.queries.push(pair),
            _ => return Err(err(format!("unknown constraint kind `{}`", &r[0]))),
        }
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    Ok(File::open(path)?)
}

fn name(path: &Path) -> String {
    path.display().to_string()
}

/// Everything loaded for one run, on a shared item registry.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub responses: ResponseMatrix,
    pub truth: Option<GroundTruth>,
    pub constraints: Option<ConstraintRecords>,
    pub items: IdIndex,
    pub annotators: IdIndex,
    pub n_classes: usize,
    /// Largest label seen in any file (1-based); differs from `n_classes`
    /// when K was configured above it.
    pub max_observed_label: usize,
}

impl Dataset {
    /// True when a configured K exceeds every observed label.
    pub fn k_mismatch(&self) -> bool {
        self.max_observed_label != self.n_classes
    }
}

/// Loads responses plus optional truth and constraint files.
///
/// K is `n_classes` if given (labels above it are errors), else the largest
/// label found in any of the files.
pub fn load_dataset(
    responses: &Path,
    truth: Option<&Path>,
    constraints: Option<&Path>,
    n_classes: Option<usize>,
) -> Result<Dataset> {
    let mut items = IdIndex::new();
    let mut annotators = IdIndex::new();
    let resp = parse_responses(open(responses)?, &name(responses), &mut items, &mut annotators, n_classes)?;
    let truth_pairs = truth
        .map(|p| parse_truth(open(p)?, &name(p), &mut items, n_classes))
        .transpose()?;
    let cons = constraints
        .map(|p| parse_constraints(open(p)?, &name(p), &mut items, n_classes))
        .transpose()?;

    let max_label = resp
        .iter()
        .map(|r| r.label)
        .chain(truth_pairs.iter().flatten().map(|&(_, c)| c))
        .chain(cons.iter().filter_map(ConstraintRecords::max_label))
        .max()
        .map_or(0, |c| c + 1);
    let k = match n_classes {
        Some(k) => {
            if max_label != k {
                log::warn!("configured K = {k} but the largest label seen is {max_label}");
            }
            k
        }
        None => max_label,
    };
    if k < 2 {
        return Err(Error::domain(format!("need at least 2 classes, found K = {k}")));
    }
    let n = items.len();
    let rm = ResponseMatrix::new(n, annotators.len(), k, resp)?;
    let truth = truth_pairs
        .map(|pairs| {
            let mut labels = vec![None; n];
            for (i, c) in pairs {
                labels[i] = Some(c);
            }
            GroundTruth::new(labels, k)
        })
        .transpose()?;
    Ok(Dataset {
        responses: rm,
        truth,
        constraints: cons,
        items,
        annotators,
        n_classes: k,
        max_observed_label: max_label,
    })
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new().from_writer(w)
}

pub fn write_responses<W: Write>(w: W, rm: &ResponseMatrix, items: &IdIndex, annotators: &IdIndex) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(RESPONSES_HEADER)?;
    for r in rm.responses() {
        let label = (r.label + 1).to_string();
        wtr.write_record([items.id(r.item), annotators.id(r.annotator), &label])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes every item with known truth.
pub fn write_truth<W: Write>(w: W, truth: &GroundTruth, items: &IdIndex) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(TRUTH_HEADER)?;
    for (n, y) in truth.labels().iter().enumerate() {
        if let Some(y) = y {
            wtr.write_record([items.id(n), &(y + 1).to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes ML, CL and LABEL rows.
pub fn write_constraints<W: Write>(
    w: W,
    cs: &ConstraintSet,
    labels: &LabelConstraints,
    items: &IdIndex,
) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(CONSTRAINTS_HEADER)?;
    for p in cs.must_link() {
        wtr.write_record(["ML", items.id(p.first()), items.id(p.second())])?;
    }
    for p in cs.cannot_link() {
        wtr.write_record(["CL", items.id(p.first()), items.id(p.second())])?;
    }
    for (n, c) in labels.iter() {
        wtr.write_record(["LABEL", items.id(n), &(c + 1).to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a query plan as QUERY rows for answering outside the program.
pub fn write_query_plan<W: Write>(w: W, plan: &QueryPlan, items: &IdIndex) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(CONSTRAINTS_HEADER)?;
    for &(a, b) in &plan.queries {
        wtr.write_record(["QUERY", items.id(a), items.id(b)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Priors file: `{"alpha0": [..K], "beta0": K×K or M×K×K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct PriorFile<F: Real> {
    pub alpha0: Vec<F>,
    pub beta0: Beta0File<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real", untagged)]
pub enum Beta0File<F: Real> {
    Shared(Vec<Vec<F>>),
    PerAnnotator(Vec<Vec<Vec<F>>>),
}

impl<F: Real> PriorFile<F> {
    pub fn into_config(self) -> Result<PriorConfig<F>> {
        let k = self.alpha0.len();
        let square = |rows: &Vec<Vec<F>>| rows.len() == k && rows.iter().all(|r| r.len() == k);
        match self.beta0 {
            Beta0File::Shared(rows) => {
                if !square(&rows) {
                    return Err(Error::domain(format!("beta0 must be {k}×{k}")));
                }
                PriorConfig::shared(self.alpha0, rows.concat())
            }
            Beta0File::PerAnnotator(mats) => {
                if !mats.iter().all(square) {
                    return Err(Error::domain(format!("every beta0 matrix must be {k}×{k}")));
                }
                let m = mats.len();
                PriorConfig::per_annotator(self.alpha0, mats.concat().concat(), m)
            }
        }
    }
}

pub fn read_priors<F: Real>(path: &Path) -> Result<PriorConfig<F>> {
    let file: PriorFile<F> = serde_json::from_reader(std::io::BufReader::new(open(path)?))?;
    file.into_config()
}

/// 1-based labels keyed by item id, as stored in result files.
pub fn labels_by_id(labels: &[usize], items: &IdIndex) -> BTreeMap<String, usize> {
    labels
        .iter()
        .enumerate()
        .map(|(n, &c)| (items.id(n).to_owned(), c + 1))
        .collect()
}
