//! Reading labeled samples and writing result tables.
//!
//! CSV input needs a header row. Each mapped column becomes one dimension, in
//! mapping order; other columns are ignored. Row numbers in diagnostics count
//! the header as row 1.
//!
//! The OpenLABEL reader honors a small subset of the format: every frame in
//! `openlabel.frames` yields one point, with coordinates taken from the
//! `object_data.num` entries (`{"name", "val"}`) of the frame's objects and
//! the label from the boolean `frame_properties.ood` (absent means ID).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernel::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub dimension_columns: Vec<String>,
    /// Column holding the ID/OOD label. If it is `None`, or the file has no
    /// such column, every row is ID.
    #[serde(default = "default_label_column")]
    pub label_column: Option<String>,
    #[serde(default = "default_id_label")]
    pub id_label: String,
    #[serde(default = "default_ood_label")]
    pub ood_label: String,
}

fn default_label_column() -> Option<String> {
    Some("label".into())
}

fn default_id_label() -> String {
    "id".into()
}

fn default_ood_label() -> String {
    "ood".into()
}

impl ColumnMapping {
    pub fn new<S: Into<String>>(dimension_columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            dimension_columns: dimension_columns.into_iter().map(Into::into).collect(),
            label_column: default_label_column(),
            id_label: default_id_label(),
            ood_label: default_ood_label(),
        }
    }

    /// Every header column except `label` becomes a dimension, in header order.
    pub fn infer(header: &[String]) -> Self {
        let label = default_label_column();
        Self::new(header.iter().filter(|h| Some(*h) != label.as_ref()).cloned())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension_columns.is_empty() {
            return Err(Error::InvalidConfig("no dimension columns mapped".into()));
        }
        for (i, c) in self.dimension_columns.iter().enumerate() {
            if self.dimension_columns[..i].contains(c) {
                return Err(Error::InvalidConfig(format!("column {c:?} is mapped twice")));
            }
        }
        if self.label_column.as_ref().is_some_and(|l| self.dimension_columns.contains(l)) {
            return Err(Error::InvalidConfig("the label column is also a dimension column".into()));
        }
        if self.id_label == self.ood_label {
            return Err(Error::InvalidConfig("id_label and ood_label must differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub point: Vec<f64>,
    pub ood: bool,
}

fn located(source: &str, row: u64, column: &str, message: impl Into<String>) -> Error {
    Error::parse(format!("{source}: row {row}, column {column}"), message)
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::parse(format!("{source}: line {}", p.line()), e.to_string()),
        None => Error::parse(source.to_string(), e.to_string()),
    }
}

fn parse_real(cell: &str) -> std::result::Result<f64, String> {
    let v: f64 = cell.parse().map_err(|_| format!("{cell:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{cell:?} is not finite"));
    }
    Ok(v)
}

/// Labeled rows in file order. `source` names the input in diagnostics.
pub fn read_labeled_csv<R: Read>(reader: R, mapping: &ColumnMapping, source: &str) -> Result<Vec<LabeledPoint>> {
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let columns = mapping
        .dimension_columns
        .iter()
        .map(|c| find(c).ok_or_else(|| Error::parse(format!("{source}: header"), format!("missing column {c:?}"))))
        .collect::<Result<Vec<usize>>>()?;
    let label = mapping.label_column.as_deref().and_then(|l| find(l).map(|i| (i, l)));

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let row = i as u64 + 2;
        let point = columns
            .iter()
            .zip(&mapping.dimension_columns)
            .map(|(&c, name)| parse_real(&record[c]).map_err(|m| located(source, row, name, m)))
            .collect::<Result<Vec<f64>>>()?;
        let ood = match label {
            None => false,
            Some((c, name)) => {
                let v = &record[c];
                if v == mapping.id_label {
                    false
                } else if v == mapping.ood_label {
                    true
                } else {
                    return Err(located(source, row, name, format!("unknown label {v:?}")));
                }
            }
        };
        out.push(LabeledPoint { point, ood });
    }
    Ok(out)
}

fn into_dataset(rows: Vec<LabeledPoint>, mapping: &ColumnMapping) -> Result<Dataset> {
    let (ood, id): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.ood);
    Dataset::new(
        mapping.dimension_columns.len(),
        id.into_iter().map(|r| r.point).collect(),
        ood.into_iter().map(|r| r.point).collect(),
    )?
    .with_names(mapping.dimension_columns.clone())
}

pub fn parse_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    into_dataset(read_labeled_csv(file, mapping, &path.display().to_string())?, mapping)
}

pub fn read_csv_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(std::fs::File::open(path)?);
    let source = path.display().to_string();
    Ok(rdr.headers().map_err(|e| csv_error(&source, e))?.iter().map(String::from).collect())
}

/// Unlabeled points from the named columns, in file order.
pub fn read_points_csv(path: impl AsRef<Path>, columns: &[String]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut mapping = ColumnMapping::new(columns.iter().cloned());
    mapping.label_column = None;
    let rows = read_labeled_csv(std::fs::File::open(path)?, &mapping, &path.display().to_string())?;
    Ok(rows.into_iter().map(|r| r.point).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Frames missing a mapped name are errors.
    #[default]
    Strict,
    /// Frames missing a mapped name are skipped and counted.
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenLabelImport {
    pub dataset: Dataset,
    /// Ids of frames skipped in lenient mode.
    pub skipped_frames: Vec<String>,
}

fn frame_error(frame: &str, message: impl Into<String>) -> Error {
    Error::parse(format!("frame {frame}"), message)
}

fn frame_point(frame_id: &str, frame: &Value, mapping: &ColumnMapping) -> Result<(Vec<Option<f64>>, bool)> {
    let mut seen: Vec<(&str, f64)> = Vec::new();
    if let Some(objects) = frame.get("objects") {
        let objects = objects
            .as_object()
            .ok_or_else(|| frame_error(frame_id, "objects is not an object"))?;
        for (obj_id, obj) in objects {
            let Some(nums) = obj.get("object_data").and_then(|d| d.get("num")) else {
                continue;
            };
            let nums = nums
                .as_array()
                .ok_or_else(|| frame_error(frame_id, format!("object {obj_id}: num is not an array")))?;
            for entry in nums {
                let name = entry
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| frame_error(frame_id, format!("object {obj_id}: num entry without a name")))?;
                let val = entry
                    .get("val")
                    .and_then(Value::as_f64)
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        frame_error(frame_id, format!("object {obj_id}: {name:?} has no finite numeric val"))
                    })?;
                if seen.iter().any(|(n, _)| *n == name) {
                    return Err(frame_error(frame_id, format!("duplicate attribute {name:?}")));
                }
                seen.push((name, val));
            }
        }
    }
    let ood = match frame.get("frame_properties").and_then(|p| p.get("ood")) {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(frame_error(frame_id, "frame_properties.ood is not a boolean")),
    };
    let point = mapping
        .dimension_columns
        .iter()
        .map(|c| seen.iter().find(|(n, _)| n == c).map(|(_, v)| *v))
        .collect();
    Ok((point, ood))
}

pub fn read_openlabel(text: &str, mapping: &ColumnMapping, strictness: Strictness) -> Result<OpenLabelImport> {
    mapping.validate()?;
    let root: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let frames = root
        .get("openlabel")
        .and_then(|o| o.get("frames"))
        .and_then(Value::as_object)
        .ok_or_else(|| Error::parse("top level", "missing openlabel.frames object"))?;
    let mut rows = Vec::with_capacity(frames.len());
    let mut skipped_frames = Vec::new();
    for (frame_id, frame) in frames {
        let (point, ood) = frame_point(frame_id, frame, mapping)?;
        if let Some(k) = point.iter().position(Option::is_none) {
            match strictness {
                Strictness::Strict => {
                    return Err(frame_error(
                        frame_id,
                        format!("missing attribute {:?}", mapping.dimension_columns[k]),
                    ))
                }
                Strictness::Lenient => {
                    skipped_frames.push(frame_id.clone());
                    continue;
                }
            }
        }
        rows.push(LabeledPoint {
            point: point.into_iter().flatten().collect(),
            ood,
        });
    }
    Ok(OpenLabelImport {
        dataset: into_dataset(rows, mapping)?,
        skipped_frames,
    })
}

pub fn parse_openlabel(path: impl AsRef<Path>, mapping: &ColumnMapping, strictness: Strictness) -> Result<OpenLabelImport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    read_openlabel(&text, mapping, strictness).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_real(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

pub fn write_table_to<W: Write>(rows: &[Vec<String>], columns: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(columns)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != columns.len() {
            return Err(Error::RowDimensionMismatch {
                row: i,
                expected: columns.len(),
                actual: row.len(),
            });
        }
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV file with LF line endings.
pub fn write_table(rows: &[Vec<String>], columns: &[&str], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_table_to(rows, columns, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Writes a dataset as CSV: one column per dimension (its name, or `x<k>`)
/// and a `label` column.
pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let names: Vec<String> = match &ds.dimension_names {
        Some(n) => n.clone(),
        None => (0..ds.dimension).map(|k| format!("x{k}")).collect(),
    };
    let mut columns: Vec<&str> = names.iter().map(String::as_str).collect();
    columns.push("label");
    let rows: Vec<Vec<String>> = ds
        .id_samples
        .iter()
        .map(|p| (p, "id"))
        .chain(ds.ood_samples.iter().map(|p| (p, "ood")))
        .map(|(p, l)| p.iter().map(|&v| format_real(v)).chain([l.to_string()]).collect())
        .collect();
    write_table(&rows, &columns, path)
}
