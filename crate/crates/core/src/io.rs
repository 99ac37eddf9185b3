//! CSV readers and writers for point clouds, images, labels and result tables.
//!
//! Point clouds carry a header row and one atom per row, `x1,...,xd[,w]`; a
//! trailing `w` column holds weights, otherwise weights are uniform. Images
//! are headerless H x W grids of intensities. An image dataset is a
//! directory of image files plus `labels.csv` with `filename,label` rows.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::measures::DiscreteMeasure;
use crate::ot::TransportPlan;

pub const LABELS_FILE: &str = "labels.csv";

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: display(path), source }
}

fn csv_err(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: display(path), source },
        kind => {
            let message = match &kind {
                csv::ErrorKind::UnequalLengths { pos: Some(pos), expected_len, len } => {
                    format!("line {}: expected {expected_len} fields, found {len}", pos.line())
                }
                other => format!("{other:?}"),
            };
            Error::parse(display(path), message)
        }
    }
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().has_headers(headers).trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn parse_field(path: &Path, line: u64, col: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(display(path), format!("line {line}, column {}: cannot parse {field:?} as a number", col + 1)))?;
    if !v.is_finite() {
        return Err(Error::parse(display(path), format!("line {line}, column {}: non-finite value", col + 1)));
    }
    Ok(v)
}

/// Numeric rows of a CSV file with `line` numbers for error messages.
fn read_numeric(path: &Path, headers: bool) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = reader(path, headers)?;
    let header: Vec<String> = if headers {
        rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect()
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(c, f)| parse_field(path, line, c, f))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn to_matrix(rows: Vec<Vec<f64>>, cols: usize) -> Array2<f64> {
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.concat()).expect("rows have equal length")
}

/// Point cloud with optional trailing `w` weight column.
pub fn read_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    let path = path.as_ref();
    let (header, rows) = read_numeric(path, true)?;
    if rows.is_empty() {
        return Err(Error::parse(display(path), "no data rows"));
    }
    let weighted = header.last().is_some_and(|h| h.eq_ignore_ascii_case("w"));
    let dim = header.len() - usize::from(weighted);
    if dim == 0 {
        return Err(Error::parse(display(path), "no coordinate columns"));
    }
    let matrix = to_matrix(rows, header.len());
    let (points, weights) = if weighted {
        let w: Array1<f64> = matrix.column(dim).to_owned();
        (matrix.slice(ndarray::s![.., ..dim]).to_owned(), Some(w))
    } else {
        (matrix, None)
    };
    DiscreteMeasure::new(points, weights).map_err(|e| Error::parse(display(path), e.to_string()))
}

/// Unweighted point matrix; every column is a coordinate.
pub fn read_points(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let (header, rows) = read_numeric(path, true)?;
    if rows.is_empty() {
        return Err(Error::parse(display(path), "no data rows"));
    }
    Ok(to_matrix(rows, header.len()))
}

fn coordinate_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("x{k}")).collect()
}

pub fn write_measure(path: impl AsRef<Path>, measure: &DiscreteMeasure) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = coordinate_header(measure.dim());
    header.push("w".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (row, wt) in measure.support().rows().into_iter().zip(measure.weights()) {
        let rec: Vec<String> = row.iter().chain(std::iter::once(wt)).map(|v| v.to_string()).collect();
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_points(path: impl AsRef<Path>, points: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(coordinate_header(points.ncols())).map_err(|e| csv_err(path, e))?;
    for row in points.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Positive-mass cells as `i,j,mass` rows.
pub fn write_plan(path: impl AsRef<Path>, plan: &TransportPlan) -> Result<()> {
    write_records(path, plan.nonzero_entries().into_iter().map(|(i, j, mass)| PlanEntry { i, j, mass }))
}

#[derive(Serialize)]
struct PlanEntry {
    i: usize,
    j: usize,
    mass: f64,
}

/// Serializes records with a header derived from the field names.
pub fn write_records<T: Serialize>(path: impl AsRef<Path>, records: impl IntoIterator<Item = T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Headerless grid of intensities in `[0, 1]`.
pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let (_, rows) = read_numeric(path, false)?;
    let width = rows.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(Error::parse(display(path), "empty image"));
    }
    for (r, row) in rows.iter().enumerate() {
        if let Some(c) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::parse(
                display(path),
                format!("line {}, column {}: intensity {} outside [0, 1]", r + 1, c + 1, row[c]),
            ));
        }
    }
    GrayImage::new(to_matrix(rows, width))
}

pub fn write_image(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for row in image.pixels().rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub name: String,
    pub label: String,
    pub image: GrayImage,
}

/// `filename,label` pairs; a leading `filename,label` header row is skipped.
pub fn read_image_labels(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let mut rdr = reader(path, false)?;
    let mut out = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::parse(display(path), format!("line {line}: expected filename,label")));
        }
        if k == 0 && &record[0] == "filename" && &record[1] == "label" {
            continue;
        }
        out.push((record[0].to_string(), record[1].to_string()));
    }
    if out.is_empty() {
        return Err(Error::parse(display(path), "no labeled images"));
    }
    Ok(out)
}

/// Images listed in `dir/labels.csv`, in listing order.
pub fn read_image_dataset(dir: impl AsRef<Path>) -> Result<Vec<LabeledImage>> {
    let dir = dir.as_ref();
    read_image_labels(dir.join(LABELS_FILE))?
        .into_iter()
        .map(|(name, label)| {
            let image = read_image(dir.join(&name))?;
            Ok(LabeledImage { name, label, image })
        })
        .collect()
}

pub fn write_image_dataset(dir: impl AsRef<Path>, images: &[LabeledImage]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for item in images {
        write_image(dir.join(&item.name), &item.image)?;
    }
    let path: PathBuf = dir.join(LABELS_FILE);
    let mut w = writer(&path)?;
    w.write_record(["filename", "label"]).map_err(|e| csv_err(&path, e))?;
    for item in images {
        w.write_record([&item.name, &item.label]).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(io_err(&path))
}

/// One label per row under a header; the last column is used. Labels are
/// arbitrary strings, numbered in order of first appearance.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let mut seen: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record
            .iter()
            .last()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::parse(display(path), format!("line {line}: missing label")))?;
        let id = match seen.iter().position(|s| s == label) {
            Some(id) => id,
            None => {
                seen.push(label.to_string());
                seen.len() - 1
            }
        };
        out.push(id);
    }
    Ok(out)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        label: usize,
    }
    write_records(path, labels.iter().map(|&label| Row { label }))
}
