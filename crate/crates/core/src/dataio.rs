//! Dataset ingestion (CSV, IDX), seeded synthetic generators and JSON/CSV
//! persistence.
//!
//! JSON reports write every float with 17 significant digits so that a
//! save/load cycle is bit-exact. Non-finite values are encoded as the
//! strings `"inf"`, `"-inf"` and `"nan"`; fields that may hold them use the
//! [`real`] serde adapter.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{distance_l2, Matrix};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    #[default]
    L2,
    L1,
    LInf,
}

impl MetricKind {
    pub fn distance<T: Scalar>(self, a: &[T], b: &[T]) -> T {
        match self {
            MetricKind::L2 => distance_l2(a, b),
            MetricKind::L1 => a
                .iter()
                .zip(b)
                .fold(T::zero(), |s, (&x, &y)| s + (x - y).abs()),
            MetricKind::LInf => a
                .iter()
                .zip(b)
                .fold(T::zero(), |s, (&x, &y)| s.max((x - y).abs())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::L2 => "l2",
            MetricKind::L1 => "l1",
            MetricKind::LInf => "linf",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(MetricKind::L2),
            "l1" => Ok(MetricKind::L1),
            "linf" | "l-inf" | "inf" => Ok(MetricKind::LInf),
            other => Err(Error::InvalidArgument(format!("unknown metric '{other}'"))),
        }
    }
}

/// Ordered point set; index order is part of the identity of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    points: Matrix<T>,
    labels: Option<Vec<i64>>,
    name: String,
}

impl<T: Scalar> Dataset<T> {
    /// Validates finiteness, `n >= 2`, `d >= 1` and label length.
    pub fn new(
        points: Matrix<T>,
        labels: Option<Vec<i64>>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if points.rows() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 points, got {}",
                points.rows()
            )));
        }
        if points.cols() < 1 {
            return Err(Error::InvalidDataset("points have dimension 0".into()));
        }
        if let Some(pos) = points.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite coordinate at point {}, dimension {}",
                pos / points.cols(),
                pos % points.cols()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != points.rows() {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.rows()
                )));
            }
        }
        Ok(Self {
            points,
            labels,
            name: name.into(),
        })
    }

    pub fn from_rows(
        rows: &[Vec<T>],
        labels: Option<Vec<i64>>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rows[bad].len(),
            });
        }
        Self::new(Matrix::from_rows(rows), labels, name)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    /// Always false for a validated dataset.
    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        self.points.row(i)
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same dataset with new coordinates. Labels and name are kept.
    pub fn with_points(&self, points: Matrix<T>) -> Result<Self> {
        Self::new(points, self.labels.clone(), self.name.clone())
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            points: self.points.cast(),
            labels: self.labels.clone(),
            name: self.name.clone(),
        }
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows: Vec<Vec<T>> = indices.iter().map(|&i| self.point(i).to_vec()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::from_rows(&rows, labels, self.name.clone())
    }

    /// Stable content hash of coordinates (bit patterns) and length.
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.points.rows().hash(&mut h);
        self.points.cols().hash(&mut h);
        for v in self.points.as_slice() {
            v.as_f64().to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Reads a headerless (or `has_header`) comma-separated numeric file.
///
/// `label_column` is a 0-based column index removed from the coordinates and
/// parsed as an integer label.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<usize>,
    has_header: bool,
) -> Result<Dataset<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, label_column, has_header, name)
}

pub fn read_csv(
    reader: impl Read,
    label_column: Option<usize>,
    has_header: bool,
    name: impl Into<String>,
) -> Result<Dataset<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut arity = None;
    let first_row = if has_header { 2 } else { 1 };

    for (idx, record) in rdr.records().enumerate() {
        let row_no = idx + first_row;
        let record = record.map_err(|e| Error::Parse {
            row: row_no,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let expected = *arity.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row: row_no,
                found: record.len(),
                expected,
            });
        }
        if let Some(lc) = label_column {
            if lc >= expected {
                return Err(Error::InvalidArgument(format!(
                    "label column {lc} out of range for {expected} columns"
                )));
            }
        }
        let mut coords = Vec::with_capacity(expected);
        for (col, cell) in record.iter().enumerate() {
            if Some(col) == label_column {
                labels.push(parse_label(cell).ok_or_else(|| Error::Parse {
                    row: row_no,
                    column: col + 1,
                    message: format!("label '{cell}' is not an integer"),
                })?);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                column: col + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: col + 1,
                    message: format!("'{cell}' is not finite"),
                });
            }
            coords.push(v);
        }
        rows.push(coords);
    }

    if rows.is_empty() {
        return Err(Error::InvalidDataset("empty file".into()));
    }
    let labels = label_column.map(|_| labels);
    Dataset::from_rows(&rows, labels, name)
}

fn parse_label(cell: &str) -> Option<i64> {
    cell.parse::<i64>().ok().or_else(|| {
        let v: f64 = cell.parse().ok()?;
        (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
    })
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads an MNIST-style image/label IDX pair. Pixels are scaled to `[0, 1]`
/// by dividing by 255 and flattened row-major.
pub fn load_idx_pair(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: Option<usize>,
) -> Result<Dataset<f64>> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let images = read_all(images_path)?;
    let labels = read_all(labels_path)?;
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_idx_pair(&images, &labels, limit, name)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated header in {what} file")))
}

pub fn parse_idx_pair(
    images: &[u8],
    labels: &[u8],
    limit: Option<usize>,
    name: impl Into<String>,
) -> Result<Dataset<f64>> {
    if be_u32(images, 0, "images")? != IDX_IMAGES_MAGIC {
        return Err(Error::Format("wrong magic for images file".into()));
    }
    if be_u32(labels, 0, "labels")? != IDX_LABELS_MAGIC {
        return Err(Error::Format("wrong magic for labels file".into()));
    }
    let count = be_u32(images, 4, "images")? as usize;
    let rows = be_u32(images, 8, "images")? as usize;
    let cols = be_u32(images, 12, "images")? as usize;
    let label_count = be_u32(labels, 4, "labels")? as usize;
    if count != label_count {
        return Err(Error::Format(format!(
            "count mismatch: {count} images but {label_count} labels"
        )));
    }
    let d = rows * cols;
    let take = limit.map_or(count, |l| l.min(count));

    let pixels = images
        .get(16..16 + take * d)
        .ok_or_else(|| Error::Format("truncated payload in images file".into()))?;
    let label_bytes = labels
        .get(8..8 + take)
        .ok_or_else(|| Error::Format("truncated payload in labels file".into()))?;

    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = label_bytes.iter().map(|&b| i64::from(b)).collect();
    Dataset::new(Matrix::from_row_major(take, d, data), Some(labels), name)
}

/// Two clusters, each sampled uniformly from an L∞ ball of radius `spread`;
/// cluster 0 is centred at the origin and cluster 1 at `(separation, 0, ..., 0)`.
pub fn gen_two_clusters(
    n_per: usize,
    d: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<Dataset<f64>> {
    check_cluster_args(n_per, d, separation, spread)?;
    let mut rng = SplitMix64::new(seed);
    let mut rows = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for cluster in 0..2 {
        for _ in 0..n_per {
            let mut p: Vec<f64> = (0..d).map(|_| rng.uniform(-spread, spread)).collect();
            if cluster == 1 {
                p[0] += separation;
            }
            rows.push(p);
            labels.push(cluster as i64);
        }
    }
    Dataset::from_rows(&rows, Some(labels), format!("two-clusters-sep{separation}"))
}

/// Two isotropic Gaussian blobs with standard deviation `spread`, centred at
/// the origin and at `(separation, 0, ..., 0)`.
pub fn gen_two_gaussians(
    n_per: usize,
    d: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<Dataset<f64>> {
    check_cluster_args(n_per, d, separation, spread)?;
    let mut rng = SplitMix64::new(seed);
    let mut rows = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for cluster in 0..2 {
        for _ in 0..n_per {
            let mut p: Vec<f64> = (0..d).map(|_| spread * rng.normal()).collect();
            if cluster == 1 {
                p[0] += separation;
            }
            rows.push(p);
            labels.push(cluster as i64);
        }
    }
    Dataset::from_rows(
        &rows,
        Some(labels),
        format!("two-gaussians-sep{separation}"),
    )
}

fn check_cluster_args(n_per: usize, d: usize, separation: f64, spread: f64) -> Result<()> {
    if n_per < 1 || d < 1 {
        return Err(Error::InvalidArgument(
            "n_per and d must be at least 1".into(),
        ));
    }
    if !(separation > 0.0) || !(spread >= 0.0) || !separation.is_finite() || !spread.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need separation > 0 and spread >= 0, got {separation}, {spread}"
        )));
    }
    Ok(())
}

/// Writes `report` as pretty JSON with 17-significant-digit floats.
pub fn save_report<R: Serialize + ?Sized>(report: &R, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_json(report, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_report<R: DeserializeOwned>(path: impl AsRef<Path>) -> Result<R> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn write_json<R: Serialize + ?Sized>(value: &R, writer: impl Write) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, SigDigitsFormatter::new());
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_json_string<R: Serialize + ?Sized>(value: &R) -> Result<String> {
    let mut buf = Vec::new();
    write_json(value, &mut buf)?;
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

/// Formats a finite float with 17 significant digits (negative zero prints
/// as zero).
pub fn format_real(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

/// Writes a matrix as headerless CSV, one row per point.
pub fn write_matrix_csv(matrix: &Matrix<f64>, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..matrix.rows() {
        w.write_record(matrix.row(i).iter().map(|&v| format_real(v)))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn save_matrix_csv(matrix: &Matrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_csv(matrix, BufWriter::new(file))
}

/// Pretty JSON formatter whose floats carry 17 significant digits.
struct SigDigitsFormatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl SigDigitsFormatter {
    fn new() -> Self {
        Self {
            pretty: serde_json::ser::PrettyFormatter::new(),
        }
    }
}

impl serde_json::ser::Formatter for SigDigitsFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", format_real(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

/// Serde adapter for `f64` fields that may be non-finite.
pub mod real {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct RealVisitor;

        impl Visitor<'_> for RealVisitor {
            type Value = f64;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        d.deserialize_any(RealVisitor)
    }
}
