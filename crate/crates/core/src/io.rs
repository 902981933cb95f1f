//! File formats: indentation datasets (CSV), key-value manifests, result
//! tables and plot-ready curve files.
//!
//! Floats are written with 17 significant digits so every value survives a
//! write/read round trip bit for bit, and rewriting a parsed file reproduces
//! it byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::simulator::IndentationRecord;

pub const DATASET_HEADER: [&str; 3] = ["t_s", "z_ee_m", "f_z_n"];

/// Canonical float formatting used by every writer in this module.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

pub fn write_dataset_to<W: Write>(
    records: &[IndentationRecord],
    writer: W,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DATASET_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([format_f64(r.t), format_f64(r.z_ee), format_f64(r.f_z)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset(records: &[IndentationRecord], path: &Path) -> Result<()> {
    write_dataset_to(records, create(path)?, path)
}

/// Parses a dataset; `path` is only used in error messages.
pub fn read_dataset_from<R: Read>(reader: R, path: &Path) -> Result<Vec<IndentationRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(DATASET_HEADER) {
        return Err(Error::format(
            path,
            format!(
                "expected header `{}`, found `{}`",
                DATASET_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut records: Vec<IndentationRecord> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let mut vals = [0.0; 3];
        for (col, slot) in vals.iter_mut().enumerate() {
            let cell = row.get(col).unwrap_or("");
            *slot = cell.parse().map_err(|_| {
                Error::format(
                    path,
                    format!(
                        "row {line}, column `{}`: `{cell}` is not a number",
                        DATASET_HEADER[col]
                    ),
                )
            })?;
        }
        let rec = IndentationRecord {
            t: vals[0],
            z_ee: vals[1],
            f_z: vals[2],
        };
        if let Some(prev) = records.last() {
            if rec.t < prev.t {
                return Err(Error::format(
                    path,
                    format!(
                        "row {line}: timestamp {} s decreases from {} s",
                        rec.t, prev.t
                    ),
                ));
            }
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn read_dataset(path: &Path) -> Result<Vec<IndentationRecord>> {
    read_dataset_from(open(path)?, path)
}

/// Ordered `key = value` text. Unknown keys survive a read/write round trip.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m = Manifest::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::format(
                    path,
                    format!("line {}: expected `key = value`, got `{line}`", i + 1),
                ));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::format(path, format!("line {}: empty key", i + 1)));
            }
            m.set(key, value.trim());
        }
        Ok(m)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Replaces an existing value in place or appends a new key.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, format_f64(value));
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        let idx = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(idx).1)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: &Manifest) {
        for (k, v) in &other.entries {
            self.set(k, v.clone());
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text, path)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(manifest.to_text().as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// One estimation outcome plus the provenance needed to score and group it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub label: String,
    pub specimen: String,
    pub tip: String,
    /// Rest time before the palpation (s), when part of a recovery sequence.
    pub rest_s: Option<f64>,
    /// Ground-truth elasticity (Pa), when known.
    pub e_true_pa: Option<f64>,
    pub e_f_pa: f64,
    pub sigma_e_pa: f64,
    pub kappa: f64,
    pub z_surf_m: f64,
    pub residual_n2: f64,
    pub residual_kpa2: f64,
    pub n_used: usize,
}

pub const RESULT_HEADER: [&str; 12] = [
    "label",
    "specimen",
    "tip",
    "rest_s",
    "e_true_pa",
    "e_f_pa",
    "sigma_e_pa",
    "kappa",
    "z_surf_m",
    "residual_n2",
    "residual_kpa2",
    "n_used",
];

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

impl ResultRow {
    fn cells(&self) -> [String; 12] {
        [
            self.label.clone(),
            self.specimen.clone(),
            self.tip.clone(),
            opt(self.rest_s),
            opt(self.e_true_pa),
            format_f64(self.e_f_pa),
            format_f64(self.sigma_e_pa),
            format_f64(self.kappa),
            format_f64(self.z_surf_m),
            format_f64(self.residual_n2),
            format_f64(self.residual_kpa2),
            self.n_used.to_string(),
        ]
    }

    /// Key-value form of the row.
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        for (k, v) in RESULT_HEADER.iter().zip(self.cells()) {
            if !v.is_empty() {
                m.set(k, v);
            }
        }
        m
    }
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(RESULT_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.cells())
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(path, format!("missing column `{name}`")))
    };
    let idx: Vec<usize> = RESULT_HEADER
        .iter()
        .map(|h| col(h))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let text = |k: usize| rec.get(idx[k]).unwrap_or("").to_string();
        let num = |k: usize| -> Result<f64> {
            let cell = rec.get(idx[k]).unwrap_or("");
            cell.parse().map_err(|_| {
                Error::format(
                    path,
                    format!(
                        "row {line}, column `{}`: `{cell}` is not a number",
                        RESULT_HEADER[k]
                    ),
                )
            })
        };
        let opt_num = |k: usize| -> Result<Option<f64>> {
            if rec.get(idx[k]).unwrap_or("").is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let n_cell = rec.get(idx[11]).unwrap_or("");
        rows.push(ResultRow {
            label: text(0),
            specimen: text(1),
            tip: text(2),
            rest_s: opt_num(3)?,
            e_true_pa: opt_num(4)?,
            e_f_pa: num(5)?,
            sigma_e_pa: num(6)?,
            kappa: num(7)?,
            z_surf_m: num(8)?,
            residual_n2: num(9)?,
            residual_kpa2: num(10)?,
            n_used: n_cell.parse().map_err(|_| {
                Error::format(
                    path,
                    format!("row {line}, column `n_used`: `{n_cell}` is not an integer"),
                )
            })?,
        });
    }
    Ok(rows)
}

/// Writes a numeric table with the given column names.
pub fn write_columns(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().map(format_f64))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn with_extension(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}
