//! CSV ingestion driven by a schema descriptor (a small TOML file mapping
//! column names to roles).
//!
//! ```toml
//! genotype_coding = "dominant"
//!
//! [columns]
//! id = "id"
//! chd = "label"
//! rs1042522 = "snp_genotype"
//! ldl = "continuous"
//! smoker = "clinical_binary"
//! cohort = "cohort"
//! split = "split"
//! ```
//!
//! `X` is built from `snp_genotype` and `binary` columns, `Z` from
//! `continuous` and `clinical_binary` columns, both in header order. Rows
//! with an empty label, `X` or `Z` field are dropped and counted.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::genotype::{recode_value, GenotypeCoding};
use super::{CovariateKind, Dataset, SampleRecord, ZColumn};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Id,
    Label,
    /// 0/1/2 minor-allele count, recoded to binary on load.
    SnpGenotype,
    /// Binary new-data covariate (part of `X`).
    Binary,
    /// Continuous existing covariate (part of `Z`).
    Continuous,
    /// Binary existing covariate (part of `Z`).
    ClinicalBinary,
    Cohort,
    Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub genotype_coding: GenotypeCoding,
    pub columns: BTreeMap<String, ColumnRole>,
}

impl Schema {
    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: Schema =
            toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        let count = |role: ColumnRole| self.columns.values().filter(|r| **r == role).count();
        if count(ColumnRole::Label) != 1 {
            return Err(Error::Schema("exactly one label column is required".into()));
        }
        for role in [ColumnRole::Id, ColumnRole::Cohort, ColumnRole::Split] {
            if count(role) > 1 {
                return Err(Error::Schema(format!("more than one {role:?} column")));
            }
        }
        Ok(())
    }

    /// Schema describing `ds` as written by [`save_csv`].
    pub fn for_dataset(ds: &Dataset) -> Self {
        let mut columns = BTreeMap::new();
        columns.insert("id".to_string(), ColumnRole::Id);
        columns.insert(ds.label_name().to_string(), ColumnRole::Label);
        for name in ds.x_names() {
            columns.insert(name.clone(), ColumnRole::Binary);
        }
        for col in ds.z_columns() {
            let role = match col.kind {
                CovariateKind::Continuous => ColumnRole::Continuous,
                CovariateKind::Binary => ColumnRole::ClinicalBinary,
            };
            columns.insert(col.name.clone(), role);
        }
        columns.insert("cohort".to_string(), ColumnRole::Cohort);
        columns.insert("split".to_string(), ColumnRole::Split);
        Schema {
            genotype_coding: GenotypeCoding::Dominant,
            columns,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: usize,
    /// 1-based file line numbers of dropped rows (header is line 1).
    pub dropped_lines: Vec<usize>,
}

enum Field<T> {
    Missing,
    Value(T),
}

fn parse_binary(raw: &str, column: &str, line: usize) -> Result<Field<bool>> {
    match raw.trim() {
        "" => Ok(Field::Missing),
        "0" => Ok(Field::Value(false)),
        "1" => Ok(Field::Value(true)),
        other => Err(Error::NonBinaryValue {
            column: column.to_string(),
            line,
            value: other.to_string(),
        }),
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_from_reader(file, schema)
}

pub(crate) fn load_from_reader<R: std::io::Read>(
    reader: R,
    schema: &Schema,
) -> Result<(Dataset, LoadReport)> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    for name in schema.columns.keys() {
        if !header.contains(name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let role_of = |h: &String| schema.columns.get(h).copied();
    let mut label_idx = 0;
    let mut id_idx = None;
    let mut cohort_idx = None;
    let mut split_idx = None;
    let mut x_cols: Vec<(usize, bool)> = Vec::new();
    let mut z_cols: Vec<(usize, CovariateKind)> = Vec::new();
    let mut x_names = Vec::new();
    let mut z_columns = Vec::new();
    for (i, h) in header.iter().enumerate() {
        match role_of(h) {
            Some(ColumnRole::Label) => label_idx = i,
            Some(ColumnRole::Id) => id_idx = Some(i),
            Some(ColumnRole::Cohort) => cohort_idx = Some(i),
            Some(ColumnRole::Split) => split_idx = Some(i),
            Some(ColumnRole::SnpGenotype) => {
                x_cols.push((i, true));
                x_names.push(h.clone());
            }
            Some(ColumnRole::Binary) => {
                x_cols.push((i, false));
                x_names.push(h.clone());
            }
            Some(ColumnRole::Continuous) => {
                z_cols.push((i, CovariateKind::Continuous));
                z_columns.push(ZColumn::continuous(h.clone()));
            }
            Some(ColumnRole::ClinicalBinary) => {
                z_cols.push((i, CovariateKind::Binary));
                z_columns.push(ZColumn::binary(h.clone()));
            }
            None => {}
        }
    }

    let mut report = LoadReport::default();
    let mut samples = Vec::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(row_no + 2);
        report.rows_read += 1;
        if rec.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let mut missing = false;

        let y = match parse_binary(&rec[label_idx], &header[label_idx], line)? {
            Field::Missing => {
                missing = true;
                0
            }
            Field::Value(v) => u8::from(v),
        };

        let mut x = Vec::with_capacity(x_cols.len());
        for &(i, genotype) in &x_cols {
            let raw = rec[i].trim();
            if raw.is_empty() {
                missing = true;
                x.push(false);
                continue;
            }
            if genotype {
                let v = raw
                    .parse::<u8>()
                    .ok()
                    .and_then(|g| recode_value(g, schema.genotype_coding))
                    .ok_or_else(|| Error::MalformedRow {
                        line,
                        message: format!("genotype `{raw}` in `{}` is not 0, 1 or 2", header[i]),
                    })?;
                x.push(v);
            } else {
                match parse_binary(raw, &header[i], line)? {
                    Field::Value(v) => x.push(v),
                    Field::Missing => unreachable!(),
                }
            }
        }

        let mut z = Vec::with_capacity(z_cols.len());
        for &(i, kind) in &z_cols {
            let raw = rec[i].trim();
            if raw.is_empty() {
                missing = true;
                z.push(0.0);
                continue;
            }
            match kind {
                CovariateKind::Binary => match parse_binary(raw, &header[i], line)? {
                    Field::Value(v) => z.push(f64::from(u8::from(v))),
                    Field::Missing => unreachable!(),
                },
                CovariateKind::Continuous => {
                    let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
                        line,
                        message: format!("`{raw}` in `{}` is not a number", header[i]),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::MalformedRow {
                            line,
                            message: format!("non-finite value in `{}`", header[i]),
                        });
                    }
                    z.push(v);
                }
            }
        }

        if missing {
            report.dropped += 1;
            report.dropped_lines.push(line);
            continue;
        }

        let id = match id_idx {
            Some(i) if !rec[i].trim().is_empty() => rec[i].trim().to_string(),
            _ => format!("row{}", row_no + 1),
        };
        let cohort = match cohort_idx.map(|i| rec[i].trim()) {
            None | Some("") => None,
            Some(raw) => Some(raw.parse().map_err(|m| Error::MalformedRow { line, message: m })?),
        };
        let split = match split_idx.map(|i| rec[i].trim()) {
            None | Some("") => None,
            Some(raw) => Some(raw.parse().map_err(|m| Error::MalformedRow { line, message: m })?),
        };
        samples.push(SampleRecord {
            id,
            x,
            z,
            y,
            cohort,
            split,
        });
    }
    report.rows_kept = samples.len();
    let label = header[label_idx].clone();
    let ds = Dataset::new(samples, x_names, z_columns, label)?;
    Ok((ds, report))
}

/// Write `ds` as CSV: `id`, label, `X`, `Z`, `cohort`, `split`. Floats use the
/// shortest representation that parses back to the same value.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_to(ds, file)
}

pub(crate) fn write_to<W: std::io::Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), ds.label_name().to_string()];
    header.extend(ds.x_names().iter().cloned());
    header.extend(ds.z_names());
    header.push("cohort".into());
    header.push("split".into());
    w.write_record(&header)?;
    for s in ds.samples() {
        let mut row = vec![s.id.clone(), s.y.to_string()];
        row.extend(s.x.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        for (v, col) in s.z.iter().zip(ds.z_columns()) {
            row.push(match col.kind {
                CovariateKind::Binary => format!("{}", *v as u8),
                CovariateKind::Continuous => format!("{v}"),
            });
        }
        row.push(s.cohort.as_ref().map(|c| c.to_string()).unwrap_or_default());
        row.push(s.split.map(|t| t.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
