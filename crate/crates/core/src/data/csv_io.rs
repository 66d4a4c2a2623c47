use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Declarative description of how a CSV maps onto a [`Dataset`].
///
/// ```toml
/// label = "income"
/// label_positive = [">50K", ">50K."]
/// sensitive = "sex"
/// sensitive_group0 = ["Male"]
/// numeric = ["age", "hours-per-week"]
/// categorical = ["workclass", "education"]
/// missing_tokens = ["?", ""]
/// split_column = "year"       # optional
/// split_source = ["2016"]
/// split_target = ["2018"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub label: String,
    pub label_positive: Vec<String>,
    pub sensitive: String,
    pub sensitive_group0: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default = "default_missing")]
    pub missing_tokens: Vec<String>,
    #[serde(default)]
    pub split_column: Option<String>,
    #[serde(default)]
    pub split_source: Vec<String>,
    #[serde(default)]
    pub split_target: Vec<String>,
}

fn default_missing() -> Vec<String> {
    vec!["?".into(), "".into(), "NA".into()]
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?)
    }

    fn validate(&self, table: &RawTable) -> Result<()> {
        if self.label == self.sensitive {
            return Err(Error::Schema("label and sensitive columns must differ".into()));
        }
        let mut used: Vec<&str> = vec![&self.label, &self.sensitive];
        used.extend(self.numeric.iter().map(String::as_str));
        used.extend(self.categorical.iter().map(String::as_str));
        if let Some(s) = &self.split_column {
            used.push(s);
        }
        for col in used {
            table.column(col)?;
        }
        Ok(())
    }

    fn used_columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = vec![&self.label, &self.sensitive];
        cols.extend(self.numeric.iter().map(String::as_str));
        cols.extend(self.categorical.iter().map(String::as_str));
        if let Some(s) = &self.split_column {
            cols.push(s);
        }
        cols
    }
}

/// A CSV file kept as strings, header first.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => Error::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::other(e.to_string()),
                },
                _ => Error::Csv(e),
            })?;
        let headers = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column {name:?} not found in header")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
    pub rows_kept: usize,
}

#[derive(Debug, Clone)]
pub struct EncodedSplit {
    pub source: Dataset,
    pub target: Dataset,
    pub report: LoadReport,
}

/// Column statistics and category levels fitted on one split.
struct Encoder {
    numeric: Vec<(usize, f64, f64)>,
    categorical: Vec<(usize, Vec<String>)>,
    names: Vec<String>,
}

impl Encoder {
    fn fit(table: &RawTable, schema: &SchemaConfig, stat_rows: &[usize], level_rows: &[usize]) -> Result<Self> {
        let mut numeric = Vec::new();
        let mut names = Vec::new();
        for name in &schema.numeric {
            let col = table.column(name)?;
            let values = stat_rows
                .iter()
                .map(|&r| parse_number(&table.rows[r][col], name, r))
                .collect::<Result<Vec<_>>>()?;
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            numeric.push((col, mean, std));
            names.push(name.clone());
        }
        let mut categorical = Vec::new();
        for name in &schema.categorical {
            let col = table.column(name)?;
            let levels: BTreeSet<&str> = level_rows.iter().map(|&r| table.rows[r][col].as_str()).collect();
            let levels: Vec<String> = levels.into_iter().map(str::to_string).collect();
            names.extend(levels.iter().map(|l| format!("{name}={l}")));
            categorical.push((col, levels));
        }
        Ok(Self {
            numeric,
            categorical,
            names,
        })
    }

    fn encode(&self, table: &RawTable, schema: &SchemaConfig, rows: &[usize], provenance: String) -> Result<Dataset> {
        let d = self.names.len();
        let mut x = Array2::zeros((rows.len(), d));
        for (i, &r) in rows.iter().enumerate() {
            let row = &table.rows[r];
            let mut j = 0;
            for (k, &(col, mean, std)) in self.numeric.iter().enumerate() {
                x[[i, j]] = (parse_number(&row[col], &schema.numeric[k], r)? - mean) / std;
                j += 1;
            }
            for (col, levels) in &self.categorical {
                if let Ok(pos) = levels.binary_search_by(|l| l.as_str().cmp(row[*col].as_str())) {
                    x[[i, j + pos]] = 1.0;
                }
                j += levels.len();
            }
        }
        let label_col = table.column(&schema.label)?;
        let y = rows
            .iter()
            .map(|&r| schema.label_positive.contains(&table.rows[r][label_col]) as u8)
            .collect();
        let a = encode_sensitive(table, schema, rows)?;
        Dataset::new(x, y, a, self.names.clone(), provenance)
    }
}

fn encode_sensitive(table: &RawTable, schema: &SchemaConfig, rows: &[usize]) -> Result<Vec<u8>> {
    let col = table.column(&schema.sensitive)?;
    let others: BTreeSet<&str> = rows
        .iter()
        .map(|&r| table.rows[r][col].as_str())
        .filter(|v| !schema.sensitive_group0.iter().any(|g| g == v))
        .collect();
    if others.len() > 1 {
        return Err(Error::Schema(format!(
            "sensitive column {:?} is not binary: values outside group 0 are {others:?}",
            schema.sensitive
        )));
    }
    Ok(rows
        .iter()
        .map(|&r| (!schema.sensitive_group0.contains(&table.rows[r][col])) as u8)
        .collect())
}

fn parse_number(text: &str, column: &str, row: usize) -> Result<f64> {
    let v: f64 = text
        .parse()
        .map_err(|_| Error::InvalidData(format!("row {row}: column {column:?} value {text:?} is not numeric")))?;
    if !v.is_finite() {
        return Err(Error::InvalidData(format!("row {row}: column {column:?} is not finite")));
    }
    Ok(v)
}

/// Rows with no missing token in any configured column.
fn complete_rows(table: &RawTable, schema: &SchemaConfig) -> Result<(Vec<usize>, usize)> {
    let cols = schema
        .used_columns()
        .into_iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<usize> = (0..table.rows.len())
        .filter(|&r| {
            let row = &table.rows[r];
            row.len() == table.headers.len() && cols.iter().all(|&c| !schema.missing_tokens.contains(&row[c]))
        })
        .collect();
    let dropped = table.rows.len() - kept.len();
    Ok((kept, dropped))
}

/// Loads a CSV, drops incomplete rows, one-hot encodes categorical columns
/// and standardizes numeric columns on the loaded rows.
pub fn load_csv(path: &Path, schema: &SchemaConfig) -> Result<(Dataset, LoadReport)> {
    let table = RawTable::read(path)?;
    schema.validate(&table)?;
    let (rows, dropped) = complete_rows(&table, schema)?;
    if rows.is_empty() {
        return Err(Error::EmptyData(format!("{} has no complete rows", path.display())));
    }
    let enc = Encoder::fit(&table, schema, &rows, &rows)?;
    let data = enc.encode(&table, schema, &rows, path.display().to_string())?;
    Ok((
        data,
        LoadReport {
            rows_read: table.rows.len(),
            rows_dropped_missing: dropped,
            rows_kept: rows.len(),
        },
    ))
}

/// Partitions rows by the schema's split column. Numeric standardization is
/// fitted on the source rows and applied to both sides; category levels come
/// from both sides so the feature columns line up.
pub fn split_by_column(table: &RawTable, schema: &SchemaConfig) -> Result<EncodedSplit> {
    schema.validate(table)?;
    let split = schema
        .split_column
        .as_deref()
        .ok_or_else(|| Error::Schema("split_column is not configured".into()))?;
    let col = table.column(split)?;
    let (rows, dropped) = complete_rows(table, schema)?;
    let pick = |values: &[String]| -> Vec<usize> {
        rows.iter().copied().filter(|&r| values.contains(&table.rows[r][col])).collect()
    };
    let source_rows = pick(&schema.split_source);
    let target_rows = pick(&schema.split_target);
    if source_rows.is_empty() || target_rows.is_empty() {
        return Err(Error::Partition(format!(
            "split on {split:?} gives {} source and {} target rows",
            source_rows.len(),
            target_rows.len()
        )));
    }
    if schema.split_source.iter().any(|v| schema.split_target.contains(v)) {
        return Err(Error::Partition("source and target split values overlap".into()));
    }
    let all: Vec<usize> = source_rows.iter().chain(&target_rows).copied().collect();
    let enc = Encoder::fit(table, schema, &source_rows, &all)?;
    let source = enc.encode(table, schema, &source_rows, format!("{split} in {:?}", schema.split_source))?;
    let target = enc.encode(table, schema, &target_rows, format!("{split} in {:?}", schema.split_target))?;
    Ok(EncodedSplit {
        report: LoadReport {
            rows_read: table.rows.len(),
            rows_dropped_missing: dropped,
            rows_kept: source_rows.len() + target_rows.len(),
        },
        source,
        target,
    })
}

const LABEL_COLUMN: &str = "__label";
const SENSITIVE_COLUMN: &str = "__sensitive";

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    feature_names: Vec<String>,
    provenance: String,
    rows: usize,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".schema.toml");
    PathBuf::from(s)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the encoded features plus `__label` and `__sensitive` columns, and
/// a `<path>.schema.toml` sidecar with feature names and provenance. Floats
/// are written in shortest round-trip form, so [`load_dataset`] is exact.
pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    header.push(SENSITIVE_COLUMN);
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(data.y[i].to_string());
        rec.push(data.a[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let sidecar = Sidecar {
        format: "rfr-dataset-v1".into(),
        feature_names: data.feature_names.clone(),
        provenance: data.provenance.clone(),
        rows: data.len(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| Error::Toml(e.to_string()))?;
    let side = sidecar_path(path);
    fs::write(&side, text).map_err(|source| Error::Io {
        path: side.display().to_string(),
        source,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let sidecar: Sidecar =
        toml::from_str(&read_to_string(&sidecar_path(path))?).map_err(|e| Error::Toml(e.to_string()))?;
    let table = RawTable::read(path)?;
    let d = sidecar.feature_names.len();
    if table.headers.len() != d + 2 || table.headers[..d] != sidecar.feature_names[..] {
        return Err(Error::Schema("saved dataset header does not match its sidecar".into()));
    }
    let mut x = Array2::zeros((table.rows.len(), d));
    let mut y = Vec::with_capacity(table.rows.len());
    let mut a = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        for j in 0..d {
            x[[i, j]] = parse_number(&row[j], &table.headers[j], i)?;
        }
        y.push(parse_binary(&row[d], i)?);
        a.push(parse_binary(&row[d + 1], i)?);
    }
    if table.rows.len() != sidecar.rows {
        return Err(Error::InvalidData(format!(
            "sidecar promises {} rows, file has {}",
            sidecar.rows,
            table.rows.len()
        )));
    }
    Dataset::new(x, y, a, sidecar.feature_names, sidecar.provenance)
}

fn parse_binary(text: &str, row: usize) -> Result<u8> {
    match text {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(Error::InvalidData(format!("row {row}: expected 0/1, got {text:?}"))),
    }
}

/// Count of rows per distinct value of `column`.
pub fn value_counts(table: &RawTable, column: &str) -> Result<BTreeMap<String, usize>> {
    let col = table.column(column)?;
    let mut counts = BTreeMap::new();
    for row in &table.rows {
        *counts.entry(row[col].clone()).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn schema(extra: &str) -> SchemaConfig {
        SchemaConfig::from_toml(&format!(
            r#"
label = "income"
label_positive = [">50K"]
sensitive = "sex"
sensitive_group0 = ["Male"]
numeric = ["age"]
categorical = ["work"]
{extra}
"#
        ))
        .unwrap()
    }

    #[test]
    fn one_hot_and_standardize() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "age,work,sex,income\n30,Private,Male,>50K\n40,Gov,Female,<=50K\n50,Private,Female,>50K\n",
        );
        let (d, report) = load_csv(&p, &schema("")).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.feature_names, vec!["age", "work=Gov", "work=Private"]);
        assert!(d.x.column(0).mean().unwrap().abs() <= 1e-12);
        let std = d.x.column(0).mapv(|v| v * v).mean().unwrap().sqrt();
        assert!((std - 1.0).abs() <= 1e-10);
        for row in d.x.rows() {
            assert_eq!(row[1] + row[2], 1.0);
        }
        assert_eq!(d.y, vec![1, 0, 1]);
        assert_eq!(d.a, vec![0, 1, 1]);
        assert_eq!(report.rows_dropped_missing, 0);
    }

    #[test]
    fn drops_missing_rows_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "m.csv",
            "age,work,sex,income\n30,?,Male,>50K\n40,Gov,Female,<=50K\n,Gov,Male,<=50K\n50,Private,Female,>50K\n",
        );
        let (d, report) = load_csv(&p, &schema("")).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(report.rows_dropped_missing, 2);
        assert_eq!(report.rows_read, 4);
    }

    #[test]
    fn schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.csv", "age,sex,income\n30,Male,>50K\n");
        assert!(matches!(load_csv(&p, &schema("")), Err(Error::Schema(_))));
        let p = write(&dir, "e.csv", "age,work,sex,income\n?,Gov,Male,>50K\n");
        assert!(matches!(load_csv(&p, &schema("")), Err(Error::EmptyData(_))));
        let p = write(
            &dir,
            "t.csv",
            "age,work,sex,income\n30,Gov,Male,>50K\n31,Gov,Female,>50K\n32,Gov,Other,>50K\n",
        );
        assert!(matches!(load_csv(&p, &schema("")), Err(Error::Schema(_))));
        let mut same = schema("");
        same.sensitive = "income".into();
        let table = RawTable::read(&p).unwrap();
        assert!(matches!(same.validate(&table), Err(Error::Schema(_))));
    }

    #[test]
    fn split_fits_on_source() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "y.csv",
            "age,work,sex,income,year\n\
             30,Gov,Male,>50K,2016\n40,Private,Female,<=50K,2016\n20,Gov,Female,>50K,2016\n\
             60,Gov,Male,<=50K,2018\n70,Self,Female,>50K,2018\n33,Gov,Male,>50K,2017\n",
        );
        let table = RawTable::read(&p).unwrap();
        let s = schema("split_column = \"year\"\nsplit_source = [\"2016\"]\nsplit_target = [\"2018\"]");
        let split = split_by_column(&table, &s).unwrap();
        let counts = value_counts(&table, "year").unwrap();
        assert_eq!(split.source.len(), counts["2016"]);
        assert_eq!(split.target.len(), counts["2018"]);
        assert!(split.source.x.column(0).mean().unwrap().abs() <= 1e-12);
        assert!(split.target.x.column(0).mean().unwrap() > 1.0);
        assert_eq!(split.source.feature_names, split.target.feature_names);
        assert_eq!(split.source.dim(), 1 + 3);

        let bad = schema("split_column = \"year\"\nsplit_source = [\"2016\"]\nsplit_target = [\"1999\"]");
        assert!(matches!(split_by_column(&table, &bad), Err(Error::Partition(_))));
        assert!(matches!(split_by_column(&table, &schema("")), Err(Error::Schema(_))));
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "r.csv",
            "age,work,sex,income\n31,Gov,Male,>50K\n47,Private,Female,<=50K\n29,Gov,Female,>50K\n\
             53,Self,Male,<=50K\n38,Private,Female,>50K\n61,Gov,Male,<=50K\n",
        );
        let (d, _) = load_csv(&p, &schema("")).unwrap();
        let out = dir.path().join("saved.csv");
        save_dataset(&d, &out).unwrap();
        assert_eq!(load_dataset(&out).unwrap(), d);
    }
}
