use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::{FeatureVector, CANONICAL_FEATURES};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub utterance_id: String,
    pub style: String,
    pub values: Vec<Option<f64>>,
}

/// Rectangular per-utterance feature table with unique utterance ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<String>,
    rows: Vec<FeatureRow>,
    ids: HashSet<String>,
}

impl Default for FeatureTable {
    fn default() -> Self {
        FeatureTable::canonical()
    }
}

impl FeatureTable {
    pub fn new(columns: Vec<String>) -> Self {
        FeatureTable {
            columns,
            rows: Vec::new(),
            ids: HashSet::new(),
        }
    }

    pub fn canonical() -> Self {
        FeatureTable::new(CANONICAL_FEATURES.iter().map(|s| s.to_string()).collect())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.columns.len() {
            return Err(Error::Validation(format!(
                "row '{}' has {} values for {} columns",
                row.utterance_id,
                row.values.len(),
                self.columns.len()
            )));
        }
        if let Some(bad) = row.values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "row '{}' holds non-finite value {bad}",
                row.utterance_id
            )));
        }
        if !self.ids.insert(row.utterance_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate utterance id '{}'",
                row.utterance_id
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_vector(
        &mut self,
        utterance_id: &str,
        style: &str,
        vector: FeatureVector,
    ) -> Result<()> {
        self.push(FeatureRow {
            utterance_id: utterance_id.to_string(),
            style: style.to_string(),
            values: vector.values,
        })
    }

    pub fn get(&self, utterance_id: &str) -> Option<&FeatureRow> {
        self.rows.iter().find(|r| r.utterance_id == utterance_id)
    }

    /// `utterance_id,style,<columns>`; missing values are empty cells.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        self.write_to(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        self.write_to(&mut writer)?;
        let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn write_to<W: std::io::Write>(&self, writer: &mut csv::Writer<W>) -> Result<()> {
        let mut header = vec!["utterance_id".to_string(), "style".to_string()];
        header.extend(self.columns.iter().cloned());
        writer.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.utterance_id.clone(), row.style.clone()];
            record.extend(
                row.values
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            writer.write_record(&record)?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        if header.len() < 2 || &header[0] != "utterance_id" || &header[1] != "style" {
            return Err(Error::format(
                path,
                "feature header must start with utterance_id,style",
            ));
        }
        let mut table = FeatureTable::new(header.iter().skip(2).map(str::to_string).collect());
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .skip(2)
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| {
                            Error::format(
                                path,
                                format!("row {}: '{cell}' is not a number", line + 2),
                            )
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(FeatureRow {
                utterance_id: record[0].to_string(),
                style: record[1].to_string(),
                values,
            })?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, values: Vec<Option<f64>>) -> FeatureRow {
        FeatureRow {
            utterance_id: id.into(),
            style: "SAD".into(),
            values,
        }
    }

    #[test]
    fn rejects_duplicates_and_ragged_rows() {
        let mut t = FeatureTable::new(vec!["a".into(), "b".into()]);
        t.push(row("u1", vec![Some(1.0), None])).unwrap();
        assert!(t.push(row("u1", vec![Some(1.0), None])).is_err());
        assert!(t.push(row("u2", vec![Some(1.0)])).is_err());
        assert!(t.push(row("u3", vec![Some(f64::INFINITY), None])).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mut t = FeatureTable::new(vec!["a".into(), "b".into()]);
        t.push(row("u1", vec![Some(0.1 + 0.2), None])).unwrap();
        t.push(row("u2", vec![Some(-1e-300), Some(12345.678901234)]))
            .unwrap();
        t.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("utterance_id,style,a,b\n"));
        assert!(text.contains("u1,SAD,0.30000000000000004,\n"));
        assert_eq!(FeatureTable::read_csv(&path).unwrap(), t);
    }
}
