//! Latent embedding sets and their alignment with feature tables.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::FeatureTable;

/// Dimensionality the analyses are validated at.
pub const DEFAULT_EMBEDDING_DIM: usize = 8;

/// Fixed-dimension latent vectors for one task, keyed by utterance id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub task: String,
    dim: usize,
    ids: Vec<String>,
    styles: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    pub fn new(task: impl Into<String>, dim: usize) -> Self {
        EmbeddingSet {
            task: task.into(),
            dim,
            ids: Vec::new(),
            styles: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn styles(&self) -> &[String] {
        &self.styles
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// N × dim, rows in insertion order.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim, |r, c| self.vectors[r][c])
    }

    pub fn get(&self, utterance_id: &str) -> Option<(&str, &[f64])> {
        self.index
            .get(utterance_id)
            .map(|&i| (self.styles[i].as_str(), self.vectors[i].as_slice()))
    }

    pub fn push(
        &mut self,
        utterance_id: impl Into<String>,
        style: impl Into<String>,
        vector: Vec<f64>,
    ) -> Result<()> {
        let id = utterance_id.into();
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "'{id}' has {} values, set dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite embedding value for '{id}'"
            )));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate utterance id '{id}'")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.styles.push(style.into());
        self.vectors.push(vector);
        Ok(())
    }

    /// `utterance_id,style,e0,..,e{d-1}` with lossless float formatting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["utterance_id".to_string(), "style".to_string()];
        header.extend((0..self.dim).map(|k| format!("e{k}")));
        writer.write_record(&header)?;
        for i in 0..self.len() {
            let mut record = vec![self.ids[i].clone(), self.styles[i].clone()];
            record.extend(self.vectors[i].iter().map(f64::to_string));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Reads CSV, or JSON lines when the extension is `.jsonl`/`.ndjson`.
pub fn load_embeddings(path: impl AsRef<Path>, task: &str) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let raw = match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => read_jsonl(path)?,
        _ => read_csv(path)?,
    };
    let bad: Vec<&str> = raw
        .rows
        .iter()
        .filter(|r| r.2.iter().any(|v| !v.is_finite()))
        .map(|r| r.0.as_str())
        .collect();
    if !bad.is_empty() {
        return Err(Error::Validation(format!(
            "non-finite embedding values in {}: {}",
            path.display(),
            bad.join(", ")
        )));
    }
    let mut set = EmbeddingSet::new(task, raw.dim);
    for (id, style, vector) in raw.rows {
        set.push(id, style, vector)?;
    }
    Ok(set)
}

struct RawRows {
    dim: usize,
    rows: Vec<(String, String, Vec<f64>)>,
}

fn read_csv(path: &Path) -> Result<RawRows> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 3 || &header[0] != "utterance_id" || &header[1] != "style" {
        return Err(Error::format(
            path,
            "header must be utterance_id,style,e0,...",
        ));
    }
    let dim = header.len() - 2;
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("e{k}") {
            return Err(Error::format(
                path,
                format!("column {} should be e{k}, found '{name}'", k + 2),
            ));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::format(
                path,
                format!(
                    "row {} has {} fields, header has {}",
                    line + 2,
                    record.len(),
                    header.len()
                ),
            ));
        }
        let vector = record
            .iter()
            .skip(2)
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::format(path, format!("row {}: '{cell}' is not a number", line + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((record[0].to_string(), record[1].to_string(), vector));
    }
    Ok(RawRows { dim, rows })
}

fn read_jsonl(path: &Path) -> Result<RawRows> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut dim = None;
    let mut rows = Vec::new();
    for (line_no, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::format(path, format!("line {} is not an object", line_no + 1)))?;
        let text = |key: &str| {
            obj.get(key)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| {
                    Error::format(
                        path,
                        format!("line {}: missing string '{key}'", line_no + 1),
                    )
                })
        };
        let id = text("utterance_id")?;
        let style = text("style")?;
        let components: BTreeMap<usize, f64> = obj
            .iter()
            .filter_map(|(k, v)| {
                let idx = k.strip_prefix('e')?.parse::<usize>().ok()?;
                // NaN/Infinity cannot be JSON numbers; accept them as strings so they
                // surface as validation errors rather than parse errors
                let val = v
                    .as_f64()
                    .or_else(|| v.as_str().and_then(|s| s.parse::<f64>().ok()))
                    .unwrap_or(f64::NAN);
                Some((idx, val))
            })
            .collect();
        let n = components.len();
        if components.keys().copied().ne(0..n) {
            return Err(Error::format(
                path,
                format!(
                    "line {}: components are not e0..e{}",
                    line_no + 1,
                    n.saturating_sub(1)
                ),
            ));
        }
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => {
                return Err(Error::format(
                    path,
                    format!("line {} has {n} components, expected {d}", line_no + 1),
                ))
            }
            _ => {}
        }
        rows.push((id, style, components.into_values().collect()));
    }
    let dim = dim.ok_or_else(|| Error::format(path, "no rows"))?;
    Ok(RawRows { dim, rows })
}

/// Embeddings and features aligned row by row, sorted by utterance id.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedDataset {
    pub task: String,
    pub ids: Vec<String>,
    pub styles: Vec<String>,
    /// N × dim
    pub embeddings: DMatrix<f64>,
    pub feature_names: Vec<String>,
    /// N × F
    pub features: DMatrix<f64>,
}

impl JoinedDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn feature(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.feature_names.iter().position(|n| n == name)?;
        Some(self.features.column(j).iter().copied().collect())
    }

    /// Style labels as dense class indices (classes sorted by name).
    pub fn style_classes(&self) -> (Vec<usize>, Vec<String>) {
        class_indices(&self.styles)
    }
}

pub fn class_indices(labels: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    let lookup: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    (labels.iter().map(|l| lookup[l.as_str()]).collect(), names)
}

/// Inner join on utterance id. Rows with any missing feature value are dropped.
pub fn join(emb: &EmbeddingSet, feats: &FeatureTable) -> Result<JoinedDataset> {
    let mut order: Vec<usize> = (0..emb.len()).collect();
    order.sort_by(|&a, &b| emb.ids[a].cmp(&emb.ids[b]));
    let feature_index: HashMap<&str, usize> = feats
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.utterance_id.as_str(), i))
        .collect();

    let mut ids = Vec::new();
    let mut styles = Vec::new();
    let mut emb_rows: Vec<&[f64]> = Vec::new();
    let mut feat_rows: Vec<Vec<f64>> = Vec::new();
    let mut matched = 0usize;
    for i in order {
        let id = &emb.ids[i];
        let Some(&r) = feature_index.get(id.as_str()) else {
            continue;
        };
        matched += 1;
        let row = &feats.rows()[r];
        if row.style != emb.styles[i] {
            return Err(Error::Consistency(format!(
                "utterance '{id}' is '{}' in the embeddings but '{}' in the features",
                emb.styles[i], row.style
            )));
        }
        let Some(values) = row.values.iter().copied().collect::<Option<Vec<f64>>>() else {
            continue;
        };
        ids.push(id.clone());
        styles.push(emb.styles[i].clone());
        emb_rows.push(&emb.vectors[i]);
        feat_rows.push(values);
    }
    if matched == 0 {
        return Err(Error::Join(format!(
            "no utterance ids shared between task '{}' embeddings and the feature table",
            emb.task
        )));
    }
    let dropped = matched - ids.len();
    if dropped > 0 {
        log::info!(
            "task '{}': dropped {dropped} rows with missing features",
            emb.task
        );
    }
    if ids.is_empty() {
        return Err(Error::Join(format!(
            "every matched row of task '{}' has missing features",
            emb.task
        )));
    }
    let n = ids.len();
    let f = feats.columns().len();
    Ok(JoinedDataset {
        task: emb.task.clone(),
        ids,
        styles,
        embeddings: DMatrix::from_fn(n, emb.dim, |r, c| emb_rows[r][c]),
        feature_names: feats.columns().to_vec(),
        features: DMatrix::from_fn(n, f, |r, c| feat_rows[r][c]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureRow;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn csv8(rows: &[(&str, &str, f64)]) -> String {
        let mut s = String::from("utterance_id,style,e0,e1,e2,e3,e4,e5,e6,e7\n");
        for (id, style, v) in rows {
            s.push_str(&format!("{id},{style},{v},1,2,3,4,5,6,7\n"));
        }
        s
    }

    #[test]
    fn loads_eight_dim_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.csv",
            &csv8(&[("a", "SAD", 0.5), ("b", "SAD", 1.5), ("c", "HAPPY", -2.0)]),
        );
        let set = load_embeddings(&p, "style").unwrap();
        assert_eq!((set.dim(), set.len()), (8, 3));
        assert_eq!(set.get("c").unwrap().1[0], -2.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.csv",
            &csv8(&[("a", "SAD", 0.5), ("a", "SAD", 1.5)]),
        );
        assert!(matches!(
            load_embeddings(&p, "t"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn nan_rows_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.csv",
            &csv8(&[("a", "SAD", 0.5), ("bad_row", "SAD", f64::NAN)]),
        );
        match load_embeddings(&p, "t") {
            Err(Error::Validation(msg)) => assert!(msg.contains("bad_row"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.csv",
            "utterance_id,style,e0,e1\na,S,1,2\nb,S,1\n",
        );
        assert!(matches!(
            load_embeddings(&p, "t"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn jsonl_matches_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.jsonl",
            "{\"utterance_id\":\"a\",\"style\":\"SAD\",\"e0\":0.25,\"e1\":-1}\n{\"utterance_id\":\"b\",\"style\":\"SAD\",\"e1\":3,\"e0\":2}\n",
        );
        let set = load_embeddings(&p, "t").unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.get("b").unwrap().1, &[2.0, 3.0]);
        let bad = write(
            dir.path(),
            "n.jsonl",
            "{\"utterance_id\":\"z\",\"style\":\"S\",\"e0\":\"NaN\"}\n",
        );
        assert!(matches!(
            load_embeddings(&bad, "t"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = EmbeddingSet::new("t", 2);
        set.push("x", "S", vec![std::f64::consts::PI, -1.0 / 3.0])
            .unwrap();
        set.push("y", "S", vec![1e-17, 6.02214076e23]).unwrap();
        let p = dir.path().join("rt.csv");
        set.write_csv(&p).unwrap();
        assert_eq!(load_embeddings(&p, "t").unwrap(), set);
    }

    fn features(ids: &[(&str, &str)], missing: &[&str]) -> FeatureTable {
        let mut t = FeatureTable::new(vec!["f".into()]);
        for (k, (id, style)) in ids.iter().enumerate() {
            let v = if missing.contains(id) {
                None
            } else {
                Some(k as f64)
            };
            t.push(FeatureRow {
                utterance_id: id.to_string(),
                style: style.to_string(),
                values: vec![v],
            })
            .unwrap();
        }
        t
    }

    fn embeddings(n: usize) -> EmbeddingSet {
        let mut e = EmbeddingSet::new("t", 2);
        for i in 0..n {
            e.push(format!("u{i:02}"), "S", vec![i as f64, 1.0])
                .unwrap();
        }
        e
    }

    #[test]
    fn inner_join_keeps_shared_complete_rows() {
        let e = embeddings(10);
        let ids: Vec<(String, &str)> = (0..8).map(|i| (format!("u{i:02}"), "S")).collect();
        let refs: Vec<(&str, &str)> = ids.iter().map(|(a, b)| (a.as_str(), *b)).collect();
        let j = join(&e, &features(&refs, &[])).unwrap();
        assert_eq!(j.len(), 8);
        let j = join(&e, &features(&refs, &["u03"])).unwrap();
        assert_eq!(j.len(), 7);
        assert!(!j.ids.contains(&"u03".to_string()));
    }

    #[test]
    fn join_errors() {
        let e = embeddings(3);
        assert!(matches!(
            join(&e, &features(&[("zz", "S")], &[])),
            Err(Error::Join(_))
        ));
        assert!(matches!(
            join(&e, &features(&[("u01", "HAPPY")], &[])),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn join_is_order_independent() {
        let mut fwd = EmbeddingSet::new("t", 1);
        let mut rev = EmbeddingSet::new("t", 1);
        for i in 0..5 {
            fwd.push(format!("u{i}"), "S", vec![i as f64]).unwrap();
        }
        for i in (0..5).rev() {
            rev.push(format!("u{i}"), "S", vec![i as f64]).unwrap();
        }
        let f = features(
            &[
                ("u4", "S"),
                ("u0", "S"),
                ("u2", "S"),
                ("u1", "S"),
                ("u3", "S"),
            ],
            &[],
        );
        assert_eq!(join(&fwd, &f).unwrap(), join(&rev, &f).unwrap());
    }
}
