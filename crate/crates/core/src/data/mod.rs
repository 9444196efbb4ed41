//! Multi-label datasets: svmlight-style and CSV text formats, plus synthetic
//! generators in [`generate`].
//!
//! # svmlight-multilabel
//!
//! One example per line: a comma-separated list of 0-based label indices,
//! then `index:value` feature pairs with 0-based indices, separated by
//! whitespace. A line whose first token contains `:` has no labels. Blank
//! lines are skipped, so an example without labels or features is written
//! as a lone `,`. Lines starting with `#` are comments, except for two
//! directives:
//!
//! * `#dims=<d_features>,<d_labels>` declares the dimensions; indices at or
//!   beyond them are parse errors. Without it they are inferred.
//! * `#split=<train|holdout|test>` tags the examples that follow.
//!
//! # CSV
//!
//! A header `labels,x0,x1,...` followed by dense rows; the `labels` field
//! holds `;`-separated label indices and may be empty. Zero features are
//! dropped from the sparse representation.

pub mod generate;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn parse_err(line: usize, reason: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Holdout,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Holdout => "holdout",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "holdout" => Ok(Split::Holdout),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    SvmlightMultilabel,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svmlight" | "svmlight-multilabel" => Ok(Format::SvmlightMultilabel),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown dataset format `{s}`")),
        }
    }
}

/// Sparse feature vector as `(index, value)` pairs sorted by index.
pub type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelExample {
    pub features: SparseVec,
    /// Dense binary label vector of width `d_labels`.
    pub labels: Vec<bool>,
    pub split: Split,
}

impl MultiLabelExample {
    pub fn label_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelDataset {
    pub examples: Vec<MultiLabelExample>,
    pub d_features: usize,
    pub d_labels: usize,
}

impl MultiLabelDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Examples tagged with `split`.
    pub fn subset(&self, split: Split) -> MultiLabelDataset {
        MultiLabelDataset {
            examples: self
                .examples
                .iter()
                .filter(|e| e.split == split)
                .cloned()
                .collect(),
            ..*self
        }
    }

    /// Dense copy of one example's features.
    pub fn dense(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d_features];
        for &(j, v) in &self.examples[i].features {
            x[j] = v;
        }
        x
    }
}

/// Reads a dataset from `path`.
pub fn load_multilabel(
    path: impl AsRef<Path>,
    format: Format,
) -> Result<MultiLabelDataset, DataError> {
    let text = fs::read_to_string(path)?;
    match format {
        Format::SvmlightMultilabel => parse_svmlight(&text),
        Format::Csv => parse_csv(&text),
    }
}

struct RawExample {
    features: SparseVec,
    labels: Vec<usize>,
    split: Split,
    line: usize,
}

fn parse_index(tok: &str, line: usize, what: &str) -> Result<usize, DataError> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(line, format!("bad {what} index `{tok}`")))
}

/// Parses svmlight-multilabel text (see the module docs).
pub fn parse_svmlight(text: &str) -> Result<MultiLabelDataset, DataError> {
    let mut dims: Option<(usize, usize)> = None;
    let mut split = Split::Train;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("dims=") {
                let (f, l) = v
                    .split_once(',')
                    .ok_or_else(|| parse_err(lineno, "expected #dims=<features>,<labels>"))?;
                dims = Some((
                    parse_index(f.trim(), lineno, "dimension")?,
                    parse_index(l.trim(), lineno, "dimension")?,
                ));
            } else if let Some(v) = comment.strip_prefix("split=") {
                split = v.trim().parse().map_err(|e: String| parse_err(lineno, e))?;
            }
            continue;
        }
        let mut tokens = line.split_whitespace().peekable();
        let mut labels = Vec::new();
        if let Some(first) = tokens.peek() {
            if !first.contains(':') {
                for l in first.split(',').filter(|s| !s.is_empty()) {
                    labels.push(parse_index(l, lineno, "label")?);
                }
                tokens.next();
            }
        }
        let mut features = Vec::new();
        for tok in tokens {
            let (j, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got `{tok}`")))?;
            let j = parse_index(j, lineno, "feature")?;
            let v = v
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, format!("bad feature value `{v}`")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite feature value `{v}`")));
            }
            features.push((j, v));
        }
        raw.push(RawExample {
            features,
            labels,
            split,
            line: lineno,
        });
    }
    assemble(raw, dims)
}

/// Parses the dense CSV variant (see the module docs).
pub fn parse_csv(text: &str) -> Result<MultiLabelDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("labels") {
        return Err(parse_err(1, "first column must be `labels`"));
    }
    let d_features = headers.len() - 1;
    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let lineno = i + 2;
        let record = record?;
        let labels = record[0]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|l| parse_index(l, lineno, "label"))
            .collect::<Result<Vec<_>, _>>()?;
        let mut features = Vec::new();
        for (j, field) in record.iter().skip(1).enumerate() {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, format!("bad feature value `{field}`")))?;
            if v != 0.0 {
                features.push((j, v));
            }
        }
        raw.push(RawExample {
            features,
            labels,
            split: Split::Train,
            line: lineno,
        });
    }
    let d_labels = raw
        .iter()
        .flat_map(|r| r.labels.iter().map(|l| l + 1))
        .max()
        .unwrap_or(0);
    assemble(raw, Some((d_features, d_labels)))
}

fn assemble(
    raw: Vec<RawExample>,
    dims: Option<(usize, usize)>,
) -> Result<MultiLabelDataset, DataError> {
    let (d_features, d_labels) = dims.unwrap_or_else(|| {
        let f = raw
            .iter()
            .flat_map(|r| r.features.iter().map(|p| p.0 + 1))
            .max()
            .unwrap_or(0);
        let l = raw
            .iter()
            .flat_map(|r| r.labels.iter().map(|l| l + 1))
            .max()
            .unwrap_or(0);
        (f, l)
    });
    let mut examples = Vec::with_capacity(raw.len());
    for mut r in raw {
        r.features.sort_by_key(|p| p.0);
        if r.features.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(parse_err(r.line, "duplicate feature index"));
        }
        if let Some(&(j, _)) = r.features.iter().find(|p| p.0 >= d_features) {
            return Err(parse_err(
                r.line,
                format!("feature index {j} >= {d_features}"),
            ));
        }
        let mut labels = vec![false; d_labels];
        for l in r.labels {
            if l >= d_labels {
                return Err(parse_err(r.line, format!("label index {l} >= {d_labels}")));
            }
            labels[l] = true;
        }
        examples.push(MultiLabelExample {
            features: r.features,
            labels,
            split: r.split,
        });
    }
    Ok(MultiLabelDataset {
        examples,
        d_features,
        d_labels,
    })
}

/// Canonical svmlight-multilabel text: a `#dims` header, `#split`
/// directives only where the split changes, sorted labels and features,
/// shortest round-tripping float formatting.
pub fn to_svmlight(data: &MultiLabelDataset) -> String {
    let mut out = format!("#dims={},{}\n", data.d_features, data.d_labels);
    let mut split = Split::Train;
    for ex in &data.examples {
        if ex.split != split {
            split = ex.split;
            let _ = writeln!(out, "#split={}", split.name());
        }
        let labels: Vec<String> = ex.label_indices().iter().map(usize::to_string).collect();
        if labels.is_empty() && ex.features.is_empty() {
            out.push(',');
        }
        out.push_str(&labels.join(","));
        for (j, v) in &ex.features {
            let _ = write!(out, " {j}:{v}");
        }
        out.push('\n');
    }
    out
}

/// Writes [`to_svmlight`] output to `path`.
pub fn save_svmlight(data: &MultiLabelDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    fs::write(path, to_svmlight(data))?;
    Ok(())
}

/// Canonical CSV text. Splits are not represented.
pub fn to_csv(data: &MultiLabelDataset) -> Result<String, DataError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["labels".to_string()];
    header.extend((0..data.d_features).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, ex) in data.examples.iter().enumerate() {
        let labels: Vec<String> = ex.label_indices().iter().map(usize::to_string).collect();
        let mut row = vec![labels.join(";")];
        row.extend(data.dense(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| DataError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let d = parse_svmlight("1,3 5:0.5 9:1.2\n").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.examples[0].label_indices(), vec![1, 3]);
        assert_eq!(d.examples[0].features, vec![(5, 0.5), (9, 1.2)]);
        assert_eq!((d.d_features, d.d_labels), (10, 4));
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let d = parse_svmlight("").unwrap();
        assert!(d.is_empty());
        assert_eq!((d.d_features, d.d_labels), (0, 0));
    }

    #[test]
    fn declared_dims_are_enforced() {
        let err = parse_svmlight("#dims=4,2\n0 1:1\n1 4:0.5\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }), "{err}");
        let err = parse_svmlight("#dims=4,2\n2 1:1\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn malformed_tokens_report_line() {
        for (text, line) in [
            ("0 1:1\n0 1:x\n", 2),
            ("0 1-1\n", 1),
            ("a,b 1:1\n", 1),
            ("0 1:1 1:2\n", 1),
            ("#split=validation\n", 1),
        ] {
            match parse_svmlight(text) {
                Err(DataError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn unlabeled_and_featureless_lines() {
        let d = parse_svmlight("2:1.5\n0,1\n").unwrap();
        assert!(d.examples[0].label_indices().is_empty());
        assert!(d.examples[1].features.is_empty());
    }

    #[test]
    fn splits_and_subset() {
        let d = parse_svmlight("0 0:1\n#split=test\n1 0:2\n# a comment\n1 0:3\n").unwrap();
        assert_eq!(d.subset(Split::Test).len(), 2);
        assert_eq!(d.subset(Split::Train).len(), 1);
    }

    #[test]
    fn normalization() {
        let messy = "  3,1 9:1.20 5:0.5\n\n#split=test\n 2:1e-1\n";
        let want = "#dims=10,4\n1,3 5:0.5 9:1.2\n#split=test\n 2:0.1\n";
        assert_eq!(to_svmlight(&parse_svmlight(messy).unwrap()), want);
        assert_eq!(to_svmlight(&parse_svmlight(want).unwrap()), want);
    }

    #[test]
    fn csv_round_trip() {
        let text = "labels,x0,x1,x2\n0;2,0.5,0,1\n,0,0,0\n";
        let d = parse_csv(text).unwrap();
        assert_eq!(d.examples[0].label_indices(), vec![0, 2]);
        assert_eq!(d.examples[0].features, vec![(0, 0.5), (2, 1.0)]);
        assert_eq!((d.d_features, d.d_labels), (3, 3));
        assert_eq!(to_csv(&d).unwrap(), text);
        assert!(matches!(
            parse_csv("y,x0\n1,2\n"),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_csv("labels,x0\n1,z\n"),
            Err(DataError::Parse { line: 2, .. })
        ));
    }
}
