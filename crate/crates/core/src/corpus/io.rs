use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    consolidate_annotations, normalize_conversation, normalize_text, ClassCounts, DatasetBundle,
    Document, Label, LabeledExample, Profile, Split,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    #[default]
    Jsonl,
    Tsv,
}

/// Case-insensitive mapping from raw label strings onto [`Label`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMap(pub Vec<(String, Label)>);

impl Default for LabelMap {
    fn default() -> Self {
        use Label::*;
        let pairs = [
            ("0", NotOffensive),
            ("1", Offensive),
            ("not", NotOffensive),
            ("off", Offensive),
            ("false", NotOffensive),
            ("true", Offensive),
            ("not_offensive", NotOffensive),
            ("offensive", Offensive),
            ("non-abusive", NotOffensive),
            ("abusive", Offensive),
        ];
        LabelMap(pairs.iter().map(|(s, l)| (s.to_string(), *l)).collect())
    }
}

impl LabelMap {
    pub fn lookup(&self, raw: &str) -> Option<Label> {
        let raw = raw.trim();
        self.0
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(raw))
            .map(|(_, l)| *l)
    }

    fn map_value(&self, v: &Value) -> Option<Label> {
        match v {
            Value::Bool(b) => Some(if *b {
                Label::Offensive
            } else {
                Label::NotOffensive
            }),
            Value::Number(n) => n.as_u64().and_then(|n| Label::from_index(n as usize)),
            Value::String(s) => self.lookup(s),
            _ => None,
        }
    }
}

/// Column mapping for one dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub format: FileFormat,
    /// When absent, ids are synthesized as `<source>:<line>`.
    pub id_field: Option<String>,
    pub text_field: String,
    /// List of turns joined into one document (conversation datasets).
    pub turns_field: Option<String>,
    pub label_field: Option<String>,
    /// Annotator votes consolidated by majority; used when `label_field`
    /// is absent or empty on a row.
    pub votes_field: Option<String>,
    pub split_field: Option<String>,
    pub profile: Option<Profile>,
    pub labels: LabelMap,
    pub source: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            format: FileFormat::Jsonl,
            id_field: Some("id".into()),
            text_field: "text".into(),
            turns_field: None,
            label_field: Some("label".into()),
            votes_field: None,
            split_field: Some("split".into()),
            profile: None,
            labels: LabelMap::default(),
            source: String::new(),
        }
    }
}

impl Schema {
    /// OLID level-A layout: `id  tweet  subtask_a ...` with NOT/OFF labels.
    pub fn olid() -> Self {
        Schema {
            format: FileFormat::Tsv,
            text_field: "tweet".into(),
            label_field: Some("subtask_a".into()),
            split_field: None,
            profile: Some(Profile::Tweet),
            source: "olid".into(),
            ..Schema::default()
        }
    }

    /// ConvAbuse layout as JSON Lines: a list of conversation turns and a
    /// list of per-annotator binary votes.
    pub fn convabuse() -> Self {
        Schema {
            turns_field: Some("turns".into()),
            label_field: None,
            votes_field: Some("votes".into()),
            split_field: None,
            profile: Some(Profile::Conversation),
            source: "convabuse".into(),
            ..Schema::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSpec {
    /// Every row goes to one split.
    Fixed(Split),
    /// Read the split from the schema's split column.
    Column,
}

/// Counts gathered while reading one file. Unlabelled rows are counted in
/// `unlabelled`, so `rows_kept` equals the class-count totals plus
/// `unlabelled`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestionStats {
    pub path: PathBuf,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub class_counts: BTreeMap<Split, ClassCounts>,
    pub unlabelled: usize,
}

impl IngestionStats {
    pub fn counts(&self, split: Split) -> ClassCounts {
        self.class_counts.get(&split).copied().unwrap_or_default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

struct Row {
    line: usize,
    fields: Map<String, Value>,
}

fn read_jsonl(path: &Path) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(fields)) => rows.push(Row {
                line: line_no,
                fields,
            }),
            Ok(_) => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: line_no,
                    message: "expected a JSON object".into(),
                })
            }
            Err(e) => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(rows)
}

fn read_tsv(path: &Path) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_reader(file);
    let parse_err = |line: usize, e: csv::Error| Error::Parse {
        path: path.into(),
        line,
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e))?.clone();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = record
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map(|p| p.line() as usize)
            .unwrap_or(i + 2);
        let record = record.map_err(|e| parse_err(line, e))?;
        let fields = headers
            .iter()
            .zip(record.iter())
            .map(|(h, v)| (h.to_string(), Value::String(v.to_string())))
            .collect();
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

fn field_str<'a>(row: &'a Row, name: &str) -> Option<&'a str> {
    row.fields.get(name).and_then(Value::as_str)
}

/// Reads one dataset file into a bundle.
///
/// Text is normalized with the schema's profile; rows whose text is empty
/// afterwards are dropped and counted. Labelled rows with a label that does
/// not map onto {0, 1} fail with the offending line number.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &Schema,
    split_spec: SplitSpec,
) -> Result<(DatasetBundle, IngestionStats)> {
    let path = path.as_ref();
    let rows = match schema.format {
        FileFormat::Jsonl => read_jsonl(path)?,
        FileFormat::Tsv => read_tsv(path)?,
    };
    let source = if schema.source.is_empty() {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        schema.source.clone()
    };

    let mut stats = IngestionStats {
        path: path.to_path_buf(),
        ..Default::default()
    };
    let mut bundle = DatasetBundle::default();
    let mut ids = HashSet::new();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.into(),
        line,
        message,
    };

    for row in rows {
        stats.rows_read += 1;
        let split = match split_spec {
            SplitSpec::Fixed(s) => s,
            SplitSpec::Column => {
                let col = schema
                    .split_field
                    .as_deref()
                    .ok_or_else(|| parse_err(row.line, "schema has no split column".into()))?;
                let raw = field_str(&row, col)
                    .ok_or_else(|| parse_err(row.line, format!("missing split field {col:?}")))?;
                Split::parse(raw)
                    .ok_or_else(|| parse_err(row.line, format!("unknown split {raw:?}")))?
            }
        };

        let id = match &schema.id_field {
            Some(f) => match row.fields.get(f) {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => return Err(parse_err(row.line, format!("missing id field {f:?}"))),
            },
            None => format!("{source}:{}", row.line),
        };
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }

        let text = text_of(&row, schema).ok_or_else(|| {
            parse_err(
                row.line,
                format!("missing text field {:?}", schema.text_field),
            )
        })?;
        if text.trim().is_empty() {
            stats.rows_dropped += 1;
            continue;
        }
        let doc = Document {
            id,
            text,
            source: field_str(&row, "source")
                .map(str::to_string)
                .unwrap_or_else(|| source.clone()),
        };

        if split == Split::Unlabelled {
            bundle.unlabelled.push(doc);
            stats.unlabelled += 1;
            stats.rows_kept += 1;
            continue;
        }

        let label = label_of(&row, schema, path)?;
        stats.class_counts.entry(split).or_default().add(label);
        stats.rows_kept += 1;
        let example = LabeledExample::human(doc, label);
        match split {
            Split::Train => bundle.train.push(example),
            Split::Dev => bundle.dev.get_or_insert_with(Vec::new).push(example),
            Split::Test => bundle.test.push(example),
            Split::Unlabelled => unreachable!(),
        }
    }
    Ok((bundle, stats))
}

fn text_of(row: &Row, schema: &Schema) -> Option<String> {
    if let Some(turns) = schema
        .turns_field
        .as_deref()
        .and_then(|f| row.fields.get(f))
        .and_then(Value::as_array)
    {
        let turns: Vec<&str> = turns.iter().filter_map(Value::as_str).collect();
        return Some(normalize_conversation(&turns));
    }
    let raw = field_str(row, &schema.text_field)?;
    Some(match schema.profile {
        Some(p) => normalize_text(raw, p),
        None => raw.trim().to_string(),
    })
}

fn label_of(row: &Row, schema: &Schema, path: &Path) -> Result<Label> {
    let unmappable = |value: String| Error::UnmappableLabel {
        path: path.into(),
        line: row.line,
        value,
    };
    let direct = schema
        .label_field
        .as_deref()
        .and_then(|f| row.fields.get(f))
        .filter(|v| !v.is_null() && v.as_str().is_none_or(|s| !s.trim().is_empty()));
    if let Some(v) = direct {
        return schema
            .labels
            .map_value(v)
            .ok_or_else(|| unmappable(value_text(v)));
    }
    if let Some(votes) = schema
        .votes_field
        .as_deref()
        .and_then(|f| row.fields.get(f))
    {
        let items: Vec<Value> = match votes {
            Value::Array(a) => a.clone(),
            Value::String(s) => s
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| Value::String(t.to_string()))
                .collect(),
            other => return Err(unmappable(value_text(other))),
        };
        let labels = items
            .iter()
            .map(|v| {
                schema
                    .labels
                    .map_value(v)
                    .ok_or_else(|| unmappable(value_text(v)))
            })
            .collect::<Result<Vec<_>>>()?;
        return consolidate_annotations(&labels).map_err(|_| unmappable("[]".into()));
    }
    Err(Error::Parse {
        path: path.into(),
        line: row.line,
        message: "labelled row has no label".into(),
    })
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    split: Split,
    #[serde(skip_serializing_if = "str::is_empty")]
    source: &'a str,
}

/// Writes a bundle as one JSON Lines file in the default [`Schema`] with a
/// `split` column, loadable with [`SplitSpec::Column`].
pub fn write_dataset(bundle: &DatasetBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |rec: OutRecord<'_>| -> Result<()> {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))
    };
    for (split, xs) in [
        (Split::Train, &bundle.train[..]),
        (Split::Dev, bundle.dev.as_deref().unwrap_or(&[])),
        (Split::Test, &bundle.test[..]),
    ] {
        for e in xs {
            emit(OutRecord {
                id: e.id(),
                text: e.text(),
                label: Some(e.label),
                split,
                source: &e.doc.source,
            })?;
        }
    }
    for d in &bundle.unlabelled {
        emit(OutRecord {
            id: &d.id,
            text: &d.text,
            label: None,
            split: Split::Unlabelled,
            source: &d.source,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Dumps examples (with provenance and confidence) as JSON Lines.
pub fn write_examples(examples: &[LabeledExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in examples {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
