//! JSONL / CSV dataset loading.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{SignalKind, SignalValue, TextSample};

/// Maps dataset columns onto [`TextSample`] fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub text_field: String,
    pub signal_field: String,
    #[serde(default)]
    pub id_field: Option<String>,
    pub signal_type: SignalKind,
}

impl DatasetSchema {
    pub fn new(text: &str, signal: &str, signal_type: SignalKind) -> Self {
        DatasetSchema {
            text_field: text.into(),
            signal_field: signal.into(),
            id_field: None,
            signal_type,
        }
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id_field = Some(id.into());
        self
    }
}

/// Loads every record of a `.jsonl` or `.csv` file (chosen by extension) in
/// file order. Records without an id field get their 0-based record index.
pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Vec<TextSample>> {
    load(path.as_ref(), schema, true)
}

/// Loads texts to be scored, ignoring any signal column. The returned
/// samples carry a placeholder continuous signal of 0.
pub fn load_texts(path: impl AsRef<Path>, text_field: &str, id_field: Option<&str>) -> Result<Vec<TextSample>> {
    let mut schema = DatasetSchema::new(text_field, "", SignalKind::Continuous);
    schema.id_field = id_field.map(str::to_string);
    load(path.as_ref(), &schema, false)
}

fn load(path: &Path, schema: &DatasetSchema, labeled: bool) -> Result<Vec<TextSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
    let samples = if is_csv {
        read_csv(file, schema, labeled)?
    } else {
        read_records(BufReader::new(file), schema, labeled)?
    };
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!("{}: dataset is empty", path.display())));
    }
    Ok(samples)
}

pub fn read_jsonl(reader: impl BufRead, schema: &DatasetSchema) -> Result<Vec<TextSample>> {
    read_records(reader, schema, true)
}

fn read_records(reader: impl BufRead, schema: &DatasetSchema, labeled: bool) -> Result<Vec<TextSample>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Value = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: line_no,
            message: format!("malformed JSON: {e}"),
        })?;
        let field = |name: &str| -> Result<&Value> {
            record.get(name).ok_or_else(|| Error::Record {
                line: line_no,
                message: format!("missing field {name:?}"),
            })
        };
        let text = match field(&schema.text_field)? {
            Value::String(s) => s.clone(),
            other => {
                return Err(Error::Record {
                    line: line_no,
                    message: format!("text field is not a string: {other}"),
                })
            }
        };
        let signal = if labeled {
            json_signal(field(&schema.signal_field)?, schema.signal_type)
                .map_err(|message| Error::Record { line: line_no, message })?
        } else {
            SignalValue::Continuous(0.0)
        };
        let id = match &schema.id_field {
            Some(f) => match field(f)? {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                other => {
                    return Err(Error::Record {
                        line: line_no,
                        message: format!("id field is not a string or number: {other}"),
                    })
                }
            },
            None => out.len().to_string(),
        };
        push_sample(&mut out, &mut ids, id, text, signal, line_no)?;
    }
    Ok(out)
}

fn read_csv(file: File, schema: &DatasetSchema, labeled: bool) -> Result<Vec<TextSample>> {
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Record {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("CSV header has no column {name:?}")))
    };
    let text_col = column(&schema.text_field)?;
    let signal_col = if labeled {
        Some(column(&schema.signal_field)?)
    } else {
        None
    };
    let id_col = schema.id_field.as_deref().map(column).transpose()?;

    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Record {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        let get = |col: usize| record.get(col).unwrap_or_default();
        let signal = match signal_col {
            Some(c) => {
                str_signal(get(c), schema.signal_type).map_err(|message| Error::Record { line: line_no, message })?
            }
            None => SignalValue::Continuous(0.0),
        };
        let id = id_col.map_or_else(|| out.len().to_string(), |c| get(c).to_string());
        push_sample(&mut out, &mut ids, id, get(text_col).to_string(), signal, line_no)?;
    }
    Ok(out)
}

fn push_sample(
    out: &mut Vec<TextSample>,
    ids: &mut HashSet<String>,
    id: String,
    text: String,
    signal: SignalValue,
    line: usize,
) -> Result<()> {
    if !ids.insert(id.clone()) {
        return Err(Error::Record {
            line,
            message: format!("duplicate id {id:?}"),
        });
    }
    let sample = TextSample::new(id, text, signal).map_err(|e| Error::Record {
        line,
        message: e.to_string(),
    })?;
    out.push(sample);
    Ok(())
}

fn json_signal(value: &Value, kind: SignalKind) -> Result<SignalValue, String> {
    match value {
        Value::String(s) => str_signal(s, kind),
        Value::Number(n) => match kind {
            SignalKind::Discrete => {
                let label = n.as_i64().ok_or_else(|| format!("label {n} is not an integer"))?;
                SignalValue::discrete(label).map_err(|e| e.to_string())
            }
            SignalKind::Continuous => {
                let v = n.as_f64().ok_or_else(|| format!("signal {n} is not a number"))?;
                SignalValue::continuous(v).map_err(|e| e.to_string())
            }
        },
        other => Err(format!("signal {other} is not a number")),
    }
}

fn str_signal(raw: &str, kind: SignalKind) -> Result<SignalValue, String> {
    let raw = raw.trim();
    match kind {
        SignalKind::Discrete => {
            let label: i64 = raw.parse().map_err(|_| format!("label {raw:?} is not an integer"))?;
            SignalValue::discrete(label).map_err(|e| e.to_string())
        }
        SignalKind::Continuous => {
            let v: f64 = raw.parse().map_err(|_| format!("signal {raw:?} is not a number"))?;
            SignalValue::continuous(v).map_err(|e| e.to_string())
        }
    }
}

/// Seeded shuffle-and-cut split; returns (train, test).
pub fn train_test_split(
    samples: &[TextSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<TextSample>, Vec<TextSample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_fraction} must be in (0, 1)"
        )));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (samples.len() as f64 * train_fraction).round() as usize;
    let (train, test) = idx.split_at(cut);
    let pick = |ix: &[usize]| {
        let mut ix = ix.to_vec();
        ix.sort_unstable();
        ix.into_iter().map(|i| samples[i].clone()).collect::<Vec<_>>()
    };
    Ok((pick(train), pick(test)))
}
