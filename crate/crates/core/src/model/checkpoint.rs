//! Checkpoint serialization: one JSON document with lexicographically sorted
//! keys, every tensor as nested row-major arrays. Writing the same model
//! twice yields byte-identical files, and values round-trip exactly
//! (shortest-representation floats).

use super::{ModelConfig, ModelError, ModelParameters};
use serde_json::{json, Map, Value};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// A loaded checkpoint: the model plus its training identity.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParameters,
    pub seed: u64,
    /// Phoneme symbol table; index = embedding row. Sorted, so symbol->id is
    /// reproducible from data.
    pub phoneme_symbols: Vec<String>,
    /// True when the model was trained with listener states zeroed; such a
    /// model must also be run blind at inference time.
    pub visual_blind: bool,
}

fn tensor_to_value(shape: &[usize], data: &[f64]) -> Value {
    match shape {
        [_] => Value::Array(data.iter().map(|v| json!(v)).collect()),
        [rows, cols] => Value::Array(
            (0..*rows)
                .map(|r| {
                    Value::Array(
                        data[r * cols..(r + 1) * cols]
                            .iter()
                            .map(|v| json!(v))
                            .collect(),
                    )
                })
                .collect(),
        ),
        other => unreachable!("tensors are rank 1 or 2, got rank {}", other.len()),
    }
}

fn value_to_tensor(name: &str, shape: &[usize], value: &Value) -> Result<Vec<f64>, ModelError> {
    let err = |msg: String| ModelError::Checkpoint(format!("tensor {name}: {msg}"));
    let rows = value
        .as_array()
        .ok_or_else(|| err("expected an array".into()))?;
    match shape {
        [n] => {
            if rows.len() != *n {
                return Err(err(format!("expected {n} values, found {}", rows.len())));
            }
            rows.iter()
                .map(|v| v.as_f64().ok_or_else(|| err("non-numeric entry".into())))
                .collect()
        }
        [r, c] => {
            if rows.len() != *r {
                return Err(err(format!("expected {r} rows, found {}", rows.len())));
            }
            let mut data = Vec::with_capacity(r * c);
            for row in rows {
                let cols = row
                    .as_array()
                    .ok_or_else(|| err("expected a row array".into()))?;
                if cols.len() != *c {
                    return Err(err(format!("expected {c} columns, found {}", cols.len())));
                }
                for v in cols {
                    data.push(v.as_f64().ok_or_else(|| err("non-numeric entry".into()))?);
                }
            }
            Ok(data)
        }
        other => unreachable!("tensors are rank 1 or 2, got rank {}", other.len()),
    }
}

/// Serialize to the canonical JSON text (trailing newline included).
pub fn save_checkpoint(
    params: &ModelParameters,
    seed: u64,
    phoneme_symbols: &[String],
    visual_blind: bool,
) -> String {
    // serde_json's default Map is a BTreeMap, so object keys come out sorted.
    let mut tensors = Map::new();
    for (name, shape, data) in params.named_tensors() {
        tensors.insert(name, tensor_to_value(&shape, data));
    }
    let doc = json!({
        "config": serde_json::to_value(&params.config).expect("config serializes"),
        "params": Value::Object(tensors),
        "phoneme_symbols": phoneme_symbols,
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "seed": seed,
        "visual_blind": visual_blind,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("checkpoint serializes");
    text.push('\n');
    text
}

/// Parse a checkpoint document and rebuild the model bit-exactly.
pub fn load_checkpoint(text: &str) -> Result<Checkpoint, ModelError> {
    let err = |msg: String| ModelError::Checkpoint(msg);
    let doc: Value =
        serde_json::from_str(text).map_err(|e| err(format!("invalid JSON: {e}")))?;
    let version = doc
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| err("missing schema_version".into()))?;
    if version != CHECKPOINT_SCHEMA_VERSION as u64 {
        return Err(err(format!(
            "unsupported schema_version {version}, expected {CHECKPOINT_SCHEMA_VERSION}"
        )));
    }
    let config: ModelConfig = serde_json::from_value(
        doc.get("config").cloned().ok_or_else(|| err("missing config".into()))?,
    )
    .map_err(|e| err(format!("bad config: {e}")))?;
    config.validate()?;
    let seed = doc
        .get("seed")
        .and_then(Value::as_u64)
        .ok_or_else(|| err("missing seed".into()))?;
    let phoneme_symbols: Vec<String> = serde_json::from_value(
        doc.get("phoneme_symbols")
            .cloned()
            .unwrap_or_else(|| json!([])),
    )
    .map_err(|e| err(format!("bad phoneme_symbols: {e}")))?;
    if !phoneme_symbols.is_empty() && phoneme_symbols.len() != config.phoneme_vocab {
        return Err(err(format!(
            "phoneme_symbols has {} entries but vocab is {}",
            phoneme_symbols.len(),
            config.phoneme_vocab
        )));
    }

    let tensors = doc
        .get("params")
        .and_then(Value::as_object)
        .ok_or_else(|| err("missing params object".into()))?;
    let mut params = ModelParameters::init(&config, seed)?;
    // Overwrite every tensor from the document; all must be present.
    let expected: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    for ((name, shape), (mut_name, slot)) in
        expected.iter().zip(params.named_tensors_mut())
    {
        debug_assert_eq!(name, &mut_name);
        let value = tensors
            .get(name)
            .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {name}")))?;
        let data = value_to_tensor(name, shape, value)?;
        slot.copy_from_slice(&data);
    }
    if tensors.len() != expected.len() {
        return Err(err(format!(
            "checkpoint has {} tensors, model expects {}",
            tensors.len(),
            expected.len()
        )));
    }
    let visual_blind = doc
        .get("visual_blind")
        .and_then(Value::as_bool)
        .unwrap_or(false);
    Ok(Checkpoint {
        params,
        seed,
        phoneme_symbols,
        visual_blind,
    })
}
