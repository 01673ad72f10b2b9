//! Checkpoint container: one human-readable JSON header (format version,
//! variant flags, label set, vocabularies with digests, tensor directory)
//! followed by raw little-endian f64 payloads in directory order.
//!
//! The first line is `slotner-checkpoint <version> <header-bytes>`; the
//! header follows verbatim, then a newline, then the payload. Loading
//! rebuilds a model skeleton from the header and overwrites its tensors, so
//! the stored directory is validated against exactly the inventory the
//! variant flags require.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::embeddings::{digest_lines, CharVocabulary, EmbeddingTable, Vocabulary};
use crate::{Error, Result};

use super::{TaggerModel, VariantConfig};

const MAGIC: &str = "slotner-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset of this tensor's payload, relative to the payload start.
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    variant: VariantConfig,
    labels: Vec<String>,
    labels_sha256: String,
    vocab_tokens: Vec<String>,
    vocab_sha256: String,
    char_vocab_entries: Option<Vec<String>>,
    char_vocab_sha256: Option<String>,
    word_dim: usize,
    word_frozen: bool,
    tensors: Vec<TensorEntry>,
}

pub(super) fn save(model: &TaggerModel, path: &Path) -> Result<()> {
    let named = model.named_tensors();
    let mut tensors = Vec::with_capacity(named.len());
    let mut payload: Vec<u8> = Vec::new();
    for (name, tensor) in &named {
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: tensor.shape(),
            offset: payload.len() as u64,
        });
        for v in tensor.data().iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        format: MAGIC.to_string(),
        version: VERSION,
        variant: model.variant,
        labels: model.labels.labels().to_vec(),
        labels_sha256: digest_lines(model.labels.labels()),
        vocab_tokens: model.vocab.tokens().to_vec(),
        vocab_sha256: model.vocab.sha256_hex(),
        char_vocab_entries: model.char_cnn.as_ref().map(|c| c.char_vocab.entries().to_vec()),
        char_vocab_sha256: model.char_cnn.as_ref().map(|c| c.char_vocab.sha256_hex()),
        word_dim: model.word_table.dim,
        word_frozen: model.word_table.frozen,
        tensors,
    };
    let header_json = serde_json::to_string_pretty(&header).expect("header serialization");

    let mut bytes = Vec::with_capacity(header_json.len() + payload.len() + 64);
    bytes.extend_from_slice(format!("{MAGIC} {VERSION} {}\n", header_json.len()).as_bytes());
    bytes.extend_from_slice(header_json.as_bytes());
    bytes.push(b'\n');
    bytes.extend_from_slice(&payload);

    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CheckpointCorrupt(msg.into())
}

pub(super) fn load(path: &Path) -> Result<TaggerModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;

    let line_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("missing header line"))?;
    let first_line = std::str::from_utf8(&bytes[..line_end])
        .map_err(|_| corrupt("header line is not UTF-8"))?;
    let fields: Vec<&str> = first_line.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != MAGIC {
        return Err(corrupt(format!("unrecognized header line {first_line:?}")));
    }
    let version: u32 = fields[1]
        .parse()
        .map_err(|_| corrupt(format!("bad version field {:?}", fields[1])))?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: fields[1].to_string(),
            supported: VERSION,
        });
    }
    let header_len: usize = fields[2]
        .parse()
        .map_err(|_| corrupt(format!("bad header length field {:?}", fields[2])))?;

    let header_start = line_end + 1;
    let header_end = header_start + header_len;
    if bytes.len() < header_end + 1 {
        return Err(corrupt("truncated header"));
    }
    let header_json = std::str::from_utf8(&bytes[header_start..header_end])
        .map_err(|_| corrupt("header is not UTF-8"))?;
    let header: Header =
        serde_json::from_str(header_json).map_err(|e| corrupt(format!("bad header JSON: {e}")))?;
    if header.format != MAGIC {
        return Err(corrupt(format!("bad format field {:?}", header.format)));
    }
    if header.version != VERSION {
        return Err(Error::CheckpointVersion {
            found: header.version.to_string(),
            supported: VERSION,
        });
    }
    let payload = &bytes[header_end + 1..];

    if digest_lines(&header.vocab_tokens) != header.vocab_sha256 {
        return Err(corrupt("vocabulary digest mismatch"));
    }
    if digest_lines(&header.labels) != header.labels_sha256 {
        return Err(corrupt("label set digest mismatch"));
    }
    let vocab = Vocabulary::from_tokens(header.vocab_tokens.clone())?;
    let labels = LabelSet::from_labels(header.labels.clone())?;
    let char_vocab = match (&header.char_vocab_entries, header.variant.use_char) {
        (Some(entries), true) => {
            if let Some(stored) = &header.char_vocab_sha256 {
                if &digest_lines(entries) != stored {
                    return Err(corrupt("character vocabulary digest mismatch"));
                }
            }
            Some(CharVocabulary::from_entries(entries.clone())?)
        }
        (None, false) => None,
        (Some(_), false) => {
            return Err(Error::CheckpointInventory(
                "character vocabulary stored but the variant disables the char channel".into(),
            ))
        }
        (None, true) => {
            return Err(Error::CheckpointInventory(
                "variant enables the char channel but no character vocabulary is stored".into(),
            ))
        }
    };

    // Skeleton with the right inventory; every tensor gets overwritten below.
    let table = EmbeddingTable::from_raw(
        vec![0.0; vocab.len() * header.word_dim],
        vocab.len(),
        header.word_dim,
        header.word_frozen,
        header.variant.embedding_regime,
    );
    let model = TaggerModel::new(header.variant, vocab, char_vocab, labels, table, 0)?;

    let expected = model.named_tensors();
    let stored: std::collections::HashMap<&str, &TensorEntry> = header
        .tensors
        .iter()
        .map(|e| (e.name.as_str(), e))
        .collect();
    for (name, tensor) in &expected {
        let entry = stored.get(name.as_str()).ok_or_else(|| {
            Error::CheckpointInventory(format!(
                "tensor {name} required by the variant flags is missing"
            ))
        })?;
        if entry.shape != tensor.shape() {
            return Err(Error::CheckpointShape {
                tensor: name.clone(),
                expected: tensor.shape(),
                found: entry.shape.clone(),
            });
        }
    }
    if header.tensors.len() != expected.len() {
        let expected_names: std::collections::HashSet<&str> =
            expected.iter().map(|(n, _)| n.as_str()).collect();
        let extra: Vec<&str> = header
            .tensors
            .iter()
            .map(|e| e.name.as_str())
            .filter(|n| !expected_names.contains(n))
            .collect();
        return Err(Error::CheckpointInventory(format!(
            "directory contains tensors the variant does not define: {extra:?}"
        )));
    }

    for (name, tensor) in &expected {
        let entry = stored[name.as_str()];
        let numel: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + numel * 8;
        if end > payload.len() {
            return Err(corrupt(format!("truncated payload while reading {name}")));
        }
        let mut data = Vec::with_capacity(numel);
        for chunk in payload[start..end].chunks_exact(8) {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(corrupt(format!("non-finite value in tensor {name}")));
            }
            data.push(v);
        }
        tensor.set_data(&data);
    }

    Ok(model)
}
