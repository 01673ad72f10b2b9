use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::Tensor;
use crate::{Error, Result};

use super::vocab::{Vocabulary, PAD_ID, UNK_ID};

/// Rows for in-vocabulary tokens missing from a pre-trained file are drawn
/// with this fixed seed, so loads are reproducible across runs and machines.
const MISSING_ROW_SEED: u64 = 0x5eed_f111;

/// Which embedding source a table came from. The four named regimes are
/// frozen during training; `custom` is a randomly initialized trainable
/// table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingRegime {
    Sg300,
    G50w,
    G300w,
    G300c,
    Custom,
}

impl EmbeddingRegime {
    pub const ALL: [EmbeddingRegime; 5] = [
        EmbeddingRegime::Sg300,
        EmbeddingRegime::G50w,
        EmbeddingRegime::G300w,
        EmbeddingRegime::G300c,
        EmbeddingRegime::Custom,
    ];

    pub fn parse(s: &str) -> Result<EmbeddingRegime> {
        match s.to_lowercase().as_str() {
            "sg300" | "sgns300" | "sgns" => Ok(EmbeddingRegime::Sg300),
            "g50w" => Ok(EmbeddingRegime::G50w),
            "g300w" => Ok(EmbeddingRegime::G300w),
            "g300c" => Ok(EmbeddingRegime::G300c),
            "custom" => Ok(EmbeddingRegime::Custom),
            other => Err(Error::Config(format!(
                "unknown embedding regime {other:?} (expected sg300, g50w, g300w, g300c or custom)"
            ))),
        }
    }
}

impl fmt::Display for EmbeddingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EmbeddingRegime::Sg300 => "SGNS300",
            EmbeddingRegime::G50w => "G50W",
            EmbeddingRegime::G300w => "G300W",
            EmbeddingRegime::G300c => "G300C",
            EmbeddingRegime::Custom => "custom",
        };
        f.write_str(name)
    }
}

/// Word-vector table aligned with a vocabulary: row `i` embeds token `i`.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    /// `[V, dim]`; a trainable tensor unless `frozen`.
    pub vectors: Tensor,
    pub dim: usize,
    pub frozen: bool,
    pub source: EmbeddingRegime,
}

impl EmbeddingTable {
    /// Random table with PAD and UNK rows zeroed. Frozen tables never receive
    /// gradient updates.
    pub fn random(
        vocab: &Vocabulary,
        dim: usize,
        frozen: bool,
        source: EmbeddingRegime,
        seed: u64,
    ) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 0.5 / dim as f64;
        let mut data = vec![0.0; vocab.len() * dim];
        for row in 2..vocab.len() {
            for c in 0..dim {
                data[row * dim + c] = rng.gen_range(-bound..bound);
            }
        }
        EmbeddingTable::from_raw(data, vocab.len(), dim, frozen, source)
    }

    pub fn from_raw(
        data: Vec<f64>,
        rows: usize,
        dim: usize,
        frozen: bool,
        source: EmbeddingRegime,
    ) -> EmbeddingTable {
        let vectors = if frozen {
            Tensor::new(data, &[rows, dim]).expect("table shape")
        } else {
            Tensor::param(data, &[rows, dim]).expect("table shape")
        };
        EmbeddingTable {
            vectors,
            dim,
            frozen,
            source,
        }
    }

    pub fn row_count(&self) -> usize {
        self.vectors.shape()[0]
    }
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

/// Load vectors from the plain-text format `token v1 ... vd`, one entry per
/// line, optionally preceded by a `V d` header line (auto-detected as a line
/// of exactly two integer fields).
///
/// Rows for vocabulary tokens found in the file are copied verbatim; missing
/// tokens get seeded Uniform(-0.5/d, 0.5/d) rows; UNK and PAD stay zero. The
/// result is always frozen.
pub fn load_pretrained(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    source: EmbeddingRegime,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut dim: Option<usize> = None;
    let mut data: Vec<f64> = Vec::new();
    let mut filled: Vec<bool> = Vec::new();
    let mut line_no = 0;
    for line in reader.lines() {
        line_no += 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 && is_header(&fields) {
            dim = Some(fields[1].parse().unwrap());
            continue;
        }
        let d = match dim {
            Some(d) => d,
            None => {
                if fields.len() < 2 {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "expected a token followed by vector components".into(),
                    });
                }
                let d = fields.len() - 1;
                dim = Some(d);
                data = vec![0.0; vocab.len() * d];
                filled = vec![false; vocab.len()];
                d
            }
        };
        if data.is_empty() {
            data = vec![0.0; vocab.len() * d];
            filled = vec![false; vocab.len()];
        }
        if fields.len() != d + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!(
                    "entry has {} vector components, expected {d}",
                    fields.len() - 1
                ),
            });
        }
        let token = fields[0].to_lowercase();
        let Some(id) = vocab.id_of(&token) else {
            continue;
        };
        if id == PAD_ID || id == UNK_ID || filled[id] {
            continue; // specials stay zero; the first occurrence of a token wins
        }
        for (c, field) in fields[1..].iter().enumerate() {
            data[id * d + c] = field.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("component {:?} is not a number", field),
            })?;
        }
        filled[id] = true;
    }

    let Some(d) = dim else {
        return Err(Error::EmptyInput(format!(
            "vector file {} has no entries",
            path.display()
        )));
    };
    if data.is_empty() {
        data = vec![0.0; vocab.len() * d];
        filled = vec![false; vocab.len()];
    }

    // Seeded rows for in-vocab tokens the file does not cover.
    let mut rng = ChaCha8Rng::seed_from_u64(MISSING_ROW_SEED);
    let bound = 0.5 / d as f64;
    for id in 2..vocab.len() {
        if filled[id] {
            continue;
        }
        for c in 0..d {
            data[id * d + c] = rng.gen_range(-bound..bound);
        }
    }

    Ok(EmbeddingTable::from_raw(data, vocab.len(), d, true, source))
}

/// Write a table in the format [`load_pretrained`] reads, with a `V d`
/// header. The PAD and UNK rows are omitted.
pub fn save_vectors(
    table: &EmbeddingTable,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let data = table.vectors.data();
    let d = table.dim;
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", vocab.len().saturating_sub(2), d));
    for id in 2..vocab.len() {
        out.push_str(vocab.token(id));
        for c in 0..d {
            out.push(' ');
            out.push_str(&format!("{}", data[id * d + c]));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        Vocabulary::build(tokens.iter().copied(), 1).unwrap()
    }

    fn write_file(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn reads_rows_verbatim() {
        let v = vocab(&["hello", "world"]);
        let (_d, path) = write_file("hello 0.1 0.2\nworld -1 2\n");
        let table = load_pretrained(&path, &v, EmbeddingRegime::G50w).unwrap();
        assert_eq!(table.dim, 2);
        assert!(table.frozen);
        let id = v.lookup("hello");
        let data = table.vectors.to_vec();
        assert_eq!(&data[id * 2..id * 2 + 2], &[0.1, 0.2]);
    }

    #[test]
    fn header_line_is_autodetected() {
        let v = vocab(&["hello"]);
        let (_d, path) = write_file("1 2\nhello 0.5 0.25\n");
        let table = load_pretrained(&path, &v, EmbeddingRegime::G300w).unwrap();
        assert_eq!(table.dim, 2);
        let id = v.lookup("hello");
        assert_eq!(&table.vectors.to_vec()[id * 2..id * 2 + 2], &[0.5, 0.25]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let v = vocab(&["hello"]);
        let (_d, path) = write_file("hello 0.1 0.2\nbroken 0.1\n");
        let err = load_pretrained(&path, &v, EmbeddingRegime::G50w).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_tokens_get_bounded_seeded_rows() {
        let v = vocab(&["hello", "absent"]);
        let (_d, path) = write_file("hello 0.1 0.2\n");
        let a = load_pretrained(&path, &v, EmbeddingRegime::G50w).unwrap();
        let b = load_pretrained(&path, &v, EmbeddingRegime::G50w).unwrap();
        assert_eq!(a.vectors.to_vec(), b.vectors.to_vec());
        let id = v.lookup("absent");
        let row = &a.vectors.to_vec()[id * 2..id * 2 + 2];
        let bound = 0.5 / 2.0;
        assert!(row.iter().all(|x| x.abs() < bound));
        assert!(row.iter().any(|x| *x != 0.0));
    }

    #[test]
    fn unk_row_is_zero() {
        let v = vocab(&["hello"]);
        let (_d, path) = write_file("hello 0.1 0.2\n<unk> 9 9\n");
        let table = load_pretrained(&path, &v, EmbeddingRegime::G50w).unwrap();
        assert_eq!(&table.vectors.to_vec()[UNK_ID * 2..UNK_ID * 2 + 2], &[0.0, 0.0]);
    }

    #[test]
    fn save_then_load_roundtrips() {
        let v = vocab(&["alpha", "beta", "gamma"]);
        let table = EmbeddingTable::random(&v, 3, true, EmbeddingRegime::Custom, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.txt");
        save_vectors(&table, &v, &path).unwrap();
        let reloaded = load_pretrained(&path, &v, EmbeddingRegime::Custom).unwrap();
        assert_eq!(table.vectors.to_vec(), reloaded.vectors.to_vec());
    }

    #[test]
    fn frozen_table_takes_no_gradient() {
        let v = vocab(&["alpha"]);
        let table = EmbeddingTable::random(&v, 2, true, EmbeddingRegime::G50w, 1);
        let picked = table.vectors.lookup_rows(&[2]).unwrap();
        picked.sum().backward().unwrap();
        assert!(table.vectors.grad().is_none());
    }
}
