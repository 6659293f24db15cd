//! Transcript persistence: one simulation per line, UTF-8 JSONL with a
//! fixed field order and a schema version field.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::engine::Transcript;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Decode {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: unsupported transcript version {found}")]
    Version {
        path: String,
        line: usize,
        found: u32,
    },
}

fn io_error(path: &Path, source: std::io::Error) -> PersistError {
    PersistError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes one transcript to its canonical single-line form.
pub fn transcript_line(transcript: &Transcript) -> String {
    serde_json::to_string(transcript).expect("transcripts always serialize")
}

/// Writes transcripts in the given order, one per line.
pub fn write_transcripts(path: &Path, transcripts: &[Transcript]) -> Result<(), PersistError> {
    let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    let mut writer = BufWriter::new(file);
    for transcript in transcripts {
        writeln!(writer, "{}", transcript_line(transcript)).map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

/// Reads every transcript in the file, validating the version field.
pub fn read_transcripts(path: &Path) -> Result<Vec<Transcript>, PersistError> {
    let contents = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut transcripts = Vec::new();
    for (index, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let transcript: Transcript =
            serde_json::from_str(line).map_err(|source| PersistError::Decode {
                path: path.display().to_string(),
                line: index + 1,
                source,
            })?;
        if transcript.v != crate::engine::TRANSCRIPT_VERSION {
            return Err(PersistError::Version {
                path: path.display().to_string(),
                line: index + 1,
                found: transcript.v,
            });
        }
        transcripts.push(transcript);
    }
    Ok(transcripts)
}
