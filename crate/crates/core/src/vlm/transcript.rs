//! JSON Lines request transcripts, used for auditing live runs and as the
//! script a [`ScriptedMock`](super::ScriptedMock) replays.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

/// One request on the wire and what came back.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranscriptRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
    pub prompt: String,
    pub image_digests: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency: f64,
}

pub fn image_digest(png: &[u8]) -> String {
    let d = Sha256::digest(png);
    let hex: String = d.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, GatewayError> {
    let file = File::open(path).map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
    parse_transcript(BufReader::new(file))
}

pub fn parse_transcript(reader: impl BufRead) -> Result<Vec<TranscriptRecord>, GatewayError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GatewayError::Transcript(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| GatewayError::Transcript(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Append-only transcript sink.
pub struct TranscriptWriter {
    file: File,
}

impl TranscriptWriter {
    pub fn append(path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
        Ok(Self { file })
    }

    pub fn write(&mut self, rec: &TranscriptRecord) -> Result<(), GatewayError> {
        let line = serde_json::to_string(rec).map_err(|e| GatewayError::Transcript(e.to_string()))?;
        writeln!(self.file, "{line}").map_err(|e| GatewayError::Transcript(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_format() {
        let d = image_digest(b"abc");
        assert_eq!(
            d,
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn skips_blank_lines_and_defaults_fields() {
        let recs =
            parse_transcript("{\"response\":\"chair\"}\n\n{\"error\":\"503\",\"latency\":1.5}\n".as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].response.as_deref(), Some("chair"));
        assert_eq!(recs[1].latency, 1.5);
        assert!(parse_transcript("{not json".as_bytes()).is_err());
    }

    #[test]
    fn writer_appends() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        for i in 0..2 {
            let mut w = TranscriptWriter::append(&p).unwrap();
            w.write(&TranscriptRecord {
                latency: i as f64,
                ..Default::default()
            })
            .unwrap();
        }
        assert_eq!(read_transcript(&p).unwrap().len(), 2);
    }
}
