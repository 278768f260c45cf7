//! JSONL dataset files: one `{"id", "T", "events": [{"t", "y"}]}` object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use super::sequence::EventSequence;
use crate::error::{Error, Result};
use crate::rng;

pub fn save_jsonl(path: impl AsRef<Path>, seqs: &[EventSequence]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in seqs {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load and validate a dataset. Blank lines are skipped; errors carry the 1-based line number.
pub fn load_jsonl(path: impl AsRef<Path>, num_types: Option<usize>) -> Result<Vec<EventSequence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: EventSequence = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            path: shown.clone(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        seq.validate(num_types).map_err(|msg| Error::Dataset {
            path: shown.clone(),
            line: i + 1,
            msg,
        })?;
        out.push(seq);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<EventSequence>,
    pub val: Vec<EventSequence>,
    pub test: Vec<EventSequence>,
}

/// Seeded shuffle then cut into train/val/test by `fractions` (renormalized).
/// Train and validation sizes are rounded; test takes the remainder.
pub fn split(mut seqs: Vec<EventSequence>, fractions: [f64; 3], seed: u64) -> Result<Splits> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || fractions.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument(format!("bad split fractions {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    let n = seqs.len();
    let n_train = ((fractions[0] / total) * n as f64).round() as usize;
    let n_val = (((fractions[1] / total) * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    seqs.shuffle(&mut rng::stream(seed, &[0x5917]));
    let test = seqs.split_off(n_train + n_val);
    let val = seqs.split_off(n_train);
    Ok(Splits {
        train: seqs,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Event;

    fn seqs(n: usize) -> Vec<EventSequence> {
        (0..n)
            .map(|i| EventSequence::new(i.to_string(), 2.0, vec![Event::new(0.5 + i as f64 * 1e-3, 0)]))
            .collect()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let mut data = seqs(5);
        data[2].events.push(Event::new(1.0 / 3.0 + 1.0, 1));
        save_jsonl(&p, &data).unwrap();
        let back = load_jsonl(&p, Some(2)).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"T\":1,\"events\":[]}\n{\"id\":\"b\",\"T\":1,\"events\":[{\"t\":0.5}]}\n",
        )
        .unwrap();
        let err = load_jsonl(&p, None).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn invariant_violation_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        std::fs::write(
            &p,
            "\n{\"id\":\"a\",\"T\":3,\"events\":[{\"t\":2,\"y\":0},{\"t\":1,\"y\":0}]}\n",
        )
        .unwrap();
        let err = load_jsonl(&p, None).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
        std::fs::write(&p, "{\"id\":\"a\",\"T\":3,\"events\":[{\"t\":2,\"y\":4}]}\n").unwrap();
        let err = load_jsonl(&p, Some(2)).unwrap_err().to_string();
        assert!(err.contains(":1:") && err.contains("type 4"), "{err}");
    }

    #[test]
    fn split_sizes() {
        let s = split(seqs(100), [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
        let again = split(seqs(100), [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!(s, again);
    }
}
