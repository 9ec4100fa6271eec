//! File formats: the binary observation container, the ground-truth JSON,
//! and the latent-label sidecar CSV.
//!
//! Observation files are little-endian: the magic `"MRA1"`, a `u32 L`, a
//! `u64 N` and an `f64 sigma`, followed by `N` records of `L` f64 samples,
//! row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::simulate::{GroundTruth, Observation};
use crate::{Error, MixingWeights, Result, SignalSet};

const MAGIC: &[u8; 4] = b"MRA1";

/// Streaming writer for the binary observation format.
pub struct ObservationWriter {
    out: BufWriter<File>,
    l: usize,
    expected: u64,
    written: u64,
}

impl ObservationWriter {
    pub fn create(path: &Path, l: usize, n: u64, sigma: f64) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&u32::try_from(l).map_err(|_| Error::Format("L exceeds u32".into()))?.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&sigma.to_le_bytes())?;
        Ok(ObservationWriter { out, l, expected: n, written: 0 })
    }

    pub fn write_batch(&mut self, batch: &[Observation]) -> Result<()> {
        for obs in batch {
            if obs.y.len() != self.l {
                return Err(Error::Dimension(format!(
                    "observation of length {} into an L={} file",
                    obs.y.len(),
                    self.l
                )));
            }
            for v in &obs.y {
                self.out.write_all(&v.to_le_bytes())?;
            }
            self.written += 1;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.expected {
            return Err(Error::Format(format!(
                "header promised {} observations but {} were written",
                self.expected, self.written
            )));
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Batched reader for the binary observation format.
pub struct ObservationReader {
    input: BufReader<File>,
    l: usize,
    n: u64,
    sigma: f64,
    read: u64,
}

impl ObservationReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(|_| truncated())?;
        if &magic != MAGIC {
            return Err(Error::Format("not an observation file (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4).map_err(|_| truncated())?;
        let l = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8).map_err(|_| truncated())?;
        let n = u64::from_le_bytes(b8);
        input.read_exact(&mut b8).map_err(|_| truncated())?;
        let sigma = f64::from_le_bytes(b8);
        if l < 2 {
            return Err(Error::Format(format!("observation file carries L={l}")));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Format(format!("observation file carries sigma={sigma}")));
        }
        Ok(ObservationReader { input, l, n, sigma, read: 0 })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Next batch of up to `max` observations; `None` once all `N` records
    /// were delivered.
    pub fn read_batch(&mut self, max: usize) -> Result<Option<Vec<Vec<f64>>>> {
        if self.read == self.n {
            return Ok(None);
        }
        let take = (max as u64).min(self.n - self.read) as usize;
        let mut batch = Vec::with_capacity(take);
        let mut buf = vec![0u8; self.l * 8];
        for _ in 0..take {
            self.input.read_exact(&mut buf).map_err(|_| truncated())?;
            batch.push(
                buf.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                    .collect(),
            );
        }
        self.read += take as u64;
        Ok(Some(batch))
    }

    /// Remaining observations, all in memory.
    pub fn read_all(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut all = Vec::with_capacity((self.n - self.read) as usize);
        while let Some(batch) = self.read_batch(8192)? {
            all.extend(batch);
        }
        Ok(all)
    }
}

fn truncated() -> Error {
    Error::Format("observation file is truncated".into())
}

/// Latent labels `(r_j, v_j)`, written only under an explicit flag so the
/// estimation path cannot quietly depend on them.
pub fn write_labels_csv(path: &Path, observations: &[Observation]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "r,v")?;
    for obs in observations {
        writeln!(out, "{},{}", obs.shift, obs.class)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TruthJson {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "K")]
    k: usize,
    sigma: f64,
    signals: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Serializes a ground truth (signals, weights, sigma) as JSON.
pub fn truth_to_json(truth: &GroundTruth) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TruthJson {
        l: truth.l(),
        k: truth.k(),
        sigma: truth.sigma(),
        signals: truth.signals().rows(),
        weights: truth.weights().values().to_vec(),
    })?)
}

pub fn truth_from_json(text: &str) -> Result<GroundTruth> {
    let raw: TruthJson = serde_json::from_str(text)?;
    let signals = SignalSet::from_rows(raw.signals)?;
    if signals.k() != raw.k || signals.l() != raw.l {
        return Err(Error::Format("truth header disagrees with signal block".into()));
    }
    let weights = MixingWeights::new(raw.weights)?;
    GroundTruth::new(signals, weights, raw.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{collect_observations, generate_signals};

    fn temp_path(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("hetmra-io-test-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn observation_file_round_trip() {
        let set = generate_signals(2, 5, 1).unwrap();
        let truth = GroundTruth::new(set, MixingWeights::uniform(2).unwrap(), 0.3).unwrap();
        let obs = collect_observations(&truth, 37, 9).unwrap();

        let path = temp_path("roundtrip.bin");
        let mut writer = ObservationWriter::create(&path, 5, 37, 0.3).unwrap();
        for chunk in obs.chunks(10) {
            writer.write_batch(chunk).unwrap();
        }
        writer.finish().unwrap();

        let mut reader = ObservationReader::open(&path).unwrap();
        assert_eq!(reader.l(), 5);
        assert_eq!(reader.n(), 37);
        assert_eq!(reader.sigma(), 0.3);
        let back = reader.read_all().unwrap();
        assert_eq!(back.len(), 37);
        for (a, b) in obs.iter().zip(&back) {
            assert_eq!(&a.y, b);
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn malformed_files_are_rejected() {
        let path = temp_path("bad.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(ObservationReader::open(&path).is_err());

        // Valid header, truncated body.
        let mut writer = ObservationWriter::create(&path, 4, 10, 0.0).unwrap();
        writer
            .write_batch(&[Observation { y: vec![0.0; 4], shift: 0, class: 0 }])
            .unwrap();
        assert!(writer.finish().is_err());
        let mut reader = ObservationReader::open(&path).unwrap();
        assert!(reader.read_all().is_err());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn truth_json_round_trip() {
        let set = generate_signals(2, 6, 12).unwrap();
        let truth = GroundTruth::new(set, MixingWeights::new(vec![0.2, 0.8]).unwrap(), 1.5).unwrap();
        let text = truth_to_json(&truth).unwrap();
        let back = truth_from_json(&text).unwrap();
        assert_eq!(back.signals(), truth.signals());
        assert_eq!(back.weights(), truth.weights());
        assert_eq!(back.sigma(), 1.5);
    }

    #[test]
    fn labels_csv_has_header_and_rows() {
        let path = temp_path("labels.csv");
        let obs = vec![
            Observation { y: vec![0.0; 2], shift: 3, class: 1 },
            Observation { y: vec![0.0; 2], shift: 0, class: 0 },
        ];
        write_labels_csv(&path, &obs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "r,v\n3,1\n0,0\n");
        std::fs::remove_file(&path).ok();
    }
}
