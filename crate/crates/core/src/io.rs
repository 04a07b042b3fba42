//! JSON state and channel files.
//!
//! State: `{"dim": d, "entries": [[re, im], ...]}`, row-major.
//! Channel: `{"d": d, "kraus": [[[re, im], ...], ...]}`, row-major per operator.
//!
//! Floats are written in shortest round-trip form, so a written file
//! reloads bit-identically.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{KrausChannel, INCOHERENT_TOL};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::states::DensityMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    pub d: usize,
    pub kraus: Vec<Vec<[f64; 2]>>,
}

fn to_pairs(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    m.to_row_major().iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(dim: usize, pairs: &[[f64; 2]]) -> Result<ComplexMatrix> {
    let entries: Vec<Complex64> = pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    ComplexMatrix::from_row_major(dim, &entries)
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        Self {
            dim: rho.dim(),
            entries: to_pairs(rho.matrix()),
        }
    }

    /// Validates and builds the density matrix.
    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(from_pairs(self.dim, &self.entries)?)
    }
}

impl ChannelFile {
    pub fn from_channel(ch: &KrausChannel) -> Self {
        Self {
            d: ch.dim(),
            kraus: ch.kraus().iter().map(to_pairs).collect(),
        }
    }

    /// Builds the channel (completeness enforced) and reports whether it is
    /// incoherent.
    pub fn to_channel(&self) -> Result<(KrausChannel, bool)> {
        let kraus = self
            .kraus
            .iter()
            .map(|k| from_pairs(self.d, k))
            .collect::<Result<Vec<_>>>()?;
        let ch = KrausChannel::new(kraus)?;
        let incoherent = ch.is_incoherent(INCOHERENT_TOL);
        Ok((ch, incoherent))
    }
}

pub fn parse_state(json: &str) -> Result<DensityMatrix> {
    let file: StateFile = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_state()
}

pub fn parse_channel(json: &str) -> Result<(KrausChannel, bool)> {
    let file: ChannelFile = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_channel()
}

pub fn state_to_json(rho: &DensityMatrix) -> String {
    serde_json::to_string_pretty(&StateFile::from_state(rho)).expect("plain data serializes")
}

pub fn channel_to_json(ch: &KrausChannel) -> String {
    serde_json::to_string_pretty(&ChannelFile::from_channel(ch)).expect("plain data serializes")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn load_state(path: &Path) -> Result<DensityMatrix> {
    parse_state(&read(path)?)
}

pub fn load_channel(path: &Path) -> Result<(KrausChannel, bool)> {
    parse_channel(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::random_incoherent_channel;
    use crate::rng::RngSeed;
    use crate::states::random_density;

    #[test]
    fn state_round_trip_is_exact() {
        let mut rng = RngSeed(41).stream();
        let rho = random_density(3, 2, &mut rng).unwrap();
        let back = parse_state(&state_to_json(&rho)).unwrap();
        assert_eq!(back.matrix(), rho.matrix());
    }

    #[test]
    fn channel_round_trip_is_exact() {
        let mut rng = RngSeed(42).stream();
        let ch = random_incoherent_channel(3, 3, &mut rng).unwrap();
        let (back, incoherent) = parse_channel(&channel_to_json(&ch)).unwrap();
        assert!(incoherent);
        assert_eq!(back, ch);
    }

    #[test]
    fn invalid_files_rejected() {
        assert!(matches!(parse_state("{\"dim\": 2}"), Err(Error::Parse(_))));
        let bad_trace = r#"{"dim": 2, "entries": [[1,0],[0,0],[0,0],[1,0]]}"#;
        assert!(matches!(parse_state(bad_trace), Err(Error::BadTrace(_))));
        let bad_shape = r#"{"dim": 2, "entries": [[1,0]]}"#;
        assert!(matches!(parse_state(bad_shape), Err(Error::BadShape { .. })));
        let incomplete = r#"{"d": 1, "kraus": [[[0.5, 0]]]}"#;
        assert!(matches!(parse_channel(incomplete), Err(Error::NotComplete(_))));
    }

    #[test]
    fn hadamard_channel_reported_coherent() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let json = format!(r#"{{"d": 2, "kraus": [[[{s},0],[{s},0],[{s},0],[-{s},0]]]}}"#);
        let (_, incoherent) = parse_channel(&json).unwrap();
        assert!(!incoherent);
    }
}
