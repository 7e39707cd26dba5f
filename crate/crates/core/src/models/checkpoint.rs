//! Versioned JSON checkpoints. Floats are written with shortest round-trip
//! formatting, so save/load reproduces weights bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkState;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "support-lab-checkpoint";

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    network: NetworkState,
}

pub fn save_checkpoint(net: &NetworkState, path: &Path) -> Result<()> {
    let env = Envelope { format: FORMAT.into(), version: CHECKPOINT_VERSION, network: net.clone() };
    let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkState> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        offset: byte_offset(&text, e.line(), e.column()),
        msg: e.to_string(),
    })?;
    if env.format != FORMAT {
        return Err(Error::Format { path: path.to_path_buf(), offset: 0, msg: format!("not a checkpoint: {}", env.format) });
    }
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("unsupported checkpoint version {}", env.version),
        });
    }
    NetworkState::from_weights(env.network.spec, env.network.weights)
}

fn byte_offset(text: &str, line: usize, column: usize) -> u64 {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (before + column.saturating_sub(1)) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, InitScheme, NetworkSpec};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        for spec in [
            NetworkSpec::dense(vec![5, 7, 3], Activation::Relu).unwrap(),
            NetworkSpec::diagonal(3, 4, Activation::Identity).unwrap(),
        ] {
            let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 42).unwrap();
            save_checkpoint(&net, &path).unwrap();
            let back = load_checkpoint(&path).unwrap();
            assert_eq!(back.spec, net.spec);
            let a: Vec<u64> = net.params().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.params().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_wrong_version_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let spec = NetworkSpec::dense(vec![2, 1], Activation::Identity).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::KaimingUniform, 1).unwrap();
        save_checkpoint(&net, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("\"version\": 1", "\"version\": 9");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
        fs::write(&path, "{\"format\": ").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }
}
