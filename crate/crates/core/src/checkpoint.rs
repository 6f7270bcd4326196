//! Versioned JSON checkpoints.
//!
//! Floats are written in shortest round-trip decimal form and parsed back
//! exactly, so `load(save(x)) == x` bit for bit.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Activation, AdamState, Dense, Mlp};
use crate::potential::{TrainConfig, Trainer};
use crate::rng::{RngState, SeededRng};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Potential,
    Encoder,
    Decoder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub role: Role,
    pub layers: Vec<LayerRecord>,
    pub adam: Option<AdamState>,
    pub rng: Option<RngState>,
    pub iteration: u64,
    /// Configuration the model was trained with, echoed verbatim.
    pub config: serde_json::Value,
}

impl Checkpoint {
    /// A frozen network with no optimizer state.
    pub fn from_net(role: Role, net: &Mlp, config: serde_json::Value) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                activation: l.activation(),
                weights: l.weight().as_slice().to_vec(),
                biases: l.bias().to_vec(),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            role,
            layers,
            adam: None,
            rng: None,
            iteration: 0,
            config,
        }
    }

    /// Everything needed to resume potential training.
    pub fn from_trainer(trainer: &Trainer) -> Result<Self> {
        let config = serde_json::to_value(trainer.config())?;
        let mut ck = Self::from_net(Role::Potential, trainer.net(), config);
        ck.adam = Some(trainer.adam().clone());
        ck.rng = Some(trainer.rng().state());
        ck.iteration = trainer.iteration();
        Ok(ck)
    }

    pub fn to_net(&self) -> Result<Mlp> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                Dense::new(
                    Matrix::from_vec(l.out_dim, l.in_dim, l.weights.clone())?,
                    l.biases.clone(),
                    l.activation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }

    pub fn expect_role(&self, role: Role) -> Result<()> {
        if self.role == role {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "expected a {role:?} checkpoint, found {:?}",
                self.role
            )))
        }
    }

    pub fn to_trainer(&self) -> Result<Trainer> {
        self.expect_role(Role::Potential)?;
        let missing = |what: &str| Error::Checkpoint(format!("potential checkpoint lacks {what}"));
        let config: TrainConfig = serde_json::from_value(self.config.clone())?;
        let adam = self
            .adam
            .clone()
            .ok_or_else(|| missing("optimizer state"))?;
        let rng = SeededRng::from_state(self.rng.as_ref().ok_or_else(|| missing("rng state"))?)?;
        Trainer::from_parts(config, self.to_net()?, adam, rng, self.iteration)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a checkpoint, rejecting any other format version before looking
    /// at the rest of the document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Checkpoint(format!(
                    "unsupported format version {v} (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Checkpoint("missing format_version".into())),
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        // Temp files are created owner-only; results are ordinary files.
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::streams;

    fn awkward_net() -> Mlp {
        let mut rng = SeededRng::new(9, streams::INIT);
        let mut net = Mlp::init(
            &[3, 5, 1],
            Activation::LeakyRelu { slope: 0.2 },
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        let specials = [
            0.1 + 0.2,
            -0.0,
            f64::MIN_POSITIVE,
            5e-324,
            1.0 / 3.0,
            f64::MAX,
        ];
        for (p, s) in net.params_mut().zip(specials) {
            *p = s;
        }
        net
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = awkward_net();
        let ck = Checkpoint::from_net(Role::Encoder, &net, serde_json::json!({"k": 1}));
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        let net2 = back.to_net().unwrap();
        let bits = |n: &Mlp| n.params().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(&net), bits(&net2));
        assert_eq!(back, ck);
    }

    #[test]
    fn trainer_round_trip() {
        let mut cfg = TrainConfig::toy();
        cfg.hidden = vec![4];
        let trainer = Trainer::new(cfg).unwrap();
        let ck = Checkpoint::from_trainer(&trainer).unwrap();
        let back = Checkpoint::from_json(&ck.to_json().unwrap())
            .unwrap()
            .to_trainer()
            .unwrap();
        assert_eq!(back, trainer);
    }

    #[test]
    fn version_and_role_checks() {
        let ck = Checkpoint::from_net(Role::Decoder, &awkward_net(), serde_json::Value::Null);
        let text =
            ck.to_json()
                .unwrap()
                .replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(
            Checkpoint::from_json(&text),
            Err(Error::Checkpoint(_))
        ));
        assert!(Checkpoint::from_json("{}").is_err());
        assert!(ck.to_trainer().is_err());
        assert!(ck.expect_role(Role::Decoder).is_ok());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
