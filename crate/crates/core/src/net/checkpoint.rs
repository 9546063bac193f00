use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::adam::{Adam, AdamConfig};
use super::fourier::FourierEmbedding;
use super::mlp::{Activation, Network};
use super::real::Real;
use crate::error::{Error, Result};
use crate::mc::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// `u128` word position, as a decimal string.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &SimRng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<SimRng> {
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|e| Error::Config(format!("bad RNG word position: {e}")))?;
        let mut rng = SimRng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

/// Self-describing JSON snapshot of a network and its training state.
/// Parameters are stored as `f64`, which is exact for both precisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub precision: String,
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub horizon: f64,
    pub fourier: FourierEmbedding,
    pub params: Vec<f64>,
    pub adam: Option<AdamState>,
    pub rng: Option<RngState>,
    pub epoch: usize,
}

fn precision_name<T: Real>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

fn widen<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

impl Checkpoint {
    pub fn capture<T: Real>(net: &Network<T>, adam: Option<&Adam<T>>, rng: Option<&SimRng>, epoch: usize) -> Self {
        Self {
            precision: precision_name::<T>().into(),
            widths: net.widths.clone(),
            activation: net.activation,
            horizon: net.horizon,
            fourier: net.emb.clone(),
            params: widen(&net.params),
            adam: adam.map(|a| AdamState {
                cfg: a.cfg,
                m: widen(&a.m),
                v: widen(&a.v),
                t: a.t,
            }),
            rng: rng.map(RngState::capture),
            epoch,
        }
    }

    pub fn network<T: Real>(&self) -> Result<Network<T>> {
        Network::from_parts(
            self.fourier.clone(),
            self.widths.clone(),
            self.activation,
            self.horizon,
            self.params.iter().map(|p| T::of(*p)).collect(),
        )
    }

    pub fn optimizer<T: Real>(&self) -> Option<Adam<T>> {
        self.adam.as_ref().map(|a| Adam {
            cfg: a.cfg,
            m: a.m.iter().map(|x| T::of(*x)).collect(),
            v: a.v.iter().map(|x| T::of(*x)).collect(),
            t: a.t,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
