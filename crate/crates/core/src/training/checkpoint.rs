//! Binary checkpoints and the loss log.
//!
//! Layout, little-endian: magic `QGAN`, version u32, SHA-256 of the model
//! config, seed u64, step u64, depth u32, α f64, RNG seed [u8; 32], stream
//! u64, word position u128, then generator and critic parameters and both
//! optimizer states as length-prefixed f64 vectors, then the loss history.
//! Floats are stored bit-exactly so a resumed run continues identically.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{Adam, Critic, GanState, LossRecord};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::generator::Generator;

const MAGIC: &[u8; 4] = b"QGAN";
pub const CHECKPOINT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
    fn adam(&mut self, a: &Adam) {
        self.u64(a.t);
        self.vec(&a.m);
        self.vec(&a.v);
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().expect("length checked"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > self.0.len() / 8 {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn adam(&mut self, len: usize) -> Result<Adam> {
        let t = self.u64()?;
        let (m, v) = (self.vec()?, self.vec()?);
        if m.len() != len || v.len() != len {
            return Err(Error::Format("optimizer state does not match the parameters".into()));
        }
        Ok(Adam { m, v, t })
    }
}

impl GanState {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.0.extend_from_slice(&self.model.digest());
        w.u64(self.seed);
        w.u64(self.step);
        w.u32(self.depth as u32);
        w.f64(self.alpha);
        w.0.extend_from_slice(&self.rng.get_seed());
        w.u64(self.rng.get_stream());
        w.0.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        w.vec(self.generator.params());
        w.vec(self.critic.params());
        w.adam(&self.opt_g);
        w.adam(&self.opt_d);
        w.u64(self.history.len() as u64);
        for r in &self.history {
            w.u64(r.step);
            w.f64(r.loss_g);
            w.f64(r.loss_d);
            w.u32(r.depth as u32);
            w.f64(r.alpha);
        }
        w.0
    }

    /// Restores a state saved under the same `model`; any other config is rejected.
    pub fn from_checkpoint_bytes(model: &ModelConfig, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader(bytes);
        if &r.take::<4>()? != MAGIC {
            return Err(Error::Format("not a checkpoint".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        if r.take::<32>()? != model.digest() {
            return Err(Error::Config("checkpoint was written for a different model config".into()));
        }
        let seed = r.u64()?;
        let step = r.u64()?;
        let depth = r.u32()? as usize;
        let alpha = r.f64()?;
        let mut rng = ChaCha8Rng::from_seed(r.take::<32>()?);
        rng.set_stream(r.u64()?);
        rng.set_word_pos(u128::from_le_bytes(r.take::<16>()?));
        let generator = Generator::from_params(model.generator(), r.vec()?)?;
        let critic = Critic::from_params(model, r.vec()?)?;
        let opt_g = r.adam(generator.param_count())?;
        let opt_d = r.adam(critic.params().len())?;
        let n = r.u64()? as usize;
        let mut history = Vec::with_capacity(n.min(r.0.len() / 36));
        for _ in 0..n {
            history.push(LossRecord {
                step: r.u64()?,
                loss_g: r.f64()?,
                loss_d: r.f64()?,
                depth: r.u32()? as usize,
                alpha: r.f64()?,
            });
        }
        if !r.0.is_empty() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        if depth == 0 || depth > model.max_depth() || !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Format(format!("checkpoint schedule ({depth}, {alpha}) is invalid")));
        }
        Ok(Self {
            model: model.clone(),
            generator,
            critic,
            opt_g,
            opt_d,
            step,
            depth,
            alpha,
            seed,
            rng,
            history,
        })
    }

    pub fn write_checkpoint(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn read_checkpoint(model: &ModelConfig, mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_checkpoint_bytes(model, &bytes)
    }

    /// Writes through a temporary file so an interrupted save leaves the old one intact.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_checkpoint_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load_checkpoint(model: &ModelConfig, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_bytes(model, &std::fs::read(path)?)
    }
}

/// Loss history as CSV with header `step,loss_g,loss_d,depth,alpha`.
pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut out = String::from("step,loss_g,loss_d,depth,alpha\n");
    for r in history {
        out.push_str(&format!("{},{},{},{},{}\n", r.step, r.loss_g, r.loss_d, r.depth, r.alpha));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CriticKind;
    use rand::RngCore;

    fn model(critic: CriticKind) -> ModelConfig {
        ModelConfig {
            max_qubits: 4,
            latent_dim: 3,
            style_dim: 3,
            channels: 2,
            critic,
            critic_channels: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        for critic in [CriticKind::Quantum, CriticKind::Classical] {
            let m = model(critic);
            let mut s = GanState::new(&m, 11).unwrap();
            s.rng.next_u64();
            s.opt_g.m[0] = 0.1 + 0.2;
            s.opt_d.t = 7;
            s.step = 42;
            s.depth = 2;
            s.alpha = 1.0 / 3.0;
            s.history.push(LossRecord {
                step: 0,
                loss_g: std::f64::consts::LN_2,
                loss_d: 1e-300,
                depth: 1,
                alpha: 1.0,
            });
            let back = GanState::from_checkpoint_bytes(&m, &s.to_checkpoint_bytes()).unwrap();
            assert_eq!(back.to_checkpoint_bytes(), s.to_checkpoint_bytes());
            assert_eq!(back.opt_g, s.opt_g);
            assert_eq!(back.history, s.history);
            let (mut a, mut b) = (s.rng.clone(), back.rng.clone());
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn rejects_mismatch_and_corruption() {
        let m = model(CriticKind::Quantum);
        let bytes = GanState::new(&m, 1).unwrap().to_checkpoint_bytes();
        let other = ModelConfig { channels: 3, ..m.clone() };
        assert!(matches!(GanState::from_checkpoint_bytes(&other, &bytes), Err(Error::Config(_))));
        assert!(GanState::from_checkpoint_bytes(&m, &bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(GanState::from_checkpoint_bytes(&m, &extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(GanState::from_checkpoint_bytes(&m, &bad), Err(Error::Format(_))));
    }

    #[test]
    fn csv_layout() {
        let rec = LossRecord {
            step: 74,
            loss_g: 0.5,
            loss_d: 1.25,
            depth: 2,
            alpha: 0.5,
        };
        assert_eq!(loss_csv(&[rec]), "step,loss_g,loss_d,depth,alpha\n74,0.5,1.25,2,0.5\n");
    }
}
