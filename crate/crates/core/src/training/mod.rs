//! Adversarial training of the generator against either critic.
//!
//! One step draws a real batch, updates the critic once on fresh fakes, then
//! updates the generator once on another set of fakes scored by the updated
//! critic. Per-sample work runs in parallel; reductions are summed in sample
//! order so results do not depend on the thread count.

mod adam;
mod checkpoint;
mod loss;

pub use adam::{Adam, AdamParams};
pub use checkpoint::{loss_csv, CHECKPOINT_VERSION};
pub use loss::{batch_losses, logistic_losses, r_penalty, relativistic_hinge_losses, softplus, BatchLoss};

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{CriticKind, ModelConfig, TrainConfig};
use crate::densmat::{encode_vector_reduced, CMatrix, DensityMatrix, FeatureMap};
use crate::discriminator::{ClassicalDiscriminator, QuantumDiscriminator, ScoreGrad};
use crate::error::{Error, Result};
use crate::generator::{Generator, Noise};
use crate::qlayers::DiagEncoding;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QPROGAN_THREADS";

/// Sizes the global worker pool from `QPROGAN_THREADS` when set.
pub fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Fade-in and stabilization windows of the progressive schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub fade: u64,
    pub stable: u64,
    pub max_depth: usize,
}

impl Schedule {
    pub fn new(cfg: &TrainConfig, max_depth: usize) -> Self {
        Self {
            fade: cfg.fade_steps,
            stable: cfg.stable_steps,
            max_depth,
        }
    }
}

/// `(depth, α)` at `step`: depth 1 trains for `stable` steps at α = 1; each
/// later depth fades in over `fade` steps (α = elapsed/fade) and then
/// stabilizes for `stable` steps. After the last depth, `(max_depth, 1)`.
pub fn progressive_schedule(step: u64, s: &Schedule) -> (usize, f64) {
    if step < s.stable {
        return (1, 1.0);
    }
    let mut t = step - s.stable;
    for d in 2..=s.max_depth {
        if t < s.fade {
            return (d, t as f64 / s.fade as f64);
        }
        t -= s.fade;
        if t < s.stable {
            return (d, 1.0);
        }
        t -= s.stable;
    }
    (s.max_depth.max(1), 1.0)
}

/// The discriminator being trained.
#[derive(Clone, Debug)]
pub enum Critic {
    Quantum(QuantumDiscriminator),
    Classical(ClassicalDiscriminator),
}

impl Critic {
    pub fn new(model: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match model.critic {
            CriticKind::Quantum => Critic::Quantum(QuantumDiscriminator::new(model.max_qubits, seed)?),
            CriticKind::Classical => Critic::Classical(ClassicalDiscriminator::new(model.classical(), seed)?),
        })
    }

    pub fn from_params(model: &ModelConfig, params: Vec<f64>) -> Result<Self> {
        Ok(match model.critic {
            CriticKind::Quantum => Critic::Quantum(QuantumDiscriminator::from_params(model.max_qubits, params)?),
            CriticKind::Classical => Critic::Classical(ClassicalDiscriminator::from_params(model.classical(), params)?),
        })
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Critic::Quantum(d) => d.params(),
            Critic::Classical(d) => d.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Critic::Quantum(d) => d.params_mut(),
            Critic::Classical(d) => d.params_mut(),
        }
    }

    pub fn score(&self, rho: &DensityMatrix, depth: usize, alpha: f64) -> Result<f64> {
        match self {
            Critic::Quantum(d) => d.discriminate(rho, depth, alpha),
            Critic::Classical(d) => d.score(&FeatureMap::real_part(rho.matrix()), depth, alpha),
        }
    }

    fn score_grad(&self, rho: &DensityMatrix, depth: usize, alpha: f64, input_grad: bool) -> Result<ScoreGrad> {
        match self {
            Critic::Quantum(d) => d.discriminate_with_grad(rho, depth, alpha, input_grad),
            Critic::Classical(d) => {
                let (score, params, gx) = d.score_with_grad(&FeatureMap::real_part(rho.matrix()), depth, alpha)?;
                let input = input_grad.then(|| {
                    let data = gx.into_iter().map(|g| Complex64::new(g, 0.0)).collect();
                    CMatrix::from_row_major(rho.dim(), data).expect("square gradient")
                });
                Ok(ScoreGrad { score, params, input })
            }
        }
    }

    fn penalty_grad(&self, rho: &DensityMatrix, depth: usize, alpha: f64, gamma: f64) -> Result<(f64, Vec<f64>)> {
        match self {
            Critic::Classical(d) => d.penalty_grad(&FeatureMap::real_part(rho.matrix()), depth, alpha, gamma),
            Critic::Quantum(_) => Err(Error::Config("the gradient penalty needs the classical critic".into())),
        }
    }
}

/// One logged training step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub loss_g: f64,
    pub loss_d: f64,
    pub depth: usize,
    pub alpha: f64,
}

/// Everything a training run needs to continue bit-identically.
#[derive(Clone, Debug)]
pub struct GanState {
    pub model: ModelConfig,
    pub generator: Generator,
    pub critic: Critic,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub step: u64,
    pub depth: usize,
    pub alpha: f64,
    pub seed: u64,
    pub rng: ChaCha8Rng,
    pub history: Vec<LossRecord>,
}

/// A generated sample: its latent draw, map and encoded state.
#[derive(Clone, Debug)]
pub struct Sample {
    pub map: FeatureMap,
    pub state: DensityMatrix,
}

impl GanState {
    pub fn new(model: &ModelConfig, seed: u64) -> Result<Self> {
        model.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generator = Generator::new(model.generator(), rng.next_u64())?;
        let critic = Critic::new(model, rng.next_u64())?;
        Ok(Self {
            model: model.clone(),
            opt_g: Adam::new(generator.param_count()),
            opt_d: Adam::new(critic.params().len()),
            generator,
            critic,
            step: 0,
            depth: 1,
            alpha: 1.0,
            seed,
            rng,
            history: Vec::new(),
        })
    }

    pub fn entry_qubits(&self) -> usize {
        2 * self.depth
    }

    /// Standard-normal latents paired with noise seeds, from the training RNG.
    pub fn draw_latents(&mut self, n: usize) -> Vec<(Vec<f64>, u64)> {
        let dim = self.model.latent_dim;
        (0..n)
            .map(|_| {
                let z = (0..dim).map(|_| self.rng.sample(StandardNormal)).collect();
                (z, self.rng.next_u64())
            })
            .collect()
    }

    /// Map and state for a latent and noise seed at the current depth and α.
    pub fn generate(&self, z: &[f64], noise_seed: u64) -> Result<Sample> {
        let map = self.generator.forward(z, self.depth, self.alpha, Noise::Seeded(noise_seed))?.output().clone();
        let state = encode_generated(&map)?.0;
        Ok(Sample { map, state })
    }

    /// `n` samples from a dedicated seeded stream, leaving the training RNG alone.
    pub fn sample_n(&self, n: usize, seed: u64) -> Result<Vec<Sample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<(Vec<f64>, u64)> = (0..n)
            .map(|_| {
                let z = (0..self.model.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
                (z, rng.next_u64())
            })
            .collect();
        draws.par_iter().map(|(z, s)| self.generate(z, *s)).collect()
    }

    /// Mean critic score of `reals` minus that of generated samples.
    pub fn score_gap(&self, reals: &[DensityMatrix], fakes: &[DensityMatrix]) -> Result<f64> {
        if reals.is_empty() || fakes.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mean = |xs: &[DensityMatrix]| -> Result<f64> {
            let s: Vec<f64> = xs.par_iter().map(|r| self.critic.score(r, self.depth, self.alpha)).collect::<Result<_>>()?;
            Ok(s.iter().sum::<f64>() / s.len() as f64)
        };
        Ok(mean(reals)? - mean(fakes)?)
    }

    /// Sets depth and α from the schedule for the current step.
    pub fn sync_schedule(&mut self, cfg: &TrainConfig) {
        let (d, a) = progressive_schedule(self.step, &Schedule::new(cfg, self.model.max_depth()));
        self.depth = d;
        self.alpha = a;
    }

    fn check_batch(&self, real_batch: &[DensityMatrix]) -> Result<()> {
        if real_batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let want = 1usize << self.entry_qubits();
        match real_batch.iter().find(|r| r.dim() != want) {
            Some(bad) => Err(Error::DimMismatch {
                expected: want,
                found: bad.dim(),
            }),
            None => Ok(()),
        }
    }

    /// Critic loss, including any gradient penalty, and its parameter gradient.
    pub fn critic_loss_grad(&self, real_batch: &[DensityMatrix], fakes: &[DensityMatrix], cfg: &TrainConfig) -> Result<(f64, Vec<f64>)> {
        let (depth, alpha, critic) = (self.depth, self.alpha, &self.critic);
        let score_all = |batch: &[DensityMatrix]| -> Result<Vec<ScoreGrad>> {
            batch.par_iter().map(|r| critic.score_grad(r, depth, alpha, false)).collect()
        };
        let (real_sg, fake_sg) = (score_all(real_batch)?, score_all(fakes)?);
        let scores = |v: &[ScoreGrad]| v.iter().map(|s| s.score).collect::<Vec<_>>();
        let dl = batch_losses(cfg.loss, &scores(&real_sg), &scores(&fake_sg))?;
        let mut grad = vec![0.0; critic.params().len()];
        for (sg, w) in real_sg.iter().zip(&dl.d_real).chain(fake_sg.iter().zip(&dl.d_fake)) {
            axpy(&mut grad, *w, &sg.params);
        }
        let mut loss = dl.loss_d;
        if cfg.penalty_enabled(self.model.critic) {
            let mut sq = [0.0; 2];
            for (k, (batch, gamma)) in [(real_batch, cfg.gamma1), (fakes, cfg.gamma2)].into_iter().enumerate() {
                if gamma == 0.0 {
                    continue;
                }
                let per: Vec<(f64, Vec<f64>)> = batch
                    .par_iter()
                    .map(|r| critic.penalty_grad(r, depth, alpha, gamma))
                    .collect::<Result<_>>()?;
                let n = per.len() as f64;
                for (s, g) in &per {
                    sq[k] += s / n;
                    axpy(&mut grad, 1.0 / n, g);
                }
            }
            loss += r_penalty(sq[0], sq[1], cfg.gamma1, cfg.gamma2)?;
        }
        Ok((loss, grad))
    }

    /// Generator loss for fakes drawn from `draws` and its parameter gradient.
    pub fn generator_loss_grad(&self, draws: &[(Vec<f64>, u64)], real_batch: &[DensityMatrix], cfg: &TrainConfig) -> Result<(f64, Vec<f64>)> {
        let (depth, alpha, critic, generator) = (self.depth, self.alpha, &self.critic, &self.generator);
        struct GenSample {
            pass: crate::generator::GeneratorPass,
            enc: Option<DiagEncoding>,
            sg: ScoreGrad,
        }
        let samples: Vec<GenSample> = draws
            .par_iter()
            .map(|(z, s)| {
                let pass = generator.forward(z, depth, alpha, Noise::Seeded(*s))?;
                let (state, enc) = encode_generated(pass.output())?;
                let sg = critic.score_grad(&state, depth, alpha, true)?;
                Ok(GenSample { pass, enc, sg })
            })
            .collect::<Result<_>>()?;
        let real_scores: Vec<f64> = real_batch
            .par_iter()
            .map(|r| critic.score(r, depth, alpha))
            .collect::<Result<_>>()?;
        let fake_scores: Vec<f64> = samples.iter().map(|s| s.sg.score).collect();
        let gl = batch_losses(cfg.loss, &real_scores, &fake_scores)?;
        let per_sample: Vec<Vec<f64>> = samples
            .par_iter()
            .zip(&gl.g_fake)
            .map(|(s, &w)| {
                let Some(enc) = &s.enc else {
                    return Ok(vec![0.0; generator.param_count()]);
                };
                let g_state = s.sg.input.as_ref().expect("input gradient requested").scale(w);
                let g_diag = enc.backward(&g_state);
                let side = s.pass.output().side();
                let mut g_map = vec![0.0; side * side];
                for (i, g) in g_diag.iter().enumerate() {
                    g_map[i * side + i] = *g;
                }
                Ok(generator.backward(&s.pass, &g_map)?.params)
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; generator.param_count()];
        for g in &per_sample {
            axpy(&mut grad, 1.0, g);
        }
        Ok((gl.loss_g, grad))
    }

    fn step_inner(&mut self, real_batch: &[DensityMatrix], cfg: &TrainConfig) -> Result<LossRecord> {
        self.sync_schedule(cfg);
        self.check_batch(real_batch)?;
        let (depth, alpha) = (self.depth, self.alpha);
        let hp = AdamParams::from(cfg);

        let draws = self.draw_latents(cfg.batch_size);
        let fakes: Vec<DensityMatrix> = draws
            .par_iter()
            .map(|(z, s)| self.generate(z, *s).map(|x| x.state))
            .collect::<Result<_>>()?;
        let (loss_d, grad_d) = self.critic_loss_grad(real_batch, &fakes, cfg)?;
        check_finite(&grad_d, "critic gradient")?;
        self.opt_d.step(self.critic.params_mut(), &grad_d, hp);
        check_finite(self.critic.params(), "critic parameters")?;

        // scored by the critic just updated
        let draws = self.draw_latents(cfg.batch_size);
        let (loss_g, grad_g) = self.generator_loss_grad(&draws, real_batch, cfg)?;
        check_finite(&grad_g, "generator gradient")?;
        self.opt_g.step(self.generator.params_mut(), &grad_g, hp);
        check_finite(self.generator.params(), "generator parameters")?;

        let record = LossRecord {
            step: self.step,
            loss_g,
            loss_d,
            depth,
            alpha,
        };
        if self.step % cfg.log_interval == 0 {
            self.history.push(record);
        }
        self.step += 1;
        self.sync_schedule(cfg);
        Ok(record)
    }
}

/// Encoded state of a generated map and its encoding record. A map whose
/// clamped diagonal vanishes becomes the maximally mixed state and carries no
/// gradient back to the generator.
fn encode_generated(map: &FeatureMap) -> Result<(DensityMatrix, Option<DiagEncoding>)> {
    Ok(match DiagEncoding::new(&map.diagonal())? {
        Some(enc) => (DensityMatrix::from_matrix_unchecked(enc.state()), Some(enc)),
        None => (DensityMatrix::maximally_mixed(map.side().trailing_zeros() as usize), None),
    })
}

fn axpy(acc: &mut [f64], w: f64, x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += w * b;
    }
}

fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// One critic update then one generator update. On error `state` is left
/// exactly as it was.
pub fn train_step(state: &mut GanState, real_batch: &[DensityMatrix], cfg: &TrainConfig) -> Result<LossRecord> {
    let mut next = state.clone();
    let record = next.step_inner(real_batch, cfg)?;
    *state = next;
    Ok(record)
}

/// Cohort mutation vectors with their reduced states cached per qubit count.
#[derive(Clone, Debug)]
pub struct RealPool {
    vectors: Vec<Vec<f64>>,
    cache: BTreeMap<usize, Vec<DensityMatrix>>,
}

impl RealPool {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok(Self {
            vectors,
            cache: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// All states reduced to the `qubits` lowest qubits.
    pub fn states(&mut self, qubits: usize) -> Result<&[DensityMatrix]> {
        if !self.cache.contains_key(&qubits) {
            let states = self
                .vectors
                .par_iter()
                .map(|v| encode_vector_reduced(v, qubits))
                .collect::<Result<Vec<_>>>()?;
            self.cache.insert(qubits, states);
        }
        Ok(&self.cache[&qubits])
    }
}

/// Progress notifications from [`run`].
#[derive(Debug)]
pub enum RunEvent<'a> {
    Step(&'a GanState, &'a LossRecord),
    /// A step abandoned after a numeric failure; the state is unchanged.
    Skipped { step: u64, error: &'a Error },
}

/// Consecutive failed attempts tolerated before a run is abandoned.
pub const MAX_CONSECUTIVE_FAILURES: usize = 10;

/// Trains until `state.step == cfg.steps` and returns the number of
/// successful steps. Real batches are drawn uniformly with replacement using
/// the training RNG. A numerically failed step leaves the parameters
/// untouched and is retried on fresh draws; the run aborts with the error
/// after [`MAX_CONSECUTIVE_FAILURES`] in a row.
pub fn run(state: &mut GanState, pool: &mut RealPool, cfg: &TrainConfig, mut on_event: impl FnMut(RunEvent) -> Result<()>) -> Result<u64> {
    let mut done = 0;
    let mut failures = 0;
    while state.step < cfg.steps {
        state.sync_schedule(cfg);
        let reals = pool.states(state.entry_qubits())?;
        let batch: Vec<DensityMatrix> = (0..cfg.batch_size)
            .map(|_| reals[state.rng.random_range(0..reals.len())].clone())
            .collect();
        // a failed step keeps the advanced RNG, so a retry draws afresh
        match train_step(state, &batch, cfg) {
            Ok(rec) => {
                failures = 0;
                done += 1;
                on_event(RunEvent::Step(state, &rec))?;
            }
            Err(e) if e.is_numeric() => {
                failures += 1;
                on_event(RunEvent::Skipped { step: state.step, error: &e })?;
                if failures >= MAX_CONSECUTIVE_FAILURES {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(done)
}
