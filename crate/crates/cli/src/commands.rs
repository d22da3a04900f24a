use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qprogan::config::RunConfig;
use qprogan::densmat::{superfidelity, uhlmann_fidelity, DensityMatrix};
use qprogan::genomics::{
    decode_variation, format_fasta, intercept_spike, lift_feature_map, map_to_strain, read_fasta, FastaRecord,
    FrequencyReport, SpikeCohort, Strain, SyntheticCohort, VariationStructure, COMPRESSED_LEN, SPIKE_LEN,
};
use qprogan::training::{init_thread_pool, loss_csv, run, GanState, RealPool, RunEvent};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Cli, Command, Metric, Preset};

const CONFIG_FILE: &str = "config.toml";
const CHECKPOINT_FILE: &str = "checkpoint.qgan";
const LOSS_FILE: &str = "loss.csv";

/// 2 for numeric breakdown, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<qprogan::Error>() {
        Some(inner) if inner.is_numeric() => 2,
        _ => 1,
    }
}

struct Ctx {
    config: RunConfig,
}

impl Ctx {
    fn new(path: Option<&Path>, preset: Preset, seed: Option<u64>) -> Result<Self> {
        let mut config = match (path, preset) {
            (Some(p), _) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
            (None, Preset::Full) => RunConfig::default(),
            (None, Preset::Test) => RunConfig::test_preset(),
        };
        if seed.is_some() {
            config.seed = seed;
        }
        Ok(Self { config })
    }

    fn seed(&self) -> Result<u64> {
        Ok(self.config.seed()?)
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    let explicit_config = cli.config.is_some();
    let mut ctx = Ctx::new(cli.config.as_deref(), cli.preset, cli.seed)?;
    match cli.command {
        Command::Synth {
            sequences,
            no_reference,
            out,
        } => synth(&ctx, sequences, no_reference, &out),
        Command::Prep {
            fasta,
            reference_id,
            out_dir,
        } => prep(&ctx, &fasta, reference_id.as_deref(), out_dir),
        Command::Train {
            cohort,
            out_dir,
            steps,
            resume,
        } => {
            let paths = &mut ctx.config.paths;
            if let Some(c) = cohort {
                paths.cohort = c;
            }
            if let Some(o) = out_dir {
                paths.out_dir = o;
            }
            if let Some(s) = steps {
                ctx.config.train.steps = s;
            }
            train(&ctx, resume.as_deref())
        }
        Command::Generate {
            checkpoint,
            n,
            strain,
            cohort,
            fragments,
            out_dir,
            dump_states,
        } => {
            let ctx = checkpoint_ctx(ctx, explicit_config, &checkpoint, cli.seed)?;
            // a strain flag brings its own preset; otherwise the config decides
            let genomics = &ctx.config.genomics;
            let k = match strain {
                Some(s) => Strain::from(s).top_k(),
                None => genomics.top_k.unwrap_or(genomics.strain.top_k()),
            };
            let opts = GenerateOpts {
                n,
                k,
                cohort: cohort.unwrap_or_else(|| ctx.config.paths.cohort.clone()),
                fragments,
                out_dir: out_dir.unwrap_or_else(|| ctx.config.paths.out_dir.join("generated")),
                dump_states,
            };
            generate(&ctx, &checkpoint, &opts)
        }
        Command::Fidelity {
            checkpoint,
            cohort,
            n_gen,
            n_real,
            metric,
            self_compare,
            out,
        } => {
            let ctx = checkpoint_ctx(ctx, explicit_config, &checkpoint, cli.seed)?;
            let cohort = cohort.unwrap_or_else(|| ctx.config.paths.cohort.clone());
            fidelity(&ctx, &checkpoint, &cohort, n_gen, n_real, metric, self_compare, out.as_deref())
        }
        Command::Freq { input, reference, out } => freq(&input, &reference, out.as_deref()),
    }
}

/// Without an explicit config, the one written next to the checkpoint applies.
fn checkpoint_ctx(ctx: Ctx, explicit_config: bool, checkpoint: &Path, seed: Option<u64>) -> Result<Ctx> {
    if explicit_config {
        return Ok(ctx);
    }
    let beside = checkpoint.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
    if !beside.exists() {
        return Ok(ctx);
    }
    let mut config = RunConfig::load(&beside).with_context(|| format!("reading config {}", beside.display()))?;
    if seed.is_some() {
        config.seed = seed;
    }
    Ok(Ctx { config })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn synth(ctx: &Ctx, sequences: usize, no_reference: bool, out: &Path) -> Result<()> {
    let mut records = SyntheticCohort {
        sequences,
        seed: ctx.seed()?,
        ..SyntheticCohort::default()
    }
    .generate();
    if no_reference {
        records.remove(0);
    }
    write(out, format_fasta(&records))?;
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn prep(ctx: &Ctx, fasta: &[PathBuf], reference_id: Option<&str>, out_dir: Option<PathBuf>) -> Result<()> {
    let seed = ctx.seed()?;
    let mut records: Vec<FastaRecord> = Vec::new();
    for path in fasta {
        records.extend(read_fasta(path).with_context(|| format!("reading {}", path.display()))?);
    }
    let cohort = SpikeCohort::from_alignment(&records, reference_id, seed)?;
    let out_dir = out_dir.unwrap_or_else(|| ctx.config.paths.out_dir.clone());
    let summary = cohort.summary();
    write(&out_dir.join("cohort.json"), cohort.to_json())?;
    write(&out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "{} sequences, {} mutated loci, {} neighbor loci, {} random loci, {} without kept mutations",
        summary.sequences, summary.mutated_loci, summary.neighbor_loci, summary.random_loci, summary.unmutated_sequences
    );
    Ok(())
}

fn train(ctx: &Ctx, resume: Option<&Path>) -> Result<()> {
    let cfg = &ctx.config;
    cfg.validate()?;
    let seed = ctx.seed()?;
    let cohort = SpikeCohort::load(&cfg.paths.cohort).with_context(|| format!("reading cohort {}", cfg.paths.cohort.display()))?;
    let mut pool = RealPool::new(cohort.encodable_vectors()).context("cohort has no sequence with a kept mutation")?;
    let mut state = match resume {
        Some(p) => GanState::load_checkpoint(&cfg.model, p).with_context(|| format!("loading checkpoint {}", p.display()))?,
        None => GanState::new(&cfg.model, seed)?,
    };
    let out = &cfg.paths.out_dir;
    write(&out.join(CONFIG_FILE), cfg.to_toml())?;
    let interval = cfg.train.checkpoint_interval;
    let result = run(&mut state, &mut pool, &cfg.train, |ev| {
        match ev {
            RunEvent::Step(s, rec) => {
                if interval > 0 && s.step % interval == 0 && s.step < cfg.train.steps {
                    s.save_checkpoint(out.join(format!("checkpoint-{:06}.qgan", s.step)))?;
                }
                if rec.step % cfg.train.log_interval == 0 {
                    eprintln!(
                        "step {} depth {} alpha {:.3} loss_g {:.6} loss_d {:.6}",
                        rec.step, rec.depth, rec.alpha, rec.loss_g, rec.loss_d
                    );
                }
            }
            RunEvent::Skipped { step, error } => eprintln!("step {step} abandoned: {error}"),
        }
        Ok(())
    });
    // the last good state is kept even when the run aborts
    state.save_checkpoint(out.join(CHECKPOINT_FILE))?;
    write(&out.join(LOSS_FILE), loss_csv(&state.history))?;
    result?;
    println!("trained to step {} (depth {}, alpha {})", state.step, state.depth, state.alpha);
    Ok(())
}

struct GenerateOpts {
    n: usize,
    k: usize,
    cohort: PathBuf,
    fragments: Option<PathBuf>,
    out_dir: PathBuf,
    dump_states: bool,
}

fn load_state(ctx: &Ctx, checkpoint: &Path) -> Result<GanState> {
    GanState::load_checkpoint(&ctx.config.model, checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))
}

fn generate(ctx: &Ctx, checkpoint: &Path, opts: &GenerateOpts) -> Result<()> {
    let seed = ctx.seed()?;
    let state = load_state(ctx, checkpoint)?;
    let cohort = SpikeCohort::load(&opts.cohort).with_context(|| format!("reading cohort {}", opts.cohort.display()))?;
    let strains: Vec<(String, Vec<u8>)> = match &opts.fragments {
        Some(p) => read_fasta(p)?.into_iter().map(|r| (r.id, r.seq)).collect(),
        None => cohort.ids.iter().cloned().zip(cohort.fragment_bytes()).collect(),
    };
    if let Some((id, f)) = strains.iter().find(|(_, f)| f.len() != SPIKE_LEN) {
        bail!("fragment {id:?} has length {}, expected {SPIKE_LEN}", f.len());
    }
    if opts.n > 0 && strains.is_empty() {
        bail!("no strain fragments to map onto");
    }
    let samples = state.sample_n(opts.n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut variations: Vec<VariationStructure> = Vec::with_capacity(opts.n);
    let states_dir = opts.out_dir.join("states");
    if opts.dump_states {
        fs::create_dir_all(&states_dir).with_context(|| format!("creating {}", states_dir.display()))?;
    }
    let mut records = Vec::with_capacity(opts.n);
    for (i, s) in samples.iter().enumerate() {
        let sample_seed: u64 = rng.random();
        let lifted = lift_feature_map(&s.map, COMPRESSED_LEN)?;
        let vs = decode_variation(&lifted, &cohort.kept, opts.k, sample_seed)?;
        let (src_id, fragment) = &strains[rng.random_range(0..strains.len())];
        records.push(FastaRecord {
            id: format!("generated_{i} source={src_id}"),
            seq: map_to_strain(&vs, fragment, sample_seed)?,
        });
        if opts.dump_states {
            s.state.save_qdm(states_dir.join(format!("generated_{i:04}.qdm")))?;
        }
        variations.push(vs);
    }
    write(&opts.out_dir.join("variations.json"), serde_json::to_string_pretty(&variations)? + "\n")?;
    write(&opts.out_dir.join("generated.fasta"), format_fasta(&records))?;
    println!("generated {} variation structures (k = {}) in {}", opts.n, opts.k, opts.out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fidelity(
    ctx: &Ctx,
    checkpoint: &Path,
    cohort: &Path,
    n_gen: usize,
    n_real: usize,
    metric: Metric,
    self_compare: bool,
    out: Option<&Path>,
) -> Result<()> {
    if n_gen == 0 || (n_real == 0 && !self_compare) {
        bail!("n_gen and n_real must be at least 1");
    }
    let seed = ctx.seed()?;
    let state = load_state(ctx, checkpoint)?;
    let generated: Vec<DensityMatrix> = state.sample_n(n_gen, seed)?.into_iter().map(|s| s.state).collect();
    let (labels, columns): (Vec<String>, Vec<DensityMatrix>) = if self_compare {
        ((0..n_gen).map(|i| format!("generated_{i}")).collect(), generated.clone())
    } else {
        let cohort = SpikeCohort::load(cohort).with_context(|| format!("reading cohort {}", cohort.display()))?;
        let encodable: Vec<usize> = (0..cohort.len()).filter(|&i| !cohort.supports[i].is_empty()).collect();
        if encodable.len() < n_real {
            bail!("cohort has {} encodable sequences, {n_real} requested", encodable.len());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = sample(&mut rng, encodable.len(), n_real).into_iter().map(|j| encodable[j]).collect();
        picked.sort_unstable();
        let qubits = state.entry_qubits();
        let states = picked.iter().map(|&i| cohort.state(i, qubits)).collect::<qprogan::Result<_>>()?;
        (picked.iter().map(|&i| cohort.ids[i].clone()).collect(), states)
    };
    let f = match metric {
        Metric::Super => superfidelity,
        Metric::Uhlmann => uhlmann_fidelity,
    };
    let mut csv = String::from("generated");
    for l in &labels {
        csv.push(',');
        csv.push_str(&l.replace(',', ";"));
    }
    csv.push('\n');
    for (i, g) in generated.iter().enumerate() {
        csv.push_str(&format!("generated_{i}"));
        for c in &columns {
            csv.push_str(&format!(",{}", f(g, c)?));
        }
        csv.push('\n');
    }
    emit(out, &csv)
}

fn reference_fragment(path: &Path) -> Result<Vec<u8>> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(SpikeCohort::load(path)?.reference.into_bytes());
    }
    let rec = read_fasta(path)?.into_iter().next().context("reference FASTA is empty")?;
    Ok(if rec.seq.len() == SPIKE_LEN {
        rec.seq
    } else {
        intercept_spike(&rec.seq, &rec.seq)?
    })
}

fn freq(input: &Path, reference: &Path, out: Option<&Path>) -> Result<()> {
    let reference = reference_fragment(reference).with_context(|| format!("reading reference {}", reference.display()))?;
    let report = if input.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        let variations: Vec<VariationStructure> = serde_json::from_str(&text).context("parsing variation structures")?;
        let mut counts = vec![0u64; SPIKE_LEN];
        for vs in &variations {
            for &p in &vs.positions_3822 {
                match counts.get_mut(p.wrapping_sub(1)) {
                    Some(c) => *c += 1,
                    None => bail!("position {p} outside 1..={SPIKE_LEN}"),
                }
            }
        }
        FrequencyReport { counts }
    } else {
        let fragments: Vec<Vec<u8>> = read_fasta(input)?.into_iter().map(|r| r.seq).collect();
        qprogan::genomics::mutation_frequency(&fragments, &reference)?
    };
    let totals = report.section_totals();
    eprintln!("section totals {totals:?}");
    emit(out, &report.to_csv())
}
