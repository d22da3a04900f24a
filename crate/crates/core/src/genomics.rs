//! Spike-region cohort construction, mutation vectors and decoding.
//!
//! Spike coordinates are 1-based over the window `21563..=25384` of the
//! reference genome (3822 loci); genome coordinate = spike coordinate + 21562.
//! A symbol differs from the reference when it is `N`, a gap, or a different
//! base (case-insensitive).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densmat::{DensityMatrix, FeatureMap};
use crate::error::{Error, Result};

pub const SPIKE_START: usize = 21563;
pub const SPIKE_END: usize = 25384;
pub const SPIKE_LEN: usize = SPIKE_END - SPIKE_START + 1;
pub const GENOME_OFFSET: usize = SPIKE_START - 1;
pub const COMPRESSED_LEN: usize = 1024;
pub const REFERENCE_GENOME_LEN: usize = 29903;
/// Inclusive spike-coordinate ranges of the four frequency-report sections.
pub const SECTIONS: [(usize, usize); 4] = [(1, 956), (957, 1911), (1912, 2867), (2868, 3822)];
const BASES: [u8; 4] = *b"ACGT";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strain {
    #[default]
    Delta,
    Omicron,
}

impl Strain {
    /// Number of decoded mutation positions: 98% similarity on 1024 loci for
    /// Delta, 97% for Omicron.
    pub fn top_k(self) -> usize {
        match self {
            Strain::Delta => 21,
            Strain::Omicron => 31,
        }
    }
}

/// True when `symbol` counts as a mutation relative to `reference`.
pub fn differs(symbol: u8, reference: u8) -> bool {
    matches!(symbol.to_ascii_uppercase(), b'N' | b'-') || !symbol.eq_ignore_ascii_case(&reference)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    pub id: String,
    pub seq: Vec<u8>,
}

pub fn parse_fasta(text: &str) -> Result<Vec<FastaRecord>> {
    let mut records: Vec<FastaRecord> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let id = header.split_whitespace().next().unwrap_or("");
            if id.is_empty() {
                return Err(Error::Format(format!("line {}: empty record id", lineno + 1)));
            }
            records.push(FastaRecord {
                id: id.to_string(),
                seq: Vec::new(),
            });
            continue;
        }
        let Some(rec) = records.last_mut() else {
            return Err(Error::Format(format!("line {}: sequence before first header", lineno + 1)));
        };
        if let Some(bad) = line.bytes().find(|b| !(b.is_ascii_alphabetic() || *b == b'-')) {
            return Err(Error::Format(format!("line {}: unexpected symbol {:?}", lineno + 1, bad as char)));
        }
        rec.seq.extend_from_slice(line.as_bytes());
    }
    Ok(records)
}

pub fn read_fasta(path: impl AsRef<Path>) -> Result<Vec<FastaRecord>> {
    parse_fasta(&std::fs::read_to_string(path)?)
}

/// FASTA text with 70-column sequence lines.
pub fn format_fasta(records: &[FastaRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, ">{}", r.id);
        for chunk in r.seq.chunks(70) {
            out.push_str(std::str::from_utf8(chunk).expect("ASCII sequence"));
            out.push('\n');
        }
    }
    out
}

/// Symbols of `genome` at reference coordinates `start..=end`, where the
/// aligned reference row defines coordinates (its gap columns are skipped).
pub fn intercept_window(genome: &[u8], reference_row: &[u8], start: usize, end: usize) -> Result<Vec<u8>> {
    if genome.len() != reference_row.len() {
        return Err(Error::LengthMismatch {
            expected: reference_row.len(),
            found: genome.len(),
        });
    }
    let mut coord = 0;
    let mut out = Vec::with_capacity(end + 1 - start);
    for (&g, &r) in genome.iter().zip(reference_row) {
        if r == b'-' {
            continue;
        }
        coord += 1;
        if coord > end {
            break;
        }
        if coord >= start {
            out.push(g);
        }
    }
    if coord < end {
        return Err(Error::WindowNotCovered {
            start,
            end,
            available: coord,
        });
    }
    Ok(out)
}

/// The 3822-symbol spike fragment of an aligned genome.
pub fn intercept_spike(genome: &[u8], reference_row: &[u8]) -> Result<Vec<u8>> {
    intercept_window(genome, reference_row, SPIKE_START, SPIKE_END)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Mutated,
    Neighbor,
    Random,
}

/// Sorted 1-based fragment positions retained by compression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeptPositions {
    pub positions: Vec<usize>,
    pub provenance: Vec<Provenance>,
}

impl KeptPositions {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn count(&self, kind: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == kind).count()
    }
}

fn check_len(fragment: &[u8], reference: &[u8]) -> Result<()> {
    if fragment.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            found: fragment.len(),
        });
    }
    Ok(())
}

/// Entry `i` is 1 iff the fragment differs from the reference at `kept[i]`.
pub fn mutation_vector(fragment: &[u8], reference: &[u8], kept: &[usize]) -> Result<Vec<u8>> {
    check_len(fragment, reference)?;
    kept.iter()
        .map(|&p| {
            if p == 0 || p > reference.len() {
                return Err(Error::BadShape(format!("position {p} outside 1..={}", reference.len())));
            }
            Ok(u8::from(differs(fragment[p - 1], reference[p - 1])))
        })
        .collect()
}

/// Keeps every mutated locus, then their ±1 neighbours, then fills up to
/// `target` with seeded uniform draws from the remaining loci.
pub fn compress_positions_to(fragments: &[Vec<u8>], reference: &[u8], seed: u64, target: usize) -> Result<KeptPositions> {
    if reference.len() < target {
        return Err(Error::BadShape(format!("reference of {} loci cannot fill {target} slots", reference.len())));
    }
    let mut mutated = BTreeSet::new();
    for f in fragments {
        check_len(f, reference)?;
        mutated.extend((0..reference.len()).filter(|&i| differs(f[i], reference[i])).map(|i| i + 1));
    }
    let mut neighbors = BTreeSet::new();
    for &p in &mutated {
        for q in [p - 1, p + 1] {
            if (1..=reference.len()).contains(&q) && !mutated.contains(&q) {
                neighbors.insert(q);
            }
        }
    }
    let fixed = mutated.len() + neighbors.len();
    if fixed > target {
        return Err(Error::TooManyMutations(fixed));
    }
    let unchosen: Vec<usize> = (1..=reference.len())
        .filter(|p| !mutated.contains(p) && !neighbors.contains(p))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = sample(&mut rng, unchosen.len(), target - fixed);
    let mut tagged: Vec<(usize, Provenance)> = mutated
        .iter()
        .map(|&p| (p, Provenance::Mutated))
        .chain(neighbors.iter().map(|&p| (p, Provenance::Neighbor)))
        .chain(drawn.iter().map(|i| (unchosen[i], Provenance::Random)))
        .collect();
    tagged.sort_unstable_by_key(|t| t.0);
    let (positions, provenance) = tagged.into_iter().unzip();
    Ok(KeptPositions { positions, provenance })
}

pub fn compress_positions(fragments: &[Vec<u8>], reference: &[u8], seed: u64) -> Result<KeptPositions> {
    compress_positions_to(fragments, reference, seed, COMPRESSED_LEN)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariationStructure {
    /// Ranked indices into the compressed vector, strongest first.
    pub positions_1024: Vec<usize>,
    pub positions_3822: Vec<usize>,
    pub positions_genome: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

/// Top-`k` indices of `sqrt(max(diag, 0))`, ties to the lower index, mapped
/// through the kept positions.
pub fn decode_variation(map: &FeatureMap, kept: &KeptPositions, k: usize, seed: u64) -> Result<VariationStructure> {
    if map.side() != COMPRESSED_LEN || kept.len() != COMPRESSED_LEN {
        return Err(Error::BadShape(format!(
            "decoding needs a {COMPRESSED_LEN}-side map and {COMPRESSED_LEN} kept positions, got {} and {}",
            map.side(),
            kept.len()
        )));
    }
    if k > COMPRESSED_LEN {
        return Err(Error::BadShape(format!("k = {k} exceeds {COMPRESSED_LEN}")));
    }
    let diag = map.diagonal();
    if diag.iter().any(|d| d.is_nan()) {
        return Err(Error::NonFinite("feature map diagonal"));
    }
    let prob: Vec<f64> = diag.iter().map(|d| d.max(0.0).sqrt()).collect();
    let mut order: Vec<usize> = (0..prob.len()).collect();
    order.sort_by(|&a, &b| prob[b].total_cmp(&prob[a]).then(a.cmp(&b)));
    order.truncate(k);
    let positions_3822: Vec<usize> = order.iter().map(|&i| kept.positions[i]).collect();
    Ok(VariationStructure {
        positions_genome: positions_3822.iter().map(|p| p + GENOME_OFFSET).collect(),
        positions_3822,
        positions_1024: order,
        k,
        seed,
    })
}

/// Diagonal map of side `target` whose diagonal is that of `I ⊗ ρ` (identity
/// on the missing high qubits, normalized), where `ρ` encodes `map`. Only the
/// diagonal is populated since decoding reads nothing else.
pub fn lift_feature_map(map: &FeatureMap, target: usize) -> Result<FeatureMap> {
    let side = map.side();
    if side == target {
        return Ok(map.clone());
    }
    if side > target || target % side != 0 {
        return Err(Error::BadShape(format!("cannot lift side {side} to {target}")));
    }
    let rho = crate::densmat::encode_feature_map(map)?;
    let copies = (target / side) as f64;
    let diag = rho.diagonal();
    let mut out = FeatureMap::zeros(target);
    for i in 0..target {
        out.set(i, i, diag[i % side] / copies);
    }
    Ok(out)
}

/// Substitutes a seeded uniform alternative base at every decoded locus.
pub fn map_to_strain(vs: &VariationStructure, fragment: &[u8], seed: u64) -> Result<Vec<u8>> {
    if fragment.len() != SPIKE_LEN {
        return Err(Error::LengthMismatch {
            expected: SPIKE_LEN,
            found: fragment.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = fragment.to_vec();
    for &p in &vs.positions_3822 {
        let current = out[p - 1].to_ascii_uppercase();
        let choices: Vec<u8> = BASES.iter().copied().filter(|&b| b != current).collect();
        out[p - 1] = choices[rng.random_range(0..choices.len())];
    }
    Ok(out)
}

/// Per-position counts of fragments differing from the reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyReport {
    pub counts: Vec<u64>,
}

pub fn mutation_frequency(fragments: &[Vec<u8>], reference: &[u8]) -> Result<FrequencyReport> {
    if reference.len() != SPIKE_LEN {
        return Err(Error::LengthMismatch {
            expected: SPIKE_LEN,
            found: reference.len(),
        });
    }
    let mut counts = vec![0u64; reference.len()];
    for f in fragments {
        check_len(f, reference)?;
        for (i, c) in counts.iter_mut().enumerate() {
            *c += u64::from(differs(f[i], reference[i]));
        }
    }
    Ok(FrequencyReport { counts })
}

/// Label `"start-end"` of the section holding a 1-based position.
pub fn section_of(position: usize) -> Option<String> {
    SECTIONS
        .iter()
        .find(|(a, b)| (*a..=*b).contains(&position))
        .map(|(a, b)| format!("{a}-{b}"))
}

impl FrequencyReport {
    pub fn section_totals(&self) -> [u64; 4] {
        let mut out = [0; 4];
        for (s, (a, b)) in SECTIONS.iter().enumerate() {
            out[s] = self.counts[a - 1..*b].iter().sum();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,count,section\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, c, section_of(i + 1).expect("in range"));
        }
        out
    }
}

/// Aligned spike fragments of a cohort plus everything needed to encode and
/// decode them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeCohort {
    pub reference_id: String,
    pub reference: String,
    pub ids: Vec<String>,
    pub fragments: Vec<String>,
    pub kept: KeptPositions,
    /// Indices of the 1 entries of each mutation vector.
    pub supports: Vec<Vec<usize>>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub sequences: usize,
    pub mutated_loci: usize,
    pub neighbor_loci: usize,
    pub random_loci: usize,
    /// Sequences with no mutation at any kept position; they cannot be encoded.
    pub unmutated_sequences: usize,
}

impl SpikeCohort {
    /// Builds a cohort from aligned records; the reference row is `reference_id`
    /// or, when `None`, the first record.
    pub fn from_alignment(records: &[FastaRecord], reference_id: Option<&str>, seed: u64) -> Result<Self> {
        let ref_idx = match reference_id {
            None => 0,
            Some(id) => records
                .iter()
                .position(|r| r.id == id)
                .ok_or_else(|| Error::Format(format!("reference record {id:?} not found")))?,
        };
        let ref_row = &records.get(ref_idx).ok_or_else(|| Error::Format("no records".into()))?.seq;
        let reference = intercept_spike(ref_row, ref_row)?;
        let mut ids = Vec::new();
        let mut fragments = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if i == ref_idx {
                continue;
            }
            fragments.push(intercept_spike(&r.seq, ref_row)?);
            ids.push(r.id.clone());
        }
        Self::from_fragments(records[ref_idx].id.clone(), reference, ids, fragments, seed)
    }

    pub fn from_fragments(
        reference_id: String,
        reference: Vec<u8>,
        ids: Vec<String>,
        fragments: Vec<Vec<u8>>,
        seed: u64,
    ) -> Result<Self> {
        let kept = compress_positions(&fragments, &reference, seed)?;
        let supports = fragments
            .iter()
            .map(|f| {
                let v = mutation_vector(f, &reference, &kept.positions)?;
                Ok(v.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect())
            })
            .collect::<Result<_>>()?;
        let text = |s: Vec<u8>| String::from_utf8(s).map_err(|e| Error::Format(e.to_string()));
        Ok(Self {
            reference_id,
            reference: text(reference)?,
            ids,
            fragments: fragments.into_iter().map(text).collect::<Result<_>>()?,
            kept,
            supports,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    /// Dense 0/1 mutation vector of sequence `i` as amplitudes.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.kept.len()];
        for &j in &self.supports[i] {
            v[j] = 1.0;
        }
        v
    }

    /// Mutation vectors with at least one 1 entry.
    pub fn encodable_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.len()).filter(|&i| !self.supports[i].is_empty()).map(|i| self.vector(i)).collect()
    }

    /// Reduced state of sequence `i` on `qubits` low qubits.
    pub fn state(&self, i: usize, qubits: usize) -> Result<DensityMatrix> {
        crate::densmat::encode_vector_reduced(&self.vector(i), qubits)
    }

    pub fn fragment_bytes(&self) -> Vec<Vec<u8>> {
        self.fragments.iter().map(|f| f.as_bytes().to_vec()).collect()
    }

    pub fn summary(&self) -> CohortSummary {
        CohortSummary {
            sequences: self.len(),
            mutated_loci: self.kept.count(Provenance::Mutated),
            neighbor_loci: self.kept.count(Provenance::Neighbor),
            random_loci: self.kept.count(Provenance::Random),
            unmutated_sequences: self.supports.iter().filter(|s| s.is_empty()).count(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cohort serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if c.kept.len() != COMPRESSED_LEN || c.reference.len() != SPIKE_LEN || c.supports.len() != c.fragments.len() {
            return Err(Error::Format("inconsistent cohort file".into()));
        }
        if c.supports.iter().flatten().any(|&j| j >= COMPRESSED_LEN) {
            return Err(Error::Format("vector support index out of range".into()));
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Parameters of the seeded synthetic cohort.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCohort {
    pub sequences: usize,
    pub hotspots: usize,
    pub hotspot_rate: f64,
    pub background: usize,
    pub background_rate: f64,
    pub seed: u64,
}

/// Spike-coordinate ranges that receive planted hotspots.
pub const HOTSPOT_REGIONS: [(usize, usize); 3] = [(300, 500), (2000, 2100), (3300, 3500)];

impl Default for SyntheticCohort {
    fn default() -> Self {
        Self {
            sequences: 200,
            hotspots: 30,
            hotspot_rate: 0.6,
            background: 60,
            background_rate: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticCohort {
    /// Reference genome first, then `sequences` mutated copies, all ungapped.
    pub fn generate(&self) -> Vec<FastaRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let reference: Vec<u8> = (0..REFERENCE_GENOME_LEN).map(|_| BASES[rng.random_range(0..4)]).collect();
        let region_len: usize = HOTSPOT_REGIONS.iter().map(|(a, b)| b - a + 1).sum();
        let hotspots: Vec<usize> = sample(&mut rng, region_len, self.hotspots.min(region_len))
            .into_iter()
            .map(|mut i| {
                for (a, b) in HOTSPOT_REGIONS {
                    if i <= b - a {
                        return a + i;
                    }
                    i -= b - a + 1;
                }
                unreachable!("index within regions")
            })
            .collect();
        let background: Vec<usize> = sample(&mut rng, SPIKE_LEN, self.background.min(SPIKE_LEN))
            .into_iter()
            .map(|i| i + 1)
            .collect();
        let mut records = vec![FastaRecord {
            id: "reference".into(),
            seq: reference.clone(),
        }];
        for s in 0..self.sequences {
            let mut seq = reference.clone();
            let loci = hotspots
                .iter()
                .map(|&p| (p, self.hotspot_rate))
                .chain(background.iter().map(|&p| (p, self.background_rate)));
            for (p, rate) in loci {
                if rng.random_bool(rate) {
                    let idx = p + GENOME_OFFSET - 1;
                    let alt: Vec<u8> = BASES.iter().copied().filter(|&b| b != seq[idx]).collect();
                    seq[idx] = alt[rng.random_range(0..3)];
                }
            }
            // one mutation outside the window, which interception must drop
            let outside = rng.random_range(0..SPIKE_START - 1);
            seq[outside] = if seq[outside] == b'A' { b'C' } else { b'A' };
            records.push(FastaRecord {
                id: format!("synthetic_{s:04}"),
                seq,
            });
        }
        records
    }
}
