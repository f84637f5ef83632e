//! Pauli measurement settings, shot sampling, the Z₂ data transformation,
//! and empirical probability tables.
//!
//! Measuring axis a on a site returns bit 1 for the +1 eigenvector of σ^a.
//! The rotation R_a maps that eigenvector to |↑⟩, so the outcome
//! distribution of a setting is diag(R ρ R†) with R = ⊗_j R_{a_j}.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, Gate2, I, ZERO};
use crate::noise::NoiseParams;
use crate::statekit::{format_bitstring, parse_bitstring, DensityMatrix, PureState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn as_char(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    pub fn from_char(ch: char) -> Result<Self> {
        match ch {
            'X' => Ok(Axis::X),
            'Y' => Ok(Axis::Y),
            'Z' => Ok(Axis::Z),
            _ => Err(Error::Parse(format!("invalid axis '{ch}'"))),
        }
    }

    /// R_a with R_a |+1 eigenvector of σ^a⟩ = |↑⟩.
    pub fn rotation(self) -> Gate2 {
        let h = c(std::f64::consts::FRAC_1_SQRT_2);
        match self {
            Axis::Z => [[c(1.0), ZERO], [ZERO, c(1.0)]],
            Axis::X => [[h, -h], [h, h]],
            Axis::Y => [[h * I, h], [-h * I, h]],
        }
    }
}

/// One Pauli axis per site of the measured register.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementSetting {
    pub axes: Vec<Axis>,
}

impl MeasurementSetting {
    pub fn uniform(axis: Axis, n: usize) -> Self {
        Self { axes: vec![axis; n] }
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    /// Axes at the given positions of this setting.
    pub fn restrict(&self, positions: &[usize]) -> Self {
        Self {
            axes: positions.iter().map(|&p| self.axes[p]).collect(),
        }
    }

    pub fn rotations(&self) -> Vec<Gate2> {
        self.axes.iter().map(|a| a.rotation()).collect()
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.axes {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for MeasurementSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self {
            axes: s.chars().map(Axis::from_char).collect::<Result<_>>()?,
        })
    }
}

impl Serialize for MeasurementSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MeasurementSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 3^window settings on `n_sites` whose restriction to every contiguous
/// window of `window` sites is the complete set of Pauli strings: combo c
/// (lexicographic, X < Y < Z) places c[j mod window] on site j.
pub fn window_settings(n_sites: usize, window: usize) -> Result<Vec<MeasurementSetting>> {
    if window == 0 || window > n_sites {
        return Err(Error::InvalidParameter(format!("window {window} must lie in 1..={n_sites}")));
    }
    if window > 12 {
        return Err(Error::SizeCap(format!("3^{window} settings is too many")));
    }
    let count = 3usize.pow(window as u32);
    Ok((0..count)
        .map(|k| {
            let combo: Vec<Axis> = (0..window)
                .map(|p| Axis::ALL[(k / 3usize.pow((window - 1 - p) as u32)) % 3])
                .collect();
            MeasurementSetting {
                axes: (0..n_sites).map(|j| combo[j % window]).collect(),
            }
        })
        .collect())
}

/// Shot histogram of one setting, keyed by bitstring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingRecord {
    pub axes: MeasurementSetting,
    pub counts: BTreeMap<String, u64>,
}

impl SettingRecord {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DatasetHeader {
    register: Vec<usize>,
    shots: u64,
    seed: u64,
    source: String,
}

/// Shots taken on `register` (source site indices) in a list of settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementDataset {
    pub register: Vec<usize>,
    /// Shots per setting.
    pub shots: u64,
    pub seed: u64,
    pub source: String,
    pub records: Vec<SettingRecord>,
}

impl MeasurementDataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.register.len();
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.records {
            if r.axes.len() != n {
                return Err(Error::Mismatch(format!("setting {} on a {n}-site register", r.axes)));
            }
            if !seen.insert(r.axes.clone()) {
                return Err(Error::InvalidParameter(format!("setting {} repeated", r.axes)));
            }
            for (bits, &count) in &r.counts {
                if bits.len() != n || parse_bitstring(bits).is_err() {
                    return Err(Error::Parse(format!("bad bitstring {bits:?} for {n} sites")));
                }
                if count == 0 {
                    return Err(Error::InvalidParameter("zero count in record".into()));
                }
            }
            if r.total() != self.shots {
                return Err(Error::Mismatch(format!(
                    "setting {} has {} shots, header says {}",
                    r.axes,
                    r.total(),
                    self.shots
                )));
            }
        }
        Ok(())
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        let header = DatasetHeader {
            register: self.register.clone(),
            shots: self.shots,
            seed: self.seed,
            source: self.source.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&first)?;
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        let data = Self {
            register: header.register,
            shots: header.shots,
            seed: header.seed,
            source: header.source,
            records,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn record(&self, setting: &MeasurementSetting) -> Option<&SettingRecord> {
        self.records.iter().find(|r| &r.axes == setting)
    }
}

/// What a dataset is sampled from.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityMatrix),
}

impl Source<'_> {
    pub fn n_sites(&self) -> usize {
        match self {
            Source::Pure(s) => s.n_sites,
            Source::Mixed(r) => r.n_sites,
        }
    }
}

/// Outcome distribution of a pure state measured on `register` in
/// `setting`; the vector is indexed by the register bitstring.
pub fn pure_probabilities(state: &PureState, register: &[usize], setting: &MeasurementSetting) -> Vec<f64> {
    let n = state.n_sites;
    let mut psi = state.amplitudes.clone();
    for (&site, axis) in register.iter().zip(&setting.axes) {
        if *axis == Axis::Z {
            continue;
        }
        let u = axis.rotation();
        let mask = linalg::site_mask(n, site);
        for i0 in 0..psi.len() {
            if i0 & mask == 0 {
                let i1 = i0 | mask;
                let (a, b) = (psi[i0], psi[i1]);
                psi[i0] = u[0][0] * a + u[0][1] * b;
                psi[i1] = u[1][0] * a + u[1][1] * b;
            }
        }
    }
    let k = register.len();
    let masks: Vec<usize> = register.iter().map(|&s| linalg::site_mask(n, s)).collect();
    let mut p = vec![0.0; 1 << k];
    for (idx, a) in psi.iter().enumerate() {
        let w = a.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let local = masks.iter().fold(0usize, |acc, &m| (acc << 1) | usize::from(idx & m != 0));
        p[local] += w;
    }
    p
}

/// diag(R ρ R†) for a density matrix given as weighted vectors Σ λ|v⟩⟨v|.
fn mixture_probabilities(ensemble: &[(f64, PureState)], setting: &MeasurementSetting) -> Vec<f64> {
    let n = setting.len();
    let register: Vec<usize> = (0..n).collect();
    let mut p = vec![0.0; 1 << n];
    for (w, v) in ensemble {
        for (acc, x) in p.iter_mut().zip(pure_probabilities(v, &register, setting)) {
            *acc += w * x;
        }
    }
    p
}

fn ensemble_of(rho: &DensityMatrix) -> Vec<(f64, PureState)> {
    let (vals, vecs) = linalg::eigh(&rho.matrix);
    vals.iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-15)
        .map(|(k, &v)| {
            let amps: Vec<Complex64> = vecs.column(k).iter().copied().collect();
            (
                v,
                PureState {
                    n_sites: rho.n_sites,
                    amplitudes: amps,
                },
            )
        })
        .collect()
}

/// Exact outcome distribution diag(R D[ρ] R†) on `register`, with the
/// optional channel D applied before the rotation.
pub fn born_probabilities(
    source: Source<'_>,
    register: &[usize],
    setting: &MeasurementSetting,
    noise: Option<&NoiseParams>,
) -> Result<Vec<f64>> {
    check_register(source.n_sites(), register)?;
    if setting.len() != register.len() {
        return Err(Error::Mismatch(format!("setting {setting} on a {}-site register", register.len())));
    }
    let mut p = match source {
        Source::Pure(s) => pure_probabilities(s, register, setting),
        Source::Mixed(rho) => {
            let sub = if register.len() == rho.n_sites && register.windows(2).all(|w| w[0] < w[1]) {
                rho.clone()
            } else {
                restrict_density(rho, register)?
            };
            mixture_probabilities(&ensemble_of(&sub), setting)
        }
    };
    if let Some(np) = noise {
        np.apply_readout(&mut p, setting)?;
    }
    Ok(p)
}

fn restrict_density(rho: &DensityMatrix, register: &[usize]) -> Result<DensityMatrix> {
    let mut sorted = register.to_vec();
    sorted.sort_unstable();
    let sub = rho.partial_trace(&sorted)?;
    if sorted == register {
        return Ok(sub);
    }
    // reorder tensor factors to follow `register`
    let k = register.len();
    let perm: Vec<usize> = register.iter().map(|s| sorted.iter().position(|t| t == s).unwrap()).collect();
    let map = |idx: usize| -> usize {
        let mut out = 0;
        for (p, &src) in perm.iter().enumerate() {
            if (idx >> (k - 1 - src)) & 1 == 1 {
                out |= 1 << (k - 1 - p);
            }
        }
        out
    };
    let dim = 1usize << k;
    let mut m = linalg::CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(map(i), map(j))] = sub.matrix[(i, j)];
        }
    }
    Ok(DensityMatrix { n_sites: k, matrix: m })
}

fn check_register(n_sites: usize, register: &[usize]) -> Result<()> {
    if register.is_empty() {
        return Err(Error::InvalidParameter("empty register".into()));
    }
    if register.len() > n_sites || register.iter().any(|&s| s >= n_sites) {
        return Err(Error::InvalidSize(format!("register {register:?} exceeds a {n_sites}-site source")));
    }
    for (p, s) in register.iter().enumerate() {
        if register[..p].contains(s) {
            return Err(Error::InvalidParameter(format!("site {s} repeated in register")));
        }
    }
    Ok(())
}

/// Draw `shots` outcomes from a distribution (negative round-off clamped).
pub fn draw_counts(p: &[f64], shots: u64, n_bits: usize, rng: &mut ChaCha20Rng) -> Result<BTreeMap<String, u64>> {
    let weights: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(format!("outcome distribution: {e}")))?;
    let mut hist = vec![0u64; p.len()];
    for _ in 0..shots {
        hist[dist.sample(rng)] += 1;
    }
    Ok(hist
        .iter()
        .enumerate()
        .filter(|(_, &h)| h > 0)
        .map(|(i, &h)| (format_bitstring(i, n_bits), h))
        .collect())
}

/// RNG for stream `stream` of a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `shots` projective measurements per setting on `register` of the source.
/// Setting k draws from RNG stream k of `seed`.
pub fn sample_dataset(
    source: Source<'_>,
    register: &[usize],
    settings: &[MeasurementSetting],
    shots: u64,
    noise: Option<&NoiseParams>,
    seed: u64,
    label: &str,
) -> Result<MeasurementDataset> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    check_register(source.n_sites(), register)?;
    if let Some(np) = noise {
        np.validate()?;
    }
    // mixed sources are decomposed once and reused for every setting
    let ensemble = match source {
        Source::Mixed(rho) => Some(ensemble_of(&restrict_density(rho, register)?)),
        Source::Pure(_) => None,
    };
    let k = register.len();
    let records = settings
        .par_iter()
        .enumerate()
        .map(|(idx, setting)| {
            if setting.len() != k {
                return Err(Error::Mismatch(format!("setting {setting} on a {k}-site register")));
            }
            let mut p = match (&ensemble, source) {
                (Some(e), _) => mixture_probabilities(e, setting),
                (None, Source::Pure(s)) => pure_probabilities(s, register, setting),
                (None, Source::Mixed(_)) => unreachable!(),
            };
            if let Some(np) = noise {
                np.apply_readout(&mut p, setting)?;
            }
            let mut rng = stream_rng(seed, idx as u64);
            Ok(SettingRecord {
                axes: setting.clone(),
                counts: draw_counts(&p, shots, k, &mut rng)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementDataset {
        register: register.to_vec(),
        shots,
        seed,
        source: label.to_string(),
        records,
    })
}

/// Z₂ transformation: every record (α, s, c) becomes (α, s, c) and
/// (α, s′, c), where s′ flips the bits measured along Y or Z. Counts and the
/// per-setting shot total are doubled, so relative frequencies are those of
/// (ρ + PρP)/2.
pub fn z2_symmetrize_dataset(data: &MeasurementDataset) -> MeasurementDataset {
    let records = data
        .records
        .iter()
        .map(|r| {
            let n = r.axes.len();
            let flip: usize = r
                .axes
                .axes
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != Axis::X)
                .map(|(p, _)| 1usize << (n - 1 - p))
                .sum();
            let mut counts = BTreeMap::new();
            for (bits, &count) in &r.counts {
                let idx = parse_bitstring(bits).expect("validated bitstring");
                *counts.entry(bits.clone()).or_insert(0) += count;
                *counts.entry(format_bitstring(idx ^ flip, n)).or_insert(0) += count;
            }
            SettingRecord {
                axes: r.axes.clone(),
                counts,
            }
        })
        .collect();
    MeasurementDataset {
        register: data.register.clone(),
        shots: 2 * data.shots,
        seed: data.seed,
        source: format!("{}+z2", data.source),
        records,
    }
}

/// Outcome frequencies on a subsystem, one row per original setting.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    /// Source site indices of the subsystem, in bitstring order.
    pub sites: Vec<usize>,
    /// Setting restricted to the subsystem, one per row.
    pub settings: Vec<MeasurementSetting>,
    /// Row k: frequencies indexed by the subsystem bitstring.
    pub probs: Vec<Vec<f64>>,
    /// Shots behind each row.
    pub shots: Vec<u64>,
}

impl ProbabilityTable {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Frequency of `bits` in row `row`.
    pub fn get(&self, row: usize, bits: &str) -> Result<f64> {
        Ok(self.probs[row][parse_bitstring(bits)?])
    }

    /// Sum out every position not in `keep` (positions within this table).
    pub fn marginal(&self, keep: &[usize]) -> ProbabilityTable {
        let k = self.n_sites();
        let probs = self.probs.iter().map(|row| marginalize(row, k, keep)).collect();
        ProbabilityTable {
            sites: keep.iter().map(|&p| self.sites[p]).collect(),
            settings: self.settings.iter().map(|s| s.restrict(keep)).collect(),
            probs,
            shots: self.shots.clone(),
        }
    }
}

pub(crate) fn marginalize(p: &[f64], n_bits: usize, keep: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << keep.len()];
    for (idx, &v) in p.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let local = keep
            .iter()
            .fold(0usize, |acc, &pos| (acc << 1) | ((idx >> (n_bits - 1 - pos)) & 1));
        out[local] += v;
    }
    out
}

/// Marginal relative frequencies on `subsystem` (source site indices, each
/// in the register), keeping every original setting as its own row.
pub fn empirical_probabilities(data: &MeasurementDataset, subsystem: &[usize]) -> Result<ProbabilityTable> {
    if subsystem.is_empty() {
        return Err(Error::InvalidParameter("empty subsystem".into()));
    }
    let positions = subsystem
        .iter()
        .map(|s| {
            data.register
                .iter()
                .position(|r| r == s)
                .ok_or_else(|| Error::InvalidParameter(format!("site {s} not in register {:?}", data.register)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = data.register.len();
    let k = subsystem.len();
    let mut probs = Vec::with_capacity(data.records.len());
    let mut shots = Vec::with_capacity(data.records.len());
    for r in &data.records {
        let total = r.total();
        let mut row = vec![0.0; 1 << k];
        for (bits, &count) in &r.counts {
            let idx = parse_bitstring(bits)?;
            let local = positions
                .iter()
                .fold(0usize, |acc, &pos| (acc << 1) | ((idx >> (n - 1 - pos)) & 1));
            row[local] += count as f64;
        }
        row.iter_mut().for_each(|v| *v /= total as f64);
        probs.push(row);
        shots.push(total);
    }
    Ok(ProbabilityTable {
        sites: subsystem.to_vec(),
        settings: data.records.iter().map(|r| r.axes.restrict(&positions)).collect(),
        probs,
        shots,
    })
}

/// Exact Born table of a state on `sites` for the given full-register
/// settings (restricted to `sites`).
pub fn exact_probability_table(
    source: Source<'_>,
    sites: &[usize],
    settings: &[MeasurementSetting],
    noise: Option<&NoiseParams>,
) -> Result<ProbabilityTable> {
    let probs = settings
        .par_iter()
        .map(|s| born_probabilities(source, sites, s, noise))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityTable {
        sites: sites.to_vec(),
        settings: settings.to_vec(),
        probs,
        shots: vec![0; settings.len()],
    })
}

/// Randomly partition each setting's shots into parts of the given sizes
/// (fractions of the per-setting total, the last part taking the rest).
pub fn split_dataset(data: &MeasurementDataset, fractions: &[f64], seed: u64) -> Result<Vec<MeasurementDataset>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) || fractions.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("bad split fractions {fractions:?}")));
    }
    let sizes: Vec<u64> = {
        let mut s: Vec<u64> = fractions.iter().map(|f| (f * data.shots as f64).floor() as u64).collect();
        let used: u64 = s[..s.len() - 1].iter().sum();
        *s.last_mut().unwrap() = data.shots - used;
        s
    };
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidParameter(format!("{} shots cannot be split as {fractions:?}", data.shots)));
    }
    let mut parts: Vec<Vec<SettingRecord>> = vec![Vec::with_capacity(data.records.len()); sizes.len()];
    for (idx, r) in data.records.iter().enumerate() {
        let mut expanded: Vec<&String> = Vec::with_capacity(data.shots as usize);
        for (bits, &count) in &r.counts {
            expanded.extend(std::iter::repeat_n(bits, count as usize));
        }
        let mut rng = stream_rng(seed, idx as u64);
        expanded.shuffle(&mut rng);
        let mut offset = 0;
        for (part, &size) in parts.iter_mut().zip(&sizes) {
            let mut counts = BTreeMap::new();
            for bits in &expanded[offset..offset + size as usize] {
                *counts.entry((*bits).clone()).or_insert(0) += 1;
            }
            offset += size as usize;
            part.push(SettingRecord {
                axes: r.axes.clone(),
                counts,
            });
        }
    }
    Ok(parts
        .into_iter()
        .zip(&sizes)
        .enumerate()
        .map(|(k, (records, &size))| MeasurementDataset {
            register: data.register.clone(),
            shots: size,
            seed,
            source: format!("{}/part{k}", data.source),
            records,
        })
        .collect())
}
