//! Metropolis single-flip dynamics: trajectories, hitting times, Arrhenius
//! fits, the exponential law, gate crossings, recurrence and the spectral gap.
//!
//! One step is one proposal: a uniformly random site is proposed and flipped
//! with probability `exp(-beta [dH]+)`. Rejected proposals are self-loops.

use crate::config::SpinConfiguration;
use crate::error::{ModelError, Result};
use crate::landscape::{self, Landscape};
use crate::lattice::ModelSpec;
use crate::paths::{self, Endpoint, GateRow};
use crate::stats;
use crate::Energy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

fn scaled_energy(c: &SpinConfiguration) -> i64 {
    let scale = *c.spec().alpha.denom();
    let e = c.energy() * scale;
    *e.numer()
}

/// Generator for replica `stream` of run `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The state of one chain.
#[derive(Clone)]
pub struct ChainState {
    spins: Vec<i8>,
    words: Vec<u64>,
    /// Energy times the denominator of alpha.
    energy: i64,
    pub step_count: u64,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(start: &SpinConfiguration, seed: u64, stream: u64) -> Self {
        ChainState {
            spins: start.spins(),
            words: start.words().to_vec(),
            energy: scaled_energy(start),
            step_count: 0,
            rng: replica_rng(seed, stream),
        }
    }

    pub fn config(&self, spec: &Arc<ModelSpec>) -> SpinConfiguration {
        SpinConfiguration::from_spins(spec, &self.spins).expect("chain spins are +-1")
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Energy scaled by the denominator of alpha.
    pub fn scaled_energy(&self) -> i64 {
        self.energy
    }
}

/// Metropolis kernel at a fixed inverse temperature.
///
/// Flip energy changes take the form `f + alpha c` with `f` in `{-2, 0, 2}`
/// and `c` in `{-4, ..., 4}`, so acceptance probabilities are tabulated once.
pub struct Metropolis {
    spec: Arc<ModelSpec>,
    beta: f64,
    scale: i64,
    neighbors: Vec<[u32; 4]>,
    prefs: Vec<i8>,
    delta: [[i64; 5]; 3],
    accept: [[f64; 5]; 3],
}

impl Metropolis {
    pub fn new(spec: &Arc<ModelSpec>, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(ModelError::Range(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        let scale = *spec.alpha.denom();
        let numer = *spec.alpha.numer();
        let mut delta = [[0i64; 5]; 3];
        let mut accept = [[1.0f64; 5]; 3];
        for (fi, row) in delta.iter_mut().enumerate() {
            for (ci, d) in row.iter_mut().enumerate() {
                let f = 2 * (fi as i64 - 1);
                let c = 2 * (ci as i64 - 2);
                *d = f * scale + numer * c;
                if *d > 0 {
                    accept[fi][ci] = (-beta * (*d as f64 / scale as f64)).exp();
                }
            }
        }
        let neighbors = (0..spec.num_sites())
            .map(|i| spec.neighbor_indices(i).map(|j| j as u32))
            .collect();
        Ok(Metropolis {
            spec: spec.clone(),
            beta,
            scale,
            neighbors,
            prefs: spec.preferences(),
            delta,
            accept,
        })
    }

    pub fn spec(&self) -> &Arc<ModelSpec> {
        &self.spec
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn to_energy(&self, scaled: i64) -> Energy {
        Energy::new(scaled, self.scale)
    }

    /// Acceptance probability of flipping site `i` of `config`.
    pub fn acceptance(&self, config: &SpinConfiguration, i: usize) -> f64 {
        let (f, c) = config.delta_parts(i);
        self.accept[(f / 2 + 1) as usize][(c / 2 + 2) as usize]
    }

    pub fn chain(&self, start: &SpinConfiguration, seed: u64, stream: u64) -> ChainState {
        ChainState::new(start, seed, stream)
    }

    /// One proposal. Returns whether the flip was accepted.
    #[inline]
    pub fn step(&self, st: &mut ChainState) -> bool {
        st.step_count += 1;
        let i = st.rng.random_range(0..self.neighbors.len());
        let s = st.spins[i];
        let nsum: i8 = self.neighbors[i]
            .iter()
            .map(|&j| st.spins[j as usize])
            .sum();
        let fi = (self.prefs[i] * s + 1) as usize;
        let ci = ((s * nsum + 4) / 2) as usize;
        let d = self.delta[fi][ci];
        if d > 0 && st.rng.random::<f64>() >= self.accept[fi][ci] {
            return false;
        }
        st.spins[i] = -s;
        st.words[i / 64] ^= 1 << (i % 64);
        st.energy += d;
        true
    }
}

pub fn metropolis_step(state: &mut ChainState, kernel: &Metropolis) -> bool {
    kernel.step(state)
}

/// A set of configurations with constant-time membership.
pub struct StateSet {
    index: HashMap<Vec<u64>, usize>,
    levels: Vec<i64>,
    configs: Vec<SpinConfiguration>,
}

impl StateSet {
    pub fn new(configs: Vec<SpinConfiguration>) -> Self {
        let mut index = HashMap::with_capacity(configs.len());
        let mut levels = Vec::new();
        for (i, c) in configs.iter().enumerate() {
            index.entry(c.words().to_vec()).or_insert(i);
            let e = scaled_energy(c);
            if !levels.contains(&e) {
                levels.push(e);
            }
        }
        StateSet {
            index,
            levels,
            configs,
        }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[SpinConfiguration] {
        &self.configs
    }

    pub fn contains(&self, c: &SpinConfiguration) -> bool {
        self.index.contains_key(c.words())
    }

    #[inline]
    fn lookup(&self, energy: i64, words: &[u64]) -> Option<usize> {
        if !self.levels.contains(&energy) {
            return None;
        }
        self.index.get(words).copied()
    }
}

/// Gate families to watch at a saddle level.
pub struct GateRecorder {
    level: i64,
    index: HashMap<Vec<u64>, usize>,
    tags: Vec<String>,
}

impl GateRecorder {
    pub fn new(
        spec: &ModelSpec,
        saddle_level: Energy,
        families: Vec<(String, Vec<SpinConfiguration>)>,
    ) -> Self {
        let scaled = saddle_level * *spec.alpha.denom();
        assert!(
            scaled.is_integer(),
            "saddle level {saddle_level} is not on the energy lattice"
        );
        let mut index = HashMap::new();
        let mut tags = Vec::new();
        for (tag, states) in families {
            for c in states {
                index.entry(c.words().to_vec()).or_insert(tags.len());
            }
            tags.push(tag);
        }
        GateRecorder {
            level: *scaled.numer(),
            index,
            tags,
        }
    }

    /// Recorder for one gate-table row, with the saddle level
    /// `H(start) + barrier(start)`.
    pub fn for_row(spec: &Arc<ModelSpec>, row: &GateRow) -> Result<Self> {
        let gs = paths::gamma_star(spec)?;
        let barrier = gs
            .barrier(row.from)
            .ok_or_else(|| ModelError::Regime(format!("no barrier tabulated from {}", row.from)))?;
        let start = &row.from.states(spec)[0];
        let families = row
            .gates
            .iter()
            .flatten()
            .map(|(f, s)| (f.to_string(), s.clone()))
            .collect();
        Ok(Self::new(spec, start.energy() + barrier, families))
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HittingTimeSample {
    pub replica: u64,
    pub beta: f64,
    pub steps: u64,
    pub censored: bool,
    /// Index of the target configuration reached.
    pub target_hit: Option<usize>,
    /// First gate family met at the saddle level during the final excursion
    /// from the start, `"none"` if there was none. Absent without recording.
    pub gate_crossed: Option<String>,
    #[serde(with = "crate::landscape::energy_serde")]
    pub saddle_max_seen: Energy,
}

/// Run one chain from `start` until it enters `targets` or `step_cap` steps
/// have been made.
///
/// The final excursion is the part of the trajectory after the last visit
/// to `start`; its maximum energy and its first gate-family configuration
/// at the saddle level are recorded.
pub fn run_until_hit(
    kernel: &Metropolis,
    start: &SpinConfiguration,
    targets: &StateSet,
    step_cap: u64,
    gates: Option<&GateRecorder>,
    seed: u64,
    replica: u64,
) -> HittingTimeSample {
    let mut st = kernel.chain(start, seed, replica);
    let start_words = st.words.clone();
    let start_e = st.energy;
    let mut excursion_max = start_e;
    let mut tag: Option<usize> = None;
    let finish =
        |st: &ChainState, hit: Option<usize>, tag: Option<usize>, max: i64| HittingTimeSample {
            replica,
            beta: kernel.beta,
            steps: st.step_count,
            censored: hit.is_none(),
            target_hit: hit,
            gate_crossed: gates
                .map(|g| tag.map_or_else(|| "none".to_string(), |t| g.tags[t].clone())),
            saddle_max_seen: kernel.to_energy(max),
        };
    if let Some(t) = targets.lookup(start_e, &st.words) {
        return finish(&st, Some(t), None, excursion_max);
    }
    while st.step_count < step_cap {
        if !kernel.step(&mut st) {
            continue;
        }
        let e = st.energy;
        if e == start_e && st.words == start_words {
            excursion_max = start_e;
            tag = None;
            continue;
        }
        excursion_max = excursion_max.max(e);
        if let Some(g) = gates {
            if tag.is_none() && e == g.level {
                tag = g.index.get(&st.words[..]).copied();
            }
        }
        if let Some(t) = targets.lookup(e, &st.words) {
            return finish(&st, Some(t), tag, excursion_max);
        }
    }
    finish(&st, None, tag, excursion_max)
}

/// Independent replicas `0..replicas` in parallel, in replica order.
pub fn hitting_times(
    kernel: &Metropolis,
    start: &SpinConfiguration,
    targets: &StateSet,
    step_cap: u64,
    gates: Option<&GateRecorder>,
    seed: u64,
    replicas: u64,
) -> Vec<HittingTimeSample> {
    (0..replicas)
        .into_par_iter()
        .map(|r| run_until_hit(kernel, start, targets, step_cap, gates, seed, r))
        .collect()
}

/// Default censoring cap `|V| exp(beta (barrier + 1))`: the time scale in
/// sweeps, converted to proposals.
pub fn default_step_cap(spec: &ModelSpec, barrier: Energy, beta: f64) -> u64 {
    let b = *barrier.numer() as f64 / *barrier.denom() as f64;
    let cap = spec.num_sites() as f64 * (beta * (b + 1.0)).exp();
    cap.min(u64::MAX as f64 / 2.0).ceil() as u64
}

pub fn write_samples_csv<W: std::io::Write>(out: W, samples: &[HittingTimeSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt_err = |e: csv::Error| ModelError::Format(e.to_string());
    w.write_record([
        "replica",
        "beta",
        "steps",
        "censored",
        "gate_tag",
        "saddle_max",
    ])
    .map_err(fmt_err)?;
    for s in samples {
        w.write_record([
            s.replica.to_string(),
            s.beta.to_string(),
            s.steps.to_string(),
            s.censored.to_string(),
            s.gate_crossed.clone().unwrap_or_default(),
            crate::lattice::format_rational(&s.saddle_max_seen),
        ])
        .map_err(fmt_err)?;
    }
    w.flush().map_err(|e| ModelError::Format(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ArrheniusPoint {
    pub beta: f64,
    pub replicas: usize,
    pub censored: usize,
    /// Mean steps with censored samples counted at the cap, hence a lower
    /// bound whenever `censored > 0`.
    pub mean_steps: f64,
    pub log_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArrheniusReport {
    pub points: Vec<ArrheniusPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub censored: usize,
}

/// Least-squares fit of `log(mean steps)` against beta with a bootstrap
/// standard error over replicas.
pub fn fit_arrhenius(groups: &[Vec<HittingTimeSample>], seed: u64) -> Result<ArrheniusReport> {
    let mut points = Vec::new();
    let mut betas = Vec::new();
    let mut steps: Vec<Vec<f64>> = Vec::new();
    for g in groups {
        let beta = g
            .first()
            .map(|s| s.beta)
            .ok_or_else(|| ModelError::Insufficient("empty beta group".into()))?;
        let censored = g.iter().filter(|s| s.censored).count();
        if censored == g.len() {
            return Err(ModelError::Insufficient(format!(
                "every sample at beta = {beta} is censored"
            )));
        }
        let xs: Vec<f64> = g.iter().map(|s| s.steps as f64).collect();
        let mean = stats::mean(&xs);
        points.push(ArrheniusPoint {
            beta,
            replicas: g.len(),
            censored,
            mean_steps: mean,
            log_mean: mean.ln(),
        });
        betas.push(beta);
        steps.push(xs);
    }
    let logs: Vec<f64> = points.iter().map(|p| p.log_mean).collect();
    let (slope, intercept) = stats::least_squares(&betas, &logs);
    let mut rng = replica_rng(seed, u64::MAX);
    let stderr = stats::bootstrap_stderr(&steps, 400, &mut rng, |gs| {
        let ys: Vec<f64> = gs.iter().map(|g| stats::mean(g).ln()).collect();
        stats::least_squares(&betas, &ys).0
    });
    let censored = points.iter().map(|p| p.censored).sum();
    Ok(ArrheniusReport {
        points,
        slope,
        intercept,
        stderr,
        censored,
    })
}

/// Hitting-time samples on a beta grid followed by the Arrhenius fit.
pub fn arrhenius_slope(
    spec: &Arc<ModelSpec>,
    start: &SpinConfiguration,
    targets: &StateSet,
    betas: &[f64],
    replicas: u64,
    seed: u64,
    step_cap: impl Fn(f64) -> u64,
) -> Result<(ArrheniusReport, Vec<Vec<HittingTimeSample>>)> {
    if betas.len() < 3 || replicas < 50 {
        return Err(ModelError::Range(format!(
            "need at least 3 betas and 50 replicas, got {} and {replicas}",
            betas.len()
        )));
    }
    let mut groups = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        let kernel = Metropolis::new(spec, beta)?;
        let run_seed = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        groups.push(hitting_times(
            &kernel,
            start,
            targets,
            step_cap(beta),
            None,
            run_seed,
            replicas,
        ));
    }
    Ok((fit_arrhenius(&groups, seed)?, groups))
}

#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub samples: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Kolmogorov-Smirnov distance between `samples / mean` and `Exp(1)`.
pub fn exponential_law_test(samples: &[u64], threshold: f64) -> Result<KsReport> {
    if samples.len() < 100 {
        return Err(ModelError::Insufficient(format!(
            "{} samples, need at least 100",
            samples.len()
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
    let mean = stats::mean(&xs);
    let norm: Vec<f64> = xs.iter().map(|x| x / mean).collect();
    let statistic = stats::ks_exponential(&norm);
    Ok(KsReport {
        samples: samples.len(),
        statistic,
        threshold,
        pass: statistic < threshold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GateStatistics {
    pub from: Endpoint,
    pub to: Endpoint,
    pub beta: f64,
    pub transitions: usize,
    pub censored: usize,
    /// Crossings per family tag, plus `"none"`.
    pub counts: BTreeMap<String, usize>,
}

impl GateStatistics {
    pub fn frequency(&self, tag: &str) -> f64 {
        if self.transitions == 0 {
            return 0.0;
        }
        *self.counts.get(tag).unwrap_or(&0) as f64 / self.transitions as f64
    }
}

/// Which gate family each successful transition of a gate-table row crossed.
pub fn gate_crossing_statistics(
    spec: &Arc<ModelSpec>,
    row: &GateRow,
    beta: f64,
    replicas: u64,
    seed: u64,
    step_cap: u64,
) -> Result<(GateStatistics, Vec<HittingTimeSample>)> {
    let kernel = Metropolis::new(spec, beta)?;
    let recorder = GateRecorder::for_row(spec, row)?;
    let start = &row.from.states(spec)[0];
    let targets = StateSet::new(row.to.states(spec));
    let samples = hitting_times(
        &kernel,
        start,
        &targets,
        step_cap,
        Some(&recorder),
        seed,
        replicas,
    );
    let mut counts: BTreeMap<String, usize> =
        recorder.tags().iter().map(|t| (t.clone(), 0)).collect();
    counts.insert("none".into(), 0);
    let mut transitions = 0;
    for s in samples.iter().filter(|s| !s.censored) {
        transitions += 1;
        *counts
            .entry(s.gate_crossed.clone().unwrap_or_else(|| "none".into()))
            .or_default() += 1;
    }
    let censored = samples.len() - transitions;
    Ok((
        GateStatistics {
            from: row.from,
            to: row.to,
            beta,
            transitions,
            censored,
            counts,
        },
        samples,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub beta: f64,
    pub epsilon: f64,
    pub budget_steps: u64,
    pub starts: usize,
    pub hits: usize,
    pub fraction: f64,
    pub interval: (f64, f64),
    /// Hitting steps of the successful starts.
    pub steps: Vec<u64>,
}

/// Uniform random start `i` of a probe.
pub fn random_start(spec: &Arc<ModelSpec>, seed: u64, i: u64) -> SpinConfiguration {
    let mut rng = replica_rng(seed ^ 0x5DEE_CE66_D1CE_5EED, i);
    let spins: Vec<i8> = (0..spec.num_sites())
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    SpinConfiguration::from_spins(spec, &spins).expect("random spins are +-1")
}

/// Fraction of uniform random starts entering the stable and metastable
/// families within `budget` steps.
pub fn recurrence_probe_with_budget(
    spec: &Arc<ModelSpec>,
    beta: f64,
    count: u64,
    epsilon: f64,
    seed: u64,
    budget: u64,
) -> Result<RecurrenceReport> {
    let kernel = Metropolis::new(spec, beta)?;
    let targets = StateSet::new([paths::stable_set(spec)?, paths::metastable_set(spec)?].concat());
    let samples: Vec<HittingTimeSample> = (0..count)
        .into_par_iter()
        .map(|i| {
            run_until_hit(
                &kernel,
                &random_start(spec, seed, i),
                &targets,
                budget,
                None,
                seed,
                i,
            )
        })
        .collect();
    let steps: Vec<u64> = samples
        .iter()
        .filter(|s| !s.censored)
        .map(|s| s.steps)
        .collect();
    let hits = steps.len();
    Ok(RecurrenceReport {
        beta,
        epsilon,
        budget_steps: budget,
        starts: count as usize,
        hits,
        fraction: hits as f64 / count.max(1) as f64,
        interval: stats::wilson_interval(hits, count as usize),
        steps,
    })
}

/// Recurrence probe with the budget `exp(beta (2(alpha - 1) + epsilon))`.
pub fn recurrence_probe(
    spec: &Arc<ModelSpec>,
    beta: f64,
    count: u64,
    epsilon: f64,
    seed: u64,
) -> Result<RecurrenceReport> {
    let budget = (beta * (2.0 * (spec.alpha_f64() - 1.0) + epsilon))
        .exp()
        .floor() as u64;
    recurrence_probe_with_budget(spec, beta, count, epsilon, seed, budget)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub gap: f64,
    pub second_eigenvalue: f64,
    pub beta: f64,
    pub method_residual: f64,
    pub states: usize,
    pub iterations: usize,
}

/// Symmetrized generator `I - D^{1/2} P D^{-1/2}` of the Metropolis chain on
/// a landscape, with `D` the Gibbs weights. Proposals are uniform over the
/// grid sites, so explicit landscapes get self-loops for missing neighbors.
pub struct SymmetricGenerator {
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// Unit vector along the square root of the Gibbs weights.
    root: Vec<f64>,
}

impl SymmetricGenerator {
    pub fn new(land: &Landscape, beta: f64) -> Self {
        let n = land.len();
        let q = 1.0 / land.spec().num_sites() as f64;
        let scale = *land.to_energy(1).denom() as f64;
        let e = |v: usize| land.scaled(v);
        let mut diag = vec![0.0; n];
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for (i, d) in diag.iter_mut().enumerate() {
            for j in land.neighbors(i) {
                let dh = (e(j) - e(i)) as f64 / scale;
                *d += q * (-beta * dh.max(0.0)).exp();
                cols.push(j as u32);
                vals.push(-q * (-beta * dh.abs() / 2.0).exp());
            }
            offsets.push(cols.len());
        }
        let emin = (0..n).map(e).min().unwrap_or(0);
        let mut root: Vec<f64> = (0..n)
            .map(|v| (-beta * (e(v) - emin) as f64 / scale / 2.0).exp())
            .collect();
        let norm = root.iter().map(|x| x * x).sum::<f64>().sqrt();
        root.iter_mut().for_each(|x| *x /= norm);
        SymmetricGenerator {
            diag,
            offsets,
            cols,
            vals,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Entry `(i, j)`, for dense checks.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut v = if i == j { self.diag[i] } else { 0.0 };
        for k in self.offsets[i]..self.offsets[i + 1] {
            if self.cols[k] as usize == j {
                v += self.vals[k];
            }
        }
        v
    }

    pub fn root(&self) -> &[f64] {
        &self.root
    }

    /// `y = (L + shift * r r^T) x`, where `r` spans the kernel of `L`.
    fn apply(&self, x: &[f64], y: &mut [f64], shift: f64) {
        let proj = shift * dot(&self.root, x);
        y.par_iter_mut()
            .enumerate()
            .with_min_len(1024)
            .for_each(|(i, yi)| {
                let mut acc = self.diag[i] * x[i];
                for k in self.offsets[i]..self.offsets[i + 1] {
                    acc += self.vals[k] * x[self.cols[k] as usize];
                }
                *yi = acc + proj * self.root[i];
            });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Number of eigenvalues of the symmetric tridiagonal `(a, b)` below `x`.
fn sturm_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..a.len() {
        let off = if i == 0 { 0.0 } else { b[i - 1] * b[i - 1] };
        d = a[i] - x - off / d;
        if d == 0.0 {
            d = -f64::EPSILON * (a[i].abs() + x.abs() + 1e-300);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by bisection.
fn tridiagonal_min(a: &[f64], b: &[f64]) -> f64 {
    let radius = |i: usize| {
        let l = if i > 0 { b[i - 1].abs() } else { 0.0 };
        let r = if i < b.len() { b[i].abs() } else { 0.0 };
        l + r
    };
    let mut lo = (0..a.len())
        .map(|i| a[i] - radius(i))
        .fold(f64::INFINITY, f64::min);
    let mut hi = (0..a.len())
        .map(|i| a[i] + radius(i))
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(a, b, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `(T - shift I) x = rhs` by Gaussian elimination with partial
/// pivoting; zero pivots are nudged so that near-singular shifts work for
/// inverse iteration.
fn tridiagonal_solve(a: &[f64], b: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = a.len();
    let tiny = f64::EPSILON
        * a.iter()
            .chain(b)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
    let mut d: Vec<f64> = a.iter().map(|v| v - shift).collect();
    let mut du: Vec<f64> = b.to_vec();
    let mut dl: Vec<f64> = b.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut x = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            x[i + 1] -= fact * x[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let t = x[i];
            x[i] = x[i + 1];
            x[i + 1] = t - fact * x[i + 1];
        }
        dl[i] = 0.0;
    }
    if n > 0 && d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        if i + 1 < n {
            v -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= du2[i] * x[i + 2];
        }
        x[i] = v / d[i];
    }
    x
}

/// Eigenvector of a tridiagonal matrix for the eigenvalue `theta`.
fn tridiagonal_vector(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    let n = a.len();
    let mut y = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..3 {
        y = tridiagonal_solve(a, b, theta, &y);
        let s = norm(&y);
        y.iter_mut().for_each(|v| *v /= s);
    }
    y
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub tolerance: f64,
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 60_000,
            tolerance: 1e-11,
            check_every: 25,
        }
    }
}

struct Lanczos<'a> {
    gen: &'a SymmetricGenerator,
    q_prev: Vec<f64>,
    q: Vec<f64>,
    w: Vec<f64>,
    last_beta: f64,
}

const DEFLATION_SHIFT: f64 = 2.0;

impl<'a> Lanczos<'a> {
    fn new(gen: &'a SymmetricGenerator) -> Self {
        let n = gen.len();
        let mut rng = replica_rng(0, 0);
        let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let p = dot(&q, &gen.root);
        q.iter_mut().zip(&gen.root).for_each(|(x, r)| *x -= p * r);
        let s = norm(&q);
        q.iter_mut().for_each(|x| *x /= s);
        Lanczos {
            gen,
            q_prev: vec![0.0; n],
            q,
            w: vec![0.0; n],
            last_beta: 0.0,
        }
    }

    /// Advance one step; returns `(alpha_j, beta_j)` and leaves the current
    /// Lanczos vector in `q` before the update.
    fn advance<F: FnMut(&[f64])>(&mut self, mut visit: F) -> (f64, f64) {
        visit(&self.q);
        self.gen.apply(&self.q, &mut self.w, DEFLATION_SHIFT);
        let a = dot(&self.w, &self.q);
        let lb = self.last_beta;
        self.w
            .iter_mut()
            .zip(self.q.iter().zip(&self.q_prev))
            .for_each(|(w, (q, qp))| *w -= a * q + lb * qp);
        let b = norm(&self.w);
        std::mem::swap(&mut self.q_prev, &mut self.q);
        for (q, w) in self.q.iter_mut().zip(&self.w) {
            *q = w / b;
        }
        self.last_beta = b;
        (a, b)
    }
}

/// Smallest eigenvalue of `L + 2 r r^T` by Lanczos without
/// reorthogonalization; the Ritz vector is rebuilt in a second pass and the
/// true residual is measured.
pub fn smallest_nonzero_eigenvalue(
    gen: &SymmetricGenerator,
    opts: &LanczosOptions,
) -> Result<(f64, f64, usize)> {
    let n = gen.len();
    if n < 2 {
        return Err(ModelError::Range("need at least two states".into()));
    }
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut lz = Lanczos::new(gen);
    let mut prev_theta = f64::INFINITY;
    let mut found = None;
    let limit = opts.max_iter.min(n);
    for j in 0..limit {
        let (a, b) = lz.advance(|_| {});
        alphas.push(a);
        betas.push(b);
        let at_end = j + 1 == limit || b <= f64::EPSILON;
        if (j + 1) % opts.check_every == 0 || at_end {
            let theta = tridiagonal_min(&alphas, &betas[..alphas.len() - 1]);
            let y = tridiagonal_vector(&alphas, &betas[..alphas.len() - 1], theta);
            let estimate = (b * y[y.len() - 1]).abs();
            let stable = (theta - prev_theta).abs() <= 1e-13 * theta.abs().max(1e-300);
            if (estimate < opts.tolerance && stable) || at_end {
                found = Some((theta, y));
                break;
            }
            prev_theta = theta;
        }
    }
    let (theta, y) = found.ok_or_else(|| {
        ModelError::NoConvergence(format!("Lanczos did not settle in {limit} steps"))
    })?;
    let mut x = vec![0.0; n];
    let mut lz = Lanczos::new(gen);
    for &yj in &y {
        lz.advance(|q| x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += yj * qi));
    }
    let s = norm(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let (mut rayleigh, mut residual) = rayleigh_residual(gen, &x);
    for _ in 0..20 {
        if residual <= opts.tolerance {
            break;
        }
        x = refine(gen, &x, 24);
        (rayleigh, residual) = rayleigh_residual(gen, &x);
    }
    if residual > opts.tolerance * 10.0 {
        return Err(ModelError::NoConvergence(format!(
            "eigenvector residual {residual:e} (Ritz value {theta:e}) after {} steps",
            y.len()
        )));
    }
    Ok((rayleigh, residual, y.len()))
}

fn rayleigh_residual(gen: &SymmetricGenerator, x: &[f64]) -> (f64, f64) {
    let mut ax = vec![0.0; x.len()];
    gen.apply(x, &mut ax, DEFLATION_SHIFT);
    let rayleigh = dot(x, &ax);
    let residual = ax
        .iter()
        .zip(x)
        .map(|(a, v)| (a - rayleigh * v).powi(2))
        .sum::<f64>()
        .sqrt();
    (rayleigh, residual)
}

/// One restart of a short fully reorthogonalized Lanczos run from `x`;
/// returns the new lowest Ritz vector.
fn refine(gen: &SymmetricGenerator, x: &[f64], steps: usize) -> Vec<f64> {
    let n = x.len();
    let mut basis: Vec<Vec<f64>> = vec![x.to_vec()];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut w = vec![0.0; n];
    for j in 0..steps.min(n) {
        gen.apply(&basis[j], &mut w, DEFLATION_SHIFT);
        a.push(dot(&w, &basis[j]));
        for _ in 0..2 {
            for q in &basis {
                let p = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= p * qi);
            }
        }
        let nb = norm(&w);
        if nb <= 1e-14 || j + 1 == steps.min(n) {
            break;
        }
        b.push(nb);
        basis.push(w.iter().map(|v| v / nb).collect());
    }
    let theta = tridiagonal_min(&a, &b);
    let y = tridiagonal_vector(&a, &b, theta);
    let mut out = vec![0.0; n];
    for (q, yj) in basis.iter().zip(&y) {
        out.iter_mut().zip(q).for_each(|(o, qi)| *o += yj * qi);
    }
    let s = norm(&out);
    out.iter_mut().for_each(|v| *v /= s);
    out
}

pub fn spectral_gap_landscape(
    land: &Landscape,
    beta: f64,
    opts: &LanczosOptions,
) -> Result<SpectralReport> {
    let gen = SymmetricGenerator::new(land, beta);
    let (gap, residual, iterations) = smallest_nonzero_eigenvalue(&gen, opts)?;
    Ok(SpectralReport {
        gap,
        second_eigenvalue: 1.0 - gap,
        beta,
        method_residual: residual,
        states: land.len(),
        iterations,
    })
}

/// Spectral gap `1 - a2` of the Metropolis chain on the full state space.
pub fn spectral_gap(spec: &Arc<ModelSpec>, beta: f64) -> Result<SpectralReport> {
    if !(beta >= 0.0) {
        return Err(ModelError::Range(format!("beta must be >= 0, got {beta}")));
    }
    let land = Landscape::enumerate_with_guard(spec, landscape::DEFAULT_SITE_GUARD)?;
    spectral_gap_landscape(&land, beta, &LanczosOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::sigma_a_family;
    use num_rational::Rational64;

    fn e1_small() -> Arc<ModelSpec> {
        Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap())
    }

    fn toy(alpha: Rational64) -> Arc<ModelSpec> {
        Arc::new(ModelSpec::relaxed(4, 1, 1, 1, alpha).unwrap())
    }

    #[test]
    fn acceptance_table() {
        let spec = e1_small();
        let k = Metropolis::new(&spec, 0.5).unwrap();
        // A plus in B surrounded by minuses costs nothing to remove.
        let b_site = 4;
        let c = SpinConfiguration::from_plus_sites(&spec, [b_site]);
        assert_eq!(c.delta_h(b_site), Rational64::from_integer(-10));
        assert_eq!(k.acceptance(&c, b_site), 1.0);
        // The reverse move costs 10.
        let minus = SpinConfiguration::all_minus(&spec);
        assert_eq!(minus.delta_h(b_site), Rational64::from_integer(10));
        approx::assert_relative_eq!(
            k.acceptance(&minus, b_site),
            (-5.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn detailed_balance_exact() {
        let spec = Arc::new(ModelSpec::relaxed(6, 1, 3, 1, Rational64::new(5, 2)).unwrap());
        let mut rng = replica_rng(7, 0);
        for _ in 0..2000 {
            let c = random_start(&spec, rng.random(), 0);
            let i = rng.random_range(0..spec.num_sites());
            let d = c.flipped(i);
            // log(mu(x) P(x, y)) up to the common constant is -max(H(x), H(y)).
            let zero = Rational64::from_integer(0);
            let fwd = -c.energy() - (d.energy() - c.energy()).max(zero);
            let bwd = -d.energy() - (c.energy() - d.energy()).max(zero);
            assert_eq!(fwd, bwd);
            assert_eq!(d.energy() - c.energy(), c.delta_h(i));
        }
    }

    #[test]
    fn chain_tracks_energy_and_is_deterministic() {
        let spec = e1_small();
        let k = Metropolis::new(&spec, 0.4).unwrap();
        let start = random_start(&spec, 3, 0);
        let run = |seed| {
            let mut st = k.chain(&start, seed, 5);
            for _ in 0..20_000 {
                k.step(&mut st);
            }
            st
        };
        let (a, b, c) = (run(11), run(11), run(12));
        assert_eq!(a.words(), b.words());
        assert_eq!(a.scaled_energy(), b.scaled_energy());
        assert_ne!(a.words(), c.words());
        let conf = a.config(&spec);
        assert_eq!(scaled_energy(&conf), a.scaled_energy());
        assert_eq!(conf.energy(), conf.hamiltonian_direct());
    }

    #[test]
    fn start_in_target_hits_at_zero() {
        let spec = e1_small();
        let k = Metropolis::new(&spec, 1.0).unwrap();
        let fam = sigma_a_family(&spec);
        let s = run_until_hit(&k, &fam[2], &StateSet::new(fam.clone()), 100, None, 0, 0);
        assert_eq!((s.steps, s.censored, s.target_hit), (0, false, Some(2)));
    }

    #[test]
    fn censoring_is_reported() {
        let spec = e1_small();
        let k = Metropolis::new(&spec, 3.0).unwrap();
        let targets = StateSet::new(sigma_a_family(&spec));
        let s = run_until_hit(
            &k,
            &SpinConfiguration::all_minus(&spec),
            &targets,
            1000,
            None,
            0,
            0,
        );
        assert!(s.censored);
        assert_eq!(s.steps, 1000);
        assert!(s.target_hit.is_none());
    }

    #[test]
    fn free_walk_hits_quickly() {
        let spec = toy(Rational64::from_integer(1));
        let k = Metropolis::new(&spec, 0.0).unwrap();
        let target = StateSet::new(vec![SpinConfiguration::all_plus(&spec)]);
        let samples = hitting_times(
            &k,
            &SpinConfiguration::all_minus(&spec),
            &target,
            10_000_000,
            None,
            1,
            64,
        );
        assert!(samples.iter().all(|s| !s.censored));
        let mean = stats::mean(&samples.iter().map(|s| s.steps as f64).collect::<Vec<_>>());
        // Reaching the antipode of the 16-cube takes about 2^16 flips.
        assert!(mean > 2.0e4 && mean < 3.0e5, "{mean}");
    }

    #[test]
    fn stationary_energy_histogram() {
        let spec = toy(Rational64::from_integer(1));
        let beta = 0.3;
        let land = Landscape::enumerate(&spec).unwrap();
        let mut exact: BTreeMap<i64, f64> = BTreeMap::new();
        for v in 0..land.len() {
            *exact.entry(land.scaled(v)).or_default() += (-beta * land.scaled(v) as f64).exp();
        }
        let z: f64 = exact.values().sum();
        let k = Metropolis::new(&spec, beta).unwrap();
        let mut st = k.chain(&SpinConfiguration::all_minus(&spec), 42, 0);
        let mut seen: BTreeMap<i64, f64> = BTreeMap::new();
        let total = 2_000_000;
        for _ in 0..total {
            k.step(&mut st);
            *seen.entry(st.scaled_energy()).or_default() += 1.0;
        }
        let tv: f64 = exact
            .iter()
            .map(|(e, w)| (w / z - seen.get(e).copied().unwrap_or(0.0) / total as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn exponential_law_rejects_short_input() {
        assert!(matches!(
            exponential_law_test(&[1, 2, 3], 0.1),
            Err(ModelError::Insufficient(_))
        ));
        let mut rng = replica_rng(9, 0);
        let xs: Vec<u64> = (0..500)
            .map(|_| (-(1.0 - rng.random::<f64>()).ln() * 1e6) as u64)
            .collect();
        assert!(exponential_law_test(&xs, 0.08).unwrap().pass);
        let us: Vec<u64> = (0..500).map(|_| rng.random_range(0..1_000_000)).collect();
        assert!(!exponential_law_test(&us, 0.08).unwrap().pass);
    }

    #[test]
    fn tridiagonal_helpers() {
        // Path graph Laplacian 2 - 2 cos(pi j / (n + 1)).
        let n = 40;
        let a = vec![2.0; n];
        let b = vec![-1.0; n - 1];
        let lo = tridiagonal_min(&a, &b);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        approx::assert_relative_eq!(lo, exact, max_relative = 1e-10);
        let y = tridiagonal_vector(&a, &b, lo);
        let r: f64 = (0..n)
            .map(|i| {
                let mut v = a[i] * y[i] - lo * y[i];
                if i > 0 {
                    v += b[i - 1] * y[i - 1];
                }
                if i + 1 < n {
                    v += b[i] * y[i + 1];
                }
                v * v
            })
            .sum::<f64>()
            .sqrt();
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn free_walk_gap() {
        // At beta = 0 the chain is the walk on the 16-cube with rate 1/16 per
        // coordinate; its gap is 2/16.
        let spec = toy(Rational64::from_integer(1));
        let r = spectral_gap(&spec, 0.0).unwrap();
        approx::assert_relative_eq!(r.gap, 0.125, max_relative = 1e-9);
        assert!(r.method_residual < 1e-10);
    }

    #[test]
    fn lanczos_matches_dense_oracle() {
        // Chain on the toy where only the first ten sites may flip.
        let spec = toy(Rational64::new(3, 2));
        let configs: Vec<_> = (0..1u64 << 10)
            .map(|b| SpinConfiguration::from_bits(&spec, b))
            .collect();
        let land = Landscape::from_configs(&spec, configs);
        for beta in [0.0, 1.0, 2.5] {
            let gen = SymmetricGenerator::new(&land, beta);
            let n = gen.len();
            let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| gen.entry(i, j));
            let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(dense)
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(eig[0].abs() < 1e-12);
            let r = spectral_gap_landscape(&land, beta, &LanczosOptions::default()).unwrap();
            assert!(
                (r.gap - eig[1]).abs() < 1e-8,
                "beta {beta}: {} vs {}",
                r.gap,
                eig[1]
            );
            assert!(r.method_residual < 1e-10);
            assert!(r.gap > 0.0 && r.gap < 2.0);
        }
    }

    #[test]
    fn spectral_gap_guard() {
        assert!(matches!(
            spectral_gap(&e1_small(), 1.0),
            Err(ModelError::Guard(_))
        ));
    }
}
