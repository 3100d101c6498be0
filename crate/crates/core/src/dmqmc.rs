//! Density-matrix quantum Monte Carlo for the unnormalized thermal state.
//!
//! Signed walkers ("psips") on matrix elements `|m><n|` unravel the
//! symmetric Bloch equation `d rho / d beta = -(H rho + rho H) / 2`,
//! starting from the identity at `beta = 0`. Because the target is real
//! symmetric, psips on `(m, n)` and `(n, m)` are pooled: the population
//! stores `m <= n` only, and a stored off-diagonal count is the sum of the
//! two mirrored counts.
//!
//! One step of length `db`, for every psip on `(i, j)`:
//!
//! - spawn onto `(i', j)` with probability `db/2 |H_i'i|` and onto `(i, j')`
//!   with probability `db/2 |H_jj'|`, with sign `-sign(parent) sign(H)`;
//! - die (`p_d > 0`) or clone (`p_d < 0`) with probability `|p_d|`,
//!   `p_d = db/2 (H_ii + H_jj - 2 S)`;
//! - after all spawns, opposite signs on one element annihilate.
//!
//! Every stored element draws from its own generator, seeded from
//! `(seed, loop, step, element)`, so trajectories do not depend on the
//! thread count.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{pair_key, unpack_key, DensityMatrix, Entry, Source};
use crate::error::{Error, Result};
use crate::model::{hamiltonian_operator, Basis, ModelParams, PauliSumOperator};

/// Stability bound on `delta_beta * max_row_sum(|H|)`.
pub const STABILITY_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmqmcConfig {
    pub n_psip: u64,
    pub n_loops: usize,
    pub delta_beta: f64,
    pub seed: u64,
    /// Total psip count above which the shift starts to act.
    pub population_ceiling: Option<u64>,
    /// Damping of the shift update.
    pub shift_damping: f64,
}

impl Default for DmqmcConfig {
    fn default() -> Self {
        DmqmcConfig {
            n_psip: 100_000,
            n_loops: 10,
            delta_beta: 0.01,
            seed: 0,
            population_ceiling: None,
            shift_damping: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsipPopulation {
    pub l: usize,
    pub basis: Basis,
    /// `(pair key, signed count)` sorted by key, no zero counts.
    pub counts: Vec<(u64, i64)>,
    pub steps: u64,
    pub delta_beta: f64,
    pub shift: f64,
    pub seed: u64,
    pub loop_index: u64,
    shift_active: bool,
}

impl PsipPopulation {
    pub fn beta_current(&self) -> f64 {
        self.steps as f64 * self.delta_beta
    }

    pub fn total_psips(&self) -> u64 {
        self.counts.iter().map(|(_, c)| c.unsigned_abs()).sum()
    }

    /// `chi_diag = sum_m chi_mm`.
    pub fn diag_total(&self) -> i64 {
        self.counts
            .iter()
            .filter(|(k, _)| {
                let (m, n) = unpack_key(*k);
                m == n
            })
            .map(|(_, c)| c)
            .sum()
    }

    pub fn get(&self, m: u32, n: u32) -> i64 {
        let key = pair_key(m, n);
        self.counts
            .binary_search_by_key(&key, |e| e.0)
            .map_or(0, |i| self.counts[i].1)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn stream_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Places `n_psip` positive psips on the diagonal as evenly as possible;
/// the remainder goes to distinct diagonals drawn from `seed`.
pub fn init_population(l: usize, n_psip: i64, basis: Basis, seed: u64) -> Result<PsipPopulation> {
    init_population_for_loop(l, n_psip, basis, seed, 0)
}

fn init_population_for_loop(l: usize, n_psip: i64, basis: Basis, seed: u64, loop_index: u64) -> Result<PsipPopulation> {
    if n_psip <= 0 {
        return Err(Error::Domain(format!("N_psip must be positive, got {n_psip}")));
    }
    ModelParams::new(l, 1.0, 0.0, 0.0, 0.0, basis)?;
    let dim = 1u64 << l;
    let n = n_psip as u64;
    if n < dim {
        log::warn!("N_psip = {n} is below the {dim} diagonal elements; some start empty");
    }
    let base = n / dim;
    let rem = (n % dim) as usize;
    let mut counts: Vec<i64> = vec![base as i64; dim as usize];
    let mut rng = Pcg64Mcg::seed_from_u64(stream_seed(&[seed, loop_index, u64::MAX]));
    for i in index::sample(&mut rng, dim as usize, rem) {
        counts[i] += 1;
    }
    let counts = counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c != 0)
        .map(|(i, c)| (pair_key(i as u32, i as u32), c))
        .collect();
    Ok(PsipPopulation {
        l,
        basis,
        counts,
        steps: 0,
        delta_beta: 0.0,
        shift: 0.0,
        seed,
        loop_index,
        shift_active: false,
    })
}

/// Off-diagonal connections with equal `|H|`, sampled together.
struct SpawnGroup {
    p: f64,
    members: Vec<(u64, i64)>,
}

struct Propagator {
    op: PauliSumOperator,
    groups: Vec<SpawnGroup>,
}

impl Propagator {
    fn new(h0: &ModelParams, delta_beta: f64) -> Result<Self> {
        let op = hamiltonian_operator(h0);
        let bound = op.max_abs_row_sum();
        if delta_beta < 0.0 || !delta_beta.is_finite() {
            return Err(Error::Config(format!("delta_beta must be finite and >= 0, got {delta_beta}")));
        }
        if delta_beta * bound >= STABILITY_LIMIT {
            return Err(Error::Config(format!(
                "delta_beta = {delta_beta} violates the stability guard; use delta_beta < {:.6e}",
                STABILITY_LIMIT / bound
            )));
        }
        let mut groups: Vec<SpawnGroup> = Vec::new();
        for &(mask, c) in op.flips() {
            let p = 0.5 * delta_beta * c.abs();
            let sign = if c > 0.0 { 1 } else { -1 };
            match groups.iter_mut().find(|g| g.p == p) {
                Some(g) => g.members.push((mask, sign)),
                None => groups.push(SpawnGroup { p, members: vec![(mask, sign)] }),
            }
        }
        groups.retain(|g| g.p > 0.0);
        Ok(Propagator { op, groups })
    }
}

fn binomial(rng: &mut Pcg64Mcg, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
    }
}

/// Number of events when each of `n` psips triggers `floor(q) + Bernoulli(frac q)`.
fn event_count(rng: &mut Pcg64Mcg, n: u64, q: f64) -> u64 {
    let whole = q.floor();
    n * whole as u64 + binomial(rng, n, q - whole)
}

fn step_element(
    prop: &Propagator,
    key: u64,
    count: i64,
    delta_beta: f64,
    shift: f64,
    rng: &mut Pcg64Mcg,
    out: &mut Vec<(u64, i64)>,
) {
    let (i, j) = unpack_key(key);
    let n = count.unsigned_abs();
    let sigma = count.signum();
    for (side, row) in [(0, i), (1, j)] {
        let other = if side == 0 { j } else { i };
        for g in &prop.groups {
            let size = g.members.len() as u64;
            let k = binomial(rng, n * size, g.p);
            if k == 0 {
                continue;
            }
            for slot in index::sample(rng, (n * size) as usize, k as usize) {
                let (mask, s) = g.members[slot % size as usize];
                let target = row ^ mask as u32;
                out.push((pair_key(target, other), -sigma * s));
            }
        }
    }
    let p_d = 0.5 * delta_beta * (prop.op.diagonal(i as usize) + prop.op.diagonal(j as usize) - 2.0 * shift);
    let events = event_count(rng, n, p_d.abs()) as i64;
    let new_count = if p_d > 0.0 { count - sigma * events } else { count + sigma * events };
    if new_count != 0 {
        out.push((key, new_count));
    }
}

fn annihilate(mut events: Vec<(u64, i64)>) -> Vec<(u64, i64)> {
    events.par_sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(u64, i64)> = Vec::with_capacity(events.len());
    for (k, c) in events {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += c,
            _ => out.push((k, c)),
        }
    }
    out.retain(|e| e.1 != 0);
    out
}

fn step_with(pop: &mut PsipPopulation, prop: &Propagator, delta_beta: f64) {
    let step = pop.steps;
    let (seed, loop_index, shift) = (pop.seed, pop.loop_index, pop.shift);
    let chunks: Vec<Vec<(u64, i64)>> = pop
        .counts
        .par_chunks(2048)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * 2);
            for &(key, count) in chunk {
                let mut rng = Pcg64Mcg::seed_from_u64(stream_seed(&[seed, loop_index, step, key]));
                step_element(prop, key, count, delta_beta, shift, &mut rng, &mut out);
            }
            out
        })
        .collect();
    pop.counts = annihilate(chunks.concat());
    pop.steps += 1;
    pop.delta_beta = delta_beta;
}

/// One imaginary-time step of length `delta_beta` under `h0` (shift held).
pub fn step(pop: &PsipPopulation, h0: &ModelParams, delta_beta: f64) -> Result<PsipPopulation> {
    if h0.l != pop.l || h0.basis != pop.basis {
        return Err(Error::Contract("population and Hamiltonian must share L and basis".into()));
    }
    let prop = Propagator::new(h0, delta_beta)?;
    let mut next = pop.clone();
    step_with(&mut next, &prop, delta_beta);
    Ok(next)
}

/// Pooled element statistics over all retained loops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementStats {
    pub m: u32,
    pub n: u32,
    /// Sum over loops of the signed (folded) count.
    pub chi: i64,
    /// Sum over loops of the psip number `|chi|`.
    pub psips: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleStats {
    pub l: usize,
    pub basis: Basis,
    pub beta: f64,
    pub config: DmqmcConfig,
    pub loops_used: usize,
    /// `sum_m chi_mm`, pooled over loops.
    pub chi_diag: i64,
    /// Sorted by `(m, n)`.
    pub elements: Vec<ElementStats>,
}

impl SampleStats {
    pub fn get(&self, m: u32, n: u32) -> Option<&ElementStats> {
        let key = pair_key(m, n);
        self.elements
            .binary_search_by_key(&key, |e| pair_key(e.m, e.n))
            .ok()
            .map(|i| &self.elements[i])
    }
}

/// Runs `n_loops` independent sweeps from `beta = 0` to `beta_target`.
pub fn sample(
    h0: &ModelParams,
    beta_target: f64,
    n_psip: u64,
    n_loops: usize,
    delta_beta: f64,
    seed: u64,
) -> Result<(DensityMatrix, SampleStats)> {
    let config = DmqmcConfig { n_psip, n_loops, delta_beta, seed, ..DmqmcConfig::default() };
    sample_with(h0, beta_target, &config)
}

/// Number of steps `beta / delta_beta`, which must be an integer.
pub fn step_count(beta: f64, delta_beta: f64) -> Result<u64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(0);
    }
    if !(delta_beta > 0.0) {
        return Err(Error::Config(format!("delta_beta must be positive, got {delta_beta}")));
    }
    let steps = (beta / delta_beta).round();
    if (steps * delta_beta - beta).abs() > 1e-9 * beta.max(1.0) {
        return Err(Error::Config(format!(
            "beta = {beta} is not an integer multiple of delta_beta = {delta_beta}"
        )));
    }
    Ok(steps as u64)
}

fn run_loop(h0: &ModelParams, prop: &Propagator, steps: u64, config: &DmqmcConfig, loop_index: u64) -> Result<PsipPopulation> {
    let mut pop = init_population_for_loop(h0.l, config.n_psip as i64, h0.basis, config.seed, loop_index)?;
    let mut previous = pop.total_psips();
    for _ in 0..steps {
        step_with(&mut pop, prop, config.delta_beta);
        let total = pop.total_psips();
        if total == 0 {
            break;
        }
        if let Some(ceiling) = config.population_ceiling {
            pop.shift_active |= total > ceiling;
        }
        if pop.shift_active {
            pop.shift -= config.shift_damping / config.delta_beta * (total as f64 / previous as f64).ln();
        }
        previous = total;
    }
    Ok(pop)
}

pub fn sample_with(h0: &ModelParams, beta_target: f64, config: &DmqmcConfig) -> Result<(DensityMatrix, SampleStats)> {
    h0.validate()?;
    if config.n_loops == 0 {
        return Err(Error::Config("N_loops must be at least 1".into()));
    }
    if config.n_psip == 0 {
        return Err(Error::Domain("N_psip must be positive".into()));
    }
    let steps = step_count(beta_target, config.delta_beta)?;
    let prop = Propagator::new(h0, if steps == 0 { 0.0 } else { config.delta_beta })?;
    let loops: Vec<Result<PsipPopulation>> = (0..config.n_loops as u64)
        .into_par_iter()
        .map(|k| run_loop(h0, &prop, steps, config, k))
        .collect();
    let mut pooled: HashMap<u64, (i64, u64)> = HashMap::new();
    let mut chi_diag = 0i64;
    let mut loops_used = 0;
    for (k, pop) in loops.into_iter().enumerate() {
        let pop = pop?;
        let d = pop.diag_total();
        if d == 0 {
            log::warn!("loop {k} ended with an empty diagonal and is discarded");
            continue;
        }
        loops_used += 1;
        chi_diag += d;
        for (key, c) in pop.counts {
            let e = pooled.entry(key).or_insert((0, 0));
            e.0 += c;
            e.1 += c.unsigned_abs();
        }
    }
    if loops_used == 0 || chi_diag == 0 {
        return Err(Error::Sampling("every loop ended with a vanishing diagonal population".into()));
    }
    let mut elements: Vec<ElementStats> = pooled
        .into_iter()
        .map(|(key, (chi, psips))| {
            let (m, n) = unpack_key(key);
            ElementStats { m, n, chi, psips }
        })
        .collect();
    elements.sort_unstable_by_key(|e| pair_key(e.m, e.n));
    let entries = elements
        .iter()
        .filter(|e| e.chi != 0)
        .map(|e| {
            let denom = if e.m == e.n { chi_diag as f64 } else { 2.0 * chi_diag as f64 };
            Entry { m: e.m, n: e.n, value: e.chi as f64 / denom }
        })
        .collect();
    let rho = DensityMatrix::from_entries(h0.l, h0.basis, Source::Dmqmc, entries)?;
    let stats = SampleStats {
        l: h0.l,
        basis: h0.basis,
        beta: beta_target,
        config: *config,
        loops_used,
        chi_diag,
        elements,
    };
    Ok((rho, stats))
}

/// Poisson error `Delta rho_mn` for every pair of `index_set` (stored
/// `m <= n`), normalized over the diagonal of the same set.
///
/// Off-diagonal estimates divide the folded count by `2 chi_diag`, so their
/// error carries the same factor 1/2.
pub fn element_error(stats: &SampleStats, index_set: &[(u32, u32)]) -> Result<HashMap<u64, f64>> {
    let mut chi_w = 0i64;
    let mut n_w = 0u64;
    for &(m, n) in index_set {
        if m == n {
            if let Some(e) = stats.get(m, n) {
                chi_w += e.chi;
                n_w += e.psips;
            }
        }
    }
    if chi_w == 0 {
        return Err(Error::UndefinedNormalization(
            "the index set carries no net diagonal psips".into(),
        ));
    }
    let chi_d = chi_w as f64;
    let n_d = n_w as f64;
    let mut out = HashMap::with_capacity(index_set.len());
    for &(m, n) in index_set {
        let (psips, chi) = stats.get(m, n).map_or((0.0, 0.0), |e| (e.psips as f64, e.chi as f64));
        let delta = if psips == 0.0 {
            0.0
        } else if m == n {
            let inner = 1.0 - 2.0 * chi / chi_d + psips * n_d / (chi_d * chi_d);
            psips.sqrt() / chi_d.abs() * inner.max(0.0).sqrt()
        } else {
            0.5 * psips.sqrt() / chi_d.abs() * (1.0 + psips * n_d / (chi_d * chi_d)).sqrt()
        };
        out.insert(pair_key(m, n), delta);
    }
    Ok(out)
}

#[derive(Serialize)]
struct Header<'a> {
    #[serde(rename = "L")]
    l: usize,
    basis: Basis,
    beta: f64,
    #[serde(rename = "N_psip")]
    n_psip: u64,
    #[serde(rename = "N_loops")]
    n_loops: usize,
    delta_beta: f64,
    seed: u64,
    chi_diag: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    loops_used: Option<&'a usize>,
}

#[derive(Serialize)]
struct Record {
    m: u32,
    n: u32,
    chi: i64,
    #[serde(rename = "N")]
    psips: u64,
    #[serde(rename = "Delta")]
    delta: f64,
}

/// JSON-lines artifact: a header line, then one line per sampled element.
pub fn write_jsonl<W: Write>(stats: &SampleStats, mut out: W) -> Result<()> {
    let all: Vec<(u32, u32)> = stats.elements.iter().map(|e| (e.m, e.n)).collect();
    let errors = element_error(stats, &all)?;
    let header = Header {
        l: stats.l,
        basis: stats.basis,
        beta: stats.beta,
        n_psip: stats.config.n_psip,
        n_loops: stats.config.n_loops,
        delta_beta: stats.config.delta_beta,
        seed: stats.config.seed,
        chi_diag: stats.chi_diag,
        loops_used: Some(&stats.loops_used),
    };
    serde_json::to_writer(&mut out, &header)?;
    writeln!(out)?;
    for e in &stats.elements {
        let rec = Record { m: e.m, n: e.n, chi: e.chi, psips: e.psips, delta: errors[&pair_key(e.m, e.n)] };
        serde_json::to_writer(&mut out, &rec)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_params() -> ModelParams {
        ModelParams::new(2, 1.0, 0.0, 0.0, 0.5, Basis::Z).unwrap()
    }

    #[test]
    fn initial_populations() {
        let p = init_population(2, 4, Basis::Z, 1).unwrap();
        assert_eq!(p.counts.len(), 4);
        assert!(p.counts.iter().all(|&(k, c)| c == 1 && unpack_key(k).0 == unpack_key(k).1));
        let p = init_population(2, 6, Basis::Z, 1).unwrap();
        assert_eq!(p.total_psips(), 6);
        assert_eq!(p.counts.iter().filter(|e| e.1 == 2).count(), 2);
        assert_eq!(p.beta_current(), 0.0);
        assert!(init_population(2, 0, Basis::Z, 1).is_err());
    }

    #[test]
    fn zero_step_is_identity() {
        let p = init_population(2, 1000, Basis::Z, 3).unwrap();
        let next = step(&p, &oracle_params(), 0.0).unwrap();
        assert_eq!(next.counts, p.counts);
    }

    #[test]
    fn diagonal_hamiltonian_does_not_spawn() {
        let p = init_population(2, 4000, Basis::Z, 3).unwrap();
        let next = step(&p, &oracle_params(), 0.05).unwrap();
        assert!(next.counts.iter().all(|&(k, _)| unpack_key(k).0 == unpack_key(k).1));
        // |01> has H_ii + H_jj = -6 and clones.
        assert!(next.get(2, 2) >= 1000);
        assert!(next.get(0, 0) <= 1000);
    }

    #[test]
    fn stability_guard() {
        let p = init_population(4, 100, Basis::Z, 0).unwrap();
        let h = ModelParams::initial(4, 1.0, 0.0).unwrap();
        match step(&p, &h, 1.0) {
            Err(Error::Config(msg)) => assert!(msg.contains("delta_beta <")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infinite_temperature_sample() {
        let h = ModelParams::initial(4, 1.0, 0.0).unwrap();
        let (rho, stats) = sample(&h, 0.0, 1600, 3, 0.01, 9).unwrap();
        for e in rho.entries() {
            assert!(e.is_diagonal());
            assert!((e.value - 1.0 / 16.0).abs() < 1e-15);
        }
        assert_eq!(stats.chi_diag, 4800);
    }

    #[test]
    fn deterministic_and_symmetric() {
        let h = ModelParams::initial(4, 1.0, 0.0).unwrap();
        let a = sample(&h, 0.2, 20_000, 2, 0.01, 42).unwrap();
        let b = sample(&h, 0.2, 20_000, 2, 0.01, 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.0.get(3, 5), a.0.get(5, 3));
        let c = sample(&h, 0.2, 20_000, 2, 0.01, 43).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn beta_must_be_a_step_multiple() {
        let h = ModelParams::initial(4, 1.0, 0.0).unwrap();
        assert!(matches!(sample(&h, 0.105, 100, 1, 0.01, 0), Err(Error::Config(_))));
    }

    #[test]
    fn error_formula_examples() {
        let stats = SampleStats {
            l: 2,
            basis: Basis::Z,
            beta: 0.0,
            config: DmqmcConfig::default(),
            loops_used: 1,
            chi_diag: 1,
            elements: vec![ElementStats { m: 1, n: 1, chi: 1, psips: 1 }],
        };
        let e = element_error(&stats, &[(1, 1), (0, 2)]).unwrap();
        assert_eq!(e[&pair_key(1, 1)], 0.0);
        assert_eq!(e[&pair_key(0, 2)], 0.0);
        assert!(matches!(element_error(&stats, &[(0, 2)]), Err(Error::UndefinedNormalization(_))));
    }

    #[test]
    fn jsonl_layout() {
        let h = ModelParams::initial(2, 1.0, 0.0).unwrap();
        let (_, stats) = sample(&h, 0.1, 400, 2, 0.01, 5).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&stats, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(header["L"], 2);
        assert_eq!(header["N_loops"], 2);
        assert_eq!(header["chi_diag"], stats.chi_diag);
        let rec: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert!(rec.get("Delta").is_some() && rec.get("N").is_some());
        assert_eq!(lines.count() + 1, stats.elements.len());
    }
}
