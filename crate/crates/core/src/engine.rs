//! Level-by-level simulation of the branching random walk.
//!
//! A tree is streamed one [`Generation`] at a time: only the current flat
//! array of positions `S(u)` is kept, plus per-level scalar summaries.
//! Randomness is addressed, not sequential: the offspring of parent `i` at
//! level `n` of the tree with key `T` are drawn from `T.derive(n).derive(i)`,
//! so splitting a generation across workers cannot change the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{CovQuery, MomentSet};
use crate::model::OffspringModel;
use crate::rng::StreamKey;
use crate::sum::NeumaierSum;

pub const DEFAULT_POPULATION_CAP: usize = 50_000_000;
const PARALLEL_THRESHOLD: usize = 1 << 14;
const PARALLEL_CHUNK: usize = 1 << 12;

/// Positions of all individuals of one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    level: u32,
    positions: Vec<f64>,
}

impl Generation {
    /// The single ancestor at the origin.
    pub fn ancestor() -> Self {
        Generation { level: 0, positions: vec![0.0] }
    }

    pub fn from_positions(level: u32, positions: Vec<f64>) -> Self {
        Generation { level, positions }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_extinct(&self) -> bool {
        self.positions.is_empty()
    }

    /// `sup_u Y_u = exp(-min S(u))`, zero when extinct.
    pub fn sup_weight(&self) -> f64 {
        self.positions.iter().copied().fold(f64::INFINITY, f64::min).neg_exp_or_zero()
    }

    /// `Σ_u Y_u^2 / m2^n`, i.e. `W_n(2)`, computed with the log shift.
    pub fn squared_weight_ratio(&self, log_m2: f64) -> f64 {
        martingale_log(self, 2.0, log_m2)
    }
}

trait NegExp {
    fn neg_exp_or_zero(self) -> f64;
}

impl NegExp for f64 {
    fn neg_exp_or_zero(self) -> f64 {
        if self == f64::INFINITY {
            0.0
        } else {
            (-self).exp()
        }
    }
}

/// One step: every individual reproduces independently.
pub fn advance(g: &Generation, model: &OffspringModel, tree: StreamKey, cap: usize) -> Result<Generation> {
    let mut out = Vec::new();
    advance_into(g, model, tree, cap, &mut out)?;
    Ok(Generation { level: g.level + 1, positions: out })
}

fn spawn(
    parents: &[f64],
    first: usize,
    model: &OffspringModel,
    level_key: StreamKey,
    out: &mut Vec<f64>,
    cap: usize,
) -> bool {
    let mut scratch = Vec::with_capacity(8);
    for (i, &p) in parents.iter().enumerate() {
        let mut rng = level_key.derive((first + i) as u64).rng();
        scratch.clear();
        model.sample_offspring(&mut rng, &mut scratch);
        out.extend(scratch.iter().map(|x| p + x));
        if out.len() > cap {
            return false;
        }
    }
    true
}

fn advance_into(
    g: &Generation,
    model: &OffspringModel,
    tree: StreamKey,
    cap: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    let level_key = tree.derive(u64::from(g.level));
    let over = |count| Error::PopulationCapExceeded { level: g.level + 1, count, cap };
    if g.positions.len() < PARALLEL_THRESHOLD {
        if !spawn(&g.positions, 0, model, level_key, out, cap) {
            return Err(over(out.len()));
        }
        return Ok(());
    }
    let parts: Vec<(bool, Vec<f64>)> = g
        .positions
        .par_chunks(PARALLEL_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut part = Vec::with_capacity(chunk.len() * 2);
            let ok = spawn(chunk, c * PARALLEL_CHUNK, model, level_key, &mut part, cap);
            (ok, part)
        })
        .collect();
    let total: usize = parts.iter().map(|(_, p)| p.len()).sum();
    if total > cap || parts.iter().any(|(ok, _)| !ok) {
        return Err(over(total));
    }
    out.reserve(total);
    for (_, p) in parts {
        out.extend_from_slice(&p);
    }
    Ok(())
}

// n·log m(θ), with level 0 exempt so that a model with m(θ) = 0 still has W_0 = 1
fn level_shift(level: u32, log_m: f64) -> f64 {
    if level == 0 {
        0.0
    } else {
        f64::from(level) * log_m
    }
}

fn martingale_log(g: &Generation, theta: f64, log_m_theta: f64) -> f64 {
    let shift = level_shift(g.level, log_m_theta);
    let mut acc = NeumaierSum::new();
    for &s in &g.positions {
        acc += (-theta * s - shift).exp();
    }
    acc.value()
}

/// `W_n(θ) = m(θ)^{-n} Σ_u e^{-θ S(u)}`, summed as `Σ exp(-θS(u) - n log m(θ))`.
pub fn martingale(g: &Generation, theta: f64, m_theta: f64) -> f64 {
    assert!(m_theta > 0.0 && m_theta.is_finite(), "m(θ) must be in (0, ∞)");
    martingale_log(g, theta, m_theta.ln())
}

/// Per-level summary of one tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: u32,
    pub w1: f64,
    pub w2: f64,
    pub pop: u64,
    pub sup_weight: f64,
}

/// Per-level martingale values of one simulated tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Raw stream key the tree was grown from.
    pub seed: u64,
    pub survived: bool,
    pub levels: Vec<LevelSummary>,
}

impl TrajectoryRecord {
    pub fn depth(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn w1(&self, n: u32) -> f64 {
        self.levels[n as usize].w1
    }

    pub fn w2(&self, n: u32) -> f64 {
        self.levels[n as usize].w2
    }

    pub fn require_depth(&self, need: u32) -> Result<()> {
        if self.depth() < need {
            Err(Error::InsufficientDepth { need, have: self.depth() })
        } else {
            Ok(())
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,W1,W2,pop,sup_weight\n");
        for l in &self.levels {
            s.push_str(&format!("{},{},{},{},{}\n", l.n, l.w1, l.w2, l.pop, l.sup_weight));
        }
        s
    }

    /// Compact little-endian block: magic, seed, survival flag, level rows.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(17 + self.levels.len() * 36);
        b.extend_from_slice(b"BGT1");
        b.extend_from_slice(&self.seed.to_le_bytes());
        b.push(u8::from(self.survived));
        b.extend_from_slice(&(self.levels.len() as u32).to_le_bytes());
        for l in &self.levels {
            b.extend_from_slice(&l.n.to_le_bytes());
            b.extend_from_slice(&l.w1.to_le_bytes());
            b.extend_from_slice(&l.w2.to_le_bytes());
            b.extend_from_slice(&l.pop.to_le_bytes());
            b.extend_from_slice(&l.sup_weight.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::InvalidArgument("malformed trajectory block".into());
        let body = bytes.strip_prefix(b"BGT1").ok_or_else(bad)?;
        if body.len() < 13 {
            return Err(bad());
        }
        let seed = u64::from_le_bytes(body[0..8].try_into().unwrap());
        let survived = match body[8] {
            0 => false,
            1 => true,
            _ => return Err(bad()),
        };
        let count = u32::from_le_bytes(body[9..13].try_into().unwrap()) as usize;
        let rows = &body[13..];
        if rows.len() != count * 36 {
            return Err(bad());
        }
        let f = |c: &[u8], at: usize| f64::from_le_bytes(c[at..at + 8].try_into().unwrap());
        let levels = rows
            .chunks_exact(36)
            .map(|c| LevelSummary {
                n: u32::from_le_bytes(c[0..4].try_into().unwrap()),
                w1: f(c, 4),
                w2: f(c, 12),
                pop: u64::from_le_bytes(c[20..28].try_into().unwrap()),
                sup_weight: f(c, 28),
            })
            .collect();
        Ok(TrajectoryRecord { seed, survived, levels })
    }
}

/// Summary of generation `g` for a model with `log m(1)`, `log m(2)`.
pub fn summarize(g: &Generation, log_m1: f64, log_m2: f64) -> LevelSummary {
    let shift1 = level_shift(g.level, log_m1);
    let shift2 = level_shift(g.level, log_m2);
    let mut w1 = NeumaierSum::new();
    let mut w2 = NeumaierSum::new();
    let mut min_s = f64::INFINITY;
    for &s in &g.positions {
        w1 += (-s - shift1).exp();
        w2 += (-2.0 * s - shift2).exp();
        min_s = min_s.min(s);
    }
    LevelSummary {
        n: g.level,
        w1: w1.value(),
        w2: w2.value(),
        pop: g.positions.len() as u64,
        sup_weight: min_s.neg_exp_or_zero(),
    }
}

/// Grows a tree to `depth`, calling `visit` on every generation `0..=depth`.
/// Once extinct, later generations are empty and are not sampled.
pub fn grow<F>(model: &OffspringModel, depth: u32, tree: StreamKey, cap: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&Generation),
{
    let mut current = Generation::ancestor();
    let mut next = Vec::new();
    visit(&current);
    for _ in 0..depth {
        if current.is_extinct() {
            current.level += 1;
        } else {
            advance_into(&current, model, tree, cap, &mut next)?;
            std::mem::swap(&mut current.positions, &mut next);
            current.level += 1;
        }
        visit(&current);
    }
    Ok(())
}

/// The generation at level `n` of the tree with key `tree`.
pub fn generation_at(model: &OffspringModel, n: u32, tree: StreamKey, cap: usize) -> Result<Generation> {
    let mut out = None;
    grow(model, n, tree, cap, |g| {
        if g.level() == n {
            out = Some(g.clone());
        }
    })?;
    Ok(out.expect("grow visits the last level"))
}

/// Simulates levels `0..=depth` and records `W_n(1)`, `W_n(2)`, population
/// and supremum weight at each.
pub fn simulate_trajectory(
    model: &OffspringModel,
    depth: u32,
    tree: StreamKey,
    cap: usize,
) -> Result<TrajectoryRecord> {
    simulate_trajectory_with(model, depth, tree, cap, |_| {})
}

/// [`simulate_trajectory`] with a callback on every generation (for freezing
/// generations of interest while the tree is streamed).
pub fn simulate_trajectory_with<F>(
    model: &OffspringModel,
    depth: u32,
    tree: StreamKey,
    cap: usize,
    mut visit: F,
) -> Result<TrajectoryRecord>
where
    F: FnMut(&Generation),
{
    let log_m1 = model.laplace_transform(1.0).ln();
    let log_m2 = model.laplace_transform(2.0).ln();
    let mut levels = Vec::with_capacity(depth as usize + 1);
    grow(model, depth, tree, cap, |g| {
        levels.push(summarize(g, log_m1, log_m2));
        visit(g);
    })?;
    let survived = levels.last().is_some_and(|l| l.pop > 0);
    Ok(TrajectoryRecord { seed: tree.raw(), survived, levels })
}

/// `count` independent trees; tree `i` uses stream `root.derive(i)`.
pub fn simulate_trees(
    model: &OffspringModel,
    depth: u32,
    root: StreamKey,
    count: usize,
    cap: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_trajectory(model, depth, root.derive(i), cap))
        .collect()
}

/// `W_{n+R}(1)` as a proxy for `W_∞(1)`, with its exact truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: u32,
    pub proxy_depth: u32,
    pub value: f64,
    /// `sqrt(v² m2^{n+R})`
    pub error_std: f64,
}

pub fn tail_estimate(ms: &MomentSet, n: u32, proxy_depth: u32, traj: &TrajectoryRecord) -> Result<TailEstimate> {
    let deep = n + proxy_depth;
    traj.require_depth(deep)?;
    Ok(TailEstimate {
        n,
        proxy_depth,
        value: traj.w1(deep),
        error_std: ms.cov_tail(CovQuery::new(deep, deep)).sqrt(),
    })
}

/// Draws `k` samples of `U_{n,r} = Σ_u Y_u (W̃_∞^{(u)} - W̃_r^{(u)}) / m2^{(n+r)/2}`
/// given the frozen generation `g`, with `W̃_∞` proxied by a fresh depth
/// `r + R` subtree. Subtree `(u, k)` uses stream `key.derive_tag("resample").derive(u).derive(k)`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_resample(
    g: &Generation,
    model: &OffspringModel,
    ms: &MomentSet,
    r: u32,
    proxy_depth: u32,
    k: usize,
    key: StreamKey,
    cap: usize,
) -> Result<Vec<f64>> {
    if g.is_extinct() {
        return Err(Error::ExtinctTree { level: g.level() });
    }
    let base = key.derive_tag("resample");
    let log_scale = 0.5 * f64::from(g.level() + r) * ms.m2.ln();
    let weights: Vec<f64> = g.positions().iter().map(|&s| (-s - log_scale).exp()).collect();
    (0..k as u64)
        .into_par_iter()
        .map(|j| {
            let mut acc = NeumaierSum::new();
            for (u, &w) in weights.iter().enumerate() {
                let (wr, wdeep) = subtree_pair(model, r, r + proxy_depth, base.derive(u as u64).derive(j), cap)?;
                acc += w * (wdeep - wr);
            }
            Ok(acc.value())
        })
        .collect()
}

/// `(W_r, W_deep)` of a fresh tree.
pub(crate) fn subtree_pair(
    model: &OffspringModel,
    r: u32,
    deep: u32,
    key: StreamKey,
    cap: usize,
) -> Result<(f64, f64)> {
    let log_m1 = model.laplace_transform(1.0).ln();
    let mut wr = 0.0;
    let mut wd = 0.0;
    grow(model, deep, key, cap, |g| {
        if g.level() == r || g.level() == deep {
            let w = martingale_log(g, 1.0, log_m1);
            if g.level() == r {
                wr = w;
            }
            if g.level() == deep {
                wd = w;
            }
        }
    })?;
    Ok((wr, wd))
}

/// `sup_{|u|=n} Y_u / m2^{n/2}` for every recorded level.
pub fn max_weight_ratio(traj: &TrajectoryRecord, m2: f64) -> Vec<f64> {
    let half_log = 0.5 * m2.ln();
    traj.levels
        .iter()
        .map(|l| {
            if l.sup_weight == 0.0 {
                0.0
            } else {
                (l.sup_weight.ln() - f64::from(l.n) * half_log).exp()
            }
        })
        .collect()
}
