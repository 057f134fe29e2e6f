//! Exact depth-first simulation of the particle system with reproducible
//! per-trajectory random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::export::{csv, num, opt_num};
use crate::model::{ModelSpec, TestFunction};
use crate::renewal::MalthusianSolution;

/// Stream purposes; each draws from a disjoint family of seeds.
pub mod purpose {
    pub const TRAJECTORY: u64 = 0x7472_616a;
    pub const Y: u64 = 0x0000_0059;
    pub const CLT: u64 = 0x0063_6c74;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
    pub const BIRTHS: u64 = 0x6269_7274;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` for `purpose` under `master`.
pub fn stream_seed(master: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ purpose).wrapping_add(index))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Particle {
    pub id: u64,
    pub parent: Option<u64>,
    pub generation: u32,
    pub birth_time: f64,
    pub lifespan: f64,
}

impl Particle {
    pub fn death_time(&self) -> f64 {
        self.birth_time + self.lifespan
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.birth_time <= t && t < self.death_time()
    }
}

/// Reproduction events of one particle, in order of age; `on_event` gets
/// (age, count). Sampling stops at `stop_age` or at death.
pub fn for_each_event<R: Rng + ?Sized>(
    spec: &ModelSpec,
    lifespan: f64,
    stop_age: f64,
    rng: &mut R,
    mut on_event: impl FnMut(f64, u64),
) {
    let bound = spec.alpha.sup();
    if bound <= 0.0 {
        return;
    }
    let end = lifespan.min(stop_age);
    let mut age = 0.0;
    loop {
        let step: f64 = Exp1.sample(rng);
        age += step / bound;
        if age >= end {
            return;
        }
        let u: f64 = rng.random();
        let x = lifespan - age;
        if u * bound < spec.alpha.eval(x) {
            on_event(age, spec.offspring.sample(x, rng));
        }
    }
}

/// The compound point process of one particle's births over its life.
pub fn sample_birth_process<R: Rng + ?Sized>(spec: &ModelSpec, lifespan: f64, rng: &mut R) -> Vec<(f64, u64)> {
    let mut out = Vec::new();
    for_each_event(spec, lifespan, f64::INFINITY, rng, |s, n| out.push((s, n)));
    out
}

/// Y = Σ_j n_j e^{-α̃ s_j} for a freshly drawn lifespan.
pub fn sample_y<R: Rng + ?Sized>(spec: &ModelSpec, sol: &MalthusianSolution, rng: &mut R) -> f64 {
    let lifespan = spec.lifetime.sample(rng);
    let a = sol.alpha_tilde;
    let mut y = 0.0;
    for_each_event(spec, lifespan, f64::INFINITY, rng, |s, n| y += n as f64 * (-a * s).exp());
    y
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WalkStats {
    pub particles: u64,
    pub birth_events: u64,
    /// ξ̂₀, ξ̂₁, ξ̂₂
    pub generations: [u64; 3],
    pub aborted: bool,
}

/// Depth-first walk of the family tree of a root with the given lifespan.
///
/// Children born after `t_max` are not created, except that the first
/// `full_gens` generations reproduce over their whole life so that the
/// embedded generation sizes can be counted. `visit` returns false to abort.
pub fn walk<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rng: &mut R,
    root_lifespan: f64,
    t_max: f64,
    full_gens: u32,
    mut visit: impl FnMut(&Particle) -> bool,
) -> WalkStats {
    let mut stats = WalkStats { generations: [1, 0, 0], ..Default::default() };
    let mut next_id = 1u64;
    let mut stack = vec![Particle { id: 0, parent: None, generation: 0, birth_time: 0.0, lifespan: root_lifespan }];
    let mut children = Vec::new();
    while let Some(p) = stack.pop() {
        stats.particles += 1;
        if !visit(&p) {
            stats.aborted = true;
            return stats;
        }
        let stop_age = if p.generation < full_gens { f64::INFINITY } else { t_max - p.birth_time };
        children.clear();
        for_each_event(spec, p.lifespan, stop_age, rng, |s, n| {
            stats.birth_events += 1;
            let g = p.generation as usize + 1;
            if g < 3 {
                stats.generations[g] += n;
            }
            if p.birth_time + s <= t_max {
                children.push((s, n));
            }
        });
        for &(s, n) in &children {
            for _ in 0..n {
                stack.push(Particle {
                    id: next_id,
                    parent: Some(p.id),
                    generation: p.generation + 1,
                    birth_time: p.birth_time + s,
                    lifespan: spec.lifetime.sample(rng),
                });
                next_id += 1;
            }
        }
    }
    stats
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Remaining lifetimes of the particles alive at t.
    pub remaining: Vec<f64>,
    /// Alive count by generation.
    pub generations: Vec<u64>,
}

impl Snapshot {
    pub fn alive(&self) -> usize {
        self.remaining.len()
    }

    pub fn sum<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.remaining.iter().map(|&r| f(r)).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryResult {
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
    pub extinct: bool,
    pub truncated: bool,
    pub birth_events: u64,
    pub particles: u64,
    /// ξ̂₀, ξ̂₁, ξ̂₂
    pub generations: [u64; 3],
}

/// One trajectory from the stream `seed`; snapshots at increasing `obs_times`.
pub fn simulate_trajectory(
    spec: &ModelSpec,
    _sol: &MalthusianSolution,
    seed: u64,
    obs_times: &[f64],
    max_pop: usize,
) -> TrajectoryResult {
    let mut rng = stream(seed);
    let root = spec.lifetime.sample(&mut rng);
    let t_max = obs_times.iter().copied().fold(0.0, f64::max);
    let (snapshots, stats) = census(spec, &mut rng, root, obs_times, t_max, 2, max_pop);
    let truncated = stats.aborted;
    let extinct = !truncated && snapshots.last().is_some_and(|s| s.alive() == 0);
    TrajectoryResult {
        seed,
        snapshots,
        extinct,
        truncated,
        birth_events: stats.birth_events,
        particles: stats.particles,
        generations: stats.generations,
    }
}

fn census<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rng: &mut R,
    root: f64,
    obs_times: &[f64],
    t_max: f64,
    full_gens: u32,
    max_pop: usize,
) -> (Vec<Snapshot>, WalkStats) {
    let mut snaps: Vec<Snapshot> = obs_times.iter().map(|&t| Snapshot { t, ..Default::default() }).collect();
    let stats = walk(spec, rng, root, t_max, full_gens, |p| {
        let death = p.death_time();
        for s in snaps.iter_mut() {
            if p.birth_time <= s.t && s.t < death {
                s.remaining.push(death - s.t);
                let g = p.generation as usize;
                if s.generations.len() <= g {
                    s.generations.resize(g + 1, 0);
                }
                s.generations[g] += 1;
                if s.remaining.len() > max_pop {
                    return false;
                }
            }
        }
        true
    });
    (snaps, stats)
}

/// ⟨X_s, f⟩ for the process started from one particle with remaining
/// lifetime `x`.
pub fn simulate_from<R: Rng + ?Sized, F: Fn(f64) -> f64>(spec: &ModelSpec, rng: &mut R, x: f64, s: f64, f: F) -> f64 {
    let mut total = 0.0;
    walk(spec, rng, x, s, 0, |p| {
        if p.alive_at(s) {
            total += f(p.death_time() - s);
        }
        true
    });
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub pop: usize,
    pub sum_f: f64,
    #[serde(rename = "W_f")]
    pub w_f: f64,
    #[serde(rename = "A_f")]
    pub a_f: Option<f64>,
}

pub fn observables(snapshot: &Snapshot, f: &TestFunction, alpha_tilde: f64) -> Observables {
    let pop = snapshot.alive();
    let sum_f = snapshot.sum(|r| f.eval(r));
    Observables {
        pop,
        sum_f,
        w_f: (-alpha_tilde * snapshot.t).exp() * sum_f,
        a_f: (pop > 0).then(|| sum_f / pop as f64),
    }
}

/// Trajectories `start..start + n` of the `TRAJECTORY` family, each reduced by
/// `map` inside the worker. Output is in index order.
pub fn ensemble<T: Send, M>(
    spec: &ModelSpec,
    sol: &MalthusianSolution,
    master: u64,
    start: u64,
    n: usize,
    obs_times: &[f64],
    max_pop: usize,
    map: M,
) -> Vec<T>
where
    M: Fn(u64, TrajectoryResult) -> T + Sync + Send,
{
    (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let index = start + k;
            let seed = stream_seed(master, purpose::TRAJECTORY, index);
            map(index, simulate_trajectory(spec, sol, seed, obs_times, max_pop))
        })
        .collect()
}

/// `n` draws of Y from stream family `Y`, chunked so the draws do not depend
/// on the worker count.
pub fn sample_y_many(spec: &ModelSpec, sol: &MalthusianSolution, master: u64, n: usize) -> Vec<f64> {
    const CHUNK: usize = 4096;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(stream_seed(master, purpose::Y, c as u64));
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| sample_y(spec, sol, &mut rng)).collect()
        })
        .collect();
    parts.concat()
}

/// One CSV row per trajectory and observation time.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub traj: u64,
    pub seed: u64,
    pub t: f64,
    pub obs: Observables,
    pub extinct: bool,
    pub truncated: bool,
}

pub fn trajectory_rows(index: u64, r: &TrajectoryResult, f: &TestFunction, alpha_tilde: f64) -> Vec<TrajectoryRow> {
    r.snapshots
        .iter()
        .map(|s| TrajectoryRow {
            traj: index,
            seed: r.seed,
            t: s.t,
            obs: observables(s, f, alpha_tilde),
            extinct: r.extinct,
            truncated: r.truncated,
        })
        .collect()
}

pub fn trajectories_csv(rows: &[TrajectoryRow]) -> String {
    csv(
        "traj,seed,t,pop,sum_f,W_f,A_f,extinct,truncated",
        rows.iter().map(|r| {
            vec![
                r.traj.to_string(),
                r.seed.to_string(),
                num(r.t),
                r.obs.pop.to_string(),
                num(r.obs.sum_f),
                num(r.obs.w_f),
                opt_num(r.obs.a_f),
                (r.extinct as u8).to_string(),
                (r.truncated as u8).to_string(),
            ]
        }),
    )
}
