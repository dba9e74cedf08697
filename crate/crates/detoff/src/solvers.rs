//! Allocation solvers: a genetic search, a uniform-random baseline, and an
//! exhaustive oracle for small instances.
//!
//! All three produce an [`Assignment`] and score it the same way: simulate
//! the decision, apply the configured objective to the records, and add a
//! flat penalty for every computing unit whose committed workload exceeds
//! its cycle budget. Solvers therefore compete on exactly the metric the
//! evaluation reports.
//!
//! The genetic encoding gives each task two genes: a target allele indexing
//! into the task's allowed-target list, and a priority in [0, 1) whose
//! ascending order (ties by task id) becomes the resource-grant rank. A
//! fitness cache keyed by the decoded assignment deduplicates evaluations;
//! cache misses are simulated in parallel, while all random choices happen
//! sequentially on the caller's generator, so results do not depend on
//! thread count.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;

use crate::config::GaConfig;
use crate::engine::{simulate, Assignment, SimParams};
use crate::objective::{capacity_violations, objective_value, ObjectiveKind};
use crate::taskgen::Task;
use crate::topology::{Topology, UnitId};
use crate::{Error, Result};

/// Genome of one candidate allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    /// Per task: index into the task's allowed-target list.
    pub target_allele: Vec<u16>,
    /// Per task: grant priority; lower values are served first.
    pub priority: Vec<f64>,
}

/// Shared evaluation context: topology, tasks, allowed targets, scoring.
pub struct SolveContext<'a> {
    pub topo: &'a Topology,
    pub tasks: &'a [Task],
    pub kind: ObjectiveKind,
    pub params: &'a SimParams,
    pub miss_penalty: f64,
    allowed: Vec<Vec<UnitId>>,
}

impl<'a> SolveContext<'a> {
    pub fn new(
        topo: &'a Topology,
        tasks: &'a [Task],
        kind: ObjectiveKind,
        params: &'a SimParams,
        miss_penalty: f64,
    ) -> Result<SolveContext<'a>> {
        let mut allowed = Vec::with_capacity(tasks.len());
        for t in tasks {
            let targets = topo.allowed_targets(t.origin);
            if targets.is_empty() {
                return Err(Error::Engine(format!(
                    "task {} at {} has no reachable processing unit",
                    t.id, t.origin
                )));
            }
            allowed.push(targets);
        }
        Ok(SolveContext { topo, tasks, kind, params, miss_penalty, allowed })
    }

    /// Allowed targets of one task, nearest first.
    pub fn allowed(&self, task: usize) -> &[UnitId] {
        &self.allowed[task]
    }

    /// Turn genes into the assignment they encode.
    pub fn decode(&self, chrom: &Chromosome) -> Assignment {
        let targets: Vec<UnitId> = chrom
            .target_allele
            .iter()
            .enumerate()
            .map(|(t, &a)| self.allowed[t][a as usize])
            .collect();
        let mut order: Vec<usize> = (0..chrom.priority.len()).collect();
        order.sort_by(|&a, &b| {
            chrom.priority[a].partial_cmp(&chrom.priority[b]).unwrap().then(a.cmp(&b))
        });
        let mut rank = vec![0usize; order.len()];
        for (pos, &task) in order.iter().enumerate() {
            rank[task] = pos;
        }
        Assignment { targets, rank }
    }

    /// Simulate and score one assignment: objective plus a flat penalty per
    /// overloaded unit.
    pub fn fitness(&self, assignment: &Assignment) -> Result<f64> {
        let outcome = simulate(self.topo, self.tasks, assignment, self.params)?;
        let base = objective_value(self.kind, &outcome.records, self.tasks, self.miss_penalty);
        let overloaded = capacity_violations(self.topo, self.tasks, assignment).len();
        Ok(base + self.miss_penalty * overloaded as f64)
    }

    fn random_chromosome<R: Rng + ?Sized>(&self, rng: &mut R) -> Chromosome {
        let target_allele = self
            .allowed
            .iter()
            .map(|a| rng.gen_range(0..a.len()) as u16)
            .collect();
        let priority = self.allowed.iter().map(|_| rng.gen::<f64>()).collect();
        Chromosome { target_allele, priority }
    }
}

/// Draw an assignment uniformly: independent uniform target per task,
/// uniform random priority order.
pub fn random_allocate<R: Rng + ?Sized>(
    ctx: &SolveContext<'_>,
    rng: &mut R,
) -> Assignment {
    ctx.decode(&ctx.random_chromosome(rng))
}

/// Result of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub assignment: Assignment,
    pub fitness: f64,
    /// Best fitness seen after initialization and after each generation;
    /// never increases. Empty for non-iterative solvers.
    pub trace: Vec<f64>,
    /// Simulations actually run (cache misses).
    pub evaluations: u64,
}

/// Cache key: the decoded decision, which is what fitness depends on.
#[derive(PartialEq, Eq, Hash, Clone)]
struct FitnessKey {
    targets: Vec<u16>,
    rank: Vec<u16>,
}

impl FitnessKey {
    fn of(assignment: &Assignment) -> FitnessKey {
        FitnessKey {
            targets: assignment.targets.iter().map(|u| u.0 as u16).collect(),
            rank: assignment.rank.iter().map(|&r| r as u16).collect(),
        }
    }
}

/// Evaluate a population against the cache; misses run in parallel.
fn evaluate_population(
    ctx: &SolveContext<'_>,
    population: &[Chromosome],
    cache: &mut HashMap<FitnessKey, f64>,
    evaluations: &mut u64,
) -> Result<Vec<f64>> {
    let decoded: Vec<Assignment> = population.iter().map(|c| ctx.decode(c)).collect();
    let keys: Vec<FitnessKey> = decoded.iter().map(FitnessKey::of).collect();

    let mut seen: HashSet<&FitnessKey> = HashSet::new();
    let mut miss_keys: Vec<FitnessKey> = Vec::new();
    let mut miss_assignments: Vec<&Assignment> = Vec::new();
    for (key, asg) in keys.iter().zip(&decoded) {
        if !cache.contains_key(key) && seen.insert(key) {
            miss_keys.push(key.clone());
            miss_assignments.push(asg);
        }
    }
    let scores: Vec<Result<f64>> =
        miss_assignments.par_iter().map(|asg| ctx.fitness(asg)).collect();
    for (key, score) in miss_keys.into_iter().zip(scores) {
        cache.insert(key, score?);
        *evaluations += 1;
    }
    Ok(keys.iter().map(|k| cache[k]).collect())
}

/// Index of the tournament winner: best fitness among `k` uniform picks,
/// ties to the earliest-drawn contestant.
fn tournament<R: Rng + ?Sized>(fitness: &[f64], k: usize, rng: &mut R) -> usize {
    let mut winner = rng.gen_range(0..fitness.len());
    for _ in 1..k {
        let challenger = rng.gen_range(0..fitness.len());
        if fitness[challenger] < fitness[winner] {
            winner = challenger;
        }
    }
    winner
}

/// Genetic search for a low-fitness assignment.
///
/// Classic generational loop: elitism copies the best few unchanged, the
/// rest of the next generation comes from tournament selection, single-point
/// crossover at a task boundary (both gene vectors cut at the same task),
/// and per-gene uniform reset mutation. The reported assignment is the best
/// ever evaluated, so the trace is monotone even if a generation regresses.
pub fn ga_solve<R: Rng + ?Sized>(
    ctx: &SolveContext<'_>,
    ga: &GaConfig,
    rng: &mut R,
) -> Result<SolveOutcome> {
    let n = ctx.tasks.len();
    if n == 0 {
        let assignment = Assignment { targets: vec![], rank: vec![] };
        let fitness = ctx.fitness(&assignment)?;
        return Ok(SolveOutcome { assignment, fitness, trace: vec![fitness], evaluations: 1 });
    }

    let mut cache: HashMap<FitnessKey, f64> = HashMap::new();
    let mut evaluations = 0u64;

    let mut population: Vec<Chromosome> =
        (0..ga.population).map(|_| ctx.random_chromosome(rng)).collect();
    let mut fitness = evaluate_population(ctx, &population, &mut cache, &mut evaluations)?;

    let mut best_idx = argmin(&fitness);
    let mut best = population[best_idx].clone();
    let mut best_fitness = fitness[best_idx];
    let mut trace = vec![best_fitness];

    let elite_count = ((ga.elite_fraction * ga.population as f64).ceil() as usize)
        .min(ga.population);

    for _ in 0..ga.generations {
        // Elites: the current generation's best, in fitness order.
        let mut by_fitness: Vec<usize> = (0..population.len()).collect();
        by_fitness.sort_by(|&a, &b| {
            fitness[a].partial_cmp(&fitness[b]).unwrap().then(a.cmp(&b))
        });
        let mut next: Vec<Chromosome> =
            by_fitness[..elite_count].iter().map(|&i| population[i].clone()).collect();

        while next.len() < ga.population {
            let p1 = &population[tournament(&fitness, ga.tournament_size, rng)];
            let p2 = &population[tournament(&fitness, ga.tournament_size, rng)];
            let (mut c1, mut c2) = if n > 1 && rng.gen::<f64>() < ga.crossover_prob {
                let cut = rng.gen_range(1..n);
                (splice(p1, p2, cut), splice(p2, p1, cut))
            } else {
                (p1.clone(), p2.clone())
            };
            mutate(ctx, &mut c1, ga.mutation_prob, rng);
            mutate(ctx, &mut c2, ga.mutation_prob, rng);
            next.push(c1);
            if next.len() < ga.population {
                next.push(c2);
            }
        }

        population = next;
        fitness = evaluate_population(ctx, &population, &mut cache, &mut evaluations)?;
        best_idx = argmin(&fitness);
        if fitness[best_idx] < best_fitness {
            best_fitness = fitness[best_idx];
            best = population[best_idx].clone();
        }
        trace.push(best_fitness);
    }

    Ok(SolveOutcome {
        assignment: ctx.decode(&best),
        fitness: best_fitness,
        trace,
        evaluations,
    })
}

fn argmin(fitness: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..fitness.len() {
        if fitness[i] < fitness[best] {
            best = i;
        }
    }
    best
}

/// Head of `a` up to `cut` (exclusive) joined with the tail of `b`.
fn splice(a: &Chromosome, b: &Chromosome, cut: usize) -> Chromosome {
    let mut target_allele = a.target_allele[..cut].to_vec();
    target_allele.extend_from_slice(&b.target_allele[cut..]);
    let mut priority = a.priority[..cut].to_vec();
    priority.extend_from_slice(&b.priority[cut..]);
    Chromosome { target_allele, priority }
}

/// Per-gene uniform reset: target alleles first, then priorities.
fn mutate<R: Rng + ?Sized>(
    ctx: &SolveContext<'_>,
    chrom: &mut Chromosome,
    prob: f64,
    rng: &mut R,
) {
    for (t, allele) in chrom.target_allele.iter_mut().enumerate() {
        if rng.gen::<f64>() < prob {
            *allele = rng.gen_range(0..ctx.allowed[t].len()) as u16;
        }
    }
    for p in chrom.priority.iter_mut() {
        if rng.gen::<f64>() < prob {
            *p = rng.gen::<f64>();
        }
    }
}

/// Priority orders the oracle tries: every permutation for up to 7 tasks;
/// for larger sets, earliest-deadline, generation order, and its reverse.
fn oracle_orders(tasks: &[Task]) -> Vec<Vec<usize>> {
    let n = tasks.len();
    if n <= 7 {
        let mut orders = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            orders.push(perm.clone());
            if !next_permutation(&mut perm) {
                break;
            }
        }
        orders
    } else {
        let mut edf: Vec<usize> = (0..n).collect();
        edf.sort_by(|&a, &b| tasks[a].due_s().partial_cmp(&tasks[b].due_s()).unwrap());
        let generation: Vec<usize> = (0..n).collect();
        let reverse: Vec<usize> = (0..n).rev().collect();
        vec![edf, generation, reverse]
    }
}

/// Advance to the lexicographically next permutation; false after the last.
fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Try every target combination against every candidate priority order and
/// return the best. `budget` caps the number of simulations; exceeding it
/// fails fast with the required count rather than grinding.
pub fn exhaustive_oracle(ctx: &SolveContext<'_>, budget: u64) -> Result<SolveOutcome> {
    let n = ctx.tasks.len();
    let orders = oracle_orders(ctx.tasks);
    let mut combos: u128 = 1;
    for t in 0..n {
        combos = combos.saturating_mul(ctx.allowed(t).len() as u128);
    }
    let needed = combos.saturating_mul(orders.len().max(1) as u128);
    if needed > budget as u128 {
        return Err(Error::OracleTooLarge { needed, budget });
    }

    let mut best: Option<(Assignment, f64)> = None;
    let mut evaluations = 0u64;
    let mut odometer = vec![0usize; n];
    loop {
        let targets: Vec<UnitId> =
            (0..n).map(|t| ctx.allowed(t)[odometer[t]]).collect();
        for order in &orders {
            let mut rank = vec![0usize; n];
            for (pos, &task) in order.iter().enumerate() {
                rank[task] = pos;
            }
            let assignment = Assignment { targets: targets.clone(), rank };
            let fitness = ctx.fitness(&assignment)?;
            evaluations += 1;
            let better = match &best {
                Some((_, current)) => fitness < *current,
                None => true,
            };
            if better {
                best = Some((assignment, fitness));
            }
        }
        // Mixed-radix increment over per-task allowed-target counts; the
        // odometer carrying past the last digit ends the sweep.
        let mut t = 0;
        loop {
            if t == n {
                let (assignment, fitness) = best.expect("at least one evaluation");
                return Ok(SolveOutcome { assignment, fitness, trace: vec![], evaluations });
            }
            odometer[t] += 1;
            if odometer[t] < ctx.allowed(t).len() {
                break;
            }
            odometer[t] = 0;
            t += 1;
        }
    }
}
