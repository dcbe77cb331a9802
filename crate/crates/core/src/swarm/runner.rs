//! Swarm execution.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::config::{Deadline, FinalFusion, Mode, ProposalPlan, Stall, SwarmConfig};
use super::pool::SolutionPool;
use super::trace::{EnergyTrace, TraceRecorder};
use crate::error::{contract, Error, Result};
use crate::fusion::{fuse_detailed, FusionPolicy};
use crate::model::{from_fixed, EnergyModel, Labeling};
use crate::proposals::{
    constant_label_generator, perturb_generator, random_labeling, random_labeling_generator,
    stagger_generator, Mix, ProposalGenerator, Shift,
};
use crate::SwarmRng;

/// Result of a swarm run.
#[derive(Debug, Clone)]
pub struct SwarmOutcome {
    pub best: Labeling,
    /// Fixed-point energy of `best`.
    pub best_energy: i64,
    pub trace: EnergyTrace,
    /// Fusions performed by each worker, final fusion included.
    pub iterations: Vec<usize>,
}

impl SwarmOutcome {
    pub fn cost(&self) -> f64 {
        from_fixed(self.best_energy)
    }
}

/// Rng of worker `worker`; the seed's stream 0 is reserved for the label
/// order.
pub fn worker_rng(seed: u64, worker: usize) -> SwarmRng {
    let mut rng = SwarmRng::seed_from_u64(seed);
    rng.set_stream(worker as u64 + 1);
    rng
}

/// The constant-label order of a run.
pub fn label_order(config: &SwarmConfig, model: &EnergyModel) -> Result<Vec<usize>> {
    let l = model.num_labels();
    if let Some(order) = &config.label_order {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..l).collect::<Vec<_>>() {
            return Err(Error::Config(format!(
                "label order must be a permutation of 0..{l}"
            )));
        }
        return Ok(order.clone());
    }
    let mut rng = SwarmRng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(&mut rng);
    Ok(order)
}

/// `n` contiguous blocks of `order` whose sizes differ by at most one.
pub fn label_blocks(order: &[usize], n: usize) -> Vec<Vec<usize>> {
    let l = order.len();
    (0..n)
        .map(|i| order[i * l / n..(i + 1) * l / n].to_vec())
        .collect()
}

/// The labeling worker `worker` starts from.
pub fn initial_labeling(config: &SwarmConfig, model: &EnergyModel, worker: usize) -> Labeling {
    random_labeling(model, &mut worker_rng(config.seed, worker))
}

/// One generator per worker as described by the config's proposal plan.
pub fn default_generators(
    config: &SwarmConfig,
    model: &EnergyModel,
) -> Result<Vec<Box<dyn ProposalGenerator>>> {
    let n = config.threads;
    let order = label_order(config, model)?;
    let l = order.len();
    let plan = match config.proposals {
        ProposalPlan::Auto if model.labels().vectors().is_some() => {
            ProposalPlan::FlowMix { sigma: 1.0 }
        }
        ProposalPlan::Auto => ProposalPlan::ConstantLabels,
        p => p,
    };
    let mut out: Vec<Box<dyn ProposalGenerator>> = Vec::with_capacity(n);
    match plan {
        ProposalPlan::ConstantLabels => {
            for i in 0..n {
                out.push(Box::new(
                    constant_label_generator(order.clone())?.starting_at(i * l / n),
                ));
            }
        }
        ProposalPlan::ConstantLabelBlocks => {
            if n > l {
                return Err(Error::Config(format!(
                    "{n} label blocks requested for {l} labels"
                )));
            }
            for block in label_blocks(&order, n) {
                out.push(Box::new(constant_label_generator(block)?));
            }
        }
        ProposalPlan::FlowMix { sigma } => {
            if model.labels().vectors().is_none() {
                return contract("flow proposals need vector label payloads");
            }
            for i in 0..n {
                out.push(Box::new(Mix::new(vec![
                    Box::new(Shift::default()),
                    Box::new(stagger_generator(sigma)?),
                    Box::new(perturb_generator(sigma)?),
                    Box::new(constant_label_generator(order.clone())?.starting_at(i * l / n)),
                ])?));
            }
        }
        ProposalPlan::RandomLabels => {
            for _ in 0..n {
                out.push(Box::new(random_labeling_generator()));
            }
        }
        ProposalPlan::Auto => unreachable!(),
    }
    Ok(out)
}

/// Runs a swarm with the default generators of the config.
pub fn run(config: &SwarmConfig, model: &EnergyModel) -> Result<SwarmOutcome> {
    run_swarm(config, model, default_generators(config, model)?)
}

struct Shared<'a, 'm> {
    model: &'m EnergyModel,
    config: &'a SwarmConfig,
    pool: SolutionPool<'m>,
    trace: TraceRecorder,
    work_end: Instant,
    stop: AtomicBool,
    stall_count: AtomicUsize,
    pool_stall: Option<usize>,
}

impl Shared<'_, '_> {
    fn out_of_time(&self) -> bool {
        self.stop.load(Ordering::Relaxed) || Instant::now() >= self.work_end
    }
}

struct Worker {
    id: usize,
    current: Labeling,
    energy: i64,
    rng: SwarmRng,
    generator: Box<dyn ProposalGenerator>,
    iteration: usize,
    position: usize,
    own_stall: usize,
    own_limit: Option<usize>,
}

impl Worker {
    /// Runs one schedule step; `false` once the worker should stop.
    fn step(&mut self, sh: &Shared<'_, '_>) -> Result<bool> {
        let cfg = sh.config;
        if sh.out_of_time() {
            return Ok(false);
        }
        if cfg
            .termination
            .max_iterations
            .is_some_and(|m| self.iteration >= m)
        {
            return Ok(false);
        }
        if self.own_limit.is_some_and(|m| self.own_stall >= m) {
            return Ok(false);
        }
        let step = cfg.schedule[self.position];
        self.position = (self.position + 1) % cfg.schedule.len();
        if !step.is_active() {
            return Ok(true);
        }
        let mut candidates = Vec::with_capacity(step.alpha + step.beta);
        for _ in 0..step.alpha {
            candidates.push(self.generator.generate(sh.model, &self.current, &mut self.rng)?);
        }
        for peer in sh.pool.sample(step.beta, &mut self.rng, self.id)? {
            candidates.push(peer.labeling);
        }
        let (fused, _) = fuse_detailed(sh.model, &self.current, &candidates, cfg.policy, cfg.trws)?;
        let energy = sh.model.energy_fixed(fused.as_slice());
        self.iteration += 1;
        if energy < self.energy {
            self.own_stall = 0;
        } else {
            self.own_stall += 1;
        }
        self.current = fused;
        self.energy = energy;
        sh.pool
            .publish(self.id, self.id, self.current.clone(), energy)?;
        let improved = sh.trace.record(self.id, self.iteration, energy);
        if let Some(limit) = sh.pool_stall {
            if improved {
                sh.stall_count.store(0, Ordering::Relaxed);
            } else if sh.stall_count.fetch_add(1, Ordering::Relaxed) + 1 >= limit {
                sh.stop.store(true, Ordering::Relaxed);
            }
        }
        Ok(true)
    }
}

/// Runs the swarm with one generator per worker and returns the best pool
/// entry together with the full trace.
pub fn run_swarm(
    config: &SwarmConfig,
    model: &EnergyModel,
    generators: Vec<Box<dyn ProposalGenerator>>,
) -> Result<SwarmOutcome> {
    config.validate()?;
    let n = config.threads;
    if generators.len() != n {
        return contract(format!(
            "{} generators supplied for {n} workers",
            generators.len()
        ));
    }
    let start = Instant::now();
    let budget_end = start + config.termination.budget;
    let work_end = match config.termination.work_deadline {
        None => budget_end,
        Some(Deadline::After(d)) => start + d.min(config.termination.budget),
        Some(Deadline::FractionOfBudget(f)) => {
            start + Duration::from_secs_f64(config.termination.budget.as_secs_f64() * f)
        }
    };
    let max_cycle = generators.iter().filter_map(|g| g.cycle_len()).max();
    let (pool_stall, own_stall) = match config.termination.stall {
        Stall::Off => (None, None),
        Stall::PoolBest(k) => (Some(k.max(n * max_cycle.unwrap_or(0))), None),
        Stall::OwnSlot(k) => (None, Some(k)),
    };
    let shared = Shared {
        model,
        config,
        pool: SolutionPool::new(model, n)?,
        trace: TraceRecorder::new(start),
        work_end,
        stop: AtomicBool::new(false),
        stall_count: AtomicUsize::new(0),
        pool_stall,
    };

    let mut workers = Vec::with_capacity(n);
    for (id, generator) in generators.into_iter().enumerate() {
        let mut rng = worker_rng(config.seed, id);
        let current = random_labeling(model, &mut rng);
        let energy = model.energy_fixed(current.as_slice());
        shared.pool.publish(id, id, current.clone(), energy)?;
        shared.trace.record(id, 0, energy);
        let own_limit = own_stall.map(|k| k.max(generator.cycle_len().unwrap_or(0)));
        workers.push(Worker {
            id,
            current,
            energy,
            rng,
            generator,
            iteration: 0,
            position: 0,
            own_stall: 0,
            own_limit,
        });
    }

    match config.mode {
        Mode::Iterative if config.deterministic => run_lockstep(&mut workers, &shared)?,
        Mode::Iterative => run_async(&mut workers, &shared)?,
        Mode::Hierarchical { pregen } => run_hierarchical(&mut workers, &shared, pregen)?,
    }

    let fused_any = workers.iter().any(|w| w.iteration > 0);
    if fused_any && n > 1 && config.final_fusion != FinalFusion::None {
        final_fusion(&mut workers[0], &shared)?;
    }

    let best = shared.pool.best().expect("every slot is initialized");
    let iterations = workers.iter().map(|w| w.iteration).collect();
    log::debug!(
        "{}: best {} after {:?}",
        config.name,
        best.cost(),
        start.elapsed()
    );
    Ok(SwarmOutcome {
        best: best.labeling,
        best_energy: best.energy,
        trace: shared.trace.finish(),
        iterations,
    })
}

fn run_lockstep(workers: &mut [Worker], sh: &Shared<'_, '_>) -> Result<()> {
    let mut active = vec![true; workers.len()];
    while active.iter().any(|&a| a) {
        for (w, a) in workers.iter_mut().zip(active.iter_mut()) {
            if *a && !w.step(sh)? {
                *a = false;
            }
        }
    }
    Ok(())
}

fn run_async(workers: &mut [Worker], sh: &Shared<'_, '_>) -> Result<()> {
    thread::scope(|s| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|w| {
                s.spawn(move || loop {
                    match w.step(sh) {
                        Ok(true) => {}
                        Ok(false) => return Ok(()),
                        Err(e) => {
                            sh.stop.store(true, Ordering::Relaxed);
                            return Err(e);
                        }
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<()>>()
    })
}

fn final_fusion(w: &mut Worker, sh: &Shared<'_, '_>) -> Result<()> {
    let best = sh.pool.best().expect("initialized pool");
    let others: Vec<Labeling> = (0..sh.pool.len())
        .filter(|&i| i != best.slot)
        .filter_map(|i| sh.pool.snapshot(i))
        .map(|s| s.labeling)
        .collect();
    let policy = match sh.config.final_fusion {
        FinalFusion::Multiway => FusionPolicy::Multiway,
        _ => FusionPolicy::SequentialBinary,
    };
    let (fused, _) = fuse_detailed(sh.model, &best.labeling, &others, policy, sh.config.trws)?;
    let energy = sh.model.energy_fixed(fused.as_slice());
    w.iteration += 1;
    if energy < w.energy {
        w.current = fused;
        w.energy = energy;
        sh.pool.publish(w.id, w.id, w.current.clone(), energy)?;
    }
    sh.trace.record(w.id, w.iteration, w.energy);
    Ok(())
}

/// Binary-tree fusion of pre-generated proposals. Proposal `j` comes from
/// worker `j mod N`; at every level fusion `k` runs on worker `k mod N`. A
/// worker's slot only takes a tree result that improves it.
fn run_hierarchical(workers: &mut [Worker], sh: &Shared<'_, '_>, pregen: usize) -> Result<()> {
    let n = workers.len();
    let jobs_of = |id: usize, count: usize| (id..count).step_by(n).collect::<Vec<_>>();

    let generated = for_each_worker(workers, sh.config.deterministic, |w| {
        let mut out = Vec::new();
        for j in jobs_of(w.id, pregen) {
            let p = w.generator.generate(sh.model, &w.current, &mut w.rng)?;
            out.push((j, p));
        }
        Ok(out)
    })?;
    let mut level: Vec<Labeling> = vec![Labeling::default(); pregen];
    for (j, p) in generated.into_iter().flatten() {
        level[j] = p;
    }

    while level.len() > 1 && !sh.out_of_time() {
        let pairs = level.len() / 2;
        let inputs = &level;
        let results = for_each_worker(workers, sh.config.deterministic, |w| {
            let mut out = Vec::new();
            for k in jobs_of(w.id, pairs) {
                let (a, b) = (&inputs[2 * k], &inputs[2 * k + 1]);
                if sh.out_of_time() {
                    let ea = sh.model.energy_fixed(a.as_slice());
                    let eb = sh.model.energy_fixed(b.as_slice());
                    out.push((k, if eb < ea { b.clone() } else { a.clone() }));
                    continue;
                }
                let (fused, _) = fuse_detailed(
                    sh.model,
                    a,
                    std::slice::from_ref(b),
                    sh.config.policy,
                    sh.config.trws,
                )?;
                let energy = sh.model.energy_fixed(fused.as_slice());
                w.iteration += 1;
                if energy < w.energy {
                    w.current = fused.clone();
                    w.energy = energy;
                    sh.pool.publish(w.id, w.id, fused.clone(), energy)?;
                }
                sh.trace.record(w.id, w.iteration, w.energy);
                out.push((k, fused));
            }
            Ok(out)
        })?;
        let mut next: Vec<Labeling> = vec![Labeling::default(); pairs];
        for (k, l) in results.into_iter().flatten() {
            next[k] = l;
        }
        if level.len() % 2 == 1 {
            next.push(level.pop().expect("odd level"));
        }
        level = next;
    }
    Ok(())
}

/// Runs `f` on every worker, in parallel or in worker order.
fn for_each_worker<T, F>(workers: &mut [Worker], sequential: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Worker) -> Result<T> + Sync,
{
    if sequential {
        return workers.iter_mut().map(&f).collect();
    }
    thread::scope(|s| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|w| {
                let f = &f;
                s.spawn(move || f(w))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
