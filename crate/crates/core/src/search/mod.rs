//! The repair search: seven space generators feeding a coordinator that
//! evaluates candidates, trims the population with NSGA-II and stops at the
//! first plausible patches, plus the unguided random-search baseline.

mod eval;
mod nsga;
mod workers;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::detect::{detect_all, VulnKind};
use crate::gas::{dominance_levels, expected_gas_formula, GasFormula, DEFAULT_TRIP_CAP};
use crate::lang::{pretty_print, typecheck, Contract, ContractHash};
use crate::mutate::{apply_chain, Patch, SpaceId};
use crate::testgen::TestCase;
use crate::vm::{CostTable, VmConfig};

pub use eval::{eval, filter_plausible, verify_patch};
pub use nsga::{
    assign_gas_levels, crowding_distance, front_ranks, nsga2_select, objective_vector, pareto_dominates, pareto_fronts,
};

use eval::{EvalContext, Evaluated};
use workers::{Generator, Pool, Request};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Genetic,
    Urs,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genetic" => Ok(Mode::Genetic),
            "urs" => Ok(Mode::Urs),
            _ => Err(format!("unknown mode `{s}` (expected genetic or urs)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Genetic => "genetic",
            Mode::Urs => "urs",
        })
    }
}

pub const WORKER_COUNT: usize = 7;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub initial_population: usize,
    pub generation_size: usize,
    pub max_population: usize,
    pub max_bound: Duration,
    pub seed: u64,
    pub gas_objective: bool,
    pub gas_bound: Option<u64>,
    pub kinds: BTreeSet<VulnKind>,
    pub mode: Mode,
    pub gmax: bool,
    /// Serialize the generator race and evaluate on one thread.
    pub deterministic: bool,
    /// Evaluator threads; 0 uses the available parallelism.
    pub evaluators: usize,
    pub costs: CostTable,
    pub trip_cap: i128,
    /// Set from outside to stop the search early.
    pub stop: Option<Arc<AtomicBool>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            initial_population: 20,
            generation_size: 10,
            max_population: 40,
            max_bound: Duration::from_secs(3600),
            seed: 0,
            gas_objective: true,
            gas_bound: None,
            kinds: VulnKind::repairable(),
            mode: Mode::Genetic,
            gmax: false,
            deterministic: false,
            evaluators: 0,
            costs: CostTable::default(),
            trip_cap: DEFAULT_TRIP_CAP,
            stop: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.initial_population == 0 {
            return Err("initial population size must be at least 1".into());
        }
        if self.generation_size == 0 {
            return Err("generation size must be at least 1".into());
        }
        if self.max_population == 0 {
            return Err("maximum population size must be at least 1".into());
        }
        if self.max_bound.is_zero() {
            return Err("timeout must be positive".into());
        }
        if self.kinds.is_empty() {
            return Err("no vulnerability kinds targeted".into());
        }
        Ok(())
    }

    fn vm(&self) -> VmConfig {
        VmConfig { costs: self.costs.clone(), ..VmConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FitnessVector {
    pub vuln_count: u32,
    pub fail_count: u32,
    pub gas_level: u32,
    pub mut_distance: u32,
}

impl FitnessVector {
    /// No targeted vulnerability and no failing test.
    pub fn is_valid(&self) -> bool {
        self.vuln_count == 0 && self.fail_count == 0
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub patch: Patch,
    pub contract: Contract,
    pub hash: ContractHash,
    pub fitness: FitnessVector,
    pub space: Option<SpaceId>,
    pub generation: usize,
    pub parent: Option<ContractHash>,
    /// Expected-gas formula, filled in on demand.
    pub formula: Option<GasFormula>,
    bound_ok: Option<bool>,
}

impl Candidate {
    pub fn new(
        patch: Patch,
        contract: Contract,
        space: Option<SpaceId>,
        generation: usize,
        parent: Option<ContractHash>,
    ) -> Self {
        let hash = contract.content_hash();
        Candidate {
            patch,
            contract,
            hash,
            fitness: FitnessVector::default(),
            space,
            generation,
            parent,
            formula: None,
            bound_ok: None,
        }
    }

    pub fn original(c: &Contract) -> Self {
        Candidate::new(Patch::empty(c), c.clone(), None, 0, None)
    }

    /// Total order used to pick the best candidate: unmet requirements
    /// (vulnerabilities plus failing tests) first, then gas level, edit
    /// count and vulnerabilities, then content hash.
    pub fn order_key(&self) -> (u32, u32, u32, u32, ContractHash) {
        let f = &self.fitness;
        (f.vuln_count + f.fail_count, f.gas_level, f.mut_distance, f.vuln_count, self.hash)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    PlausibleFound,
    NoVulnerabilities,
    Timeout,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub initial_population: usize,
    pub generation_size: usize,
    pub max_population: usize,
    pub max_bound_secs: f64,
    pub seed: u64,
    pub gas_objective: bool,
    pub gas_bound: Option<u64>,
    pub kinds: Vec<VulnKind>,
    pub mode: Mode,
    pub gmax: bool,
    pub deterministic: bool,
    pub workers: usize,
}

impl From<&SearchConfig> for ConfigEcho {
    fn from(c: &SearchConfig) -> Self {
        ConfigEcho {
            initial_population: c.initial_population,
            generation_size: c.generation_size,
            max_population: c.max_population,
            max_bound_secs: c.max_bound.as_secs_f64(),
            seed: c.seed,
            gas_objective: c.gas_objective,
            gas_bound: c.gas_bound,
            kinds: c.kinds.iter().copied().collect(),
            mode: c.mode,
            gmax: c.gmax,
            deterministic: c.deterministic,
            workers: WORKER_COUNT,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceStats {
    pub generated: usize,
    pub evaluated: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub generations: usize,
    pub requests: usize,
    pub candidates_generated: usize,
    pub candidates_evaluated: usize,
    /// Mutants produced twice (same contract through another route).
    pub duplicates: usize,
    pub gmax_discarded: usize,
    pub per_space: BTreeMap<SpaceId, SpaceStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchReport {
    pub rank: usize,
    /// In the first front of the final ranking.
    pub preferred: bool,
    pub gas_level: Option<u32>,
    pub mutation_distance: u32,
    pub space: Option<SpaceId>,
    pub generation: usize,
    pub contract_hash: ContractHash,
    pub edits: Vec<String>,
    pub patch: Patch,
    pub expected_gas: Option<String>,
    /// Mean gas of the regression tests run on the patched contract.
    pub mean_test_gas: f64,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub tool_version: String,
    pub cost_table_hash: String,
    pub contract: String,
    pub contract_hash: ContractHash,
    pub config: ConfigEcho,
    pub outcome: Outcome,
    pub vulnerabilities_before: BTreeMap<String, usize>,
    /// Counts on the first preferred patch, if any.
    pub vulnerabilities_after: Option<BTreeMap<String, usize>>,
    pub plausible: Vec<PatchReport>,
    /// Plausible candidates dropped by the post-search check.
    pub failed_verification: usize,
    pub stats: SearchStats,
    /// Wall-clock time; omitted in deterministic mode.
    pub elapsed_ms: Option<u64>,
}

impl RepairReport {
    pub fn preferred(&self) -> impl Iterator<Item = &PatchReport> {
        self.plausible.iter().filter(|p| p.preferred)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract does not type check: {0}")]
    TypeCheck(String),
}

fn kind_counts(c: &Contract, kinds: &BTreeSet<VulnKind>) -> BTreeMap<String, usize> {
    let r = detect_all(c, kinds);
    kinds.iter().map(|k| (k.to_string(), r.count_of(*k))).collect()
}

struct Coordinator<'a> {
    cfg: &'a SearchConfig,
    original: &'a Contract,
    tests: &'a [TestCase],
    vm: VmConfig,
    stop: Arc<AtomicBool>,
    deadline: Instant,
    pool: Pool,
    stats: SearchStats,
    seen: HashSet<ContractHash>,
    exhausted: HashSet<ContractHash>,
    gmax: Mutex<Option<GasFormula>>,
}

impl<'a> Coordinator<'a> {
    fn new(original: &'a Contract, tests: &'a [TestCase], cfg: &'a SearchConfig, start: Instant) -> Self {
        let stop = cfg.stop.clone().unwrap_or_default();
        let deadline = start + cfg.max_bound;
        let shared = Arc::new(original.clone());
        let gens = SpaceId::ALL
            .into_iter()
            .map(|s| Generator::new(s, Arc::clone(&shared), cfg.kinds.clone(), cfg.seed))
            .collect();
        let pool = Pool::new(gens, cfg.deterministic, Arc::clone(&stop), deadline);
        let mut stats = SearchStats::default();
        for s in SpaceId::ALL {
            stats.per_space.insert(s, SpaceStats::default());
        }
        let seen = [original.content_hash()].into_iter().collect();
        Coordinator {
            cfg,
            original,
            tests,
            vm: cfg.vm(),
            stop,
            deadline,
            pool,
            stats,
            seen,
            exhausted: HashSet::new(),
            gmax: Mutex::new(None),
        }
    }

    fn out_of_time(&self) -> bool {
        self.stop.load(std::sync::atomic::Ordering::Relaxed) || Instant::now() >= self.deadline
    }

    /// Up to `n` fresh mutants of `base`. Marks the base exhausted when no
    /// generator can produce more.
    fn gather(&mut self, base: &Candidate, n: usize) -> Vec<Candidate> {
        let base = Arc::new(base.clone());
        let mut out = Vec::new();
        for _ in 0..n {
            self.stats.requests += 1;
            match self.pool.request(&base, &self.stop, self.deadline) {
                Request::Won(c) => {
                    self.stats.candidates_generated += 1;
                    if let Some(s) = c.space {
                        self.stats.per_space.entry(s).or_default().generated += 1;
                    }
                    if self.seen.insert(c.hash) {
                        out.push(c);
                    } else {
                        self.stats.duplicates += 1;
                    }
                }
                Request::Exhausted => {
                    self.exhausted.insert(base.hash);
                    break;
                }
                Request::Stopped => break,
            }
        }
        out
    }

    fn context(&self, short_circuit: bool) -> EvalContext<'_> {
        EvalContext {
            kinds: &self.cfg.kinds,
            tests: self.tests,
            vm: &self.vm,
            costs: &self.cfg.costs,
            bound: self.cfg.gas_bound,
            trip_cap: self.cfg.trip_cap,
            short_circuit,
            parallel: !self.cfg.deterministic,
            gmax: self.cfg.gmax.then_some(&self.gmax),
        }
    }

    fn evaluate(&mut self, batch: Vec<Candidate>, short_circuit: bool) -> Vec<Candidate> {
        let mut todo = Vec::new();
        for c in batch {
            // Leave the rest unevaluated once the budget is spent.
            if self.out_of_time() {
                break;
            }
            todo.push(c);
        }
        let results = self.context(short_circuit).evaluate_batch(todo);
        let mut out = Vec::new();
        for r in results {
            match r {
                Evaluated::Done(c) => {
                    self.stats.candidates_evaluated += 1;
                    if let Some(s) = c.space {
                        self.stats.per_space.entry(s).or_default().evaluated += 1;
                    }
                    out.push(c);
                }
                Evaluated::Discarded => self.stats.gmax_discarded += 1,
            }
        }
        out
    }

    fn genetic(&mut self) -> (Outcome, Vec<Candidate>) {
        let cfg = self.cfg;
        let mut root = Candidate::original(self.original);
        root.fitness = eval(&root.contract, &root.patch, &cfg.kinds, self.tests, &self.vm);
        let mut population = vec![root.clone()];
        let mut batch = self.gather(&root, cfg.initial_population);
        loop {
            let evaluated = self.evaluate(batch, false);
            population.extend(evaluated);
            let plausible = filter_plausible(&mut population, cfg.gas_bound, &cfg.costs, cfg.trip_cap);
            if !plausible.is_empty() {
                return (Outcome::PlausibleFound, plausible);
            }
            if self.out_of_time() {
                return (Outcome::Timeout, Vec::new());
            }
            population = nsga2_select(population, cfg.max_population, cfg.gas_objective, &cfg.costs);
            let mut order: Vec<&Candidate> = population.iter().collect();
            order.sort_by_key(|c| c.order_key());
            let Some(base) = order.into_iter().find(|c| !self.exhausted.contains(&c.hash)).cloned() else {
                return (Outcome::Exhausted, Vec::new());
            };
            self.stats.generations += 1;
            log::debug!("generation {}: base {} fitness {:?}", self.stats.generations, base.hash.short(), base.fitness);
            batch = self.gather(&base, cfg.generation_size);
        }
    }

    fn urs(&mut self) -> (Outcome, Vec<Candidate>) {
        let cfg = self.cfg;
        let root = Candidate::original(self.original);
        let mut retained: Vec<Candidate> = Vec::new();
        let mut n = cfg.initial_population;
        loop {
            let batch = self.gather(&root, n);
            n = cfg.generation_size;
            let mut evaluated = self.evaluate(batch, true);
            let plausible = filter_plausible(&mut evaluated, cfg.gas_bound, &cfg.costs, cfg.trip_cap);
            if !plausible.is_empty() {
                return (Outcome::PlausibleFound, plausible);
            }
            if self.out_of_time() {
                return (Outcome::Timeout, Vec::new());
            }
            if self.exhausted.contains(&root.hash) {
                return (Outcome::Exhausted, Vec::new());
            }
            self.stats.generations += 1;
            retained.extend(evaluated);
            retained.sort_by_key(|c| c.order_key());
            retained.truncate(cfg.max_population);
        }
    }
}

/// Ranks plausible patches: gas dominance level and edit count when the gas
/// objective is on, edit count alone otherwise. Returns (front, level) per
/// candidate.
fn rank_plausible(cands: &mut [Candidate], cfg: &SearchConfig) -> Vec<(usize, Option<u32>)> {
    for c in cands.iter_mut() {
        if c.formula.is_none() {
            c.formula = expected_gas_formula(&c.contract, &cfg.costs, None).ok();
        }
    }
    let known: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].formula.is_some()).collect();
    let formulas: Vec<GasFormula> = known.iter().map(|&i| cands[i].formula.clone().expect("known")).collect();
    let lv = dominance_levels(&formulas);
    let mut levels: Vec<Option<u32>> = vec![None; cands.len()];
    for (i, l) in known.into_iter().zip(lv) {
        levels[i] = Some(l as u32);
    }
    let worst = levels.iter().flatten().copied().max().unwrap_or(0) + 1;
    let objs: Vec<Vec<u64>> = cands
        .iter()
        .zip(&levels)
        .map(|(c, l)| {
            let d = c.fitness.mut_distance as u64;
            if cfg.gas_objective {
                vec![l.unwrap_or(worst) as u64, d]
            } else {
                vec![d]
            }
        })
        .collect();
    pareto_fronts(&objs).into_iter().zip(levels).collect()
}

fn describe_edits(original: &Contract, p: &Patch) -> Vec<String> {
    match apply_chain(original, &p.edits) {
        Ok(chain) => p.edits.iter().zip(&chain).map(|(e, c)| e.describe(c)).collect(),
        Err(_) => p.edits.iter().map(|e| e.describe(original)).collect(),
    }
}

/// Searches for plausible patches of `c` against the regression tests.
pub fn repair(c: &Contract, tests: &[TestCase], cfg: &SearchConfig) -> Result<RepairReport, SearchError> {
    cfg.validate().map_err(SearchError::Config)?;
    typecheck(c).map_err(|e| SearchError::TypeCheck(e.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")))?;
    let start = Instant::now();
    let before = kind_counts(c, &cfg.kinds);
    let mut report = RepairReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        cost_table_hash: cfg.costs.hash(),
        contract: c.name.clone(),
        contract_hash: c.content_hash(),
        config: ConfigEcho::from(cfg),
        outcome: Outcome::NoVulnerabilities,
        vulnerabilities_before: before.clone(),
        vulnerabilities_after: None,
        plausible: Vec::new(),
        failed_verification: 0,
        stats: SearchStats::default(),
        elapsed_ms: None,
    };
    if before.values().all(|n| *n == 0) {
        report.vulnerabilities_after = Some(before);
        report.elapsed_ms = (!cfg.deterministic).then(|| start.elapsed().as_millis() as u64);
        return Ok(report);
    }
    let run = |co: &mut Coordinator| match cfg.mode {
        Mode::Genetic => co.genetic(),
        Mode::Urs => co.urs(),
    };
    let (outcome, mut found, stats) = {
        let mut co = Coordinator::new(c, tests, cfg, start);
        let (o, f) = if cfg.deterministic || cfg.evaluators == 0 {
            run(&mut co)
        } else {
            match rayon::ThreadPoolBuilder::new().num_threads(cfg.evaluators).build() {
                Ok(pool) => pool.install(|| run(&mut co)),
                Err(_) => run(&mut co),
            }
        };
        (o, f, co.stats.clone())
    };
    report.stats = stats;
    report.outcome = outcome;

    let vm = cfg.vm();
    let mut verified = Vec::new();
    let mut means = Vec::new();
    for cand in found.drain(..) {
        match verify_patch(c, &cand.patch, &cfg.kinds, tests, &vm, cfg.gas_bound, cfg.trip_cap) {
            Ok((_, mean)) => {
                verified.push(cand);
                means.push(mean);
            }
            Err(e) => {
                log::warn!("dropping candidate {}: {e}", cand.hash.short());
                report.failed_verification += 1;
            }
        }
    }
    let ranks = rank_plausible(&mut verified, cfg);
    let mut rows: Vec<PatchReport> = verified
        .iter()
        .zip(ranks)
        .zip(means)
        .map(|((cand, (rank, level)), mean)| PatchReport {
            rank,
            preferred: rank == 1,
            gas_level: level,
            mutation_distance: cand.fitness.mut_distance,
            space: cand.space,
            generation: cand.generation,
            contract_hash: cand.hash,
            edits: describe_edits(c, &cand.patch),
            patch: cand.patch.clone(),
            expected_gas: cand.formula.as_ref().map(|f| f.to_string()),
            mean_test_gas: mean,
            source: pretty_print(&cand.contract),
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.rank, a.gas_level, a.mutation_distance, a.contract_hash).cmp(&(
            b.rank,
            b.gas_level,
            b.mutation_distance,
            b.contract_hash,
        ))
    });
    if rows.is_empty() && report.outcome == Outcome::PlausibleFound {
        report.outcome = Outcome::Exhausted;
    }
    if let Some(top) = verified.iter().find(|v| rows.first().is_some_and(|r| r.contract_hash == v.hash)) {
        report.vulnerabilities_after = Some(kind_counts(&top.contract, &cfg.kinds));
    }
    report.plausible = rows;
    report.elapsed_ms = (!cfg.deterministic).then(|| start.elapsed().as_millis() as u64);
    Ok(report)
}

#[cfg(test)]
mod tests;
