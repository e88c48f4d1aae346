use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Candidate;
use crate::detect::{detect_all, VulnKind};
use crate::lang::{typecheck, Contract, ContractHash};
use crate::mutate::{space_validity, OpTag, Sampler, SpaceId, Validity};

/// Result of one sampling attempt.
#[allow(clippy::large_enum_variant)]
pub(crate) enum Step {
    Produced(Candidate),
    Rejected,
    Exhausted,
}

struct BaseState {
    sampler: Sampler,
    ops: Vec<OpTag>,
    rng: ChaCha8Rng,
}

/// One space's mutant generator. Keeps a sampler, and so a seen-set, per
/// base it has been asked to mutate.
pub(crate) struct Generator {
    space: SpaceId,
    original: Arc<Contract>,
    kinds: BTreeSet<VulnKind>,
    seed: u64,
    bases: HashMap<ContractHash, BaseState>,
}

const MAX_BASES: usize = 256;

/// Operators this space may apply to a base with the given trace: the one
/// missing operator if exactly one is missing, any of its operators if none
/// is, and nothing otherwise.
pub(crate) fn usable_ops(space: SpaceId, trace: &[OpTag]) -> Vec<OpTag> {
    let have: BTreeSet<OpTag> = trace.iter().copied().collect();
    let want: BTreeSet<OpTag> = space.ops().iter().copied().collect();
    if !have.is_subset(&want) {
        return Vec::new();
    }
    let missing: Vec<OpTag> = want.difference(&have).copied().collect();
    match missing.len() {
        0 => want.into_iter().collect(),
        1 => missing,
        _ => Vec::new(),
    }
}

impl Generator {
    pub(crate) fn new(space: SpaceId, original: Arc<Contract>, kinds: BTreeSet<VulnKind>, seed: u64) -> Self {
        let seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (space.index() as u64 + 1);
        Generator { space, original, kinds, seed, bases: HashMap::new() }
    }

    pub(crate) fn space(&self) -> SpaceId {
        self.space
    }

    fn state(&mut self, base: &Candidate) -> &mut BaseState {
        if self.bases.len() >= MAX_BASES && !self.bases.contains_key(&base.hash) {
            self.bases.clear();
        }
        let (space, kinds, seed) = (self.space, &self.kinds, self.seed);
        self.bases.entry(base.hash).or_insert_with(|| {
            let hints = detect_all(&base.contract, kinds).locations();
            let mut key = [0u8; 32];
            key[..8].copy_from_slice(&seed.to_le_bytes());
            key[8..].copy_from_slice(&base.hash.0[..24]);
            BaseState {
                sampler: Sampler::new(base.contract.clone(), base.patch.clone(), hints, seed),
                ops: usable_ops(space, &base.patch.operator_trace()),
                rng: ChaCha8Rng::from_seed(key),
            }
        })
    }

    /// One sampling attempt on `base`.
    pub(crate) fn step(&mut self, base: &Candidate) -> Step {
        let space = self.space;
        let original = Arc::clone(&self.original);
        let st = self.state(base);
        let Some(&op) = st.ops.choose(&mut st.rng) else { return Step::Exhausted };
        let Some(s) = st.sampler.next(op) else {
            st.ops.retain(|o| *o != op);
            return if st.ops.is_empty() { Step::Exhausted } else { Step::Rejected };
        };
        if typecheck(&s.contract).is_err() || space_validity(space, &s.patch, &original) != Validity::Accept {
            return Step::Rejected;
        }
        Step::Produced(Candidate::new(s.patch, s.contract, Some(space), base.generation + 1, Some(base.hash)))
    }
}

/// Outcome of one generation request.
#[allow(clippy::large_enum_variant)]
pub(crate) enum Request {
    Won(Candidate),
    /// Every worker ran out of mutants for this base.
    Exhausted,
    /// Deadline or external stop.
    Stopped,
}

pub(crate) struct Job {
    id: u64,
    base: Arc<Candidate>,
    cancel: Arc<AtomicBool>,
}

#[allow(clippy::large_enum_variant)]
pub(crate) enum Reply {
    Won(Candidate),
    Exhausted,
    Cancelled,
}

/// The seven generators, either racing on threads or polled in turn.
pub(crate) enum Pool {
    Serial {
        gens: Vec<Generator>,
        dead: Vec<bool>,
        next: usize,
    },
    Threads {
        jobs: Vec<Sender<Job>>,
        replies: Receiver<(u64, Reply)>,
        handles: Vec<JoinHandle<()>>,
        next_id: u64,
        /// Mutants that arrived after their request was already won. They are
        /// already in their generator's seen-set, so they are served to later
        /// requests on the same base instead of being lost.
        late: Vec<Candidate>,
    },
}

const MAX_LATE: usize = 1024;

fn stopped(stop: &AtomicBool, deadline: Instant) -> bool {
    stop.load(Ordering::Relaxed) || Instant::now() >= deadline
}

fn worker_loop(
    mut g: Generator,
    jobs: Receiver<Job>,
    replies: Sender<(u64, Reply)>,
    stop: Arc<AtomicBool>,
    deadline: Instant,
) {
    let mut dead = false;
    while let Ok(job) = jobs.recv() {
        let reply = loop {
            if dead {
                break Reply::Exhausted;
            }
            if job.cancel.load(Ordering::Relaxed) || stopped(&stop, deadline) {
                break Reply::Cancelled;
            }
            match catch_unwind(AssertUnwindSafe(|| g.step(&job.base))) {
                Ok(Step::Produced(c)) => break Reply::Won(c),
                Ok(Step::Rejected) => {}
                Ok(Step::Exhausted) => break Reply::Exhausted,
                Err(_) => {
                    log::error!("generator for {} crashed; its space is retired", g.space());
                    dead = true;
                }
            }
        };
        if replies.send((job.id, reply)).is_err() {
            return;
        }
    }
}

impl Pool {
    pub(crate) fn new(gens: Vec<Generator>, deterministic: bool, stop: Arc<AtomicBool>, deadline: Instant) -> Pool {
        if deterministic {
            let n = gens.len();
            return Pool::Serial { gens, dead: vec![false; n], next: 0 };
        }
        let (reply_tx, replies) = channel();
        let mut jobs = Vec::new();
        let mut handles = Vec::new();
        for g in gens {
            let (tx, rx) = channel();
            let (reply_tx, stop) = (reply_tx.clone(), Arc::clone(&stop));
            let name = format!("gen-{}", g.space());
            let h = std::thread::Builder::new()
                .name(name)
                .spawn(move || worker_loop(g, rx, reply_tx, stop, deadline))
                .expect("spawn generator thread");
            jobs.push(tx);
            handles.push(h);
        }
        Pool::Threads { jobs, replies, handles, next_id: 0, late: Vec::new() }
    }

    /// Asks every generator for a mutant of `base`; the first one produced wins.
    pub(crate) fn request(&mut self, base: &Arc<Candidate>, stop: &AtomicBool, deadline: Instant) -> Request {
        match self {
            Pool::Serial { gens, dead, next } => {
                let n = gens.len();
                let mut alive: Vec<bool> = dead.iter().map(|d| !d).collect();
                let start = *next;
                while alive.iter().any(|a| *a) {
                    for k in 0..n {
                        if stopped(stop, deadline) {
                            return Request::Stopped;
                        }
                        let i = (start + k) % n;
                        if !alive[i] {
                            continue;
                        }
                        match catch_unwind(AssertUnwindSafe(|| gens[i].step(base))) {
                            Ok(Step::Produced(c)) => {
                                *next = (i + 1) % n;
                                return Request::Won(c);
                            }
                            Ok(Step::Rejected) => {}
                            Ok(Step::Exhausted) => alive[i] = false,
                            Err(_) => {
                                log::error!("generator for {} crashed; its space is retired", gens[i].space());
                                dead[i] = true;
                                alive[i] = false;
                            }
                        }
                    }
                }
                *next = (start + 1) % n;
                Request::Exhausted
            }
            Pool::Threads { jobs, replies, next_id, late, .. } => {
                if let Some(i) = late.iter().position(|c| c.parent == Some(base.hash)) {
                    return Request::Won(late.remove(i));
                }
                *next_id += 1;
                let id = *next_id;
                let cancel = Arc::new(AtomicBool::new(false));
                for tx in jobs.iter() {
                    let job = Job { id, base: Arc::clone(base), cancel: Arc::clone(&cancel) };
                    if tx.send(job).is_err() {
                        return Request::Stopped;
                    }
                }
                let mut pending = jobs.len();
                let mut any_cancelled = false;
                while pending > 0 {
                    match replies.recv_timeout(Duration::from_millis(50)) {
                        Ok((rid, Reply::Won(c))) if rid != id => {
                            if late.len() >= MAX_LATE {
                                late.remove(0);
                            }
                            late.push(c);
                        }
                        Ok((rid, _)) if rid != id => {}
                        Ok((_, Reply::Won(c))) => {
                            cancel.store(true, Ordering::Relaxed);
                            return Request::Won(c);
                        }
                        Ok((_, Reply::Exhausted)) => pending -= 1,
                        Ok((_, Reply::Cancelled)) => {
                            any_cancelled = true;
                            pending -= 1;
                        }
                        Err(RecvTimeoutError::Timeout) => {}
                        Err(RecvTimeoutError::Disconnected) => return Request::Stopped,
                    }
                }
                if any_cancelled {
                    Request::Stopped
                } else {
                    Request::Exhausted
                }
            }
        }
    }
}

impl Drop for Pool {
    fn drop(&mut self) {
        if let Pool::Threads { jobs, handles, .. } = self {
            jobs.clear();
            for h in handles.drain(..) {
                let _ = h.join();
            }
        }
    }
}
