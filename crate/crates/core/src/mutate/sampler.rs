use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::enumerate::{enumerate_edits, Candidate};
use super::{apply_edit, OpTag, Patch};
use crate::lang::*;

/// One fresh mutant drawn from a sampler.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub patch: Patch,
    pub contract: Contract,
    pub tier: u8,
}

struct Queue {
    items: Vec<Candidate>,
    next: usize,
}

/// Draws unseen single-edit mutants of a fixed base, per operator.
///
/// Candidates are taken tier by tier (hinted sites first); order within a
/// tier is a seeded shuffle, so a given seed and base always produce the same
/// sequence for each operator. Results structurally equal to the base or to
/// an earlier result are skipped.
pub struct Sampler {
    base: Contract,
    base_hash: ContractHash,
    patch: Patch,
    hints: Vec<NodePath>,
    seed: u64,
    queues: BTreeMap<OpTag, Queue>,
    seen: HashSet<ContractHash>,
}

impl Sampler {
    /// `patch` is the chain that produced `base` from the original contract;
    /// drawn edits extend it.
    pub fn new(base: Contract, patch: Patch, hints: Vec<NodePath>, seed: u64) -> Self {
        let base_hash = base.content_hash();
        let mut seen = HashSet::new();
        seen.insert(base_hash);
        Sampler { base, base_hash, patch, hints, seed, queues: BTreeMap::new(), seen }
    }

    pub fn base(&self) -> &Contract {
        &self.base
    }

    pub fn base_patch(&self) -> &Patch {
        &self.patch
    }

    fn queue(&mut self, op: OpTag) -> &mut Queue {
        let (base, hints, seed, generation) = (&self.base, &self.hints, self.seed, self.patch.next_generation());
        let base_hash = self.base_hash;
        self.queues.entry(op).or_insert_with(|| {
            let mut items = enumerate_edits(base, op, generation, hints);
            let mut key = [0u8; 32];
            key[..8].copy_from_slice(&seed.to_le_bytes());
            key[8] = op as u8;
            key[16..].copy_from_slice(&base_hash.0[..16]);
            let mut rng = ChaCha8Rng::from_seed(key);
            let mut start = 0;
            while start < items.len() {
                let tier = items[start].tier;
                let end = start + items[start..].iter().take_while(|c| c.tier == tier).count();
                items[start..end].shuffle(&mut rng);
                start = end;
            }
            Queue { items, next: 0 }
        })
    }

    /// Next unseen mutant for `op`, or `None` once every edit is consumed.
    pub fn next(&mut self, op: OpTag) -> Option<Sampled> {
        loop {
            let q = self.queue(op);
            let cand = q.items.get(q.next)?.clone();
            q.next += 1;
            let k = self.patch.next_generation() as usize;
            let Ok(contract) = apply_edit(&self.base, &cand.edit, k) else { continue };
            if !self.seen.insert(contract.content_hash()) {
                continue;
            }
            return Some(Sampled { patch: self.patch.extended(cand.edit), contract, tier: cand.tier });
        }
    }

    /// Total candidate edits for `op` (consumed or not).
    pub fn candidate_count(&mut self, op: OpTag) -> usize {
        self.queue(op).items.len()
    }

    pub fn is_exhausted(&mut self, op: OpTag) -> bool {
        let q = self.queue(op);
        q.next >= q.items.len()
    }
}
