use std::cmp::Ordering;

use super::Candidate;
use crate::gas::{dominance_levels, expected_gas_formula};
use crate::vm::CostTable;

/// `a` Pareto-dominates `b` under minimization.
pub fn pareto_dominates(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Fast non-dominated sort. Returns the 1-based front of every vector.
pub fn pareto_fronts(objs: &[Vec<u64>]) -> Vec<usize> {
    let n = objs.len();
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if pareto_dominates(&objs[i], &objs[j]) {
                dominates[i].push(j);
                count[j] += 1;
            } else if pareto_dominates(&objs[j], &objs[i]) {
                dominates[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    let mut level = 1;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = level;
            for &j in &dominates[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        level += 1;
    }
    rank
}

/// Crowding distance of each member of one front; boundary points get infinity.
#[allow(clippy::needless_range_loop)]
pub fn crowding_distance(objs: &[Vec<u64>], members: &[usize]) -> Vec<f64> {
    let n = members.len();
    let mut dist = vec![0.0f64; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = objs[members[0]].len();
    for k in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| objs[members[i]][k]);
        let lo = objs[members[order[0]]][k];
        let hi = objs[members[order[n - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi == lo {
            continue;
        }
        let span = (hi - lo) as f64;
        for w in 1..n - 1 {
            let gap = objs[members[order[w + 1]]][k] - objs[members[order[w - 1]]][k];
            dist[order[w]] += gap as f64 / span;
        }
    }
    dist
}

/// Recomputes dominance levels over the fully valid candidates. Candidates
/// whose formula cannot be derived share the level after the last one.
pub fn assign_gas_levels(pop: &mut [Candidate], costs: &CostTable) {
    let valid: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_valid()).collect();
    for c in pop.iter_mut() {
        c.fitness.gas_level = 0;
    }
    let mut with_formula = Vec::new();
    let mut formulas = Vec::new();
    for &i in &valid {
        if pop[i].formula.is_none() {
            pop[i].formula = expected_gas_formula(&pop[i].contract, costs, None).ok();
        }
        if let Some(f) = &pop[i].formula {
            with_formula.push(i);
            formulas.push(f.clone());
        }
    }
    let levels = dominance_levels(&formulas);
    let worst = levels.iter().copied().max().unwrap_or(0) + 1;
    for &i in &valid {
        pop[i].fitness.gas_level = worst as u32;
    }
    for (i, l) in with_formula.into_iter().zip(levels) {
        pop[i].fitness.gas_level = l as u32;
    }
}

fn primary(c: &Candidate) -> Vec<u64> {
    vec![c.fitness.vuln_count as u64, c.fitness.fail_count as u64]
}

fn secondary(c: &Candidate, gas_objective: bool) -> Vec<u64> {
    if gas_objective {
        vec![c.fitness.gas_level as u64, c.fitness.mut_distance as u64]
    } else {
        vec![c.fitness.mut_distance as u64]
    }
}

/// Objective vector used for ranking: valid candidates are compared on the
/// secondary objectives, the rest on the primary ones.
pub fn objective_vector(c: &Candidate, gas_objective: bool) -> Vec<u64> {
    if c.fitness.is_valid() {
        secondary(c, gas_objective)
    } else {
        primary(c)
    }
}

/// Front of every candidate. Valid candidates all sit in the first primary
/// front, which is refined by the secondary objectives; invalid candidates
/// follow in their primary fronts.
pub fn front_ranks(pop: &[Candidate], gas_objective: bool) -> Vec<usize> {
    let valid: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_valid()).collect();
    let invalid: Vec<usize> = (0..pop.len()).filter(|&i| !pop[i].fitness.is_valid()).collect();
    let vr = pareto_fronts(&valid.iter().map(|&i| secondary(&pop[i], gas_objective)).collect::<Vec<_>>());
    let ir = pareto_fronts(&invalid.iter().map(|&i| primary(&pop[i])).collect::<Vec<_>>());
    let offset = vr.iter().copied().max().unwrap_or(0);
    let mut rank = vec![0; pop.len()];
    for (i, r) in valid.into_iter().zip(vr) {
        rank[i] = r;
    }
    for (i, r) in invalid.into_iter().zip(ir) {
        rank[i] = offset + r;
    }
    rank
}

/// Trims `pop` to at most `psize` by admitting whole fronts in order and
/// cutting the last admitted front by crowding distance. The result is
/// ordered by front, then by [`Candidate::order_key`].
pub fn nsga2_select(mut pop: Vec<Candidate>, psize: usize, gas_objective: bool, costs: &CostTable) -> Vec<Candidate> {
    if gas_objective {
        assign_gas_levels(&mut pop, costs);
    }
    let ranks = front_ranks(&pop, gas_objective);
    let objs: Vec<Vec<u64>> = pop.iter().map(|c| objective_vector(c, gas_objective)).collect();
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    let mut keep: Vec<(usize, usize)> = Vec::new();
    for r in 1..=max_rank {
        let mut front: Vec<usize> = (0..pop.len()).filter(|&i| ranks[i] == r).collect();
        if keep.len() + front.len() > psize {
            let cd = crowding_distance(&objs, &front);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| {
                cd[b]
                    .partial_cmp(&cd[a])
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| pop[front[a]].order_key().cmp(&pop[front[b]].order_key()))
            });
            front = order.into_iter().take(psize - keep.len()).map(|k| front[k]).collect();
        }
        keep.extend(front.into_iter().map(|i| (r, i)));
        if keep.len() >= psize {
            break;
        }
    }
    keep.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| pop[a.1].order_key().cmp(&pop[b.1].order_key())));
    let mut slots: Vec<Option<Candidate>> = pop.into_iter().map(Some).collect();
    keep.into_iter().map(|(_, i)| slots[i].take().expect("each index kept once")).collect()
}
