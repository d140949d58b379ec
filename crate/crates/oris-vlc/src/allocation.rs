//! Max-min optical-SNR assignment of ORIS elements to (AP, photodiode,
//! user) triples.
//!
//! The optical SNR of a user is linear in the assignment variables, which
//! makes the max-min problem an integer program. Three solvers are
//! provided:
//!
//! - [`brute_force`] — exhaustive oracle for small instances;
//! - [`branch_and_bound`] — exact depth-first search with an admissible
//!   bound, usable up to a few tens of elements;
//! - [`greedy`] — fast heuristic for full-scale scenes, always feasible
//!   and never worse than assigning nothing.
//!
//! The select-best constraints are enforced implicitly: solvers recompute
//! the per-user maximum exactly instead of carrying big-M rows, and
//! [`verify_solution`] certifies the allocation constraints on any output.
//!
//! All solvers share one canonical evaluation path ([`evaluate`]), which
//! accumulates element contributions in ascending element order so that
//! equal allocations produce bitwise-equal objectives.

use crate::channel::{Allocation, Assignment, GainTables, LinkBudget};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("enumeration needs {required:.3e} assignments, budget is {budget:.3e}")]
    EnumerationBudgetExceeded { required: f64, budget: f64 },
    #[error("exact search gated to {cap} effective elements, instance has {elements}; use the greedy solver")]
    ExactSizeCapExceeded { elements: usize, cap: usize },
}

/// Max-min assignment problem in optical-SNR units.
///
/// `base[n][u]` is the optical SNR of chain (n, u) from LoS and diffuse
/// wall paths alone; `contrib[l][k][n][u]` is the optical-SNR increment if
/// element k is assigned to (l, n, u). Blockage indicators are already
/// folded in, so blocked triples are zero.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub aps: usize,
    pub elements: usize,
    pub photodiodes: usize,
    pub users: usize,
    base: Vec<f64>,
    contrib: Vec<f64>,
}

impl AllocationProblem {
    /// Build from explicit values; `base` is indexed `[n][u]` flattened as
    /// `n * users + u`, `contrib` as `((l * elements + k) * photodiodes + n)
    /// * users + u`.
    pub fn from_values(
        aps: usize,
        elements: usize,
        photodiodes: usize,
        users: usize,
        base: Vec<f64>,
        contrib: Vec<f64>,
    ) -> Self {
        assert_eq!(base.len(), photodiodes * users);
        assert_eq!(contrib.len(), aps * elements * photodiodes * users);
        assert!(base.iter().chain(contrib.iter()).all(|v| *v >= 0.0));
        Self {
            aps,
            elements,
            photodiodes,
            users,
            base,
            contrib,
        }
    }

    pub fn base(&self, n: usize, u: usize) -> f64 {
        self.base[n * self.users + u]
    }

    pub fn contrib(&self, l: usize, k: usize, n: usize, u: usize) -> f64 {
        self.contrib[((l * self.elements + k) * self.photodiodes + n) * self.users + u]
    }

    /// Largest contribution of element `k` to chain (n, u) over APs, with
    /// the lowest achieving AP index.
    fn best_ap(&self, k: usize, n: usize, u: usize) -> (f64, usize) {
        let mut best = (0.0, 0);
        for l in 0..self.aps {
            let c = self.contrib(l, k, n, u);
            if c > best.0 {
                best = (c, l);
            }
        }
        best
    }

    fn max_contrib_of_element(&self, k: usize) -> f64 {
        let mut best = 0.0f64;
        for l in 0..self.aps {
            for n in 0..self.photodiodes {
                for u in 0..self.users {
                    best = best.max(self.contrib(l, k, n, u));
                }
            }
        }
        best
    }
}

/// Convert gain tables into optical-SNR units:
/// `γ' = ρ · P_sc · ΣH / √(N₀B)`, so base and contributions add linearly.
pub fn build_problem(tables: &GainTables, budget: &LinkBudget) -> AllocationProblem {
    let noise = (budget.noise_psd * budget.bandwidth).sqrt();
    let scale = |u: usize| tables.responsivity[u] * budget.power_per_subcarrier / noise;
    let (aps, elements, photodiodes, users) = (
        tables.aps,
        tables.oris_count,
        tables.photodiodes,
        tables.users,
    );
    let mut base = vec![0.0; photodiodes * users];
    for n in 0..photodiodes {
        for u in 0..users {
            let sum: f64 = (0..aps)
                .map(|l| tables.los(l, n, u) + tables.wall_nlos(l, n, u))
                .sum();
            base[n * users + u] = scale(u) * sum;
        }
    }
    let mut contrib = vec![0.0; aps * elements * photodiodes * users];
    for l in 0..aps {
        for k in 0..elements {
            for n in 0..photodiodes {
                for u in 0..users {
                    contrib[((l * elements + k) * photodiodes + n) * users + u] =
                        scale(u) * tables.oris_contrib(l, k, n, u);
                }
            }
        }
    }
    AllocationProblem::from_values(aps, elements, photodiodes, users, base, contrib)
}

/// Certified upper bound on any user's optical SNR: the largest base value
/// plus every element's largest possible contribution.
pub fn big_m(problem: &AllocationProblem) -> f64 {
    let max_base = problem.base.iter().cloned().fold(0.0f64, f64::max);
    let total: f64 = (0..problem.elements)
        .map(|k| problem.max_contrib_of_element(k))
        .sum();
    max_base + total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    Heuristic,
    InfeasibleDegenerate,
}

/// Solver output: the allocation, the achieved min-user optical SNR, and
/// the photodiode selected for each user.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub allocation: Allocation,
    /// Achieved `min_u max_n` optical SNR.
    pub objective: f64,
    /// Select-best photodiode per user.
    pub selected_photodiode: Vec<usize>,
    /// Optical SNR per user under the allocation.
    pub per_user_optical_snr: Vec<f64>,
    pub status: SolverStatus,
    /// Users left at zero optical SNR (fully blocked or out of view).
    pub outage_users: Vec<usize>,
}

/// Flat serialization entry: element k assigned to (AP, photodiode, user).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub element: usize,
    pub ap: usize,
    pub photodiode: usize,
    pub user: usize,
}

/// JSON form of a solver result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub objective: f64,
    pub status: SolverStatus,
    pub allocation: Vec<AllocationEntry>,
    pub selected_photodiode: Vec<usize>,
    pub per_user_optical_snr: Vec<f64>,
    pub outage_users: Vec<usize>,
}

impl SolverResult {
    pub fn entries(&self) -> Vec<AllocationEntry> {
        self.allocation
            .assignment
            .iter()
            .enumerate()
            .filter_map(|(k, a)| {
                a.map(|a| AllocationEntry {
                    element: k,
                    ap: a.ap,
                    photodiode: a.photodiode,
                    user: a.user,
                })
            })
            .collect()
    }

    pub fn report(&self) -> SolverReport {
        SolverReport {
            objective: self.objective,
            status: self.status,
            allocation: self.entries(),
            selected_photodiode: self.selected_photodiode.clone(),
            per_user_optical_snr: self.per_user_optical_snr.clone(),
            outage_users: self.outage_users.clone(),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.report())
    }

    /// Elements whose contribution feeds the selected photodiode of their
    /// user with a nonzero gain; elements parked on non-selected chains do
    /// not count as used.
    pub fn elements_used(&self, problem: &AllocationProblem) -> usize {
        self.allocation
            .assignment
            .iter()
            .enumerate()
            .filter(|(k, a)| match a {
                Some(a) => {
                    a.photodiode == self.selected_photodiode[a.user]
                        && problem.contrib(a.ap, *k, a.photodiode, a.user) > 0.0
                }
                None => false,
            })
            .count()
    }
}

/// Canonical evaluation of an allocation. Contributions accumulate in
/// ascending element order; photodiode ties resolve to the lowest index.
pub struct Evaluation {
    pub objective: f64,
    pub per_user: Vec<f64>,
    pub selected: Vec<usize>,
}

pub fn evaluate(problem: &AllocationProblem, allocation: &Allocation) -> Evaluation {
    let chains = chain_values(problem, allocation);
    finish_evaluation(problem, &chains)
}

fn chain_values(problem: &AllocationProblem, allocation: &Allocation) -> Vec<f64> {
    let mut chains = problem.base.clone();
    for (k, assigned) in allocation.assignment.iter().enumerate() {
        if let Some(a) = assigned {
            chains[a.photodiode * problem.users + a.user] +=
                problem.contrib(a.ap, k, a.photodiode, a.user);
        }
    }
    chains
}

fn finish_evaluation(problem: &AllocationProblem, chains: &[f64]) -> Evaluation {
    let mut per_user = Vec::with_capacity(problem.users);
    let mut selected = Vec::with_capacity(problem.users);
    for u in 0..problem.users {
        let mut best = (f64::NEG_INFINITY, 0);
        for n in 0..problem.photodiodes {
            let v = chains[n * problem.users + u];
            if v > best.0 {
                best = (v, n);
            }
        }
        per_user.push(best.0);
        selected.push(best.1);
    }
    let objective = per_user.iter().cloned().fold(f64::INFINITY, f64::min);
    Evaluation {
        objective: if objective.is_finite() { objective } else { 0.0 },
        per_user,
        selected,
    }
}

fn result_from(
    problem: &AllocationProblem,
    allocation: Allocation,
    status: SolverStatus,
) -> SolverResult {
    let eval = evaluate(problem, &allocation);
    let outage_users = eval
        .per_user
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == 0.0)
        .map(|(u, _)| u)
        .collect();
    SolverResult {
        allocation,
        objective: eval.objective,
        selected_photodiode: eval.selected,
        per_user_optical_snr: eval.per_user,
        status,
        outage_users,
    }
}

const ENUMERATION_BUDGET: f64 = 1e7;

/// Exhaustive oracle. Enumerates every assignment of each element to
/// unassigned or any (AP, photodiode, user) option and keeps the maximal
/// min-user objective; ties resolve to the lexicographically smallest
/// assignment with options ordered unassigned first, then by
/// (photodiode, AP, user).
pub fn brute_force(problem: &AllocationProblem) -> Result<SolverResult, SolveError> {
    let options = (problem.aps * problem.photodiodes * problem.users + 1) as f64;
    let required = options.powi(problem.elements as i32);
    if required > ENUMERATION_BUDGET {
        return Err(SolveError::EnumerationBudgetExceeded {
            required,
            budget: ENUMERATION_BUDGET,
        });
    }

    struct Search<'p> {
        problem: &'p AllocationProblem,
        current: Vec<Option<Assignment>>,
        best: Option<(f64, Vec<Option<Assignment>>)>,
    }

    impl Search<'_> {
        fn descend(&mut self, k: usize, chains: &[f64]) {
            if k == self.problem.elements {
                let eval = finish_evaluation(self.problem, chains);
                let better = match &self.best {
                    None => true,
                    Some((obj, _)) => eval.objective > *obj,
                };
                if better {
                    self.best = Some((eval.objective, self.current.clone()));
                }
                return;
            }
            // Option order: unassigned, then (photodiode, AP, user).
            self.current[k] = None;
            self.descend(k + 1, chains);
            let mut next = chains.to_vec();
            for n in 0..self.problem.photodiodes {
                for l in 0..self.problem.aps {
                    for u in 0..self.problem.users {
                        next.copy_from_slice(chains);
                        next[n * self.problem.users + u] += self.problem.contrib(l, k, n, u);
                        self.current[k] = Some(Assignment {
                            ap: l,
                            photodiode: n,
                            user: u,
                        });
                        self.descend(k + 1, &next);
                    }
                }
            }
            self.current[k] = None;
        }
    }

    let mut search = Search {
        problem,
        current: vec![None; problem.elements],
        best: None,
    };
    let chains = problem.base.clone();
    search.descend(0, &chains);
    let (_, assignment) = search.best.expect("enumeration always visits a leaf");
    Ok(result_from(
        problem,
        Allocation { assignment },
        SolverStatus::Optimal,
    ))
}

/// Exact branch-and-bound search.
///
/// Elements are branched in order of decreasing maximum contribution; each
/// node assigns the next element to one of its positive (AP, photodiode,
/// user) options or leaves it unassigned. The admissible bound adds every
/// remaining element's best contribution to each chain simultaneously. The
/// incumbent starts from the greedy heuristic. `tolerance` is a relative
/// safety margin on pruning: a node is cut only when its bound inflated by
/// (1 + tolerance) still cannot beat the incumbent, so the returned
/// objective is the exact optimum up to floating-point noise in the bound.
pub fn branch_and_bound(problem: &AllocationProblem, tolerance: f64) -> SolverResult {
    // Branch order: decreasing max contribution, zero-contribution elements
    // dropped (unassigned is always at least as good for them).
    let mut order: Vec<(usize, f64)> = (0..problem.elements)
        .map(|k| (k, problem.max_contrib_of_element(k)))
        .filter(|(_, c)| *c > 0.0)
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let branch_elements: Vec<usize> = order.iter().map(|(k, _)| *k).collect();

    let incumbent = greedy(problem);
    if branch_elements.is_empty() {
        return result_from(
            problem,
            Allocation::empty(problem.elements),
            SolverStatus::Optimal,
        );
    }

    let chain_len = problem.photodiodes * problem.users;
    // suffix[i] = per-chain sum of best contributions of elements i.. in
    // branch order; the last row is all zeros.
    let depth = branch_elements.len();
    let mut suffix = vec![0.0; (depth + 1) * chain_len];
    for i in (0..depth).rev() {
        let k = branch_elements[i];
        for n in 0..problem.photodiodes {
            for u in 0..problem.users {
                let idx = n * problem.users + u;
                suffix[i * chain_len + idx] =
                    suffix[(i + 1) * chain_len + idx] + problem.best_ap(k, n, u).0;
            }
        }
    }

    struct Search<'p> {
        problem: &'p AllocationProblem,
        branch_elements: &'p [usize],
        suffix: &'p [f64],
        chain_len: usize,
        tolerance: f64,
        current: Vec<Option<Assignment>>,
        best_objective: f64,
        best_assignment: Vec<Option<Assignment>>,
    }

    impl Search<'_> {
        fn bound(&self, depth: usize, chains: &[f64]) -> f64 {
            let users = self.problem.users;
            let mut worst = f64::INFINITY;
            for u in 0..users {
                let mut best_chain = 0.0f64;
                for n in 0..self.problem.photodiodes {
                    let idx = n * users + u;
                    best_chain =
                        best_chain.max(chains[idx] + self.suffix[depth * self.chain_len + idx]);
                }
                worst = worst.min(best_chain);
            }
            if worst.is_finite() {
                worst
            } else {
                0.0
            }
        }

        fn descend(&mut self, depth: usize, chains: &[f64]) {
            if self.bound(depth, chains) * (1.0 + self.tolerance) <= self.best_objective {
                return;
            }
            if depth == self.branch_elements.len() {
                // Candidate: compare via canonical evaluation so the final
                // objective is independent of branch order.
                let eval = evaluate(
                    self.problem,
                    &Allocation {
                        assignment: self.current.clone(),
                    },
                );
                if eval.objective > self.best_objective {
                    self.best_objective = eval.objective;
                    self.best_assignment = self.current.clone();
                }
                return;
            }
            let k = self.branch_elements[depth];
            self.current[k] = None;
            self.descend(depth + 1, chains);
            let mut next = chains.to_vec();
            for n in 0..self.problem.photodiodes {
                for l in 0..self.problem.aps {
                    for u in 0..self.problem.users {
                        if self.problem.contrib(l, k, n, u) <= 0.0 {
                            continue;
                        }
                        next.copy_from_slice(chains);
                        next[n * self.problem.users + u] += self.problem.contrib(l, k, n, u);
                        self.current[k] = Some(Assignment {
                            ap: l,
                            photodiode: n,
                            user: u,
                        });
                        self.descend(depth + 1, &next);
                    }
                }
            }
            self.current[k] = None;
        }
    }

    let mut search = Search {
        problem,
        branch_elements: &branch_elements,
        suffix: &suffix,
        chain_len,
        tolerance,
        current: vec![None; problem.elements],
        best_objective: incumbent.objective,
        best_assignment: incumbent.allocation.assignment.clone(),
    };
    let chains = problem.base.clone();
    search.descend(0, &chains);
    result_from(
        problem,
        Allocation {
            assignment: search.best_assignment,
        },
        SolverStatus::Optimal,
    )
}

/// Default pruning safety margin; relative because optical-SNR values span
/// several orders of magnitude.
pub const DEFAULT_BB_TOLERANCE: f64 = 1e-9;

/// Greedy heuristic. Repeatedly finds the user with the lowest select-best
/// optical SNR and assigns the unassigned element with the largest marginal
/// increase for that user (on whichever photodiode maximizes the result).
/// Stops when every element is assigned or no positive marginal remains.
pub fn greedy(problem: &AllocationProblem) -> SolverResult {
    let users = problem.users;
    let mut assignment: Vec<Option<Assignment>> = vec![None; problem.elements];
    if users == 0 || problem.photodiodes == 0 {
        return result_from(problem, Allocation { assignment }, SolverStatus::Heuristic);
    }

    // Best AP per (element, chain): value and AP index.
    let chain_len = problem.photodiodes * users;
    let mut best_value = vec![0.0f64; problem.elements * chain_len];
    let mut best_ap = vec![0usize; problem.elements * chain_len];
    for k in 0..problem.elements {
        for n in 0..problem.photodiodes {
            for u in 0..users {
                let (value, l) = problem.best_ap(k, n, u);
                best_value[k * chain_len + n * users + u] = value;
                best_ap[k * chain_len + n * users + u] = l;
            }
        }
    }

    let mut chains = problem.base.clone();
    let mut current: Vec<f64> = (0..users)
        .map(|u| {
            (0..problem.photodiodes)
                .map(|n| chains[n * users + u])
                .fold(0.0f64, f64::max)
        })
        .collect();
    let mut used = vec![false; problem.elements];
    let mut remaining = problem.elements;

    while remaining > 0 {
        let target = (0..users)
            .min_by(|a, b| current[*a].partial_cmp(&current[*b]).unwrap())
            .unwrap();
        // Largest marginal increase for the target user; ties resolve to
        // the lowest photodiode, then the lowest element index.
        let mut best: Option<(f64, usize, usize)> = None; // (delta, n, k)
        for n in 0..problem.photodiodes {
            let chain = chains[n * users + target];
            for k in 0..problem.elements {
                if used[k] {
                    continue;
                }
                let value = best_value[k * chain_len + n * users + target];
                if value <= 0.0 {
                    continue;
                }
                let delta = (chain + value) - current[target];
                if delta > 0.0 && best.is_none_or(|(d, _, _)| delta > d) {
                    best = Some((delta, n, k));
                }
            }
        }
        let Some((_, n, k)) = best else {
            break;
        };
        let l = best_ap[k * chain_len + n * users + target];
        assignment[k] = Some(Assignment {
            ap: l,
            photodiode: n,
            user: target,
        });
        used[k] = true;
        remaining -= 1;
        chains[n * users + target] += problem.contrib(l, k, n, target);
        current[target] = current[target].max(chains[n * users + target]);
    }

    result_from(problem, Allocation { assignment }, SolverStatus::Heuristic)
}

/// Constraint check report. `satisfied` is false iff any violation was
/// recorded.
#[derive(Debug, Clone)]
pub struct Verification {
    pub satisfied: bool,
    pub violations: Vec<String>,
}

const VERIFY_REL_TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VERIFY_REL_TOL * a.abs().max(b.abs()).max(1e-300)
}

/// Certify a solver result against the allocation constraints: each element
/// assigned at most once, index domains, the objective bounded by every
/// user's value, and select-best consistency of the reported photodiodes.
pub fn verify_solution(problem: &AllocationProblem, result: &SolverResult) -> Verification {
    verify_entries(
        problem,
        &result.entries(),
        result.objective,
        &result.selected_photodiode,
    )
}

/// Entry-level verification, usable on deserialized reports where the
/// at-most-once constraint is not structural.
pub fn verify_entries(
    problem: &AllocationProblem,
    entries: &[AllocationEntry],
    objective: f64,
    selected: &[usize],
) -> Verification {
    let mut violations = Vec::new();
    let mut seen = vec![0usize; problem.elements];
    for e in entries {
        if e.element >= problem.elements {
            violations.push(format!("C2: element index {} out of range", e.element));
            continue;
        }
        seen[e.element] += 1;
        if e.ap >= problem.aps || e.photodiode >= problem.photodiodes || e.user >= problem.users {
            violations.push(format!(
                "C2: entry for element {} has out-of-range triple ({}, {}, {})",
                e.element, e.ap, e.photodiode, e.user
            ));
        }
    }
    for (k, count) in seen.iter().enumerate() {
        if *count > 1 {
            violations.push(format!("C1: element {k} assigned {count} times"));
        }
    }
    if selected.len() != problem.users {
        violations.push(format!(
            "C6: expected one selected photodiode per user, got {} for {} users",
            selected.len(),
            problem.users
        ));
    }
    if !violations.is_empty() {
        return Verification {
            satisfied: false,
            violations,
        };
    }

    let mut allocation = Allocation::empty(problem.elements);
    for e in entries {
        allocation.assignment[e.element] = Some(Assignment {
            ap: e.ap,
            photodiode: e.photodiode,
            user: e.user,
        });
    }
    let chains = chain_values(problem, &allocation);
    for (u, &n_sel) in selected.iter().enumerate() {
        if n_sel >= problem.photodiodes {
            violations.push(format!("C7: selected photodiode {n_sel} of user {u} out of range"));
            continue;
        }
        let max_chain = (0..problem.photodiodes)
            .map(|n| chains[n * problem.users + u])
            .fold(f64::NEG_INFINITY, f64::max);
        let chosen = chains[n_sel * problem.users + u];
        if !close(chosen, max_chain) {
            violations.push(format!(
                "C4/C5: user {u} selected photodiode {n_sel} with value {chosen}, maximum is {max_chain}"
            ));
        }
        if objective > chosen && !close(objective, chosen) {
            violations.push(format!(
                "C3: objective {objective} exceeds user {u} value {chosen}"
            ));
        }
    }
    if problem.users > 0 {
        let min_value = (0..problem.users)
            .map(|u| {
                (0..problem.photodiodes)
                    .map(|n| chains[n * problem.users + u])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        if !close(objective, min_value) {
            violations.push(format!(
                "objective {objective} does not equal recomputed min-user value {min_value}"
            ));
        }
    }
    Verification {
        satisfied: violations.is_empty(),
        violations,
    }
}

/// Solver selection used by the experiment runners and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Exhaustive enumeration (tiny instances only).
    Oracle,
    /// Branch and bound; gated behind a size cap for full-scale scenes.
    Exact,
    Greedy,
}

/// Instances with more effective elements than this are refused by the
/// exact solver path; branch and bound is exponential in the worst case.
pub const EXACT_ELEMENT_CAP: usize = 24;

impl SolverKind {
    pub fn solve(self, problem: &AllocationProblem) -> Result<SolverResult, SolveError> {
        match self {
            SolverKind::Oracle => brute_force(problem),
            SolverKind::Exact => {
                let effective = (0..problem.elements)
                    .filter(|&k| problem.max_contrib_of_element(k) > 0.0)
                    .count();
                if effective > EXACT_ELEMENT_CAP {
                    return Err(SolveError::ExactSizeCapExceeded {
                        elements: effective,
                        cap: EXACT_ELEMENT_CAP,
                    });
                }
                Ok(branch_and_bound(problem, DEFAULT_BB_TOLERANCE))
            }
            SolverKind::Greedy => Ok(greedy(problem)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Random instance with roughly `density` of the contributions nonzero.
    fn random_problem(
        rng: &mut ChaCha8Rng,
        aps: usize,
        elements: usize,
        photodiodes: usize,
        users: usize,
        density: f64,
    ) -> AllocationProblem {
        let base: Vec<f64> = (0..photodiodes * users).map(|_| uniform(rng)).collect();
        let contrib: Vec<f64> = (0..aps * elements * photodiodes * users)
            .map(|_| {
                if uniform(rng) < density {
                    uniform(rng)
                } else {
                    0.0
                }
            })
            .collect();
        AllocationProblem::from_values(aps, elements, photodiodes, users, base, contrib)
    }

    fn min_max_base(problem: &AllocationProblem) -> f64 {
        (0..problem.users)
            .map(|u| {
                (0..problem.photodiodes)
                    .map(|n| problem.base(n, u))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn build_problem_matches_channel_snr() {
        use crate::channel::{snr, Allocation, GainTables, LinkBudget};
        use crate::geometry::Vec3;
        use crate::scenario::{
            build_crown_molding, build_wall_grid, RoomConfig, Scenario, UserModel,
        };
        let room = RoomConfig {
            width: 4.0,
            depth: 4.0,
            height: 3.0,
            ap_positions: vec![Vec3::new(1.0, 1.0, 3.0), Vec3::new(3.0, 3.0, 3.0)],
            led_half_power_semi_angle: 80f64.to_radians(),
        };
        let model = UserModel {
            body_height: 1.75,
            body_radius: 0.15,
            device_offset: 0.3,
            device_height: 1.0,
            tiers: 1,
            fov: 75f64.to_radians(),
            pd_area: 1e-4,
            responsivity: 0.4,
        };
        let users = vec![
            model.place(Vec3::new(1.5, 2.0, 1.0), 0.3).unwrap(),
            model.place(Vec3::new(3.0, 1.2, 1.0), 2.0).unwrap(),
        ];
        let crown = build_crown_molding(&room, 4, 2, 1.0 / 3.0, 0.95);
        let grid = build_wall_grid(&room, 1.0, 1.0 / 3.0, 0.4);
        let scenario = Scenario::new(room, crown, grid, users, false);
        let tables = GainTables::build(&scenario).unwrap();
        let budget = LinkBudget::new(1.0, 64, 2.5e-20, 2e7).unwrap();
        let problem = build_problem(&tables, &budget);
        // The base values are optical SNRs: squaring them must reproduce
        // the electrical SNR of the unallocated channel.
        let empty = Allocation::empty(tables.oris_count);
        for n in 0..problem.photodiodes {
            for u in 0..problem.users {
                let electrical = snr(n, u, &empty, &budget, &tables);
                let optical = problem.base(n, u);
                assert!(
                    (optical * optical - electrical).abs() <= 1e-12 * electrical.max(1e-300),
                    "chain ({n}, {u}): {} vs {electrical}",
                    optical * optical
                );
            }
        }
    }

    #[test]
    fn no_elements_reduces_to_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let problem = random_problem(&mut rng, 2, 0, 3, 2, 0.8);
        let expected = min_max_base(&problem);
        assert_eq!(brute_force(&problem).unwrap().objective, expected);
        assert_eq!(branch_and_bound(&problem, 0.0).objective, expected);
        assert_eq!(greedy(&problem).objective, expected);
    }

    #[test]
    fn zero_contrib_matches_removed_option() {
        // Zeroing a blocked triple's contribution must behave exactly like
        // the option not existing.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let with_zeros = random_problem(&mut rng, 2, 3, 2, 2, 0.4);
        let r = brute_force(&with_zeros).unwrap();
        // No assigned entry has zero contribution.
        for e in r.entries() {
            assert!(with_zeros.contrib(e.ap, e.element, e.photodiode, e.user) > 0.0);
        }
    }

    #[test]
    fn single_element_uses_best_ap() {
        // 1 element, 1 user, 1 photodiode, 2 APs.
        let problem = AllocationProblem::from_values(
            2,
            1,
            1,
            1,
            vec![0.5],
            vec![0.2, 0.7], // AP 0 then AP 1
        );
        let result = brute_force(&problem).unwrap();
        let entries = result.entries();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].ap, 1);
        assert!((result.objective - 1.2).abs() < 1e-15);
    }

    #[test]
    fn single_user_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let problem = random_problem(&mut rng, 2, 4, 3, 1, 0.7);
            // One user: every element can feed the best chain via its best
            // AP, so the optimum is max_n (base + Σ_k best contribution).
            let expected = (0..problem.photodiodes)
                .map(|n| {
                    problem.base(n, 0)
                        + (0..problem.elements)
                            .map(|k| problem.best_ap(k, n, 0).0)
                            .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let exact = branch_and_bound(&problem, 0.0);
            assert!(
                (exact.objective - expected).abs() <= 1e-12 * expected.abs(),
                "expected {expected}, got {}",
                exact.objective
            );
        }
    }

    #[test]
    fn branch_and_bound_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for round in 0..120 {
            let elements = 1 + (rng.next_u64() % 4) as usize;
            let problem = random_problem(&mut rng, 2, elements, 3, 2, 0.6);
            let oracle = brute_force(&problem).unwrap();
            let exact = branch_and_bound(&problem, DEFAULT_BB_TOLERANCE);
            assert!(
                oracle.objective == exact.objective
                    || (oracle.objective - exact.objective).abs()
                        <= 1e-12 * oracle.objective.abs(),
                "round {round}: oracle {} vs branch-and-bound {}",
                oracle.objective,
                exact.objective
            );
            assert!(verify_solution(&problem, &oracle).satisfied);
            assert!(verify_solution(&problem, &exact).satisfied);
        }
    }

    #[test]
    fn brute_force_budget_is_enforced() {
        let problem = AllocationProblem::from_values(
            4,
            16,
            4,
            4,
            vec![0.0; 16],
            vec![0.0; 4 * 16 * 4 * 4],
        );
        assert!(matches!(
            brute_force(&problem),
            Err(SolveError::EnumerationBudgetExceeded { .. })
        ));
    }

    #[test]
    fn all_zero_contrib_returns_empty_allocation() {
        let problem = AllocationProblem::from_values(
            2,
            5,
            2,
            2,
            vec![0.3, 0.1, 0.2, 0.4],
            vec![0.0; 2 * 5 * 2 * 2],
        );
        let result = branch_and_bound(&problem, DEFAULT_BB_TOLERANCE);
        assert_eq!(result.allocation.assigned_count(), 0);
        assert_eq!(result.objective, min_max_base(&problem));
    }

    #[test]
    fn big_m_bounds_every_solver_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let problem = random_problem(&mut rng, 2, 3, 2, 2, 0.5);
            let m = big_m(&problem);
            assert!(m >= brute_force(&problem).unwrap().objective);
            assert!(m >= greedy(&problem).objective);
        }
        let no_contrib =
            AllocationProblem::from_values(1, 2, 2, 1, vec![0.7, 0.3], vec![0.0; 4]);
        assert_eq!(big_m(&no_contrib), 0.7);
    }

    #[test]
    fn big_m_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let problem = random_problem(&mut rng, 2, 3, 2, 2, 0.6);
        let scaled = AllocationProblem::from_values(
            2,
            3,
            2,
            2,
            problem.base.iter().map(|v| v * 3.0).collect(),
            problem.contrib.iter().map(|v| v * 3.0).collect(),
        );
        assert!((big_m(&scaled) - 3.0 * big_m(&problem)).abs() <= 1e-12 * big_m(&scaled));
    }

    #[test]
    fn greedy_is_bracketed_by_base_and_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let problem = random_problem(&mut rng, 2, 3, 2, 2, 0.5);
            let heuristic = greedy(&problem);
            let oracle = brute_force(&problem).unwrap();
            assert!(heuristic.objective >= min_max_base(&problem) - 1e-15);
            assert!(heuristic.objective <= oracle.objective * (1.0 + 1e-12) + 1e-15);
            assert!(verify_solution(&problem, &heuristic).satisfied);
            assert_eq!(heuristic.status, SolverStatus::Heuristic);
        }
    }

    #[test]
    fn greedy_splits_symmetric_instance_evenly() {
        // Two users with equal bases and two identical elements that can
        // serve either user: one element must go to each.
        let mut contrib = vec![0.0; 4];
        contrib[0] = 1.0; // element 0 -> user 0
        contrib[1] = 1.0; // element 0 -> user 1
        contrib[2] = 1.0; // element 1 -> user 0
        contrib[3] = 1.0; // element 1 -> user 1
        let problem = AllocationProblem::from_values(1, 2, 1, 2, vec![1.0, 1.0], contrib);
        let result = greedy(&problem);
        let entries = result.entries();
        assert_eq!(entries.len(), 2);
        let served: Vec<usize> = entries.iter().map(|e| e.user).collect();
        assert!(served.contains(&0) && served.contains(&1));
        assert!((result.objective - 2.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_user_yields_zero_objective_and_outage_flag() {
        // User 1 has no base and no reachable contribution.
        let problem = AllocationProblem::from_values(
            1,
            2,
            1,
            2,
            vec![0.5, 0.0],
            vec![0.4, 0.0, 0.3, 0.0],
        );
        let exact = branch_and_bound(&problem, DEFAULT_BB_TOLERANCE);
        assert_eq!(exact.objective, 0.0);
        assert_eq!(exact.status, SolverStatus::Optimal);
        assert_eq!(exact.outage_users, vec![1]);
    }

    #[test]
    fn adding_an_element_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let larger = random_problem(&mut rng, 2, 3, 2, 2, 0.6);
            // Restrict to the first two elements by zeroing the third.
            let mut restricted_contrib = larger.contrib.clone();
            for l in 0..2 {
                for n in 0..2 {
                    for u in 0..2 {
                        restricted_contrib[((l * 3 + 2) * 2 + n) * 2 + u] = 0.0;
                    }
                }
            }
            let smaller = AllocationProblem::from_values(
                2,
                3,
                2,
                2,
                larger.base.clone(),
                restricted_contrib,
            );
            let small_obj = brute_force(&smaller).unwrap().objective;
            let large_obj = brute_force(&larger).unwrap().objective;
            assert!(large_obj >= small_obj);
        }
    }

    #[test]
    fn verify_rejects_corrupted_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let problem = random_problem(&mut rng, 2, 3, 2, 2, 0.8);
        let result = brute_force(&problem).unwrap();
        assert!(verify_solution(&problem, &result).satisfied);

        // Double assignment of one element.
        let mut entries = result.entries();
        if let Some(first) = entries.first().copied() {
            entries.push(AllocationEntry {
                user: 1 - first.user,
                ..first
            });
            let v = verify_entries(
                &problem,
                &entries,
                result.objective,
                &result.selected_photodiode,
            );
            assert!(!v.satisfied);
            assert!(v.violations.iter().any(|m| m.starts_with("C1")));
        }

        // Corrupt the selected photodiode to a non-argmax index.
        let eval = evaluate(&problem, &result.allocation);
        let u = 0;
        let wrong = (0..problem.photodiodes)
            .find(|n| *n != eval.selected[u])
            .unwrap();
        let mut bad_selected = result.selected_photodiode.clone();
        bad_selected[u] = wrong;
        let v = verify_entries(&problem, &result.entries(), result.objective, &bad_selected);
        // Only flags if chain values actually differ; with random data they do.
        assert!(!v.satisfied);
        assert!(v.violations.iter().any(|m| m.starts_with("C4/C5")));
    }

    #[test]
    fn solver_kind_gates_exact_size() {
        let elements = EXACT_ELEMENT_CAP + 1;
        let problem = AllocationProblem::from_values(
            1,
            elements,
            1,
            1,
            vec![0.1],
            vec![0.5; elements],
        );
        assert!(matches!(
            SolverKind::Exact.solve(&problem),
            Err(SolveError::ExactSizeCapExceeded { .. })
        ));
        assert!(SolverKind::Greedy.solve(&problem).is_ok());
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let problem = random_problem(&mut rng, 2, 3, 2, 2, 0.7);
        let result = branch_and_bound(&problem, DEFAULT_BB_TOLERANCE);
        let json = result.to_json().unwrap();
        let report: SolverReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report.allocation, result.entries());
        let v = verify_entries(
            &problem,
            &report.allocation,
            report.objective,
            &report.selected_photodiode,
        );
        assert!(v.satisfied, "{:?}", v.violations);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn objective_is_scale_equivariant(seed in 0u64..1000, scale in 0.1f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let problem = random_problem(&mut rng, 2, 3, 2, 2, 0.6);
            let scaled = AllocationProblem::from_values(
                2, 3, 2, 2,
                problem.base.iter().map(|v| v * scale).collect(),
                problem.contrib.iter().map(|v| v * scale).collect(),
            );
            let a = brute_force(&problem).unwrap();
            let b = brute_force(&scaled).unwrap();
            prop_assert!((b.objective - scale * a.objective).abs() <= 1e-9 * b.objective.abs().max(1e-12));
            prop_assert_eq!(a.entries(), b.entries());
        }
    }
}
