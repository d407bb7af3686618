//! Scenario-fixing rolling with relaxed horizons.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{run_batches, HeuristicError, HeuristicRun, Subproblem};
use crate::instance::Instance;
use crate::milp::SolverControls;
use crate::model::{Scope, ScopeNode, Variant};
use crate::tree::{MultiHorizonTree, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sfr3Params {
    /// Stages kept in full detail, counted from the subproblem root's stage.
    pub e_hat: usize,
    /// Stages after those kept with a random subset of nodes.
    pub e_hat_r: usize,
    /// Selection probability per relaxation stage; a single value applies to
    /// all of them.
    pub phi: Vec<f64>,
    pub seed: u64,
    pub controls: SolverControls,
    pub jobs: usize,
}

impl Sfr3Params {
    pub fn new(e_hat: usize, e_hat_r: usize, phi: f64, seed: u64) -> Self {
        Self {
            e_hat,
            e_hat_r,
            phi: vec![phi],
            seed,
            controls: SolverControls::default(),
            jobs: 1,
        }
    }

    /// Named strategy: `weak-myopic`, `stronger-myopic`,
    /// `multistage-myopic:K` or `relaxed:K,R,PHI`.
    pub fn preset(strategy: &str, seed: u64) -> Result<Self, HeuristicError> {
        let bad = || HeuristicError::Params(format!("unknown strategy {strategy:?}"));
        let (name, arg) = strategy.split_once(':').unwrap_or((strategy, ""));
        let count = |s: &str| usize::from_str(s.trim()).map_err(|_| bad());
        match name {
            "weak-myopic" if arg.is_empty() => Ok(Self::new(1, 0, 0.0, seed)),
            "stronger-myopic" if arg.is_empty() => Ok(Self::new(2, 0, 0.0, seed)),
            "multistage-myopic" => Ok(Self::new(count(arg)?, 0, 0.0, seed)),
            "relaxed" => {
                let parts: Vec<&str> = arg.split(',').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                let phi = f64::from_str(parts[2].trim()).map_err(|_| bad())?;
                Ok(Self::new(count(parts[0])?, count(parts[1])?, phi, seed))
            }
            _ => Err(bad()),
        }
    }

    fn phi_at(&self, offset: usize) -> f64 {
        match self.phi.len() {
            0 => 0.0,
            1 => self.phi[0],
            n => self.phi[offset.min(n - 1)],
        }
    }

    fn validate(&self, stages: usize) -> Result<(), HeuristicError> {
        if self.e_hat < 1 || self.e_hat > stages {
            return Err(HeuristicError::Params(format!(
                "e_hat = {} must lie in 1..={stages}",
                self.e_hat
            )));
        }
        if let Some(p) = self.phi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(HeuristicError::Params(format!("selection probability {p} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Node set of one SFR3 subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct Sfr3Scope {
    pub root: NodeId,
    /// Descendants within the fully detailed stages.
    pub full: Vec<NodeId>,
    /// Descendants selected in the relaxation stages.
    pub relaxed: Vec<NodeId>,
    /// Rescaled weight of the root and every included descendant.
    pub weights: BTreeMap<NodeId, f64>,
}

/// Builds the node set rooted at `r` (a stage-`kappa` node): all descendants
/// up to stage `kappa + e_hat - 1`, then `e_hat_r` stages where each child of
/// an included node enters with probability `phi(offset)`. An included node
/// that ends up without children gets one drawn uniformly.
pub fn relaxed_scope(
    tree: &MultiHorizonTree,
    r: NodeId,
    e_hat: usize,
    e_hat_r: usize,
    phi: impl Fn(usize) -> f64,
    rng: &mut impl Rng,
) -> Sfr3Scope {
    let kappa = tree.node(r).stage;
    let e_max = tree.num_stages();
    let mut weights = BTreeMap::new();
    weights.insert(r, 1.0);
    let mut layer = vec![r];
    let mut full = Vec::new();
    let mut relaxed = Vec::new();
    let last_full = (kappa + e_hat - 1).min(e_max);
    let last_relaxed = (last_full + e_hat_r).min(e_max);
    for e in kappa + 1..=last_relaxed {
        let relax = e > last_full;
        let mut next = Vec::new();
        for &p in &layer {
            let children = &tree.node(p).children;
            let chosen: Vec<NodeId> = if relax {
                let p_sel = phi(e - last_full - 1);
                let mut picked: Vec<NodeId> = children.iter().copied().filter(|_| rng.gen::<f64>() < p_sel).collect();
                if picked.is_empty() && !children.is_empty() {
                    picked.push(children[rng.gen_range(0..children.len())]);
                }
                picked
            } else {
                children.clone()
            };
            let total: f64 = chosen.iter().map(|&c| tree.node(c).weight).sum();
            let wp = weights[&p];
            for &c in &chosen {
                weights.insert(c, wp * tree.node(c).weight / total);
            }
            next.extend(chosen);
        }
        if relax {
            relaxed.extend(&next);
        } else {
            full.extend(&next);
        }
        layer = next;
    }
    Sfr3Scope {
        root: r,
        full,
        relaxed,
        weights,
    }
}

/// Scope with the frozen parent of the root (when any) in front.
fn to_subproblem(tree: &MultiHorizonTree, s: &Sfr3Scope, iteration: usize, fix_full: bool) -> Subproblem {
    let mut nodes = Vec::new();
    let mut position = BTreeMap::new();
    if let Some(a) = tree.node(s.root).parent {
        position.insert(a, 0);
        nodes.push(ScopeNode {
            source: a,
            parent: None,
            weight: 0.0,
            frozen: true,
        });
    }
    let mut fix = Vec::new();
    let order = std::iter::once(s.root).chain(s.full.iter().copied()).chain(s.relaxed.iter().copied());
    for n in order {
        let parent = tree.node(n).parent.and_then(|p| position.get(&p).copied());
        let k = nodes.len();
        position.insert(n, k);
        nodes.push(ScopeNode {
            source: n,
            parent,
            weight: s.weights[&n],
            frozen: false,
        });
        if n == s.root || (fix_full && s.full.contains(&n)) {
            fix.push(k);
        }
    }
    Subproblem {
        iteration,
        root: s.root,
        scope: Scope { nodes },
        fix,
    }
}

/// Runs SFR3: for each stage `kappa` up to `E - e_hat + 1`, solves one
/// subproblem per stage-`kappa` node and fixes that node. The last round
/// also fixes every fully detailed descendant.
pub fn sfr3(instance: &Instance, variant: Variant, params: &Sfr3Params) -> Result<HeuristicRun, HeuristicError> {
    let tree = &instance.tree;
    let e_max = tree.num_stages();
    params.validate(e_max)?;
    let last = e_max - params.e_hat + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut kappa = 0;
    run_batches(instance, variant, &params.controls, params.jobs, |_| {
        kappa += 1;
        if kappa > last {
            return Ok(None);
        }
        let batch = tree
            .stage_nodes(kappa)
            .iter()
            .map(|&r| {
                let s = relaxed_scope(tree, r, params.e_hat, params.e_hat_r, |k| params.phi_at(k), &mut rng);
                to_subproblem(tree, &s, kappa, kappa == last)
            })
            .collect();
        Ok(Some(batch))
    })
}
