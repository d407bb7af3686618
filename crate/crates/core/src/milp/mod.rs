//! Solver-agnostic MILP container and the backend contract.

mod highs;
pub mod lp;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use highs::HighsBackend;

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v]).sum()
    }

    /// Violation measured in constraint units (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStats {
    pub constraints: usize,
    pub variables: usize,
    pub integers: usize,
    pub binaries: usize,
    pub continuous: usize,
    pub nonzeros: usize,
}

/// Minimization model `min c·x + offset` over linear rows and bounds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AbstractMilp {
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub offset: f64,
}

impl AbstractMilp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64) -> VarId {
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            _ => (lb, ub),
        };
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lb,
            ub,
        });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    /// Adds a row; repeated variables are merged and zero terms dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        mut terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        });
    }

    pub fn add_objective(&mut self, v: VarId, coef: f64) {
        self.objective[v] += coef;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn stats(&self) -> ModelStats {
        let mut s = ModelStats {
            constraints: self.constraints.len(),
            variables: self.vars.len(),
            ..Default::default()
        };
        for v in &self.vars {
            match v.kind {
                VarKind::Continuous => s.continuous += 1,
                VarKind::Integer => s.integers += 1,
                VarKind::Binary => s.binaries += 1,
            }
        }
        s.nonzeros = self.constraints.iter().map(|c| c.terms.len()).sum();
        s
    }

    /// Checks that rows reference declared variables and names are unique.
    pub fn check(&self) -> Result<(), String> {
        let mut names = HashSet::with_capacity(self.vars.len() + self.constraints.len());
        for v in &self.vars {
            if !names.insert(format!("v:{}", v.name)) {
                return Err(format!("duplicate variable name {}", v.name));
            }
            if v.lb > v.ub {
                return Err(format!("variable {} has empty domain [{}, {}]", v.name, v.lb, v.ub));
            }
        }
        for c in &self.constraints {
            if !names.insert(format!("c:{}", c.name)) {
                return Err(format!("duplicate constraint name {}", c.name));
            }
            if let Some(&(v, _)) = c.terms.iter().find(|t| t.0 >= self.vars.len()) {
                return Err(format!("constraint {} references unknown variable {v}", c.name));
            }
        }
        Ok(())
    }

    /// Largest row violation and bound/integrality violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &val)| {
                let b = (v.lb - val).max(val - v.ub).max(0.0);
                let i = if v.kind.is_integral() { (val - val.round()).abs() } else { 0.0 };
                b.max(i)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverControls {
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub time_limit: Option<f64>,
    pub threads: usize,
    pub seed: u64,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            rel_gap: 1e-6,
            abs_gap: 1e-9,
            time_limit: None,
            threads: 1,
            seed: 0,
        }
    }
}

impl SolverControls {
    /// Proves optimality without any gap allowance.
    pub fn exact() -> Self {
        Self {
            rel_gap: 0.0,
            abs_gap: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleGap,
    Infeasible,
    Unbounded,
    Limit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGap)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleGap => "feasible-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Limit => "limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub values: Vec<f64>,
    pub wall_time: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("solver backend failure: {0}")]
    Backend(String),
    #[error("malformed model: {0}")]
    Model(String),
}

pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &AbstractMilp, controls: &SolverControls) -> Result<SolveOutcome, SolveError>;
}

/// Backend named by `MHRES_SOLVER` (default `highs`).
pub fn backend_from_env() -> Result<Box<dyn MilpBackend>, SolveError> {
    let name = std::env::var("MHRES_SOLVER").unwrap_or_else(|_| "highs".into());
    backend_by_name(&name)
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn MilpBackend>, SolveError> {
    match name.to_ascii_lowercase().as_str() {
        "highs" | "" => Ok(Box::new(HighsBackend)),
        other => Err(SolveError::BackendUnavailable(format!(
            "{other:?} is not built in; available: highs"
        ))),
    }
}

/// Solves with the environment-selected backend.
pub fn solve(model: &AbstractMilp, controls: &SolverControls) -> Result<SolveOutcome, SolveError> {
    backend_from_env()?.solve(model, controls)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_toy() {
        let mut m = AbstractMilp::new();
        let x = m.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY);
        m.add_constraint("lo", vec![(x, 1.0)], Sense::Ge, 1.0);
        m.add_constraint("hi", vec![(x, 1.0)], Sense::Le, 0.0);
        let out = solve(&m, &SolverControls::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn integer_toy() {
        let mut m = AbstractMilp::new();
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0);
        m.add_objective(x, 1.0);
        m.add_constraint("lo", vec![(x, 1.0)], Sense::Ge, 3.0);
        let out = solve(&m, &SolverControls::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective.unwrap() - 3.0).abs() < 1e-9);
        assert!((out.values[x] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fractional_lower_bound_rounds_up() {
        let mut m = AbstractMilp::new();
        let x = m.add_var("x", VarKind::Integer, 0.0, 10.0);
        let y = m.add_var("y", VarKind::Continuous, 0.0, 10.0);
        m.add_objective(x, 2.0);
        m.add_objective(y, 1.0);
        m.add_constraint("cover", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 2.5);
        m.add_constraint("cap", vec![(y, 1.0)], Sense::Le, 0.5);
        let out = solve(&m, &SolverControls::exact()).unwrap();
        assert!((out.objective.unwrap() - 4.5).abs() < 1e-9);
    }

    #[test]
    fn duplicate_terms_are_merged() {
        let mut m = AbstractMilp::new();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 1.0);
        m.add_constraint("c", vec![(x, 1.0), (x, -1.0)], Sense::Le, 0.0);
        assert!(m.constraints[0].terms.is_empty());
    }

    #[test]
    fn unknown_backend_is_reported() {
        assert!(matches!(
            backend_by_name("cplex"),
            Err(SolveError::BackendUnavailable(_))
        ));
    }
}
