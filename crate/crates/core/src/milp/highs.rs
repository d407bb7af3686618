//! HiGHS backend over the C API.

use std::ffi::CString;
use std::os::raw::{c_int, c_void};
use std::sync::Mutex;
use std::time::Instant;

use highs_sys::*;

use super::{AbstractMilp, MilpBackend, Sense, SolveError, SolveOutcome, SolveStatus, SolverControls, VarKind};

/// HiGHS keeps process-wide scheduler state; sessions are run one at a time.
static SESSION: Mutex<()> = Mutex::new(());

#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend;

struct Session(*mut c_void);

impl Session {
    fn new() -> Result<Self, SolveError> {
        let ptr = unsafe { Highs_create() };
        if ptr.is_null() {
            return Err(SolveError::Backend("Highs_create returned null".into()));
        }
        Ok(Self(ptr))
    }

    fn set_bool(&self, key: &str, value: bool) -> Result<(), SolveError> {
        let k = CString::new(key).expect("option key");
        check(unsafe { Highs_setBoolOptionValue(self.0, k.as_ptr(), value as c_int) }, key)
    }

    fn set_int(&self, key: &str, value: i64) -> Result<(), SolveError> {
        let k = CString::new(key).expect("option key");
        check(unsafe { Highs_setIntOptionValue(self.0, k.as_ptr(), value as c_int) }, key)
    }

    fn set_double(&self, key: &str, value: f64) -> Result<(), SolveError> {
        let k = CString::new(key).expect("option key");
        check(unsafe { Highs_setDoubleOptionValue(self.0, k.as_ptr(), value) }, key)
    }

    fn set_string(&self, key: &str, value: &str) -> Result<(), SolveError> {
        let k = CString::new(key).expect("option key");
        let v = CString::new(value).expect("option value");
        check(unsafe { Highs_setStringOptionValue(self.0, k.as_ptr(), v.as_ptr()) }, key)
    }

    fn double_info(&self, key: &str) -> Option<f64> {
        let k = CString::new(key).expect("info key");
        let mut v = 0.0;
        let rc = unsafe { Highs_getDoubleInfoValue(self.0, k.as_ptr(), &mut v) };
        (rc == kHighsStatusOk as c_int).then_some(v)
    }

    fn int_info(&self, key: &str) -> Option<c_int> {
        let k = CString::new(key).expect("info key");
        let mut v: c_int = 0;
        let rc = unsafe { Highs_getIntInfoValue(self.0, k.as_ptr(), &mut v) };
        (rc == kHighsStatusOk as c_int).then_some(v)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        unsafe { Highs_destroy(self.0) }
    }
}

fn check(rc: c_int, what: &str) -> Result<(), SolveError> {
    if rc == kHighsStatusError as c_int {
        Err(SolveError::Backend(format!("HiGHS rejected {what}")))
    } else {
        Ok(())
    }
}

struct Csr {
    starts: Vec<c_int>,
    index: Vec<c_int>,
    value: Vec<f64>,
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
}

fn to_csr(model: &AbstractMilp) -> Csr {
    let nnz: usize = model.constraints.iter().map(|c| c.terms.len()).sum();
    let mut csr = Csr {
        starts: Vec::with_capacity(model.constraints.len()),
        index: Vec::with_capacity(nnz),
        value: Vec::with_capacity(nnz),
        row_lo: Vec::with_capacity(model.constraints.len()),
        row_hi: Vec::with_capacity(model.constraints.len()),
    };
    for c in &model.constraints {
        csr.starts.push(csr.index.len() as c_int);
        for &(v, a) in &c.terms {
            csr.index.push(v as c_int);
            csr.value.push(a);
        }
        let (lo, hi) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, c.rhs),
            Sense::Ge => (c.rhs, f64::INFINITY),
            Sense::Eq => (c.rhs, c.rhs),
        };
        csr.row_lo.push(lo);
        csr.row_hi.push(hi);
    }
    csr
}

impl HighsBackend {
    fn run(
        &self,
        model: &AbstractMilp,
        controls: &SolverControls,
        presolve: bool,
    ) -> Result<(c_int, Session), SolveError> {
        let n = model.vars.len();
        let csr = to_csr(model);
        let lb: Vec<f64> = model.vars.iter().map(|v| v.lb).collect();
        let ub: Vec<f64> = model.vars.iter().map(|v| v.ub).collect();
        let integrality: Vec<c_int> = model
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::Continuous => kHighsVarTypeContinuous as c_int,
                VarKind::Integer | VarKind::Binary => kHighsVarTypeInteger as c_int,
            })
            .collect();
        let has_int = integrality.iter().any(|&k| k != kHighsVarTypeContinuous as c_int);

        let s = Session::new()?;
        s.set_bool("output_flag", false)?;
        s.set_int("threads", controls.threads.max(1) as i64)?;
        s.set_int("random_seed", (controls.seed % (i32::MAX as u64)) as i64)?;
        s.set_double("mip_rel_gap", controls.rel_gap)?;
        s.set_double("mip_abs_gap", controls.abs_gap)?;
        if let Some(limit) = controls.time_limit {
            s.set_double("time_limit", limit)?;
        }
        if !presolve {
            s.set_string("presolve", "off")?;
        }
        let rc = unsafe {
            Highs_passMip(
                s.0,
                n as c_int,
                model.constraints.len() as c_int,
                csr.index.len() as c_int,
                kHighsMatrixFormatRowwise as c_int,
                kHighsObjSenseMinimize as c_int,
                model.offset,
                model.objective.as_ptr(),
                lb.as_ptr(),
                ub.as_ptr(),
                csr.row_lo.as_ptr(),
                csr.row_hi.as_ptr(),
                csr.starts.as_ptr(),
                csr.index.as_ptr(),
                csr.value.as_ptr(),
                if has_int { integrality.as_ptr() } else { std::ptr::null() },
            )
        };
        check(rc, "model")?;
        let rc = unsafe { Highs_run(s.0) };
        check(rc, "run")?;
        let status = unsafe { Highs_getModelStatus(s.0) };
        Ok((status, s))
    }
}

impl MilpBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &AbstractMilp, controls: &SolverControls) -> Result<SolveOutcome, SolveError> {
        let _guard = SESSION.lock().unwrap_or_else(|p| p.into_inner());
        let start = Instant::now();
        let n = model.vars.len();
        let has_int = model.vars.iter().any(|v| v.kind.is_integral());
        if n == 0 {
            let feasible = model.constraints.iter().all(|c| c.violation(&[]) <= 1e-9);
            return Ok(SolveOutcome {
                status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
                objective: feasible.then_some(model.offset),
                best_bound: feasible.then_some(model.offset),
                values: Vec::new(),
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        let (mut code, mut session) = self.run(model, controls, true)?;
        if code == kHighsModelStatusUnboundedOrInfeasible as c_int {
            (code, session) = self.run(model, controls, false)?;
        }
        let has_primal = session
            .int_info("primal_solution_status")
            .map(|s| s == kHighsSolutionStatusFeasible as c_int)
            .unwrap_or(false);
        let status = match code {
            c if c == kHighsModelStatusOptimal as c_int => SolveStatus::Optimal,
            c if c == kHighsModelStatusModelEmpty as c_int => SolveStatus::Optimal,
            c if c == kHighsModelStatusInfeasible as c_int => SolveStatus::Infeasible,
            c if c == kHighsModelStatusUnboundedOrInfeasible as c_int => SolveStatus::Infeasible,
            c if c == kHighsModelStatusUnbounded as c_int => SolveStatus::Unbounded,
            c if c == kHighsModelStatusTimeLimit as c_int
                || c == kHighsModelStatusIterationLimit as c_int
                || c == kHighsModelStatusSolutionLimit as c_int
                || c == kHighsModelStatusInterrupt as c_int =>
            {
                if has_primal {
                    SolveStatus::FeasibleGap
                } else {
                    SolveStatus::Limit
                }
            }
            other => {
                return Err(SolveError::Backend(format!("HiGHS finished with model status {other}")))
            }
        };
        let mut values = vec![0.0; n];
        let mut objective = None;
        let mut best_bound = None;
        if status.has_solution() {
            let mut col_dual = vec![0.0; n];
            let m = model.constraints.len();
            let mut row_value = vec![0.0; m];
            let mut row_dual = vec![0.0; m];
            unsafe {
                Highs_getSolution(
                    session.0,
                    values.as_mut_ptr(),
                    col_dual.as_mut_ptr(),
                    row_value.as_mut_ptr(),
                    row_dual.as_mut_ptr(),
                );
            }
            for (v, var) in values.iter_mut().zip(&model.vars) {
                if var.kind.is_integral() {
                    *v = v.round();
                }
            }
            let obj = unsafe { Highs_getObjectiveValue(session.0) };
            objective = Some(obj);
            best_bound = if has_int && code != kHighsModelStatusModelEmpty as c_int {
                session.double_info("mip_dual_bound").map(|b| b.min(obj))
            } else {
                Some(obj)
            };
        } else if status == SolveStatus::Limit && has_int {
            best_bound = session.double_info("mip_dual_bound").filter(|b| b.is_finite());
        }
        Ok(SolveOutcome {
            status,
            objective,
            best_bound,
            values,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}
