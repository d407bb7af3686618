//! CPLEX-LP text export of an [`AbstractMilp`], names preserved.

use std::fmt::Write as _;

use super::{AbstractMilp, VarKind};

/// LP identifiers may not contain `:`, `=`, `,` or spaces; those are mapped
/// to `.`, `_`, `_`, `_` so the export stays readable and unambiguous.
pub fn lp_name(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            ':' => '.',
            '=' | ',' | ' ' | '[' | ']' | '(' | ')' => '_',
            c => c,
        })
        .collect()
}

fn term(out: &mut String, coef: f64, var: &str, first: bool) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {}", -coef, var);
    } else if first {
        let _ = write!(out, " {coef} {var}");
    } else {
        let _ = write!(out, " + {coef} {var}");
    }
}

pub fn write_lp(model: &AbstractMilp) -> String {
    let names: Vec<String> = model.vars.iter().map(|v| lp_name(&v.name)).collect();
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (v, &c) in model.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, c, &names[v], first);
            first = false;
        }
    }
    if model.offset != 0.0 || first {
        term(&mut out, model.offset, "", first);
    }
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", lp_name(&c.name));
        if c.terms.is_empty() {
            out.push_str(" 0 ");
            out.push_str(&names[0]);
        }
        for (k, &(v, a)) in c.terms.iter().enumerate() {
            term(&mut out, a, &names[v], k == 0);
        }
        let _ = writeln!(out, " {} {}", c.sense, c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, var) in model.vars.iter().enumerate() {
        let lo = if var.lb == f64::NEG_INFINITY { "-inf".to_string() } else { var.lb.to_string() };
        let hi = if var.ub == f64::INFINITY { "+inf".to_string() } else { var.ub.to_string() };
        let _ = writeln!(out, " {lo} <= {} <= {hi}", names[v]);
    }
    let gen: Vec<&String> = model
        .vars
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Integer)
        .map(|(_, n)| n)
        .collect();
    if !gen.is_empty() {
        out.push_str("General\n");
        for n in gen {
            let _ = writeln!(out, " {n}");
        }
    }
    let bin: Vec<&String> = model
        .vars
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bin.is_empty() {
        out.push_str("Binary\n");
        for n in bin {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;

    #[test]
    fn small_model_text() {
        let mut m = AbstractMilp::new();
        let x = m.add_var("x:n=0", VarKind::Binary, 0.0, 1.0);
        let y = m.add_var("y:n=0,t=1", VarKind::Continuous, 0.0, f64::INFINITY);
        m.add_objective(x, 3.0);
        m.add_objective(y, -1.0);
        m.add_constraint("link:n=0", vec![(y, 1.0), (x, -2.0)], Sense::Le, 0.0);
        let text = write_lp(&m);
        assert!(text.contains("obj: 3 x.n_0 - 1 y.n_0_t_1"));
        assert!(text.contains("link.n_0: - 2 x.n_0 + 1 y.n_0_t_1 <= 0"));
        assert!(text.contains("Binary\n x.n_0\n"));
        assert!(text.contains("0 <= y.n_0_t_1 <= +inf"));
    }
}
