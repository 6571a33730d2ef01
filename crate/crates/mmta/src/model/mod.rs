//! The optimization program: its generic representation, the convex and
//! bilinear terms, and its assembly from a scenario.

pub mod bilinear;
pub mod build;
pub mod program;
pub mod pwl;

pub use build::{build_program, BuildOptions, BuiltModel, Layout, ModelError, ObjectiveApprox, WaitingForm};
pub use program::{Constraint, ConstraintFamily, MathProgram, Sense, VarFamily, Variable};

/// One CSV line per row: name, families, sense, rhs and the terms written
/// as `coef*var`.
pub fn dump_rows(p: &MathProgram) -> String {
    let mut out = String::from("row,families,sense,rhs,terms\n");
    for c in &p.constraints {
        let families: Vec<String> = c.families.iter().map(|f| f.name()).collect();
        let terms: Vec<String> = c
            .terms
            .iter()
            .map(|&(j, a)| format!("{a}*{}", p.variables[j].name))
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.name,
            families.join(";"),
            c.sense.symbol(),
            c.rhs,
            terms.join(" ")
        ));
    }
    out
}
