//! Exact linearization of the product of two bounded integer variables.
//!
//! The first factor is written in binary, `q = sum 2^k b_k`, and each
//! product `w_k = b_k * x` is pinned by four inequalities
//! `w_k <= U b_k`, `w_k <= x`, `w_k >= x - U (1 - b_k)`, `w_k >= 0`
//! with `U` the upper bound of `x`. Then `q * x = sum 2^k w_k`.

use super::program::{ConstraintFamily, MathProgram, Sense, VarFamily};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BilinearError {
    #[error("factor `{0}` has no finite upper bound")]
    Unbounded(String),
    #[error("factor `{0}` must be a non-negative integer variable")]
    NotInteger(String),
}

/// Number of bits needed to write every integer in `0..=upper`.
pub fn bit_count(upper: u64) -> usize {
    (64 - upper.leading_zeros()) as usize
}

/// Adds variables and rows so that the returned variable equals
/// `x[q] * x[x]` at every feasible integer point.
pub fn linearize_bilinear_product(
    p: &mut MathProgram,
    q: usize,
    x: usize,
    name: &str,
) -> Result<usize, BilinearError> {
    let fam = vec![ConstraintFamily::BilinearProduct];
    for &j in &[q, x] {
        let v = &p.variables[j];
        if !v.upper.is_finite() {
            return Err(BilinearError::Unbounded(v.name.clone()));
        }
        if !v.integer || v.lower < 0.0 {
            return Err(BilinearError::NotInteger(v.name.clone()));
        }
    }
    let q_upper = p.variables[q].upper.floor().max(0.0) as u64;
    let u = p.variables[x].upper;
    let bits = bit_count(q_upper);
    let z = p.add_var(
        format!("{name}_prod"),
        0.0,
        q_upper as f64 * u,
        false,
        VarFamily::BilinearProduct,
    );
    let mut expansion = vec![(q, 1.0)];
    let mut total = vec![(z, 1.0)];
    for k in 0..bits {
        let weight = (1u64 << k) as f64;
        let b = p.add_var(format!("{name}_bit{k}"), 0.0, 1.0, true, VarFamily::BilinearBit);
        let w = p.add_var(format!("{name}_part{k}"), 0.0, u, false, VarFamily::BilinearPart);
        expansion.push((b, -weight));
        total.push((w, -weight));
        p.add_row(format!("{name}_part{k}_le_bit"), vec![(w, 1.0), (b, -u)], Sense::Le, 0.0, fam.clone());
        p.add_row(format!("{name}_part{k}_le_factor"), vec![(w, 1.0), (x, -1.0)], Sense::Le, 0.0, fam.clone());
        p.add_row(
            format!("{name}_part{k}_ge"),
            vec![(w, 1.0), (x, -1.0), (b, -u)],
            Sense::Ge,
            -u,
            fam.clone(),
        );
    }
    p.add_row(format!("{name}_binary"), expansion, Sense::Eq, 0.0, fam.clone());
    p.add_row(format!("{name}_sum"), total, Sense::Eq, 0.0, fam);
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_counts() {
        assert_eq!(bit_count(0), 0);
        assert_eq!(bit_count(1), 1);
        assert_eq!(bit_count(7), 3);
        assert_eq!(bit_count(8), 4);
    }
}
