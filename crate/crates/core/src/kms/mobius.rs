use serde::{Deserialize, Serialize};

use super::KmsError;

/// Above this many strict upper bounds the alternating sum is refused.
pub const MAX_UPPER_SET: usize = 24;

/// A finite quasi-lattice given by its join table; `None` is `∞`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinTable {
    joins: Vec<Vec<Option<usize>>>,
}

impl JoinTable {
    /// Validates that the table is the join of a partial order: idempotent,
    /// commutative, associative with `∞` absorbing, and every finite entry a
    /// least upper bound for the induced order `p ≤ q ⇔ p ∨ q = q`.
    pub fn new(joins: Vec<Vec<Option<usize>>>) -> Result<Self, KmsError> {
        let n = joins.len();
        let bad = |msg: String| Err(KmsError::InconsistentJoinTable(msg));
        for (p, row) in joins.iter().enumerate() {
            if row.len() != n {
                return bad(format!("row {p} has {} entries, expected {n}", row.len()));
            }
            if let Some(&Some(q)) = row.iter().find(|v| v.is_some_and(|q| q >= n)) {
                return bad(format!("row {p} refers to element {q}"));
            }
        }
        let table = JoinTable { joins };
        for p in 0..n {
            if table.join(p, p) != Some(p) {
                return bad(format!("{p} ∨ {p} ≠ {p}"));
            }
            for q in 0..n {
                if table.join(p, q) != table.join(q, p) {
                    return bad(format!("{p} ∨ {q} ≠ {q} ∨ {p}"));
                }
                for r in 0..n {
                    let left = table.join(p, q).and_then(|x| table.join(x, r));
                    let right = table.join(q, r).and_then(|x| table.join(p, x));
                    if left != right {
                        return bad(format!("join is not associative on ({p}, {q}, {r})"));
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                let common: Vec<usize> = (0..n).filter(|&r| table.leq(p, r) && table.leq(q, r)).collect();
                match table.join(p, q) {
                    None if !common.is_empty() => {
                        return bad(format!("{p} ∨ {q} = ∞ but {} is an upper bound", common[0]));
                    }
                    Some(j) if !common.iter().all(|&r| table.leq(j, r)) => {
                        return bad(format!("{p} ∨ {q} = {j} is not least"));
                    }
                    _ => {}
                }
            }
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.joins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joins.is_empty()
    }

    pub fn join(&self, p: usize, q: usize) -> Option<usize> {
        self.joins[p][q]
    }

    pub fn leq(&self, p: usize, q: usize) -> bool {
        self.join(p, q) == Some(q)
    }

    /// Builds the table of a family of finite sets ordered by inclusion with
    /// union as join, where a union outside the family is `∞`.
    pub fn from_sets(sets: &[u64]) -> Result<Self, KmsError> {
        let joins =
            sets.iter().map(|&a| sets.iter().map(|&b| sets.iter().position(|&c| c == a | b)).collect()).collect();
        JoinTable::new(joins)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MobiusResult {
    pub f_hat: Vec<f64>,
    /// `max_p |f(p) − Σ_{q≥p} f̂(q)|`.
    pub roundtrip_error: f64,
}

/// `f̂(p) = f(p) + Σ_{∅≠K⊆{q>p}} (−1)^{|K|} f(q_K)` with `f(∞) = 0`.
pub fn mobius_invert(table: &JoinTable, f: &[f64]) -> Result<MobiusResult, KmsError> {
    let n = table.len();
    if f.len() != n {
        return Err(KmsError::InconsistentJoinTable(format!("{} values for {n} elements", f.len())));
    }
    let mut f_hat = Vec::with_capacity(n);
    for p in 0..n {
        let above: Vec<usize> = (0..n).filter(|&q| q != p && table.leq(p, q)).collect();
        if above.len() > MAX_UPPER_SET {
            return Err(KmsError::Unsupported(format!("{} elements above {p}", above.len())));
        }
        // (q_K, sign) for every nonempty K with q_K finite
        let mut partial: Vec<(usize, f64)> = Vec::new();
        for &q in &above {
            let mut extended = vec![(q, -1.0)];
            for &(r, sign) in &partial {
                if let Some(j) = table.join(r, q) {
                    extended.push((j, -sign));
                }
            }
            partial.extend(extended);
        }
        f_hat.push(f[p] + partial.iter().map(|&(q, sign)| sign * f[q]).sum::<f64>());
    }
    let roundtrip_error = (0..n)
        .map(|p| {
            let total: f64 = (0..n).filter(|&q| table.leq(p, q)).map(|q| f_hat[q]).sum();
            (total - f[p]).abs()
        })
        .fold(0.0, f64::max);
    Ok(MobiusResult { f_hat, roundtrip_error })
}
