//! Index bookkeeping for the nonlinear-term estimate: a pair `(p, q)` with
//! `2/p + 3/q = 4`, `p ∈ [1,2]`, `q ∈ [1,3/2]` fixes the space index
//! `s = 3(1/q − 1/2)` and the time threshold `r̄ = 1/p − 1/2`.

use num_rational::Ratio;

use crate::error::{Error, Result};

const RELATION_TOLERANCE: f64 = 1e-12;

pub fn exponent_relations(p: f64, q: f64) -> Result<(f64, f64)> {
    if !(1.0..=2.0).contains(&p) || !(1.0..=1.5).contains(&q) {
        return Err(Error::RelationViolated(format!("(p, q) = ({p}, {q}) outside [1,2] × [1,3/2]")));
    }
    let defect = 2.0 / p + 3.0 / q - 4.0;
    if defect.abs() > RELATION_TOLERANCE {
        return Err(Error::RelationViolated(format!("2/p + 3/q − 4 = {defect:e}")));
    }
    Ok((3.0 * (1.0 / q - 0.5), 1.0 / p - 0.5))
}

/// Exact version over the rationals; the relation must hold with zero defect.
pub fn exponent_relations_exact(p: Ratio<i64>, q: Ratio<i64>) -> Result<(Ratio<i64>, Ratio<i64>)> {
    let one = Ratio::from_integer(1);
    let half = Ratio::new(1, 2);
    if p < one || p > Ratio::from_integer(2) || q < one || q > Ratio::new(3, 2) {
        return Err(Error::RelationViolated(format!("(p, q) = ({p}, {q}) outside [1,2] × [1,3/2]")));
    }
    let lhs = Ratio::from_integer(2) / p + Ratio::from_integer(3) / q;
    if lhs != Ratio::from_integer(4) {
        return Err(Error::RelationViolated(format!("2/p + 3/q = {lhs}, not 4")));
    }
    Ok((Ratio::from_integer(3) * (one / q - half), one / p - half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_triples() {
        let r = |a, b| Ratio::new(a, b);
        assert_eq!(exponent_relations_exact(r(2, 1), r(1, 1)).unwrap(), (r(3, 2), r(0, 1)));
        assert_eq!(exponent_relations_exact(r(1, 1), r(3, 2)).unwrap(), (r(1, 2), r(1, 2)));
        assert_eq!(exponent_relations_exact(r(4, 3), r(6, 5)).unwrap(), (r(1, 1), r(1, 4)));
        let (s, rb) = exponent_relations(4.0 / 3.0, 1.2).unwrap();
        assert!((s - 1.0).abs() < 1e-15 && (rb - 0.25).abs() < 1e-15);
    }

    #[test]
    fn violations_are_rejected() {
        assert!(exponent_relations(1.5, 1.2).is_err());
        assert!(exponent_relations(2.5, 0.9).is_err());
        assert!(exponent_relations_exact(Ratio::new(3, 2), Ratio::new(6, 5)).is_err());
    }

    proptest! {
        #[test]
        fn outputs_stay_in_range(p in 1.0f64..=2.0) {
            let q = 3.0 / (4.0 - 2.0 / p);
            let (s, rb) = exponent_relations(p, q).unwrap();
            prop_assert!((0.5 - 1e-12..=1.5 + 1e-12).contains(&s));
            prop_assert!((-1e-12..=0.5 + 1e-12).contains(&rb));
            // r̄ = 3/4 − s/2 along the relation, so s = 3/2 exactly when r̄ = 0
            prop_assert!((rb - (0.75 - 0.5 * s)).abs() < 1e-12);
        }
    }
}
