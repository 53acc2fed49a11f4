//! Exact evaluation of the closed-form wastage expressions for each
//! topology family.
//!
//! Counts use arbitrary-precision integers and controlled-flooding
//! expectations exact rationals, so deep trees (the reference tables reach
//! ~2e11 at depth 20) evaluate without overflow or rounding.
//!
//! The expressions are transcribed as published, idiosyncrasies included:
//!
//! - The wasted-transmission energy always carries the broadcaster's own
//!   `e_t` term (`t_x = e_t + e_t * b_t`), even though that transmission
//!   is arguably necessary.
//! - The nested-tree formulas for a broadcast depth below the binary
//!   region multiply by `3^i` broadcasters even though the tree they
//!   describe only has `2^s * 3^(i-s)` nodes at that depth. The
//!   structurally true counts live in [`crate::floodsim`]; comparing the
//!   two is the point of that module.
//! - Controlled flooding for the nested reception in the `i > s` branch
//!   uses the exponent `j - i - 1`, unlike its pure counterpart; it is
//!   evaluated exactly that way. Consequently `Controlled(1)` does not
//!   reduce to `Pure` for that single quantity (it is exactly a third of
//!   it); everywhere else the `p = 1` reduction is an identity.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;

/// Per-packet transmission and reception costs in millijoules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub e_t: u64,
    pub e_r: u64,
}

impl Default for EnergyModel {
    /// 100 mJ to transmit, 5 mJ to receive — the costs the bundled
    /// reference tables were produced with.
    fn default() -> Self {
        EnergyModel { e_t: 100, e_r: 5 }
    }
}

/// Flooding discipline: unconditional retransmission, or independent
/// retransmission with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub enum FloodMode {
    Pure,
    Controlled(BigRational),
}

impl FloodMode {
    pub fn controlled(p: BigRational) -> Result<Self, AnalyticError> {
        check_probability(&p)?;
        Ok(FloodMode::Controlled(p))
    }
}

fn check_probability(p: &BigRational) -> Result<(), AnalyticError> {
    if p.is_negative() || p > &BigRational::one() {
        return Err(AnalyticError::ProbabilityOutOfRange { p: p.to_string() });
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticError {
    #[error("broadcast index k={k} out of range for a chain of n={n} nodes (need 1 <= k <= n-1)")]
    ChainIndexOutOfRange { n: u64, k: u64 },
    #[error("broadcast depth i={i} exceeds tree depth d={d}")]
    BroadcastDepthTooDeep { i: u32, d: u32 },
    #[error("binary region depth s={s} exceeds tree depth d={d}")]
    RegionTooDeep { s: u32, d: u32 },
    #[error("branching factor must be at least 1")]
    ZeroBranching,
    #[error("retransmission probability {p} is outside [0, 1]")]
    ProbabilityOutOfRange { p: String },
}

/// Unnecessary-involvement counts and the wasted energy they imply.
///
/// Fields are exact rationals; under pure flooding they are integers.
/// The identities `t_x = e_t + e_t*b_t`, `r_x = e_r*b_r`,
/// `n_total = b_t + b_r` and `e_total = t_x + r_x` hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WastageReport {
    /// Nodes unnecessarily involved in transmission.
    pub b_t: BigRational,
    /// Nodes unnecessarily involved in reception.
    pub b_r: BigRational,
    /// Wasted transmission energy, mJ.
    pub t_x: BigRational,
    /// Wasted reception energy, mJ.
    pub r_x: BigRational,
    /// Total unnecessarily involved nodes.
    pub n_total: BigRational,
    /// Total wasted energy, mJ.
    pub e_total: BigRational,
}

impl WastageReport {
    pub fn from_counts(b_t: BigRational, b_r: BigRational, em: &EnergyModel) -> Self {
        let e_t = exact::int(em.e_t);
        let e_r = exact::int(em.e_r);
        let t_x = &e_t + &e_t * &b_t;
        let r_x = &e_r * &b_r;
        let n_total = &b_t + &b_r;
        let e_total = &t_x + &r_x;
        WastageReport {
            b_t,
            b_r,
            t_x,
            r_x,
            n_total,
            e_total,
        }
    }
}

/// Sum of `base^m` for `m` in `lo..=hi`, exactly; 0 when `hi < lo`.
///
/// Uses the closed form `base^lo * (base^(hi-lo+1) - 1) / (base - 1)`
/// except for bases 0 and 1. Negative powers of a zero base do not occur
/// in any caller and contribute nothing here.
pub fn geometric_sum(base: &BigRational, lo: i64, hi: i64) -> BigRational {
    if hi < lo {
        return BigRational::zero();
    }
    if base.is_one() {
        return exact::int(hi - lo + 1);
    }
    if base.is_zero() {
        return if lo <= 0 && 0 <= hi {
            BigRational::one()
        } else {
            BigRational::zero()
        };
    }
    let len = hi - lo + 1;
    let one = BigRational::one();
    exact::pow(base, lo) * (exact::pow(base, len) - &one) / (base - &one)
}

/// Wastage of the `k`-th node (1-based) broadcasting along a chain of `n`
/// nodes whose first node is the base station: `b_t = n - k - 1` and
/// `b_r = n - k`.
pub fn linear(n: u64, k: u64, em: &EnergyModel) -> Result<WastageReport, AnalyticError> {
    if k < 1 || k >= n {
        return Err(AnalyticError::ChainIndexOutOfRange { n, k });
    }
    let b_t = exact::int(n - k - 1);
    let b_r = exact::int(n - k);
    Ok(WastageReport::from_counts(b_t, b_r, em))
}

/// Effective branching base for a family: the plain factor under pure
/// flooding, `factor * p` under controlled flooding.
fn effective_base(factor: u32, mode: &FloodMode) -> Result<BigRational, AnalyticError> {
    let factor = exact::int(factor);
    match mode {
        FloodMode::Pure => Ok(factor),
        FloodMode::Controlled(p) => {
            check_probability(p)?;
            Ok(factor * p)
        }
    }
}

/// Wastage of depth `i` broadcasting in a balanced binary tree of depth
/// `d`: `b_t = 2^i * sum_{j=i+2}^{d} base^(j-i-1)` and
/// `b_r = 2^i * sum_{j=i+2}^{d} base^(j-i)` with base 2 (pure) or 2p
/// (controlled).
pub fn binary(
    d: u32,
    i: u32,
    mode: &FloodMode,
    em: &EnergyModel,
) -> Result<WastageReport, AnalyticError> {
    if i > d {
        return Err(AnalyticError::BroadcastDepthTooDeep { i, d });
    }
    let base = effective_base(2, mode)?;
    let span = i64::from(d) - i64::from(i);
    let broadcasters = exact::pow(&exact::int(2), i64::from(i));
    let b_t = &broadcasters * geometric_sum(&base, 1, span - 1);
    let b_r = &broadcasters * geometric_sum(&base, 2, span);
    Ok(WastageReport::from_counts(b_t, b_r, em))
}

/// Wastage of depth `i` broadcasting in a nested tree (binary through
/// depth `s`, ternary below).
///
/// For `i > s` the published counts are pure ternary with `3^i`
/// broadcasters; the controlled reception keeps its printed `j-i-1`
/// exponent. For `i <= s` both counts share the binary-region term
/// `2^i * sum_{j=i+2}^{s} base2^(j-i)` and add a ternary tail weighted by
/// `2^s`.
pub fn nested(
    d: u32,
    s: u32,
    i: u32,
    mode: &FloodMode,
    em: &EnergyModel,
) -> Result<WastageReport, AnalyticError> {
    if s > d {
        return Err(AnalyticError::RegionTooDeep { s, d });
    }
    if i > d {
        return Err(AnalyticError::BroadcastDepthTooDeep { i, d });
    }
    let (b_t, b_r) = if i > s {
        let base3 = effective_base(3, mode)?;
        let span = i64::from(d) - i64::from(i);
        let broadcasters = exact::pow(&exact::int(3), i64::from(i));
        let b_t = &broadcasters * geometric_sum(&base3, 1, span - 1);
        let b_r = match mode {
            FloodMode::Pure => &broadcasters * geometric_sum(&base3, 2, span),
            // Printed with the transmission exponent j-i-1, not j-i.
            FloodMode::Controlled(_) => &broadcasters * geometric_sum(&base3, 1, span - 1),
        };
        (b_t, b_r)
    } else {
        let base2 = effective_base(2, mode)?;
        let base3 = effective_base(3, mode)?;
        let binary_span = i64::from(s) - i64::from(i);
        let tail_len = i64::from(d) - i64::from(s);
        let binary_term =
            exact::pow(&exact::int(2), i64::from(i)) * geometric_sum(&base2, 2, binary_span);
        let tail_weight = exact::pow(&exact::int(2), i64::from(s));
        let b_t = &binary_term + &tail_weight * geometric_sum(&base3, 0, tail_len - 1);
        let b_r = &binary_term + &tail_weight * geometric_sum(&base3, 1, tail_len);
        (b_t, b_r)
    };
    Ok(WastageReport::from_counts(b_t, b_r, em))
}

/// Wastage of depth `i` broadcasting in a balanced Q-ary tree; the binary
/// expressions with the branching factor generalized to `q`.
pub fn qary(
    q: u32,
    d: u32,
    i: u32,
    mode: &FloodMode,
    em: &EnergyModel,
) -> Result<WastageReport, AnalyticError> {
    if q == 0 {
        return Err(AnalyticError::ZeroBranching);
    }
    if i > d {
        return Err(AnalyticError::BroadcastDepthTooDeep { i, d });
    }
    let base = effective_base(q, mode)?;
    let span = i64::from(d) - i64::from(i);
    let broadcasters = exact::pow(&exact::int(q), i64::from(i));
    let b_t = &broadcasters * geometric_sum(&base, 1, span - 1);
    let b_r = &broadcasters * geometric_sum(&base, 2, span);
    Ok(WastageReport::from_counts(b_t, b_r, em))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, ratio};

    fn em() -> EnergyModel {
        EnergyModel::default()
    }

    #[test]
    fn geometric_sum_examples() {
        assert_eq!(geometric_sum(&int(2), 1, 4), int(30));
        assert_eq!(geometric_sum(&int(1), 0, 5), int(6));
        assert_eq!(geometric_sum(&int(3), 5, 4), int(0));
        assert_eq!(geometric_sum(&int(0), 0, 3), int(1));
        assert_eq!(geometric_sum(&int(0), 1, 3), int(0));
        assert_eq!(geometric_sum(&ratio(1, 2), 1, 2), ratio(3, 4));
    }

    #[test]
    fn linear_chain_examples() {
        let r = linear(10, 3, &em()).unwrap();
        assert_eq!(r.b_t, int(6));
        assert_eq!(r.t_x, int(700));
        assert_eq!(r.b_r, int(7));
        assert_eq!(r.r_x, int(35));

        let r = linear(5, 4, &em()).unwrap();
        assert_eq!(r.b_t, int(0));
        assert_eq!(r.t_x, int(100));
        assert_eq!(r.b_r, int(1));
        assert_eq!(r.r_x, int(5));

        let r = linear(2, 1, &EnergyModel { e_t: 0, e_r: 0 }).unwrap();
        assert_eq!(r.b_t, int(0));
        assert_eq!(r.b_r, int(1));
        assert_eq!(r.e_total, int(0));
    }

    #[test]
    fn linear_domain_errors() {
        assert!(matches!(
            linear(5, 5, &em()),
            Err(AnalyticError::ChainIndexOutOfRange { .. })
        ));
        assert!(matches!(
            linear(5, 0, &em()),
            Err(AnalyticError::ChainIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn binary_pure_matches_reference_rows() {
        let r = binary(4, 2, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(r.b_t, int(8));
        assert_eq!(r.b_r, int(16));
        assert_eq!(r.n_total, int(24));
        assert_eq!(r.e_total, int(980));

        let r = binary(13, 2, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(r.n_total, int(24552));
        assert_eq!(r.e_total, int(900340));
    }

    #[test]
    fn binary_empty_sums_leave_only_the_broadcast_term() {
        let r = binary(3, 2, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(r.b_t, int(0));
        assert_eq!(r.b_r, int(0));
        assert_eq!(r.t_x, int(100));
        assert_eq!(r.e_total, int(100));
    }

    #[test]
    fn binary_controlled_p_one_reduces_to_pure() {
        let controlled = binary(5, 2, &FloodMode::Controlled(int(1)), &em()).unwrap();
        assert_eq!(controlled.n_total, int(72));
        assert_eq!(controlled.e_total, int(2740));
        assert_eq!(controlled, binary(5, 2, &FloodMode::Pure, &em()).unwrap());
    }

    #[test]
    fn binary_controlled_half() {
        let r = binary(5, 2, &FloodMode::Controlled(ratio(1, 2)), &em()).unwrap();
        assert_eq!(r.b_t, int(8));
        assert_eq!(r.b_r, int(8));
        assert_eq!(r.t_x, int(900));
        assert_eq!(r.r_x, int(40));
    }

    #[test]
    fn nested_pure_both_branches() {
        let r = nested(5, 2, 3, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(r.b_t, int(81));
        assert_eq!(r.b_r, int(243));
        assert_eq!(r.n_total, int(324));
        assert_eq!(r.e_total, int(9415));

        let r = nested(7, 4, 2, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(r.b_t, int(224));
        assert_eq!(r.b_r, int(640));
        assert_eq!(r.e_total, int(25700));

        let r = nested(20, 2, 3, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(r.n_total, "6973568640".parse::<i64>().map(int).unwrap());
        assert_eq!(r.e_total, "200490098500".parse::<i64>().map(int).unwrap());

        let r = nested(4, 2, 3, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(r.b_t, int(0));
        assert_eq!(r.b_r, int(0));
    }

    #[test]
    fn nested_controlled_reception_keeps_printed_exponent() {
        // At p=1 the printed i>s reception equals a third of the pure
        // value; transmission reduces exactly.
        let pure = nested(5, 2, 3, &FloodMode::Pure, &em()).unwrap();
        let ctrl = nested(5, 2, 3, &FloodMode::Controlled(int(1)), &em()).unwrap();
        assert_eq!(ctrl.b_t, pure.b_t);
        assert_eq!(&ctrl.b_r * int(3), pure.b_r);
        // The i<=s branch reduces exactly on both counts.
        let pure = nested(7, 4, 2, &FloodMode::Pure, &em()).unwrap();
        let ctrl = nested(7, 4, 2, &FloodMode::Controlled(int(1)), &em()).unwrap();
        assert_eq!(ctrl.b_t, pure.b_t);
        assert_eq!(ctrl.b_r, pure.b_r);
    }

    #[test]
    fn nested_domain_errors() {
        assert!(matches!(
            nested(2, 3, 0, &FloodMode::Pure, &em()),
            Err(AnalyticError::RegionTooDeep { .. })
        ));
        assert!(matches!(
            nested(5, 2, 6, &FloodMode::Pure, &em()),
            Err(AnalyticError::BroadcastDepthTooDeep { .. })
        ));
    }

    #[test]
    fn qary_examples() {
        let q2 = qary(2, 6, 2, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(q2.n_total, int(168));
        assert_eq!(q2.e_total, int(6260));
        assert_eq!(q2, binary(6, 2, &FloodMode::Pure, &em()).unwrap());

        let q3 = qary(3, 5, 3, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(q3.b_t, int(81));
        assert_eq!(q3.b_r, int(243));

        let q1 = qary(1, 5, 1, &FloodMode::Pure, &em()).unwrap();
        assert_eq!(q1.b_t, int(3));
        assert_eq!(q1.b_r, int(3));
    }

    #[test]
    fn probability_bounds_are_enforced() {
        assert!(FloodMode::controlled(ratio(1, 2)).is_ok());
        assert!(matches!(
            FloodMode::controlled(ratio(3, 2)),
            Err(AnalyticError::ProbabilityOutOfRange { .. })
        ));
        assert!(matches!(
            binary(5, 2, &FloodMode::Controlled(ratio(-1, 2)), &em()),
            Err(AnalyticError::ProbabilityOutOfRange { .. })
        ));
    }

    #[test]
    fn report_identities_hold() {
        let r = binary(9, 3, &FloodMode::Controlled(ratio(2, 7)), &em()).unwrap();
        assert_eq!(r.t_x, int(100) * (int(1) + &r.b_t));
        assert_eq!(r.r_x, int(5) * &r.b_r);
        assert_eq!(r.n_total, &r.b_t + &r.b_r);
        assert_eq!(r.e_total, &r.t_x + &r.r_x);
    }
}
