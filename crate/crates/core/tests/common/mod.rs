//! Reference implementations that share no code with the library.
#![allow(dead_code)]

use num_rational::Ratio;

pub type Q = Ratio<i64>;

/// (threshold, blicket mask).
pub type RefHyp = (u32, u32);

pub fn ref_lights(h: RefHyp, placed: u32) -> bool {
    (h.1 & placed).count_ones() >= h.0
}

/// Singletons (threshold 1) followed by pairs (threshold 2).
pub fn ref_default_space(n: u32) -> Vec<RefHyp> {
    let mut out: Vec<RefHyp> = (0..n).map(|i| (1, 1 << i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            out.push((2, (1 << i) | (1 << j)));
        }
    }
    out
}

/// Every nonempty blicket set with threshold 1, plus every set of two or
/// more with threshold 2.
pub fn ref_extended_space(n: u32) -> Vec<RefHyp> {
    let masks: Vec<u32> = (1..1u32 << n).collect();
    let mut out: Vec<RefHyp> = masks.iter().map(|&m| (1, m)).collect();
    out.extend(masks.iter().filter(|m| m.count_ones() >= 2).map(|&m| (2, m)));
    out
}

/// Exhaustive expectimax under a uniform prior, exact rationals, no
/// memoization and no pruning.
pub fn ref_min_expected(space: &[RefHyp], n: u32, support: &[usize]) -> Q {
    if support.len() <= 1 {
        return Q::from_integer(0);
    }
    let total = support.len() as i64;
    let mut best: Option<Q> = None;
    for placed in 0..1u32 << n {
        let (lit, dark): (Vec<usize>, Vec<usize>) =
            support.iter().partition(|&&i| ref_lights(space[i], placed));
        if lit.is_empty() || dark.is_empty() {
            continue;
        }
        let v = Q::from_integer(1)
            + Q::new(lit.len() as i64, total) * ref_min_expected(space, n, &lit)
            + Q::new(dark.len() as i64, total) * ref_min_expected(space, n, &dark);
        if best.is_none_or(|b| v < b) {
            best = Some(v);
        }
    }
    best.expect("hypotheses in the reference spaces are separable")
}

pub fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}
