//! Top intersection numbers of boundary divisors on `M̄_{0,L}`.
//!
//! A product of divisors is evaluated by restricting to one repeated divisor
//! `D_S ≅ M̄_{0,S∪•} × M̄_{0,S^c∪•}`. The other divisors restrict to boundary
//! divisors of the factors, and each extra copy of `D_S` becomes the normal
//! bundle `-ψ_• - ψ_•'`. On a factor, `ψ_p` is rewritten as the sum of the
//! divisors separating `p` from two fixed other points. Distinct pairwise
//! compatible divisors of full count meet transversally in one point.
//!
//! The node point of each factor is represented by the smallest label of the
//! opposite side, so no fresh labels are ever needed.

use std::collections::HashMap;

use crate::trees::{compatible, normalize_split};

#[derive(Default)]
pub struct Intersector {
    cache: HashMap<(u64, Vec<u64>), i64>,
}

fn binom(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

impl Intersector {
    pub fn new() -> Self {
        Self::default()
    }

    /// `∫_{M̄_{0,L}} Π D_{S_i}` for splits given by either side. Zero unless
    /// the number of divisors equals `|L| - 3`.
    pub fn top(&mut self, labels: u64, splits: &[u64]) -> i64 {
        let n = labels.count_ones() as usize;
        if n < 3 || splits.len() + 3 != n {
            return 0;
        }
        if splits.is_empty() {
            return 1;
        }
        let mut key: Vec<u64> = splits.iter().map(|&s| normalize_split(labels, s)).collect();
        key.sort_unstable();
        if let Some(&v) = self.cache.get(&(labels, key.clone())) {
            return v;
        }
        let v = self.compute(labels, &key);
        self.cache.insert((labels, key), v);
        v
    }

    fn compute(&mut self, labels: u64, key: &[u64]) -> i64 {
        for (i, &a) in key.iter().enumerate() {
            for &b in &key[i + 1..] {
                if !compatible(labels, a, b) {
                    return 0;
                }
            }
        }
        let repeated = key.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]);
        let Some(s) = repeated else {
            return 1;
        };
        let root = labels & labels.wrapping_neg();
        let side_a = s;
        let side_b = labels & !s;
        let a0 = side_a & side_a.wrapping_neg();
        let labels_a = side_a | root;
        let labels_b = side_b | a0;
        let mut divs_a = Vec::new();
        let mut divs_b = Vec::new();
        let mut copies = 0usize;
        for &t in key {
            if t == s {
                copies += 1;
            } else if t & side_a == t {
                divs_a.push(t);
            } else if t & side_a == side_a {
                divs_b.push((t & !side_a) | a0);
            } else {
                divs_b.push(t);
            }
        }
        let m = copies - 1;
        let dim_a = labels_a.count_ones() as usize - 3;
        let dim_b = labels_b.count_ones() as usize - 3;
        let mut total = 0i64;
        for j in 0..=m {
            if divs_a.len() + j != dim_a || divs_b.len() + (m - j) != dim_b {
                continue;
            }
            let ia = self.with_psi(labels_a, &mut divs_a.clone(), root, j);
            if ia == 0 {
                continue;
            }
            let ib = self.with_psi(labels_b, &mut divs_b.clone(), a0, m - j);
            total += binom(m, j) * ia * ib;
        }
        if m % 2 == 1 {
            -total
        } else {
            total
        }
    }

    /// `∫ Π D · ψ_p^j` with `ψ_p` expanded into boundary divisors.
    fn with_psi(&mut self, labels: u64, divs: &mut Vec<u64>, p_bit: u64, j: usize) -> i64 {
        if j == 0 {
            return self.top(labels, divs);
        }
        let others: Vec<u64> = (0..64).map(|l| 1u64 << l).filter(|&b| labels & b != 0 && b != p_bit).take(2).collect();
        if others.len() < 2 {
            return 0;
        }
        let avoid = others[0] | others[1];
        let free = labels & !avoid & !p_bit;
        let mut total = 0i64;
        // T = {p} ∪ (subset of the remaining labels), with |T| >= 2.
        let free_bits: Vec<u64> = (0..64).map(|l| 1u64 << l).filter(|&b| free & b != 0).collect();
        for mask in 1u64..(1u64 << free_bits.len()) {
            let t = free_bits
                .iter()
                .enumerate()
                .fold(p_bit, |acc, (i, &b)| if mask & (1 << i) != 0 { acc | b } else { acc });
            divs.push(t);
            total += self.with_psi(labels, divs, p_bit, j - 1);
            divs.pop();
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(ls: &[u32]) -> u64 {
        ls.iter().fold(0, |m, &l| m | (1u64 << l))
    }

    #[test]
    fn small_intersection_numbers() {
        let mut ix = Intersector::new();
        let l4 = mask(&[1, 2, 3, 4]);
        assert_eq!(ix.top(l4, &[mask(&[1, 2])]), 1);
        let l5 = mask(&[1, 2, 3, 4, 5]);
        assert_eq!(ix.top(l5, &[mask(&[1, 2]), mask(&[3, 4])]), 1);
        assert_eq!(ix.top(l5, &[mask(&[1, 2]), mask(&[1, 2])]), -1);
        assert_eq!(ix.top(l5, &[mask(&[1, 2]), mask(&[1, 3])]), 0);
    }

    #[test]
    fn psi_integrals() {
        // ∫_{M̄_{0,n}} ψ_1^{n-3} = 1.
        let mut ix = Intersector::new();
        for n in 4..=7u32 {
            let l = mask(&(1..=n).collect::<Vec<_>>());
            assert_eq!(ix.with_psi(l, &mut Vec::new(), 1 << 1, (n - 3) as usize), 1);
        }
    }

    #[test]
    fn self_intersection_via_keel_substitution() {
        // D_S^2 = -Σ_{T ≠ S, T separates ij|kl} D_T D_S, checked on M̄_{0,6}.
        let mut ix = Intersector::new();
        let l = mask(&[1, 2, 3, 4, 5, 6]);
        let s = mask(&[1, 2]);
        let third = mask(&[5, 6]);
        let lhs = ix.top(l, &[s, s, third]);
        let mut rhs = 0;
        for t in crate::trees::all_splits(l) {
            let sep = |x: u64| {
                let side = |b: u32| x & (1 << b) != 0;
                side(1) == side(2) && side(3) == side(4) && side(1) != side(3)
            };
            if sep(t) && normalize_split(l, t) != normalize_split(l, s) {
                rhs -= ix.top(l, &[t, s, third]);
            }
        }
        assert_eq!(lhs, rhs);
    }
}
