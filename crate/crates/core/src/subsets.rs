//! Lexicographic enumeration and ranking of k-subsets of `0..n`.

use itertools::Itertools;

/// Binomial coefficient, saturating at `usize::MAX`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// All k-subsets of `0..n`, each sorted ascending, in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n).combinations(k).collect()
}

/// Position of a sorted subset within [`k_subsets`]`(n, subset.len())`.
pub fn lex_rank(subset: &[usize], n: usize) -> usize {
    let k = subset.len();
    let mut rank = 0;
    let mut next = 0;
    for (i, &c) in subset.iter().enumerate() {
        for skipped in next..c {
            rank += binomial(n - 1 - skipped, k - 1 - i);
        }
        next = c + 1;
    }
    rank
}
