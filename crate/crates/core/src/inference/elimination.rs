//! Sum-product variable elimination with a greedy min-fill order.

use std::collections::BTreeSet;

use super::Factor;

/// Greedy min-fill order over `vars`; ties go to the smallest index.
pub fn min_fill_order(scopes: &[Vec<usize>], vars: &[usize]) -> Vec<usize> {
    let max = scopes.iter().flatten().chain(vars).copied().max().map_or(0, |m| m + 1);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); max];
    for s in scopes {
        for &a in s {
            for &b in s {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: BTreeSet<usize> = vars.iter().copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for &v in &remaining {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if !adj[a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            if best.is_none_or(|(f, _)| fill < f) {
                best = Some((fill, v));
            }
        }
        let (_, v) = best.unwrap();
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
            adj[a].remove(&v);
        }
        adj[v].clear();
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// Multiplies `factors` and sums out every variable not in `keep`. The
/// result's variables are ordered as in `keep`.
pub fn eliminate(mut factors: Vec<Factor>, keep: &[usize]) -> Factor {
    let mut all: BTreeSet<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
    for k in keep {
        all.remove(k);
    }
    let elim: Vec<usize> = all.into_iter().collect();
    let scopes: Vec<Vec<usize>> = factors.iter().map(|f| f.vars.clone()).collect();
    for v in min_fill_order(&scopes, &elim) {
        let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = without;
        let mut it = with.into_iter();
        let Some(first) = it.next() else { continue };
        let prod = it.fold(first, |acc, f| acc.product(&f));
        factors.push(prod.sum_out(v));
    }
    let result = factors.into_iter().fold(Factor::scalar(1.0), |acc, f| acc.product(&f));
    if keep.is_empty() {
        result
    } else {
        result.permuted(keep)
    }
}
