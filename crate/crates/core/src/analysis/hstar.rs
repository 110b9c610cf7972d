//! The support-overlap quantity `h(β)` and its optimised version `h*(β)`.
//!
//! A window of supports is scored against an ordered list of disjoint
//! blocks `S_1, …, S_L`: every support must lie inside `S_i ∪ S_{i+1}` for
//! some `i`, and the score is the largest number of supports inside one such
//! adjacent pair (with `S_{L+1} = ∅`).

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::synth::SupportSequence;

/// Brute-force search is limited to windows whose support union has at most
/// this many indices.
pub const H_BRUTE_MAX_UNION: usize = 12;
pub const H_BRUTE_MAX_BETA: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMode {
    /// Exact minimum over all block families.
    Brute,
    /// Blocks `T^[i] \ T^[i+1]` built from the distinct supports in order.
    Constructive,
}

/// `h` for a given ordered block list. Blocks may be empty (gaps).
pub fn h_for_partition(window: &[Vec<usize>], blocks: &[Vec<usize>]) -> Result<usize> {
    let mut owner = std::collections::HashMap::new();
    for (b, block) in blocks.iter().enumerate() {
        for &i in block {
            if owner.insert(i, b).is_some() {
                return Err(Error::ModelViolation(format!(
                    "index {i} appears in more than one block"
                )));
            }
        }
    }
    let pairs = blocks.len().max(1);
    let mut counts = vec![0usize; pairs];
    for sup in window {
        let mut ids = BTreeSet::new();
        for i in sup {
            match owner.get(i) {
                Some(&b) => {
                    ids.insert(b);
                }
                None => {
                    return Err(Error::ModelViolation(format!(
                        "support index {i} is not covered by any block"
                    )))
                }
            }
        }
        let lo = ids.first().copied();
        let hi = ids.last().copied();
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if hi - lo > 1 {
                return Err(Error::ModelViolation(format!(
                    "support {sup:?} spans blocks {lo} to {hi}"
                )));
            }
        }
        for (i, c) in counts.iter_mut().enumerate() {
            let inside = ids.iter().all(|&b| b == i || b == i + 1);
            if inside {
                *c += 1;
            }
        }
    }
    Ok(counts.into_iter().max().unwrap_or(0))
}

/// Blocks `T^[i] \ T^[i+1]` over the distinct nonempty supports of the window
/// in order of appearance; the last support is split as if the motion went
/// on past the window. Pairwise disjoint supports are used as blocks directly,
/// which also covers supports that recur.
pub fn h_constructive_partition(window: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    let mut distinct: Vec<&Vec<usize>> = Vec::new();
    for sup in window.iter().filter(|s| !s.is_empty()) {
        if distinct.last().is_none_or(|last| *last != sup) {
            distinct.push(sup);
        }
    }
    // pairwise disjoint supports are their own blocks, even when they recur
    let mut unique: Vec<&Vec<usize>> = Vec::new();
    for sup in &distinct {
        if !unique.contains(sup) {
            unique.push(sup);
        }
    }
    let mut union = BTreeSet::new();
    if unique.iter().all(|sup| sup.iter().all(|&i| union.insert(i))) {
        return Ok(unique.into_iter().cloned().collect());
    }
    let mut blocks = Vec::with_capacity(distinct.len());
    for (i, cur) in distinct.iter().enumerate() {
        match distinct.get(i + 1) {
            Some(next) => blocks.push(cur.iter().copied().filter(|x| !next.contains(x)).collect()),
            // continue the motion past the window: the last support splits
            // into its overlap with the previous one and the new part
            None if i > 0 => {
                let prev = distinct[i - 1];
                let (kept, fresh): (Vec<usize>, Vec<usize>) = cur.iter().partition(|x| prev.contains(x));
                blocks.push(kept);
                blocks.push(fresh);
            }
            None => blocks.push((*cur).clone()),
        }
    }
    blocks.retain(|b| !b.is_empty());
    let mut seen = BTreeSet::new();
    for block in &blocks {
        for &i in block {
            if !seen.insert(i) {
                return Err(Error::ModelViolation(
                    "supports do not move contiguously (constructive blocks overlap)".into(),
                ));
            }
        }
    }
    Ok(blocks)
}

/// `h` of a single window.
pub fn h_window(window: &[Vec<usize>], mode: HMode) -> Result<usize> {
    match mode {
        HMode::Constructive => {
            let blocks = h_constructive_partition(window)?;
            h_for_partition(window, &blocks)
        }
        HMode::Brute => brute(window),
    }
}

/// `max_u h` over consecutive windows of length `beta` (the last window may
/// be shorter).
pub fn h_star(supports: &SupportSequence, beta: usize, mode: HMode) -> Result<usize> {
    if beta == 0 {
        return Err(Error::InvalidInput("beta must be at least 1".into()));
    }
    let mut worst = 0;
    for window in supports.supports.chunks(beta) {
        worst = worst.max(h_window(window, mode)?);
    }
    Ok(worst)
}

/// Exhaustive search over set partitions of the support union.
///
/// Given a partition, the block order is forced: a support touching two
/// blocks needs them adjacent, so the "touching" graph must be a union of
/// paths, and separate paths are best kept apart by a gap.
fn brute(window: &[Vec<usize>]) -> Result<usize> {
    if window.len() > H_BRUTE_MAX_BETA {
        return Err(Error::Precondition(format!(
            "brute-force h needs beta ≤ {H_BRUTE_MAX_BETA}, got {}",
            window.len()
        )));
    }
    let union: Vec<usize> = window
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if union.len() > H_BRUTE_MAX_UNION {
        return Err(Error::Precondition(format!(
            "brute-force h needs at most {H_BRUTE_MAX_UNION} distinct indices, got {}",
            union.len()
        )));
    }
    if union.is_empty() {
        return Ok(window.len());
    }
    let pos = |i: usize| union.binary_search(&i).unwrap();
    let sups: Vec<Vec<usize>> = window
        .iter()
        .map(|s| s.iter().map(|&i| pos(i)).collect())
        .collect();
    // supports that become fully assigned once element e is placed
    let m = union.len();
    let mut complete_at: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (t, s) in sups.iter().enumerate() {
        if let Some(&last) = s.iter().max() {
            complete_at[last].push(t);
        }
    }
    let mut search = Search {
        sups: &sups,
        complete_at: &complete_at,
        label: vec![0; m],
        best: window.len(),
    };
    search.dfs(0, 0);
    Ok(search.best)
}

struct Search<'a> {
    sups: &'a [Vec<usize>],
    complete_at: &'a [Vec<usize>],
    label: Vec<usize>,
    best: usize,
}

impl Search<'_> {
    fn dfs(&mut self, e: usize, used: usize) {
        if e == self.label.len() {
            if let Some(h) = self.score(used) {
                self.best = self.best.min(h);
            }
            return;
        }
        for b in 0..=used {
            self.label[e] = b;
            if self.complete_at[e].iter().all(|&t| self.block_count(t) <= 2) {
                self.dfs(e + 1, used.max(b + 1));
            }
        }
    }

    fn blocks_of(&self, t: usize) -> BTreeSet<usize> {
        self.sups[t].iter().map(|&e| self.label[e]).collect()
    }

    fn block_count(&self, t: usize) -> usize {
        self.blocks_of(t).len()
    }

    fn score(&self, nblocks: usize) -> Option<usize> {
        let block_sets: Vec<BTreeSet<usize>> = (0..self.sups.len()).map(|t| self.blocks_of(t)).collect();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nblocks];
        for ids in &block_sets {
            if ids.len() == 2 {
                let a = *ids.first().unwrap();
                let b = *ids.last().unwrap();
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        if adj.iter().any(|s| s.len() > 2) {
            return None;
        }
        // a graph with max degree 2 is a union of paths iff it has no cycle
        let mut parent: Vec<usize> = (0..nblocks).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for a in 0..nblocks {
            for &b in adj[a].iter().filter(|&&b| b > a) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra == rb {
                    return None;
                }
                parent[ra] = rb;
            }
        }
        let mut h = 0;
        for a in 0..nblocks {
            let single = block_sets.iter().filter(|ids| ids.iter().all(|&b| b == a)).count();
            h = h.max(single);
            for &b in adj[a].iter().filter(|&&b| b > a) {
                let pair = block_sets
                    .iter()
                    .filter(|ids| ids.iter().all(|&x| x == a || x == b))
                    .count();
                h = h.max(pair);
            }
        }
        Some(h)
    }
}
