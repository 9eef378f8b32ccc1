//! Hash-based color refinement: 1-WL on vertices and 2-FWL on ordered pairs,
//! plus a synchronized two-graph isomorphism test.
//!
//! Colors are dense ids assigned canonically each round: the distinct keys are
//! sorted and numbered in sorted order, so ids — and therefore histograms —
//! depend only on the graph up to isomorphism, never on node numbering or
//! insertion order. Refinement only ever splits classes, so a round that
//! leaves the class count unchanged leaves the partition unchanged and the
//! coloring is stable. `iterations` counts the rounds that actually split
//! something; a graph whose initial coloring is already stable reports 0.

use crate::graph::Graph;
use serde::Serialize;
use std::collections::HashMap;

/// Stable vertex coloring produced by [`wl1_refine`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    /// Color id per vertex.
    pub colors: Vec<u32>,
    /// Refinement rounds that split at least one class.
    pub iterations: usize,
}

/// Stable ordered-pair coloring produced by [`fwl2_refine`]; pair `(i, j)` is
/// at flat index `i·n + j` (row-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairColoring {
    pub n: usize,
    pub colors: Vec<u32>,
    pub iterations: usize,
}

/// Outcome of the synchronized refinement test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum IsoVerdict {
    /// Color histograms diverged at this round (0 = initial coloring).
    Distinguished { round: usize },
    /// Refinement stabilized on both graphs with identical histograms.
    Indistinguishable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementKind {
    Wl1,
    Fwl2,
}

/// Sorted `(color, multiplicity)` pairs.
pub fn color_histogram(colors: &[u32]) -> Vec<(u32, usize)> {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &c in colors {
        *counts.entry(c).or_insert(0) += 1;
    }
    let mut hist: Vec<(u32, usize)> = counts.into_iter().collect();
    hist.sort_unstable();
    hist
}

/// Dense ids for `keys`, numbering distinct keys in their sorted order.
/// Returns the ids and the number of distinct keys.
fn canonical_relabel<K: Ord + Clone>(keys: &[K]) -> (Vec<u32>, usize) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let ids = keys
        .iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect();
    (ids, sorted.len())
}

/// Bit pattern of a feature row, used as an exact equality key.
fn feature_key(g: &Graph, i: usize) -> Vec<u64> {
    match g.features() {
        Some(f) => f.row(i).iter().map(|v| v.to_bits()).collect(),
        None => Vec::new(),
    }
}

fn wl1_initial_keys(g: &Graph) -> Vec<Vec<u64>> {
    (0..g.n()).map(|i| feature_key(g, i)).collect()
}

fn wl1_round_keys(g: &Graph, colors: &[u32]) -> Vec<(u32, Vec<u32>)> {
    (0..g.n())
        .map(|i| {
            let mut neigh: Vec<u32> = g.neighbors(i).map(|j| colors[j]).collect();
            neigh.sort_unstable();
            (colors[i], neigh)
        })
        .collect()
}

/// Initial 2-FWL key of the ordered pair `(i, j)`: the pair's isomorphism
/// type — diagonal flag, endpoint features, adjacency.
fn fwl2_initial_keys(g: &Graph) -> Vec<(bool, Vec<u64>, Vec<u64>, bool)> {
    let n = g.n();
    let mut keys = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            keys.push((i == j, feature_key(g, i), feature_key(g, j), g.has_edge(i, j)));
        }
    }
    keys
}

/// One 2-FWL round: pair `(i, j)` is rekeyed by its old color and the sorted
/// multiset over `k` of `(color(i,k), color(k,j))`.
fn fwl2_round_keys(n: usize, colors: &[u32]) -> Vec<(u32, Vec<(u32, u32)>)> {
    let mut keys = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut ms: Vec<(u32, u32)> = (0..n)
                .map(|k| (colors[i * n + k], colors[k * n + j]))
                .collect();
            ms.sort_unstable();
            keys.push((colors[i * n + j], ms));
        }
    }
    keys
}

fn default_rounds(n: usize) -> usize {
    n * n
}

/// 1-WL vertex refinement to stability (or `max_rounds`, default n²).
pub fn wl1_refine(g: &Graph, max_rounds: Option<usize>) -> Coloring {
    let rounds = max_rounds.unwrap_or_else(|| default_rounds(g.n()));
    let (mut colors, mut classes) = canonical_relabel(&wl1_initial_keys(g));
    let mut iterations = 0;
    for _ in 0..rounds {
        let (next, next_classes) = canonical_relabel(&wl1_round_keys(g, &colors));
        if next_classes == classes {
            break;
        }
        colors = next;
        classes = next_classes;
        iterations += 1;
    }
    Coloring { colors, iterations }
}

/// 2-FWL ordered-pair refinement to stability (or `max_rounds`, default n²).
pub fn fwl2_refine(g: &Graph, max_rounds: Option<usize>) -> PairColoring {
    let n = g.n();
    let rounds = max_rounds.unwrap_or_else(|| default_rounds(n));
    let (mut colors, mut classes) = canonical_relabel(&fwl2_initial_keys(g));
    let mut iterations = 0;
    for _ in 0..rounds {
        let (next, next_classes) = canonical_relabel(&fwl2_round_keys(n, &colors));
        if next_classes == classes {
            break;
        }
        colors = next;
        classes = next_classes;
        iterations += 1;
    }
    PairColoring {
        n,
        colors,
        iterations,
    }
}

/// Synchronized refinement over two graphs sharing one color dictionary.
///
/// Both graphs are rekeyed jointly each round (canonical ids over the union
/// of their keys), their histograms compared; the first divergence yields
/// `Distinguished { round }`, stability with equal histograms yields
/// `Indistinguishable`. Refinement never merges classes, so equal stable
/// histograms cannot diverge later.
pub fn iso_test(
    g1: &Graph,
    g2: &Graph,
    kind: RefinementKind,
    max_rounds: Option<usize>,
) -> IsoVerdict {
    let rounds = max_rounds.unwrap_or_else(|| default_rounds(g1.n().max(g2.n())));
    match kind {
        RefinementKind::Wl1 => {
            let start = relabel_joint(wl1_initial_keys(g1), wl1_initial_keys(g2));
            run_iso(start, rounds, |colors1, colors2| {
                (wl1_round_keys(g1, colors1), wl1_round_keys(g2, colors2))
            })
        }
        RefinementKind::Fwl2 => {
            let start = relabel_joint(fwl2_initial_keys(g1), fwl2_initial_keys(g2));
            run_iso(start, rounds, |colors1, colors2| {
                (
                    fwl2_round_keys(g1.n(), colors1),
                    fwl2_round_keys(g2.n(), colors2),
                )
            })
        }
    }
}

/// Canonical ids over the union of two key lists, split back per graph.
fn relabel_joint<K: Ord + Clone>(k1: Vec<K>, k2: Vec<K>) -> (Vec<u32>, Vec<u32>, usize) {
    let len1 = k1.len();
    let mut joint = k1;
    joint.extend(k2);
    let (ids, classes) = canonical_relabel(&joint);
    let (c1, c2) = ids.split_at(len1);
    (c1.to_vec(), c2.to_vec(), classes)
}

fn run_iso<K: Ord + Clone, F>(
    start: (Vec<u32>, Vec<u32>, usize),
    rounds: usize,
    mut round_keys: F,
) -> IsoVerdict
where
    F: FnMut(&[u32], &[u32]) -> (Vec<K>, Vec<K>),
{
    let (mut colors1, mut colors2, mut classes) = start;
    if color_histogram(&colors1) != color_histogram(&colors2) {
        return IsoVerdict::Distinguished { round: 0 };
    }
    for round in 1..=rounds {
        let (k1, k2) = round_keys(&colors1, &colors2);
        let (next1, next2, next_classes) = relabel_joint(k1, k2);
        if color_histogram(&next1) != color_histogram(&next2) {
            return IsoVerdict::Distinguished { round };
        }
        if next_classes == classes {
            return IsoVerdict::Indistinguishable;
        }
        colors1 = next1;
        colors2 = next2;
        classes = next_classes;
    }
    IsoVerdict::Indistinguishable
}
