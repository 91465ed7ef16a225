//! Bogolyubov clusters (connected components of the "collided in `[0, t]`"
//! relation) and backward clusters of tagged particles, computed from a
//! [`CollisionLog`]. Wall events never link particles.

use crate::error::{Error, Result};
use crate::log::{CollisionLog, Label};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

/// Union-find over labels `1..=N`, advanced monotonically in time.
#[derive(Debug, Clone)]
pub struct ClusterPartition {
    parent: Vec<u32>,
    size: Vec<u32>,
    time: f64,
    /// Index of the first unprocessed pair event.
    cursor: usize,
    components: usize,
    largest: u32,
}

impl ClusterPartition {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            time: 0.0,
            cursor: 0,
            components: n,
            largest: u32::from(n > 0),
        }
    }

    pub fn particles(&self) -> usize {
        self.parent.len()
    }

    /// Time up to which events have been merged.
    pub fn time(&self) -> f64 {
        self.time
    }

    fn index(&self, label: Label) -> Result<usize> {
        if label == 0 || label as usize > self.parent.len() {
            return Err(Error::LabelOutOfRange { label, n: self.parent.len() });
        }
        Ok(label as usize - 1)
    }

    fn root(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Representative label of the cluster containing `label`.
    pub fn find(&mut self, label: Label) -> Result<Label> {
        let i = self.index(label)?;
        Ok(self.root(i) as Label + 1)
    }

    pub fn cluster_size(&mut self, label: Label) -> Result<usize> {
        let i = self.index(label)?;
        let r = self.root(i);
        Ok(self.size[r] as usize)
    }

    /// Merges two clusters; returns whether they were distinct.
    pub fn union(&mut self, a: Label, b: Label) -> Result<bool> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let (mut ra, mut rb) = (self.root(ia), self.root(ib));
        if ra == rb {
            return Ok(false);
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        self.largest = self.largest.max(self.size[ra]);
        self.components -= 1;
        Ok(true)
    }

    /// Merges every pair event of `log` with time in `(self.time, t]`.
    pub fn advance(&mut self, log: &CollisionLog, t: f64) -> Result<()> {
        if t < self.time {
            return Err(Error::InvalidArgument(format!("cannot rewind partition from {} to {t}", self.time)));
        }
        if log.particles() != self.particles() {
            return Err(Error::InvalidArgument(format!(
                "log has {} particles, partition {}",
                log.particles(),
                self.particles()
            )));
        }
        let pairs = log.pairs();
        while let Some(e) = pairs.get(self.cursor) {
            if e.t > t {
                break;
            }
            self.union(e.i, e.j)?;
            self.cursor += 1;
        }
        self.time = t;
        Ok(())
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    pub fn largest(&self) -> usize {
        self.largest as usize
    }

    /// Clusters as sorted label lists, ordered by smallest member.
    pub fn components(&mut self) -> Vec<Vec<Label>> {
        let mut by_root: BTreeMap<usize, Vec<Label>> = BTreeMap::new();
        for i in 0..self.parent.len() {
            let r = self.root(i);
            by_root.entry(r).or_default().push(i as Label + 1);
        }
        let mut out: Vec<Vec<Label>> = by_root.into_values().collect();
        out.sort();
        out
    }
}

/// Bogolyubov partition at time `t`.
pub fn build_partition(log: &CollisionLog, n: usize, t: f64) -> Result<ClusterPartition> {
    let mut p = ClusterPartition::new(n);
    p.advance(log, t)?;
    Ok(p)
}

/// Histogram `k ↦ n_t(k)` of cluster sizes for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSizeDistribution {
    pub t: f64,
    pub particles: usize,
    pub counts: BTreeMap<usize, u64>,
}

impl ClusterSizeDistribution {
    pub fn count(&self, k: usize) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    /// `N_c`, the number of clusters.
    pub fn cluster_count(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `f^N(k) = k n(k) / N`.
    pub fn mass_fraction(&self, k: usize) -> f64 {
        (k as u64 * self.count(k)) as f64 / self.particles as f64
    }

    /// `g^N(k) = n(k) / N_c`.
    pub fn cluster_fraction(&self, k: usize) -> f64 {
        let nc = self.cluster_count();
        if nc == 0 {
            return 0.0;
        }
        self.count(k) as f64 / nc as f64
    }

    pub fn clusters_per_particle(&self) -> f64 {
        self.cluster_count() as f64 / self.particles as f64
    }

    pub fn largest(&self) -> usize {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    pub fn second_largest(&self) -> usize {
        let mut it = self.counts.iter().rev();
        match it.next() {
            Some((&k, &c)) if c >= 2 => k,
            Some(_) => it.next().map(|(&k, _)| k).unwrap_or(0),
            None => 0,
        }
    }

    pub fn largest_fraction(&self) -> f64 {
        self.largest() as f64 / self.particles as f64
    }

    /// `(k, g^N(k))` for every occupied size.
    pub fn g_points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.counts.keys().map(move |&k| (k, self.cluster_fraction(k)))
    }

    /// `(k, f^N(k))` for every occupied size.
    pub fn f_points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.counts.keys().map(move |&k| (k, self.mass_fraction(k)))
    }
}

/// Size histogram of a partition. O(N).
pub fn size_distribution(p: &mut ClusterPartition) -> ClusterSizeDistribution {
    let mut counts = BTreeMap::new();
    for i in 0..p.parent.len() {
        if p.root(i) == i {
            *counts.entry(p.size[i] as usize).or_insert(0) += 1;
        }
    }
    ClusterSizeDistribution { t: p.time, particles: p.particles(), counts }
}

/// Size distributions on an increasing time grid from a single pass.
pub fn snapshots(log: &CollisionLog, times: &[f64]) -> Result<Vec<ClusterSizeDistribution>> {
    let mut p = ClusterPartition::new(log.particles());
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        p.advance(log, t)?;
        out.push(size_distribution(&mut p));
    }
    Ok(out)
}

/// Particles that influenced `tag` on `[0, t]`, with the time at which each
/// entered the backward history.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardCluster {
    pub tag: Label,
    pub t: f64,
    pub entry_times: BTreeMap<Label, f64>,
}

impl BackwardCluster {
    pub fn size(&self) -> usize {
        self.entry_times.len()
    }

    pub fn members(&self) -> impl Iterator<Item = Label> + '_ {
        self.entry_times.keys().copied()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.entry_times.contains_key(&label)
    }
}

/// Backward cluster of `tag` by scanning the log from `t` down to zero.
/// A collision between two members is a recollision and adds nothing.
pub fn backward_cluster(log: &CollisionLog, tag: Label, t: f64) -> Result<BackwardCluster> {
    if tag == 0 || tag as usize > log.particles() {
        return Err(Error::LabelOutOfRange { label: tag, n: log.particles() });
    }
    let mut entry_times = BTreeMap::from([(tag, t)]);
    for e in log.pairs_until(t).iter().rev() {
        match (entry_times.contains_key(&e.i), entry_times.contains_key(&e.j)) {
            (true, false) => {
                entry_times.insert(e.j, e.t);
            }
            (false, true) => {
                entry_times.insert(e.i, e.t);
            }
            _ => {}
        }
    }
    Ok(BackwardCluster { tag, t, entry_times })
}

/// Per-particle event lists (compressed rows) keyed by log position, which
/// is the causal order even among equal timestamps.
struct ContactIndex {
    offsets: Vec<usize>,
    positions: Vec<u32>,
    partners: Vec<u32>,
    events: usize,
}

impl ContactIndex {
    fn new(log: &CollisionLog, t: f64) -> Self {
        let n = log.particles();
        let pairs = log.pairs_until(t);
        let mut offsets = vec![0usize; n + 1];
        for e in pairs {
            offsets[e.i as usize] += 1;
            offsets[e.j as usize] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut positions = vec![0u32; offsets[n]];
        let mut partners = vec![0u32; offsets[n]];
        for (q, e) in pairs.iter().enumerate() {
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                let slot = fill[a as usize - 1];
                positions[slot] = q as u32;
                partners[slot] = b - 1;
                fill[a as usize - 1] += 1;
            }
        }
        Self { offsets, positions, partners, events: pairs.len() }
    }

    fn row(&self, i: usize) -> (&[u32], &[u32]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.positions[r.clone()], &self.partners[r])
    }
}

/// Absent from the backward cluster.
const NOT_ENTERED: i64 = -1;

/// Backward-cluster size of `tag` via latest-entry search on the contact
/// index; same result as the reverse scan.
fn backward_size_indexed(
    index: &ContactIndex,
    tag: usize,
    entry: &mut [i64],
    touched: &mut Vec<usize>,
    heap: &mut BinaryHeap<(i64, Reverse<u32>)>,
) -> usize {
    heap.clear();
    // the tag is live through every indexed event, later members only
    // through events logged before their entry
    entry[tag] = index.events as i64;
    touched.push(tag);
    heap.push((entry[tag], Reverse(tag as u32)));
    while let Some((tau, Reverse(m))) = heap.pop() {
        let m = m as usize;
        if tau < entry[m] {
            continue;
        }
        let (positions, partners) = index.row(m);
        let end = positions.partition_point(|&q| (q as i64) < tau);
        for (&q, &p) in positions[..end].iter().zip(&partners[..end]).rev() {
            let (q, p) = (q as i64, p as usize);
            if entry[p] < q {
                if entry[p] == NOT_ENTERED {
                    touched.push(p);
                }
                entry[p] = q;
                heap.push((q, Reverse(p as u32)));
            }
        }
    }
    let size = touched.len();
    for &i in touched.iter() {
        entry[i] = NOT_ENTERED;
    }
    touched.clear();
    size
}

/// Fraction of particles whose backward cluster at `t` has each size.
pub fn backward_size_histogram(log: &CollisionLog, n: usize, t: f64) -> Result<BTreeMap<usize, f64>> {
    if log.particles() != n {
        return Err(Error::InvalidArgument(format!("log has {} particles, expected {n}", log.particles())));
    }
    let index = ContactIndex::new(log, t);
    let mut entry = vec![NOT_ENTERED; n];
    let mut touched = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for tag in 0..n {
        let size = backward_size_indexed(&index, tag, &mut entry, &mut touched, &mut heap);
        *counts.entry(size).or_insert(0) += 1;
    }
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect())
}
