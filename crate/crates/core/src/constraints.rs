//! Must-link / cannot-link constraint sets: closure, violations, η search.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregators::{vb_ilc_fit, FitOptions, FitResult};
use crate::model::{PriorConfig, ResponseMatrix};
use crate::numerics::Real;
use crate::{Error, Result};

/// Candidate η values used when no grid is given.
pub const DEFAULT_ETA_GRID: [f64; 12] = [
    0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 100.0, 500.0,
];

/// Unordered item pair stored as (smaller, larger).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(usize, usize);

impl Pair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Pair(a, b)),
            std::cmp::Ordering::Greater => Ok(Pair(b, a)),
            std::cmp::Ordering::Equal => Err(Error::domain(format!("self-pair ({a}, {a})"))),
        }
    }

    pub fn first(self) -> usize {
        self.0
    }

    pub fn second(self) -> usize {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Must,
    Cannot,
}

impl Link {
    /// MRF weight w_{n,n'}.
    pub fn weight<F: Real>(self) -> F {
        match self {
            Link::Must => F::one(),
            Link::Cannot => -F::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CloseOptions {
    /// Also apply CL(i,j) ∧ CL(j,k) ⇒ ML(i,k). Only sound for two classes.
    pub binary_cl_rule: bool,
}

/// Must-link and cannot-link pairs. Never holds a pair in both sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    must_link: BTreeSet<Pair>,
    cannot_link: BTreeSet<Pair>,
    closed: bool,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(
        must_link: impl IntoIterator<Item = (usize, usize)>,
        cannot_link: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut cs = Self::new();
        for (a, b) in must_link {
            cs.add_must_link(a, b)?;
        }
        for (a, b) in cannot_link {
            cs.add_cannot_link(a, b)?;
        }
        Ok(cs)
    }

    pub fn add_must_link(&mut self, a: usize, b: usize) -> Result<()> {
        let p = Pair::new(a, b)?;
        if self.cannot_link.contains(&p) {
            return Err(Error::Conflict { a: p.0, b: p.1 });
        }
        if self.must_link.insert(p) {
            self.closed = false;
        }
        Ok(())
    }

    pub fn add_cannot_link(&mut self, a: usize, b: usize) -> Result<()> {
        let p = Pair::new(a, b)?;
        if self.must_link.contains(&p) {
            return Err(Error::Conflict { a: p.0, b: p.1 });
        }
        if self.cannot_link.insert(p) {
            self.closed = false;
        }
        Ok(())
    }

    pub fn must_link(&self) -> &BTreeSet<Pair> {
        &self.must_link
    }

    pub fn cannot_link(&self) -> &BTreeSet<Pair> {
        &self.cannot_link
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.must_link.len() + self.cannot_link.len()
    }

    pub fn is_empty(&self) -> bool {
        self.must_link.is_empty() && self.cannot_link.is_empty()
    }

    /// Items taking part in at least one constraint.
    pub fn items(&self) -> BTreeSet<usize> {
        self.pairs().flat_map(|(p, _)| [p.0, p.1]).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Pair, Link)> + '_ {
        self.must_link
            .iter()
            .map(|&p| (p, Link::Must))
            .chain(self.cannot_link.iter().map(|&p| (p, Link::Cannot)))
    }

    /// Logical closure with the default rules.
    pub fn close(&self) -> Result<Self> {
        self.close_with(CloseOptions::default())
    }

    /// Fixpoint of ML(i,j) ∧ ML(j,k) ⇒ ML(i,k) and ML(i,j) ∧ CL(j,k) ⇒ CL(i,k).
    ///
    /// Must-link components come from union-find; every cannot-link edge is
    /// lifted to all member pairs of the two components it joins.
    pub fn close_with(&self, opts: CloseOptions) -> Result<Self> {
        let items: Vec<usize> = self.items().into_iter().collect();
        let dense: BTreeMap<usize, usize> =
            items.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut uf = UnionFind::new(items.len());
        for p in &self.must_link {
            uf.union(dense[&p.0], dense[&p.1]);
        }
        let cl: Vec<(usize, usize)> = self
            .cannot_link
            .iter()
            .map(|p| (dense[&p.0], dense[&p.1]))
            .collect();

        if opts.binary_cl_rule {
            loop {
                self.check_cl_conflicts(&cl, &items, &mut uf)?;
                let mut opposite: BTreeMap<usize, usize> = BTreeMap::new();
                let mut merged = false;
                for &(a, b) in &cl {
                    let (ra, rb) = (uf.find(a), uf.find(b));
                    for (root, other) in [(ra, rb), (rb, ra)] {
                        match opposite.get(&root) {
                            Some(&prev) => {
                                if uf.find(prev) != uf.find(other) {
                                    uf.union(prev, other);
                                    merged = true;
                                }
                            }
                            None => {
                                opposite.insert(root, other);
                            }
                        }
                    }
                }
                if !merged {
                    break;
                }
            }
        }
        self.check_cl_conflicts(&cl, &items, &mut uf)?;

        let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &n) in items.iter().enumerate() {
            components.entry(uf.find(i)).or_default().push(n);
        }
        let mut out = Self::new();
        for members in components.values() {
            for (x, &a) in members.iter().enumerate() {
                for &b in &members[x + 1..] {
                    out.must_link.insert(Pair(a, b));
                }
            }
        }
        let lifted: BTreeSet<(usize, usize)> = cl
            .iter()
            .map(|&(a, b)| {
                let (ra, rb) = (uf.find(a), uf.find(b));
                (ra.min(rb), ra.max(rb))
            })
            .collect();
        for (ra, rb) in lifted {
            for &a in &components[&ra] {
                for &b in &components[&rb] {
                    out.cannot_link.insert(Pair::new(a, b)?);
                }
            }
        }
        out.closed = true;
        Ok(out)
    }

    fn check_cl_conflicts(
        &self,
        cl: &[(usize, usize)],
        items: &[usize],
        uf: &mut UnionFind,
    ) -> Result<()> {
        for &(a, b) in cl {
            if uf.find(a) == uf.find(b) {
                return Err(Error::Conflict {
                    a: items[a],
                    b: items[b],
                });
            }
        }
        Ok(())
    }

    /// Per-item neighbour lists (sorted) over `n_items` items.
    pub fn neighbors(&self, n_items: usize) -> Result<Vec<Vec<(usize, Link)>>> {
        let mut adj = vec![Vec::new(); n_items];
        for (p, link) in self.pairs() {
            if p.1 >= n_items {
                return Err(Error::domain(format!(
                    "constraint on item {} but only {n_items} items",
                    p.1
                )));
            }
            adj[p.0].push((p.1, link));
            adj[p.1].push((p.0, link));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok(adj)
    }
}

/// Number of stored constraints the labeling breaks.
pub fn count_violations(cs: &ConstraintSet, labels: &[usize]) -> usize {
    let ml = cs
        .must_link
        .iter()
        .filter(|p| labels[p.0] != labels[p.1])
        .count();
    let cl = cs
        .cannot_link
        .iter()
        .filter(|p| labels[p.0] == labels[p.1])
        .count();
    ml + cl
}

/// Known labels for a subset of items.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelConstraints(BTreeMap<usize, usize>);

impl LabelConstraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut lc = Self::new();
        for (item, class) in pairs {
            lc.insert(item, class)?;
        }
        Ok(lc)
    }

    /// Adds (item, class). Re-adding the same class is a no-op.
    pub fn insert(&mut self, item: usize, class: usize) -> Result<()> {
        match self.0.get(&item) {
            Some(&prev) if prev != class => Err(Error::LabelConflict {
                item,
                first: prev + 1,
                second: class + 1,
            }),
            Some(_) => Ok(()),
            None => {
                self.0.insert(item, class);
                Ok(())
            }
        }
    }

    pub fn get(&self, item: usize) -> Option<usize> {
        self.0.get(&item).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().map(|(&i, &k)| (i, k))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// ML between every same-class pair, CL between every cross-class pair.
///
/// The result is already closed.
pub fn derive_from_labels(labels: &LabelConstraints) -> ConstraintSet {
    let entries: Vec<(usize, usize)> = labels.iter().collect();
    let mut out = ConstraintSet::new();
    for (x, &(a, ka)) in entries.iter().enumerate() {
        for &(b, kb) in &entries[x + 1..] {
            // entries are sorted by item, so a < b
            if ka == kb {
                out.must_link.insert(Pair(a, b));
            } else {
                out.cannot_link.insert(Pair(a, b));
            }
        }
    }
    out.closed = true;
    out
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "F: Real")]
pub struct EtaSearch<F: Real> {
    pub best_eta: F,
    /// (η, N_V) per candidate, in input order.
    pub table: Vec<(F, usize)>,
    #[serde(skip)]
    pub best_fit: FitResult<F>,
}

/// Fits VB-ILC once per candidate η and keeps the one with fewest violations.
///
/// Ties go to the smallest η. Every candidate starts from `opts.init`.
pub fn eta_search<F: Real>(
    rm: &ResponseMatrix,
    priors: &PriorConfig<F>,
    cs: &ConstraintSet,
    candidates: &[F],
    opts: &FitOptions<F>,
) -> Result<EtaSearch<F>> {
    if candidates.is_empty() {
        return Err(Error::precondition("eta_search needs at least one candidate"));
    }
    let fits: Vec<FitResult<F>> = candidates
        .par_iter()
        .map(|&eta| {
            let mut o = opts.clone();
            o.eta = eta;
            vb_ilc_fit(rm, priors, cs, &o)
        })
        .collect::<Result<_>>()?;
    let table: Vec<(F, usize)> = candidates
        .iter()
        .zip(&fits)
        .map(|(&eta, fit)| (eta, fit.n_violations.unwrap_or(0)))
        .collect();
    let best = (0..table.len())
        .min_by(|&i, &j| {
            table[i]
                .1
                .cmp(&table[j].1)
                .then(table[i].0.partial_cmp(&table[j].0).unwrap_or(std::cmp::Ordering::Equal))
        })
        .expect("non-empty");
    Ok(EtaSearch {
        best_eta: table[best].0,
        table,
        best_fit: fits.into_iter().nth(best).expect("index in range"),
    })
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
    }
}
