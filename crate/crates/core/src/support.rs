//! Integer-triple supports, the coordinate and mirror symmetries acting on
//! them, and orbit decomposition.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(s1, s2, s3)` of a support.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Triple(pub [i64; 3]);

impl Triple {
    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        Triple([a, b, c])
    }

    #[inline]
    pub fn get(&self, axis: usize) -> i64 {
        self.0[axis]
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &Triple) -> Triple {
        Triple([self.0[0] + other.0[0], self.0[1] + other.0[1], self.0[2] + other.0[2]])
    }

    pub fn sub(&self, other: &Triple) -> Triple {
        Triple([self.0[0] - other.0[0], self.0[1] - other.0[1], self.0[2] - other.0[2]])
    }

    /// `(s_{σ(1)}, s_{σ(2)}, s_{σ(3)})` with zero-based `sigma`.
    pub fn permute(&self, sigma: [usize; 3]) -> Triple {
        Triple([self.0[sigma[0]], self.0[sigma[1]], self.0[sigma[2]]])
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A finite, canonically ordered set of triples.
///
/// Triples are kept in lexicographic order so that every matrix or vector
/// indexed by the support is reproducible across runs.
#[derive(Clone)]
pub struct Support {
    triples: Vec<Triple>,
    index: HashMap<Triple, usize>,
    degree: Option<i64>,
    alphabets: [Vec<i64>; 3],
    symbols: Vec<[usize; 3]>,
    b_bound: Option<i64>,
}

impl PartialEq for Support {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for Support {}

impl fmt::Debug for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Support")
            .field("degree", &self.degree)
            .field("len", &self.triples.len())
            .field("triples", &self.triples)
            .finish()
    }
}

/// Builds the canonical support of a list of triples.
pub fn make_support<I: IntoIterator<Item = Triple>>(triples: I) -> Result<Support> {
    let set: BTreeSet<Triple> = triples.into_iter().collect();
    if set.is_empty() {
        return Err(Error::EmptySupport);
    }
    let triples: Vec<Triple> = set.into_iter().collect();
    let index = triples.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    let first = triples[0].sum();
    let degree = triples.iter().all(|t| t.sum() == first).then_some(first);

    let alphabets: [Vec<i64>; 3] = std::array::from_fn(|axis| {
        let set: BTreeSet<i64> = triples.iter().map(|t| t.get(axis)).collect();
        set.into_iter().collect()
    });
    let symbols = triples
        .iter()
        .map(|t| {
            std::array::from_fn(|axis| {
                alphabets[axis]
                    .binary_search(&t.get(axis))
                    .expect("coordinate is in its alphabet")
            })
        })
        .collect();

    let nonnegative = triples.iter().all(|t| t.0.iter().all(|&c| c >= 0));
    let b_bound = nonnegative.then(|| 1 + triples.iter().flat_map(|t| t.0).max().unwrap_or(0));

    Ok(Support {
        triples,
        index,
        degree,
        alphabets,
        symbols,
        b_bound,
    })
}

impl Support {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, i: usize) -> Triple {
        self.triples[i]
    }

    pub fn index_of(&self, t: &Triple) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.index.contains_key(t)
    }

    /// The common coordinate sum, if the support is tight.
    pub fn degree(&self) -> Option<i64> {
        self.degree
    }

    pub fn is_tight(&self) -> bool {
        self.degree.is_some()
    }

    pub fn require_tight(&self) -> Result<i64> {
        self.degree.ok_or_else(|| {
            let d = self.triples[0].sum();
            let bad = self.triples.iter().find(|t| t.sum() != d).copied().unwrap_or(self.triples[0]);
            Error::NotTight(bad, d)
        })
    }

    /// Sorted coordinate values α_ℓ(S) along `axis`.
    pub fn alphabet(&self, axis: usize) -> &[i64] {
        &self.alphabets[axis]
    }

    /// Position of triple `i`'s coordinate along `axis` inside its alphabet.
    #[inline]
    pub fn symbol(&self, i: usize, axis: usize) -> usize {
        self.symbols[i][axis]
    }

    pub fn b_bound(&self) -> Option<i64> {
        self.b_bound
    }
}

/// A subgroup `L` of the permutations of the three coordinates.
///
/// Permutations are zero-based: `[1, 0, 2]` swaps the first two coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateGroup {
    perms: Vec<[usize; 3]>,
}

pub const IDENTITY: [usize; 3] = [0, 1, 2];

fn compose(a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
    // (a∘b)(i) = a(b(i)) on positions
    [b[a[0]], b[a[1]], b[a[2]]]
}

impl CoordinateGroup {
    /// Closure of the given generators under composition.
    pub fn generated_by(generators: &[[usize; 3]]) -> Result<Self> {
        for g in generators {
            let mut seen = *g;
            seen.sort_unstable();
            if seen != IDENTITY {
                return Err(Error::InvalidConfig(format!("{g:?} is not a permutation of 0..3")));
            }
        }
        let mut set: BTreeSet<[usize; 3]> = BTreeSet::from([IDENTITY]);
        loop {
            let current: Vec<_> = set.iter().copied().collect();
            let mut grew = false;
            for a in &current {
                for g in generators {
                    if set.insert(compose(*a, *g)) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        Ok(CoordinateGroup {
            perms: set.into_iter().collect(),
        })
    }

    pub fn trivial() -> Self {
        CoordinateGroup { perms: vec![IDENTITY] }
    }

    /// The full symmetric group S_3.
    pub fn full() -> Self {
        Self::generated_by(&[[1, 0, 2], [1, 2, 0]]).expect("valid generators")
    }

    /// `{id, (2 3)}`: swaps the second and third coordinates.
    pub fn swap_last_two() -> Self {
        Self::generated_by(&[[0, 2, 1]]).expect("valid generators")
    }

    pub fn perms(&self) -> &[[usize; 3]] {
        &self.perms
    }

    pub fn order(&self) -> usize {
        self.perms.len()
    }

    /// Canonical orbit representative: the lexicographically largest image.
    pub fn representative(&self, t: &Triple) -> Triple {
        self.perms.iter().map(|p| t.permute(*p)).max().expect("group is non-empty")
    }

    pub fn orbit_of(&self, t: &Triple) -> BTreeSet<Triple> {
        self.perms.iter().map(|p| t.permute(*p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupProvenance {
    Trivial,
    Coordinate(CoordinateGroup),
    Mirror(Triple),
}

/// A group of permutations of a support's triples, stored as index maps.
#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    elements: Vec<Vec<usize>>,
    provenance: GroupProvenance,
}

impl SymmetryGroup {
    pub fn trivial(support: &Support) -> Self {
        SymmetryGroup {
            elements: vec![(0..support.len()).collect()],
            provenance: GroupProvenance::Trivial,
        }
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    pub fn provenance(&self) -> &GroupProvenance {
        &self.provenance
    }

    /// Number of triples the group acts on.
    pub fn degree(&self) -> usize {
        self.elements[0].len()
    }
}

/// The group `L_S = {π_σ | σ ∈ L}` induced on an `L`-symmetric support.
pub fn induced_group(support: &Support, group: &CoordinateGroup) -> Result<SymmetryGroup> {
    let mut elements: Vec<Vec<usize>> = Vec::with_capacity(group.order());
    for &sigma in group.perms() {
        let mut perm = Vec::with_capacity(support.len());
        for t in support.triples() {
            let image = t.permute(sigma);
            match support.index_of(&image) {
                Some(j) => perm.push(j),
                None => return Err(Error::NotSymmetric { triple: *t, perm: sigma }),
            }
        }
        if !elements.contains(&perm) {
            elements.push(perm);
        }
    }
    elements.sort();
    let provenance = if elements.len() == 1 {
        GroupProvenance::Trivial
    } else {
        GroupProvenance::Coordinate(group.clone())
    };
    Ok(SymmetryGroup { elements, provenance })
}

/// The group `{id, π}` with `π(s) = target − s`.
pub fn mirror_group(support: &Support, target: &Triple) -> Result<SymmetryGroup> {
    let mut perm = Vec::with_capacity(support.len());
    for t in support.triples() {
        let image = target.sub(t);
        match support.index_of(&image) {
            Some(j) => perm.push(j),
            None => {
                return Err(Error::MirrorNotPreserving {
                    target: *target,
                    triple: *t,
                })
            }
        }
    }
    let identity: Vec<usize> = (0..support.len()).collect();
    if perm == identity {
        return Ok(SymmetryGroup::trivial(support));
    }
    Ok(SymmetryGroup {
        elements: vec![identity, perm],
        provenance: GroupProvenance::Mirror(*target),
    })
}

/// Partition of a support into the orbits of a group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitIndex {
    orbit_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl OrbitIndex {
    pub fn orbit_count(&self) -> usize {
        self.members.len()
    }

    pub fn orbit_of(&self, i: usize) -> usize {
        self.orbit_of[i]
    }

    /// Member indices of orbit `o`, ascending.
    pub fn members(&self, o: usize) -> &[usize] {
        &self.members[o]
    }

    pub fn size(&self, o: usize) -> usize {
        self.members[o].len()
    }

    pub fn all_members(&self) -> &[Vec<usize>] {
        &self.members
    }
}

/// Orbits of `group` on `support`, numbered by their smallest member.
pub fn orbits(support: &Support, group: &SymmetryGroup) -> OrbitIndex {
    let n = support.len();
    debug_assert_eq!(group.degree(), n);
    let mut orbit_of = vec![usize::MAX; n];
    let mut members = Vec::new();
    for start in 0..n {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut stack = vec![start];
        let mut orbit = Vec::new();
        orbit_of[start] = id;
        while let Some(i) = stack.pop() {
            orbit.push(i);
            for g in group.elements() {
                let j = g[i];
                if orbit_of[j] == usize::MAX {
                    orbit_of[j] = id;
                    stack.push(j);
                }
            }
        }
        orbit.sort_unstable();
        members.push(orbit);
    }
    OrbitIndex { orbit_of, members }
}
