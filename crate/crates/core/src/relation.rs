//! Dense binary relations over `0..n`, stored as bit rows.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Relation {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Relation {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Relation {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut r = Relation::new(n);
        for (a, b) in pairs {
            r.insert(a, b);
        }
        r
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Extends the carrier to `n` elements; existing pairs are kept.
    pub fn grow(&mut self, n: usize) {
        if n <= self.n {
            return;
        }
        let words = n.div_ceil(64).max(1);
        if words == self.words {
            self.bits.resize(n * words, 0);
        } else {
            let mut bits = vec![0; n * words];
            for row in 0..self.n {
                let src = &self.bits[row * self.words..(row + 1) * self.words];
                bits[row * words..row * words + self.words].copy_from_slice(src);
            }
            self.bits = bits;
            self.words = words;
        }
        self.n = n;
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        a < self.n && b < self.n && self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        assert!(
            a < self.n && b < self.n,
            "pair ({a},{b}) outside carrier of size {}",
            self.n
        );
        self.bits[a * self.words + b / 64] |= 1 << (b % 64);
    }

    pub fn remove(&mut self, a: usize, b: usize) {
        if a < self.n && b < self.n {
            self.bits[a * self.words + b / 64] &= !(1 << (b % 64));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn row(&self, a: usize) -> &[u64] {
        &self.bits[a * self.words..(a + 1) * self.words]
    }

    fn or_row_into(&mut self, dst: usize, src: usize) {
        let w = self.words;
        for i in 0..w {
            let v = self.bits[src * w + i];
            self.bits[dst * w + i] |= v;
        }
    }

    pub fn successors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        self.row(a)
            .iter()
            .enumerate()
            .flat_map(move |(wi, &word)| {
                (0..64)
                    .filter(move |bit| word >> bit & 1 == 1)
                    .map(move |bit| wi * 64 + bit)
            })
            .filter(move |&b| b < n)
    }

    pub fn predecessors(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&a| self.contains(a, b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| self.successors(a).map(move |b| (a, b)))
    }

    pub fn union_with(&mut self, other: &Relation) {
        assert_eq!(self.n, other.n);
        for (x, y) in self.bits.iter_mut().zip(&other.bits) {
            *x |= *y;
        }
    }

    pub fn union(&self, other: &Relation) -> Relation {
        let mut r = self.clone();
        r.union_with(other);
        r
    }

    pub fn minus(&self, other: &Relation) -> Relation {
        assert_eq!(self.n, other.n);
        let mut r = self.clone();
        for (x, y) in r.bits.iter_mut().zip(&other.bits) {
            *x &= !*y;
        }
        r
    }

    pub fn minus_identity(&self) -> Relation {
        let mut r = self.clone();
        for a in 0..self.n {
            r.remove(a, a);
        }
        r
    }

    pub fn inverse(&self) -> Relation {
        Relation::from_pairs(self.n, self.pairs().map(|(a, b)| (b, a)))
    }

    /// Relational composition `self ; other`.
    pub fn compose(&self, other: &Relation) -> Relation {
        assert_eq!(self.n, other.n);
        let mut r = Relation::new(self.n);
        for a in 0..self.n {
            for m in self.successors(a).collect::<Vec<_>>() {
                for i in 0..self.words {
                    r.bits[a * self.words + i] |= other.bits[m * other.words + i];
                }
            }
        }
        r
    }

    pub fn transitive_closure(&self) -> Relation {
        let mut r = self.clone();
        for k in 0..r.n {
            for a in 0..r.n {
                if r.contains(a, k) {
                    r.or_row_into(a, k);
                }
            }
        }
        r
    }

    pub fn is_acyclic(&self) -> bool {
        let c = self.transitive_closure();
        (0..c.n).all(|a| !c.contains(a, a))
    }

    /// Elements `x` with `(x, b)` in the relation for some `b` in `targets`.
    pub fn preimage(&self, targets: &[usize]) -> Vec<usize> {
        (0..self.n)
            .filter(|&a| targets.iter().any(|&b| self.contains(a, b)))
            .collect()
    }

    pub fn image(&self, sources: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = sources.iter().flat_map(|&a| self.successors(a)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_of_chain() {
        let r = Relation::from_pairs(4, [(0, 1), (1, 2), (2, 3)]);
        let c = r.transitive_closure();
        assert!(c.contains(0, 3));
        assert!(!c.contains(3, 0));
        assert_eq!(c.len(), 6);
        assert!(c.is_acyclic());
    }

    #[test]
    fn grow_across_word_boundary() {
        let mut r = Relation::from_pairs(63, [(0, 62), (62, 1)]);
        r.grow(130);
        r.insert(129, 128);
        assert!(r.contains(0, 62) && r.contains(62, 1) && r.contains(129, 128));
        assert_eq!(r.len(), 3);
        assert_eq!(r.successors(129).collect::<Vec<_>>(), vec![128]);
    }

    #[test]
    fn compose_and_inverse() {
        let a = Relation::from_pairs(3, [(0, 1)]);
        let b = Relation::from_pairs(3, [(1, 2)]);
        assert_eq!(a.compose(&b).pairs().collect::<Vec<_>>(), vec![(0, 2)]);
        assert_eq!(a.inverse().pairs().collect::<Vec<_>>(), vec![(1, 0)]);
    }

    #[test]
    fn cycle_detected() {
        assert!(!Relation::from_pairs(2, [(0, 1), (1, 0)]).is_acyclic());
    }
}
