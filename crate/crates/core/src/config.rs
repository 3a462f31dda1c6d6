//! Index identifiers and configurations.
//!
//! A [`Configuration`] is a set of [`IndexId`]s stored as a growable bitset.
//! Ids are dense within a session, so the bitset stays small and all set
//! algebra is exact word-level arithmetic.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense identifier of a secondary index within a catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexId(pub u32);

impl IndexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for IndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl From<u32> for IndexId {
    fn from(v: u32) -> Self {
        IndexId(v)
    }
}

/// A set of indices with bitset semantics.
///
/// Trailing zero words are always trimmed so that structural equality and
/// hashing coincide with set equality.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<IndexId>", into = "Vec<IndexId>")]
pub struct Configuration {
    words: Vec<u64>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    fn from_words(mut words: Vec<u64>) -> Self {
        while words.last() == Some(&0) {
            words.pop();
        }
        Configuration { words }
    }

    pub fn singleton(id: IndexId) -> Self {
        let mut c = Self::new();
        c.insert(id);
        c
    }

    pub fn insert(&mut self, id: IndexId) -> bool {
        let (w, b) = (id.index() / 64, id.index() % 64);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let had = self.words[w] & (1 << b) != 0;
        self.words[w] |= 1 << b;
        !had
    }

    pub fn remove(&mut self, id: IndexId) -> bool {
        let (w, b) = (id.index() / 64, id.index() % 64);
        if w >= self.words.len() {
            return false;
        }
        let had = self.words[w] & (1 << b) != 0;
        self.words[w] &= !(1 << b);
        self.trim();
        had
    }

    pub fn contains(&self, id: IndexId) -> bool {
        let (w, b) = (id.index() / 64, id.index() % 64);
        self.words.get(w).is_some_and(|x| x & (1 << b) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Members in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = IndexId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros();
                rest &= rest - 1;
                Some(IndexId(wi as u32 * 64 + b))
            })
        })
    }

    pub fn to_vec(&self) -> Vec<IndexId> {
        self.iter().collect()
    }

    pub fn max_id(&self) -> Option<IndexId> {
        let wi = self.words.len().checked_sub(1)?;
        let b = 63 - self.words[wi].leading_zeros();
        Some(IndexId(wi as u32 * 64 + b))
    }

    pub fn union(&self, other: &Self) -> Self {
        let n = self.words.len().max(other.words.len());
        let words = (0..n)
            .map(|i| self.word(i) | other.word(i))
            .collect::<Vec<_>>();
        Self::from_words(words)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let n = self.words.len().min(other.words.len());
        Self::from_words((0..n).map(|i| self.words[i] & other.words[i]).collect())
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self::from_words(
            (0..self.words.len())
                .map(|i| self.words[i] & !other.word(i))
                .collect(),
        )
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        let n = self.words.len().max(other.words.len());
        Self::from_words((0..n).map(|i| self.word(i) ^ other.word(i)).collect())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        (0..self.words.len()).all(|i| self.words[i] & !other.word(i) == 0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        let n = self.words.len().min(other.words.len());
        (0..n).all(|i| self.words[i] & other.words[i] == 0)
    }

    /// Lexicographic preference used as the deterministic tie-breaker:
    /// `self` is preferred to `other` iff the smallest index in their
    /// symmetric difference belongs to `self`. Returns `Less` when `self`
    /// is preferred.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        let n = self.words.len().max(other.words.len());
        for i in 0..n {
            let diff = self.word(i) ^ other.word(i);
            if diff != 0 {
                let bit = diff & diff.wrapping_neg();
                return if self.word(i) & bit != 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        Ordering::Equal
    }

    fn word(&self, i: usize) -> u64 {
        self.words.get(i).copied().unwrap_or(0)
    }
}

impl FromIterator<IndexId> for Configuration {
    fn from_iter<T: IntoIterator<Item = IndexId>>(iter: T) -> Self {
        let mut c = Configuration::new();
        for id in iter {
            c.insert(id);
        }
        c
    }
}

impl From<Vec<IndexId>> for Configuration {
    fn from(v: Vec<IndexId>) -> Self {
        v.into_iter().collect()
    }
}

impl From<Configuration> for Vec<IndexId> {
    fn from(c: Configuration) -> Self {
        c.to_vec()
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|i| i.0)).finish()
    }
}

/// Builds a configuration from raw ids; handy in fixtures.
pub fn config_of(ids: &[u32]) -> Configuration {
    ids.iter().map(|&i| IndexId(i)).collect()
}

/// Maps subsets of an ordered candidate list to `u32` masks and back.
///
/// Bit `i` of a local mask stands for `members[i]`; members are sorted by
/// id so the lexicographic tie-breaker on masks agrees with [`Configuration::lex_cmp`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSpace {
    members: Vec<IndexId>,
}

impl LocalSpace {
    pub fn new(members: &Configuration) -> Self {
        LocalSpace {
            members: members.to_vec(),
        }
    }

    pub fn members(&self) -> &[IndexId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn size(&self) -> usize {
        1usize << self.members.len()
    }

    pub fn as_configuration(&self) -> Configuration {
        self.members.iter().copied().collect()
    }

    pub fn position(&self, id: IndexId) -> Option<usize> {
        self.members.binary_search(&id).ok()
    }

    /// Mask of `config ∩ members`.
    pub fn mask_of(&self, config: &Configuration) -> u32 {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, id)| config.contains(**id))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    pub fn config_of(&self, mask: u32) -> Configuration {
        self.members
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, id)| *id)
            .collect()
    }
}

/// Lexicographic preference between two local masks: `Less` when `x` is
/// preferred, i.e. the lowest differing bit is set in `x`.
pub fn lex_cmp_mask(x: u32, y: u32) -> Ordering {
    let diff = x ^ y;
    if diff == 0 {
        Ordering::Equal
    } else if x & diff & diff.wrapping_neg() != 0 {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = config_of(&[1, 3, 70]);
        let b = config_of(&[3, 4]);
        assert_eq!(a.union(&b), config_of(&[1, 3, 4, 70]));
        assert_eq!(a.intersection(&b), config_of(&[3]));
        assert_eq!(a.difference(&b), config_of(&[1, 70]));
        assert_eq!(a.symmetric_difference(&b), config_of(&[1, 4, 70]));
        assert!(config_of(&[3]).is_subset(&a));
        assert!(!a.is_disjoint(&b));
        assert_eq!(a.len(), 3);
        assert_eq!(a.max_id(), Some(IndexId(70)));
    }

    #[test]
    fn trimming_keeps_equality_structural() {
        let mut a = config_of(&[100]);
        a.remove(IndexId(100));
        assert_eq!(a, Configuration::new());
        assert!(a.is_empty());
        assert_eq!(config_of(&[1, 100]).difference(&config_of(&[100])), config_of(&[1]));
    }

    #[test]
    fn lexicographic_preference() {
        // smallest differing index is 1, which is in the first set
        assert_eq!(config_of(&[1]).lex_cmp(&config_of(&[2, 3])), Ordering::Less);
        assert_eq!(config_of(&[2]).lex_cmp(&config_of(&[1])), Ordering::Greater);
        assert_eq!(config_of(&[]).lex_cmp(&config_of(&[5])), Ordering::Greater);
        assert_eq!(lex_cmp_mask(0b01, 0b10), Ordering::Less);
        assert_eq!(lex_cmp_mask(0b00, 0b10), Ordering::Greater);
    }

    #[test]
    fn local_space_round_trip() {
        let space = LocalSpace::new(&config_of(&[2, 9, 40]));
        assert_eq!(space.mask_of(&config_of(&[9, 40, 41])), 0b110);
        assert_eq!(space.config_of(0b101), config_of(&[2, 40]));
    }

    #[test]
    fn serde_as_sorted_list() {
        let s = serde_json::to_string(&config_of(&[5, 1])).unwrap();
        assert_eq!(s, "[1,5]");
        let c: Configuration = serde_json::from_str("[7,2]").unwrap();
        assert_eq!(c, config_of(&[2, 7]));
    }
}
