//! The sequential specification: a plain sorted map.

use std::collections::BTreeMap;

use vlist::{Key, Value, NO_VAL};

/// One map operation, as submitted to either the real map or the oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Insert(Key, Value),
    Remove(Key),
    Contains(Key),
    Range(Key, Key),
}

/// What an operation returned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Val(Value),
    Entries(Vec<(Key, Value)>),
}

/// Reference implementation of the map's sequential behaviour.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleMap {
    map: BTreeMap<Key, Value>,
}

impl OracleMap {
    pub fn new() -> OracleMap {
        OracleMap::default()
    }

    pub fn apply(&mut self, op: &Op) -> Outcome {
        match *op {
            Op::Insert(k, v) => match self.map.get(&k) {
                Some(&old) => Outcome::Val(old),
                None => {
                    self.map.insert(k, v);
                    Outcome::Val(NO_VAL)
                }
            },
            Op::Remove(k) => Outcome::Val(self.map.remove(&k).unwrap_or(NO_VAL)),
            Op::Contains(k) => Outcome::Val(self.map.get(&k).copied().unwrap_or(NO_VAL)),
            Op::Range(low, high) => {
                Outcome::Entries(self.map.range(low..=high).map(|(k, v)| (*k, *v)).collect())
            }
        }
    }

    /// Canonical content, used as part of the checker's memoization key.
    pub fn entries(&self) -> Vec<(Key, Value)> {
        self.map.iter().map(|(k, v)| (*k, *v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_follows_the_sequential_contract() {
        let mut o = OracleMap::new();
        assert_eq!(o.apply(&Op::Insert(5, 10)), Outcome::Val(NO_VAL));
        assert_eq!(o.apply(&Op::Insert(5, 20)), Outcome::Val(10));
        assert_eq!(o.apply(&Op::Contains(5)), Outcome::Val(10));
        assert_eq!(o.apply(&Op::Insert(7, 30)), Outcome::Val(NO_VAL));
        assert_eq!(o.apply(&Op::Range(1, 10)), Outcome::Entries(vec![(5, 10), (7, 30)]));
        assert_eq!(o.apply(&Op::Remove(5)), Outcome::Val(10));
        assert_eq!(o.apply(&Op::Remove(5)), Outcome::Val(NO_VAL));
        assert_eq!(o.apply(&Op::Range(1, 10)), Outcome::Entries(vec![(7, 30)]));
    }
}
