//! Variable stores: finite maps from program variables to naturals, with
//! absent keys reading as zero.

use std::collections::BTreeMap;
use std::fmt;

/// A store in canonical form: zero-valued keys are never stored, so map
/// equality is store equality.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Store(BTreeMap<String, u64>);

impl Store {
    pub fn empty() -> Store {
        Store::default()
    }

    pub fn get(&self, var: &str) -> u64 {
        self.0.get(var).copied().unwrap_or(0)
    }

    /// The store with `var` updated to `value`. Zero updates remove the key,
    /// keeping the representation canonical.
    #[must_use]
    pub fn with(&self, var: &str, value: u64) -> Store {
        let mut next = self.0.clone();
        if value == 0 {
            next.remove(var);
        } else {
            next.insert(var.to_string(), value);
        }
        Store(next)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_keys_read_zero() {
        assert_eq!(Store::empty().get("x"), 0);
    }

    #[test]
    fn update_laws() {
        let s = Store::empty().with("x", 1).with("y", 2);
        let t = s.with("x", 7);
        assert_eq!(t.get("x"), 7);
        assert_eq!(t.get("y"), s.get("y"));
    }

    #[test]
    fn zero_updates_are_canonical() {
        let s = Store::empty().with("x", 3).with("x", 0);
        assert_eq!(s, Store::empty());
        assert!(s.is_empty());
    }

    #[test]
    fn display_is_sorted_and_empty_store_is_empty_set() {
        let s = Store::empty().with("y", 2).with("x", 1);
        assert_eq!(s.to_string(), "x=1,y=2");
        assert_eq!(Store::empty().to_string(), "∅");
    }
}
