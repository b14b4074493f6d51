//! Domain values: interned string constants and segment-tree bitstrings packed
//! into one machine word.

use std::fmt;
use std::sync::{OnceLock, RwLock};

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::segtree::Bitstring;

const BIT_TAG: u64 = 1 << 63;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(u64);

pub type Tuple = SmallVec<[Value; 6]>;

#[derive(Default)]
struct Interner {
    ids: FxHashMap<&'static str, u64>,
    names: Vec<&'static str>,
}

fn interner() -> &'static RwLock<Interner> {
    static I: OnceLock<RwLock<Interner>> = OnceLock::new();
    I.get_or_init(Default::default)
}

impl Value {
    pub fn constant(s: &str) -> Value {
        if let Some(&id) = interner().read().unwrap().ids.get(s) {
            return Value(id);
        }
        let mut w = interner().write().unwrap();
        if let Some(&id) = w.ids.get(s) {
            return Value(id);
        }
        let id = w.names.len() as u64;
        let leaked: &'static str = Box::leak(s.to_owned().into_boxed_str());
        w.names.push(leaked);
        w.ids.insert(leaked, id);
        Value(id)
    }

    pub fn bits(b: Bitstring) -> Value {
        Value(BIT_TAG | b.code())
    }

    pub fn as_bitstring(&self) -> Option<Bitstring> {
        (self.0 & BIT_TAG != 0).then(|| Bitstring::from_code(self.0 & !BIT_TAG))
    }

    pub fn raw(&self) -> u64 {
        self.0
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_bitstring() {
            Some(b) => write!(f, "{b}"),
            None => f.write_str(interner().read().unwrap().names[self.0 as usize]),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub fn tuple_of(names: &[&str]) -> Tuple {
    names.iter().map(|s| Value::constant(s)).collect()
}

pub fn tuple_strings(t: &[Value]) -> Vec<String> {
    t.iter().map(|v| v.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable() {
        let a = Value::constant("a1");
        assert_eq!(a, Value::constant("a1"));
        assert_ne!(a, Value::constant("a2"));
        assert_eq!(a.to_string(), "a1");
    }

    #[test]
    fn bitstrings_and_constants_never_collide() {
        let e = Value::bits(Bitstring::EMPTY);
        assert_eq!(e.as_bitstring(), Some(Bitstring::EMPTY));
        assert!(Value::constant("ε").as_bitstring().is_none());
        assert_ne!(e, Value::constant("ε"));
        assert_eq!(e.to_string(), "ε");
    }
}
