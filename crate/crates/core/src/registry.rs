//! Name-keyed registries for interchangeable strategies.
//!
//! Each family of strategies (background metrics, endpoint profiles,
//! barrier profiles, linear solvers) exposes a `registry()` function that
//! returns a [`Registry`] populated with its built-in variants. Callers
//! select a variant at runtime by name, passing numeric parameters through
//! [`Params`].

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Numeric parameters handed to a strategy constructor.
pub type Params = BTreeMap<String, f64>;

type Builder<T> = Box<dyn Fn(&Params) -> Result<Arc<T>> + Send + Sync>;

struct Entry<T: ?Sized> {
    summary: &'static str,
    build: Builder<T>,
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Entry<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers a constructor under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &'static str, summary: &'static str, build: F) -> &mut Self
    where
        F: Fn(&Params) -> Result<Arc<T>> + Send + Sync + 'static,
    {
        self.entries.insert(
            name,
            Entry {
                summary,
                build: Box::new(build),
            },
        );
        self
    }

    pub fn build(&self, name: &str, params: &Params) -> Result<Arc<T>> {
        match self.entries.get(name) {
            Some(entry) => (entry.build)(params),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|(k, e)| (*k, e.summary)).collect()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

/// Reads a parameter, falling back to `default` when absent.
pub fn param_or(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Rejects parameters outside `allowed`.
pub fn check_keys(kind: &str, params: &Params, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "{kind} does not take parameter `{key}` (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Shape: Send + Sync {
        fn area(&self) -> f64;
    }
    struct Square(f64);
    impl Shape for Square {
        fn area(&self) -> f64 {
            self.0 * self.0
        }
    }

    #[test]
    fn build_by_name() {
        let mut reg: Registry<dyn Shape> = Registry::new("shape");
        reg.register("square", "a square", |p| {
            Ok(Arc::new(Square(param_or(p, "side", 1.0))) as Arc<dyn Shape>)
        });
        let mut p = Params::new();
        p.insert("side".into(), 3.0);
        assert_eq!(reg.build("square", &p).unwrap().area(), 9.0);
        assert_eq!(reg.names(), vec!["square"]);
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        let mut reg: Registry<dyn Shape> = Registry::new("shape");
        reg.register("square", "a square", |_| {
            Ok(Arc::new(Square(1.0)) as Arc<dyn Shape>)
        });
        let err = reg.build("circle", &Params::new()).err().unwrap();
        let msg = err.to_string();
        assert!(msg.contains("circle") && msg.contains("square"), "{msg}");
    }

    #[test]
    fn check_keys_rejects_unknown() {
        let mut p = Params::new();
        p.insert("bogus".into(), 1.0);
        assert!(check_keys("x", &p, &["a"]).is_err());
        assert!(check_keys("x", &Params::new(), &["a"]).is_ok());
    }
}
