//! Name-keyed registries of interchangeable strategies.
//!
//! Each family (readout channels, reconstruction inverses, phase-error
//! models) exposes a trait; concrete variants register a constructor under
//! a short name and are selected at runtime from configuration.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub type Factory<T, A> = fn(&A) -> Box<T>;

pub struct Registry<T: ?Sized, A: ?Sized> {
    family: &'static str,
    entries: BTreeMap<&'static str, Factory<T, A>>,
}

impl<T: ?Sized, A: ?Sized> Registry<T, A> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            entries: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &'static str, factory: Factory<T, A>) -> Self {
        self.register(name, factory);
        self
    }

    /// Registers `factory` under `name`, replacing any earlier entry.
    pub fn register(&mut self, name: &'static str, factory: Factory<T, A>) {
        self.entries.insert(name, factory);
    }

    pub fn create(&self, name: &str, args: &A) -> Result<Box<T>> {
        match self.entries.get(name) {
            Some(factory) => Ok(factory(args)),
            None => Err(Error::UnknownStrategy {
                family: self.family,
                name: name.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn family(&self) -> &'static str {
        self.family
    }
}

impl<T: ?Sized, A: ?Sized> fmt::Debug for Registry<T, A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("family", &self.family)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Plain(String);

    impl Greeter for Plain {
        fn greet(&self) -> String {
            format!("hello {}", self.0)
        }
    }

    #[test]
    fn create_and_unknown() {
        let reg: Registry<dyn Greeter, str> =
            Registry::new("greeter").with("plain", |who| Box::new(Plain(who.to_string())));
        assert_eq!(reg.create("plain", "nv").unwrap().greet(), "hello nv");
        let err = reg.create("loud", "nv").err().unwrap();
        assert!(err.to_string().contains("registered: plain"));
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["plain"]);
    }
}
