//! Name-keyed registries of interchangeable strategies.
//!
//! Each family of algorithm variants (shape generators, pseudo-box
//! builders, footprint extractors, level objectives) sits behind its own
//! trait; a [`Registry`] holds boxed implementations and resolves them by
//! the name that appears in configs and on the command line.

use crate::error::{Error, Result};

/// Anything that can be looked up in a [`Registry`].
pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: Vec<Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Registers a strategy. A later registration under an existing name
    /// replaces the earlier one.
    pub fn register(&mut self, entry: Box<T>) -> &mut Self {
        let name = entry.name();
        self.entries.retain(|e| e.name() != name);
        self.entries.push(entry);
        self
    }

    pub fn with(mut self, entry: Box<T>) -> Self {
        self.register(entry);
        self
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: ?Sized + Named> std::fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.names())
            .finish()
    }
}
