//! Ordered coordinate lists. Every polynomial and vector field carries the
//! list it is defined over; the declaration order is total and fixed, and it
//! drives the canonical term order and all printed output.

use std::fmt;
use std::sync::Arc;

/// A coordinate in a [`VarList`], identified by its declaration position.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Variable(usize);

impl Variable {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
struct Inner {
    names: Vec<String>,
}

/// Immutable, shareable ordered list of variable names.
#[derive(Clone, Debug)]
pub struct VarList(Arc<Inner>);

impl VarList {
    /// Panics on duplicate names.
    pub fn new<I, S>(names: I) -> VarList
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            assert!(!names[..i].contains(n), "duplicate variable name `{}`", n);
        }
        VarList(Arc::new(Inner { names }))
    }

    pub fn len(&self) -> usize {
        self.0.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.names.is_empty()
    }

    pub fn name(&self, v: Variable) -> &str {
        &self.0.names[v.0]
    }

    pub fn var(&self, name: &str) -> Option<Variable> {
        self.0.names.iter().position(|n| n == name).map(Variable)
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> {
        (0..self.len()).map(Variable)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.names.iter().map(String::as_str)
    }
}

impl PartialEq for VarList {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.names == other.0.names
    }
}

impl Eq for VarList {}

impl fmt::Display for VarList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.names.join(" "))
    }
}
