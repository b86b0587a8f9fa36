use std::fmt;

use serde::{Deserialize, Serialize};

/// A failed invariant or postcondition clause with a witness description.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub clause: String,
    pub detail: String,
}

impl Violation {
    pub fn new(clause: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation {
            clause: clause.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.clause, self.detail)
    }
}

/// Collects violations; `ensure` records one when the condition is false.
#[derive(Debug, Default)]
pub(crate) struct Checker {
    pub(crate) out: Vec<Violation>,
}

impl Checker {
    pub(crate) fn ensure(&mut self, ok: bool, clause: &str, detail: impl FnOnce() -> String) {
        if !ok {
            self.out.push(Violation::new(clause, detail()));
        }
    }

    pub(crate) fn fail(&mut self, clause: &str, detail: impl Into<String>) {
        self.out.push(Violation::new(clause, detail));
    }

    pub(crate) fn finish(self) -> Vec<Violation> {
        self.out
    }
}
