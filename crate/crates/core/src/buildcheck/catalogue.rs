use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Diagnostic, ErrorCode, Level};

/// The error codes most often seen when compiling LLM-translated programs,
/// with one-line descriptions.
const ENTRIES: &[(&str, &str)] = &[
    ("E0061", "An invalid number of arguments was passed when calling a function."),
    ("E0106", "Missing lifetime specifier in a type."),
    ("E0133", "Use of unsafe code without an unsafe block."),
    ("E0252", "A name is defined multiple times in the same scope."),
    ("E0277", "A type does not implement a required trait."),
    ("E0282", "Type annotations needed because the compiler cannot infer the type."),
    ("E0284", "Overlapping implementations of a trait."),
    ("E0308", "Mismatched types."),
    ("E0369", "Binary operation cannot be applied to the given types."),
    ("E0382", "Use of moved value."),
    ("E0384", "Cannot assign twice to immutable variable."),
    ("E0425", "Cannot find value in this scope."),
    ("E0428", "Duplicate definitions with the same name."),
    ("E0432", "Unresolved import."),
    ("E0433", "Failed to resolve a path."),
    ("E0434", "Can't capture dynamic environment in a function item."),
    ("E0499", "Cannot borrow as mutable more than once at a time."),
    ("E0502", "Cannot borrow as mutable because it is also borrowed as immutable."),
    ("E0506", "Cannot assign to a variable that is borrowed."),
    ("E0530", "Use of self in a static method."),
    ("E0596", "Cannot borrow immutable item as mutable."),
    ("E0599", "No method found for the given type."),
    ("E0600", "Cannot call a non-function."),
    ("E0608", "Cannot index into a value of this type."),
    ("E0609", "Cannot access field of a primitive type."),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorCatalogue {
    entries: BTreeMap<ErrorCode, &'static str>,
}

impl Default for ErrorCatalogue {
    fn default() -> Self {
        ErrorCatalogue {
            entries: ENTRIES
                .iter()
                .map(|(c, d)| (ErrorCode::new(c).expect("catalogue codes are valid"), *d))
                .collect(),
        }
    }
}

impl ErrorCatalogue {
    pub fn describe(&self, code: &ErrorCode) -> Option<&'static str> {
        self.entries.get(code).copied()
    }

    pub fn contains(&self, code: &ErrorCode) -> bool {
        self.entries.contains_key(code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &ErrorCode> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Counts error-level diagnostics by code. Codes outside the catalogue
    /// go to `unknown` rather than being dropped.
    pub fn tally<'a>(&self, diagnostics: impl IntoIterator<Item = &'a Diagnostic>) -> CodeTally {
        let mut tally = CodeTally::default();
        for d in diagnostics.into_iter().filter(|d| d.level == Level::Error) {
            match &d.code {
                Some(c) if self.contains(c) => *tally.known.entry(c.clone()).or_default() += 1,
                Some(c) => *tally.unknown.entry(c.clone()).or_default() += 1,
                None => tally.uncoded += 1,
            }
        }
        tally
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeTally {
    pub known: BTreeMap<ErrorCode, u64>,
    pub unknown: BTreeMap<ErrorCode, u64>,
    pub uncoded: u64,
}

impl CodeTally {
    pub fn coded_total(&self) -> u64 {
        self.known.values().chain(self.unknown.values()).sum()
    }
}
