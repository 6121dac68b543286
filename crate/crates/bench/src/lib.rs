//! Placeholder library target; the content of this crate is its benches.
