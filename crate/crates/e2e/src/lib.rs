//! Holder crate for the workspace acceptance run in `tests/acceptance.rs`.
//! It sorts after the other members so their suites run first.
