//! Test-only package. The acceptance checks live in `tests/acceptance.rs`
//! and run last in `cargo test --workspace`.
