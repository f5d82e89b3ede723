//! Acceptance battery for `critlab`. The checks live in `tests/acceptance.rs`;
//! run them with `cargo test -p critlab-validation --test acceptance`.
