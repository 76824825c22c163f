//! Acceptance suite for `expander-sketch`; see `tests/acceptance.rs`.
