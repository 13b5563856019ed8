//! Holds the `acceptance` test target, which checks the toolkit end to end
//! against its numbered acceptance criteria. Run it with
//! `cargo test -p silt-validation --test acceptance`.
