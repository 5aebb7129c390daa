//! Holds the `acceptance` test target; run it with `cargo test -p estate-validation --test acceptance`.
