//! Holds the `acceptance` test target; run it with
//! `cargo test -p pawshake-acceptance --test acceptance`.
