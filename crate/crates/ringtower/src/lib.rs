//! Exact-arithmetic machinery for depth conditions on towers of
//! finite-dimensional algebras.
//!
//! The crate decides right/left depth-two and depth-three conditions for a
//! tower of unital algebra embeddings `C -> B -> A` over an exact field
//! (the rationals or a prime field), produces explicit quasibase witnesses
//! certifying every affirmative verdict, iterates basic constructions into
//! Jones towers to compute the depth of a finite-index subgroup pair, and
//! builds the associated coring / pre-Galois / smash-product structures,
//! including the Fix/Gal correspondence for finite fields.
//!
//! Everything is exact: no floating point anywhere. Decisions over the
//! rationals may run modular filters internally, but every reported verdict
//! is certified by rational arithmetic (an explicit witness for "holds", an
//! explicit separating functional for "fails").
//!
//! See the `examples/` directory for runnable walkthroughs of each major
//! capability, and the `ringtower` binary for a command-line surface.

pub mod algebra;
pub mod catalog;
pub mod depth;
pub mod error;
pub mod exactlin;
pub mod field;
pub mod frobenius;
pub mod galois;
pub mod groups;
pub mod report;

pub use error::{Error, Result};
pub use field::{Field, FieldSpec, PrimeField, Rationals};

/// Resource limits for the decision procedures.
///
/// Exceeding a cap never yields a wrong answer: procedures report a distinct
/// inconclusive outcome instead.
#[derive(Clone, Debug)]
pub struct Caps {
    /// Largest group order `group_closure` will enumerate.
    pub max_group_order: usize,
    /// Largest algebra dimension constructed (Jones levels, tensor squares).
    pub max_dim: usize,
    /// Longest coordinate vector a span-feasibility system may use.
    pub max_span_len: usize,
    /// Most generator columns a span-feasibility system may use.
    pub max_span_cols: usize,
    /// Memory guard for elimination state, in matrix cells.
    pub max_elim_cells: usize,
    /// How many CRT primes to try before giving up on a modular lift.
    pub max_crt_primes: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_group_order: 5040,
            max_dim: 1296,
            max_span_len: 40_000,
            max_span_cols: 400_000,
            max_elim_cells: 48_000_000,
            max_crt_primes: 16,
        }
    }
}
