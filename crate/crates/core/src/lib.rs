//! HNN extensions of finite-dimensional compact quantum groups.
//!
//! The crate builds the reduced HNN extension of a finite quantum group
//! `(A, Δ_A)` along a Woronowicz subalgebra `B ⊂ A` and an embedding
//! `θ : B → A`, in three concrete shadows:
//!
//! * [`wordalg`]: the dense *-algebra spanned by `A` and reduced words, with
//!   exact rewriting, expectations, Haar state and comultiplication;
//! * [`fock`]: the Fock-space representation truncated at word length `L`;
//! * [`jvkk`]: the GNS spaces of `ε∘E_A` and `ε∘E_B`, the Julg–Valette
//!   operator and the homotopy of representations.
//!
//! [`britton`] is an independent normal-form oracle for HNN extensions of
//! finite groups, used to cross-check the symbolic engine.

pub mod britton;
pub mod builtins;
pub mod error;
pub mod fock;
pub mod group;
pub mod jvkk;
pub mod qgroup;
pub mod report;
pub mod starcore;
pub mod suites;
pub mod wordalg;

pub use error::{Error, Result};
pub use starcore::{AlgElement, ComplexMatrix, C64, TAU_ALG, TAU_GRAM};
