//! Pointwise calibrated geometry on Rⁿ.
//!
//! Constant-coefficient forms, the oriented Grassmannian and its calibrated
//! planes, φ-plurisubharmonicity of Hessians, the cones Λ(φ), Λ₊(φ), Λ⁺(φ),
//! and boundary convexity tests. Everything here is `no_std` with `alloc`;
//! file formats and the command line live in the companion crate.

#![no_std]

extern crate alloc;

pub mod catalog;
pub mod cones;
pub mod convexity;
pub mod error;
pub mod exterior;
pub mod grassmann;
pub mod linalg;
pub mod lp;
pub mod pshcheck;
pub mod rng;

pub use error::{Error, Result};
pub use exterior::{EndoMatrix, Form, MultiIndex, Multivector};
pub use grassmann::{OptOptions, OptReport, OrientedPlane};
