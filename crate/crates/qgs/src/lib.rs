//! Spectral and scattering theory of Laplacians and Schrödinger operators on
//! Z^d-periodic equilateral metric graphs.
//!
//! The library is organized around the fundamental graph (the compact quotient
//! of the periodic graph by the Z^d action):
//!
//! - [`graph`] — the combinatorial data model: vertices, oriented edges with
//!   integer indices, spanning trees, index normalization, built-in lattices.
//! - [`dsl`] — a line-oriented text format (`.qg`) for graph descriptions.
//! - [`floquet`] — the discrete fiber matrix Δ(ϑ), its eigensystem, band
//!   surfaces over the Brillouin torus, band edges and geometric constants.
//! - [`metric`] — the z-map and parity ladder carrying discrete bands to the
//!   metric Laplacian's spectrum, plus the band-gap cross-check.
//! - [`eigenfunctions`] — closed-form fiber eigenfunctions of both families
//!   (vertex and Dirichlet), verification of the vertex conditions, norms and
//!   uniform bounds.
//! - [`scattering`] — resolvent kernels, Nyström discretization of
//!   `|Q|^{1/2} R_0(k) Q^{1/2}`, trace formulas, Fredholm determinants and the
//!   Birman–Krein phase for finitely supported potentials.

pub mod dsl;
pub mod eigenfunctions;
pub mod error;
pub mod floquet;
pub mod graph;
pub mod metric;
pub mod numfmt;
pub mod scattering;

pub use error::{Error, Result};

/// A closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}
