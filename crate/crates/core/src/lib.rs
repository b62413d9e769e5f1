//! Transfer operators and equilibrium states for intermittent circle maps.
//!
//! The crate works on the circle `S¹ = ℝ/ℤ` with maps `T(x) = x(1 + V(x)) mod 1`,
//! potentials with a prescribed modulus of continuity, and grid discretizations of
//! the Ruelle operator.

pub mod circle;
pub mod error;
pub mod maps;
pub mod moduli;
pub mod spectral;
pub mod thermo;

pub use circle::{circle_dist, integrate, wrap, CirclePoint, DiscreteMeasure, Grid, GridFunction};
pub use error::{Error, Result};
pub use maps::{CircleMap, ExpansionConstants, VaryingFunction};
pub use moduli::{Modulus, Verdict};
pub use spectral::{Potential, PotentialFn, SpectralData, TransferOperator};
pub use thermo::{GibbsReport, ThermoReport};
