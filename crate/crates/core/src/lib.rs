//! Brownian motion on R³, SU(2) and H³, the SDEs of its projections, and
//! Duistermaat–Heckman measures on the fibres of those projections.

pub mod csv;
pub mod dh;
pub mod error;
pub mod fokker_planck;
pub mod group;
pub mod jet;
pub mod manifold;
pub mod noise;
pub mod sde;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
