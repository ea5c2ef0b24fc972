//! Hodograph-method analysis of vorticity blowups for the homogeneous Euler
//! equation `u_t + (u·∇)u = 0` in n dimensions.

pub mod builtins;
pub mod catastrophe;
pub mod error;
pub mod expr;
pub mod field;
pub mod fit;
pub mod frame;
pub mod hodograph;
pub mod linalg;
pub mod map;
pub mod optimize;
pub mod roots;
pub mod surface;
pub mod vorticity;

pub use error::{Error, Result};
pub use hodograph::{build_matrix, characteristic_coefficients, CharacteristicCoefficients, HodographMatrix};
pub use map::{Bounds, InitialDataMap, MapFamily, MapSpec};
