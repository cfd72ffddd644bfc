//! Numerical laboratory for real polynomial map germs `f: (Rⁿ,0) → (Rᵖ,0)`:
//! spherefication calculus, d-regularity margins, gradient liftings, the
//! Milnor vector field and the flow from the Milnor tube to the sphere.
//!
//! All numerical code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`.

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod discriminant;
pub mod error;
pub mod flow;
pub mod lifting;
pub mod linalg;
pub mod milnorfield;
pub mod optimize;
pub mod pencil;
pub mod polymap;
pub mod regularity;
pub mod sampling;
pub mod scalar;
pub mod tolerances;

pub use error::{Error, Result};
pub use polymap::{parse_map, Jet, MapDocument, PolynomialMap};
pub use sampling::SamplerCfg;
pub use scalar::Real;
pub use tolerances::Tolerances;

pub type Map = PolynomialMap<f64>;
pub type Jet64 = Jet<f64>;
pub type LiftPair64 = lifting::LiftPair<f64>;
pub type FieldSample64 = milnorfield::FieldSample<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
