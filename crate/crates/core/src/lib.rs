//! Shape optimization for a Bernoulli free boundary problem with a
//! geometric constraint, using a penalized Robin formulation.
//!
//! The free boundary Γ is a Bezier curve over the control polygon
//! [`bezier::ControlPolygon`]; together with the axis pieces K and L it
//! bounds a domain that is meshed ([`mesh`]), solved with P1 finite elements
//! ([`fem`]), and updated by projected gradient steps ([`optimizer`]).

pub mod bezier;
pub mod boundary;
pub mod commands;
pub mod config;
pub mod error;
pub mod geom;
pub mod gradcheck;
pub mod io;
pub mod linalg;
pub mod fem;
pub mod mesh;
pub mod optimizer;
pub mod studies;

pub use error::{Error, Result};
pub use geom::Vec2;
