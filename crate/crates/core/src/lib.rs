//! Taylor-series integration of ODE systems described by code lists, with
//! standard functions expressed as sub-ODEs, and the structural analysis
//! that certifies such code lists.

pub mod bench;
pub mod codelist;
pub mod integrator;
pub mod kernel;
pub mod problems;
pub mod stdfuncs;
pub mod structural;
