//! Certified-iteration BoxQP interior-point solver and the Koopman MPC
//! pipeline around it: EDMD identification, dynamics-relaxed condensing and
//! a spectral KdV plant for closed-loop experiments.

pub mod boxqp;
pub mod condensing;
pub mod kdv;
pub mod koopman;
