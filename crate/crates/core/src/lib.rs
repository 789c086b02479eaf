//! Trajectory statevector simulation of a single-parameter variational
//! classifier, bare or encoded in the [[4,2,2]] error-detecting code, under
//! stochastic Pauli noise.

pub mod circuit;
pub mod code422;
pub mod exec;
pub mod fidelity;
pub mod noise;
pub mod rng;
pub mod rotations;
pub mod statevector;
pub mod training;
pub mod trajectory;
pub mod vqc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    State(#[from] statevector::StateError),
    #[error(transparent)]
    Circuit(#[from] circuit::CircuitError),
    #[error(transparent)]
    Decode(#[from] code422::DecodeError),
    #[error(transparent)]
    Rotation(#[from] rotations::RotationError),
    #[error(transparent)]
    Noise(#[from] noise::NoiseError),
    #[error("qubit {0} is not live at this point of the program")]
    QubitNotLive(usize),
    #[error("no accepted shot after {attempts} attempts")]
    RerunsExhausted { attempts: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
