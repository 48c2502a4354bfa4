//! Benchmark fixtures shared by the criterion targets.

use dissynth::model::{InterconnectionProblem, StateSpace, Subsystem};
use nalgebra::DMatrix;

/// Lightly damped oscillator `1 / (s^2 + 0.1 s + 1)`, whose resonance makes
/// the norm computation work for its answer.
pub fn resonant_siso() -> StateSpace {
    StateSpace::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]),
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 1),
    )
    .expect("consistent shapes")
}

/// Two unstable scalars coupled symmetrically; converges in a few dozen iterations.
pub fn symmetric_pair() -> InterconnectionProblem {
    let one = || DMatrix::from_element(1, 1, 1.0);
    InterconnectionProblem {
        subsystems: vec![Subsystem::new(one(), one(), one(), one()), Subsystem::new(one(), one(), one(), one())],
        m_wy: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        m_wd: DMatrix::zeros(2, 0),
        m_zy: DMatrix::zeros(0, 2),
        m_zd: DMatrix::zeros(0, 0),
        n_d: 0,
        n_z: 0,
    }
}
