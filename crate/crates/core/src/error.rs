use thiserror::Error;

/// Failure modes surfaced by the solver layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate, dimension, or component index fell outside its valid range.
    #[error("index out of range: {0}")]
    OutOfRange(String),

    /// Invalid or inconsistent configuration (stability violation, bad grid
    /// size, unsupported velocity field, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Operands with incompatible shapes or grids.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An iterative kernel exhausted its budget without converging.
    #[error("numerical failure: {reason} (residual estimate {residual:.3e})")]
    Numerics { reason: String, residual: f64 },

    /// The post-selection probability of a step fell below the configured
    /// floor; renormalizing would amplify noise instead of signal.
    #[error("post-selection probability {p_t:.3e} fell below floor {floor:.3e}")]
    DegenerateState { p_t: f64, floor: f64 },

    /// A mirror-extended field lost its reflection symmetry beyond tolerance,
    /// so restriction to the physical half-domain would discard information.
    #[error("mirror symmetry drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    SymmetryDrift { drift: f64, tol: f64 },

    /// Dense verification paths refuse problems past their size cap.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_carry_diagnostics() {
        let e = Error::DegenerateState { p_t: 1.5e-13, floor: 1e-12 };
        let msg = e.to_string();
        assert!(msg.contains("1.500e-13"), "{msg}");
        assert!(msg.contains("1.000e-12"), "{msg}");

        let e = Error::SymmetryDrift { drift: 2e-3, tol: 1e-8 };
        assert!(e.to_string().contains("2.000e-3"), "{e}");
    }
}
