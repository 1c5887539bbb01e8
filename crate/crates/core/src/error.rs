use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model parameter `{name}` must be finite and positive, got {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("position must be finite, got {0}")]
    NonFinitePosition(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("impulsive jump is singular: d(q*) * pk = 0 at q* = {q_star}, pk = {pk}")]
    SingularJump { q_star: f64, pk: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: DynamicsError,
    },
    #[error("wavepacket reached the grid edge (edge density {density:e} at t = {t})")]
    GridTooSmall { density: f64, t: f64 },
    #[error("frame grids do not line up: {0}")]
    FrameMismatch(String),
}
