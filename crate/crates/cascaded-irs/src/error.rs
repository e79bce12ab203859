use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("matrix is not positive semidefinite: eigenvalue {0} below tolerance")]
    NotPsd(f64),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("search budget exceeded: {required} grid points > budget {budget}; reduce dimensions or increase the step")]
    Budget { required: f64, budget: u64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
