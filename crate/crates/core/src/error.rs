use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is out of domain (expected {expected})")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dual pairing diverges for decay rate c = {c} (need c > 0)")]
    DivergentIntegral { c: f64 },

    #[error("no endemic equilibrium: R0 = {r0} <= 1")]
    NoEndemicEquilibrium { r0: f64 },

    #[error("invalid age grid: {0}")]
    Grid(String),

    #[error("state has {got} cells but the grid has {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("numerical failure at step {step} (t = {time}): {what}")]
    NumericalFailure {
        step: usize,
        time: f64,
        what: String,
    },

    #[error("argument {re}{im:+}i lies outside the domain Re > {bound}")]
    OutsideDomain { re: f64, im: f64, bound: f64 },

    #[error("quadratic reduction requires kappa = 0, got {kappa}")]
    InapplicableReduction { kappa: f64 },

    #[error("contour resolution failure: {0}")]
    ContourResolution(String),

    #[error("functional undefined: non-positive {what} on weighted cell {cell}")]
    FunctionalDomain { what: &'static str, cell: usize },

    #[error("rank-deficient samples: {0}")]
    RankDeficient(String),

    #[error("sample file line {line}: {message}")]
    SampleFormat { line: usize, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::ParameterDomain {
            name,
            value,
            expected,
        }
    }
}
