use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Sequential placement ran out of attempts for one station.
    #[error(
        "cannot place station {placed} of {requested}: no free position after {attempts} attempts \
         (d_net={d_net}, r_bs={r_bs})"
    )]
    PackingInfeasible {
        placed: usize,
        requested: usize,
        attempts: usize,
        d_net: f64,
        r_bs: f64,
    },

    /// No station of the serving area lies within the combining distance.
    #[error("no station of serving area {area} within d_max of location {location}")]
    EmptyCombiningSet { location: crate::Point, area: usize },

    #[error("shadowing covariance lost positive definiteness at pivot {pivot}")]
    CovarianceFactorizationFailure { pivot: usize },

    #[error("partial-fraction scales {first} and {second} coincide")]
    DegenerateScales { first: usize, second: usize },

    /// The closed form left [0, 1] by more than the allowed slack.
    #[error("closed-form outage evaluated to {value}, outside [0, 1]")]
    NumericalInstability { value: f64 },

    #[error("{count} weak compositions exceed the enumeration limit {limit}")]
    ComplexityGuard { count: u128, limit: u128 },

    #[error("quadrature did not reach {target:e} within {subdivisions} subdivisions")]
    GridResolutionFailure { target: f64, subdivisions: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("topology file line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
