use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("point ({x}, {y}) lies within tolerance of a singular line")]
    OnSingularity { x: f64, y: f64 },
    #[error("point ({x}, {y}) lies inside the shape")]
    InsideShape { x: f64, y: f64 },
    #[error("support point is ambiguous at ({x}, {y})")]
    Ambiguous { x: f64, y: f64 },
    #[error("unexpected support composition {0}")]
    UnexpectedComposition(String),
    #[error("angle {theta} is outside the band of region {region}")]
    WrongRegion { region: String, theta: f64 },
    #[error("need at least {need} radii, got {got}")]
    InsufficientRange { need: usize, got: usize },
    #[error("closed form and ODE solution differ by {0:e}")]
    ResidualTooLarge(f64),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("orbit left the region band")]
    RegionExit,
    #[error("orbit met a singular line after {steps} steps")]
    SingularOrbit { steps: usize },
    #[error("no return after {0} steps")]
    MaxStepsExceeded(usize),
    #[error("state outside the band of passage {0}")]
    BandViolation(String),
    #[error("Taylor fit residual {0:e} exceeds tolerance")]
    ConditioningFailure(f64),
    #[error("linear part is not elliptic (trace/2 = {0})")]
    NotElliptic(f64),
    #[error("near resonance: |lambda^{k} - 1| = {gap:e}")]
    Resonance { k: u32, gap: f64 },
    #[error("orbit escaped after {0} returns")]
    OrbitEscaped(usize),
    #[error("state lies on a continuity boundary")]
    OnBoundary,
    #[error("polygon does not close: gap {0:e}")]
    NotClosed(f64),
    #[error("energy {0} below the admissible floor")]
    EnergyTooLow(f64),
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
