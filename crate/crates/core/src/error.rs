use thiserror::Error;

/// Errors raised by metric construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalRiskError {
    #[error("evaluation set is empty")]
    EmptySet,
    #[error("record {index}: label {label} out of range for {k} classes")]
    LabelOutOfRange { index: usize, label: usize, k: usize },
    #[error("record {index}: confidence {value} outside [0, 1]")]
    InvalidConfidence { index: usize, value: f64 },
    #[error("record {index}: class confidence vector has length {len}, expected {k}")]
    ClassConfidenceLength { index: usize, len: usize, k: usize },
    #[error("record {index}: class confidence at predicted label ({class_conf}) differs from conf ({conf})")]
    ClassConfidenceMismatch {
        index: usize,
        conf: f64,
        class_conf: f64,
    },
    #[error("class count must be at least 2, got {0}")]
    InvalidClassCount(usize),
    #[error("clipping epsilon must lie in (0, 0.5), got {0}")]
    InvalidEpsilon(f64),
    #[error("confidence {0} >= 1 makes CSR undefined")]
    DivisionByZeroRisk(f64),
    #[error("sigma_CSR must be positive, got {0}")]
    DegenerateSigma(f64),
    #[error("gain is undefined when accuracy and cwA are both 1")]
    PerfectAccuracy,
    #[error("set contains no incorrect predictions")]
    NoErrors,
    #[error("number of bins must be at least 1")]
    InvalidBins,
    #[error("class {0} has no positives or no negatives")]
    DegenerateClass(usize),
    #[error("per-class confidences required for class {class_id} with {k} classes")]
    MissingClassConfidences { class_id: usize, k: usize },
    #[error("no class has a defined AUC")]
    NoValidClasses,
    #[error("confidence-weighted counts are inconsistent across classes")]
    InconsistentCounts,
    #[error("identity check failed: {0}")]
    IdentityViolation(String),
    #[error("lambda {lambda} not achievable with epsilon {epsilon}; max feasible lambda is {max_lambda}")]
    ClippingConflict {
        lambda: f64,
        epsilon: f64,
        max_lambda: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("calibration targets contain a single class")]
    DegenerateTargets,
}

pub type Result<T> = std::result::Result<T, CalRiskError>;
