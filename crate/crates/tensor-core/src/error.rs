use std::fmt;

/// Errors raised by tensor construction, operations and backward passes.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Operand shapes are inconsistent with the operation's contract.
    ShapeMismatch(String),
    /// A scalar was required (e.g. the loss handed to `backward`).
    NonScalar(Vec<usize>),
    /// `backward` was called a second time on an already-consumed graph root.
    GraphConsumed,
    /// Spatial pooling requires even height and width.
    OddSpatialDim { height: usize, width: usize },
    /// Inference-mode batch norm before any training statistics exist.
    UninitializedRunningStats,
    /// Train-mode batch norm needs at least two values per channel.
    BatchTooSmall { per_channel: usize },
    /// Data mutation attempted on a non-leaf tensor.
    NotALeaf,
    /// Anything else with a self-explanatory message.
    Invalid(String),
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            TensorError::NonScalar(shape) => {
                write!(f, "expected a scalar tensor, got shape {shape:?}")
            }
            TensorError::GraphConsumed => {
                write!(f, "backward already ran on this graph; re-record before calling again")
            }
            TensorError::OddSpatialDim { height, width } => {
                write!(f, "max_pool2 requires even spatial dims, got {height}x{width}")
            }
            TensorError::UninitializedRunningStats => {
                write!(f, "batch norm inference requires initialized running statistics")
            }
            TensorError::BatchTooSmall { per_channel } => write!(
                f,
                "train-mode batch norm needs >= 2 values per channel, got {per_channel}"
            ),
            TensorError::NotALeaf => write!(f, "data mutation is only allowed on leaf tensors"),
            TensorError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for TensorError {}

pub type Result<T> = std::result::Result<T, TensorError>;
