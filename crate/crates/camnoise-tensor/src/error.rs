//! Error type for graph construction and execution.

use thiserror::Error;

/// Errors raised while building or running a computation graph.
#[derive(Debug, Error)]
pub enum GraphError {
    /// A tensor shape/buffer combination was internally inconsistent.
    #[error("invalid tensor: {0}")]
    BadTensor(String),

    /// Two nodes or buffers disagreed about a shape.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        /// Operation or call site that detected the mismatch.
        context: String,
        /// Shape required at that site.
        expected: String,
        /// Shape actually supplied.
        got: String,
    },

    /// `forward` received the wrong number of input tensors.
    #[error("graph declares {declared} input(s), {given} given")]
    InputArity {
        /// Inputs the graph was built with.
        declared: usize,
        /// Inputs passed to `forward`.
        given: usize,
    },

    /// An operation was asked to consume a node of the wrong layout.
    #[error("{context}: node {node} has {got} layout, needs {expected}")]
    WrongLayout {
        /// Operation being constructed.
        context: String,
        /// Offending upstream node id.
        node: usize,
        /// Layout required.
        expected: &'static str,
        /// Layout found.
        got: &'static str,
    },

    /// A node id referenced a node that does not exist (or is downstream).
    #[error("{context}: node id {node} out of range ({len} nodes built so far)")]
    UnknownNode {
        /// Operation being constructed.
        context: String,
        /// Offending node id.
        node: usize,
        /// Number of nodes currently in the graph.
        len: usize,
    },

    /// Two parameters were registered under the same name.
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),

    /// A named parameter was looked up or loaded but never registered.
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    /// A concat node was built with no operands.
    #[error("concat requires at least one operand")]
    EmptyConcat,
}
