use thiserror::Error;

/// A grid node, `(i, j)` with `i` along `u` and `j` along `v`.
pub type Node = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("bivector is not decomposable: |<l,l>| = {residual:.3e} exceeds tolerance")]
    NotDecomposable { residual: f64 },
    #[error("not the star operator of a quadric: {0}")]
    NotQuadricStar(String),
    #[error("induced pairing is degenerate on the span ({0})")]
    DegenerateSubspace(String),
    #[error("umbilic region at {} node(s), first at {:?}", nodes.len(), nodes.first())]
    Umbilic { nodes: Vec<Node> },
    #[error("chart is not curvature-line aligned: residual {residual:.3e} at {node:?}")]
    NotCurvatureLine { residual: f64, node: Node },
    #[error("second fundamental form has the wrong signature at {node:?}")]
    Signature { node: Node },
    #[error("streamline left the sampled domain near {at:?}")]
    StreamlineExit { at: (f64, f64) },
    #[error("chart is not asymptotic: residual {residual:.3e} at {node:?}")]
    NotAsymptotic { residual: f64, node: Node },
    #[error("map is not immersed at {} node(s), first at {:?}", nodes.len(), nodes.first())]
    NotImmersed { nodes: Vec<Node> },
    #[error("ill-conditioned focal basis at {node:?}")]
    IllConditioned { node: Node },
    #[error("induced conformal structure degenerates at {} node(s), first at {:?}", nodes.len(), nodes.first())]
    DegenerateConformal { nodes: Vec<Node> },
    #[error("focal value hit: 1 - t*kappa = {value:.3e} at {node:?}")]
    FocalValue { value: f64, node: Node },
    #[error("map does not preserve the pairing: defect {defect:.3e}")]
    NotIsometry { defect: f64 },
    #[error("degenerate reconstruction: <S_u,S_v> vanishes at {node:?}")]
    DegenerateReconstruction { node: Node },
    #[error("operator is not rank one at {node:?} (rank gap {gap:.3e})")]
    NotRankOne { node: Node, gap: f64 },
    #[error("missing field: {0}")]
    MissingField(&'static str),
    #[error("element is not skew for the pairing: defect {defect:.3e}")]
    NotSkew { defect: f64 },
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("frame propagation failed at {node:?}")]
    GaugePropagation { node: Node },
    #[error("matrix logarithm failed at {node:?}")]
    LogBranch { node: Node },
    #[error("spectral parameter must be nonzero")]
    ZeroLambda,
    #[error("input is not harmonic: flatness {flatness:.3e} exceeds threshold {threshold:.3e}")]
    NotHarmonic { flatness: f64, threshold: f64 },
    #[error("transform {0} is incompatible with the surface geometry")]
    IncompatibleTransform(String),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
