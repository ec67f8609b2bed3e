"""Decision diagrams over measurement bases: structure, construction, I/O."""

from ddmeasure.ddcore.construct import (
    ReducedPauliList,
    build,
    build_from_reduced,
    build_initial,
    compatibility_matrix,
    merge_equivalent,
    normalize,
    preprocess,
    remove_identities,
)
from ddmeasure.ddcore.diagram import (
    DDInvariantError,
    DDMetrics,
    DecisionDiagram,
    Edge,
    PathCountOverflow,
    metrics,
    path_count,
    sample,
    sample_codes,
    zeta,
    zeta_many,
)
from ddmeasure.ddcore.io import DDFormatError, deserialize, export_dot, serialize

__all__ = [
    "DDFormatError", "DDInvariantError", "DDMetrics", "DecisionDiagram", "Edge",
    "PathCountOverflow", "ReducedPauliList", "build", "build_from_reduced",
    "build_initial", "compatibility_matrix", "deserialize", "export_dot",
    "merge_equivalent", "metrics", "normalize", "path_count", "preprocess",
    "remove_identities", "sample", "sample_codes", "serialize", "zeta", "zeta_many",
]
