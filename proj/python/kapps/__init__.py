"""Knowledge-graph runtime for circular-factory production systems."""

from ._kapps import (
    InsufficientData,
    MalformedDelta,
    Quad,
    RejectionEvent,
    ShapesError,
    SimReport,
    Snapshot,
    SparqlSyntaxError,
    Store,
    Term,
    TermKind,
    TransactionRejected,
    Triple,
    TurtleError,
    ValidationReport,
    ValidationResult,
    conveyor_store,
    parse_turtle,
    resource,
    resource_names,
    serialize_turtle,
    simulate,
    uc1,
    uc1_store,
    validate,
)

__version__ = "0.1.0"
