from .executor import (
    QueryError,
    ResultTable,
    TransactionGroup,
    execute,
    interarrival_histogram,
    pauses,
    run_transaction,
)
from .parser import ParseError, Query, parse
from .profile import SearchProfile, classify_density

__all__ = [
    "ParseError",
    "Query",
    "QueryError",
    "ResultTable",
    "SearchProfile",
    "TransactionGroup",
    "classify_density",
    "execute",
    "interarrival_histogram",
    "parse",
    "pauses",
    "run_transaction",
]
