"""Exception hierarchy for the claimcheck pipeline.

Input-data problems (bad CSV, dangling references, malformed documents)
raise InputError subclasses; internal consistency violations raise
EngineError subclasses. The CLI maps the former to exit code 2 and the
latter to exit code 3.
"""


class ClaimCheckError(Exception):
    """Base class for all claimcheck errors."""


class InputError(ClaimCheckError):
    """A problem with user-supplied data or configuration."""


# --- dataset ingestion ---

class EmptyInputError(InputError):
    """CSV stream contained no header record."""


class RaggedRowError(InputError):
    """CSV data row length differs from the header length."""


class DuplicateHeaderError(InputError):
    """CSV header contains duplicate or empty column names."""


class CyclicSchemaError(InputError):
    """Foreign-key graph over tables contains a directed cycle."""


class UnknownTableOrColumnError(InputError):
    """A foreign key or sidecar references a table/column that does not exist."""


class NonUniqueKeyError(InputError):
    """Foreign-key target column is not a unique (primary) key."""


class MalformedLineError(InputError):
    """Data-dictionary line lacks the tab separator."""


class UnknownColumnError(InputError):
    """Data-dictionary entry references an unknown column."""


class DisconnectedError(InputError):
    """No PK-FK join path connects the required tables."""


# --- document ingestion ---

class MalformedMarkupError(InputError):
    """HTML structure too broken to recover a document tree."""


# --- inference / evaluation ---

class EngineError(ClaimCheckError):
    """Internal pipeline inconsistency; indicates a bug, not bad input."""


class MissingScoreError(EngineError):
    """A candidate references a fragment absent from the claim's relevance row."""


class BudgetTooSmallError(InputError):
    """Evaluation budget cannot cover a single cube computation."""


class TypeMismatchError(EngineError):
    """Numeric aggregate requested over a Text target column."""


class NotCoveredError(EngineError):
    """No computed cube covers a scoped candidate (scope bug)."""
