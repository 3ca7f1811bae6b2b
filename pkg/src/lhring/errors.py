"""Exception types shared across the package."""


class LHRingError(Exception):
    """Base class for all package errors."""


class DomainError(LHRingError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class ConstructionError(LHRingError, ValueError):
    """A circuit description cannot be turned into a well-posed model."""


class NumericalError(LHRingError, RuntimeError):
    """A numerical routine failed to converge or produced unusable output."""


class LabelingConflict(LHRingError, RuntimeError):
    """Two target labels were assigned to the same eigenvector.

    Attributes
    ----------
    labels : tuple of str
        The two labels competing for one eigenvector.
    overlaps : tuple of float
        Squared overlaps of each label's bare state with that eigenvector.
    """

    def __init__(self, labels, overlaps, index):
        self.labels = tuple(labels)
        self.overlaps = tuple(overlaps)
        self.index = index
        super().__init__(
            f"labels {self.labels[0]!r} and {self.labels[1]!r} both map to eigenvector "
            f"{index} (overlaps {self.overlaps[0]:.4f}, {self.overlaps[1]:.4f}); "
            "an anticrossing is likely, use a reference spectrum for tracking"
        )


class ResourceError(LHRingError, MemoryError):
    """A requested model exceeds a configured size limit."""


class ValidationError(LHRingError, ValueError):
    """A configuration or data file failed validation.

    Attributes
    ----------
    field : str
        Dotted path of the offending field, e.g. ``ring.cell.C_L``.
    line : int or None
        1-based line number in the source file, when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
