"""Exception hierarchy shared across the library, the CLI and the HTTP facade.

Every error carries a stable ``code`` (its class name) so the service layer can
map engine failures onto wire-level error payloads without string matching.
"""

from __future__ import annotations


class RegimescopeError(Exception):
    """Base class for all engine errors."""

    #: HTTP status the service layer should use for this family of errors.
    http_status = 422

    @property
    def code(self) -> str:
        return type(self).__name__


class InputError(RegimescopeError):
    """Malformed or inconsistent caller input (HTTP 400 family)."""

    http_status = 400


class MalformedCsv(InputError):
    pass


class UnbalancedPanel(InputError):
    def __init__(self, missing: list[tuple], total_missing: int | None = None):
        self.missing = missing[:10]
        self.total_missing = len(missing) if total_missing is None else total_missing
        keys = ", ".join(repr(k) for k in self.missing)
        super().__init__(
            f"panel is unbalanced: {self.total_missing} missing (entity, period, variable) "
            f"cells; first {len(self.missing)}: {keys}"
        )


class NonNumericValue(InputError):
    pass


class DuplicateKey(InputError):
    pass


class NonPositiveValue(RegimescopeError):
    pass


class TooShort(RegimescopeError):
    pass


class UnknownVariable(InputError):
    pass


class UnknownEquation(InputError):
    pass


class InvalidSpec(InputError):
    pass


class RankDeficient(RegimescopeError):
    def __init__(self, columns: list[str] | list[int], message: str | None = None):
        self.columns = list(columns)
        super().__init__(message or f"design matrix is rank deficient; dependent columns: {self.columns}")


class DimensionMismatch(InputError):
    pass


class ZeroVariance(RegimescopeError):
    pass


class AllZeroResiduals(RegimescopeError):
    pass


class DegenerateResiduals(RegimescopeError):
    pass


class UnsupportedLevel(InputError):
    pass


class TooFewDistinctValues(RegimescopeError):
    pass


class EmptyRegime(RegimescopeError):
    pass


class NonNestedSSR(RegimescopeError):
    pass


class RegimeTooSmall(RegimescopeError):
    def __init__(self, regime: str, usable_rows: int, required: int, unit: str = "usable rows"):
        self.regime = regime
        self.usable_rows = usable_rows
        self.required = required
        super().__init__(
            f"{regime} regime has {usable_rows} {unit}; at least {required} required"
        )


class Singular(RegimescopeError):
    pass


class NotFound(RegimescopeError):
    http_status = 404


class HashMismatch(RegimescopeError):
    http_status = 409


class SchemaVersionUnsupported(RegimescopeError):
    pass
