"""Exception hierarchy.

Every error raised on bad input derives from :class:`DataError`, which the CLI
maps to exit code 2.
"""


class VlbiasError(Exception):
    """Base class for all package errors."""


class DataError(VlbiasError, ValueError):
    """Input data violates a documented contract."""


class LexiconError(DataError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ParseError(DataError):
    def __init__(self, message, path=None, line=None, offset=None, index=None):
        self.path = path
        self.line = line
        self.offset = offset
        self.index = index
        parts = [str(path) if path is not None else "<stream>"]
        if line is not None:
            parts.append(f"line {line}")
        if offset is not None:
            parts.append(f"offset {offset}")
        if index is not None:
            parts.append(f"record {index}")
        super().__init__(f"{', '.join(parts)}: {message}")


class SchemaError(ParseError):
    def __init__(self, message, field=None, record_id=None, **kw):
        self.field = field
        self.record_id = record_id
        if field is not None:
            message = f"field {field!r}: {message}"
        if record_id is not None:
            message = f"{message} (id={record_id})"
        super().__init__(message, **kw)


class DomainError(DataError):
    """Argument outside the domain of a function (bad step, empty set, ...)."""


class ShapeError(DataError):
    """Accumulators with mismatched axes were combined."""


class MetricError(DataError):
    """A metric is undefined for the given data (e.g. no measurable pairs)."""


class UnsupportedTaskError(DataError):
    pass
