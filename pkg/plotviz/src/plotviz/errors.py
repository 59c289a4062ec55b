"""Errors raised while reading summary CSVs."""


class PlotvizError(Exception):
    """Base class for plotviz errors."""


class SchemaError(PlotvizError):
    """The CSV does not follow the summary schema."""


class EmptyInput(PlotvizError):
    """The CSV has a header but no data rows."""
