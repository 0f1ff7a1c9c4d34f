"""Errors shared by the plotting tool."""


class PlotError(Exception):
    """Base class; carries an optional location string for diagnostics."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class SpecError(PlotError):
    """Bad plot spec: unknown kind, missing file, bad output extension."""


class SchemaError(PlotError):
    """Input CSV does not carry the documented header or has no data rows."""
