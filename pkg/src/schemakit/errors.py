"""Shared error hierarchy.

Every domain error raised by this package derives from SchemakitError so the
CLI can turn any of them into a single JSON diagnostic line and a stable exit
code. Modules define their own concrete subclasses next to the operations
that raise them; only the ones needed across module boundaries live here.
"""

from __future__ import annotations


class SchemakitError(Exception):
    """Base class for all domain errors; `code` names the error kind."""

    code = "error"

    def __init__(self, message: str, **detail):
        super().__init__(message)
        self.detail = detail

    def to_json_obj(self) -> dict:
        obj = {"error": self.code, "message": str(self)}
        if self.detail:
            obj["detail"] = {k: v for k, v in self.detail.items()}
        return obj


class NotInteractive(SchemakitError):
    """An operation needed a decision from the user in batch mode."""

    code = "not-interactive"
