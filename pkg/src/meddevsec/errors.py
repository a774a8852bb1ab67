"""Exception types shared across the toolkit.

Callers distinguish four failure families: unknown references, identifier
collisions, invariant breaches, and malformed input documents.  The CLI maps
all of them to exit code 1; programmatic callers catch the specific class.
"""

from __future__ import annotations


class MedDevSecError(Exception):
    """Base class for all domain errors raised by this package."""


class NotFoundError(MedDevSecError):
    """A referenced element (component, link, hazard, project...) does not exist."""


class ConflictError(MedDevSecError):
    """An identifier collision or a stale-revision write."""


class ValidationError(MedDevSecError):
    """An argument or document violates a stated invariant."""


class IncompleteQuestionnaireError(ValidationError):
    """Questionnaire responses missing one or more factor groups.

    Unanswered groups must be marked explicitly; silence is rejected so a
    profile never hides an unasked question.
    """

    def __init__(self, missing_groups: list[str]) -> None:
        self.missing_groups = list(missing_groups)
        super().__init__(
            "questionnaire incomplete; missing groups: " + ", ".join(self.missing_groups)
        )


class ParseError(MedDevSecError):
    """A snapshot or project document could not be parsed.

    ``context`` names the line, section, or field that failed so the message
    points at the offending spot instead of the whole file.
    """

    def __init__(self, message: str, *, context: str | None = None) -> None:
        self.context = context
        super().__init__(f"{message} ({context})" if context else message)


class GatewayError(MedDevSecError):
    """Transport-level failure talking to a text-completion gateway.

    Raised by gateway implementations; scenario generation catches it and
    degrades to the deterministic fallback instead of propagating.
    """
