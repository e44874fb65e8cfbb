"""Exception hierarchy shared across the planner."""


class FuzzyPlanError(Exception):
    """Base class for all planner errors."""


class DomainError(FuzzyPlanError):
    """Domain definition is invalid or internally inconsistent.

    ``errors`` holds (path, message) pairs pointing at the offending
    locations when the domain came from a file.
    """

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors or [])


class ProblemError(FuzzyPlanError):
    """Problem definition is invalid (including an infeasible initial state)."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors or [])


class GroundingError(FuzzyPlanError):
    """Membership grounding failed; carries predicate and action context."""

    def __init__(self, message, predicate_id=None, action_id=None):
        super().__init__(message)
        self.predicate_id = predicate_id
        self.action_id = action_id


class PlanValidationError(FuzzyPlanError):
    """A plan references unknown actions or is structurally malformed.

    Distinct from plan *rejection*: a rejected plan is a valid input whose
    replay fails a check; this error means the input could not be replayed
    at all.
    """


class SearchLimitError(FuzzyPlanError):
    """A hard search resource cap (node count) was exceeded."""


class UnsupportedConstructError(FuzzyPlanError):
    """Importer input uses a construct outside the documented subset."""

    def __init__(self, message, construct=None):
        super().__init__(message)
        self.construct = construct
