"""Exception types shared by every module."""


class InvalidInputError(ValueError):
    """Malformed input: empty or ragged batch, rank out of range, bad file."""


class ConstraintError(InvalidInputError):
    """A rule or attack parameter violates its admissibility constraint."""


class RoundError(ConstraintError):
    """A constraint violation raised while executing a given training round."""

    def __init__(self, round_index: int, cause: Exception):
        self.round_index = round_index
        self.cause = cause
        super().__init__(f"round {round_index}: {cause}")
