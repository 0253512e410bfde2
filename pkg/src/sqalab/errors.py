"""Shared error type carrying a stable machine-readable code."""


class SqaLabError(ValueError):
    """Input or contract violation.

    ``code`` is a short stable identifier scripts can match on; the CLI
    reports failures as ``<code>: <message>``.
    """

    def __init__(self, message: str, *, code: str = "invalid_input"):
        super().__init__(message)
        self.code = code
