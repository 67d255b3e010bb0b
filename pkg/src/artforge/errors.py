"""Exception hierarchy. Each class maps to one CLI exit code."""


class ArtError(Exception):
    exit_code = 1


class ConfigError(ArtError, ValueError):
    exit_code = 2


class SnapshotError(ArtError, ValueError):
    """Malformed or inconsistent chain snapshot."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleError(ArtError):
    exit_code = 3


class LabelMismatchError(ArtError):
    exit_code = 4

    def __init__(self, unknown: list[str]):
        self.unknown = list(unknown)
        super().__init__(f"{len(self.unknown)} labeled tx_id(s) not in snapshot: " + ", ".join(self.unknown))


class UnknownTxError(ArtError, KeyError):
    exit_code = 5

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown transaction"


class UnknownOutputError(ArtError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown output"
