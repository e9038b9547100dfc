"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HateFLError(Exception):
    """Base class for every error raised by this package."""


# --- parameters -----------------------------------------------------------


class EmptyUpdateSet(HateFLError):
    def __init__(self) -> None:
        super().__init__("fed_avg needs at least one update")


class ShapeMismatch(HateFLError):
    def __init__(self, key: str, expected_len: int | None, got_len: int | None) -> None:
        self.key = key
        self.expected_len = expected_len
        self.got_len = got_len
        super().__init__(f"shape mismatch on {key!r}: expected {expected_len}, got {got_len}")


class NonFiniteValue(HateFLError):
    def __init__(self, key: str) -> None:
        self.key = key
        super().__init__(f"non-finite value in {key!r}")


class InvalidKP(HateFLError):
    def __init__(self, k_p: int, max_allowed: int) -> None:
        self.k_p = k_p
        self.max_allowed = max_allowed
        super().__init__(f"k_p={k_p} outside [0, {max_allowed}]")


class CheckpointError(HateFLError):
    pass


# --- model ----------------------------------------------------------------


class EmptyBatch(HateFLError):
    def __init__(self) -> None:
        super().__init__("loss_and_grad needs a non-empty batch")


# --- data -----------------------------------------------------------------


class DataError(HateFLError):
    pass


class ParseError(DataError):
    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DuplicateId(DataError):
    def __init__(self, id: str, line: int | None = None) -> None:
        self.id = id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate id {id!r}{where}")


class InvalidCategory(DataError):
    def __init__(self, id: str, reason: str = "", line: int | None = None) -> None:
        self.id = id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"invalid category for {id!r}{where}: {reason}".rstrip(": "))


class EmptyCorpus(DataError):
    def __init__(self, what: str = "corpus") -> None:
        super().__init__(f"{what} is empty")


class InsufficientCandidates(DataError):
    def __init__(self, split: str, needed: int, found: int) -> None:
        self.split = split
        self.needed = needed
        self.found = found
        super().__init__(f"{split}: needed {needed} candidates, found {found}")


class NotEnoughData(DataError):
    def __init__(self, n: int, available: int) -> None:
        self.n = n
        self.available = available
        super().__init__(f"requested {n} examples, only {available} available")


class IdMismatch(DataError):
    def __init__(self, only_a: set[str], only_b: set[str]) -> None:
        self.only_a = only_a
        self.only_b = only_b
        super().__init__(
            f"id sets differ: {len(only_a)} only in first, {len(only_b)} only in second"
        )


class LeakageViolation(DataError):
    pass


# --- evaluation -----------------------------------------------------------


class LengthMismatch(HateFLError):
    def __init__(self, a: int, b: int) -> None:
        super().__init__(f"length mismatch: {a} vs {b}")


class EmptyInput(HateFLError):
    def __init__(self, what: str = "input") -> None:
        super().__init__(f"{what} is empty")


class ReportMismatch(HateFLError):
    pass


class ClientMismatch(ReportMismatch):
    pass


class ShotCountMismatch(ReportMismatch):
    pass


# --- toxicity API ---------------------------------------------------------


class ToxicityAPIError(HateFLError):
    pass


class NetworkError(ToxicityAPIError):
    pass


class AuthError(ToxicityAPIError):
    pass


class MalformedResponse(ToxicityAPIError):
    pass


# --- orchestration --------------------------------------------------------


class ConfigError(HateFLError):
    pass


class ClientError(HateFLError):
    """Wraps a failure with the client/seed/round it happened in."""

    def __init__(self, client_id: str, cause: Exception, seed: int | None = None,
                 round: int | None = None) -> None:
        self.client_id = client_id
        self.seed = seed
        self.round = round
        self.cause = cause
        ctx = [f"client={client_id}"]
        if seed is not None:
            ctx.append(f"seed={seed}")
        if round is not None:
            ctx.append(f"round={round}")
        super().__init__(f"[{' '.join(ctx)}] {cause}")
