"""Exception hierarchy shared by every adaptflow module."""


class AdaptflowError(Exception):
    """Base class for all library errors."""


class DimensionError(AdaptflowError, ValueError):
    pass


class ValidationError(AdaptflowError, ValueError):
    pass


class MissingKey(AdaptflowError, KeyError):
    def __init__(self, key, available=()):
        self.key = key
        self.available = sorted(str(k) for k in available)
        super().__init__(key)

    def __str__(self):
        msg = f"missing key {self.key!r}"
        if self.available:
            msg += f"; available: {', '.join(self.available)}"
        return msg


class TypeMismatch(AdaptflowError, TypeError):
    pass


class KeyContractViolation(AdaptflowError):
    """A hook produced keys or losses that disagree with its declarations."""

    def __init__(self, message, expected=None, produced=None):
        self.expected = expected
        self.produced = produced
        if expected is not None or produced is not None:
            message = (
                f"{message} (expected {sorted(expected or ())}, "
                f"produced {sorted(produced or ())})"
            )
        super().__init__(message)


class KeyCollision(KeyContractViolation, KeyError):
    def __init__(self, key):
        self.key = key
        KeyContractViolation.__init__(self, f"key collision: {key!r}")

    def __str__(self):
        return self.args[0]


class LossCollision(KeyContractViolation):
    def __init__(self, names):
        self.names = sorted(names)
        super().__init__(f"duplicate loss names: {self.names}")


class NonFiniteLoss(AdaptflowError, ArithmeticError):
    def __init__(self, losses, where=None):
        self.losses = dict(losses)
        self.where = where
        msg = f"non-finite loss: {self.losses}"
        if where:
            msg = f"{msg} at {where}"
        super().__init__(msg)


class NonFiniteGradient(AdaptflowError, ArithmeticError):
    pass
