"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to, so scripts can
rely on a stable code per failure class:

    0 ok, 1 internal / io, 2 missing input, 3 malformed input,
    4 invalid parameter, 5 shape mismatch, 6 pairing mismatch
"""


class OdstainError(Exception):
    exit_code = 1


class IoFailure(OdstainError, OSError):
    exit_code = 1


class MissingFile(OdstainError, FileNotFoundError):
    exit_code = 2


class MalformedImage(OdstainError, ValueError):
    exit_code = 3


class MalformedTensor(OdstainError, ValueError):
    exit_code = 3


class MalformedHeader(MalformedTensor):
    pass


class UnsupportedDtype(MalformedTensor):
    pass


class UnsupportedOrder(MalformedTensor):
    pass


class InvalidParameter(OdstainError, ValueError):
    exit_code = 4


class InvalidI0(InvalidParameter):
    pass


class InvalidAlpha(InvalidParameter):
    pass


class InvalidTarget(InvalidParameter):
    pass


class SingularMatrix(InvalidParameter):
    pass


class DegenerateClass(InvalidParameter):
    def __init__(self, class_index, mass):
        self.class_index = class_index
        self.mass = mass
        super().__init__(
            f"class {class_index} has probability mass {mass:.3g} < 1e-8"
        )


class Undefined(InvalidParameter):
    pass


class EmptyReport(InvalidParameter):
    pass


class ShapeMismatch(OdstainError, ValueError):
    exit_code = 5


class ImageTooSmall(ShapeMismatch):
    pass


class LengthMismatch(ShapeMismatch):
    pass


class PairingMismatch(OdstainError, ValueError):
    exit_code = 6

    def __init__(self, filename, side):
        self.filename = filename
        self.side = side
        super().__init__(f"{filename!r} has no counterpart in the {side} directory")
