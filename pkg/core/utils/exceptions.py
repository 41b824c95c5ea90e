class ValidationError(Exception):
    pass


class ConstraintViolationError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class UndefinedAngleError(ValidationError):
    pass


class NotAtCollisionError(ValidationError):
    pass


class NumericalError(Exception):
    pass


class CollisionError(NumericalError):
    pass


class LineSearchError(NumericalError):
    pass


class StepSizeUnderflowError(NumericalError):
    pass


class ShootingDivergenceError(NumericalError):
    pass


class SingularJacobianError(NumericalError):
    pass


class ToleranceError(NumericalError):
    pass


class FileFormatError(Exception):
    pass


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def exit_code_for(error: BaseException) -> int:
    # pydantic's ValidationError is a ValueError subclass
    if isinstance(error, (ValidationError, ValueError)):
        return EXIT_VALIDATION
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, (FileFormatError, OSError)):
        return EXIT_IO
    return 1
