class QMirrorError(Exception):
    """ Base class of every error raised by the simulator. """


class PhaseMatchImpossible(QMirrorError, ValueError):
    pass


class OutOfDispersionRange(QMirrorError, ValueError):
    pass


class FrequencyOrder(QMirrorError, ValueError):
    pass


class StepTooLarge(QMirrorError, ValueError):
    pass


class CollimatedOutput(QMirrorError, ValueError):
    pass


class NoExitAngle(QMirrorError, ValueError):
    pass


class DegenerateConjugate(QMirrorError, ValueError):
    pass


class DegenerateTriangle(QMirrorError, ValueError):
    pass


class RayBlocked(QMirrorError):
    pass


class GammaOutOfRange(QMirrorError, ValueError):
    pass


class NoFringes(QMirrorError):
    pass


class InsufficientCounts(QMirrorError, ValueError):
    pass


class ConfigInvalid(QMirrorError, ValueError):
    pass


class ParseError(QMirrorError):
    pass


class ValidationError(QMirrorError, ValueError):
    """ Raised by the config loader. `key` names the offending entry. """

    def __init__(self, key: str, message: str = None, suggestion: str = None):
        self.key = key
        self.suggestion = suggestion
        text = message or f'invalid config entry: {key}'
        if suggestion:
            text = f'{text} (did you mean "{suggestion}"?)'
        super(ValidationError, self).__init__(text)


class OutputError(QMirrorError, OSError):
    pass
