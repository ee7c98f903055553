"""Exception hierarchy; each family maps onto a CLI exit code."""


class FoilskinError(Exception):
    exit_code = 1


class ConfigError(FoilskinError):
    exit_code = 2


class DataError(FoilskinError):
    exit_code = 3


class NumericalError(FoilskinError):
    exit_code = 4


class GeometryError(DataError):
    """Degenerate geometry: coincident chord ends, unordered control points."""


class CalibrationError(DataError):
    pass


class ParseError(DataError):
    """Malformed log file; ``line`` is 1-based and counts the header."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class AlignmentError(DataError):
    pass


class TrainingError(NumericalError):
    def __init__(self, epoch, message):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")
