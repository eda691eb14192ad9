class QuantcalError(Exception):
    """Base error for the recalibration engine"""


class InputError(QuantcalError, ValueError):
    """Invalid argument, shape or value passed to a library operation"""


class SeriesFormatError(InputError):
    """Malformed series file, located by path, row and column"""

    def __init__(self, message, path=None, row=None, column=None):
        self.path = path
        self.row = row
        self.column = column
        location = []
        if path is not None:
            location.append(str(path))
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class ScenarioError(InputError):
    """Unknown adversarial scenario"""

    def __init__(self, name, known):
        self.name = name
        self.known = sorted(known)
        super().__init__(
            f"Unknown scenario '{name}'. Known scenarios: {', '.join(self.known)}"
        )
