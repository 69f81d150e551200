class PlotError(Exception):
    """Base class for rendering failures."""


class MissingColumn(PlotError):
    def __init__(self, path, column):
        super().__init__(f"{path} lacks required column {column!r}")
        self.path = str(path)
        self.column = column


class EmptyInput(PlotError):
    def __init__(self, path):
        super().__init__(f"{path} contains no data rows")
        self.path = str(path)
