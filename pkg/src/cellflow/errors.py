"""Exception types shared across the toolkit."""


class CellflowError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(CellflowError, ValueError):
    """Array shape or size violates an operation's requirements."""


class NumericError(CellflowError, ValueError):
    """Non-finite values where finite data is required."""


class AnnotationSchemaError(CellflowError, ValueError):
    """Annotation JSON violates the schema or its referential integrity.

    ``json_path`` points at the offending field, e.g. ``cells[0].polygon``.
    """

    def __init__(self, json_path: str, message: str):
        self.json_path = json_path
        super().__init__(f"{json_path}: {message}")
