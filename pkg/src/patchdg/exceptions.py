"""Exception hierarchy shared by all pipeline stages."""


class PatchDGError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(PatchDGError, ValueError):
    pass


class MeshError(PatchDGError):
    """Malformed or non-manifold mesh input."""


class GeometryError(PatchDGError):
    """The interface violates a geometric assumption on some cell."""

    def __init__(self, message: str, cell: int | None = None):
        super().__init__(message)
        self.cell = cell


class PatchError(PatchDGError):
    pass


class UnisolvenceError(PatchDGError):
    """Sampling nodes of a patch do not determine a unique polynomial."""


class AssemblyError(PatchDGError):
    pass


class SolverError(PatchDGError):
    pass


class BenchmarkError(PatchDGError):
    pass
