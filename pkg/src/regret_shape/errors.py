"""Exception types raised across the package."""


class RegretShapeError(Exception):
    pass


class CurveIntersection(RegretShapeError):
    """Boundary curves are not nested and pairwise disjoint."""


class MeshingFailure(RegretShapeError):
    pass


class ElementInversion(RegretShapeError):
    """A displacement made some triangle area non-positive."""


class SelfIntersectingBoundary(RegretShapeError):
    pass


class SolveFailure(RegretShapeError):
    pass


class PointOutsideMesh(RegretShapeError):
    pass


class DegenerateStep(RegretShapeError):
    """Barzilai-Borwein quotient with a vanishing denominator."""


class NonFiniteObjective(RegretShapeError):
    pass


class IndexOutOfRange(RegretShapeError, IndexError):
    pass


class ConfigError(RegretShapeError):
    pass
