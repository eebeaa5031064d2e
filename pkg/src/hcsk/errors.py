"""Exception types shared across the package."""


class HcskError(Exception):
    """Base class for every error raised by hcsk."""


class NonPositiveDefinite(HcskError):
    pass


class NegativeEigenvalue(HcskError):
    pass


class SpectralRadiusExceeded(HcskError):
    def __init__(self, value, where=None):
        self.value = float(value)
        self.where = where
        msg = f"spectral radius {self.value:.6g} >= 1"
        if where is not None:
            msg += f" at {where}"
        super().__init__(msg)


class DegenerateSpectrum(HcskError):
    def __init__(self, gap):
        self.gap = float(gap)
        super().__init__(f"eigenvalue gap {self.gap:.3g} below threshold")


class NotConvex(HcskError):
    """Potential Hessian not positive definite, or polygon not strictly convex."""

    def __init__(self, where, detail=""):
        self.where = where
        super().__init__(f"not convex at {where} {detail}".strip())


class ImaginaryLeak(HcskError):
    def __init__(self, value):
        self.value = float(value)
        super().__init__(f"imaginary part of the divergence is {self.value:.3g}")


class AntisymmetryViolated(HcskError):
    pass


class ModeObstructed(HcskError):
    def __init__(self, k):
        self.k = tuple(int(v) for v in k)
        super().__init__(f"linearised det equation has no solution at mode {self.k}")


class SafeguardViolated(HcskError):
    def __init__(self, t_reached, detail=""):
        self.t_reached = float(t_reached)
        super().__init__(f"no admissible step; continuity reached t={self.t_reached:.6g} {detail}".strip())


class NoConvergence(HcskError):
    def __init__(self, message, trace=None):
        self.trace = trace or []
        super().__init__(message)


class ConstraintViolated(HcskError):
    pass


class BranchLost(HcskError):
    pass


class NotDelzant(HcskError):
    def __init__(self, vertex, det):
        self.vertex = vertex
        self.det = det
        super().__init__(f"vertex {vertex}: normals have |det| = {abs(det)}")


class BoundaryPoint(HcskError):
    pass


class TooCloseToBoundary(HcskError):
    pass


class DegenerateProbe(HcskError):
    pass
