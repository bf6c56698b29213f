"""Exception types raised across flatlab."""


class FlatlabError(Exception):
    """Base class for all library errors."""


class InvalidParameter(FlatlabError, ValueError):
    pass


class InvalidPath(FlatlabError, ValueError):
    pass


class InvalidSurface(FlatlabError, ValueError):
    pass


class UnsupportedSurface(FlatlabError):
    pass


class InvalidSurgery(FlatlabError, ValueError):
    pass


class RelDomainExceeded(FlatlabError, ValueError):
    """Rel move leaves the admissible interval.

    ``max_dv`` is the supremum of admissible ``|dv|`` in the requested
    direction.
    """

    def __init__(self, message, max_dv):
        super().__init__(message)
        self.max_dv = max_dv


class OutsideChart(FlatlabError, ValueError):
    pass


class DegenerateFrame(FlatlabError, ValueError):
    pass


class InvalidFrame(FlatlabError, ValueError):
    pass


class SamplerStarved(FlatlabError, RuntimeError):
    pass


class InvalidBasePoint(FlatlabError, ValueError):
    pass


class SearchExhausted(FlatlabError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
