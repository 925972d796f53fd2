"""Exception hierarchy shared by every module."""


class WdroError(Exception):
    """Base class for all errors raised by wdrocert."""


class DimensionError(WdroError, ValueError):
    """A point or parameter does not match the declared dimensions."""


class DomainError(WdroError, ValueError):
    """A value lies outside its declared domain (box, alphabet, parameter box)."""


class InfeasibleRadiusError(WdroError, ValueError):
    """The radius is incompatible with the requested problem (e.g. rho <= m_c)."""


class SolverError(WdroError, RuntimeError):
    """A numerical routine failed (non-finite objective, unbounded LP, ...)."""


class ConstantFamilyError(WdroError, ValueError):
    """The family contains a (near-)constant member, so the critical radius is zero."""


class ConfigError(WdroError, ValueError):
    """Invalid experiment configuration. ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
