class DcimError(Exception):
    """Base class for domain errors raised by this package."""


class InfeasibleDesign(DcimError, ValueError):
    """A design point violates a structural invariant."""


class NoFeasibleDesign(DcimError):
    """No point of the search space satisfies the constraints.

    ``violations`` maps each bound that was hit to a human-readable reason.
    """

    def __init__(self, message: str, violations: dict | None = None):
        super().__init__(message)
        self.violations = dict(violations or {})


class CapExceeded(DcimError):
    pass


class NetlistError(DcimError):
    """Structural problem in a netlist (multiple drivers, combinational loop...)."""
