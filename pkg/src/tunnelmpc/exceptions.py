"""Exception hierarchy shared by the model, barrier and solver layers."""


class DomainError(ValueError):
    """A model was evaluated outside the region where it is defined."""


class AeroSingularityError(DomainError):
    """Thrust-ratio model evaluated at or inside its singular distance."""


class BarrierViolation(DomainError):
    """Barrier function evaluated at a state outside its defined safe set."""


class ConfigError(ValueError):
    """Invalid scenario configuration. The message names the offending key path."""
