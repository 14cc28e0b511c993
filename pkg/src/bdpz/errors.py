"""Exception types shared across the package.

The CLI maps these onto process exit codes; see ``bdpz.cli``.
"""


class BdpzError(Exception):
    """Base class for all package errors."""


class ModelConfigError(BdpzError):
    """Invalid model configuration: schema violation, negative rate
    expression, non-covering bands or a horizon that does not dominate
    the state dependence."""


class WeightConfigError(BdpzError):
    """Invalid weight-sequence configuration (non-positive entries,
    tail ratio below 1, or infimum different from 1)."""


class NotErgodicWithTheseWeights(BdpzError):
    """The envelope fit produced beta <= 0: the supplied weights do not
    certify ergodicity.  The caller must supply different weights."""


class DecreasingQuotient(BdpzError):
    """The one-sided weight partial-sum quotients are still decreasing
    at the probe index, so the probed minimum is not yet proven global.
    The caller should increase K_probe."""


class NotAchievable(BdpzError):
    """Truncation planning cannot reach the requested tolerance because
    the bound does not decrease with the window size."""


class StepTooLarge(BdpzError):
    """The requested integrator step violates the stability budget for
    the truncated generator."""


class MassDrift(BdpzError):
    """Total probability mass left the allowed band during integration."""


class NoConvergence(BdpzError):
    """Limiting-cycle detection did not reach the tolerance within the
    period budget."""
