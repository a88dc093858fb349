""" Enumerations for the experiment options shared across modules """
from enum import Enum


class Strategy(str, Enum):
    """ Sensor release strategy. Collaborative sensors use two FCs, non-collaborative three. """
    COLLABORATIVE = "collab"
    NONCOLLABORATIVE = "noncollab"

    @property
    def n_fc(self) -> int:
        return 2 if self is Strategy.COLLABORATIVE else 3


class Channel(str, Enum):
    """ FC to gateway link: noiseless relay or diffusion of amplified markers """
    IDEAL = "ideal"
    NOISY = "noisy"


class SamplingModel(str, Enum):
    """ Distribution used to draw molecule counts.

    AUTO draws Gaussian counts when the mean is above 100 and exact binomial counts otherwise.
    """
    BINOMIAL = "binomial"
    GAUSSIAN = "gaussian"
    AUTO = "auto"


class AbnormalityPrior(str, Enum):
    """ Where simulated abnormalities are placed: at a uniformly chosen IP or uniformly in A """
    IPS = "ips"
    UNIFORM = "uniform"


class ClusterPrior(str, Enum):
    """ Prior over radial clusters in the analytic error probability """
    UNIFORM = "uniform"
    AREA = "area"


class ReleaseMode(str, Enum):
    """ How a simulated trial obtains its release event """
    DIRECT = "direct"
    WALK = "walk"


class DecisionRule(str, Enum):
    """ Radial decision rule: threshold ladder or the exact reduced ML rule """
    LADDER = "ladder"
    EXACT_ML = "exact_ml"


class DegeneratePolicy(str, Enum):
    """ Handling of a non-positive FC2 average in the ratio statistics.

    FLOOR raises every average to at least half a count before forming ratios. MAGNITUDE decides
    from the FC1 and FC3 averages alone. RAISE stops with DegenerateInputError.
    """
    FLOOR = "floor"
    MAGNITUDE = "magnitude"
    RAISE = "raise"
