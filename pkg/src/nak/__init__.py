"""Truncated arithmetic in Q_p and F_p((t)), scaling maps, measures on the
valuation ring, exceptional-set constructions and the `nak` experiment CLI."""

from .errors import (AmbiguityFailure, ConstructionFailure, DivisionByZero, InsufficientPrecision,
                     InvalidConfiguration, InvalidFamily, InvalidInput, InvalidSchedule, NakError,
                     NoSquareRoot, OutOfDomain, TooLarge, UnsupportedMeasure)
from .field import (FieldSpec, LocalFieldElement, element_from_json, from_fraction, from_int,
                    from_rational, hensel_sqrt, parse_element)
from .disk import Disk
from .scaling import ScalingMapSpec, apply, predicted_distance, scaling_domain, scaling_exponent
from .measures import HAAR, MU_STAR, FrequencyReport, MeasureSpec
from .exceptional import MoranSchedule, construct_point, gamma_dim
from .pisot import PisotChabautySpec

__version__ = "0.1.0"
