"""Closed disks D(a, q^-m) of a local field."""

from .errors import InsufficientPrecision, InvalidInput
from .field import FieldSpec, LocalFieldElement, from_int


class Disk:
    """D(center, q^-m).  Two disks are equal iff m agrees and centers agree mod pi^m."""

    __slots__ = ("center", "radius_exponent", "_key")

    def __init__(self, center, radius_exponent):
        m = int(radius_exponent)
        if center.abs_precision < m:
            raise InsufficientPrecision("disk center must be known modulo pi^m")
        self.center = center.truncate(m)
        self.radius_exponent = m
        self._key = (center.spec, self.center.key(m))

    @classmethod
    def unit_ball(cls, spec):
        return cls(spec.zero(0), 0)

    @classmethod
    def from_digits(cls, spec, digits, v=0):
        """The disk of all x whose digits from index v on start with `digits`."""
        m = v + len(digits)
        return cls(LocalFieldElement.from_digits(spec, v, digits, m), m)

    @property
    def spec(self):
        return self.center.spec

    @property
    def radius(self):
        """Radius as a power of q, returned as the exponent -m (radius q^-m)."""
        return -self.radius_exponent

    def contains(self, x):
        if x.spec != self.spec:
            raise InvalidInput("field mismatch")
        if x.abs_precision < self.radius_exponent:
            raise InsufficientPrecision("element not known to the disk's level")
        return (x - self.center).truncate(self.radius_exponent).is_zero()

    def __contains__(self, x):
        return self.contains(x)

    def contains_disk(self, other):
        return other.radius_exponent >= self.radius_exponent and self.contains(
            other.center.as_exact(max(other.radius_exponent, self.radius_exponent)))

    def in_unit_ball(self):
        return self.radius_exponent >= 0 and (self.center.is_zero() or self.center.valuation >= 0)

    def prefix_digits(self, lo=0):
        """Center digits at indices lo..m-1."""
        return self.center.digit_array(lo, self.radius_exponent)

    def sons(self):
        """The q disks of radius q^-(m+1) partitioning this one."""
        spec = self.spec
        m = self.radius_exponent
        base = self.center.as_exact(m + 1)
        out = []
        for d in range(spec.p):
            c = base + LocalFieldElement.from_digits(spec, m, [d], m + 1) if d else base
            out.append(Disk(c, m + 1))
        return out

    def key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, Disk) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def to_json(self):
        return {"center": self.center.to_json(), "radius_exponent": self.radius_exponent}

    @classmethod
    def from_json(cls, obj):
        from .field import element_from_json
        return cls(element_from_json(obj["center"]), int(obj["radius_exponent"]))

    def __repr__(self):
        return f"Disk({self.center!r}, m={self.radius_exponent})"


def cell_disks(spec, m):
    """All q^m level-m disks inside O, in canonical digit order (digit 0 fastest)."""
    from .measures import enumerate_quotient
    return [Disk(c, m) for c in enumerate_quotient(m, spec)]


__all__ = ["Disk", "FieldSpec", "cell_disks", "from_int"]
