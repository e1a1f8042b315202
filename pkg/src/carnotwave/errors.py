"""Exception types shared across the package."""


class CarnotWaveError(Exception):
    """Base class for all package-specific errors."""


class RankDrop(CarnotWaveError):
    """J_mu has lower rank than the generic maximal rank of the group."""


class OutsideOmega(RankDrop):
    """mu lies outside the maximal-rank set; phase-level objects are undefined."""


class ZeroFrequency(CarnotWaveError):
    """The first-layer frequency xi vanishes; the Hamiltonian is not smooth there."""


class ZeroTime(CarnotWaveError):
    """An operation requiring t != 0 was called with t = 0."""


class NearCharacteristic(CarnotWaveError):
    """The Hamiltonian dropped below threshold along an integrated trajectory."""


class RefineFailure(CarnotWaveError):
    """Quadrature refinement changed the result by more than the requested tolerance."""
