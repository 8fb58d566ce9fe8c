"""Exception hierarchy shared by all modules."""


class BlochDegenError(Exception):
    """Base class for every error raised by the library."""


class SingularLattice(BlochDegenError):
    pass


class OutOfRange(BlochDegenError):
    pass


class ParityViolation(BlochDegenError):
    pass


class NonHermitianAmplitudes(BlochDegenError):
    pass


class NonHermitian(BlochDegenError):
    pass


class EigensolverFailure(BlochDegenError):
    pass


class NonLatticeVector(BlochDegenError):
    pass


class BasisMismatch(BlochDegenError):
    pass


class AccidentalDegeneracy(BlochDegenError):
    pass


class SelectionRuleViolation(BlochDegenError):
    pass


class RegimeViolation(BlochDegenError):
    pass


class DegenerateSplit(BlochDegenError):
    pass


class IncommensurateK(BlochDegenError):
    pass


class CrowdedWindow(BlochDegenError):
    pass


class ConfigError(BlochDegenError):
    pass


class IoFailure(BlochDegenError):
    pass
