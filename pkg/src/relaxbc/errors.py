"""Exception hierarchy.

Every error carries the process exit code the command-line front end maps it
to: 2 for configuration problems, 3 for inadmissible systems, 4 for Kreiss
condition failures and 5 for numerical breakdowns.
"""


class RelaxBCError(Exception):
    exit_code = 5

    def diagnosis(self) -> str:
        """Single-line, machine-parsable description."""
        msg = " ".join(str(self).split())
        return f"{type(self).__name__}: {msg}"


# configuration (exit 2)

class ConfigError(RelaxBCError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class SchemaError(ConfigError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DimensionMismatch(ConfigError):
    pass


# admissibility (exit 3)

class AdmissibilityError(RelaxBCError):
    exit_code = 3


class NotValidated(AdmissibilityError):
    pass


class NotTypeII(AdmissibilityError):
    pass


class SingularA1(AdmissibilityError):
    pass


class RankDeficientK(AdmissibilityError):
    pass


class InertiaMismatch(AdmissibilityError):
    pass


class Incompatible(AdmissibilityError):
    def __init__(self, message, mismatch=float("nan")):
        self.mismatch = mismatch
        super().__init__(message)


# Kreiss conditions (exit 4)

class KreissError(RelaxBCError):
    exit_code = 4


class GkcViolatedAtReference(KreissError):
    pass


class GkcFailed(KreissError):
    pass


class UkcFailed(KreissError):
    pass


# numerics (exit 5)

class NumericalError(RelaxBCError):
    exit_code = 5


class NotSymmetric(NumericalError, ValueError):
    pass


class NonFiniteMatrix(NumericalError, ValueError):
    pass


class SplitAmbiguous(NumericalError):
    pass


class NegativeRealEigenvalue(NumericalError):
    pass


class NotStable(NumericalError):
    pass


class SingularC00(NumericalError):
    pass


class DegenerateNullSpace(NumericalError):
    pass


class SingularTraceSystem(NumericalError):
    pass


class CflViolation(NumericalError):
    pass


class BoundarySingular(NumericalError):
    pass


class BoundarySolveSingular(NumericalError):
    pass


class UnstableStep(NumericalError):
    pass


class ConvergenceFailed(NumericalError):
    pass
