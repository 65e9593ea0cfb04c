"""Exception types raised by the solver pipeline."""


class PWBDDCError(Exception):
    """Base class for all package errors."""


class ConfigError(PWBDDCError, ValueError):
    """Invalid mesh, solver or CLI configuration."""


class NoValidFactorization(ConfigError):
    """``p`` admits no (n1, n2) factorization obeying the direction parity rule."""


class MissingBoundaryData(PWBDDCError, ValueError):
    """A boundary face carries a tag for which no data was supplied."""


class SingularInterior(PWBDDCError, ArithmeticError):
    def __init__(self, subdomain, detail=""):
        self.subdomain = subdomain
        msg = f"interior block of subdomain {subdomain} is not numerically positive definite"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class SingularEliminationBlock(PWBDDCError, ArithmeticError):
    def __init__(self, glob, subdomain):
        self.glob = glob
        self.subdomain = subdomain
        super().__init__(f"complementary interface block of subdomain {subdomain} "
                         f"for glob {glob} is not positive definite")


class SingularDeluxeSum(PWBDDCError, ArithmeticError):
    def __init__(self, glob):
        self.glob = glob
        super().__init__(f"sum of Schur blocks on glob {glob} is singular; "
                         "deluxe scaling undefined")


class EigenSolverFailure(PWBDDCError, ArithmeticError):
    def __init__(self, glob, cause=None):
        self.glob = glob
        super().__init__(f"generalized eigensolve failed on glob {glob}: {cause}")


class NonHermitianDetected(PWBDDCError, ArithmeticError):
    """The Krylov operator produced a non-real energy pᴴSp."""


class SizeCapExceeded(PWBDDCError, ValueError):
    """Dense reference requested above the oracle size cap."""
