"""Exception hierarchy shared by all modules.

File-facing positions (view number, line, column) are 1-based so that they
match what a user sees in an editor.
"""


class MFSGLError(Exception):
    """Base class for every error raised by this package."""


# data_io

class FileMissing(MFSGLError, FileNotFoundError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"file not found: {self.path}")


class ParseError(MFSGLError, ValueError):
    def __init__(self, row, col, path=None, token=None):
        self.row, self.col, self.path = row, col, path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}line {row}, column {col}: cannot parse {token!r} as a number")


class DimensionMismatch(MFSGLError, ValueError):
    def __init__(self, view, detail=""):
        self.view = view
        super().__init__(f"view {view}: {detail}" if detail else f"view {view}: dimension mismatch")


class NonFiniteValue(MFSGLError, ValueError):
    def __init__(self, view, row, col):
        self.view, self.row, self.col = view, row, col
        super().__init__(f"view {view}: non-finite value at line {row}, column {col}")


class InvalidLabels(MFSGLError, ValueError):
    pass


class ManifestError(MFSGLError, ValueError):
    pass


# graph

class InvalidMu(MFSGLError, ValueError):
    pass


class KTooLarge(MFSGLError, ValueError):
    pass


class NotSymmetric(MFSGLError, ValueError):
    pass


class ConvergenceFailure(MFSGLError, ArithmeticError):
    pass


# solver

class InvalidConfig(MFSGLError, ValueError):
    pass


class InvalidCount(MFSGLError, ValueError):
    pass


# eval

class LengthMismatch(MFSGLError, ValueError):
    pass


class DegenerateSingleCluster(MFSGLError, ArithmeticError):
    pass


class EmptyClusterUnrecoverable(MFSGLError, ArithmeticError):
    pass
