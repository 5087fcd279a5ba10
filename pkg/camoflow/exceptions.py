"""
CamoFlow Custom Exception Hierarchy

Provides specific exception types for model building, data handling and
numerical verification. All exceptions inherit from CamoFlowError so the
command layer can map them onto process exit codes in one place.
"""


class CamoFlowError(Exception):
    """Base exception for all CamoFlow errors"""
    exit_code = 1


# Configuration and shape exceptions
class ConfigurationError(CamoFlowError):
    """Invalid configuration value or illegal operator setup"""
    exit_code = 2


class DimensionError(CamoFlowError):
    """Tensor shapes are incompatible for the requested operation"""
    exit_code = 2


class TargetRangeError(CamoFlowError, ValueError):
    """Supervision target has values outside [0, 1]"""
    exit_code = 2


# Data exceptions
class DataIOError(CamoFlowError):
    """Reading or writing a dataset file failed"""
    exit_code = 3


class FormatError(DataIOError):
    """File content does not match the expected binary layout"""
    exit_code = 3


# Numerical exceptions
class NumericError(CamoFlowError):
    """A loss or function value became NaN or infinite"""
    exit_code = 4


class GradCheckFailure(CamoFlowError):
    """Analytic and finite-difference gradients disagree"""
    exit_code = 5


# State exceptions
class StateError(CamoFlowError):
    """Object is not in a state that permits the operation"""
    pass


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception onto the CLI exit code

    Args:
        error: Raised exception

    Returns:
        Exit code (1 for anything outside the hierarchy)
    """
    if isinstance(error, CamoFlowError):
        return error.exit_code
    return 1
