'''
Every failure of ionshuttle is reported with one of these exceptions.

There are two families: ``ConfigError`` when what was asked makes
no sense, and ``NumericalError`` when the computation could not deliver
what was asked. The command line maps them to different exit codes
(see ``jobs.Status``).

>>> from ionshuttle.errors import EscapeError, NumericalError, ShuttleError
>>> e = EscapeError("ion left the window", time=0.25, x=-150.0)
>>> isinstance(e, NumericalError), isinstance(e, ShuttleError)
(True, True)

>>> e.time, e.x
(0.25, -150.0)

The extra attributes are keyword arguments so the exceptions can travel
through a multiprocessing queue:

>>> import pickle
>>> pickle.loads(pickle.dumps(e)).time
0.25
'''

class ShuttleError(Exception):
    pass

class ConfigError(ShuttleError):
    pass

class UnrecognizedOption(ConfigError):
    pass

class NumericalError(ShuttleError):
    pass

class DomainError(NumericalError, ValueError):
    ''' A value outside the domain where a model or a formula is valid
        (a position outside the working window, a non positive
        duration, an ill-formed transport polynomial...).
        '''
    pass

class CalibrationError(NumericalError):
    pass

class FitError(NumericalError):
    pass

class DegenerateGeometryError(NumericalError):
    pass

class EscapeError(NumericalError):
    ''' The ion left the working window during a propagation.
        The exit time (in us) and position are kept in <time> and <x>.
        '''
    def __init__(self, msg, time=None, x=None):
        NumericalError.__init__(self, msg)
        self.time = time
        self.x = x

class NoWindowError(NumericalError):
    pass

class DivergenceError(NumericalError):
    pass

class GridTooSmallError(NumericalError):
    pass

class PropagationError(NumericalError):
    pass

class NoMinimumError(NumericalError):
    pass

class GuessTooPoorError(NumericalError):
    pass

class ScanError(NumericalError):
    pass
