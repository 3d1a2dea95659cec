from .common import tohuman

class Concern(object):
    '''
    Cross-cutting Concern interface.

    Set of methods that will be called through the different stages
    of the execution of ``ionshuttle``.
    Each method (also known as 'hook') will allow you to read the current
    state of a computation but not to change it.

    Use this mechanism to implement the following (but not limited to):
     - show the progress of an optimization or of a scan
     - keep a log of the iterations for a later analysis
     - turn on/off profile facilities

    Roughly this is the order in which the hooks are called:
     - start
         - start_scan
             - start_optimization
                 - iteration
             - finish_optimization
             - scan_point
         - finish_scan
     - finish

    The computations can be used without any concern: then a plain
    ``Concern()`` that does nothing takes its place.

        >>> from ionshuttle.concern import Concern
        >>> Concern().iteration('classical', {'iteration': 0})
    '''

    target = None

    def __init__(self, **kargs):
        '''
        Called once when the concern is loaded.
        '''
        pass

    def __repr__(self):
        return '%s Concern' % tohuman(self.target if self.target else self)

    def start(self, command, options):
        '''
        Called before running the given command (a string like
        'optimize-classical') with the resolved options.
        '''
        pass    # pragma: no cover

    def finish(self, command, status):
        '''
        Called after the command finished with the given exit status
        (see jobs.Status).
        '''
        pass    # pragma: no cover

    def start_optimization(self, kind, config):
        '''
        An optimization ('classical' or 'quantum') is about to start
        with the given OptimizationConfig.
        '''
        pass    # pragma: no cover

    def iteration(self, kind, entry):
        '''
        Called once per iteration, including the iteration 0 (the
        guess) and the rejected ones.

        The entry is a dictionary with the keys iteration, J, J_T,
        energy (classical) or fidelity (quantum), max_du, lambda_a and
        accepted.
        '''
        pass    # pragma: no cover

    def finish_optimization(self, kind, report):
        '''
        The optimization finished; the report holds the whole history.
        '''
        pass    # pragma: no cover

    def start_scan(self, name, points):
        '''
        A scan over <points> (a list of parameter values) is about to
        start.
        '''
        pass    # pragma: no cover

    def scan_point(self, name, point, result):
        '''
        One point of the scan is ready.

        With several jobs the points arrive in the order in which
        they finish, not in the order of the scan.
        '''
        pass    # pragma: no cover

    def finish_scan(self, name):
        pass    # pragma: no cover

    def event(self, what, **data):
        '''
        Called on arbitrary moments, for arbitrary reasons defined
        in <what> and optionally in <data>.
        '''
        pass    # pragma: no cover

class ConcernComposite(Concern):
    def __init__(self, registry, **unused):
        self.concerns = registry['concerns'].values()

# Patch ConcernComposite overriding all its methods
# For a given method X, ConcernComposite will call X on all of
# its sub-concerns.
import inspect
def _patch(cls, method_name):
    def for_each_concern_do(self, *args, **kargs):
        for concern in self.concerns:
            getattr(concern, method_name)(*args, **kargs)

    setattr(cls, method_name, for_each_concern_do)

def _patchable(obj):
    return inspect.isfunction(obj) and not obj.__name__.startswith("_")

for method_name, _ in inspect.getmembers(Concern, predicate=_patchable):
    _patch(ConcernComposite, method_name)
