# byexample plugin (load it with -m test/) that measures the coverage
# of ionshuttle inside byexample's python interpreter.
from byexample.concern import Concern

_START = r'''
from coverage import Coverage as _ionshuttle_cov_class
_ionshuttle_cov = _ionshuttle_cov_class(source=['ionshuttle'], data_suffix=True,
                                        concurrency='multiprocessing')
_ionshuttle_cov.start()
'''

_STOP = r'''
_ionshuttle_cov.stop()
_ionshuttle_cov.save()
'''

def _python_runner(runners):
    for runner in runners:
        if runner.language == 'python':
            return runner
    return None

class IonshuttleCoverage(Concern):
    target = 'ionshuttle-coverage'

    def __init__(self, **unused):
        self.runner = None

    def start(self, examples, runners, filepath, options):
        self.options = options
        self.runner = _python_runner(runners)
        if self.runner is not None:
            self.runner._exec_and_wait(_START, options, timeout=10)

    def finish(self, *args):
        if self.runner is not None:
            self.runner._exec_and_wait(_STOP, self.options, timeout=10)
            self.runner = None
