import time, multiprocessing
from ionshuttle.common import colored, tohuman
from ionshuttle.concern import Concern

try:
    from tqdm import tqdm
    progress_bar_available = True
except ImportError:
    progress_bar_available = False

stability = 'provisional'

class _DummyLock(object):
    def __enter__(self):
        return
    def __exit__(self, *args):
        pass

    def acquire(self, *args, **kargs):
        pass

    def release(self, *args, **kargs):
        pass

def _elapsed(begin):
    elapsed = max(time.time() - begin, 0)
    if elapsed < 300:
        return "%0.2f seconds" % elapsed
    elif elapsed < 3600:
        return "%i minutes, %i seconds" % (elapsed / 60, elapsed % 60)
    else:
        return "%i hours, %i minutes" % (elapsed / 3600, (elapsed % 3600) / 60)

class SimpleReporter(Concern):
    r'''
    Print one line per optimizer iteration and per scan point.

        >>> import io
        >>> from ionshuttle.modules.progress import SimpleReporter
        >>> out = io.StringIO()
        >>> r = SimpleReporter(verbosity=0, jobs=1, output=out, use_colors=False)
        >>> r.iteration('classical', {'iteration': 3, 'J_T': 0.25, 'lambda_a': 2e3,
        ...                           'max_du': 0.01, 'energy': 0.5, 'accepted': False})
        >>> print(out.getvalue(), end='')
        [classical] iteration 3: J_T=0.25 energy=0.5 max|dU|=0.01 V lambda_a=2000 (rejected)
    '''
    target = None # progress

    def __init__(self, verbosity, jobs, **unused):
        if unused.get('use_progress_bar') and progress_bar_available:
            self.target = None # disable ourselves
        else:
            self.target = 'progress'

        self.output = unused['output']
        self.use_colors = unused.get('use_colors', False)
        self.verbosity = verbosity

        self.jobs = jobs
        if self.jobs != 1:
            self.write_lock = multiprocessing.RLock()
        else:
            self.write_lock = _DummyLock()

        self.begin = time.time()

    def _write(self, msg):
        ''' Call me once and just once per concern's method '''
        with self.write_lock:
            self.output.write(msg)
            self.output.flush()

    def _update(self, x):
        pass

    def start(self, command, options):
        self.command = command
        self.begin = time.time()

    def finish(self, command, status):
        if status == 0:
            status_str = colored("[DONE]", 'green', self.use_colors)
        else:
            status_str = colored("[FAIL]", 'red', self.use_colors)

        self._write("%s %s in %s\n" % (status_str, tohuman(command), _elapsed(self.begin)))

    def start_optimization(self, kind, config):
        self.optimization_begin = time.time()

    def iteration(self, kind, entry):
        self._update(1)
        merit = 'fidelity=%.8g' % entry['fidelity'] if 'fidelity' in entry else 'energy=%.6g' % entry['energy']
        state = '' if entry['accepted'] else ' (rejected)'
        self._write("[%s] iteration %i: J_T=%.6g %s max|dU|=%.3g V lambda_a=%.4g%s\n" % (
                        kind, entry['iteration'], entry['J_T'], merit, entry['max_du'],
                        entry['lambda_a'], state))

    def finish_optimization(self, kind, report):
        if report.converged:
            status_str = colored("converged", 'green', self.use_colors)
        else:
            status_str = colored("not converged", 'yellow', self.use_colors)

        self._write("[%s] %s after %i iterations, J_T=%.6g (%s)\n" % (
                        kind, status_str, report.iterations, report.final['J_T'],
                        _elapsed(self.optimization_begin)))

    def start_scan(self, name, points):
        self.npoints = len(points)
        self.ndone = 0

    def scan_point(self, name, point, result):
        self._update(1)
        self.ndone += 1
        self._write("[%s] %i/%i: %s -> %s\n" % (name, self.ndone, self.npoints,
                                                _fmt(point), _fmt(result)))

    def event(self, what, **data):
        if what == 'log':
            level = data['level']
            if level == 'error':
                hdr = colored("Err:", 'red', self.use_colors)
            elif level == 'chat':
                if self.verbosity < 1:
                    return
                hdr = colored("Chat:", 'cyan', self.use_colors)
            elif level == 'warn':
                hdr = colored("Warn:", 'yellow', self.use_colors)
            else:
                return

            msg = "%s %s\n" % (hdr, data['msg'])
            self._write(msg)

def _fmt(value):
    if isinstance(value, float):
        return '%.6g' % value
    if isinstance(value, (list, tuple)):
        return '(%s)' % ', '.join(_fmt(v) for v in value)
    return str(value)

class ProgressBarReporter(SimpleReporter):
    target = None # progress

    def __init__(self, verbosity, jobs, **unused):
        SimpleReporter.__init__(self, verbosity, jobs, **unused)
        if not unused.get('use_progress_bar') or not progress_bar_available:
            self.target = None # disable ourselves
        else:
            self.target = 'progress'

        self.bar = None

    def _write(self, msg):
        with self.write_lock:
            if self.bar is None:
                SimpleReporter._write(self, msg)
            else:
                self.bar.write(msg, file=self.output, end="")
                self.output.flush()

    def _update(self, x):
        if self.bar is not None:
            self.bar.update(x)

    def _open(self, desc, total):
        bar_format = '{desc} |{bar}| [{n_fmt}/{total_fmt}{postfix}]'
        self.bar = tqdm(total=total, file=self.output, desc=desc, leave=False,
                        bar_format=bar_format,
                        disable=None # means disable if the output is not TTY
                        )
        self.bar.set_lock(self.write_lock)

    def _close(self):
        if self.bar is not None:
            self.bar.close()
            self.bar = None

    def start_optimization(self, kind, config):
        SimpleReporter.start_optimization(self, kind, config)
        self._close()
        self._open(tohuman(kind), config.max_iterations + 1)

    def iteration(self, kind, entry):
        # the bar replaces the per iteration lines
        self._update(1)
        self.bar.set_postfix_str('J_T=%.4g' % entry['J_T'])

    def finish_optimization(self, kind, report):
        self._close()
        SimpleReporter.finish_optimization(self, kind, report)

    def start_scan(self, name, points):
        SimpleReporter.start_scan(self, name, points)
        self._close()
        self._open(tohuman(name), len(points))

    def scan_point(self, name, point, result):
        self._update(1)
        self.ndone += 1
        self.bar.set_postfix_str(_fmt(point))

    def finish_scan(self, name):
        self._close()
