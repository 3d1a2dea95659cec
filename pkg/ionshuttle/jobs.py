from multiprocessing import Queue, Process
import signal, contextlib

class Status:
    ok = 0
    aborted = 1
    config_error = 2
    numerical_error = 3

    @staticmethod
    def of(exc):
        ''' The exit status that corresponds to the exception <exc>
            (None means that nothing failed).

            >>> from ionshuttle.jobs import Status
            >>> from ionshuttle.errors import FitError, UnrecognizedOption
            >>> Status.of(None), Status.of(UnrecognizedOption("x"))
            (0, 2)

            >>> Status.of(FitError("x")), Status.of(KeyboardInterrupt())
            (3, 1)
            '''
        from .errors import ConfigError
        if exc is None:
            return Status.ok
        if isinstance(exc, ConfigError):
            return Status.config_error
        if isinstance(exc, (KeyboardInterrupt, SystemExit)):
            return Status.aborted
        return Status.numerical_error

def worker(func, sigint_handler, input, output):
    ''' Generic worker: call <func> for each (index, item) pulled from
        the <input> queue until a None gets pulled.

        For each call, push (index, ok, result) into the <output> queue
        where <result> is the exception raised if <ok> is False.

        After receiving a None, close the <output> queue.
        '''
    for index, item in iter(input.get, None):
        try:
            with allow_sigint(sigint_handler):
                result = (index, True, func(item))
        except BaseException as e:
            result = (index, False, e)
        output.put(result)
    output.close()
    output.join_thread()

class Jobs(object):
    r'''
    Run a function over a list of items, in <njobs> background
    processes or, with a single job, right here.

        >>> from ionshuttle.jobs import Jobs
        >>> Jobs(1, 0).map(abs, [-2, 3, -1])
        [2, 3, 1]

    The callback sees every result as soon as it is ready:

        >>> seen = []
        >>> Jobs(1, 0).map(abs, [-2, 3], on_result=lambda i, r: seen.append((i, r)))
        [2, 3]
        >>> seen
        [(-2, 2), (3, 3)]

    The function must be picklable (a module level function or a
    functools.partial of one) when more than one job is used.
    The results always come back in the order of the items:

        >>> Jobs(2, 0).map(abs, [-5, 4, -3, 2, -1])
        [5, 4, 3, 2, 1]

    The first failure stops the feeding of the workers and it is raised
    again here once they are gone:

        >>> Jobs(2, 0).map(int, ["1", "x", "3"])
        Traceback (most recent call last):
        <...>
        ValueError: invalid literal for int() with base 10: 'x'
    '''
    def __init__(self, njobs, verbosity):
        self.njobs = njobs
        self.verbosity = verbosity

    def map(self, func, items, on_result=None):
        items = list(items)
        if self.njobs <= 1 or len(items) <= 1:
            return self._map_here(func, items, on_result)

        rest = self.spawn_jobs(func, items)
        try:
            return self.loop(items, rest, on_result)
        finally:
            signal.signal(signal.SIGINT, self.sigint_handler)

    def _map_here(self, func, items, on_result):
        results = []
        for item in items:
            result = func(item)
            if on_result is not None:
                on_result(item, result)
            results.append(result)
        return results

    def spawn_jobs(self, func, items):
        ''' Spawn the jobs (no more than items) and feed them with the
            first items. Return the rest of the (index, item) pairs
            not sent yet.
            '''
        njobs = min(self.njobs, len(items))
        self.sigint_handler = self.ignore_sigint()

        self.input = Queue()
        self.output = Queue()

        self.processes = [Process(target=worker, name=str(n),
                                  args=(func, self.sigint_handler, self.input, self.output))
                          for n in range(njobs)]
        for p in self.processes:
            p.start()

        pairs = list(enumerate(items))
        for pair in pairs[:njobs]:
            self.input.put(pair)

        if self.verbosity >= 2:
            for p in self.processes:
                print("Worker %s (PID %i)." % (p.name, p.pid))

        return pairs[njobs:]

    def ignore_sigint(self):
        return signal.signal(signal.SIGINT, signal.SIG_IGN)

    def stop_workers(self):
        for _ in self.processes:
            self.input.put(None)
        self.input.close()

    def join_jobs(self):
        ''' Call me after sending the sentinels (stop_workers)
            and fetching all the results (loop) to avoid a deadlock.'''
        self.input.join_thread()
        for p in self.processes:
            p.join()

    def loop(self, items, rest, on_result):
        ''' Collect one result per item sent, feeding the workers with
            the <rest> meanwhile. On the first failure nothing else is
            sent; the results already in flight are drained and the
            failure is raised after joining the workers.
            '''
        results = [None] * len(items)
        pending = len(items) - len(rest)
        failure = None
        end_sentinels_sent = False

        while pending:
            index, ok, result = self.output.get()
            pending -= 1

            if not ok:
                if failure is None:
                    failure = result
                rest = []
            else:
                results[index] = result
                if on_result is not None and failure is None:
                    on_result(items[index], result)

            if rest:
                self.input.put(rest.pop(0))
                pending += 1

            if not rest and not end_sentinels_sent:
                end_sentinels_sent = True
                self.stop_workers()

        self.join_jobs()
        if failure is not None:
            raise failure
        return results

@contextlib.contextmanager
def allow_sigint(handler):
    try:
        signal.signal(signal.SIGINT, handler)
        yield
    finally:
        signal.signal(signal.SIGINT, signal.SIG_IGN)
