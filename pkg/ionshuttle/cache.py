import appdirs
import os
import json
import contextlib
import fcntl
import errno
import pickle

from . import __version__

@contextlib.contextmanager
def flock(file, shared=False):
    fcntl.lockf(file.fileno(), fcntl.LOCK_SH if shared else fcntl.LOCK_EX)
    try:
        yield
    finally:
        fcntl.lockf(file.fileno(), fcntl.LOCK_UN)

def create_file_new_or_fail(name):
    # 'x' means create a new file or fail
    return open(name, 'xb')

def cache_key(kind, config, point):
    r'''
    A stable key for the result of <kind> computed with the resolved
    <config> (a dictionary) at <point>.

        >>> from ionshuttle.cache import cache_key
        >>> cache_key('tmin', {'u_max': 10.0, 'T': 0.3}, 40.0)
        'tmin:{"T": 0.3, "u_max": 10.0}:40.0'
    '''
    return "%s:%s:%s" % (kind, json.dumps(config, sort_keys=True), json.dumps(point))

class ResultCache(object):
    r'''
    On disk cache of expensive scan points (a minimum time for a given
    u_max for example) keyed by the resolved configuration.

    A cache without filename lives only in memory:

        >>> from ionshuttle.cache import ResultCache
        >>> cache = ResultCache(None)
        >>> calls = []
        >>> def slow(x):
        ...     calls.append(x)
        ...     return x * 2

        >>> cache.get('k1', lambda: slow(21)), cache.get('k1', lambda: slow(21))
        (42, 42)
        >>> calls
        [21]

    A disabled cache computes always:

        >>> cache = ResultCache(None, disabled=True)
        >>> cache.get('k1', lambda: slow(1)), cache.get('k1', lambda: slow(1))
        (2, 2)
        >>> calls
        [21, 1, 1]
    '''
    def __init__(self, filename, disabled=False, cache_verbose=False):
        self.disabled = disabled
        self.verbose = cache_verbose
        if self.disabled:
            return

        if filename:
            self.filename = self._cache_filepath(filename)
            self._cache = self._load_cache_from_disk()
        else:
            self.filename = None
            self._cache = self._new_cache()

        self.clear_stats()
        self._log("Cache '%s': %i entries" % (self.filename, self._nkeys))

    @classmethod
    def from_environment(cls, filename='results'):
        ''' The cache is disabled unless IONSHUTTLE_CACHE_DISABLED=0;
            IONSHUTTLE_CACHE_VERBOSE=1 prints its statistics.
            '''
        disabled = os.getenv('IONSHUTTLE_CACHE_DISABLED', "1") != "0"
        verbose = os.getenv('IONSHUTTLE_CACHE_VERBOSE', "0") != "0"
        return cls(filename, disabled, verbose)

    @contextlib.contextmanager
    def synced(self, label=""):
        ''' Clear the cache's stats on enter and sync the cache
            on exit.
            '''
        if self.disabled:
            yield self
            return

        self.clear_stats()
        try:
            yield self
        finally:
            self._sync(label)

    def clear_stats(self):
        self._nkeys, self._hits = len(self._cache), 0

    @classmethod
    def _cache_filepath(cls, filename):
        ''' Create a valid file path based on <filename> under the user's
            cache directory, one per ionshuttle version.

            >>> from ionshuttle.cache import ResultCache
            >>> ResultCache._cache_filepath('foo/bar/results')
            '<user-cache-dir>/ionshuttle/<version>/results'

            Note: this function *will* create any directory needed.
        '''
        dir = appdirs.user_cache_dir(appname='ionshuttle', version=__version__)
        os.makedirs(dir, exist_ok=True)

        filename = os.path.basename(filename)
        return os.path.join(dir, filename)

    def _log(self, msg):
        if self.verbose:
            print(msg)

    def _load_cache_from_disk(self):
        ''' Load the cache from disk, create an empty one if the
            cache doesn't exist.
            '''
        try:
            with open(self.filename, 'rb') as f, flock(f, shared=True):
                return self._read_cache_or_empty(f)
        except FileNotFoundError:
            return self._create_empty_cache_in_disk()

    def _read_cache_or_empty(self, file):
        ''' Read the cache from an open <file>; an unreadable one is
            taken as empty. The caller holds the lock.
            '''
        try:
            return pickle.loads(file.read())
        except Exception:
            self._log("Warning. Cache file '%s' corrupted." % self.filename)
            return self._new_cache()

    def _new_cache(self):
        return {}

    def _create_empty_cache_in_disk(self):
        cache = self._new_cache()
        try:
            self._log("Cache file '%s' does not exist. Creating a new one..." % self.filename)
            with create_file_new_or_fail(self.filename) as f, flock(f):
                pickle.dump(cache, f)
        except OSError as e:
            if e.errno != errno.EEXIST:
                raise

        return cache

    def _sync(self, label=""):
        misses = len(self._cache) - self._nkeys
        nohits = self._nkeys - self._hits

        self._log("[%s] Cache stats: %i entries %i hits %i misses %i nohits." \
                    % (label, len(self._cache), self._hits, misses, nohits))
        if misses and self.filename is not None:
            self._log("[%s] Cache require sync." % label)
            with open(self.filename, 'rb+') as f, flock(f):
                # another process may have added entries meanwhile
                cache = self._read_cache_or_empty(f)
                cache.update(self._cache)

                f.seek(0, 0)
                pickle.dump(cache, f)
                f.truncate()

            self._cache = cache
            self.clear_stats()

    def get(self, key, compute):
        ''' Return the result cached under <key> or call <compute> and
            remember what it returns. Failures are not cached.
            '''
        if self.disabled:
            return compute()

        try:
            result = self._cache[key]
            self._hits += 1
        except KeyError:
            result = compute()
            self._cache[key] = result

        return result
