import collections.abc, argparse, pprint, json

from .errors import ConfigError, UnrecognizedOption

class Options(collections.abc.MutableMapping):
    r'''
    The configuration of a run comes from several places; ``Options``
    keeps them as a stack of dictionaries.

    ``Options`` behaves as a normal dictionary

        >>> from ionshuttle.options import Options
        >>> opt = Options()

        >>> opt['u_max'] = 10.0
        >>> opt['u_max']
        10.0

        >>> opt['T']
        Traceback (most recent call last):
        <...>
        KeyError: 'T'

        >>> len(opt)
        1

        >>> del opt['u_max']
        >>> len(opt)
        0

    but one can push a new dictionary on the top of the stack where new
    keys can be set while the dictionaries below are kept intact.
    A lookup starts from the top through all the stack until the key
    is found.

        >>> opt['u_max'] = 10.0
        >>> opt.up()
        >>> opt['T'] = 0.3

        >>> opt['u_max'], opt['T']
        (10.0, 0.3)

        >>> sorted(list(opt))
        ['T', 'u_max']

        >>> del opt['u_max'] # only the top most dictionary is mutable
        Traceback (most recent call last):
        <...>
        KeyError: 'u_max'

        >>> opt['u_max'] = 40.0 # this only hides the key of the dict below
        >>> opt['u_max']
        40.0

        >>> opt.down()
        >>> opt['u_max']
        10.0

        >>> 'T' in opt
        False

    Multiple levels are allowed, and argparse.Namespace objects too:

        >>> opt = Options({'u_max': 10.0})
        >>> opt.up({'u_max': 20.0, 'T': 0.3})
        >>> from argparse import Namespace
        >>> opt.up(Namespace(T=0.25))
        >>> opt
        {'T': 0.25, 'u_max': 20.0}

        >>> opt.down()
        >>> opt.down()
        >>> opt
        {'u_max': 10.0}

        >>> opt.down()
        Traceback (most recent call last):
        <...>
        IndexError: list index out of range

    A missing key can get a default value from a mask layer:

        >>> opt.mask_default(None)
        >>> opt['u_max'], opt['table']
        (10.0, None)

        >>> opt.unmask_default()
        >>> opt['table']
        Traceback (most recent call last):
        <...>
        KeyError: 'table'
    '''

    def __init__(self, *args, **kwargs):
        self.top = dict()
        self.stack = [self.top] # [top, ...., bottom]

        self.update(dict(*args, **kwargs))
        self.default_values = []

    def __getitem__(self, key):
        for d in self.stack:
            if key in d:
                return d[key]

        if self.default_values:
            return self.default_values[-1]

        raise KeyError(key)

    def __setitem__(self, key, value):
        self.top[key] = value

    def __delitem__(self, key):
        del self.top[key]

    def __iter__(self):
        return iter(self.as_dict())

    def __len__(self):
        return len(self.as_dict())

    def __repr__(self):
        return pprint.pformat(self.as_dict())

    def up(self, other_mapping=None):
        if isinstance(other_mapping, Options):
            other_mapping = other_mapping.as_dict()

        elif isinstance(other_mapping, argparse.Namespace):
            other_mapping = vars(other_mapping).copy()

        elif other_mapping is not None:
            other_mapping = dict(other_mapping)

        self.top = other_mapping if other_mapping is not None else {}
        self.stack.insert(0, self.top)

    def down(self):
        del self.stack[0]
        self.top = self.stack[0]

    def mask_default(self, val):
        self.default_values.append(val)

    def unmask_default(self):
        self.default_values.pop()

    def as_dict(self):
        r'''
        Return a copy of this Options in form of a dictionary.

            >>> from ionshuttle.options import Options
            >>> opt = Options()
            >>> opt.as_dict()
            {}

            >>> opt.up({'T': 0.3, 'u_max': 10.0})
            >>> opt.up({})
            >>> opt.up({'T': 0.25, 'seed': 1})
            >>> opt.as_dict()
            {'T': 0.25, 'seed': 1, 'u_max': 10.0}
        '''
        collapsed = {}
        for d in reversed(self.stack):
            collapsed.update(d)

        return collapsed

    def copy(self):
        r'''
        Return a copy that does not share the top most dictionary:

            >>> from ionshuttle.options import Options
            >>> opt = Options({'T': 0.3})
            >>> opt.copy()['T'] = 1.0
            >>> opt
            {'T': 0.3}
        '''
        cpy = Options()
        cpy.stack = [d.copy() for d in self.stack]
        cpy.top = cpy.stack[0]
        cpy.default_values = list(self.default_values)
        return cpy

SCHEMA_VERSION = 1

# Package defaults: the lowest layer of the stack. Every key that a
# config file or a flag may set must be listed here.
DEFAULTS = {
        # trap
        'backend': 'surrogate',
        'table': None,
        'degree': 24,
        'mass': 40.0,
        'frequency_mhz': 1.3,
        'd': 280.0,
        'x1': 0.0,
        'width': 240.0,
        'height': 295.0,
        'harmonic_bias': -7.0,

        # transport
        'T': 0.3,
        'u_max': 10.0,
        'n_samples': 2000,
        'coefficients': [10.0, -15.0, 6.0],
        'mode': 'rk4',

        # quantum grid
        'grid_points': 128,
        'grid_width_sigmas': 16.0,
        'tolerance': 1e-12,

        # optimization
        'method': 'guess',
        'lambda_a': 'auto',
        'max_iterations': 500,
        'target': None,
        'seed': 0,

        # scans and recipes
        'threshold': 0.1,
        'u_maxes': [10.0, 20.0, 40.0, 80.0],
        'scan_bracket': [0.02, 1.0],
        'scan_resolution': 1e-3,
        'durations': [0.2, 0.25, 0.3, 0.35, 0.4],
        'xis': [0.01, 0.02, 0.05],
        'lambdas': [0.5, 1.0, 2.0],
        'study_iterations': 100,
        }

def load_config(path):
    r'''
    Load the JSON config file at <path>. It must be an object with
    ``"schema_version": 1`` and only keys known by ionshuttle.

    Return a dictionary without the schema_version key.

        >>> from ionshuttle.options import load_config
        >>> import json, tempfile, os
        >>> folder = tempfile.mkdtemp()
        >>> path = os.path.join(folder, 'task.json')

        >>> _ = open(path, 'w').write(json.dumps({'schema_version': 1, 'T': 0.25}))
        >>> load_config(path)
        {'T': 0.25}

        >>> _ = open(path, 'w').write(json.dumps({'schema_version': 1, 'Tmax': 0.25}))
        >>> load_config(path)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.UnrecognizedOption: Unknown key 'Tmax' in config file '<...>task.json'.

        >>> _ = open(path, 'w').write(json.dumps({'T': 0.25}))
        >>> load_config(path)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.ConfigError: The config file '<...>task.json' has schema_version None but only 1 is supported.
    '''
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except (IOError, OSError) as e:
        raise ConfigError("The config file '%s' could not be read: %s" % (path, e))
    except ValueError as e:
        raise ConfigError("The config file '%s' is not valid JSON: %s" % (path, e))

    if not isinstance(data, dict):
        raise ConfigError("The config file '%s' must hold a JSON object." % path)

    version = data.pop('schema_version', None)
    if version != SCHEMA_VERSION:
        raise ConfigError("The config file '%s' has schema_version %r but only %i is supported." % (
                                path, version, SCHEMA_VERSION))

    for key in sorted(data):
        if key not in DEFAULTS:
            raise UnrecognizedOption("Unknown key '%s' in config file '%s'." % (key, path))

    return data

def resolve_options(config_path=None, flags=None):
    r'''
    Stack the package defaults, the config file (if any) and the
    <flags> (a dictionary or an argparse.Namespace with only the flags
    that were given). Later layers win.

        >>> from ionshuttle.options import resolve_options
        >>> from argparse import Namespace
        >>> options = resolve_options(flags=Namespace(u_max=40.0))
        >>> options['u_max'], options['backend']
        (40.0, 'surrogate')

    Flags that are not options of a task are ignored:

        >>> options = resolve_options(flags={'verbosity': 2, 'T': 0.5})
        >>> 'verbosity' in options, options['T']
        (False, 0.5)
    '''
    options = Options(DEFAULTS)
    if config_path is not None:
        options.up(load_config(config_path))

    if flags is not None:
        if isinstance(flags, argparse.Namespace):
            flags = vars(flags)
        options.up({k: v for k, v in flags.items() if k in DEFAULTS and v is not None})

    return options
