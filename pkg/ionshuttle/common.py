import traceback, contextlib, json

'''
>>> from ionshuttle.common import tohuman
'''

def log(msg, lvl, concerns=None):
    ''' Print <msg> if <lvl> is a non negative integer. The callers pass
        their verbosity minus something so more -v flags reveal more.

        If <lvl> is a string ('warn', 'chat', 'error'), the message
        is handed to the <concerns> instead.
        '''
    if isinstance(lvl, int):
        if lvl >= 0:
            print(msg)

    elif concerns is not None:
        concerns.event('log', msg=msg, level=lvl)

_ANSI = {'green': 32, 'red': 31, 'yellow': 33, 'cyan': 36}
def colored(s, color, use_colors):
    return "\033[%sm%s\033[0m" % (_ANSI[color], s) if use_colors else s

def tohuman(s):
    ''' Title-case a command, a recipe or a method name.

        >>> tohuman("classical-oct")
        'Classical Oct'

        >>> tohuman("tmin_scan")
        'Tmin Scan'

        >>> tohuman(["guess", "iea"])
        'Guess, Iea'

    Anything else is named after its class:

        >>> tohuman(tohuman)
        'Function*'
    '''
    if isinstance(s, set):
        s = sorted(s)
    if isinstance(s, (list, tuple)):
        s = ', '.join(s)
    elif not isinstance(s, str):
        s = s.__class__.__name__ + "*"

    return ' '.join(w.capitalize() for w in s.replace("-", " ").replace("_", " ").split())

def constant(method):
    ''' Cache the result of an argumentless <method> in the instance,
        which must not change after the first call.
        '''
    slot = '_cached_%s' % method.__name__
    def cached(self):
        if slot not in self.__dict__:
            self.__dict__[slot] = method(self)
        return self.__dict__[slot]

    cached.__doc__ = method.__doc__
    cached.__name__ = method.__name__
    return cached


@contextlib.contextmanager
def human_exceptions(where_default, verbosity, quiet):
    ''' Print the exception raised in the block (if any) as a two line
        message: where it happened and what it was. With a positive
        <verbosity> the full traceback is printed instead of the
        message; with <quiet> nothing is.

        The place is the 'where' attribute of the exception (see
        enhance_exceptions) or <where_default>.

        The yielded dict gets the exception under 'exc'. A SystemExit
        is recorded but never printed.

        >>> from ionshuttle.errors import DomainError
        >>> with human_exceptions("Guess at T=0.3:", 0, False) as exc:
        ...     raise DomainError("x=500 um is outside the working window")
        Guess at T=0.3:
        DomainError: x=500 um is outside the working window
        <...>
        Rerun with -v to get a full stack trace.

        >>> exc['exc'].__class__.__name__
        'DomainError'
    '''
    caught = {}
    try:
        yield caught
    except SystemExit as e:
        caught['exc'] = e
    except KeyboardInterrupt as e:
        caught['exc'] = e
        if not quiet:
            print('Execution aborted by the user.')
    except BaseException as e:
        caught['exc'] = e
        if not quiet:
            if verbosity >= 1:
                msg = traceback.format_exc()
            else:
                msg = "%s\n\nRerun with -v to get a full stack trace." % e

            print("%s\n%s: %s" % (getattr(e, 'where', where_default), e.__class__.__name__, msg))

@contextlib.contextmanager
def enhance_exceptions(where, owner):
    ''' Tag the exceptions that go through with the place where they
        happened, unless an inner block already did.

        >>> from ionshuttle.common import enhance_exceptions
        >>> try:
        ...     with enhance_exceptions("Recipe fig4", "w/fig4"):
        ...         with enhance_exceptions("Scan point u_max=10 V", "tmin-classical"):
        ...             raise ValueError("no convergence")
        ... except ValueError as e:
        ...     print(e.where)
        Scan point u_max=10 V, [tmin-classical]
        '''
    try:
        yield
    except BaseException as e:
        if not hasattr(e, 'where'):
            e.where = "%s, [%s]" % (where, owner) if owner else str(where)
        raise

def dump_json(obj, path):
    ''' Write <obj> as a stable (sorted, indented) JSON document. '''
    with open(path, 'w') as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write('\n')
