import sys, argparse, os, multiprocessing
from . import __version__, __doc__, _author, _license, _url, _license_disclaimer

class _CSV(argparse.Action):
    r'''Transform an argument of the form 'a,b' into a list
        of floats [a, b]
        '''
    def __call__(self, parser, namespace, values, option_string=None):
        try:
            setattr(namespace, self.dest, [float(v) for v in values.split(',')])
        except ValueError:
            parser.error("argument %s: expected comma separated numbers, not '%s'." % (
                                option_string, values))

class _Print(argparse.Action):
    r'''Print a given message bypassing the formatting rules of
        argparse, then, exit.'''
    def __init__(self, *args, **kargs):
        self.message = kargs.pop('message')
        argparse.Action.__init__(self, *args, **kargs)

    def __call__(self, parser, namespace, values, option_string=None):
        parser.exit(message=self.message)

def _jobs_type(item):
    jobs_str = item.strip()
    ncpus = 1
    if jobs_str.startswith("cpu"):
        try:
            ncpus = multiprocessing.cpu_count()
        except:
            ncpus = 1

        if jobs_str == "cpu":
            jobs_str = "1"
        else:
            jobs_str = jobs_str[3:]

    try:
        jobs_num = int(jobs_str)
        assert jobs_num > 0
    except:
        raise argparse.ArgumentTypeError(
                "Invalid jobs specification '%s'. Use 'cpu', 'cpu<n>' or <n> (a positive number)." % item)

    return jobs_num * ncpus

def _lambda_type(item):
    if item == 'auto':
        return item
    try:
        return float(item)
    except ValueError:
        raise argparse.ArgumentTypeError("Invalid lambda_a '%s'. Use a positive number or 'auto'." % item)

COMMANDS = [
        ('calibrate', "bias of each electrode for the task's trap frequency."),
        ('guess', "initial guess ramp, its classical excitation and stability window."),
        ('simulate-classical', "classical trajectory under the task's ramp (or --ramp)."),
        ('optimize-classical', "Krotov optimization against the classical motion."),
        ('simulate-quantum', "wavepacket propagation under the task's ramp (or --ramp)."),
        ('optimize-quantum', "Krotov optimization against the quantum motion."),
        ('iea', "invariant based inverse engineered ramp and its checks."),
        ('bangbang', "time optimal bang-bang ramp of the harmonic approximation."),
        ('scan-tmin', "minimum transport time against the voltage limit."),
        ('fit', "power law fit T = a U^-b of a minimum time scan."),
        ('reproduce', "run a recipe that regenerates a whole data set."),
        ]

def _add_common_arguments(parser):
    g = parser.add_argument_group("Task Options")
    g.add_argument("-c", "--config", metavar='<file>',
            help="JSON config file (with \"schema_version\": 1); the flags override it.")
    g.add_argument("--backend", choices=['surrogate', 'harmonic', 'tabulated'],
            help="electrode potential model (default: surrogate).")
    g.add_argument("--table", metavar='<csv>',
            help="tabulated electrode potentials with header x_um,phi1,phi2.")
    g.add_argument("--mass", metavar='<amu>', type=float, help="ion mass (default: 40).")
    g.add_argument("--frequency", metavar='<MHz>', type=float, dest='frequency_mhz',
            help="trap frequency (default: 1.3).")
    g.add_argument("-T", "--duration", metavar='<us>', type=float, dest='T',
            help="transport duration.")
    g.add_argument("-u", "--u-max", metavar='<V>', type=float, dest='u_max',
            help="voltage limit (default: 10).")
    g.add_argument("--samples", metavar='<n>', type=int, dest='n_samples',
            help="samples of the voltage ramps (default: 2000).")
    g.add_argument("--grid-points", metavar='<n>', type=int,
            help="points of the wavepacket grid, a power of two (default: 128).")
    g.add_argument("--method", choices=['guess', 'classical-oct', 'quantum-oct', 'iea', 'bangbang'],
            help="how the ramp of the task is made (default: guess).")
    g.add_argument("--lambda", metavar='<l>', type=_lambda_type, dest='lambda_a',
            help="Krotov step weight or 'auto' (default: auto).")
    g.add_argument("--iterations", metavar='<n>', type=int, dest='max_iterations',
            help="iteration budget of the optimizations (default: 500).")
    g.add_argument("--target", metavar='<x>', type=float,
            help="stop an optimization below this energy (phonons) or infidelity.")
    g.add_argument("--mode", choices=['rk4', 'rk45'],
            help="classical integrator (default: rk4).")
    g.add_argument("--threshold", metavar='<phonons>', type=float,
            help="excitation threshold of the stability window (default: 0.1).")
    g.add_argument("--u-maxes", metavar='<V,V,...>', action=_CSV,
            help="voltage limits of the scans.")
    g.add_argument("--xis", metavar='<xi,xi,...>', action=_CSV,
            help="xi values of the convergence study.")
    g.add_argument("--lambdas", metavar='<l,l,...>', action=_CSV,
            help="lambda_a values of the convergence study.")
    g.add_argument("--seed", metavar='<n>', type=int,
            help="seed of numpy's random generator (default: 0).")

    g = parser.add_argument_group("Execution Options")
    g.add_argument("-o", "--out", metavar='<dir>', default='.',
            help="directory for the output files (default: %(default)s).")
    g.add_argument("-j", "--jobs", metavar='<n>', default=1, type=_jobs_type,
            help='run <n> jobs in parallel (%(default)s by default); ' +\
                 '<n> can be an integer or the string "cpu" or "cpu<n>": ' +\
                 '"cpu" means use all the cpus available; ' +\
                 '"cpu<n>" multiply it by <n> the cpus available.')
    g.add_argument("--pretty", choices=['none', 'all'], default='all',
            help="control how to pretty print the output.")
    g.add_argument("-m", "--modules", action='append', metavar='<dir>', dest='modules_dirs',
            default=[os.path.join(os.path.dirname(os.path.abspath(__file__)), 'modules')],
            help='append a directory for searching modules there.')

    g = parser.add_argument_group("Logging")
    mutexg = g.add_mutually_exclusive_group()
    mutexg.add_argument("-v", action='count', dest='verbosity', default=0,
            help="verbosity level, add more flags to increase the level.")
    mutexg.add_argument("-q", "--quiet", action='store_true', default=False,
            help="quiet mode, do not print anything even if a command fails; "
                 "suppress the progress output.")

def _add_command_arguments(name, parser):
    if name in ('simulate-classical', 'simulate-quantum'):
        parser.add_argument("--ramp", metavar='<csv>',
                help="ramp to simulate (header t_us,U1_V,U2_V); by default the task's one.")
    elif name == 'scan-tmin':
        parser.add_argument("--kind", choices=['classical', 'iea', 'iea-push', 'bangbang'],
                default='classical', help="which controls to scan (default: %(default)s).")
    elif name == 'fit':
        parser.add_argument("scan", metavar='<csv>',
                help="a scan with header umax_V,tmin_us.")
    elif name == 'reproduce':
        parser.add_argument("recipe", metavar='<figure>',
                choices=['fig3', 'fig4', 'fig5', 'fig6', 'fig7'],
                help="the data set of one of fig3, fig4, fig5, fig6 or fig7.")

def parse_args(args=None):
    '''Parse the arguments args and return the them.
       If args is None, parse the sys.argv[1:].

       The options of the task are left unset when they are not given
       (argparse.SUPPRESS) so they do not hide the values of the config
       file.
       '''
    python_version = sys.version.split(' ', 1)[0]
    parser = argparse.ArgumentParser(
            prog='ionshuttle',
            fromfile_prefix_chars='@',
            description=__doc__)

    parser.add_argument(
            '-V',
            '--version',
            nargs=0,
            action=_Print,
            message='{prog} {version} (Python {python_version}) - {license}\n\n{doc}'
                    '\n\n{license_disclaimer}'.format(
                                prog=parser.prog,
                                doc=__doc__,
                                version=__version__,
                                python_version=python_version,
                                license=_license,
                                license_disclaimer=_license_disclaimer.format(
                                        author=_author,
                                        url=_url)),
            help='show %(prog)s\'s version and license, then exit')

    subparsers = parser.add_subparsers(dest='command', metavar='<command>')
    subparsers.required = True
    for name, help in COMMANDS:
        sub = subparsers.add_parser(name, help=help, description=help,
                                    argument_default=argparse.SUPPRESS)
        _add_common_arguments(sub)
        _add_command_arguments(name, sub)

    namespace = parser.parse_args(args)

    # Some extra checks
    # -----------------
    config = getattr(namespace, 'config', None)
    if config is not None and not os.path.exists(config):
        parser.error("argument --config: the file '%s' does not exist." % config)

    namespace.config = config
    return namespace
