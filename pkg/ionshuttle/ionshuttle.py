from .cache import ResultCache
from .jobs import Jobs, Status
import sys

def main(args=None):
    from .cmdline import parse_args
    from .common import human_exceptions, tohuman
    from .init import init
    from .commands import Context, run

    args = parse_args(args)
    human_args = [args.verbosity, args.quiet]

    with human_exceptions('During the initialization phase:', *human_args) as exc:
        task, options, concerns = init(args)

    if exc:
        sys.exit(Status.of(exc['exc']))

    import numpy as np
    np.random.seed(task.seed)

    cache = ResultCache.from_environment()
    jobs = Jobs(args.jobs, args.verbosity)
    ctx = Context(args.out, jobs, cache, concerns, args.verbosity)

    concerns.start(args.command, options)
    with human_exceptions("%s:" % tohuman(args.command), *human_args) as exc, \
            cache.synced(label=args.command):
        run(args.command, task, args, ctx)

    status = Status.of(exc.get('exc'))
    concerns.finish(args.command, status)
    return status

if __name__ == '__main__':
    sys.exit(main())
