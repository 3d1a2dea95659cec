'''
The subcommands of the command line. Each one takes the resolved
task, the parsed arguments and a Context, writes its files into the
output directory (always with a config.json) and prints a short
summary.
'''

import os
import numpy as np

from .analytic import iea_ramp, iea_tmin_scan
from .classical import (propagate_classical, final_energy, excitation_family,
                        stability_window, local_minimum)
from .common import log, dump_json
from .errors import NoWindowError
from .experiments import (calibrate, design_ramp, bangbang_solution, scan_tmin_classical,
                          save_tmin_scan, load_tmin_scan, fit_power_law, squeezing_amplitude,
                          reproduce, write_config)
from .quantum import ground_state, propagate_quantum
from .quantum_oct import force_inhomogeneity
from .ramps import VoltageRamp
from .units import phonons

class Context(object):
    def __init__(self, out, jobs, cache, concerns, verbosity):
        self.out = out
        self.jobs = jobs
        self.cache = cache
        self.concerns = concerns
        self.verbosity = verbosity

    def path(self, name):
        return os.path.join(self.out, name)

def _ramp_of(task, args, ctx):
    path = getattr(args, 'ramp', None)
    if path is not None:
        return VoltageRamp.load(path, task.u_max)

    ramp, _ = design_ramp(task, concerns=ctx.concerns)
    return ramp

def cmd_calibrate(task, args, ctx):
    biases = calibrate(task)
    for i, u in enumerate(biases):
        print("U%i = %.9f V" % (i + 1, u))
    dump_json({'biases_V': biases}, ctx.path('calibration.json'))

def cmd_guess(task, args, ctx):
    model = task.build_model()
    ramp, _ = design_ramp(task, 'guess')
    ramp.save(ctx.path('ramp.csv'))

    family = excitation_family(model, ramp, task.omega, task.x2, task.x1_scaled, mode=task.mode)
    excitation = family(task.T)
    best_T, best = local_minimum(family, task.T, 0.1 * task.T)

    summary = {'max_voltage_V': ramp.max_voltage(), 'excitation_phonons': excitation,
               'local_minimum_us': best_T, 'local_minimum_phonons': best}
    try:
        summary['stability_window_us'] = stability_window(family, task.threshold, best_T,
                                                          limit=0.1 * best_T)
    except NoWindowError as e:
        log(str(e), 'warn', ctx.concerns)

    print("Guess: max |U| = %.4f V, final excitation %.6g phonons" % (
                ramp.max_voltage(), excitation))
    print("Nearest excitation minimum: T = %.4f us (%.3g phonons)" % (best_T, best))
    if 'stability_window_us' in summary:
        print("Stability window below %g phonons: %.4f us" % (task.threshold, summary['stability_window_us']))
    dump_json(summary, ctx.path('summary.json'))

def cmd_simulate_classical(task, args, ctx):
    model = task.build_model()
    ramp = _ramp_of(task, args, ctx)
    traj = propagate_classical(model, ramp, task.x1_scaled, 0.0, task.mode)
    traj.save(ctx.path('trajectory.csv'))

    energy = phonons(final_energy(traj, model, task.omega, task.x2), task.omega)
    print("Final excitation: %.6g phonons" % energy)
    dump_json({'excitation_phonons': energy}, ctx.path('summary.json'))

def cmd_optimize_classical(task, args, ctx):
    model = task.build_model()
    ramp, report = design_ramp(task, 'classical-oct', ctx.concerns)
    ramp.save(ctx.path('ramp.csv'))
    report.dump(ctx.path('report.json'))
    propagate_classical(model, ramp, task.x1_scaled, 0.0, task.mode).save(ctx.path('trajectory.csv'))

    print("Final excitation: %.6g phonons after %i iterations (%s)" % (
                report.final['energy'], report.iterations,
                'converged' if report.converged else 'not converged'))
    print("Symmetry defect: %.4g V" % ramp.symmetry_defect())

def cmd_simulate_quantum(task, args, ctx):
    model = task.build_model()
    ramp = _ramp_of(task, args, ctx)
    psi0 = ground_state(model, ramp.values[0], task.x1_scaled, task.grid(), task.tolerance)
    traj = propagate_quantum(model, ramp, psi0, tolerance=task.tolerance, omega=task.omega)
    traj.save(ctx.path('quantum.csv'))

    excitation = float(traj.series('excitation')[-1])
    breathing = squeezing_amplitude(traj)
    print("Final excitation: %.6g phonons" % excitation)
    print("Breathing of the momentum spread: %.3g" % breathing)
    dump_json({'excitation_phonons': excitation, 'squeezing_amplitude': breathing},
              ctx.path('summary.json'))

def cmd_optimize_quantum(task, args, ctx):
    ramp, report = design_ramp(task, 'quantum-oct', ctx.concerns)
    ramp.save(ctx.path('ramp.csv'))
    report.dump(ctx.path('report.json'))

    print("Final fidelity: %.10f after %i iterations (%s)" % (
                report.final['fidelity'], report.iterations,
                'converged' if report.converged else 'not converged'))

def cmd_iea(task, args, ctx):
    model = task.build_model()
    tf = task.transport_function()
    iea = iea_ramp(model, tf, task.omega, task.n_samples, task.u_max)
    iea.total.save(ctx.path('ramp.csv'))

    force_error, curvature_error = iea.verify()
    inhomogeneity = force_inhomogeneity(model, iea, tf, task.sigma0)
    print("IEA ramp: max |U| = %.4f V (limit %g V)" % (iea.max_voltage, task.u_max))
    print("Relative errors: force %.3g, curvature %.3g" % (force_error, curvature_error))
    print("Force inhomogeneity across the wavepacket: %.3g" % inhomogeneity)
    if iea.max_voltage > task.u_max:
        log("The IEA ramp exceeds the voltage limit; use a longer duration.", 'warn', ctx.concerns)

    dump_json({'max_voltage_V': iea.max_voltage, 'force_error': force_error,
               'curvature_error': curvature_error, 'force_inhomogeneity': inhomogeneity},
              ctx.path('summary.json'))

def cmd_bangbang(task, args, ctx):
    solution = bangbang_solution(task)
    solution.ramp(task.n_samples).save(ctx.path('ramp.csv'))
    print("Bang-bang: T_min = %.6f us, switch at %.6f us" % (solution.T_min, solution.t_sw))
    dump_json({'tmin_us': solution.T_min, 'switch_us': solution.t_sw}, ctx.path('summary.json'))

def cmd_scan_tmin(task, args, ctx):
    kind = getattr(args, 'kind', 'classical')
    u_maxes = [float(u) for u in task.u_maxes]
    if kind == 'classical':
        results = scan_tmin_classical(task, u_maxes, ctx.jobs, ctx.cache, ctx.concerns)
    elif kind == 'bangbang':
        results = [(u, bangbang_solution(task.replace(u_max=u)).T_min) for u in u_maxes]
    else:
        omega = task.omega if kind == 'iea' else 0.0
        results = iea_tmin_scan(task.build_model(), omega, u_maxes, task.n_samples,
                                tf=task.transport_function())

    save_tmin_scan(results, ctx.path('tmin_scan.csv'))
    period = 2 * np.pi / task.omega
    for u, T in results:
        print("u_max = %g V: T_min = %.4f us (%.3f trap periods)" % (u, T, T / period))

def cmd_fit(task, args, ctx):
    fit = fit_power_law([(u, T) for u, T in load_tmin_scan(args.scan) if np.isfinite(T)])
    print("T = (%.6g +/- %.2g) U^-(%.6g +/- %.2g)" % (fit.a, fit.a_err, fit.b, fit.b_err))
    dump_json(fit.as_dict(), ctx.path('fit.json'))

def cmd_reproduce(task, args, ctx):
    summary = reproduce(args.recipe, task, ctx.out, ctx.jobs, ctx.cache, ctx.concerns)
    log("Summary: %s" % summary, ctx.verbosity - 1)

COMMANDS = {
        'calibrate': cmd_calibrate,
        'guess': cmd_guess,
        'simulate-classical': cmd_simulate_classical,
        'optimize-classical': cmd_optimize_classical,
        'simulate-quantum': cmd_simulate_quantum,
        'optimize-quantum': cmd_optimize_quantum,
        'iea': cmd_iea,
        'bangbang': cmd_bangbang,
        'scan-tmin': cmd_scan_tmin,
        'fit': cmd_fit,
        'reproduce': cmd_reproduce,
        }

def run(command, task, args, ctx):
    os.makedirs(ctx.out, exist_ok=True)
    if command != 'reproduce':
        write_config(task, ctx.out, command=command)
    COMMANDS[command](task, args, ctx)
