'''
Tasks, scans, fits and the recipes that regenerate the published data
sets.

A TaskConfig gathers everything that defines a transport: the trap,
the ion, the duration, the voltage limit and the knobs of the
optimizers. It is built from the resolved options (see options.py):

>>> from ionshuttle.experiments import TaskConfig
>>> task = TaskConfig(T=0.3, u_max=10)
>>> task
<TaskConfig: surrogate trap, 0 -> 280 um in 0.3 us, u_max=10 V, method guess>

>>> print("%.4f %.6f" % (task.omega, task.sigma0))
8.1681 0.009859

>>> TaskConfig(method='magic')
Traceback (most recent call last):
<...>
ionshuttle.errors.ConfigError: Unknown method 'magic'; use one of: guess, classical-oct, quantum-oct, iea, bangbang.
'''

import functools, os
import numpy as np

from .analytic import BangBangSolution, iea_ramp, iea_tmin_scan
from .cache import ResultCache, cache_key
from .classical import propagate_classical, final_energy
from .classical_oct import OptimizationConfig, optimize_classical
from .common import log, dump_json, enhance_exceptions
from .concern import Concern
from .errors import ConfigError, DomainError, NumericalError, ScanError, UnrecognizedOption
from .options import DEFAULTS, SCHEMA_VERSION
from .quantum import GridSpec, ground_state, propagate_quantum, excitation_energy
from .quantum_oct import (optimize_quantum, convergence_study, save_convergence_study, phase_space_volume,
                          compensation_table, save_compensation_table)
from .ramps import make_transport_function, guess_voltages
from .trap import PotentialModel, calibrate_bias
from .units import angular, ground_state_width, phonons

class TaskConfig(object):
    r'''
    A transport task. Every field has the default of options.DEFAULTS.

    The lengths of the trap can be rescaled as a whole (see
    scaled_to_xi); the fields keep the unscaled values and the model,
    the transport function and the voltage limit follow the scale.

        >>> from ionshuttle.experiments import TaskConfig
        >>> task = TaskConfig(T=0.3)
        >>> print("%.3e" % task.xi)
        3.521e-05

        >>> scaled = task.scaled_to_xi(0.01)
        >>> print("%.4f %.3g" % (scaled.xi, scaled.d_scaled))
        0.0100 0.986

    Shrinking the trap makes the electrodes stiffer, so the voltage
    limit shrinks with the square of the scale:

        >>> print("%.3e" % (scaled.u_max / task.u_max))
        1.240e-05
    '''
    METHODS = ('guess', 'classical-oct', 'quantum-oct', 'iea', 'bangbang')
    BACKENDS = ('surrogate', 'harmonic', 'tabulated')

    def __init__(self, scale=1.0, **options):
        for key in options:
            if key not in DEFAULTS:
                raise UnrecognizedOption("Unknown task option '%s'." % key)

        values = dict(DEFAULTS)
        values.update(options)
        for key, val in values.items():
            setattr(self, key, val)

        self.scale = float(scale)
        self._check()

    @classmethod
    def from_options(cls, options):
        return cls(**{k: v for k, v in options.items() if k in DEFAULTS})

    def _check(self):
        if self.method not in self.METHODS:
            raise ConfigError("Unknown method '%s'; use one of: %s." % (self.method, ', '.join(self.METHODS)))

        if self.backend not in self.BACKENDS:
            raise ConfigError("Unknown backend '%s'; use one of: %s." % (self.backend, ', '.join(self.BACKENDS)))

        if self.backend == 'tabulated' and not self.table:
            raise ConfigError("The tabulated backend needs a table (a CSV file, see load_table).")

        for key in ('mass', 'frequency_mhz', 'd', 'width', 'height', 'T', 'u_max',
                    'grid_width_sigmas', 'tolerance', 'scan_resolution'):
            val = getattr(self, key)
            if not isinstance(val, (int, float)) or isinstance(val, bool) or not val > 0:
                raise ConfigError("%s must be a positive number, not %r." % (key, val))

        if not self.harmonic_bias < 0:
            raise ConfigError("harmonic_bias must be negative (a trapping bias), not %r." % (self.harmonic_bias, ))

        for key in ('n_samples', 'grid_points', 'degree', 'study_iterations'):
            val = getattr(self, key)
            if int(val) != val or val < 2:
                raise ConfigError("%s must be an integer of at least 2, not %r." % (key, val))

        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 0:
            raise ConfigError("max_iterations must be a non negative integer, not %r." % (self.max_iterations, ))

        if self.lambda_a != 'auto' and not (isinstance(self.lambda_a, (int, float)) and self.lambda_a > 0):
            raise ConfigError("lambda_a must be positive or 'auto', not %r." % (self.lambda_a, ))

        if self.mode not in ('rk4', 'rk45'):
            raise ConfigError("Unknown propagation mode '%s'; use rk4 or rk45." % (self.mode, ))

        lo, hi = self.scan_bracket
        if not 0 < lo < hi:
            raise ConfigError("The scan bracket must be 0 < lo < hi, not %r." % (self.scan_bracket, ))

    def __repr__(self):
        return "<TaskConfig: %s trap, %g -> %g um in %g us, u_max=%g V, method %s>" % (
                    self.backend, self.x1_scaled, self.x2, self.T, self.u_max, self.method)

    def as_dict(self):
        return {k: getattr(self, k) for k in DEFAULTS}

    def replace(self, **changes):
        values = self.as_dict()
        values.update(changes)
        return TaskConfig(scale=self.scale, **values)

    @property
    def omega(self):
        return angular(self.frequency_mhz)

    @property
    def sigma0(self):
        return ground_state_width(self.mass, self.omega)

    @property
    def d_scaled(self):
        return self.d * self.scale

    @property
    def x1_scaled(self):
        return self.x1 * self.scale

    @property
    def x2(self):
        return self.x1_scaled + self.d_scaled

    @property
    def xi(self):
        return self.sigma0 / self.d_scaled

    @property
    def omega_per_volt(self):
        ''' Frequency (rad/us) of the harmonic electrodes at -1 V. '''
        return self.omega / np.sqrt(-self.harmonic_bias) / self.scale

    def build_model(self):
        if self.backend == 'surrogate':
            model = PotentialModel.surrogate(self.x1, self.d, self.width, self.height, self.mass)
        elif self.backend == 'harmonic':
            model = PotentialModel.harmonic(self.x1, self.d, self.mass,
                                            omega_per_volt=self.omega / np.sqrt(-self.harmonic_bias))
        else:
            model = PotentialModel.from_table(self.table, self.degree, self.mass,
                                              centers=[self.x1, self.x1 + self.d])

        if self.scale != 1.0:
            model = model.scaled(self.scale)

        if self.backend != 'tabulated':
            # closed forms hold anywhere; the window must fit the grid at both ends
            reach = self.grid_width_sigmas * self.sigma0
            lo, hi = model.window
            window = (min(lo, self.x1_scaled - reach), max(hi, self.x2 + reach))
            if window != (lo, hi):
                model = PotentialModel(model.electrodes, model.mass, window)
        return model

    def transport_function(self, T=None):
        return make_transport_function(self.x1_scaled, self.x2, self.T if T is None else T,
                                       self.coefficients)

    def grid(self):
        return GridSpec(self.grid_points, self.grid_width_sigmas * self.sigma0)

    def scaled_to_xi(self, xi):
        ''' The same task in a trap shrunk (or grown) until
            sigma0 / d == xi. The duration and the frequency are kept.
            '''
        if not xi > 0:
            raise ConfigError("xi must be positive, not %r." % (xi, ))

        factor = self.sigma0 / (xi * self.d_scaled)
        scaled = self.replace(u_max=self.u_max * factor**2)
        scaled.scale = self.scale * factor
        return scaled

    @property
    def phase_space_volume(self):
        return phase_space_volume(self.mass, self.d_scaled, self.omega)

    def optimization_config(self, kind, **changes):
        ''' The OptimizationConfig of the 'classical' or 'quantum'
            optimization of this task.
            '''
        target = self.target
        if target is None:
            target = 0.01 if kind == 'classical' else 1e-3

        kargs = dict(u_max=self.u_max, lambda_a=self.lambda_a,
                     max_iterations=self.max_iterations, target=target)
        if kind == 'classical':
            kargs.update(omega=self.omega, x_target=self.x2)
        kargs.update(changes)
        return OptimizationConfig(**kargs)

def calibrate(task):
    ''' The bias of each electrode (the others grounded) that creates
        a well of the task's frequency at its center.

            >>> from ionshuttle.experiments import TaskConfig, calibrate
            >>> biases = calibrate(TaskConfig(backend='harmonic'))
            >>> print(["%.6f" % u for u in biases])
            ['-7.000000', '-7.000000']
        '''
    model = task.build_model()
    return [calibrate_bias(model, i, task.omega) for i in range(len(model))]

def _quantum_states(task, model, ramp, guess):
    grid = task.grid()
    psi0 = ground_state(model, ramp.values[0], task.x1_scaled, grid, task.tolerance)
    target = ground_state(model, guess.values[-1], task.x2, grid, task.tolerance)
    return psi0, target

def design_ramp(task, method=None, concerns=None):
    r'''
    The voltage ramp of the task by one of its methods (by default the
    task's own): the guess, the classically or the quantum optimized
    ramp, the IEA ramp or the bang-bang ramp.

    Return the ramp and the OptimizationReport, if any.

    The bang-bang ramp lasts its own minimum time and only makes sense
    on the harmonic model of BangBangSolution.model.

        >>> from ionshuttle.experiments import TaskConfig, design_ramp
        >>> ramp, report = design_ramp(TaskConfig(T=0.3, n_samples=201), 'iea')
        >>> ramp, report
        (<VoltageRamp: 201 samples x 2 electrodes over 0.3 us>, None)
    '''
    method = method or task.method
    model = task.build_model()
    tf = task.transport_function()

    if method == 'bangbang':
        return bangbang_solution(task).ramp(task.n_samples), None

    guess = guess_voltages(model, tf, task.omega, task.n_samples, task.u_max)
    if method == 'guess':
        return guess, None

    if method == 'iea':
        return iea_ramp(model, tf, task.omega, task.n_samples, task.u_max).total, None

    report = optimize_classical(model, guess, task.optimization_config('classical'), concerns)
    if method == 'classical-oct':
        return report.ramp, report

    psi0, target = _quantum_states(task, model, report.ramp, guess)
    report = optimize_quantum(model, report.ramp, psi0, target,
                              task.optimization_config('quantum'), concerns=concerns,
                              tolerance=task.tolerance)
    return report.ramp, report

def bangbang_solution(task):
    ''' The time optimal solution of the harmonic approximation of the
        task's trap: BangBangSolution.model has the per volt frequency
        of the task's harmonic electrodes.
        '''
    return BangBangSolution(task.omega_per_volt / np.sqrt(2), task.u_max, task.x1_scaled, task.x2)

def _converges(task, T):
    model = task.build_model()
    tf = task.transport_function(T)
    guess = guess_voltages(model, tf, task.omega, task.n_samples, task.u_max)
    try:
        report = optimize_classical(model, guess, task.optimization_config('classical', target=0.01))
    except NumericalError:
        return False
    return report.converged

def tmin_classical(task, u_max):
    ''' The shortest duration (to the task's scan_resolution) that the
        classical optimization brings below 0.01 phonons with a voltage
        limit of <u_max>.
        '''
    task = task.replace(u_max=u_max)
    lo, hi = task.scan_bracket
    if not _converges(task, hi):
        raise ScanError(("The classical optimization does not converge even at T=%g us " +
                         "with u_max=%g V; widen the scan bracket or raise max_iterations.") % (hi, u_max))

    if _converges(task, lo):
        return float(lo)

    while hi - lo > task.scan_resolution:
        middle = 0.5 * (lo + hi)
        if _converges(task, middle):
            hi = middle
        else:
            lo = middle

    return float(hi)

def _quiet_enough(task, T, method, threshold):
    timed = task.replace(T=T)
    try:
        ramp, _ = design_ramp(timed, method)
        return quantum_excitation(timed, ramp) < threshold
    except NumericalError:
        return False

def tmin_quantum(task, lo, hi, method='classical-oct', threshold=0.01):
    ''' The shortest duration in [<lo>, <hi>] (to the task's
        scan_resolution) at which the <method> ramp leaves less than
        <threshold> phonons on the quantum wavepacket.

        The classical optimization ignores squeezing, so its ramps
        need longer under the quantum motion than tmin_classical says.
        '''
    if not 0 < lo < hi:
        raise ConfigError("The scan bracket must be 0 < lo < hi, not (%r, %r)." % (lo, hi))

    if not _quiet_enough(task, hi, method, threshold):
        raise ScanError("The %s ramp leaves %g phonons or more even at T=%g us; widen the bracket." % (
                            method, threshold, hi))

    if _quiet_enough(task, lo, method, threshold):
        return float(lo)

    while hi - lo > task.scan_resolution:
        middle = 0.5 * (lo + hi)
        if _quiet_enough(task, middle, method, threshold):
            hi = middle
        else:
            lo = middle

    return float(hi)

def _tmin_point(task, cache, u_max):
    key = cache_key('tmin-classical', task.replace(T=DEFAULTS['T']).as_dict(), u_max)
    with enhance_exceptions("Scan point u_max=%g V" % u_max, 'tmin-classical'), \
            cache.synced(label="u_max=%g" % u_max):
        return cache.get(key, lambda: tmin_classical(task, u_max))

def scan_tmin_classical(task, u_maxes, jobs=None, cache=None, concerns=None):
    r'''
    For each voltage limit of <u_maxes>, the minimum duration of the
    classically optimized transport (see tmin_classical), in parallel
    if a Jobs pool is given.

    Return the list of (u_max, tmin) and log the fraction of the trap
    period each minimum time is.
    '''
    from .jobs import Jobs

    concerns = concerns or Concern()
    cache = cache or ResultCache(None, disabled=True)
    jobs = jobs or Jobs(1, 0)

    u_maxes = [float(u) for u in u_maxes]
    for u in u_maxes:
        if not u > 0:
            raise ConfigError("The maximum voltage must be positive, not %r." % u)

    concerns.start_scan('tmin-classical', u_maxes)
    func = functools.partial(_tmin_point, task, cache)
    tmins = jobs.map(func, u_maxes, on_result=lambda u, T: concerns.scan_point('tmin-classical', u, T))
    concerns.finish_scan('tmin-classical')

    period = 2 * np.pi / task.omega
    for u, T in zip(u_maxes, tmins):
        log("u_max=%g V: T_min=%.4f us (%.3f trap periods)" % (u, T, T / period), 'chat', concerns)

    return list(zip(u_maxes, tmins))

def save_tmin_scan(results, path):
    with open(path, 'w') as f:
        f.write("umax_V,tmin_us\n")
        for u, T in results:
            f.write("%.17g,%.17g\n" % (u, T))

def load_tmin_scan(path):
    with open(path, 'r') as f:
        header = f.readline().strip()
    if header != "umax_V,tmin_us":
        raise ConfigError("The scan '%s' must start with the header 'umax_V,tmin_us', not '%s'." % (path, header))

    table = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    return [(float(u), float(T)) for u, T in table]

class PowerLawFit(object):
    r'''
    T = a U^-b with the standard errors of a and b and the residual
    variance of the fit in log space. A minimum time that falls with the
    voltage has a positive b.
    '''
    def __init__(self, a, b, a_err, b_err, residual):
        self.a = a
        self.b = b
        self.a_err = a_err
        self.b_err = b_err
        self.residual = residual

    def __repr__(self):
        return "<PowerLawFit: T = (%.4g +/- %.2g) U^-(%.4g +/- %.2g)>" % (
                    self.a, self.a_err, self.b, self.b_err)

    def __call__(self, u):
        return self.a * np.asarray(u, dtype=float)**(-self.b)

    def as_dict(self):
        return {'a': self.a, 'b': self.b, 'a_err': self.a_err, 'b_err': self.b_err,
                'residual': self.residual}

def fit_power_law(table):
    r'''
    Fit T = a U^-b to the (U, T) pairs of <table> by linear least
    squares of log T against log U.

        >>> from ionshuttle.experiments import fit_power_law
        >>> fit = fit_power_law([(10.0, 2 / 10**0.5), (20.0, 2 / 20**0.5), (40.0, 2 / 40**0.5)])
        >>> print("%.6f %.6f" % (fit.a, fit.b))
        2.000000 0.500000
        >>> bool(fit.residual < 1e-20)
        True

        >>> fit
        <PowerLawFit: T = (2 +/- <...>) U^-(0.5 +/- <...>)>
        >>> print("%.6f" % fit(100.0))
        0.200000

    Exact power laws come back to the rounding:

        >>> table = [(u, 0.880 * u**-0.487) for u in (10.0, 20.0, 40.0, 80.0)]
        >>> fit = fit_power_law(table)
        >>> bool(abs(fit.a - 0.880) < 1e-10 and abs(fit.b - 0.487) < 1e-10)
        True

    The fit needs 3 distinct points at least and only positive values:

        >>> fit_power_law([(10.0, 0.3), (10.0, 0.3), (20.0, 0.2)])
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.DomainError: A power law fit needs at least 3 distinct points, got 2.

        >>> fit_power_law([(10.0, 0.3), (20.0, -0.2), (40.0, 0.1)])
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.DomainError: A power law fit needs positive and finite values; (20, -0.2) is not.
    '''
    pairs = [(float(u), float(T)) for u, T in table]
    for u, T in pairs:
        if not (u > 0 and T > 0 and np.isfinite(u) and np.isfinite(T)):
            raise DomainError("A power law fit needs positive and finite values; (%g, %g) is not." % (u, T))

    distinct = sorted(set(pairs))
    if len(distinct) < 3:
        raise DomainError("A power law fit needs at least 3 distinct points, got %i." % len(distinct))

    log_u = np.log([u for u, _ in pairs])
    log_T = np.log([T for _, T in pairs])

    (slope, log_a), cov = np.polyfit(log_u, log_T, 1, cov='unscaled')
    residuals = log_T - (log_a + slope * log_u)
    variance = float(np.sum(residuals**2)) / (len(pairs) - 2)
    cov = cov * variance

    a = float(np.exp(log_a))
    return PowerLawFit(a, -float(slope), a * float(np.sqrt(cov[1, 1])), float(np.sqrt(cov[0, 0])), variance)

def squeezing_amplitude(series, tail=0.25):
    r'''
    Relative peak to peak oscillation of the momentum spread in the
    last <tail> fraction of <series> (an array of dp values or a
    QuantumTrajectory): a wavepacket that arrives squeezed breathes in
    the final well.

        >>> import numpy as np
        >>> from ionshuttle.experiments import squeezing_amplitude
        >>> t = np.linspace(0, 1, 401)
        >>> print("%.3f" % squeezing_amplitude(1 + 0.1 * np.cos(40 * t)))
        0.200

        >>> print("%.3f" % squeezing_amplitude(np.ones(10)))
        0.000
    '''
    if hasattr(series, 'series'):
        series = series.series('dp')

    series = np.asarray(series, dtype=float)
    if not 0 < tail <= 1:
        raise ConfigError("The tail must be a fraction in (0, 1], not %r." % (tail, ))

    start = min(int(len(series) * (1 - tail)), len(series) - 2)
    window = series[max(start, 0):]
    mean = float(np.mean(window))
    if mean == 0:
        raise DomainError("The momentum spread is zero: the series holds no wavepacket.")
    return float(np.max(window) - np.min(window)) / mean

def quantum_excitation(task, ramp, model=None):
    ''' Excitation (phonons) left by <ramp> on the ground state of the
        first well, measured in the last well.
        '''
    model = model or task.build_model()
    psi0 = ground_state(model, ramp.values[0], task.x1_scaled, task.grid(), task.tolerance)
    traj = propagate_quantum(model, ramp, psi0, tolerance=task.tolerance, observe=False)
    return excitation_energy(traj.final, model, ramp.values[-1], task.omega)

def _excitation_point(task, T):
    timed = task.replace(T=T)
    model = timed.build_model()
    row = [T]
    for method in ('guess', 'classical-oct', 'iea'):
        try:
            ramp, _ = design_ramp(timed, method)
            row.append(quantum_excitation(timed, ramp, model))
        except NumericalError:
            row.append(float('nan'))
    return row

def _write_rows(path, header, rows):
    with open(path, 'w') as f:
        f.write(header + "\n")
        for row in rows:
            f.write(','.join('%.17g' % v for v in row) + "\n")

def classical_phonons(task, ramp, model=None):
    ''' Excitation (phonons) that <ramp> leaves on a classical ion
        starting at rest at the first well.
        '''
    model = model or task.build_model()
    traj = propagate_classical(model, ramp, task.x1_scaled, 0.0, task.mode)
    return phonons(final_energy(traj, model, task.omega, task.x2), task.omega)

def _final_energy_point(task, T):
    timed = task.replace(T=T)
    model = timed.build_model()
    row = [T]
    for method, u in [('guess', task.u_max)] + [('classical-oct', u) for u in task.u_maxes]:
        try:
            ramp, _ = design_ramp(timed.replace(u_max=u), method)
            row.append(classical_phonons(timed, ramp, model))
        except NumericalError:
            row.append(float('nan'))
    return row

def _recipe_final_energy(task, out, jobs, cache, concerns):
    durations = [float(T) for T in task.durations]
    concerns.start_scan('final-energy', durations)
    rows = jobs.map(functools.partial(_final_energy_point, task), durations,
                    on_result=lambda T, row: concerns.scan_point('final-energy', T, row))
    concerns.finish_scan('final-energy')
    _write_rows(os.path.join(out, 'final_energy.csv'),
                ','.join(["T_us", "guess_phonons"] + ["classical_%gV_phonons" % u for u in task.u_maxes]),
                rows)

    model = task.build_model()
    x0 = task.x1_scaled

    guess, _ = design_ramp(task, 'guess')
    guess.save(os.path.join(out, 'guess_ramp.csv'))
    traj = propagate_classical(model, guess, x0, 0.0, task.mode)
    traj.save(os.path.join(out, 'guess_trajectory.csv'))

    ramp, report = design_ramp(task, 'classical-oct', concerns)
    ramp.save(os.path.join(out, 'optimized_ramp.csv'))
    traj = propagate_classical(model, ramp, x0, 0.0, task.mode)
    traj.save(os.path.join(out, 'optimized_trajectory.csv'))
    report.dump(os.path.join(out, 'report.json'))

    return {'optimized_phonons': float(classical_phonons(task, ramp, model)), 'converged': report.converged,
            'symmetry_defect_V': float(ramp.symmetry_defect())}

def _recipe_tmin_scan(task, out, jobs, cache, concerns):
    results = scan_tmin_classical(task, task.u_maxes, jobs, cache, concerns)
    save_tmin_scan(results, os.path.join(out, 'tmin_scan.csv'))

    period = 2 * np.pi / task.omega
    summary = {'trap_period_fractions': [T / period for _, T in results]}
    finite = [(u, T) for u, T in results if np.isfinite(T)]
    if len(set(finite)) >= 3:
        summary['fit'] = fit_power_law(finite).as_dict()
    return summary

def _recipe_excitation(task, out, jobs, cache, concerns):
    durations = [float(T) for T in task.durations]
    concerns.start_scan('excitation', durations)
    rows = jobs.map(functools.partial(_excitation_point, task), durations,
                    on_result=lambda T, row: concerns.scan_point('excitation', T, row))
    concerns.finish_scan('excitation')
    _write_rows(os.path.join(out, 'excitation.csv'),
                "T_us,guess_phonons,classical_phonons,iea_phonons", rows)
    return {}

def _recipe_iea_scan(task, out, jobs, cache, concerns):
    model = task.build_model()
    u_maxes = [float(u) for u in task.u_maxes]

    curves = {
        'iea_tmin.csv': iea_tmin_scan(model, task.omega, u_maxes, task.n_samples,
                                      tf=task.transport_function()),
        'iea_push_tmin.csv': iea_tmin_scan(model, 0.0, u_maxes, task.n_samples,
                                           tf=task.transport_function()),
        'bangbang_tmin.csv': [(u, bangbang_solution(task.replace(u_max=u)).T_min) for u in u_maxes],
        'classical_tmin.csv': scan_tmin_classical(task, u_maxes, jobs, cache, concerns),
    }

    fits = {}
    for name, results in sorted(curves.items()):
        save_tmin_scan(results, os.path.join(out, name))
        finite = [(u, T) for u, T in results if np.isfinite(T)]
        if len(set(finite)) >= 3:
            fits[name[:-len('.csv')]] = fit_power_law(finite).as_dict()
    return {'fits': fits}

def _recipe_convergence(task, out, jobs, cache, concerns):
    points = convergence_study(task, task.xis, task.lambdas, task.study_iterations, jobs, concerns)
    save_convergence_study(points, os.path.join(out, 'convergence.csv'))

    rows = compensation_table(task, task.xis, points, jobs, concerns)
    save_compensation_table(rows, os.path.join(out, 'compensation.csv'))
    return {'phase_space_volume': {'%g' % xi: task.scaled_to_xi(xi).phase_space_volume
                                   for xi in task.xis}}

# id -> (recipe, what it writes)
RECIPES = {
        'fig3': (_recipe_final_energy, "final energy against T, guess and classical OCT per u_max"),
        'fig4': (_recipe_tmin_scan, "classical minimum time scan and its power law fit"),
        'fig5': (_recipe_excitation, "quantum excitation against T of the guess, classical OCT and IEA"),
        'fig6': (_recipe_iea_scan, "IEA minimum times with and without a well, bang-bang and classical"),
        'fig7': (_recipe_convergence, "quantum OCT convergence against xi and the IEA compensation table"),
        }

def write_config(task, out, **extra):
    config = task.as_dict()
    config['schema_version'] = SCHEMA_VERSION
    config.update(extra)
    dump_json(config, os.path.join(out, 'config.json'))

def reproduce(recipe, task, out, jobs=None, cache=None, concerns=None):
    r'''
    Run the <recipe> and write its CSV files, a summary.json and the
    config.json with the resolved task into the directory <out>.

        >>> from ionshuttle.experiments import TaskConfig, reproduce
        >>> reproduce('fig9', TaskConfig(), '/tmp')
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.ConfigError: Unknown recipe 'fig9'; use one of: fig3, fig4, fig5, fig6, fig7.
    '''
    from .jobs import Jobs

    if recipe not in RECIPES:
        raise ConfigError("Unknown recipe '%s'; use one of: %s." % (recipe, ', '.join(sorted(RECIPES))))

    concerns = concerns or Concern()
    cache = cache or ResultCache(None, disabled=True)
    jobs = jobs or Jobs(1, 0)

    os.makedirs(out, exist_ok=True)
    write_config(task, out, recipe=recipe)

    with enhance_exceptions("Recipe %s" % recipe, out):
        recipe_func, _ = RECIPES[recipe]
        summary = recipe_func(task, out, jobs, cache, concerns)
    dump_json(summary, os.path.join(out, 'summary.json'))
    return summary
