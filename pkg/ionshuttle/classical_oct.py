'''
Krotov optimization of a voltage ramp against the classical motion.

The figure of merit is the squared distance of the final energy, in
phonons, to a target energy E_T (zero by default):

    J_T = ((E(T) - E_T) / hbar w)^2

Each iteration propagates a costate backwards in time and then sweeps
forward updating each sample right away with the freshly propagated
state:

    dU_i(t) = -(S(t) / lambda_a) p2(t) phi_i'(x(t))

An iteration that would increase J_T is rejected and retried with a
doubled lambda_a.
'''

import numpy as np

from .common import log, dump_json
from .concern import Concern
from .errors import ConfigError, DivergenceError, EscapeError
from .classical import propagate_classical, final_energy, rk4_step, _escape
from .ramps import VoltageRamp
from .units import HBAR, CHARGE_VOLT

def sine_squared(times, T):
    ''' The default update shape sin^2(pi t / T). '''
    return np.sin(np.pi * np.asarray(times) / T)**2

class OptimizationConfig(object):
    r'''
    Parameters of a Krotov optimization.

     - lambda_a: step size weight (larger is more cautious); 'auto'
       picks the one whose first update changes the voltages by about 1%
       of u_max.
     - shape: update shape S(t): a function of (times, T) or an array
       with one value per sample; zero at both ends and never negative.
     - target: stop when the energy (phonons, classical) or the
       infidelity (quantum) is below this.
     - relax: halve lambda_a after two accepted iterations in a row.
     - adapt: when False lambda_a is fixed and every iteration is
       accepted; increases of J_T are only counted as violations.

        >>> from ionshuttle.classical_oct import OptimizationConfig
        >>> OptimizationConfig(u_max=10, lambda_a=-1)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.ConfigError: lambda_a must be positive or 'auto', not -1.

        >>> import numpy as np
        >>> config = OptimizationConfig(u_max=10, shape=lambda t, T: np.ones_like(t))
        >>> config.shape_on(np.linspace(0, 1, 5))
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.ConfigError: The update shape must be zero at both ends.
    '''
    def __init__(self, u_max=None, omega=None, x_target=None, lambda_a=1e3,
                    shape=None, max_iterations=500, target=0.01, energy_target=0.0,
                    max_violations=10, relax=True, adapt=True):

        if lambda_a != 'auto' and not (isinstance(lambda_a, (int, float)) and lambda_a > 0):
            raise ConfigError("lambda_a must be positive or 'auto', not %r." % (lambda_a, ))

        if u_max is not None and not u_max > 0:
            raise ConfigError("u_max must be positive, not %r." % (u_max, ))

        if int(max_iterations) != max_iterations or max_iterations < 0:
            raise ConfigError("max_iterations must be a non negative integer, not %r." % (max_iterations, ))

        if not target >= 0:
            raise ConfigError("The target must be non negative, not %r." % (target, ))

        self.u_max = None if u_max is None else float(u_max)
        self.omega = omega
        self.x_target = x_target
        self.lambda_a = lambda_a
        self.shape = sine_squared if shape is None else shape
        self.max_iterations = int(max_iterations)
        self.target = float(target)
        self.energy_target = float(energy_target)
        self.max_violations = int(max_violations)
        self.relax = bool(relax)
        self.adapt = bool(adapt)

    def shape_on(self, times):
        times = np.asarray(times)
        if callable(self.shape):
            shape = np.asarray(self.shape(times, times[-1]), dtype=float)
        else:
            shape = np.asarray(self.shape, dtype=float)

        if shape.shape != times.shape:
            raise ConfigError("The update shape has %i values but the ramp has %i samples." % (
                                    shape.size, times.size))

        if np.any(shape < 0):
            raise ConfigError("The update shape must not be negative.")

        top = np.max(shape)
        if top == 0:
            return shape

        if shape[0] > 1e-12 * top or shape[-1] > 1e-12 * top:
            raise ConfigError("The update shape must be zero at both ends.")

        shape = shape.copy()
        shape[0] = shape[-1] = 0.0
        return shape

    def as_dict(self):
        return {
                'u_max': self.u_max,
                'omega': self.omega,
                'x_target': self.x_target,
                'lambda_a': self.lambda_a,
                'shape': 'custom' if self.shape is not sine_squared else 'sin2',
                'max_iterations': self.max_iterations,
                'target': self.target,
                'energy_target': self.energy_target,
                'max_violations': self.max_violations,
                'relax': self.relax,
                'adapt': self.adapt,
                }

class OptimizationReport(object):
    r'''
    History of an optimization: one entry per attempted iteration,
    rejected ones included, plus the final ramp.

        >>> from ionshuttle.classical_oct import OptimizationReport, OptimizationConfig
        >>> report = OptimizationReport('classical', OptimizationConfig(u_max=10))
        >>> _ = report.record(iteration=0, J=4.0, J_T=4.0, energy=2.0, max_du=0.0, lambda_a=1e3, accepted=True)
        >>> _ = report.record(iteration=1, J=9.0, J_T=9.0, energy=3.0, max_du=0.1, lambda_a=1e3, accepted=False)
        >>> _ = report.record(iteration=2, J=1.5, J_T=1.0, energy=1.0, max_du=0.05, lambda_a=2e3, accepted=True)
        >>> report
        <OptimizationReport: classical, 2 iterations (1 rejected), J_T=1, not converged>

        >>> [h['J_T'] for h in report.accepted]
        [4.0, 1.0]
    '''
    def __init__(self, kind, config):
        self.kind = kind
        self.config = config
        self.history = []
        self.converged = False
        self.unstable = False
        self.ramp = None

    def record(self, **entry):
        for k, v in entry.items():
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                entry[k] = v.item()
        self.history.append(entry)
        return entry

    @property
    def accepted(self):
        return [h for h in self.history if h['accepted']]

    @property
    def iterations(self):
        return max(len(self.history) - 1, 0)

    @property
    def final(self):
        return self.accepted[-1]

    def __repr__(self):
        rejected = len(self.history) - len(self.accepted)
        return "<OptimizationReport: %s, %i iterations (%i rejected), J_T=%g, %s>" % (
                    self.kind, self.iterations, rejected, self.final['J_T'],
                    "converged" if self.converged else "not converged")

    def as_dict(self):
        return {
                'kind': self.kind,
                'converged': self.converged,
                'unstable': self.unstable,
                'iterations': self.iterations,
                'config': self.config.as_dict(),
                'history': self.history,
                }

    def dump(self, path):
        dump_json(self.as_dict(), path)

class CostateVector(object):
    def __init__(self, times, p1, p2):
        self.times = times
        self.p1 = p1
        self.p2 = p2

    def __repr__(self):
        return "<CostateVector: %i samples>" % len(self.times)

def _curvatures(model, traj):
    ''' V''/m along the trajectory at the samples and at the half
        steps (positions by cubic Hermite interpolation).
        '''
    ramp = traj.ramp
    dt = ramp.dt
    x, v = traj.x, traj.v
    half = 0.5 * (x[:-1] + x[1:]) + dt / 8 * (v[:-1] - v[1:])
    mid_values = 0.5 * (ramp.values[:-1] + ramp.values[1:])

    nodes = model.along(ramp.values, x, 2) / model.mass
    halves = model.along(mid_values, half, 2) / model.mass
    return nodes, halves

def _costate_rk4(p1, p2, c_start, c_half, c_end, h):
    def f(q1, q2, c):
        return q2 * c, -q1

    a1, a2 = f(p1, p2, c_start)
    b1, b2 = f(p1 + 0.5 * h * a1, p2 + 0.5 * h * a2, c_half)
    c1, c2 = f(p1 + 0.5 * h * b1, p2 + 0.5 * h * b2, c_half)
    d1, d2 = f(p1 + h * c1, p2 + h * c2, c_end)
    return (p1 + h / 6 * (a1 + 2 * b1 + 2 * c1 + d1),
            p2 + h / 6 * (a2 + 2 * b2 + 2 * c2 + d2))

def terminal_costate(model, traj, config):
    ''' p(T) = -dJ_T/d(x, v) at the end of <traj>. '''
    _, x, v = traj.final_state
    hw = HBAR * config.omega
    excess = final_energy(traj, model, config.omega, config.x_target) / hw - config.energy_target
    factor = -2 * model.mass * excess / hw
    return factor * config.omega**2 * (x - config.x_target), factor * v

def costate_backward(model, traj, config):
    r'''
    Propagate the costate p = (p1, p2) from t=T down to t=0 along
    the trajectory <traj>:

        p1' = p2 V''(x(t), t) / m
        p2' = -p1

    with RK4 steps on the ramp's grid.

        >>> import numpy as np
        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.ramps import VoltageRamp
        >>> from ionshuttle.classical import propagate_classical
        >>> from ionshuttle.classical_oct import costate_backward, costate_forward, OptimizationConfig
        >>> from ionshuttle.units import angular

        >>> omega = angular(1.3)
        >>> model = PotentialModel.harmonic(omega_per_volt=omega)
        >>> ramp = VoltageRamp(2.0, [[-1.0, 0.0]] * 2001)
        >>> traj = propagate_classical(model, ramp, 0.01, 0.0)
        >>> config = OptimizationConfig(u_max=10, omega=omega, x_target=0.0)
        >>> costate = costate_backward(model, traj, config)

    In a static well the costate just oscillates:

        >>> p = np.hypot(omega * costate.p2, costate.p1)
        >>> bool(np.max(p) < 1.001 * p[-1])
        True

    Going forward again recovers the terminal value:

        >>> p1, p2 = costate_forward(model, traj, costate.p1[0], costate.p2[0])
        >>> bool(abs(p1[-1] - costate.p1[-1]) < 1e-6 * abs(costate.p1[-1]))
        True

    If the final energy is already the target, the costate vanishes:

        >>> from ionshuttle.classical import final_energy
        >>> from ionshuttle.units import HBAR
        >>> config.energy_target = final_energy(traj, model, omega, 0.0) / (HBAR * omega)
        >>> costate = costate_backward(model, traj, config)
        >>> bool(np.all(costate.p1 == 0) and np.all(costate.p2 == 0))
        True
    '''
    nodes, halves = _curvatures(model, traj)
    n = len(traj)
    h = -traj.ramp.dt

    p1 = np.empty(n)
    p2 = np.empty(n)
    p1[-1], p2[-1] = terminal_costate(model, traj, config)
    for k in range(n - 1, 0, -1):
        p1[k-1], p2[k-1] = _costate_rk4(p1[k], p2[k], nodes[k], halves[k-1], nodes[k-1], h)

    return CostateVector(traj.times, p1, p2)

def costate_forward(model, traj, p1_start, p2_start):
    ''' Propagate the costate from t=0 to t=T (a check of
        costate_backward).
        '''
    nodes, halves = _curvatures(model, traj)
    n = len(traj)
    h = traj.ramp.dt

    p1 = np.empty(n)
    p2 = np.empty(n)
    p1[0], p2[0] = p1_start, p2_start
    for k in range(n - 1):
        p1[k+1], p2[k+1] = _costate_rk4(p1[k], p2[k], nodes[k], halves[k], nodes[k+1], h)

    return p1, p2

def _trapezoid_weights(n, dt):
    weights = np.full(n, dt)
    weights[0] = weights[-1] = 0.5 * dt
    return weights

def gradient(model, ramp, config, x0=None, v0=0.0):
    r'''
    First order sensitivity dJ_T/dU of the final figure of merit to
    each sample of each electrode (shape: samples x electrodes).
    '''
    if x0 is None:
        x0 = model.centers[0]

    traj = propagate_classical(model, ramp, x0, v0)
    costate = costate_backward(model, traj, config)
    slopes = model.basis(traj.x, 1).T
    weights = _trapezoid_weights(len(ramp), ramp.dt)
    return (CHARGE_VOLT / model.mass) * (costate.p2 * weights)[:, None] * slopes

def _phonons(traj, model, config):
    return final_energy(traj, model, config.omega, config.x_target) / (HBAR * config.omega)

def _sweep(model, ramp, traj, costate, shape, lambda_a, u_max):
    old = ramp.values
    new = old.copy()
    n = len(ramp)
    dt = ramp.dt

    x, v = traj.x[0], traj.v[0]
    max_du = 0.0
    penalty = 0.0
    for k in range(n):
        if shape[k] > 0:
            updated = old[k] - (shape[k] / lambda_a) * costate.p2[k] * model.basis(x, 1)
            if u_max is not None:
                updated = np.clip(updated, -u_max, u_max)

            du = updated - old[k]
            max_du = max(max_du, float(np.max(np.abs(du))))
            penalty += dt * lambda_a / shape[k] * float(np.sum(du**2))
            new[k] = updated

        if k < n - 1:
            x, v = rk4_step(model, x, v, new[k], 0.5 * (new[k] + old[k+1]), old[k+1], dt)
            if not model.contains(x):
                raise _escape(model, ramp.times[k+1], x)

    return new, max_du, penalty

def _auto_lambda(model, ramp, traj, costate, shape, u_max):
    slopes = np.max(np.abs(model.basis(traj.x, 1)), axis=0)
    largest = float(np.max(shape * np.abs(costate.p2) * slopes))
    reference = u_max if u_max is not None else ramp.max_voltage()
    if largest == 0 or reference == 0:
        return 1.0
    return largest / (0.01 * reference)

class StepControl(object):
    r'''
    Keep lambda_a along the iterations of an optimization: double it
    after an iteration that increased J_T, halve it after two accepted
    iterations in a row (if config.relax).

        >>> from ionshuttle.classical_oct import StepControl, OptimizationConfig
        >>> control = StepControl(OptimizationConfig(max_violations=2), 1.0, 'classical')
        >>> control.judge(1.0, 0.5), control.lambda_a
        (True, 1.0)
        >>> control.judge(0.5, 0.4), control.lambda_a
        (True, 0.5)

        >>> control.judge(0.4, 0.6), control.lambda_a
        (False, 1.0)
        >>> control.judge(0.4, 0.6), control.lambda_a
        (False, 2.0)
        >>> control.judge(0.4, 0.6)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.DivergenceError: The classical optimization increased J_T in 3 consecutive iterations (lambda_a=2); try a larger lambda_a.

    With a fixed lambda_a every finite result is accepted; increases
    only mark the run as unstable:

        >>> control = StepControl(OptimizationConfig(adapt=False), 1.0, 'quantum')
        >>> control.judge(0.4, 0.6), control.unstable, control.lambda_a
        (True, True, 1.0)
        >>> control.judge(0.4, float('nan'))
        False
    '''
    def __init__(self, config, lambda_a, kind):
        self.config = config
        self.lambda_a = lambda_a
        self.kind = kind
        self.violations = 0
        self.streak = 0
        self.unstable = False

    def judge(self, J_T, candidate_J_T):
        ''' Return True if the candidate must be accepted. '''
        improved = bool(candidate_J_T <= J_T)
        self.violations = 0 if improved else self.violations + 1

        if not self.config.adapt:
            if not improved:
                self.unstable = True
            return bool(np.isfinite(candidate_J_T))

        if improved:
            self.streak += 1
            if self.config.relax and self.streak >= 2:
                self.lambda_a *= 0.5
                self.streak = 0
            return True

        self.streak = 0
        if self.violations > self.config.max_violations:
            raise DivergenceError(("The %s optimization increased J_T in %i consecutive " +
                                   "iterations (lambda_a=%g); try a larger lambda_a.") % (
                                       self.kind, self.violations, self.lambda_a))
        self.lambda_a *= 2
        return False

def optimize_classical(model, guess, config, concerns=None, x0=None, v0=0.0):
    r'''
    Optimize the ramp <guess> so the ion, starting at <x0> (the first
    electrode by default) with velocity <v0>, ends at rest at
    config.x_target.

    Return an OptimizationReport with the optimized ramp in its 'ramp'
    attribute.

        >>> import numpy as np
        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.ramps import make_transport_function, guess_voltages
        >>> from ionshuttle.classical_oct import optimize_classical, OptimizationConfig
        >>> from ionshuttle.units import angular

        >>> omega = angular(1.3)
        >>> model = PotentialModel.surrogate()
        >>> guess = guess_voltages(model, make_transport_function(0.0, 280.0, 0.6), omega, 501)
        >>> config = OptimizationConfig(u_max=10, omega=omega, x_target=280.0, target=0.01)
        >>> report = optimize_classical(model, guess, config)     # byexample: +timeout=300
        >>> report.converged, report.final['energy'] < 0.01
        (True, True)

    Accepted iterations never increase J_T and the voltages stay within
    +/- u_max:

        >>> J = [h['J_T'] for h in report.accepted]
        >>> all(b <= a for a, b in zip(J, J[1:]))
        True
        >>> report.ramp.max_voltage() <= 10
        True

    With a zero update shape nothing changes:

        >>> config = OptimizationConfig(u_max=10, omega=omega, x_target=280.0, max_iterations=3,
        ...                             shape=np.zeros(501))
        >>> report = optimize_classical(model, guess, config)
        >>> bool(np.all(report.ramp.values == guess.values))
        True
    '''
    concerns = concerns or Concern()
    if config.omega is None or config.x_target is None:
        raise ConfigError("The classical optimization needs the trap frequency and the target position.")

    if x0 is None:
        x0 = model.centers[0]

    u_max = config.u_max if config.u_max is not None else guess.u_max
    ramp = VoltageRamp(guess.T, guess.values, u_max).clamped()

    shape = config.shape_on(ramp.times)
    report = OptimizationReport('classical', config)
    concerns.start_optimization('classical', config)

    traj = propagate_classical(model, ramp, x0, v0)
    energy = _phonons(traj, model, config)
    J_T = (energy - config.energy_target)**2

    lambda_a = config.lambda_a
    if lambda_a == 'auto':
        costate = costate_backward(model, traj, config)
        lambda_a = _auto_lambda(model, ramp, traj, costate, shape, u_max)

    control = StepControl(config, lambda_a, 'classical')
    entry = report.record(iteration=0, J=J_T, J_T=J_T, energy=energy, max_du=0.0,
                          lambda_a=lambda_a, accepted=True)
    concerns.iteration('classical', entry)

    for iteration in range(1, config.max_iterations + 1):
        if energy < config.target:
            break

        lambda_a = control.lambda_a
        costate = costate_backward(model, traj, config)
        try:
            values, max_du, penalty = _sweep(model, ramp, traj, costate, shape, lambda_a, u_max)
            candidate = VoltageRamp(ramp.T, values, u_max)
            candidate_traj = propagate_classical(model, candidate, x0, v0)
            candidate_energy = _phonons(candidate_traj, model, config)
            candidate_J_T = (candidate_energy - config.energy_target)**2
        except EscapeError as e:
            log("Iteration %i: the update kicked the ion out (%s)." % (iteration, e), 'chat', concerns)
            max_du = penalty = float('nan')
            candidate_energy = candidate_J_T = float('inf')

        accepted = control.judge(J_T, candidate_J_T)
        entry = report.record(iteration=iteration, J=candidate_J_T + penalty, J_T=candidate_J_T,
                              energy=candidate_energy, max_du=max_du, lambda_a=lambda_a,
                              accepted=accepted)
        concerns.iteration('classical', entry)

        if accepted:
            ramp, traj, energy, J_T = candidate, candidate_traj, candidate_energy, candidate_J_T
        elif not config.adapt:
            break
        else:
            log("Iteration %i rejected (J_T %g -> %g); lambda_a doubled to %g." % (
                    iteration, J_T, candidate_J_T, control.lambda_a), 'chat', concerns)

    report.converged = bool(energy < config.target)
    report.unstable = control.unstable
    report.ramp = ramp
    concerns.finish_optimization('classical', report)
    return report
