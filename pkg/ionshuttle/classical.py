'''
Classical motion of the ion under a voltage ramp.

>>> import numpy as np
>>> from ionshuttle.trap import PotentialModel
>>> from ionshuttle.ramps import VoltageRamp
>>> from ionshuttle.classical import propagate_classical, final_energy
>>> from ionshuttle.units import angular

A static harmonic well: the ion displaced by 1 um oscillates as cos(wt).

>>> omega = angular(1.3)
>>> model = PotentialModel.harmonic(omega_per_volt=omega)
>>> period = 2 * np.pi / omega
>>> ramp = VoltageRamp(period, [[-1.0, 0.0]] * 2001)
>>> traj = propagate_classical(model, ramp, 1.0, 0.0)
>>> traj
<ClassicalTrajectory: 2001 samples over 0.769231 us, rk4>

>>> bool(np.max(np.abs(traj.x - np.cos(omega * traj.times))) < 1e-9)
True

The energy left in a well centered at x, in units of hbar*omega:

>>> from ionshuttle.units import phonons
>>> energy = final_energy(traj, model, omega, 0.0)
>>> print("%.0f" % phonons(energy, omega))
2572

Without voltages the ion moves freely:

>>> ramp = VoltageRamp(1.0, [[0.0, 0.0]] * 11)
>>> traj = propagate_classical(model, ramp, 0.0, 5.0, mode='rk45')
>>> print("%.9f %.9f" % traj.final_state[1:])
5.000000000 5.000000000

If the ion leaves the working window, the propagation fails and tells
when it happened:

>>> propagate_classical(model, VoltageRamp(100.0, [[0.0, 0.0]] * 101), 0.0, 5.0)
Traceback (most recent call last):
<...>
ionshuttle.errors.EscapeError: The ion left the working window [-140, 420] um at t=85 us (x=425 um).
'''

import collections
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import EscapeError, NoWindowError, PropagationError, ConfigError
from .units import HBAR

ClassicalState = collections.namedtuple('ClassicalState', ['t', 'x', 'v'])

class ClassicalTrajectory(object):
    def __init__(self, times, x, v, ramp, model, mode):
        self.times = np.asarray(times)
        self.x = np.asarray(x)
        self.v = np.asarray(v)
        self.ramp = ramp
        self.model = model
        self.mode = mode

    def __len__(self):
        return len(self.times)

    def __repr__(self):
        return "<ClassicalTrajectory: %i samples over %g us, %s>" % (
                    len(self), self.times[-1], self.mode)

    @property
    def final_state(self):
        return ClassicalState(float(self.times[-1]), float(self.x[-1]), float(self.v[-1]))

    def states(self):
        for t, x, v in zip(self.times, self.x, self.v):
            yield ClassicalState(float(t), float(x), float(v))

    def save(self, path):
        np.savetxt(path, np.column_stack([self.times, self.x, self.v]), delimiter=',',
                   header='t_us,x_um,v_um_per_us', comments='', fmt='%.17g')

def _escape(model, t, x):
    lo, hi = model.window
    return EscapeError("The ion left the working window [%g, %g] um at t=%g us (x=%g um)." % (
                            lo, hi, t, x), time=t, x=x)

def rk4_step(model, x, v, u0, um, u1, dt):
    ''' One classic Runge-Kutta step of x'' = -V'(x)/m where the
        voltages are <u0> at the beginning of the step, <um> at its
        middle and <u1> at its end.
        '''
    a = model.acceleration
    k1x, k1v = v, a(u0, x)
    k2x, k2v = v + 0.5 * dt * k1v, a(um, x + 0.5 * dt * k1x)
    k3x, k3v = v + 0.5 * dt * k2v, a(um, x + 0.5 * dt * k2x)
    k4x, k4v = v + dt * k3v, a(u1, x + dt * k3x)

    x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return float(x), float(v)

def _propagate_rk4(model, ramp, x0, v0):
    n = len(ramp)
    dt = ramp.dt
    x = np.empty(n)
    v = np.empty(n)
    x[0], v[0] = x0, v0

    values = ramp.values
    for k in range(n - 1):
        x[k+1], v[k+1] = rk4_step(model, x[k], v[k], values[k], ramp.midpoint(k),
                                  values[k+1], dt)
        if not model.contains(x[k+1]):
            raise _escape(model, ramp.times[k+1], x[k+1])

    return x, v

def _integrate(model, voltages_at, t_span, y0, t_eval, scale):
    ''' Dormand-Prince integration of the motion with the voltages
        given by <voltages_at(t)>; stop if the ion leaves the window.
        '''
    lo, hi = model.window

    def rhs(t, y):
        return [y[1], float(model.acceleration(voltages_at(t), y[0]))]

    def below(t, y):
        return y[0] - lo
    below.terminal = True

    def above(t, y):
        return hi - y[0]
    above.terminal = True

    sol = solve_ivp(rhs, t_span, y0, method='DOP853', t_eval=t_eval,
                    rtol=1e-12, atol=1e-12 * np.asarray(scale), events=[below, above])

    if sol.status == 1:
        t_exit = min(float(ev[0]) for ev in sol.t_events if len(ev))
        x_exit = lo if len(sol.t_events[0]) else hi
        raise _escape(model, t_exit, x_exit)

    if sol.status != 0:
        raise PropagationError("The adaptive integration failed: %s" % sol.message)

    return sol

def _propagate_rk45(model, ramp, x0, v0):
    T = ramp.T
    scale = [model.d, model.d / T]

    def voltages_at(t):
        return ramp.at(min(max(t, 0.0), T))

    sol = _integrate(model, voltages_at, (0.0, T), [x0, v0], ramp.times, scale)
    return sol.y[0], sol.y[1]

def propagate_classical(model, ramp, x0, v0, mode='rk4'):
    r'''
    Integrate m x'' = -V'(x, t) with the voltages of <ramp>, starting
    at <x0> (um) with velocity <v0> (um/us).

    The 'rk4' mode takes classic Runge-Kutta steps exactly on the ramp's
    samples; the 'rk45' mode is an adaptive Dormand-Prince integration
    reported at the same samples.
    '''
    if not model.contains(x0):
        raise _escape(model, 0.0, x0)

    if mode == 'rk4':
        x, v = _propagate_rk4(model, ramp, float(x0), float(v0))
    elif mode == 'rk45':
        x, v = _propagate_rk45(model, ramp, float(x0), float(v0))
    else:
        raise ConfigError("Unknown integration mode '%s'; use 'rk4' or 'rk45'." % mode)

    return ClassicalTrajectory(ramp.times.copy(), x, v, ramp, model, mode)

def propagate_piecewise(model, segments, x0, v0, samples_per_segment=101):
    r'''
    Integrate the motion under piecewise constant voltages.
    <segments> is a sequence of (duration, voltages); each one is
    integrated on its own so the switches are exact.

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.classical import propagate_piecewise
        >>> model = PotentialModel.harmonic(curvature=1e-6)
        >>> traj = propagate_piecewise(model, [(1.0, [0.0, 0.0]), (2.0, [0.0, 0.0])], 0.0, 3.0)
        >>> print("%.9f %.9f %.9f" % traj.final_state)
        3.000000000 9.000000000 3.000000000
    '''
    t0 = 0.0
    x, v = float(x0), float(v0)
    times, xs, vs = [t0], [x], [v]
    for duration, voltages in segments:
        if not duration > 0:
            continue

        voltages = np.asarray(voltages, dtype=float)
        t_eval = np.linspace(t0, t0 + duration, samples_per_segment)
        scale = [model.d, model.d / duration]
        sol = _integrate(model, lambda t: voltages, (t0, t0 + duration), [x, v], t_eval, scale)

        times.extend(sol.t[1:])
        xs.extend(sol.y[0][1:])
        vs.extend(sol.y[1][1:])
        t0, x, v = t0 + duration, sol.y[0][-1], sol.y[1][-1]

    return ClassicalTrajectory(times, xs, vs, None, model, 'piecewise')

def final_energy(traj, model, omega, x2):
    ''' Energy of the final state in a harmonic well of frequency
        <omega> centered at <x2>: m v^2/2 + m omega^2 (x - x2)^2 / 2.
        '''
    _, x, v = traj.final_state
    m = model.mass
    return 0.5 * m * v**2 + 0.5 * m * omega**2 * (x - x2)**2

def excitation_family(model, ramp, omega, x2, x0=None, v0=0.0, mode='rk4'):
    ''' Return a function T -> final excitation (phonons) of <ramp>
        stretched to the duration T.
        '''
    if x0 is None:
        x0 = model.centers[0]

    def family(T):
        traj = propagate_classical(model, ramp.stretched(T), x0, v0, mode)
        return final_energy(traj, model, omega, x2) / (HBAR * omega)

    return family

def stability_window(family, threshold, center, resolution=1e-4, step=1e-3, limit=None):
    r'''
    Width (us) of the largest contiguous interval of durations around
    <center> where <family>(T) stays below <threshold>.

    The edges are located by stepping outwards by <step> until the
    threshold is crossed (or <limit> is reached) and then by bisection
    down to <resolution>.

        >>> from ionshuttle.classical import stability_window
        >>> parabola = lambda T: (T - 1.0)**2 * 1e4
        >>> print("%.3f" % stability_window(parabola, 1.0, 1.0, step=0.004))
        0.020

        >>> stability_window(parabola, 1.0, 1.5)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.NoWindowError: The excitation at T=1.5 us is 2500, not below the threshold 1.

    Nothing is below a zero threshold:

        >>> stability_window(parabola, 0.0, 1.0)
        0.0
    '''
    if threshold <= 0:
        return 0.0

    value = family(center)
    if not value < threshold:
        raise NoWindowError("The excitation at T=%g us is %g, not below the threshold %g." % (
                                center, value, threshold))

    if limit is None:
        limit = 0.5 * center

    def edge(direction):
        inside = 0.0
        while inside < limit:
            trial = min(inside + step, limit)
            if family(center + direction * trial) < threshold:
                inside = trial
            else:
                outside = trial
                break
        else:
            return inside

        while outside - inside > resolution:
            middle = 0.5 * (inside + outside)
            if family(center + direction * middle) < threshold:
                inside = middle
            else:
                outside = middle
        return inside

    return edge(+1) + edge(-1)

def local_minimum(family, near, span):
    ''' Duration of the minimum of <family> within <near> +/- <span>. '''
    result = minimize_scalar(family, bounds=(near - span, near + span), method='bounded',
                             options={'xatol': 1e-6})
    return float(result.x), float(result.fun)
