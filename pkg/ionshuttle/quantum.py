'''
Quantum motion of the ion: a wavepacket sampled on a small grid (the
window) that travels with the ion.

The lab wavefunction is kept as

    psi(x) = exp(i theta) exp(i p_cl (x - x_cl) / hbar) psi_w(x - x_cl)

where (x_cl, p_cl) is a classical point that follows the ion and psi_w
is the wavefunction in the window. Inside the window only what the
classical motion does not explain is left: the potential minus its
tangent at x_cl. Each step is a Chebyshev expansion of the propagator
and after it the window is re-centred on the wavepacket.

>>> import numpy as np
>>> from ionshuttle.trap import PotentialModel
>>> from ionshuttle.quantum import GridSpec, ground_state
>>> from ionshuttle.units import angular, HBAR

>>> omega = angular(1.3)
>>> model = PotentialModel.harmonic(omega_per_volt=omega)
>>> psi = ground_state(model, [-1.0, 0.0], 0.0, GridSpec(128))
>>> psi
<MovingWavefunction: 128 points over 0.158 um at x=<...> um, p=0, t=0 us>

In a harmonic well the ground state is the Gaussian of width
sqrt(hbar / 2 m w) and its energy is hbar w / 2:

>>> obs = psi.observables(model, [-1.0, 0.0], omega)
>>> from ionshuttle.units import ground_state_width
>>> bool(abs(obs.dx / ground_state_width(40, omega) - 1) < 1e-6)
True
>>> print("%.6f %.6f" % (obs.uncertainty, abs(obs.excitation)))
0.500000 0.000000
'''

import collections
import numpy as np
from scipy import fft
from scipy.special import jv, ive, eval_hermite, gammaln
from scipy.optimize import minimize_scalar, root_scalar

from .errors import (ConfigError, GridTooSmallError, PropagationError,
                     NoMinimumError)
from .classical import rk4_step, _escape
from .common import constant
from .units import HBAR

SPECTRAL_MARGIN = 0.05

class GridSpec(object):
    r'''
    A window of <n> points (a power of two, at least 32) spanning
    <width> um. When <moving> is False the window stays where the
    propagation started and it must be wide enough for the whole
    transport.

    The width may be left to None: ground_state then picks 16 times
    the width of the ground state.

        >>> from ionshuttle.quantum import GridSpec
        >>> grid = GridSpec(64, 0.64)
        >>> grid
        <GridSpec: 64 points over 0.64 um, moving>
        >>> print("%.2f %.2f %.4f" % (grid.y[0], grid.y[-1], grid.dy))
        -0.32 0.31 0.0100

        >>> GridSpec(100, 1.0)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.ConfigError: The number of grid points must be a power of two and at least 32, not 100.

        >>> GridSpec(64).y
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.ConfigError: The grid has no width yet; give one or let ground_state pick it.
    '''
    def __init__(self, n=128, width=None, moving=True):
        n = int(n)
        if n < 32 or n & (n - 1):
            raise ConfigError("The number of grid points must be a power of two and at least 32, not %r." % n)

        if width is not None and not width > 0:
            raise ConfigError("The grid width must be positive, not %r um." % width)

        self.n = n
        self.width = None if width is None else float(width)
        self.moving = bool(moving)

    def __repr__(self):
        return "<GridSpec: %i points over %s um, %s>" % (
                    self.n, 'auto' if self.width is None else '%g' % self.width,
                    'moving' if self.moving else 'static')

    def __eq__(self, other):
        return isinstance(other, GridSpec) and (self.n, self.width, self.moving) == (
                                                other.n, other.width, other.moving)

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash((self.n, self.width, self.moving))

    def _check(self):
        if self.width is None:
            raise ConfigError("The grid has no width yet; give one or let ground_state pick it.")

    def resolved(self, sigma, sigmas=16):
        ''' This grid or, if it has no width, one <sigmas> times <sigma>
            wide.
            '''
        if self.width is not None:
            return self
        return GridSpec(self.n, sigmas * sigma, self.moving)

    @property
    def dy(self):
        self._check()
        return self.width / self.n

    @property
    @constant
    def y(self):
        return (np.arange(self.n) - self.n // 2) * self.dy

    @property
    @constant
    def k(self):
        return 2 * np.pi * fft.fftfreq(self.n, self.dy)

    @property
    def k_max(self):
        return np.pi / self.dy

ObservableSet = collections.namedtuple('ObservableSet',
                    ['t', 'x_mean', 'p_mean', 'dx', 'dp', 'uncertainty', 'energy', 'excitation'])

class MovingWavefunction(object):
    r'''
    The state exp(i phase) exp(i p_cl (x - x_cl) / hbar) psi(x - x_cl)
    at the time <t>; <psi> is sampled on grid.y.

    Positions are in um, momenta in amu um/us.
    '''
    def __init__(self, psi, grid, x_cl, p_cl=0.0, phase=0.0, t=0.0):
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (grid.n, ):
            raise ConfigError("The wavefunction has %s samples but the grid %i." % (psi.shape, grid.n))

        self.psi = psi
        self.grid = grid
        self.x_cl = float(x_cl)
        self.p_cl = float(p_cl)
        self.phase = float(phase) % (2 * np.pi)
        self.t = float(t)

    def __repr__(self):
        return "<MovingWavefunction: %i points over %.3g um at x=%g um, p=%g, t=%g us>" % (
                    self.grid.n, self.grid.width, self.x_cl, self.p_cl, self.t)

    def copy(self):
        return MovingWavefunction(self.psi.copy(), self.grid, self.x_cl, self.p_cl,
                                  self.phase, self.t)

    @property
    def lab_positions(self):
        return self.x_cl + self.grid.y

    def norm(self):
        return float(np.sum(np.abs(self.psi)**2) * self.grid.dy)

    def _moments(self):
        grid = self.grid
        density = np.abs(self.psi)**2
        total = np.sum(density)
        y_mean = np.sum(grid.y * density) / total
        y_var = np.sum((grid.y - y_mean)**2 * density) / total

        spectrum = np.abs(fft.fft(self.psi))**2
        k_mean = np.sum(grid.k * spectrum) / np.sum(spectrum)
        k2_mean = np.sum(grid.k**2 * spectrum) / np.sum(spectrum)
        return float(y_mean), float(np.sqrt(y_var)), float(k_mean), float(k2_mean)

    def observables(self, model=None, voltages=None, omega=None, minimum=None):
        r'''
        Expectation values and spreads in the lab frame.

        The energy is measured from the bottom of the well around the
        ion (or from <minimum> if it is given) and it needs <model> and
        <voltages>; the excitation, in phonons of <omega>, subtracts the
        zero point energy. Both are NaN if they cannot be computed.
        '''
        y_mean, dx, k_mean, k2_mean = self._moments()
        dk = np.sqrt(max(k2_mean - k_mean**2, 0.0))

        x_mean = self.x_cl + y_mean
        p_mean = self.p_cl + HBAR * k_mean
        dp = HBAR * dk

        energy = excitation = float('nan')
        if model is not None and voltages is not None:
            if minimum is None:
                try:
                    minimum = well_minimum(model, voltages, x_mean)[0]
                except NoMinimumError:
                    minimum = None

            if minimum is not None:
                energy = self._energy(model, voltages, minimum, k_mean, k2_mean)
                if omega:
                    excitation = (energy - 0.5 * HBAR * omega) / (HBAR * omega)

        return ObservableSet(self.t, x_mean, p_mean, dx, dp, dx * dp / HBAR,
                             energy, excitation)

    def _energy(self, model, voltages, minimum, k_mean, k2_mean):
        m = model.mass
        p = self.p_cl
        kinetic = (p**2 + 2 * p * HBAR * k_mean + HBAR**2 * k2_mean) / (2 * m)

        density = np.abs(self.psi)**2
        potential = model.window_potential(voltages, minimum, (self.x_cl - minimum) + self.grid.y)
        return float(kinetic + np.sum(density * potential) / np.sum(density))

    def window_values(self, y):
        ''' Fourier interpolation of the window wavefunction at the
            window coordinates <y>; zero outside the window.
            '''
        grid = self.grid
        y = np.atleast_1d(np.asarray(y, dtype=float))
        coefficients = fft.fft(self.psi) / grid.n
        values = np.exp(1j * np.outer(y - grid.y[0], grid.k)).dot(coefficients)
        values[(y < grid.y[0]) | (y >= grid.y[0] + grid.width)] = 0
        return values

    def lab_values(self, x):
        r'''
        The lab wavefunction at the positions <x> (um).

            >>> import numpy as np
            >>> from ionshuttle.quantum import GridSpec, harmonic_eigenstate
            >>> from ionshuttle.units import angular
            >>> psi = harmonic_eigenstate(0, 3.0, angular(1.3), 40, GridSpec(64, 0.16))
            >>> values = psi.lab_values(psi.lab_positions)
            >>> bool(np.max(np.abs(values - psi.psi)) < 1e-12)
            True

            >>> print(abs(psi.lab_values(4.0)[0]))
            0.0
        '''
        x = np.asarray(x, dtype=float)
        y = x - self.x_cl
        values = self.window_values(y)
        return np.exp(1j * (self.phase + self.p_cl * np.atleast_1d(y) / HBAR)) * values

def harmonic_eigenstate(n, center, omega, mass, grid):
    r'''
    The n-th eigenstate of a harmonic well of frequency <omega> centered
    at <center>, sampled on the window of <grid> centered there too.

        >>> import numpy as np
        >>> from ionshuttle.quantum import GridSpec, harmonic_eigenstate
        >>> from ionshuttle.units import angular
        >>> grid = GridSpec(128, 0.3)
        >>> states = [harmonic_eigenstate(n, 0.0, angular(1.3), 40, grid) for n in range(3)]
        >>> print(["%.9f" % s.norm() for s in states])
        ['1.000000000', '1.000000000', '1.000000000']

        >>> bool(abs(np.vdot(states[0].psi, states[2].psi)) * grid.dy < 1e-12)
        True
    '''
    grid._check()
    scale = np.sqrt(mass * omega / HBAR)
    xi = scale * grid.y
    log_norm = 0.25 * np.log(mass * omega / (np.pi * HBAR)) - 0.5 * (n * np.log(2) + gammaln(n + 1))
    psi = np.exp(log_norm - 0.5 * xi**2) * eval_hermite(n, xi)
    return MovingWavefunction(psi, grid, center)

def well_minimum(model, voltages, near, span=None):
    r'''
    Locate the potential minimum around <near> (within +/- <span>, half
    the electrode spacing by default) and return it with its curvature
    V''.

    The search is a bounded scalar minimization polished with Newton's
    method on V'.

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.quantum import well_minimum
        >>> model = PotentialModel.harmonic(omega_per_volt=1.0)
        >>> x, curvature = well_minimum(model, [-1.0, -1.0], 100.0)
        >>> print("%.9f %.3f" % (x, curvature))
        140.000000000 80.000

        >>> well_minimum(model, [1.0, 0.0], 0.0)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.NoMinimumError: No potential minimum within [-140, 140] um.
    '''
    lo, hi = model.window
    if span is None:
        span = 0.5 * model.d
    a, b = max(lo, near - span), min(hi, near + span)

    def relative(x):
        return float(model.window_potential(voltages, near, x - near))

    result = minimize_scalar(relative, bounds=(a, b), method='bounded',
                             options={'xatol': 1e-10 * max(b - a, 1.0)})
    x = _newton_minimum(model, voltages, result.x)
    if x is None or not a < x < b:
        raise NoMinimumError("No potential minimum within [%g, %g] um." % (a, b))

    return x, float(model.curvature(voltages, x))

def _newton_minimum(model, voltages, start):
    ''' Newton's method on V' = 0 from <start>; None if it fails or
        does not land on a minimum.
        '''
    m = model.mass
    try:
        result = root_scalar(lambda x: float(model.acceleration(voltages, x)),
                             fprime=lambda x: -float(model.curvature(voltages, x)) / m,
                             x0=float(start), method='newton', xtol=1e-13, maxiter=50)
    except (ZeroDivisionError, RuntimeError, FloatingPointError):
        return None

    x = result.root
    if not result.converged or not model.contains(x) or not model.curvature(voltages, x) > 0:
        return None
    return float(x)

def _bessel_terms(alpha, tolerance, imaginary=False):
    n = np.arange(int(alpha + 10 * np.cbrt(alpha) + 40))
    values = ive(n, alpha) if imaginary else jv(n, alpha)
    reference = values[0] if imaginary else 1.0
    significant = np.nonzero(np.abs(values) >= tolerance * reference)[0]
    last = significant[-1] if len(significant) else 0
    return values[:last + 1]

class Propagator(object):
    r'''
    Propagate a MovingWavefunction on the potential of <model>.

    Each call to step advances the state by <dt> (negative goes back in
    time) with the voltages <u0>, <um> and <u1> at the beginning, middle
    and end of the step. The in-window Hamiltonian is frozen at the
    middle of the step.
    '''
    def __init__(self, model, grid, tolerance=1e-12):
        grid._check()
        self.model = model
        self.grid = grid
        self.tolerance = float(tolerance)
        self.kinetic = HBAR**2 * grid.k**2 / (2 * model.mass)
        self.kinetic_max = HBAR**2 * grid.k_max**2 / (2 * model.mass)

    def apply_hamiltonian(self, psi, potential):
        return fft.ifft(self.kinetic * fft.fft(psi)) + potential * psi

    def _bounds(self, potential, imaginary):
        lo = float(np.min(potential))
        hi = float(np.max(potential)) + self.kinetic_max
        span = hi - lo
        hi += SPECTRAL_MARGIN * span
        if not imaginary:
            lo -= SPECTRAL_MARGIN * span
        return 0.5 * (hi + lo), 0.5 * (hi - lo)

    def _chebyshev(self, psi, potential, coefficients, center, half):
        def X(phi):
            return (self.apply_hamiltonian(phi, potential) - center * phi) / half

        result = coefficients[0] * psi
        if len(coefficients) == 1:
            return result

        previous, current = psi, X(psi)
        result = result + coefficients[1] * current
        for a in coefficients[2:]:
            previous, current = current, 2 * X(current) - previous
            result += a * current
        return result

    def evolve(self, psi, potential, dt):
        ''' exp(-i H dt / hbar) psi with H = kinetic + <potential>.
            Return the new samples and the phase of the energy offset.
            '''
        center, half = self._bounds(potential, imaginary=False)
        alpha = half * abs(dt) / HBAR
        bessel = _bessel_terms(alpha, self.tolerance)

        n = np.arange(len(bessel))
        coefficients = (-1j * np.sign(dt))**n * bessel
        coefficients[1:] *= 2
        return self._chebyshev(psi, potential, coefficients, center, half), -center * dt / HBAR

    def relax(self, psi, potential, tau):
        ''' exp(-H tau / hbar) psi, normalized. '''
        center, half = self._bounds(potential, imaginary=True)
        alpha = half * tau / HBAR
        bessel = _bessel_terms(alpha, self.tolerance, imaginary=True)

        n = np.arange(len(bessel))
        coefficients = (-1.0)**n * bessel
        coefficients[1:] *= 2
        out = self._chebyshev(psi, potential, coefficients, center, half)
        return out / np.sqrt(np.sum(np.abs(out)**2) * self.grid.dy)

    def energy(self, psi, potential):
        dy = self.grid.dy
        return float(np.real(np.vdot(psi, self.apply_hamiltonian(psi, potential))) * dy /
                     (np.sum(np.abs(psi)**2) * dy))

    def _check_window(self, center, t):
        half = 0.5 * self.grid.width
        lo, hi = self.model.window
        if center - half < lo:
            raise _escape(self.model, t, center - half)
        if center + half > hi:
            raise _escape(self.model, t, center + half)

    def step(self, state, u0, um, u1, dt):
        model = self.model
        grid = self.grid
        m = model.mass
        t1 = state.t + dt

        if grid.moving:
            x0, v0 = state.x_cl, state.p_cl / m
            x1, v1 = rk4_step(model, x0, v0, u0, um, u1, dt)
            xm = 0.5 * (x0 + x1) + dt / 8 * (v0 - v1)
            vm = 1.5 * (x1 - x0) / dt - 0.25 * (v0 + v1)
            self._check_window(xm, state.t + 0.5 * dt)
            self._check_window(x1, t1)

            lagrangian = [0.5 * m * v**2 - float(model.energy(u, x))
                          for u, x, v in ((u0, x0, v0), (um, xm, vm), (u1, x1, v1))]
            action = dt / 6 * (lagrangian[0] + 4 * lagrangian[1] + lagrangian[2])

            slope = float(-m * model.acceleration(um, xm))
            potential = model.window_potential(um, xm, grid.y) - slope * grid.y
            x_cl, p_cl = x1, m * v1
            phase = state.phase + action / HBAR
        else:
            x_cl, p_cl = state.x_cl, state.p_cl
            potential = model.window_potential(um, x_cl, grid.y)
            phase = state.phase - float(model.energy(um, x_cl)) * dt / HBAR

        psi, offset = self.evolve(state.psi, potential, dt)
        return MovingWavefunction(psi, grid, x_cl, p_cl, phase + offset, t1)

    def advance(self, state, ramp, j, k, uj, uk, norm0):
        ''' Go from the sample <j> of <ramp> to the neighbour sample <k>
            (either way) where the voltages are <uj> and <uk>; the
            midpoint voltage is their mean.
            '''
        dt = ramp.dt if k > j else -ramp.dt
        state = self.step(state, uj, 0.5 * (uj + uk), uk, dt)
        state.t = ramp.times[k]
        state = self.recenter(state)

        drift = abs(state.norm() - norm0)
        if drift > 1e-8 * norm0:
            raise PropagationError(("The norm drifted by %.3g at t=%g us; " +
                                    "lower the tolerance or use more samples.") % (drift, state.t))
        return state

    def recenter(self, state):
        r'''
        Move the window onto the wavepacket: afterwards psi_w has zero
        mean position and momentum and (x_cl, p_cl) carry them.

        Raise if the wavepacket is too wide for the window or runs
        faster than the grid can resolve.
        '''
        grid = self.grid
        y_mean, dx, k_mean, _ = state._moments()
        _check_resolution(grid, dx, k_mean, state.t)

        if not grid.moving:
            if abs(y_mean) + 6 * dx > 0.5 * grid.width:
                raise GridTooSmallError(("The wavepacket reached the edge of the static window " +
                                         "at t=%g us; use a wider grid.") % state.t)
            return state

        shifted = fft.ifft(np.exp(1j * grid.k * y_mean) * fft.fft(state.psi))
        psi = np.exp(-1j * k_mean * grid.y) * shifted
        phase = state.phase + state.p_cl * y_mean / HBAR
        return MovingWavefunction(psi, grid, state.x_cl + y_mean, state.p_cl + HBAR * k_mean,
                                  phase, state.t)

def _check_resolution(grid, dx, k_mean, t):
    if dx > grid.width / 12:
        raise GridTooSmallError(("The wavepacket (spread %.3g um at t=%g us) is too wide for " +
                                 "a window of %g um; use a wider grid.") % (dx, t, grid.width))

    if abs(k_mean) > 0.5 * grid.k_max:
        raise PropagationError(("The wavepacket runs too fast for the grid at t=%g us " +
                                "(mean k %.3g 1/um, resolvable up to %.3g); use more grid points.") % (
                                    t, k_mean, 0.5 * grid.k_max))

def ground_state(model, voltages, center, grid, tolerance=1e-12, sigmas=16, max_steps=1000):
    r'''
    The ground state of the well around <center> for the given
    <voltages>.

    Starting from the Gaussian of the local curvature it relaxes in
    imaginary time until the energy changes by less than
    1e-12 hbar w per step.

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.quantum import ground_state, GridSpec
        >>> model = PotentialModel.surrogate()
        >>> psi = ground_state(model, [-6.3127, 0.0], 10.0, GridSpec(128))
        >>> print("%.4f" % abs(psi.x_cl))
        0.0000

    Without a well there is no ground state:

        >>> ground_state(model, [6.3, 0.0], 10.0, GridSpec(128))
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.NoMinimumError: No potential minimum within [-130, 150] um.
    '''
    x_min, curvature = well_minimum(model, voltages, center)
    m = model.mass
    omega = np.sqrt(curvature / m)

    grid = grid.resolved(np.sqrt(HBAR / (2 * m * omega)), sigmas)
    propagator = Propagator(model, grid, tolerance)
    propagator._check_window(x_min, 0.0)

    potential = model.window_potential(voltages, x_min, grid.y)
    state = harmonic_eigenstate(0, x_min, omega, m, grid)
    psi = state.psi / np.sqrt(state.norm())

    quantum = HBAR * omega
    energy = propagator.energy(psi, potential)
    for _ in range(max_steps):
        psi = propagator.relax(psi, potential, 1.0 / omega)
        previous, energy = energy, propagator.energy(psi, potential)
        if abs(energy - previous) < 1e-12 * quantum:
            break
    else:
        raise PropagationError("The ground state did not converge in %i imaginary time steps." % max_steps)

    return MovingWavefunction(psi, grid, x_min)

class QuantumTrajectory(object):
    def __init__(self, final, observables, states):
        self.final = final
        self.observables = observables
        self.states = states

    def __repr__(self):
        return "<QuantumTrajectory: %i observations, final t=%g us>" % (
                    len(self.observables), self.final.t)

    def series(self, name):
        return np.array([getattr(o, name) for o in self.observables])

    def save(self, path):
        columns = ['t', 'x_mean', 'p_mean', 'dx', 'dp', 'uncertainty', 'excitation']
        table = np.column_stack([self.series(c) for c in columns])
        np.savetxt(path, table, delimiter=',', comments='', fmt='%.17g',
                   header='t_us,x_mean_um,p_mean,dx_um,dp,uncert_product_hbar,excitation_phonons')

def propagate_quantum(model, ramp, psi0, grid=None, tolerance=1e-12, store=False,
                        observe=True, omega=None, backward=False):
    r'''
    Propagate <psi0> under the voltages of <ramp>, from t=0 to t=T or,
    if <backward>, from t=T down to t=0.

    With <observe> the observables are recorded at every sample (the
    excitation only if <omega> is given); with <store> every state is
    kept too, in time order.

    A static well leaves its ground state alone:

        >>> import numpy as np
        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.ramps import VoltageRamp
        >>> from ionshuttle.quantum import GridSpec, ground_state, propagate_quantum, fidelity
        >>> from ionshuttle.units import angular
        >>> omega = angular(1.3)
        >>> model = PotentialModel.harmonic(omega_per_volt=omega)
        >>> psi0 = ground_state(model, [-1.0, 0.0], 0.0, GridSpec(64))
        >>> ramp = VoltageRamp(0.5, [[-1.0, 0.0]] * 101)
        >>> traj = propagate_quantum(model, ramp, psi0, omega=omega)
        >>> traj
        <QuantumTrajectory: 101 observations, final t=0.5 us>

        >>> bool(1 - fidelity(traj.final, psi0) < 1e-9)
        True
        >>> bool(np.max(np.abs(traj.series('excitation'))) < 1e-8)
        True

    A displaced wavepacket swings like the classical ion and keeps its
    shape:

        >>> from ionshuttle.classical import propagate_classical
        >>> psi0.x_cl = 0.05
        >>> ramp = VoltageRamp(2 * np.pi / omega, [[-1.0, 0.0]] * 1001)
        >>> traj = propagate_quantum(model, ramp, psi0)
        >>> ion = propagate_classical(model, ramp, 0.05, 0.0)
        >>> bool(np.max(np.abs(traj.series('x_mean') - ion.x)) < 1e-9)
        True
        >>> bool(np.max(np.abs(traj.series('uncertainty') - 0.5)) < 1e-8)
        True
    '''
    if grid is not None and grid != psi0.grid:
        raise ConfigError("The grid %r does not match the grid of the initial state %r." % (grid, psi0.grid))

    grid = psi0.grid
    if not grid.moving and psi0.p_cl != 0:
        raise ConfigError("A static window needs a state with p_cl = 0, not %g." % psi0.p_cl)

    propagator = Propagator(model, grid, tolerance)
    values = ramp.values
    n = len(ramp)
    order = list(range(n - 1, -1, -1) if backward else range(n))

    state = psi0.copy()
    state.t = ramp.times[order[0]]
    norm0 = state.norm()
    state = propagator.recenter(state)

    observables = []
    states = []
    minimum = None
    for i, k in enumerate(order):
        if i:
            j = order[i - 1]
            state = propagator.advance(state, ramp, j, k, values[j], values[k], norm0)

        if store:
            states.append(state)

        if observe:
            if omega:
                hint = minimum if minimum is not None else state.x_cl
                minimum = _newton_minimum(model, values[k], hint)
            if omega and minimum is not None:
                observables.append(state.observables(model, values[k], omega, minimum))
            else:
                observables.append(state.observables())

    if backward:
        observables.reverse()
        states.reverse()

    return QuantumTrajectory(state, observables, states if store else None)

def _aligned(a, b):
    ''' conj(a) sampled on the window of <b>, with every phase that
        relates the two frames folded in; None if the windows do not
        overlap in position or in momentum.
        '''
    ga, gb = a.grid, b.grid
    s = b.x_cl - a.x_cl
    dp = b.p_cl - a.p_cl

    if abs(s) >= 0.5 * (ga.width + gb.width) or abs(dp) / HBAR >= max(ga.k_max, gb.k_max):
        return None

    y = gb.y
    if ga.n == gb.n and ga.width == gb.width:
        shifted = fft.ifft(np.exp(1j * ga.k * s) * fft.fft(a.psi))
        outside = (y + s < ga.y[0]) | (y + s >= ga.y[0] + ga.width)
        shifted[outside] = 0
    else:
        shifted = a.window_values(y + s)

    scalar = np.exp(-1j * (b.phase - a.phase - a.p_cl * s / HBAR))
    return np.conj(scalar * shifted) * np.exp(1j * dp * y / HBAR)

def overlap(a, b, weight=None, full_output=False):
    r'''
    The inner product <a|w|b> of two wavefunctions whose windows may be
    anywhere; <weight> is a function of the lab position (or nothing).

    Windows that do not overlap, in position or in momentum, give 0;
    with <full_output> a flag tells whether that happened.

        >>> import numpy as np
        >>> from ionshuttle.quantum import GridSpec, harmonic_eigenstate, overlap
        >>> from ionshuttle.units import angular
        >>> grid = GridSpec(64, 0.16)
        >>> a = harmonic_eigenstate(0, 0.0, angular(1.3), 40, grid)
        >>> b = harmonic_eigenstate(0, 0.004, angular(1.3), 40, grid)

    Two displaced Gaussians overlap as exp(-s^2 / 8 sigma^2):

        >>> from ionshuttle.units import ground_state_width
        >>> sigma = ground_state_width(40, angular(1.3))
        >>> bool(abs(overlap(a, b) - np.exp(-0.004**2 / (8 * sigma**2))) < 1e-10)
        True

        >>> print("%.6f" % abs(overlap(a, a, weight=lambda x: x + 1)))
        1.000000

        >>> b.x_cl = 5.0
        >>> overlap(a, b, full_output=True)
        (0j, True)
    '''
    bra = _aligned(a, b)
    if bra is None:
        return (0j, True) if full_output else 0j

    integrand = bra * b.psi
    if weight is not None:
        integrand = integrand * weight(b.lab_positions)

    value = complex(np.sum(integrand) * b.grid.dy)
    return (value, False) if full_output else value

def projections(a, b, weights):
    r'''
    <a|w_i|b> for each row w_i of <weights>, sampled on the lab
    positions of <b>. Zeros if the windows do not overlap.
    '''
    bra = _aligned(a, b)
    if bra is None:
        return np.zeros(len(weights), dtype=complex)
    return np.asarray(weights).dot(bra * b.psi) * b.grid.dy

def fidelity(psi, target, full_output=False):
    r'''
    |<target|psi>|^2 (see overlap).
    '''
    value, disjoint = overlap(target, psi, full_output=True)
    F = abs(value)**2
    return (F, disjoint) if full_output else F

def excitation_energy(psi, model, voltages, omega):
    r'''
    (<H> - hbar w / 2) / hbar w with the potential measured from the
    bottom of the well where <psi> sits.
    '''
    obs = psi.observables(model, voltages, omega)
    if np.isnan(obs.energy):
        raise NoMinimumError("There is no well under the wavepacket at x=%g um." % obs.x_mean)
    return obs.excitation
