'''
Closed form controls: the time optimal bang-bang ramp of an ideal
harmonic trap and the invariant based inverse engineering (IEA) ramp,
which adds to the guess voltages the uniform force that the transport
needs.

>>> from ionshuttle.analytic import bangbang
>>> from ionshuttle.units import angular
>>> solution, ramp = bangbang(angular(1.3), 10.0, 0.0, 280.0, 1001)
>>> solution
<BangBangSolution: T_min=0.05475 us, switch at 0.02738 us, u_max=10 V>

>>> print(ramp.values[0], ramp.values[-1])
[ 10. -10.] [-10.  10.]
'''

import numpy as np

from .errors import DomainError, ConfigError
from .ramps import VoltageRamp, guess_voltages, _well_geometry
from .trap import PotentialModel
from .units import CHARGE_VOLT, CALCIUM_40

class BangBangSolution(object):
    r'''
    Time optimal transport in an ideal trap where the voltages can only
    push with a bounded uniform force: full push during the first half
    and full brake during the second one.

    For electrodes whose harmonic frequency per volt is <omega0>, the
    minimum time is sqrt(2) / (omega0 sqrt(u_max)).

        >>> from ionshuttle.analytic import BangBangSolution
        >>> from ionshuttle.units import angular
        >>> bb = BangBangSolution(angular(1.3), 10.0, 0.0, 280.0)
        >>> print("%.3f %.3f" % (bb.position(bb.t_sw), bb.position(bb.T_min)))
        140.000 280.000

        >>> print("%.6f %.6f" % (bb.velocity(0.0), bb.velocity(bb.T_min)))
        0.000000 0.000000

    The path holds on a harmonic model whose curvature per volt is
    2 m omega0^2:

        >>> from ionshuttle.classical import propagate_piecewise, final_energy
        >>> model = bb.model()
        >>> traj = propagate_piecewise(model, bb.segments(), 0.0, 0.0)
        >>> print("%.6f %.6f" % (traj.final_state.x, abs(traj.final_state.v)))
        280.000000 0.000000

        >>> from ionshuttle.units import phonons
        >>> bool(phonons(final_energy(traj, model, bb.omega0, 280.0), bb.omega0) < 1e-6)
        True

        >>> BangBangSolution(angular(1.3), 0.0, 0.0, 280.0)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.DomainError: The maximum voltage must be positive, not 0.
    '''
    def __init__(self, omega0, u_max, x1, x2):
        if not u_max > 0:
            raise DomainError("The maximum voltage must be positive, not %r." % u_max)
        if not omega0 > 0:
            raise DomainError("The trap frequency must be positive, not %r." % omega0)

        self.omega0 = float(omega0)
        self.u_max = float(u_max)
        self.x1 = float(x1)
        self.x2 = float(x2)

        self.T_min = np.sqrt(2) / (self.omega0 * np.sqrt(self.u_max))
        self.t_sw = 0.5 * self.T_min

    def __repr__(self):
        return "<BangBangSolution: T_min=%.4g us, switch at %.4g us, u_max=%g V>" % (
                    self.T_min, self.t_sw, self.u_max)

    @property
    def d(self):
        return self.x2 - self.x1

    @property
    def _k(self):
        # half of the acceleration
        return self.u_max * self.d * self.omega0**2

    def position(self, t):
        t = np.asarray(t, dtype=float)
        before = self.x1 + self._k * t**2
        after = self.x2 - self._k * (self.T_min - t)**2
        return np.where(t <= self.t_sw, before, after)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= self.t_sw, 2 * self._k * t, 2 * self._k * (self.T_min - t))

    def voltages(self):
        ''' The voltages before and after the switch. '''
        u = self.u_max
        return np.array([u, -u]), np.array([-u, u])

    def segments(self):
        push, brake = self.voltages()
        return [(self.t_sw, push), (self.T_min - self.t_sw, brake)]

    def model(self, mass=CALCIUM_40, window=None):
        return PotentialModel.harmonic(self.x1, self.d, mass,
                                       omega_per_volt=np.sqrt(2) * self.omega0, window=window)

    def ramp(self, n_samples=2000):
        ''' The bang-bang voltages sampled on <n_samples>; the switch is
            snapped to the nearest sample.
            '''
        dt = self.T_min / (n_samples - 1)
        switch = int(round(self.t_sw / dt))
        push, brake = self.voltages()
        values = np.empty((n_samples, 2))
        values[:switch] = push
        values[switch:] = brake
        return VoltageRamp(self.T_min, values, self.u_max)

def bangbang(omega0, u_max, x1, x2, n_samples=2000):
    solution = BangBangSolution(omega0, u_max, x1, x2)
    return solution, solution.ramp(n_samples)

def _ermakov_residual(rho, rho_ddot, omega_t, omega0):
    return rho_ddot + omega_t**2 * rho - omega0**2 / rho**3

class IEARamp(object):
    r'''
    The inverse engineered ramp: <base> (the guess voltages) plus the
    <compensation> voltages that create the force m alpha''.
    '''
    def __init__(self, base, compensation, model, tf, omega):
        self.base = base
        self.compensation = compensation
        self.total = VoltageRamp(base.T, base.values + compensation.values, base.u_max)
        self.max_voltage = self.total.max_voltage()
        self.model = model
        self.tf = tf
        self.omega = omega

    def __repr__(self):
        return "<IEARamp: T=%g us, max |U|=%.4g V>" % (self.tf.T, self.max_voltage)

    def verify(self, tolerance=1e-8):
        ''' Check that at every sample the well sits at alpha(t) with the
            right curvature and pushes with the force m alpha''(t).
            Return the worst relative mismatches (force, curvature).
            '''
        model = self.model
        m = model.mass
        times = self.total.times
        alpha = self.tf.position(times)
        accel = self.tf.acceleration(times)

        force = -model.along(self.total.values, alpha, 1)
        curvature = model.along(self.total.values, alpha, 2)

        top = float(np.max(np.abs(accel)))
        force_scale = m * max(top, self.omega**2 * abs(self.tf.d), 1e-300)
        curvature_scale = m * max(self.omega**2, top / abs(self.tf.d), 1e-300)

        force_error = float(np.max(np.abs(force - m * accel))) / force_scale
        curvature_error = float(np.max(np.abs(curvature - m * self.omega**2))) / curvature_scale
        if force_error > tolerance or curvature_error > tolerance:
            raise DomainError("The IEA ramp misses the force by %.3g and the curvature by %.3g (relative)." % (
                                    force_error, curvature_error))
        return force_error, curvature_error

def _compensation(model, tf, times):
    ''' dU_1 = -m alpha'' phi2'' / (e D), dU_2 = m alpha'' phi1'' / (e D) '''
    alpha = tf.position(times)
    _, d2, D = _well_geometry(model, alpha)
    scale = model.mass * tf.acceleration(times) / (CHARGE_VOLT * D)
    return np.column_stack([-scale * d2[1], scale * d2[0]])

def iea_ramp(model, tf, omega, n_samples=2000, u_max=None):
    r'''
    Build the IEA ramp for the transport function <tf> in a well of
    frequency <omega> (which may be 0: the ion is only pushed).

    Only the branch rho = 1, Omega = 0 of the invariant construction is
    used: the width of the wavepacket is never modulated.

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.ramps import make_transport_function
        >>> from ionshuttle.analytic import iea_ramp
        >>> from ionshuttle.units import angular
        >>> omega = angular(1.3)
        >>> model = PotentialModel.surrogate()
        >>> iea = iea_ramp(model, make_transport_function(0.0, 280.0, 0.5), omega, 501)
        >>> iea
        <IEARamp: T=0.5 us, max |U|=<...> V>

        >>> force_error, curvature_error = iea.verify()
        >>> force_error < 1e-8, curvature_error < 1e-8
        (True, True)
    '''
    assert _ermakov_residual(1.0, 0.0, omega, omega) == 0

    base = guess_voltages(model, tf, omega, n_samples, u_max)
    compensation = VoltageRamp(tf.T, _compensation(model, tf, base.times), u_max)
    return IEARamp(base, compensation, model, tf, omega)

def iea_tmin_scan(model, omega, u_maxes, n_samples=2000, resolution=1e-4, tf=None):
    r'''
    For each maximum voltage in <u_maxes>, the shortest duration (us,
    to <resolution>) whose IEA ramp never exceeds it. If the static
    guess alone already needs more, the duration is infinite.

    The compensation scales as 1/T^2 and the guess does not depend on T,
    so the scan does not need to rebuild any ramp.

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.analytic import iea_tmin_scan
        >>> from ionshuttle.units import angular
        >>> model = PotentialModel.surrogate()
        >>> scan = iea_tmin_scan(model, angular(1.3), [5.0, 10.0, 40.0], 501)
        >>> [u for u, T in scan]
        [5.0, 10.0, 40.0]

    Below the static guess voltage no duration works; above it, more
    voltage allows faster transports:

        >>> (T5, T10, T40) = [T for u, T in scan]
        >>> T5, T10 > T40 > 0
        (inf, True)
    '''
    if tf is None:
        from .ramps import make_transport_function
        tf = make_transport_function(model.centers[0], model.centers[1], 1.0)
    else:
        tf = tf.stretched(1.0)

    times = np.linspace(0.0, 1.0, n_samples)
    base = guess_voltages(model, tf, omega, n_samples).values
    unit = _compensation(model, tf, times)

    base_top = float(np.max(np.abs(base)))
    unit_top = float(np.max(np.abs(unit)))

    def peak(T):
        return float(np.max(np.abs(base + unit / T**2)))

    results = []
    for u_max in u_maxes:
        if not u_max > 0:
            raise ConfigError("The maximum voltage must be positive, not %r." % u_max)

        if base_top >= u_max:
            results.append((u_max, float('inf')))
            continue

        hi = np.sqrt(unit_top / (u_max - base_top))
        lo = np.sqrt(unit_top / (u_max + base_top))
        while hi - lo > resolution:
            middle = 0.5 * (lo + hi)
            if peak(middle) <= u_max:
                hi = middle
            else:
                lo = middle
        results.append((u_max, float(hi)))

    return results
