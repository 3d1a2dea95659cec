'''
Transport functions, voltage ramps and the initial guess voltages.

A transport function alpha(t) moves the bottom of the well from x1 to
x2 in a time T. The default is the quintic

    alpha = x1 + d (10 s^3 - 15 s^4 + 6 s^5),      s = t / T

which starts and stops with zero velocity and zero acceleration.

>>> from ionshuttle.ramps import make_transport_function
>>> tf = make_transport_function(0.0, 280.0, 0.3)
>>> print(tf.position(0.0), tf.position(0.3), tf.position(0.15))
0.0 280.0 140.0

>>> print(abs(tf.velocity(0.3)), abs(tf.acceleration(0.3)))
0.0 0.0

A ramp of voltages is sampled on a uniform grid over [0, T]:

>>> import numpy as np
>>> from ionshuttle.ramps import VoltageRamp
>>> ramp = VoltageRamp(1.0, [[0.0, -1.0], [2.0, -3.0], [4.0, -5.0]])
>>> ramp
<VoltageRamp: 3 samples x 2 electrodes over 1 us>

>>> print(ramp.at(0.25))
[ 1. -2.]

>>> ramp.at(1.5)
Traceback (most recent call last):
<...>
ionshuttle.errors.DomainError: t=1.5 us is outside the ramp's duration [0, 1] us
'''

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, ConfigError, DegenerateGeometryError
from .units import CHARGE_VOLT

QUINTIC = (10.0, -15.0, 6.0)

class TransportFunction(object):
    r'''
    The path alpha(t) = x1 + d * f(t/T) of the well, with
    f(s) = sum_k c_k s^(k+3).

    The first power is 3 so f(0), f'(0) and f''(0) are zero; the
    coefficients must make f(1) = 1 and f'(1) = f''(1) = 0 too.

        >>> from ionshuttle.ramps import TransportFunction
        >>> TransportFunction(0.0, 1.0, 1.0, coefficients=(10, -15, 6, 1))
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.DomainError: The transport coefficients (10, -15, 6, 1) do not meet the boundary conditions at s=1: f=2, f'=6, f''=30.

    A septic polynomial with zero jerk at the ends is fine:

        >>> tf = TransportFunction(0.0, 1.0, 1.0, coefficients=(0, 35, -84, 70, -20))
        >>> print("%.12f" % tf.position(0.5))
        0.500000000000
    '''
    def __init__(self, x1, x2, T, coefficients=QUINTIC):
        if not T > 0:
            raise DomainError("The transport duration must be positive, not %r us." % T)

        self.x1 = float(x1)
        self.x2 = float(x2)
        self.T = float(T)
        self.coefficients = tuple(coefficients)

        self.shape = Polynomial([0.0, 0.0, 0.0] + [float(c) for c in self.coefficients])
        self.shape_velocity = self.shape.deriv()
        self.shape_acceleration = self.shape_velocity.deriv()

        f, df, ddf = self.shape(1.0), self.shape_velocity(1.0), self.shape_acceleration(1.0)
        if abs(f - 1) > 1e-10 or abs(df) > 1e-10 or abs(ddf) > 1e-10:
            raise DomainError(("The transport coefficients %s do not meet the boundary " +
                               "conditions at s=1: f=%g, f'=%g, f''=%g.") % (
                                 _fmt(self.coefficients), f, df, ddf))

    @property
    def d(self):
        return self.x2 - self.x1

    def position(self, t):
        return self.x1 + self.d * self.shape(np.asarray(t) / self.T)

    def velocity(self, t):
        return self.d / self.T * self.shape_velocity(np.asarray(t) / self.T)

    def acceleration(self, t):
        return self.d / self.T**2 * self.shape_acceleration(np.asarray(t) / self.T)

    def stretched(self, T):
        return TransportFunction(self.x1, self.x2, T, self.coefficients)

    def __repr__(self):
        return "<TransportFunction: %g -> %g um in %g us>" % (self.x1, self.x2, self.T)

def _fmt(coefficients):
    return '(%s)' % ', '.join('%g' % c for c in coefficients)

def make_transport_function(x1, x2, T, coefficients=QUINTIC):
    return TransportFunction(x1, x2, T, coefficients)

class VoltageRamp(object):
    r'''
    Voltages sampled on a uniform grid of N >= 2 points over [0, T].
    <values> has shape (N, number of electrodes); in between the samples
    the voltages are interpolated linearly.

    When <u_max> is given, clamped() limits the voltages to +/-u_max.

        >>> from ionshuttle.ramps import VoltageRamp
        >>> ramp = VoltageRamp(2.0, [[-12.0, 3.0], [0.0, 11.0]], u_max=10.0)
        >>> print(ramp.clamped().values)
        [[-10.   3.]
         [  0.  10.]]

        >>> print(ramp.clamped().clamped().values)
        [[-10.   3.]
         [  0.  10.]]

        >>> print(ramp.midpoint(0))
        [-6.  7.]

    The symmetry defect compares the first electrode with the second one
    played backwards:

        >>> print(VoltageRamp(1.0, [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]]).symmetry_defect())
        0.0
    '''
    def __init__(self, T, values, u_max=None):
        values = np.array(values, dtype=float)
        if values.ndim != 2:
            raise ConfigError("The ramp values must be a table of samples x electrodes.")

        if len(values) < 2:
            raise ConfigError("A ramp needs at least 2 samples, got %i." % len(values))

        if not T > 0:
            raise DomainError("The ramp duration must be positive, not %r us." % T)

        if u_max is not None and not u_max > 0:
            raise ConfigError("The maximum voltage must be positive, not %r." % u_max)

        self.T = float(T)
        self.values = values
        self.u_max = None if u_max is None else float(u_max)
        self.times = np.linspace(0.0, self.T, len(values))

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return "<VoltageRamp: %i samples x %i electrodes over %g us>" % (
                    len(self), self.values.shape[1], self.T)

    @property
    def dt(self):
        return self.T / (len(self) - 1)

    @property
    def n_electrodes(self):
        return self.values.shape[1]

    def at(self, t):
        ''' Voltages at the time <t> (linear interpolation). '''
        if t < 0 or t > self.T * (1 + 1e-12):
            raise DomainError("t=%g us is outside the ramp's duration [0, %g] us" % (t, self.T))

        return np.array([np.interp(t, self.times, column) for column in self.values.T])

    def midpoint(self, k):
        return 0.5 * (self.values[k] + self.values[k + 1])

    def max_voltage(self):
        return float(np.max(np.abs(self.values)))

    def clamped(self):
        if self.u_max is None:
            return self.copy()
        return VoltageRamp(self.T, np.clip(self.values, -self.u_max, self.u_max), self.u_max)

    def stretched(self, T):
        return VoltageRamp(T, self.values, self.u_max)

    def copy(self):
        return VoltageRamp(self.T, self.values, self.u_max)

    def symmetry_defect(self):
        if self.n_electrodes != 2:
            raise ConfigError("The symmetry defect is defined for two electrodes only.")
        return float(np.max(np.abs(self.values[:, 0] - self.values[::-1, 1])))

    def save(self, path):
        ''' Write the ramp as CSV: t_us,U1_V,U2_V,... '''
        header = ','.join(['t_us'] + ['U%i_V' % (i + 1) for i in range(self.n_electrodes)])
        np.savetxt(path, np.column_stack([self.times, self.values]), delimiter=',',
                   header=header, comments='', fmt='%.17g')

    @classmethod
    def load(cls, path, u_max=None):
        ''' Read a ramp written by save. The times must be uniform. '''
        with open(path, 'r') as f:
            header = f.readline().strip()

        if not header.startswith('t_us,U1_V'):
            raise ConfigError("The ramp file '%s' must start with a 't_us,U1_V,...' header." % path)

        table = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
        times = table[:, 0]
        T = times[-1]
        if len(times) < 2 or times[0] != 0 or np.max(np.abs(np.diff(times) - T / (len(times) - 1))) > 1e-9 * T:
            raise ConfigError("The ramp file '%s' has no uniform time grid starting at 0." % path)

        return cls(T, table[:, 1:], u_max)

def _well_geometry(model, alpha):
    ''' First and second derivatives of the first two electrodes at
        <alpha> and their determinant D = phi2'' phi1' - phi2' phi1''.
        '''
    if len(model) != 2:
        raise ConfigError("The transport of a well needs exactly two electrodes, the model has %i." % len(model))

    d1 = model.basis(alpha, 1)
    d2 = model.basis(alpha, 2)
    D = d2[1] * d1[0] - d1[1] * d2[0]

    scale = np.max(np.abs(D))
    if not scale > 0 or np.any(np.abs(D) < 1e-12 * scale):
        worst = np.atleast_1d(alpha)[np.argmin(np.abs(np.atleast_1d(D)))]
        raise DegenerateGeometryError(("The electrodes cannot hold a well at x=%g um: " +
                                       "their first and second derivatives are linearly dependent there.") % worst)

    return d1, d2, D

def guess_voltages(model, tf, omega, n_samples=2000, u_max=None):
    r'''
    Initial guess: at each sample the voltages put the well bottom at
    alpha(t) with the curvature m omega^2.

        U1 = -m omega^2 phi2'(alpha) / (e D)
        U2 = +m omega^2 phi1'(alpha) / (e D)

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.ramps import make_transport_function, guess_voltages
        >>> from ionshuttle.units import angular
        >>> model = PotentialModel.surrogate()
        >>> omega = angular(1.3)
        >>> tf = make_transport_function(0.0, 280.0, 0.3)
        >>> ramp = guess_voltages(model, tf, omega, n_samples=201)
        >>> ramp
        <VoltageRamp: 201 samples x 2 electrodes over 0.3 us>

    The well is where it should be, with the right curvature:

        >>> alpha = tf.position(ramp.times)
        >>> forces = [model.potential(u, a)[1] for u, a in zip(ramp.values, alpha)]
        >>> curvatures = [model.potential(u, a)[2] for u, a in zip(ramp.values, alpha)]
        >>> bool(max(abs(f) for f in forces) < 1e-8 * model.mass * omega**2 * model.d)
        True
        >>> bool(max(abs(c / model.mass - omega**2) for c in curvatures) < 1e-8 * omega**2)
        True

    Symmetric electrodes give a mirror symmetric ramp:

        >>> bool(ramp.symmetry_defect() < 1e-9)
        True

        >>> print("%.2f" % ramp.max_voltage())
        9.23
    '''
    times = np.linspace(0.0, tf.T, n_samples)
    alpha = tf.position(times)
    model.check_domain(alpha)

    d1, d2, D = _well_geometry(model, alpha)
    scale = model.mass * omega**2 / (CHARGE_VOLT * D)
    values = np.column_stack([-scale * d1[1], scale * d1[0]])
    return VoltageRamp(tf.T, values, u_max)
