'''
Electrode potentials of a segmented trap and the potential energy of
an ion for a given set of electrode voltages.

Each electrode is described by its dimensionless potential phi(x): the
potential that the electrode creates when it is biased with 1 V and all
the others are grounded. The ion's potential energy is then linear in
the voltages:

    V(x) = e * sum_i U_i phi_i(x)

Three kinds of electrode are supported: an ideal harmonic one, a
closed form surrogate of a real segment and a Legendre series fitted
to tabulated data.

>>> from ionshuttle.trap import PotentialModel, calibrate_bias
>>> from ionshuttle.units import angular

>>> model = PotentialModel.surrogate()
>>> model
<PotentialModel: 2 surrogate electrodes at 0, 280 um; window [-140, 420] um; mass 40 amu>

The bias that makes a 1.3 MHz well on top of the first segment:

>>> omega = angular(1.3)
>>> bias = calibrate_bias(model, 0, omega)
>>> print("%.2f" % bias)
-6.31

>>> V, dV, d2V = model.potential([bias, 0], 0.0)
>>> abs(d2V / model.mass - omega**2) < 1e-6 * omega**2
True

Outside the working window the model is not valid:

>>> model.potential([bias, 0], 500.0)
Traceback (most recent call last):
<...>
ionshuttle.errors.DomainError: position 500 um is outside the working window [-140, 420] um
'''

import numpy as np
from numpy.polynomial import Legendre
from scipy.optimize import brentq

from .errors import DomainError, CalibrationError, FitError, ConfigError
from .units import CHARGE_VOLT, CALCIUM_40

class ElectrodePotential(object):
    ''' The potential of one electrode for a 1 V bias, centered at
        <center> (um).

        Subclasses implement value and derivative; delta has a generic
        (cancellation prone) implementation that subclasses refine.
        '''
    backend = None
    max_order = None

    def __init__(self, center):
        self.center = float(center)

    def value(self, x):
        raise NotImplementedError() # pragma: no cover

    def derivative(self, x, order):
        raise NotImplementedError() # pragma: no cover

    def delta(self, x0, y):
        ''' Return phi(x0 + y) - phi(x0). '''
        y = np.asarray(y, dtype=float)
        return self.value(x0 + y) - self.value(x0)

    def scaled(self, factor):
        ''' Return the electrode of a geometry stretched by <factor>
            around the origin: phi_new(x) = phi(x / factor).
            '''
        raise NotImplementedError() # pragma: no cover

    def _check_order(self, order):
        if order < 0 or (self.max_order is not None and order > self.max_order):
            raise ValueError("Derivative of order %i is not supported by the %s backend." % (
                                order, self.backend))

    def __repr__(self):
        return "<%s electrode at %g um>" % (self.backend, self.center)

class HarmonicElectrode(ElectrodePotential):
    r'''
    Ideal electrode: phi = -k/2 (x - c)^2.

    It is the top of the bump of a real electrode, whose potential
    phi >= 0 peaks at c, with the constant height dropped: a constant
    moves no ion, so phi here is <= 0 and only its shape is kept. Like
    the bump, it traps with a negative bias and pushes away with a
    positive one. Its curvature <curvature> is per volt, in 1/um^2.

        >>> from ionshuttle.trap import HarmonicElectrode
        >>> e = HarmonicElectrode(0.0, 2.0)
        >>> print(e.value(3.0), e.derivative(3.0, 1), e.derivative(3.0, 2))
        -9.0 -6.0 -2.0

    At -1 V the ion sits in a well of curvature k at c, the same well as
    the one of a bump with any height:

        >>> bias = -1.0
        >>> print(bias * e.derivative(0.0, 1), bias * e.derivative(0.0, 2))
        0.0 2.0

        >>> bool(e.delta(1e6, 1e-9) == -2.0 * 1e-9 * (0.5e-9 + 1e6))
        True
    '''
    backend = 'harmonic'

    def __init__(self, center, curvature):
        ElectrodePotential.__init__(self, center)
        if not curvature > 0:
            raise ConfigError("The curvature of a harmonic electrode must be positive, not %r." % curvature)
        self.curvature = float(curvature)

    def value(self, x):
        return -0.5 * self.curvature * (np.asarray(x, dtype=float) - self.center)**2

    def derivative(self, x, order):
        self._check_order(order)
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self.value(x)
        elif order == 1:
            return -self.curvature * (x - self.center)
        elif order == 2:
            return -self.curvature * np.ones_like(x)
        return np.zeros_like(x)

    def delta(self, x0, y):
        y = np.asarray(y, dtype=float)
        return -0.5 * self.curvature * y * (y + 2 * (x0 - self.center))

    def scaled(self, factor):
        return HarmonicElectrode(self.center * factor, self.curvature / factor**2)

class SurrogateElectrode(ElectrodePotential):
    r'''
    Closed form model of a segment of width <width> whose ion sits
    at a height <height> above the surface (both in um):

        phi = (atan((x - c + w/2)/h) - atan((x - c - w/2)/h)) / pi

    It peaks at the center and decays monotonically away from it.

        >>> from ionshuttle.trap import SurrogateElectrode
        >>> e = SurrogateElectrode(0.0, 240.0, 295.0)
        >>> print("%.3f" % e.value(0.0))
        0.246

        >>> float(e.value(100.0)) > float(e.value(300.0)) > float(e.value(600.0)) > 0
        True

    Its delta is computed with an arctangent identity so it keeps full
    precision even for tiny displacements:

        >>> d = e.delta(130.0, 1e-7)
        >>> bool(abs(d / (1e-7 * e.derivative(130.0, 1)) - 1) < 1e-6)
        True
    '''
    backend = 'surrogate'
    max_order = 3

    def __init__(self, center, width, height):
        ElectrodePotential.__init__(self, center)
        if not width > 0 or not height > 0:
            raise ConfigError("The width and the height of a surrogate electrode must be positive.")
        self.width = float(width)
        self.height = float(height)

    def _args(self, x):
        x = np.asarray(x, dtype=float)
        h = self.height
        return (x - self.center + self.width / 2) / h, (x - self.center - self.width / 2) / h

    def value(self, x):
        up, um = self._args(x)
        return (np.arctan(up) - np.arctan(um)) / np.pi

    def derivative(self, x, order):
        self._check_order(order)
        if order == 0:
            return self.value(x)

        up, um = self._args(x)
        h = self.height
        if order == 1:
            f = lambda u: 1 / (1 + u**2)
        elif order == 2:
            f = lambda u: -2 * u / (1 + u**2)**2
        else:
            f = lambda u: (6 * u**2 - 2) / (1 + u**2)**3

        return (f(up) - f(um)) / (np.pi * h**order)

    def delta(self, x0, y):
        # atan(a) - atan(b) == atan2(a - b, 1 + a*b) and here a - b == y/h
        y = np.asarray(y, dtype=float)
        h = self.height
        up0, um0 = self._args(x0)
        s = y / h
        up1, um1 = up0 + s, um0 + s
        return (np.arctan2(s, 1 + up0 * up1) - np.arctan2(s, 1 + um0 * um1)) / np.pi

    def scaled(self, factor):
        return SurrogateElectrode(self.center * factor, self.width * factor,
                                  self.height * factor)

class SeriesElectrode(ElectrodePotential):
    r'''
    Electrode described by a Legendre series (see fit_tabulated).

        >>> from numpy.polynomial import Legendre
        >>> from ionshuttle.trap import SeriesElectrode
        >>> series = Legendre.fit([0., 1., 2., 3., 4.], [0., 1., 4., 9., 16.], 2)
        >>> e = SeriesElectrode(2.0, series)
        >>> print("%.6f %.6f" % (e.value(1.5), e.derivative(1.5, 1)))
        2.250000 3.000000

        >>> print("%.6f" % e.delta(1.5, 0.5))
        1.750000
    '''
    backend = 'tabulated-fit'

    def __init__(self, center, series):
        ElectrodePotential.__init__(self, center)
        self.series = series
        self.derivatives = [series]
        for _ in range(series.degree()):
            self.derivatives.append(self.derivatives[-1].deriv())

    def value(self, x):
        return self.series(np.asarray(x, dtype=float))

    def derivative(self, x, order):
        self._check_order(order)
        x = np.asarray(x, dtype=float)
        if order >= len(self.derivatives):
            return np.zeros_like(x)
        return self.derivatives[order](x)

    def delta(self, x0, y):
        if np.ndim(x0) != 0:
            return ElectrodePotential.delta(self, x0, y)

        # Taylor expansion around x0; exact for a polynomial
        y = np.asarray(y, dtype=float)
        coefficients = [float(d(x0)) for d in self.derivatives]
        acc = np.zeros_like(y)
        factorial = float(np.prod(np.arange(1, len(coefficients), dtype=float)))
        for k in range(len(coefficients) - 1, 0, -1):
            acc = (acc + coefficients[k] / factorial) * y
            factorial /= k
        return acc

    def scaled(self, factor):
        series = Legendre(self.series.coef, domain=np.asarray(self.series.domain) * factor)
        return SeriesElectrode(self.center * factor, series)

class PotentialModel(object):
    r'''
    An ordered set of electrodes (at least 2, with strictly increasing
    centers), the mass of the ion (amu) and the working window
    [x_lo, x_hi] (um) where the model is trusted.

    The model is immutable.

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.units import angular
        >>> omega = angular(1.3)
        >>> model = PotentialModel.harmonic(omega_per_volt=omega)

    The harmonic backend is exact: U = (-u, 0) makes the well
    V = m w0^2 u (x - x1)^2 / 2

        >>> V, dV, d2V = model.potential([-1.0, 0.0], 0.0)
        >>> abs(dV) < 1e-12, abs(d2V - 40 * omega**2) < 1e-9
        (True, True)

        >>> V, dV, d2V = model.potential([-2.0, 0.0], 3.0)
        >>> abs(V - 0.5 * 40 * omega**2 * 2.0 * 9.0) < 1e-9
        True

    The potential is linear in the voltages and zero for grounded
    electrodes:

        >>> [abs(v) for v in model.potential([0.0, 0.0], 10.0)]
        [0.0, 0.0, 0.0]

    Voltages must match the electrodes:

        >>> model.potential([1.0], 10.0)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.ConfigError: Expected 2 voltages, one per electrode, but got 1.
    '''

    def __init__(self, electrodes, mass=CALCIUM_40, window=None):
        electrodes = tuple(electrodes)
        if len(electrodes) < 2:
            raise ConfigError("A potential model needs at least 2 electrodes, got %i." % len(electrodes))

        centers = np.array([e.center for e in electrodes])
        if np.any(np.diff(centers) <= 0):
            raise ConfigError("The electrode centers must be strictly increasing: %s." % centers)

        if not mass > 0:
            raise ConfigError("The mass must be positive, not %r." % mass)

        if window is None:
            d = centers[1] - centers[0]
            window = (centers[0] - d / 2, centers[-1] + d / 2)

        lo, hi = [float(w) for w in window]
        if not lo < hi:
            raise ConfigError("Invalid working window [%g, %g]." % (lo, hi))

        self.electrodes = electrodes
        self.mass = float(mass)
        self.window = (lo, hi)
        self.centers = centers
        self.fit_residual = None

    @classmethod
    def harmonic(cls, x1=0.0, d=280.0, mass=CALCIUM_40, curvature=None,
                        omega_per_volt=None, window=None):
        ''' Two ideal harmonic electrodes at x1 and x1 + d.

            The per volt curvature is given directly (1/um^2) or as the
            trap frequency (rad/us) that a -1 V bias creates.
            '''
        if (curvature is None) == (omega_per_volt is None):
            raise ConfigError("Give the curvature or the omega per volt of the harmonic electrodes, but not both.")

        if curvature is None:
            curvature = mass * omega_per_volt**2 / CHARGE_VOLT

        electrodes = [HarmonicElectrode(x1, curvature),
                      HarmonicElectrode(x1 + d, curvature)]
        return cls(electrodes, mass, window)

    @classmethod
    def surrogate(cls, x1=0.0, d=280.0, width=240.0, height=295.0,
                        mass=CALCIUM_40, window=None):
        electrodes = [SurrogateElectrode(x1, width, height),
                      SurrogateElectrode(x1 + d, width, height)]
        return cls(electrodes, mass, window)

    @classmethod
    def from_table(cls, table, degree=24, mass=CALCIUM_40, centers=None):
        ''' Fit a Legendre series to the tabulated potentials.

            <table> is the path of a CSV file (see load_table) or an
            array of rows (x, phi_1, phi_2, ...). The working window is
            the span of the table.
            '''
        if isinstance(table, str):
            table = load_table(table)

        table = np.asarray(table, dtype=float)
        electrodes, residual = fit_tabulated(table, degree, centers)
        model = cls(electrodes, mass, (table[0, 0], table[-1, 0]))
        model.fit_residual = residual
        return model

    def __len__(self):
        return len(self.electrodes)

    def __repr__(self):
        backends = set(e.backend for e in self.electrodes)
        return "<PotentialModel: %i %s electrodes at %s um; window [%g, %g] um; mass %g amu>" % (
                    len(self), '/'.join(sorted(backends)),
                    ', '.join('%g' % c for c in self.centers),
                    self.window[0], self.window[1], self.mass)

    @property
    def d(self):
        ''' Distance between the first two electrodes. '''
        return self.centers[1] - self.centers[0]

    @property
    def backend(self):
        return self.electrodes[0].backend

    def scaled(self, factor):
        ''' Return the model of the same trap with every length
            multiplied by <factor>.
            '''
        if not factor > 0:
            raise ConfigError("The scale factor must be positive, not %r." % factor)

        electrodes = [e.scaled(factor) for e in self.electrodes]
        window = (self.window[0] * factor, self.window[1] * factor)
        return PotentialModel(electrodes, self.mass, window)

    def contains(self, x):
        lo, hi = self.window
        x = np.asarray(x)
        return bool(np.all((x >= lo) & (x <= hi)))

    def check_domain(self, x):
        if not self.contains(x):
            x = np.asarray(x, dtype=float)
            lo, hi = self.window
            worst = x.flat[np.argmax(np.maximum(lo - x, x - hi))]
            raise DomainError("position %g um is outside the working window [%g, %g] um" % (
                                    worst, lo, hi))

    def _voltages(self, voltages):
        voltages = np.asarray(voltages, dtype=float)
        if voltages.shape[-1:] != (len(self),):
            raise ConfigError("Expected %i voltages, one per electrode, but got %i." % (
                                    len(self), voltages.shape[-1] if voltages.ndim else 1))
        return voltages

    def basis(self, x, order=0):
        ''' Return the <order> derivative of each electrode potential
            at <x> stacked along the first axis.
            '''
        return np.array([e.derivative(x, order) for e in self.electrodes])

    def _combine(self, voltages, values):
        # values has shape (n_electrodes,) + shape(x)
        return CHARGE_VOLT * np.tensordot(voltages, values, axes=(0, 0))

    def potential(self, voltages, x):
        ''' Return V, V' and V'' at <x> for the given <voltages>.
            Energies are in amu um^2/us^2.
            '''
        voltages = self._voltages(voltages)
        self.check_domain(x)

        out = tuple(self._combine(voltages, self.basis(x, order)) for order in (0, 1, 2))
        if np.ndim(x) == 0:
            out = tuple(float(v) for v in out)
        return out

    def energy(self, voltages, x):
        ''' V(x), without checking the window. '''
        return self._combine(self._voltages(voltages), self.basis(x, 0))

    def acceleration(self, voltages, x):
        ''' -V'(x)/m, without checking the window. '''
        return -self._combine(self._voltages(voltages), self.basis(x, 1)) / self.mass

    def curvature(self, voltages, x):
        ''' V''(x), without checking the window. '''
        return self._combine(self._voltages(voltages), self.basis(x, 2))

    def along(self, values, x, order):
        ''' e * sum_i U_i(t_k) phi_i^(order)(x_k) along a path: <values>
            has one row of voltages per position in <x>.
            '''
        values = self._voltages(values)
        return CHARGE_VOLT * np.einsum('ki,ik->k', values, self.basis(np.asarray(x, dtype=float), order))

    def window_potential(self, voltages, x0, y):
        ''' Return V(x0 + y) - V(x0) keeping full precision for
            small <y>.
            '''
        voltages = self._voltages(voltages)
        deltas = np.array([e.delta(x0, y) for e in self.electrodes])
        return self._combine(voltages, deltas)

def calibrate_bias(model, index, omega):
    r'''
    Return the bias of the electrode <index> (all the others grounded)
    that creates a well of angular frequency <omega> (rad/us) at the
    electrode's center.

        >>> from ionshuttle.trap import PotentialModel, calibrate_bias
        >>> from ionshuttle.units import angular
        >>> w0 = angular(1.0)
        >>> model = PotentialModel.harmonic(omega_per_volt=w0)
        >>> print("%.9f" % calibrate_bias(model, 1, w0))
        -1.000000000

    Doubling the frequency quadruples the bias:

        >>> print("%.9f" % calibrate_bias(model, 1, 2 * w0))
        -4.000000000
    '''
    electrode = model.electrodes[index]
    k = float(electrode.derivative(electrode.center, 2))
    if k == 0 or not np.isfinite(k):
        raise CalibrationError("The electrode %i has no curvature at its center: " % index +
                               "no bias can create a well there.")

    target = model.mass * omega**2
    sign = -1.0 if k < 0 else 1.0

    def mismatch(u):
        return CHARGE_VOLT * u * k - target

    hi = sign
    while mismatch(hi) < 0:
        hi *= 2
        if abs(hi) > 1e300:
            raise CalibrationError("No bias found for omega=%g rad/us." % omega) # pragma: no cover

    return brentq(mismatch, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)

def fit_tabulated(samples, degree=24, centers=None):
    r'''
    Fit a least squares Legendre series to each tabulated electrode
    potential. <samples> has one row per position: (x, phi_1, phi_2, ...).

    Return the SeriesElectrode list and the maximum absolute residual.

        >>> import numpy as np
        >>> from ionshuttle.trap import fit_tabulated
        >>> x = np.linspace(-1, 1, 40)
        >>> samples = np.column_stack([x, x**4 - x, 0.5 * x**4 + x**2])
        >>> electrodes, residual = fit_tabulated(samples, degree=4, centers=[-0.5, 0.5])
        >>> residual < 1e-12
        True

    The fit needs enough samples:

        >>> fit_tabulated(samples[:3], degree=4)
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.FitError: A fit of degree 4 needs at least 16 samples but only 3 were given.

    If no <centers> are given, each electrode is centered where its
    potential peaks.
    '''
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] < 3:
        raise FitError("The table must have a column of positions and one column per electrode (at least 2).")

    x = samples[:, 0]
    if len(x) < 4 * degree:
        raise FitError("A fit of degree %i needs at least %i samples but only %i were given." % (
                            degree, 4 * degree, len(x)))

    if np.any(np.diff(x) <= 0):
        raise FitError("The positions of the table must be strictly increasing.")

    domain = [x[0], x[-1]]
    mapped = Legendre.basis(1, domain=domain).mapparms()
    vander = np.polynomial.legendre.legvander(mapped[0] + mapped[1] * x, degree)

    cond = np.linalg.cond(vander)
    if cond > 1e12:
        raise FitError("The fit of degree %i is ill conditioned (condition number %.3g); " % (degree, cond) +
                       "try a lower degree.")

    phis = samples[:, 1:]
    if centers is None:
        centers = [x[np.argmax(np.abs(phi))] for phi in phis.T]

    if len(centers) != phis.shape[1]:
        raise FitError("Expected %i centers but got %i." % (phis.shape[1], len(centers)))

    electrodes = []
    residual = 0.0
    for center, phi in zip(centers, phis.T):
        coef = np.linalg.lstsq(vander, phi, rcond=None)[0]
        residual = max(residual, float(np.max(np.abs(vander.dot(coef) - phi))))
        electrodes.append(SeriesElectrode(center, Legendre(coef, domain=domain)))

    return electrodes, residual

def load_table(path):
    r'''
    Read a CSV table of electrode potentials with a header like
    ``x_um,phi1,phi2``.
    '''
    with open(path, 'r') as f:
        header = f.readline().strip()

    columns = [c.strip() for c in header.split(',')]
    expected = ['x_um'] + ['phi%i' % (i + 1) for i in range(len(columns) - 1)]
    if len(columns) < 3 or columns != expected:
        raise ConfigError("The table '%s' must start with the header '%s', not '%s'." % (
                                path, ','.join(expected if len(expected) >= 3 else ['x_um', 'phi1', 'phi2']),
                                header))

    return np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
