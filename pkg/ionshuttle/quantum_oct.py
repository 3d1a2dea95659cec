'''
Krotov optimization of a voltage ramp against the quantum motion.

The figure of merit is the infidelity of the final wavepacket with
respect to a target state:

    J_T = 1 - |<psi_tgt|psi(T)>|^2

Each iteration propagates the costate chi(T) = <psi_tgt|psi(T)> psi_tgt
backwards and then sweeps forward updating each sample right away:

    dU_i(t) = (S(t) / lambda_a) Im <chi(t)|phi_i|psi(t)>

The step size policy is the same as the one of the classical
optimization (see classical_oct.StepControl).
'''

import collections
import numpy as np

from .common import log
from .concern import Concern
from .errors import ConfigError, DomainError, GuessTooPoorError, NumericalError, ShuttleError
from .classical_oct import (OptimizationReport, OptimizationConfig, StepControl,
                            _trapezoid_weights, optimize_classical)
from .quantum import (Propagator, propagate_quantum, overlap, projections, fidelity,
                      ground_state)
from .analytic import iea_ramp
from .ramps import VoltageRamp, guess_voltages
from .units import HBAR, CHARGE_VOLT, PLANCK

def _final_fidelity(model, ramp, psi0, target, tolerance, store):
    traj = propagate_quantum(model, ramp, psi0, tolerance=tolerance, store=store, observe=False)
    return traj, fidelity(traj.final, target)

def _costates(model, ramp, traj, target, tolerance):
    ''' chi(t) at every sample, from chi(T) = <tgt|psi(T)> tgt. '''
    tau = overlap(target, traj.final)
    chi = target.copy()
    chi.psi = chi.psi * tau
    back = propagate_quantum(model, ramp, chi, tolerance=tolerance, store=True, observe=False,
                             backward=True)
    return back.states

def _electrodes_on(model, state):
    return model.basis(state.lab_positions, 0)

def quantum_gradient(model, ramp, psi0, target, tolerance=1e-12):
    r'''
    First order sensitivity dJ_T/dU of the infidelity to each sample of
    each electrode (shape: samples x electrodes):

        dJ_T/dU_i(t_k) = -(2 e / hbar) Im <chi(t_k)|phi_i|psi(t_k)> w_k

    with w_k the trapezoid weights.
    '''
    traj, _ = _final_fidelity(model, ramp, psi0, target, tolerance, store=True)
    chis = _costates(model, ramp, traj, target, tolerance)

    rows = [np.imag(projections(chi, psi, _electrodes_on(model, psi)))
            for chi, psi in zip(chis, traj.states)]
    weights = _trapezoid_weights(len(ramp), ramp.dt)
    return -(2 * CHARGE_VOLT / HBAR) * weights[:, None] * np.array(rows)

def _sweep(model, ramp, psi0, chis, shape, lambda_a, u_max, tolerance):
    propagator = Propagator(model, psi0.grid, tolerance)
    old = ramp.values
    new = old.copy()
    n = len(ramp)
    dt = ramp.dt

    state = psi0.copy()
    state.t = 0.0
    norm0 = state.norm()
    state = propagator.recenter(state)

    max_du = 0.0
    penalty = 0.0
    for k in range(n):
        if shape[k] > 0:
            g = np.imag(projections(chis[k], state, _electrodes_on(model, state)))
            updated = old[k] + (shape[k] / lambda_a) * g
            if u_max is not None:
                updated = np.clip(updated, -u_max, u_max)

            du = updated - old[k]
            max_du = max(max_du, float(np.max(np.abs(du))))
            penalty += dt * lambda_a / shape[k] * float(np.sum(du**2))
            new[k] = updated

        if k < n - 1:
            state = propagator.advance(state, ramp, k, k + 1, new[k], old[k+1], norm0)

    return new, max_du, penalty

def _auto_lambda(model, ramp, traj, chis, shape, u_max):
    largest = 0.0
    for s, chi, psi in zip(shape, chis, traj.states):
        if s > 0:
            g = np.imag(projections(chi, psi, _electrodes_on(model, psi)))
            largest = max(largest, s * float(np.max(np.abs(g))))

    reference = u_max if u_max is not None else ramp.max_voltage()
    if largest == 0 or reference == 0:
        return 1.0
    return largest / (0.01 * reference)

def optimize_quantum(model, guess, psi0, target, config, grid=None, concerns=None,
                        tolerance=1e-12):
    r'''
    Optimize the ramp <guess> so the state <psi0> ends as close as
    possible to <target>. The config.target is the infidelity to reach.

    Return an OptimizationReport with the optimized ramp in its 'ramp'
    attribute.

    The guess must already overlap with the target; if not, optimize it
    classically first or use the IEA ramp:

        >>> import numpy as np
        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.ramps import VoltageRamp
        >>> from ionshuttle.quantum import GridSpec, ground_state
        >>> from ionshuttle.quantum_oct import optimize_quantum
        >>> from ionshuttle.classical_oct import OptimizationConfig
        >>> from ionshuttle.units import angular

        >>> omega = angular(1.3)
        >>> model = PotentialModel.harmonic(omega_per_volt=omega)
        >>> psi0 = ground_state(model, [-1.0, 0.0], 0.0, GridSpec(64))
        >>> target = ground_state(model, [0.0, -1.0], 280.0, GridSpec(64))
        >>> ramp = VoltageRamp(0.2, [[-1.0, 0.0]] * 21)
        >>> optimize_quantum(model, ramp, psi0, target, OptimizationConfig(u_max=10))
        Traceback (most recent call last):
        <...>
        ionshuttle.errors.GuessTooPoorError: The guess reaches a fidelity of 0 with the target; the optimization needs at least 1e-06. Start from a classically optimized or an IEA ramp.
    '''
    concerns = concerns or Concern()
    if grid is not None and grid != psi0.grid:
        raise ConfigError("The grid %r does not match the grid of the initial state %r." % (grid, psi0.grid))

    u_max = config.u_max if config.u_max is not None else guess.u_max
    ramp = VoltageRamp(guess.T, guess.values, u_max).clamped()
    shape = config.shape_on(ramp.times)

    report = OptimizationReport('quantum', config)
    traj, F = _final_fidelity(model, ramp, psi0, target, tolerance, store=True)
    if F < 1e-6:
        raise GuessTooPoorError(("The guess reaches a fidelity of %.3g with the target; the optimization " +
                                 "needs at least 1e-06. Start from a classically optimized or an IEA ramp.") % F)

    concerns.start_optimization('quantum', config)
    J_T = 1 - F

    lambda_a = config.lambda_a
    if lambda_a == 'auto':
        chis = _costates(model, ramp, traj, target, tolerance)
        lambda_a = _auto_lambda(model, ramp, traj, chis, shape, u_max)

    control = StepControl(config, lambda_a, 'quantum')
    entry = report.record(iteration=0, J=J_T, J_T=J_T, fidelity=F, max_du=0.0,
                          lambda_a=lambda_a, accepted=True)
    concerns.iteration('quantum', entry)

    for iteration in range(1, config.max_iterations + 1):
        if J_T < config.target:
            break

        lambda_a = control.lambda_a
        chis = _costates(model, ramp, traj, target, tolerance)
        try:
            values, max_du, penalty = _sweep(model, ramp, psi0, chis, shape, lambda_a, u_max, tolerance)
            candidate = VoltageRamp(ramp.T, values, u_max)
            candidate_traj, candidate_F = _final_fidelity(model, candidate, psi0, target, tolerance, store=True)
            candidate_J_T = 1 - candidate_F
        except NumericalError as e:
            log("Iteration %i: the update broke the propagation (%s)." % (iteration, e), 'chat', concerns)
            max_du = penalty = float('nan')
            candidate_F, candidate_J_T = 0.0, float('inf')

        accepted = control.judge(J_T, candidate_J_T)
        entry = report.record(iteration=iteration, J=candidate_J_T + penalty, J_T=candidate_J_T,
                              fidelity=candidate_F, max_du=max_du, lambda_a=lambda_a,
                              accepted=accepted)
        concerns.iteration('quantum', entry)

        if accepted:
            ramp, traj, F, J_T = candidate, candidate_traj, candidate_F, candidate_J_T
        elif not config.adapt:
            break
        else:
            log("Iteration %i rejected (J_T %g -> %g); lambda_a doubled to %g." % (
                    iteration, J_T, candidate_J_T, control.lambda_a), 'chat', concerns)

    report.converged = bool(J_T < config.target)
    report.unstable = control.unstable
    report.ramp = ramp
    concerns.finish_optimization('quantum', report)
    return report

def phase_space_volume(mass, d, omega):
    r'''
    The phase space covered by the transport in units of Planck's
    constant: m d^2 w / (2 pi h). It is 1 / (8 pi^2 xi^2) with
    xi = sigma0 / d.

        >>> from ionshuttle.quantum_oct import phase_space_volume
        >>> from ionshuttle.units import angular, ground_state_width
        >>> import numpy as np
        >>> omega = angular(1.3)
        >>> xi = ground_state_width(40, omega) / 280.0
        >>> bool(abs(phase_space_volume(40, 280.0, omega) * 8 * np.pi**2 * xi**2 - 1) < 1e-12)
        True
    '''
    return mass * d**2 * omega / (2 * np.pi * PLANCK)

def force_inhomogeneity(model, iea, tf, sigma0):
    r'''
    How much the compensation force of the IEA ramp changes across the
    wavepacket, |dF / F|, at the sample with the largest acceleration:

        dF = -e sum_i (phi_i'(alpha + s0) - phi_i'(alpha - s0)) dU_i
        F = m alpha''

    Ideal harmonic electrodes push uniformly:

        >>> from ionshuttle.trap import PotentialModel
        >>> from ionshuttle.ramps import make_transport_function
        >>> from ionshuttle.analytic import iea_ramp
        >>> from ionshuttle.quantum_oct import force_inhomogeneity
        >>> from ionshuttle.units import angular, ground_state_width
        >>> omega = angular(1.3)
        >>> model = PotentialModel.harmonic(omega_per_volt=omega)
        >>> tf = make_transport_function(0.0, 280.0, 0.5)
        >>> iea = iea_ramp(model, tf, omega, 501)
        >>> sigma0 = ground_state_width(40, omega)
        >>> bool(force_inhomogeneity(model, iea, tf, sigma0) < 1e-9)
        True

    The surrogate electrodes do not, and less so for a wider packet:

        >>> model = PotentialModel.surrogate()
        >>> iea = iea_ramp(model, tf, omega, 501)
        >>> narrow = force_inhomogeneity(model, iea, tf, sigma0)
        >>> wide = force_inhomogeneity(model, iea, tf, 100 * sigma0)
        >>> bool(narrow < wide)
        True
    '''
    times = iea.compensation.times
    accel = tf.acceleration(times)
    k = int(np.argmax(np.abs(accel)))

    F = model.mass * float(accel[k])
    if F == 0:
        raise DomainError("The transport does not accelerate: the force inhomogeneity is undefined.")

    alpha = float(tf.position(times[k]))
    du = iea.compensation.values[k]
    slopes = model.basis(alpha + sigma0, 1) - model.basis(alpha - sigma0, 1)
    dF = -CHARGE_VOLT * float(np.dot(slopes, du))
    return abs(dF / F)

ConvergenceStudyPoint = collections.namedtuple('ConvergenceStudyPoint',
                            ['xi', 'lambda_a', 'mean_dj', 'final_fidelity', 'unstable'])

def study_point(task, xi, lambda_a, iterations=100):
    r'''
    One point of the convergence study: the task scaled to <xi>, seeded
    with its classical optimum and then <iterations> quantum iterations
    with the fixed <lambda_a>.

    The initial state is the ground state of the first well of the
    seed; the target, the ground state of the last one.
    '''
    scaled = task.scaled_to_xi(xi)
    model = scaled.build_model()
    omega = scaled.omega
    tf = scaled.transport_function()

    guess = guess_voltages(model, tf, omega, scaled.n_samples, scaled.u_max)
    classical = OptimizationConfig(u_max=scaled.u_max, omega=omega, x_target=tf.x2,
                                   lambda_a='auto', max_iterations=scaled.max_iterations)
    try:
        seed = optimize_classical(model, guess, classical).ramp
    except ShuttleError:
        seed = guess

    grid = scaled.grid()
    psi0 = ground_state(model, seed.values[0], tf.x1, grid)
    target = ground_state(model, guess.values[-1], tf.x2, grid)

    config = OptimizationConfig(u_max=scaled.u_max, lambda_a=lambda_a,
                                max_iterations=iterations, target=0.0, adapt=False)
    try:
        report = optimize_quantum(model, seed, psi0, target, config)
    except NumericalError:
        return ConvergenceStudyPoint(xi, lambda_a, float('nan'), 0.0, True)

    accepted = report.accepted
    J0 = accepted[0]['J_T']
    J_end = accepted[-1]['J_T']
    unstable = report.unstable or report.iterations < iterations
    return ConvergenceStudyPoint(xi, lambda_a, (J0 - J_end) / iterations,
                                 accepted[-1]['fidelity'], bool(unstable))

def convergence_study(task, xis, lambdas, iterations=100, jobs=None, concerns=None):
    r'''
    Run study_point for every pair of <xis> and <lambdas>, in parallel
    if a Jobs pool is given. The points come back in the order of the
    pairs.
    '''
    from .jobs import Jobs
    import functools

    concerns = concerns or Concern()
    pairs = [(float(xi), float(lambda_a)) for xi in xis for lambda_a in lambdas]
    for xi, lambda_a in pairs:
        if not xi > 0 or not lambda_a > 0:
            raise ConfigError("The convergence study needs positive xi and lambda_a, not (%r, %r)." % (xi, lambda_a))

    jobs = jobs or Jobs(1, 0)
    concerns.start_scan('convergence', pairs)
    func = functools.partial(_study_point_of, task, iterations)
    points = jobs.map(func, pairs, on_result=lambda pair, point: concerns.scan_point('convergence', pair, point))
    concerns.finish_scan('convergence')
    return points

def _study_point_of(task, iterations, pair):
    xi, lambda_a = pair
    return study_point(task, xi, lambda_a, iterations)

def save_convergence_study(points, path):
    with open(path, 'w') as f:
        f.write("xi,lambda_a,mean_dJ,final_fidelity,unstable_flag\n")
        for p in points:
            f.write("%.17g,%.17g,%.17g,%.17g,%i\n" % (p.xi, p.lambda_a, p.mean_dj,
                                                     p.final_fidelity, int(p.unstable)))

CompensationPoint = collections.namedtuple('CompensationPoint',
                            ['xi', 'df_over_f', 'iea_fidelity', 'qoct_fidelity'])

def compensation_point(task, xi, qoct_fidelity=float('nan')):
    r'''
    How well the IEA ramp of the task scaled to <xi> still works: the
    force inhomogeneity across the ground state (see
    force_inhomogeneity) and the fidelity of the IEA ramp under the
    quantum dynamics, against the same target as study_point.

    <qoct_fidelity> is carried along so a row of the table holds the
    fidelity that the quantum optimization reached for this xi.
    '''
    scaled = task.scaled_to_xi(xi)
    model = scaled.build_model()
    tf = scaled.transport_function()

    iea = iea_ramp(model, tf, scaled.omega, scaled.n_samples)
    df_over_f = force_inhomogeneity(model, iea, tf, scaled.sigma0)

    grid = scaled.grid()
    psi0 = ground_state(model, iea.total.values[0], tf.x1, grid)
    target = ground_state(model, iea.base.values[-1], tf.x2, grid)
    try:
        _, F = _final_fidelity(model, iea.total, psi0, target, scaled.tolerance, False)
    except NumericalError:
        F = float('nan')

    return CompensationPoint(float(xi), df_over_f, float(F), float(qoct_fidelity))

def best_fidelities(points):
    ''' The highest final fidelity of the stable study points of each
        xi (nan if none is stable).

            >>> from ionshuttle.quantum_oct import ConvergenceStudyPoint, best_fidelities
            >>> points = [ConvergenceStudyPoint(0.05, 1e3, 1e-4, 0.9991, False),
            ...           ConvergenceStudyPoint(0.05, 1e2, 1e-3, 0.9999, True),
            ...           ConvergenceStudyPoint(0.4, 1e3, 1e-3, 0.9995, False)]
            >>> best_fidelities(points)
            {0.05: 0.9991, 0.4: 0.9995}
        '''
    best = {}
    for p in points:
        best.setdefault(p.xi, float('nan'))
        if not p.unstable and not p.final_fidelity <= best[p.xi]:
            best[p.xi] = p.final_fidelity
    return best

def compensation_table(task, xis, points=(), jobs=None, concerns=None):
    r'''
    A CompensationPoint for each of <xis>, in parallel if a Jobs pool
    is given. The quantum optimized fidelity of each row is the best
    one of the convergence study <points> for that xi.
    '''
    from .jobs import Jobs
    import functools

    concerns = concerns or Concern()
    xis = [float(xi) for xi in xis]
    for xi in xis:
        if not xi > 0:
            raise ConfigError("The compensation table needs positive xi, not %r." % (xi, ))

    best = best_fidelities(points)
    pairs = [(xi, best.get(xi, float('nan'))) for xi in xis]

    jobs = jobs or Jobs(1, 0)
    concerns.start_scan('compensation', xis)
    func = functools.partial(_compensation_point_of, task)
    rows = jobs.map(func, pairs, on_result=lambda pair, row: concerns.scan_point('compensation', pair[0], row))
    concerns.finish_scan('compensation')
    return rows

def _compensation_point_of(task, pair):
    xi, qoct_fidelity = pair
    return compensation_point(task, xi, qoct_fidelity)

def save_compensation_table(rows, path):
    with open(path, 'w') as f:
        f.write("xi,dF_over_F,iea_fidelity,qoct_fidelity\n")
        for r in rows:
            f.write("%.17g,%.17g,%.17g,%.17g\n" % (r.xi, r.df_over_f, r.iea_fidelity, r.qoct_fidelity))
