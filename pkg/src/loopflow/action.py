"""The Hamiltonian action functional on the mixed-regularity loop bundle.

A phase point is a loop q together with a fiber field p expressed in
the loop's spectral frame; the action is

    A(q, p) = <qdot, p>_{L^2} - integral of H_r(|p(t)|) dt.

Both terms are evaluated from the same data: the pairing exactly in
frame coefficients, the H integral by the 4J+1-node uniform quadrature
(exact for trig polynomials of degree <= 4J, spectrally accurate
otherwise).  The gradient returned here is the exact derivative of that
discrete functional with respect to the coefficients, organized as a
(horizontal, vertical) pair and measured in the mixed metric: the
horizontal part lives in the s-metric, the vertical part in the
(1-s)-metric.  Because the quadrature pairing and the frame analysis
use identical weights, finite differences of the discrete action
reproduce this gradient to roundoff, not merely to truncation order.
"""

from dataclasses import dataclass

import numpy as np

from . import fourier
from .geometry import LoopPath, flat_torus, random_loop, straight_loop
from .spectral import FiberField, frame_of
from .hamiltonian import TIE_BAND, radial_H


@dataclass(frozen=True)
class PhasePoint:
    """A point (q, p) of the bundle, with its regularity parameter."""

    loop: LoopPath
    fiber: FiberField
    s: float

    def __post_init__(self):
        if not 0.5 < self.s < 1.0:
            raise ValueError("regularity s must lie strictly in (1/2, 1)")
        frame_loop = self.fiber.frame.loop
        if frame_loop is not self.loop and frame_loop.content_key() != self.loop.content_key():
            raise ValueError("fiber frame is not the frame of the given loop")

    @property
    def frame(self):
        return self.fiber.frame


def straight_orbit(manifold, winding, spec, momentum=None, base=None):
    """The straight phase orbit: linear loop, constant fiber field.

    momentum defaults to the loop's own velocity (the kinetic case
    p = qdot); a constant field has only kernel-mode coefficients.
    """
    loop = straight_loop(manifold, tuple(winding), base=base, modes=spec.J)
    frame = frame_of(loop, spec.J)
    v = loop.drift if momentum is None else np.asarray(momentum, dtype=float)
    c = np.zeros(frame.dim)
    c[: manifold.dim] = v
    return PhasePoint(loop=loop, fiber=FiberField(frame, c), s=spec.s)


def loop_energy(loop):
    """E(q) = 1/2 integral |qdot|^2, exactly from the velocity series."""
    a0, a, b = loop.velocity_series()
    return float(0.5 * (np.sum(a0 ** 2) + 0.5 * np.sum(a ** 2) + 0.5 * np.sum(b ** 2)))


def derivative_coefficients(frame, c):
    """Frame coefficients of the t-derivative of the field with coefficients c."""
    n = frame.loop.manifold.dim
    J = frame.cutoff
    out = np.zeros_like(c)
    if J == 0:
        return out
    block = c[n:].reshape(J, 2, n)
    w = 2.0 * np.pi * np.arange(1, J + 1)[:, None]
    oblock = out[n:].reshape(J, 2, n)
    oblock[:, 0, :] = w * block[:, 1, :]
    oblock[:, 1, :] = -w * block[:, 0, :]
    return out


def _momentum_geometry(x, spec, m):
    p_samp = x.fiber.samples(m)
    rho = np.linalg.norm(p_samp, axis=1)
    dH = radial_H(spec, rho, order=1)
    scale = np.divide(dH, rho, out=np.zeros_like(rho), where=rho > 0.0)
    return p_samp, rho, scale[:, None] * p_samp  # last item: dH/dp samples


def action(x, spec):
    """The discrete action A(q,p) at the frame's native quadrature."""
    frame = x.frame
    m = fourier.default_samples(frame.cutoff)
    qd = frame.coefficients(x.loop.velocity_samples(m))
    pairing = float(qd @ x.fiber.coefficients)
    _, rho, _ = _momentum_geometry(x, spec, m)
    return pairing - float(np.mean(radial_H(spec, rho)))


def gradient(x, spec):
    """The metric gradient of the discrete action, as (horizontal, vertical).

    horizontal = -(1+lam)^{-s} (dp/dt)-coefficients  (the s-metric
    representative of xi -> <xi_dot, p>), vertical = (1+lam)^{s-1} times
    the coefficients of qdot - dH/dp (the (1-s)-metric representative).
    """
    frame = x.frame
    m = fourier.default_samples(frame.cutoff)
    lam = frame.eigenvalues
    pdot = derivative_coefficients(frame, x.fiber.coefficients)
    grad_h = FiberField(frame, -((1.0 + lam) ** (-x.s)) * pdot)
    _, _, dpH = _momentum_geometry(x, spec, m)
    v_samp = x.loop.velocity_samples(m) - dpH
    grad_v = FiberField(frame, ((1.0 + lam) ** (x.s - 1.0)) * frame.coefficients(v_samp))
    return grad_h, grad_v


def gradient_norm(x, spec):
    """Norm of the gradient in the mixed (s, 1-s) metric."""
    grad_h, grad_v = gradient(x, spec)
    return float(np.sqrt(grad_h.norm_r(x.s) ** 2 + grad_v.norm_r(1.0 - x.s) ** 2))


def metric_pairing(x, pair_a, pair_b):
    """The mixed metric on tangent pairs: <.h,.h>_s + <.v,.v>_{1-s}."""
    ah, av = pair_a
    bh, bv = pair_b
    lam = x.frame.eigenvalues
    hs = np.sum((1.0 + lam) ** x.s * ah.coefficients * bh.coefficients)
    vs = np.sum((1.0 + lam) ** (1.0 - x.s) * av.coefficients * bv.coefficients)
    return float(hs + vs)


def perturb(x, eps, xi=None, eta=None):
    """The phase point (q + eps xi, p + eps eta), exact in coefficients.

    xi and eta are FiberFields in x's frame; the loop's stored base
    moves by eps xi(0) so the anchoring convention is preserved.  The
    winding class never changes.
    """
    loop = x.loop
    frame = x.frame
    J = frame.cutoff
    n = loop.manifold.dim
    if xi is not None:
        xa0, xa, xb = frame.series(xi.coefficients)
        pad = np.zeros((J - loop.modes, n))
        new_cos = np.vstack([loop.cos_coeffs, pad]) + eps * xa
        new_sin = np.vstack([loop.sin_coeffs, pad]) + eps * xb
        new_base = np.asarray(loop.base) + eps * (xa0 + xa.sum(axis=0))
        loop = LoopPath(manifold=loop.manifold, winding=loop.winding,
                        base=tuple(new_base), cos_coeffs=new_cos, sin_coeffs=new_sin)
    new_frame = frame_of(loop, J)
    coeffs = x.fiber.coefficients if eta is None else x.fiber.coefficients + eps * eta.coefficients
    return PhasePoint(loop=loop, fiber=FiberField(new_frame, coeffs), s=x.s)


def hamilton_residual(x, spec):
    """L^2 defect of the Hamilton equations at x.

    On the flat models the equations are qdot = dH/dp and nabla p = 0;
    the residual is the sum of the two L^2 norms.
    """
    frame = x.frame
    m = fourier.default_samples(frame.cutoff)
    _, _, dpH = _momentum_geometry(x, spec, m)
    diff = x.loop.velocity_samples(m) - dpH
    res_q = float(np.sqrt(np.mean(np.sum(diff ** 2, axis=1))))
    pdot = derivative_coefficients(frame, x.fiber.coefficients)
    return res_q + float(np.linalg.norm(pdot))


@dataclass(frozen=True)
class CriticalClass:
    kind: str          # constant | closed-geodesic | fake-geodesic | on-hypersurface | unclassified
    sigma: float = None

    def __str__(self):
        if self.kind == "on-hypersurface":
            return f"on-hypersurface(sigma={self.sigma:.6f})"
        return self.kind


def classify_critical(x, spec, tol=1e-6):
    """Classify a critical point by the H_r branch containing its image.

    Assumes the gradient norm at x is already below tol.  Boundaries
    carry the standard tie-band; orbits straddling branches beyond the
    tolerance come back unclassified.
    """
    frame = x.frame
    m = fourier.default_samples(frame.cutoff)
    p_samp = x.fiber.samples(m)
    rho = np.linalg.norm(p_samp, axis=1)
    speed = float(np.sqrt(np.mean(np.sum(x.loop.velocity_samples(m) ** 2, axis=1))))
    if speed <= tol:
        return CriticalClass("constant")
    lo, hi = float(rho.min()), float(rho.max())
    sig_lo = spec.rho_star * np.exp(-spec.delta)
    sig_hi = spec.rho_star * np.exp(spec.delta)
    if lo >= 2.0 * spec.rho1 - TIE_BAND:
        gap = abs(action(x, spec) - (loop_energy(x.loop) - spec.r))
        return CriticalClass("closed-geodesic") if gap <= tol else CriticalClass("unclassified")
    if lo > spec.rho1 + TIE_BAND and hi < 2.0 * spec.rho1 + TIE_BAND:
        return CriticalClass("fake-geodesic")
    if sig_lo - TIE_BAND < lo and hi < sig_hi + TIE_BAND and hi - lo <= max(tol, 1e-7):
        sigma = float(np.log(np.mean(rho) / spec.rho_star))
        return CriticalClass("on-hypersurface", sigma=sigma)
    return CriticalClass("unclassified")


def pack_coefficients(x):
    """Flatten the free coordinates (loop cos/sin, fiber) into one vector."""
    J = x.frame.cutoff
    n = x.loop.manifold.dim
    pad = np.zeros((J - x.loop.modes, n))
    cos = np.vstack([x.loop.cos_coeffs, pad])
    sin = np.vstack([x.loop.sin_coeffs, pad])
    return np.concatenate([cos.reshape(-1), sin.reshape(-1), x.fiber.coefficients])


def unpack_coefficients(x, vec):
    """Rebuild a PhasePoint from pack_coefficients output (base, winding kept)."""
    J = x.frame.cutoff
    n = x.loop.manifold.dim
    k = J * n
    cos = vec[:k].reshape(J, n)
    sin = vec[k:2 * k].reshape(J, n)
    loop = LoopPath(manifold=x.loop.manifold, winding=x.loop.winding, base=x.loop.base,
                    cos_coeffs=cos, sin_coeffs=sin)
    frame = frame_of(loop, J)
    return PhasePoint(loop=loop, fiber=FiberField(frame, vec[2 * k:].copy()), s=x.s)


def rescale_period(traj, spec, manifold, cutoff=None):
    """Reparametrize a T-periodic orbit to period one, for H_{T r}.

    Returns (PhasePoint, rescaled spec).  The orbit must stay inside
    the radial thickening and must close up to its winding translation;
    sampling uses linear interpolation, exact here because every X_H
    orbit on the flat models has constant momentum and linear position.
    """
    J = spec.J if cutoff is None else int(cutoff)
    rho = np.linalg.norm(traj.momenta, axis=1)
    if rho.min() <= 0.0:
        raise ValueError("orbit not contained in the thickening")
    sig = np.log(rho / spec.rho_star)
    if float(np.max(np.abs(sig))) >= spec.thickening_halfwidth - TIE_BAND:
        raise ValueError("orbit not contained in the thickening")
    periods = np.asarray(manifold.periods)
    disp = traj.positions[-1] - traj.positions[0]
    winding = np.round(disp / periods)
    if float(np.max(np.abs(disp - winding * periods))) > 1e-8:
        raise ValueError("orbit does not close up over its period")
    m = fourier.default_samples(J)
    t01 = fourier.grid(m)
    tm = t01 * traj.period
    q_m = np.column_stack([np.interp(tm, traj.times, traj.positions[:, k])
                           for k in range(manifold.dim)])
    p_m = np.column_stack([np.interp(tm, traj.times, traj.momenta[:, k])
                           for k in range(manifold.dim)])
    periodic = q_m - np.outer(t01, winding * periods)
    _, a, b = fourier.analyze(periodic, J)
    loop = LoopPath(manifold=manifold, winding=tuple(int(w) for w in winding),
                    base=tuple(q_m[0]), cos_coeffs=a, sin_coeffs=b)
    frame = frame_of(loop, J)
    fiber = FiberField(frame, frame.coefficients(p_m))
    new_spec = spec.with_r(traj.period * spec.r)
    return PhasePoint(loop=loop, fiber=fiber, s=spec.s), new_spec


def random_phase_point(spec, rng, manifold=None, winding=(1, 0),
                       loop_amplitude=0.05, fiber_amplitude=0.3):
    """A generic phase point: random loop, kinetic-biased random fiber.

    The fiber gets the loop's drift plus decaying random mode content,
    so samples land near the interesting radii without fine-tuning.
    """
    manifold = flat_torus(len(winding)) if manifold is None else manifold
    loop = random_loop(manifold, tuple(winding), spec.J, rng, amplitude=loop_amplitude)
    frame = frame_of(loop, spec.J)
    c = fiber_amplitude * rng.standard_normal(frame.dim) / (1.0 + frame.eigenvalues) ** 0.75
    c[:manifold.dim] += loop.drift
    return PhasePoint(loop=loop, fiber=FiberField(frame, c), s=spec.s)


def random_direction(x, rng):
    """A tangent direction (xi, eta) of unit mixed-metric norm at x."""
    frame = x.frame
    lam = frame.eigenvalues
    xi = FiberField(frame, rng.standard_normal(frame.dim) / (1.0 + lam) ** 0.75)
    eta = FiberField(frame, rng.standard_normal(frame.dim) / (1.0 + lam) ** 0.75)
    scale = np.sqrt(metric_pairing(x, (xi, eta), (xi, eta)))
    return (1.0 / scale) * xi, (1.0 / scale) * eta


def directional_derivative_check(x, spec, xi, eta, step=1e-5):
    """(central FD slope, exact pairing) of the action along (xi, eta)."""
    a_plus = action(perturb(x, step, xi=xi, eta=eta), spec)
    a_minus = action(perturb(x, -step, xi=xi, eta=eta), spec)
    fd = (a_plus - a_minus) / (2.0 * step)
    grad_h, grad_v = gradient(x, spec)
    return fd, metric_pairing(x, (grad_h, grad_v), (xi, eta))
