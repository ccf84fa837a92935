"""
Sphere field service layer.
Sampling of random degree-ell eigenfunctions, exact synthesis of values and
covariant jets in two charts, and the closed-form jet covariance.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
from scipy import linalg

from app.schemas.field import FieldRecord, Jet2, SpherePoint
from app.services.legendre import (
    assoc_legendre_table,
    assoc_legendre_theta_derivs,
    gauss_legendre,
    legendre_eval,
)
from app.services.rng import check_seed, generator
from app.utils.errors import DomainError
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

SQRT2 = np.sqrt(2.0)
CHART_LIMIT = 1.0 / np.sqrt(2.0)

# Chart B is the 90 degree rotation about the y axis: R(x, y, z) = (z, y, -x)
ROTATION = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
ROTATION_INV = ROTATION.T

_POINT_CHUNK = 2048


@dataclass(frozen=True)
class HarmonicField:
    """
    One sampled eigenfunction.

    coeffs_a[m + ell] multiplies the real basis function Y_{ell,m} in the
    standard chart; coeffs_b are the same field seen through chart B, i.e.
    f_B(y) = f_A(R y).
    """

    ell: int
    coeffs_a: np.ndarray
    coeffs_b: np.ndarray
    seed: int

    @property
    def lam(self) -> float:
        return float(self.ell * (self.ell + 1))

    @property
    def norm(self) -> float:
        return float(np.sqrt(4.0 * np.pi / (2 * self.ell + 1)))

    def chart_coeffs(self, chart: str) -> np.ndarray:
        return self.coeffs_a if chart == "A" else self.coeffs_b

    def negated(self) -> "HarmonicField":
        """The field -f with the same seed token."""
        return HarmonicField(self.ell, -self.coeffs_a, -self.coeffs_b, self.seed)


@dataclass(frozen=True)
class JetCovariance:
    """Covariance of (g1, g2, h11, h12, h22) and its Cholesky factor."""

    ell: int
    sigma: np.ndarray
    cholesky: np.ndarray
    taus: Tuple[float, float, float, float, float]


@dataclass(frozen=True)
class EmpiricalJetCovariance:
    ell: int
    n: int
    point: SpherePoint
    sigma: np.ndarray
    sigma_stderr: np.ndarray
    whitened: np.ndarray


# Coordinates and frames


def unit_vectors(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def vector_angles(v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    z = np.clip(v[..., 2], -1.0, 1.0)
    theta = np.arccos(z)
    phi = np.mod(np.arctan2(v[..., 1], v[..., 0]), 2.0 * np.pi)
    return theta, phi


def to_chart_b(theta: np.ndarray, phi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Chart-B coordinates of a point given in chart A (y = R^-1 x)."""
    return vector_angles(unit_vectors(theta, phi) @ ROTATION_INV.T)


def from_chart_b(
    theta_b: np.ndarray, phi_b: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Chart-A coordinates of a point given in chart B (x = R y)."""
    return vector_angles(unit_vectors(theta_b, phi_b) @ ROTATION.T)


def frame_vectors(theta: np.ndarray, phi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    e_theta = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return e_theta, e_phi


def owned_by_chart_a(theta: np.ndarray) -> np.ndarray:
    return np.abs(np.cos(theta)) <= CHART_LIMIT


# Synthesis


def _order_coeffs(ell: int, coeffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-order cosine and sine weights including the sqrt(2) factors."""
    coeffs = np.asarray(coeffs, dtype=float)
    cos_c = np.zeros(ell + 1)
    sin_c = np.zeros(ell + 1)
    cos_c[0] = coeffs[ell]
    cos_c[1:] = SQRT2 * coeffs[ell + 1 :]
    sin_c[1:] = SQRT2 * coeffs[ell - 1 :: -1]
    return cos_c, sin_c


def _trig_tables(ell: int, phi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mphi = np.arange(ell + 1, dtype=float)[:, None] * np.asarray(phi)[None, :]
    return np.cos(mphi), np.sin(mphi)


def _norm(ell: int) -> float:
    return float(np.sqrt(4.0 * np.pi / (2 * ell + 1)))


def basis_values(ell: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Real orthonormal basis Y_{ell,m}(theta, phi), shaped (2 ell + 1, n)."""
    theta = np.atleast_1d(theta).astype(float)
    phi = np.atleast_1d(phi).astype(float)
    table, _ = assoc_legendre_table(ell, np.cos(theta))
    cosm, sinm = _trig_tables(ell, phi)
    out = np.empty((2 * ell + 1, theta.size))
    out[ell] = table[0]
    out[ell + 1 :] = SQRT2 * table[1:] * cosm[1:]
    out[ell - 1 :: -1] = SQRT2 * table[1:] * sinm[1:]
    return out


def synthesize_points(
    ell: int, coeffs: np.ndarray, theta: np.ndarray, phi: np.ndarray
) -> np.ndarray:
    """Field values at scattered points of one chart."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    cos_c, sin_c = _order_coeffs(ell, coeffs)
    out = np.empty(theta.size)
    for start in range(0, theta.size, _POINT_CHUNK):
        sl = slice(start, start + _POINT_CHUNK)
        table, _ = assoc_legendre_table(ell, np.cos(theta[sl]))
        cosm, sinm = _trig_tables(ell, phi[sl])
        out[sl] = np.sum(table * (cos_c[:, None] * cosm + sin_c[:, None] * sinm), axis=0)
    return _norm(ell) * out


def synthesize_grid(
    ell: int, coeffs: np.ndarray, theta: np.ndarray, phi: np.ndarray
) -> np.ndarray:
    """Field values on a tensor grid, shaped (len(theta), len(phi))."""
    cos_c, sin_c = _order_coeffs(ell, coeffs)
    table, _ = assoc_legendre_table(ell, np.cos(np.asarray(theta, dtype=float)))
    cosm, sinm = _trig_tables(ell, np.asarray(phi, dtype=float))
    values = (table * cos_c[:, None]).T @ cosm + (table * sin_c[:, None]).T @ sinm
    return _norm(ell) * values


def _covariant(
    partials: Tuple[np.ndarray, ...], theta: np.ndarray
) -> Dict[str, np.ndarray]:
    f, ft, fp, ftt, ftp, fpp = partials
    st = np.sin(theta)
    cot = np.cos(theta) / st
    return {
        "f": f,
        "g1": ft,
        "g2": fp / st,
        "h11": ftt,
        "h12": (ftp - cot * fp) / st,
        "h22": fpp / st**2 + cot * ft,
    }


def chart_jets_grid(
    ell: int, coeffs: np.ndarray, theta: np.ndarray, phi: np.ndarray
) -> Dict[str, np.ndarray]:
    """Covariant jets on a tensor grid of one chart (theta away from poles)."""
    theta = np.asarray(theta, dtype=float)
    cos_c, sin_c = _order_coeffs(ell, coeffs)
    value, d1, d2 = assoc_legendre_theta_derivs(ell, theta)
    cosm, sinm = _trig_tables(ell, np.asarray(phi, dtype=float))
    m = np.arange(ell + 1, dtype=float)[:, None]
    dcos, dsin = -m * sinm, m * cosm
    ddcos, ddsin = -m * m * cosm, -m * m * sinm

    def combine(table, tc, ts):
        return (table * cos_c[:, None]).T @ tc + (table * sin_c[:, None]).T @ ts

    k = _norm(ell)
    partials = tuple(
        k * arr
        for arr in (
            combine(value, cosm, sinm),
            combine(d1, cosm, sinm),
            combine(value, dcos, dsin),
            combine(d2, cosm, sinm),
            combine(d1, dcos, dsin),
            combine(value, ddcos, ddsin),
        )
    )
    return _covariant(partials, theta[:, None])


def chart_jets_points(
    ell: int, coeffs: np.ndarray, theta: np.ndarray, phi: np.ndarray
) -> np.ndarray:
    """Covariant jets (f, g1, g2, h11, h12, h22) at scattered points, shaped (6, n)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    cos_c, sin_c = _order_coeffs(ell, coeffs)
    m = np.arange(ell + 1, dtype=float)[:, None]
    out = np.empty((6, theta.size))
    k = _norm(ell)
    for start in range(0, theta.size, _POINT_CHUNK):
        sl = slice(start, start + _POINT_CHUNK)
        value, d1, d2 = assoc_legendre_theta_derivs(ell, theta[sl])
        cosm, sinm = _trig_tables(ell, phi[sl])
        c = cos_c[:, None] * cosm + sin_c[:, None] * sinm
        dc = m * (sin_c[:, None] * cosm - cos_c[:, None] * sinm)
        ddc = -m * m * c
        partials = tuple(
            k * np.sum(a * b, axis=0)
            for a, b in ((value, c), (d1, c), (value, dc), (d2, c), (d1, dc), (value, ddc))
        )
        cov = _covariant(partials, theta[sl])
        out[:, sl] = np.stack(
            [cov["f"], cov["g1"], cov["g2"], cov["h11"], cov["h12"], cov["h22"]]
        )
    return out


def chart_b_frame_rotation(
    theta: np.ndarray, phi: np.ndarray, theta_b: np.ndarray, phi_b: np.ndarray
) -> np.ndarray:
    """Q[n, i, j] = e^A_i(x) . (R e^B_j(y)) for x = R y."""
    ea = np.stack(frame_vectors(theta, phi), axis=-2)
    eb = np.stack(frame_vectors(theta_b, phi_b), axis=-2) @ ROTATION.T
    return np.einsum("nik,njk->nij", ea, eb)


def rotate_jets_from_b(
    jets_b: np.ndarray, q: np.ndarray
) -> np.ndarray:
    """Re-express chart-B jets (6, n) in the chart-A frame."""
    grad = np.einsum("nij,jn->in", q, jets_b[1:3])
    hess_b = np.stack(
        [
            np.stack([jets_b[3], jets_b[4]], axis=-1),
            np.stack([jets_b[4], jets_b[5]], axis=-1),
        ],
        axis=-2,
    )
    hess = q @ hess_b @ np.transpose(q, (0, 2, 1))
    return np.stack(
        [jets_b[0], grad[0], grad[1], hess[:, 0, 0], hess[:, 0, 1], hess[:, 1, 1]]
    )


def eval_jets(field: HarmonicField, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """
    Covariant jets at arbitrary points, shaped (6, n).

    Points with |cos theta| <= 1/sqrt(2) use chart A; the rest are evaluated
    in chart B and rotated back through the orthonormal frame change.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    out = np.empty((6, theta.size))
    in_a = owned_by_chart_a(theta)
    if np.any(in_a):
        out[:, in_a] = chart_jets_points(field.ell, field.coeffs_a, theta[in_a], phi[in_a])
    if np.any(~in_a):
        th, ph = theta[~in_a], phi[~in_a]
        th_b, ph_b = to_chart_b(th, ph)
        jets_b = chart_jets_points(field.ell, field.coeffs_b, th_b, ph_b)
        q = chart_b_frame_rotation(th, ph, th_b, ph_b)
        out[:, ~in_a] = rotate_jets_from_b(jets_b, q)
    return out


def eval_jet(field: HarmonicField, point: SpherePoint) -> Jet2:
    """Jet of a field at one point."""
    jet = eval_jets(field, np.array([point.theta]), np.array([point.phi]))[:, 0]
    return Jet2(
        f=jet[0], g1=jet[1], g2=jet[2], h11=jet[3], h12=jet[4], h22=jet[5]
    )


def evaluate(field: HarmonicField, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Field values at scattered points (chart A works everywhere for values)."""
    return synthesize_points(field.ell, field.coeffs_a, theta, phi)


# Sampling


def rotated_coefficients(ell: int, coeffs_a: np.ndarray) -> np.ndarray:
    """
    Coefficients of f_B(y) = f_A(R y) by exact forward projection.

    f_B is still of degree ell, so a rule exact to degree 2 ell (ell + 1
    Gauss-Legendre nodes by 2 ell + 1 longitudes) integrates f_B Y_k exactly.
    """
    rule = gauss_legendre(ell + 1)
    theta_b = np.arccos(rule.nodes)
    n_phi = 2 * ell + 1
    phi_b = 2.0 * np.pi * np.arange(n_phi) / n_phi

    tb, pb = np.meshgrid(theta_b, phi_b, indexing="ij")
    ta, pa = from_chart_b(tb.ravel(), pb.ravel())
    values = synthesize_points(ell, coeffs_a, ta, pa).reshape(tb.shape)

    table, _ = assoc_legendre_table(ell, rule.nodes)
    cosm, sinm = _trig_tables(ell, phi_b)
    dphi = 2.0 * np.pi / n_phi
    proj_cos = np.einsum("t,mt,tm->m", rule.weights, table, values @ cosm.T) * dphi
    proj_sin = np.einsum("t,mt,tm->m", rule.weights, table, values @ sinm.T) * dphi

    coeffs_b = np.empty(2 * ell + 1)
    coeffs_b[ell] = proj_cos[0]
    coeffs_b[ell + 1 :] = SQRT2 * proj_cos[1:]
    coeffs_b[ell - 1 :: -1] = SQRT2 * proj_sin[1:]
    return coeffs_b / _norm(ell)


def field_from_coeffs(ell: int, coeffs_a: np.ndarray, seed: int = 0) -> HarmonicField:
    coeffs_a = np.asarray(coeffs_a, dtype=float)
    if ell < 1:
        raise DomainError(f"degree must be positive, got {ell}")
    if coeffs_a.shape != (2 * ell + 1,):
        raise DomainError(f"expected {2 * ell + 1} coefficients")
    return HarmonicField(
        ell=ell,
        coeffs_a=coeffs_a,
        coeffs_b=rotated_coefficients(ell, coeffs_a),
        seed=check_seed(seed),
    )


def sample_field(ell: int, seed: int) -> HarmonicField:
    """
    Sample f_ell = sqrt(4 pi/(2 ell + 1)) sum_m a_m Y_{ell,m}, a_m iid N(0, 1).

    Deterministic given (ell, seed).
    """
    if ell < 1:
        raise DomainError(f"degree must be positive, got {ell}")
    coeffs = generator(seed).standard_normal(2 * ell + 1)
    logger.debug("sampled field ell=%d seed=%d", ell, seed)
    return field_from_coeffs(ell, coeffs, seed)


def field_to_record(field: HarmonicField) -> FieldRecord:
    return FieldRecord(ell=field.ell, seed=field.seed, coeffs_a=field.coeffs_a.tolist())


def field_from_record(record: FieldRecord) -> HarmonicField:
    return field_from_coeffs(record.ell, np.array(record.coeffs_a), record.seed)


def save_field(field: HarmonicField, path: Union[str, Path]) -> None:
    Path(path).write_text(field_to_record(field).model_dump_json())


def load_field(path: Union[str, Path]) -> HarmonicField:
    return field_from_record(FieldRecord.model_validate_json(Path(path).read_text()))


# Covariances


def covariance_fn(ell: int, x: SpherePoint, y: SpherePoint) -> float:
    """E[f(x) f(y)] = P_ell(cos d(x, y))."""
    cos_d = np.cos(x.theta) * np.cos(y.theta) + np.sin(x.theta) * np.sin(
        y.theta
    ) * np.cos(x.phi - y.phi)
    return legendre_eval(ell, float(np.clip(cos_d, -1.0, 1.0))).p


def covariance_jet(ell: int, x: SpherePoint, y: SpherePoint) -> np.ndarray:
    """
    E[jet(x) f(y)] for jet = (f, g1, g2, h11, h12, h22), from derivatives of
    P_ell(cos d(x, y)) in the coordinates of x.
    """
    tx, px, ty, py = x.theta, x.phi, y.theta, y.phi
    delta = px - py
    sx, cx, sy, cy = np.sin(tx), np.cos(tx), np.sin(ty), np.cos(ty)
    c = cx * cy + sx * sy * np.cos(delta)
    c_t = -sx * cy + cx * sy * np.cos(delta)
    c_p = -sx * sy * np.sin(delta)
    c_tt = -c
    c_tp = -cx * sy * np.sin(delta)
    c_pp = -sx * sy * np.cos(delta)

    leg = legendre_eval(ell, float(np.clip(c, -1.0, 1.0)))
    partials = (
        leg.p,
        leg.dp * c_t,
        leg.dp * c_p,
        leg.ddp * c_t**2 + leg.dp * c_tt,
        leg.ddp * c_t * c_p + leg.dp * c_tp,
        leg.ddp * c_p**2 + leg.dp * c_pp,
    )
    cov = _covariant(tuple(np.float64(v) for v in partials), np.float64(tx))
    return np.array([cov[k] for k in ("f", "g1", "g2", "h11", "h12", "h22")], dtype=float)


def cholesky_entries(ell: int) -> Tuple[float, float, float, float, float]:
    """tau_1..tau_5 of the jet covariance factor."""
    if ell < 2:
        raise DomainError(f"jet covariance factor needs ell >= 2, got {ell}")
    lam = float(ell * (ell + 1))
    r8 = np.sqrt(8.0)
    tau1 = np.sqrt(lam / 2.0)
    tau2 = np.sqrt(lam) * (lam + 2.0) / (r8 * np.sqrt(3.0 * lam - 2.0))
    tau3 = np.sqrt(lam) * np.sqrt(3.0 * lam - 2.0) / r8
    tau4 = np.sqrt(lam) * np.sqrt(lam - 2.0) / r8
    tau5 = lam * np.sqrt(lam - 2.0) / np.sqrt(3.0 * lam - 2.0)
    return float(tau1), float(tau2), float(tau3), float(tau4), float(tau5)


def sigma_and_cholesky(ell: int) -> JetCovariance:
    """
    Covariance of (g1, g2, h11, h12, h22) and its lower-triangular factor.

    The gradient block is diag(lam/2, lam/2), the gradient/Hessian block is
    zero and the Hessian block is (lam^2/8)[[3-2/lam, 0, 1+2/lam],
    [0, 1-2/lam, 0], [1+2/lam, 0, 3-2/lam]].

    Raises:
        DomainError: If ell < 2
    """
    tau1, tau2, tau3, tau4, tau5 = cholesky_entries(ell)
    lam = float(ell * (ell + 1))
    sigma = np.zeros((5, 5))
    sigma[0, 0] = sigma[1, 1] = lam / 2.0
    scale = lam * lam / 8.0
    sigma[2:, 2:] = scale * np.array(
        [
            [3.0 - 2.0 / lam, 0.0, 1.0 + 2.0 / lam],
            [0.0, 1.0 - 2.0 / lam, 0.0],
            [1.0 + 2.0 / lam, 0.0, 3.0 - 2.0 / lam],
        ]
    )
    chol = np.zeros((5, 5))
    chol[0, 0] = chol[1, 1] = tau1
    chol[2, 2] = tau3
    chol[3, 3] = tau4
    chol[4, 2] = tau2
    chol[4, 4] = tau5
    return JetCovariance(
        ell=ell, sigma=sigma, cholesky=chol, taus=(tau1, tau2, tau3, tau4, tau5)
    )


def whiten_jets(ell: int, jets: np.ndarray) -> np.ndarray:
    """Y = Lambda^-1 (g1, g2, h11, h12, h22) for jets shaped (6, n) or (5, n)."""
    jets = np.asarray(jets, dtype=float)
    if jets.shape[0] == 6:
        jets = jets[1:]
    chol = sigma_and_cholesky(ell).cholesky
    return linalg.solve_triangular(chol, jets, lower=True)


def jet_basis(ell: int, point: SpherePoint) -> np.ndarray:
    """Jets of the unit coefficient vectors at a chart-A point, shaped (6, 2 ell + 1)."""
    if not owned_by_chart_a(np.array([point.theta]))[0]:
        raise DomainError("jet basis is only tabulated at chart-A points")
    eye = np.eye(2 * ell + 1)
    return np.stack(
        [
            chart_jets_points(ell, eye[k], np.array([point.theta]), np.array([point.phi]))[:, 0]
            for k in range(2 * ell + 1)
        ],
        axis=1,
    )


def empirical_jet_covariance(
    ell: int,
    n_replicates: int,
    seed: int,
    point: SpherePoint = SpherePoint(theta=np.pi / 2.0, phi=0.0),
) -> EmpiricalJetCovariance:
    """
    Sample covariance of (g1, g2, h11, h12, h22) at a fixed point over
    independent fields, with the covariance of the whitened vector.

    Jets are linear in the coefficients, so each replicate costs one
    matrix-vector product against the jet basis at the point.
    """
    if n_replicates < 1000:
        raise DomainError("empirical jet covariance needs at least 1000 replicates")
    basis = jet_basis(ell, point)[1:]
    coeffs = generator(seed).standard_normal((n_replicates, 2 * ell + 1))
    jets = coeffs @ basis.T

    sigma = np.cov(jets, rowvar=False)
    diag = np.diag(sigma)
    stderr = np.sqrt((np.outer(diag, diag) + sigma**2) / n_replicates)
    whitened = np.cov(whiten_jets(ell, jets.T), rowvar=True)
    return EmpiricalJetCovariance(
        ell=ell,
        n=n_replicates,
        point=point,
        sigma=sigma,
        sigma_stderr=stderr,
        whitened=whitened,
    )
