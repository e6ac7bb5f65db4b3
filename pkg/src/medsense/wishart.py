"""Exact CDF of the largest eigenvalue of a correlated central complex Wishart matrix.

For ``A = X X^H`` with the ``q`` columns of ``X`` drawn i.i.d. from
``CN(0, Sigma)`` (``Sigma`` of size ``p <= q``), and ``0 < l_1 < ... < l_m``
the eigenvalues of ``Sigma^-1``::

    Pr(alpha_max <= eta) = det[ gamma(n-i+1, eta l_j) / l_j^(n-i+1) ] * c / V

with ``c = |Sigma|^-n / prod_i Gamma(n-i+1)`` (after cancelling the
``prod Gamma(m-i+1)`` against ``prod (a-1)!``) and ``V = prod_{i<j} (l_j - l_i)``.

The determinant is evaluated after factoring the row scales ``Gamma(n-i+1)``
and the column scales ``l_j^-n`` out in log-domain, which leaves the
well-scaled matrix ``B_ij = P(n-i+1, eta l_j) (l_j/l_m)^(i-1)`` (``P`` the
regularized lower incomplete gamma), then LU with partial pivoting in
extended precision. ``B`` is nearly singular whenever the eigenvalues are
close, so a first-order componentwise error bound is carried along and
evaluations whose bound exceeds :data:`FAST_ABS_TOL` are redone with mpmath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammainc, gammaln

from .model import check_hermitian

#: Relative gap below which adjacent eigenvalues are spread apart.
MIN_REL_GAP = 1e-9
#: Half-width of the spread, as a fraction of the largest eigenvalue.
PERTURBATION = 1e-8
#: Absolute error budget (probability units) for the extended-precision path.
FAST_ABS_TOL = 1e-10
#: Probabilities may exceed [0, 1] by this much before being treated as failure.
CLAMP_BAND = 1e-8
#: Largest working precision (decimal digits) the fallback will use.
MAX_DIGITS = 2000
_ERR_SAFETY = 8.0

XFLOAT = np.longdouble
XEPS = float(np.finfo(XFLOAT).eps)


class NumericalFailure(ArithmeticError):
    """Raised when an evaluation has lost its significant digits."""


class UnsupportedConfiguration(ValueError):
    """Raised for configurations outside the implemented theory (q < p)."""


@dataclass(frozen=True)
class WishartSpectrum:
    """Ascending eigenvalues of ``Sigma^-1`` together with the Wishart dimensions.

    ``log_norm`` is ``log(c/|V|)`` and ``sign`` the sign attached to the
    Vandermonde normalizer (+1 for the ascending-difference convention).
    """

    lambdas: np.ndarray
    n: int
    m: int
    log_norm: float
    sign: float = 1.0

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        if not self.n >= self.m >= 1:
            raise ValueError(f"need n >= m >= 1, got n={self.n}, m={self.m}")
        if lam.shape != (self.m,):
            raise ValueError("lambdas must have length m")
        if lam[0] <= 0 or np.any(np.diff(lam) <= 0):
            raise ValueError("lambdas must be positive and strictly increasing")


def separate_eigenvalues(lam, min_rel_gap: float = MIN_REL_GAP, spread: float = PERTURBATION):
    """Spread clusters of nearly equal eigenvalues symmetrically about their mean.

    Members of a cluster of size ``c`` are placed ``2 * spread * lam_max``
    apart, which for a pair is the ``+-spread * lam_max`` rule.
    """
    lam = np.sort(np.asarray(lam, dtype=float))
    if lam.size < 2:
        return lam
    scale = lam[-1]
    for _ in range(lam.size):
        gaps = np.diff(lam) / scale
        if np.all(gaps >= min_rel_gap):
            return lam
        out = []
        i = 0
        while i < lam.size:
            j = i
            while j + 1 < lam.size and (lam[j + 1] - lam[j]) / scale < min_rel_gap:
                j += 1
            cluster = lam[i : j + 1]
            if cluster.size > 1:
                offs = (np.arange(cluster.size) - (cluster.size - 1) / 2) * 2 * spread * scale
                cluster = cluster.mean() + offs
            out.extend(cluster)
            i = j + 1
        lam = np.sort(np.array(out))
        scale = lam[-1]
    if lam[0] <= 0 or np.any(np.diff(lam) / scale < min_rel_gap):
        raise NumericalFailure("could not separate clustered eigenvalues")
    return lam


def _log_vandermonde(lam) -> float:
    lam = np.asarray(lam)
    i, j = np.triu_indices(lam.size, k=1)
    return float(np.sum(np.log(lam[j] - lam[i])))


def spectrum_of(Sigma, q: int, signed_vandermonde: bool = False) -> WishartSpectrum:
    """Spectrum of ``Sigma^-1`` for ``q`` i.i.d. columns.

    ``signed_vandermonde=True`` keeps the literal ``prod_{i<j}(l_i - l_j)``
    sign for ascending eigenvalues; it exists only as a negative control.
    """
    Sigma = check_hermitian(Sigma, name="Sigma")
    p = Sigma.shape[0]
    if int(q) != q or q < 1:
        raise ValueError("q must be a positive integer")
    if q < p:
        raise UnsupportedConfiguration(f"q={q} observations < dimension {p} is not supported")
    w = np.linalg.eigvalsh(Sigma)
    if w[0] <= 0:
        raise ValueError(f"Sigma is not positive definite (min eigenvalue {w[0]:.3e})")
    lam = separate_eigenvalues(1.0 / w)
    n, m = max(p, q), min(p, q)
    a = n - np.arange(m)
    log_norm = n * np.sum(np.log(lam)) - np.sum(gammaln(a)) - _log_vandermonde(lam)
    sign = (-1.0) ** (m * (m - 1) // 2) if signed_vandermonde else 1.0
    return WishartSpectrum(lambdas=lam, n=n, m=m, log_norm=float(log_norm), sign=sign)


def lower_incomplete_gamma(a, x):
    """``gamma(a, x) = int_0^x t^(a-1) e^-t dt`` for integer ``a >= 1``."""
    a_arr = np.asarray(a)
    x_arr = np.asarray(x, dtype=float)
    if np.any(a_arr < 1) or np.any(np.asarray(a_arr, dtype=float) % 1 != 0):
        raise ValueError("a must be a positive integer")
    if np.any(x_arr < 0):
        raise ValueError("x must be nonnegative")
    # regularized P is computed without cancellation; Gamma(a) rescales in log-domain
    with np.errstate(divide="ignore"):
        logp = np.log(gammainc(a_arr, x_arr))
    out = np.exp(logp + gammaln(a_arr))
    return out if out.ndim else float(out)


def _scale_terms(spec: WishartSpectrum) -> float:
    """log of the factor pulled out of det(Lambda), plus log(c/|V|)."""
    lam, n, m = spec.lambdas, spec.n, spec.m
    a = n - np.arange(m)
    return (
        spec.log_norm
        + float(np.sum(gammaln(a)))
        - n * float(np.sum(np.log(lam)))
        + (m * (m - 1) / 2) * math.log(lam[-1])
    )


def _log_factorials(kmax: int) -> np.ndarray:
    out = np.zeros(kmax + 1, dtype=XFLOAT)
    out[1:] = np.cumsum(np.log(np.arange(1, kmax + 1, dtype=XFLOAT)))
    return out


def regularized_gamma_p(a: int, x: np.ndarray) -> np.ndarray:
    """``P(a, x)`` for integer ``a >= 1`` in extended precision.

    Below ``x = a`` the tail series ``e^-x x^a/a! sum_k x^k/((a+1)..(a+k))`` is
    summed; above it ``1 - e^-x sum_{k<a} x^k/k!``. Neither branch cancels.
    """
    x = np.asarray(x, dtype=XFLOAT)
    out = np.empty_like(x)
    lf = _log_factorials(a)
    lo = x < a
    if np.any(lo):
        xl = x[lo]
        with np.errstate(divide="ignore"):
            pre = np.exp(-xl + a * np.log(xl) - lf[a])
        term = np.ones_like(xl)
        total = np.ones_like(xl)
        k = 1
        while True:
            term = term * xl / (a + k)
            total = total + term
            if np.all(term <= XEPS * total) or k > 100000:
                break
            k += 1
        out[lo] = pre * total
    hi = ~lo
    if np.any(hi):
        xh = x[hi]
        logx = np.log(xh)
        q = np.zeros_like(xh)
        for k in range(a):
            q = q + np.exp(-xh + k * logx - lf[k])
        out[hi] = 1 - q
    return out


def _lu_slogdet(A: np.ndarray):
    """Batched LU with partial pivoting; returns (sign, log|det|)."""
    A = A.copy()
    k, m, _ = A.shape
    rows = np.arange(k)
    sign = np.ones(k, dtype=XFLOAT)
    logabs = np.zeros(k, dtype=XFLOAT)
    for c in range(m):
        piv = c + np.argmax(np.abs(A[:, c:, c]), axis=1)
        swap = piv != c
        if np.any(swap):
            top = A[rows, c].copy()
            A[rows, c] = A[rows, piv]
            A[rows, piv] = top
            sign[swap] = -sign[swap]
        p = A[:, c, c]
        sign = sign * np.sign(p)
        with np.errstate(divide="ignore"):
            logabs = logabs + np.log(np.abs(p))
        safe = np.where(p == 0, 1, p)
        if c + 1 < m:
            A[:, c + 1 :, c:] -= (A[:, c + 1 :, c] / safe[:, None])[:, :, None] * A[:, c, None, c:]
    return sign, logabs


def _fast_path(x: np.ndarray, spec: WishartSpectrum):
    """CDF at positive thresholds ``x`` in extended precision.

    Returns ``(value, error_bound, cond)``; ``error_bound`` is a first-order
    componentwise bound on the absolute error (``inf`` when it cannot be
    resolved) and ``cond`` the 2-norm condition of the equilibrated matrix.
    """
    lam, n, m = spec.lambdas, spec.n, spec.m
    lamx = lam.astype(XFLOAT)
    t = lamx / lamx[-1]
    arg = x.astype(XFLOAT)[:, None] * lamx[None, :]
    B = np.empty((x.size, m, m), dtype=XFLOAT)
    for i in range(m):
        B[:, i, :] = regularized_gamma_p(n - i, arg) * t[None, :] ** i
    vals = np.zeros(x.size)
    errs = np.zeros(x.size)
    cond = np.ones(x.size)
    colmax = np.abs(B).max(axis=1)
    rowmax = np.abs(B / np.where(colmax > 0, colmax, 1)[:, None, :]).max(axis=2)
    ok = np.all(colmax > 0, axis=1) & np.all(rowmax > 0, axis=1)
    if not np.any(ok):
        return vals, errs, cond
    Bs = B[ok] / colmax[ok][:, None, :] / rowmax[ok][:, :, None]
    B64 = Bs.astype(float)
    sv = np.linalg.svd(B64, compute_uv=False)
    with np.errstate(divide="ignore"):
        c_ok = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
    cond[ok] = c_ok
    sgn, logdet = _lu_slogdet(Bs)
    outer = _scale_terms(spec) + np.sum(np.log(colmax[ok]), axis=1) + np.sum(np.log(rowmax[ok]), axis=1)
    logval = outer + logdet
    live = sgn != 0
    v = np.zeros(sgn.shape)
    v[live] = (spec.sign * sgn[live] * np.exp(logval[live])).astype(float)
    e = np.full(v.shape, np.inf)
    # a double-precision inverse is trustworthy up to cond ~ 1e13
    est = live & (c_ok < 1e13)
    if np.any(est):
        inv = np.linalg.inv(B64[est])
        kappa = np.sum(np.abs(np.swapaxes(inv, -1, -2)) * np.abs(B64[est]), axis=(-1, -2))
        e[est] = _ERR_SAFETY * XEPS * (kappa + m) * np.abs(v[est])
    # beyond that the float64 SVD still resolves cond up to ~1e15
    rough = live & ~est & (c_ok < 1e15)
    e[rough] = _ERR_SAFETY * XEPS * m * c_ok[rough] * np.abs(v[rough])
    # Hadamard: |det Bs| <= m^(m/2), which bounds the value itself
    hadamard = np.exp((outer + 0.5 * m * math.log(m)).astype(float))
    e = np.minimum(e, hadamard)
    vals[ok] = v
    errs[ok] = e
    # in Sigma's eigenbasis the diagonal of A holds independent Gamma(n)/l_j
    # variables, and alpha_max dominates each of them
    ceiling = np.prod(regularized_gamma_p(n, arg), axis=1).astype(float)
    tiny = (errs > FAST_ABS_TOL) & (ceiling < FAST_ABS_TOL)
    vals[tiny] = np.clip(vals[tiny], 0.0, ceiling[tiny])
    errs[tiny] = ceiling[tiny]
    return vals, errs, cond


def _mp_path(x: float, spec: WishartSpectrum, digits: int) -> float:
    lam, n, m = spec.lambdas, spec.n, spec.m
    with mpmath.workdps(digits):
        lm = [mpmath.mpf(float(v)) for v in lam]
        t = [v / lm[-1] for v in lm]
        xe = mpmath.mpf(float(x))
        B = mpmath.matrix(m, m)
        for i in range(m):
            for j in range(m):
                B[i, j] = mpmath.gammainc(n - i, 0, xe * lm[j], regularized=True) * t[j] ** i
        vand = mpmath.mpf(1)
        for i in range(m):
            for j in range(i + 1, m):
                vand *= t[j] - t[i]
        return float(spec.sign * mpmath.det(B) / vand)


def max_eig_cdf(eta, spec: WishartSpectrum, *, clamp: bool = True):
    """``Pr(alpha_max(A) <= eta)`` for a Wishart matrix with spectrum ``spec``.

    Accepts a scalar or an array of thresholds. Values are clamped to [0, 1]
    if they overshoot by at most :data:`CLAMP_BAND`; larger violations raise
    :class:`NumericalFailure`.
    """
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr < 0) or np.any(np.isnan(eta_arr)):
        raise ValueError("eta must be nonnegative")
    x = eta_arr.ravel()
    out = np.zeros(x.size)
    pos = x > 0
    if np.any(pos):
        vals, errs, cond = _fast_path(x[pos], spec)
        bad = errs > FAST_ABS_TOL
        if np.any(bad):
            idx = np.flatnonzero(bad)
            # det(B) ~ V(t): the cancellation depth is at least -log10 V(t)
            depth = -_log_vandermonde(spec.lambdas / spec.lambdas[-1]) / math.log(10)
            for k in idx:
                lost = max(math.log10(cond[k]) if np.isfinite(cond[k]) else 0.0, depth)
                digits = int(30 + 1.2 * lost)
                if digits > MAX_DIGITS:
                    raise NumericalFailure(
                        f"determinant lost all significant digits at eta={x[pos][k]:.6g}: "
                        f"error bound {errs[k]:.3e}, m={spec.m}, n={spec.n}, "
                        f"min relative gap {np.min(np.diff(spec.lambdas)) / spec.lambdas[-1]:.3e}"
                    )
                vals[k] = _mp_path(x[pos][k], spec, digits)
        out[pos] = vals
    if clamp:
        if np.any(out < -CLAMP_BAND) or np.any(out > 1 + CLAMP_BAND):
            worst = out[np.argmax(np.maximum(-out, out - 1))]
            raise NumericalFailure(f"CDF value {float(worst):.6g} outside [0, 1] beyond tolerance")
        out = np.clip(out, 0.0, 1.0)
    out = out.reshape(eta_arr.shape)
    return float(out) if out.ndim == 0 else out


def ts_cdf(eta_ts, Sigma, K: int, *, spec: WishartSpectrum | None = None):
    """CDF of the largest eigenvalue of the sample covariance ``(1/K) sum y y^H``."""
    if spec is None:
        spec = spectrum_of(Sigma, K)
    return max_eig_cdf(K * np.asarray(eta_ts, dtype=float), spec)
