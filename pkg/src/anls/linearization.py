"""Linearized operators L+ and L- about a ground state and their spectra.

    L+ = -d_xx + (-d_yy)^s + omega - (p-1) phi^(p-2)
    L- = -d_xx + (-d_yy)^s + omega -       phi^(p-2)

Both are applied matrix-free: the constant-coefficient part spectrally and
the potential pointwise.  Iterative eigen- and linear solvers work on
Euclidean coordinates ``sqrt(w) * v`` where ``w`` is the quadrature weight of
the realization, so that the operators are symmetric matrices.
"""
from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg, minres

from ._spaces import EvenSpace, FullSpace, full_symbol, resolvent_symbol
from .errors import (InconsistencyError, NonConvergenceError, ResolutionError,
                     ValidationError)
from .grid import RealField, reflect, spectral_derivative
from .groundstate import mass_exponent, scale_soliton

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ sectors

@dataclass(frozen=True)
class ParitySector:
    x_parity: str = "even"
    y_parity: str = "even"

    def __post_init__(self):
        for v in (self.x_parity, self.y_parity):
            if v not in ("even", "odd"):
                raise ValidationError(f"parity must be 'even' or 'odd', got {v!r}")

    @property
    def is_even_even(self):
        return self.x_parity == "even" and self.y_parity == "even"

    def project(self, a):
        """Average over the reflections with signs; idempotent and self-adjoint."""
        sx = 1.0 if self.x_parity == "even" else -1.0
        sy = 1.0 if self.y_parity == "even" else -1.0
        b = 0.5 * (a + sx * reflect(a, 0))
        return 0.5 * (b + sy * reflect(b, 1))

    def __str__(self):
        return f"{self.x_parity}-{self.y_parity}"


EVEN_EVEN = ParitySector("even", "even")
ODD_EVEN = ParitySector("odd", "even")
EVEN_ODD = ParitySector("even", "odd")
ODD_ODD = ParitySector("odd", "odd")


def _parse_sector(sector):
    if sector is None or sector == "full":
        return None
    if isinstance(sector, ParitySector):
        return sector
    x, y = str(sector).split("-")
    return ParitySector(x, y)


# ------------------------------------------------------------ linearization

@dataclass(eq=False)
class LinearizedPair:
    base: object  # GroundStateSolution
    potential: RealField = None

    def __post_init__(self):
        if self.potential is None:
            p = self.base.params.p
            phi = np.maximum(self.base.values, 0.0)
            self.potential = RealField(self.base.grid, phi ** (p - 2.0))

    @property
    def grid(self):
        return self.base.grid

    @property
    def params(self):
        return self.base.params

    @property
    def phi(self):
        return self.base.values

    def coef(self, which):
        if which == "plus":
            return self.params.p - 1.0
        if which == "minus":
            return 1.0
        raise ValidationError(f"which must be 'plus' or 'minus', got {which!r}")


def _check_grid(pair, v):
    if getattr(v, "grid", pair.grid) != pair.grid:
        raise ValidationError("field lives on a different grid than the ground state")


def _apply(pair, which, v):
    _check_grid(pair, v)
    sp = FullSpace(pair.grid)
    vals = v.values if hasattr(v, "values") else np.asarray(v, dtype=float)
    prm = pair.params
    out = sp.apply(vals, full_symbol(prm.s, prm.omega)) - pair.coef(which) * pair.potential.values * vals
    return RealField(pair.grid, out)


def apply_Lplus(pair, v):
    return _apply(pair, "plus", v)


def apply_Lminus(pair, v):
    return _apply(pair, "minus", v)


class _Realization:
    """Euclidean-coordinate operators of L+/L- on the whole grid or a parity sector.

    The even-even sector uses the exact quadrant (DCT-I) representation; the
    other sectors use the whole grid with P A P + shift (I - P).
    """

    def __init__(self, pair, sector=None, shift=1e3):
        self.pair = pair
        self.sector = _parse_sector(sector)
        g = pair.grid
        prm = pair.params
        if self.sector is not None and self.sector.is_even_even:
            self.space = EvenSpace(g)
            self.sw = np.sqrt(self.space.weight)
            self.proj = None
        else:
            self.space = FullSpace(g)
            self.sw = np.full(g.shape, math.sqrt(g.cell))
            self.proj = None if self.sector is None else self.sector.project
        self.shape = self.space.shape
        self.n = int(np.prod(self.shape))
        self.V = self.space.from_full(pair.potential.values)
        self.sym = full_symbol(prm.s, prm.omega)
        self.res = resolvent_symbol(prm.s, prm.omega)
        self.shift = shift

    # conversions between fields and Euclidean coordinates
    def to_vec(self, full_values):
        return (self.space.from_full(full_values) * self.sw).ravel()

    def to_field(self, x):
        return RealField(self.pair.grid, self.space.to_full(x.reshape(self.shape) / self.sw))

    def _columns(self, X, fn):
        X = np.asarray(X)
        if X.ndim == 1:
            return fn(X)
        return np.column_stack([fn(X[:, j]) for j in range(X.shape[1])])

    def _L(self, which, x):
        v = x.reshape(self.shape) / self.sw
        if self.proj is not None:
            pv = self.proj(v)
            out = self.space.apply(pv, self.sym) - self.pair.coef(which) * self.V * pv
            out = self.proj(out) + self.shift * (v - pv)
        else:
            out = self.space.apply(v, self.sym) - self.pair.coef(which) * self.V * v
        return (out * self.sw).ravel()

    def _R(self, x):
        v = x.reshape(self.shape) / self.sw
        out = self.space.apply(v, self.res)
        if self.proj is not None:
            pv = self.proj(v)
            out = self.proj(self.space.apply(pv, self.res)) + (v - pv) / self.shift
        return (out * self.sw).ravel()

    def operator(self, which):
        return LinearOperator((self.n, self.n), matvec=lambda x: self._L(which, x),
                              matmat=lambda X: self._columns(X, lambda c: self._L(which, c)),
                              dtype=float)

    def preconditioner(self):
        return LinearOperator((self.n, self.n), matvec=self._R,
                              matmat=lambda X: self._columns(X, self._R), dtype=float)

    def random_block(self, k, seed=0):
        rng = np.random.default_rng(seed)
        g = self.pair.grid
        X, Y = g.mesh()
        env = np.exp(-0.05 * X**2 - 0.01 * Y**2)
        cols = []
        for _ in range(k):
            a = rng.standard_normal(g.shape) * env
            if self.proj is not None:
                a = self.proj(a)
            cols.append(self.to_vec(a))
        return np.column_stack(cols)


@dataclass
class EigResult:
    value: float
    vector: RealField
    residual: float
    sector: str


def _residuals(op, X, lam):
    AX = op.matmat(X)
    return np.linalg.norm(AX - X * lam, axis=0) / np.linalg.norm(X, axis=0)


def lowest_eigs(pair, which="plus", sector=None, k=2, tol=1e-8, maxiter=400, guard=2, seed=0):
    """k algebraically smallest eigenvalues by preconditioned LOBPCG.

    The resolvent of the constant-coefficient operator preconditions the
    block iteration; results are accepted when every relative residual
    ||A v - lambda v|| / ||v|| is at most ``tol``.
    """
    if not 1 <= k <= 8:
        raise ValidationError("k must lie in 1..8")
    real = _Realization(pair, sector)
    A = real.operator(which)
    T = real.preconditioner()
    m = min(k + guard, real.n - 1)
    X = real.random_block(m, seed)
    best = None
    for attempt in range(4):
        lam, X = lobpcg(A, X, M=T, largest=False, tol=0.1 * tol, maxiter=maxiter,
                        retLambdaHistory=False, verbosityLevel=0)
        order = np.argsort(lam)
        lam, X = lam[order], X[:, order]
        res = _residuals(A, X[:, :k], lam[:k])
        worst = float(res.max())
        best = worst if best is None else min(best, worst)
        if worst <= tol:
            break
        log.debug("lobpcg restart %d: worst residual %.2e", attempt, worst)
    else:
        raise NonConvergenceError(
            f"lobpcg did not reach residual {tol:g} for {which} on {sector or 'full'} "
            f"(best {best:.2e})", residual=best)
    label = "full" if real.sector is None else str(real.sector)
    return [EigResult(float(lam[j]), real.to_field(X[:, j]), float(res[j]), label) for j in range(k)]


def morse_index(pair, which="plus", sector=None, neg_tol=1e-6, tol=1e-8):
    """Number of eigenvalues below -neg_tol (zero modes sit within neg_tol of 0)."""
    k = 2
    while True:
        eigs = lowest_eigs(pair, which, sector, k, tol=tol)
        n = sum(e.value < -neg_tol for e in eigs)
        if n < k or k == 8:
            if n == k:
                raise NonConvergenceError("more than 8 negative eigenvalues")
            return n
        k = min(2 * k, 8)


# ----------------------------------------------------- d/d omega and D_11

def _taper(coord, half, a=0.75, b=0.95):
    r = np.abs(coord) / half
    out = np.ones_like(r)
    mid = (r > a) & (r < b)
    out[mid] = 0.5 * (1.0 + np.cos(np.pi * (r[mid] - a) / (b - a)))
    out[r >= b] = 0.0
    return out


def d_omega_phi(sol, omega=None, max_loss=0.01):
    """Analytic omega-derivative of the ground state family at ``omega``.

    d phi / d omega = (1/omega) [phi/(p-2) + x phi_x / 2 + y phi_y / (2s)],
    with the unbounded weights x, y tapered to zero near the box edge.
    """
    if omega is not None and omega != sol.params.omega:
        sol = scale_soliton(sol, omega)
    g = sol.grid
    s, p, om = sol.params.s, sol.params.p, sol.params.omega
    phi = sol.values
    cx = _taper(g.x, g.lx / 2)
    cy = _taper(g.y, g.ly / 2)
    lost = np.sqrt(np.sum(((1.0 - np.outer(cx, cy)) * phi) ** 2) / np.sum(phi**2))
    if lost > max_loss:
        raise ResolutionError(f"taper removes {lost:.2%} of ||phi||_2; enlarge the box")
    xphi = (g.x * cx)[:, None] * spectral_derivative(phi, g, 0)
    yphi = (g.y * cy)[None, :] * spectral_derivative(phi, g, 1)
    vals = (phi / (p - 2.0) + 0.5 * xphi + 0.5 / s * yphi) / om
    return RealField(g, vals)


def _odd_part_norm(a):
    return float(np.linalg.norm(a - EVEN_EVEN.project(a)))


def solve_Lplus(pair, rhs, sector=EVEN_EVEN, tol=1e-8, maxiter=2000):
    """Solve L+ v = rhs in the even-even sector by preconditioned MINRES."""
    _check_grid(pair, rhs)
    if _parse_sector(sector) != EVEN_EVEN:
        raise ValidationError("solve_Lplus works in the even-even sector only")
    r = rhs.values
    nr = float(np.linalg.norm(r))
    if _odd_part_norm(r) > 1e-10 * max(nr, 1e-300):
        raise ValidationError("right-hand side has a component outside the even-even sector")
    real = _Realization(pair, EVEN_EVEN)
    A = real.operator("plus")
    b = real.to_vec(r)
    hist = []
    x, info = minres(A, b, M=real.preconditioner(), rtol=1e-3 * tol, maxiter=maxiter,
                     callback=lambda xk: hist.append(None))
    res = float(np.linalg.norm(A.matvec(x) - b) / np.linalg.norm(b))
    if res > tol:
        raise NonConvergenceError(
            f"MINRES stagnated at relative residual {res:.2e} after {len(hist)} iterations",
            residual=res, history=hist)
    return real.to_field(x)


def _dot(f, g):
    return float(np.sum(f.values * g.values) * f.grid.cell)


@dataclass
class StabilityReport:
    s: float
    p: float
    omega: float
    n_plus: int
    n_minus: int
    gap_minus: float
    d11_closed: float
    d11_scaling: float
    d11_solve: float
    n_D: int
    k_ham: int
    k_r: int
    k_c: int
    k_i_minus: int
    marginal_band: float
    lambda_unstable: float | None
    verdict: str
    eig_minus: list = field(default_factory=list)
    eig_plus: list = field(default_factory=list)

    def to_dict(self):
        from dataclasses import asdict
        return asdict(self)


def verdict_from_d11(d11, band):
    if abs(d11) < band:
        return "Marginal"
    return "Stable" if d11 < 0 else "Unstable"


def vk_report(pair, with_lambda=True, with_morse=True):
    """Vakhitov-Kolokolov quantity three ways, Morse indices and the index count."""
    sol = pair.base
    s, p, om = sol.params.s, sol.params.p, sol.params.omega
    phi = sol.field
    mass = _dot(phi, phi)
    e = mass_exponent(s, p)
    d11_closed = -e / (2.0 * om) * mass
    dw = d_omega_phi(sol)
    d11_scaling = -_dot(dw, phi)
    v = solve_Lplus(pair, phi)
    d11_solve = _dot(v, phi)
    band = 1e-4 * math.sqrt(mass) * math.sqrt(_dot(dw, dw))
    est = (d11_closed, d11_scaling, d11_solve)
    if all(abs(d) > band for d in est) and len({math.copysign(1, d) for d in est}) > 1:
        raise InconsistencyError(
            f"D11 estimates disagree in sign: closed {d11_closed:.3e}, "
            f"scaling {d11_scaling:.3e}, solve {d11_solve:.3e}")
    verdict = verdict_from_d11(d11_solve, band)
    # n(D) counts negative eigenvalues of the 1x1 matrix D = <L+^{-1} phi, phi>
    n_D = 1 if d11_solve < 0 else 0
    if with_morse:
        ep = lowest_eigs(pair, "plus", None, 3)
        em = lowest_eigs(pair, "minus", None, 2)
        n_plus = morse_index(pair, "plus")
        n_minus = morse_index(pair, "minus")
        gap = em[1].value
    else:
        ep, em, n_plus, n_minus, gap = [], [], 1, 0, math.nan
    k_ham = n_plus + n_minus - n_D
    lam = None
    if with_lambda and verdict == "Unstable":
        ur = unstable_eigenvalue(pair)
        lam = None if ur is None else ur.value
    return StabilityReport(
        s, p, om, n_plus, n_minus, gap, d11_closed, d11_scaling, d11_solve, n_D, k_ham,
        k_ham, 0, 0, band, lam, verdict,
        [e_.value for e_ in em], [e_.value for e_ in ep])


# ------------------------------------------------------------ unstable mode

@dataclass
class UnstableMode:
    value: float
    z1: RealField
    z2: RealField
    residual: float
    mu: float
    sector: str = "even-even"

    @property
    def vector(self):
        return self.z1


def block_residual(pair, lam, z1, z2):
    """|| J L z - lambda z || / ||z|| for J = [[0, -1], [1, 0]], L = diag(L+, L-)."""
    top = -apply_Lminus(pair, z2).values - lam * z1.values
    bot = apply_Lplus(pair, z1).values - lam * z2.values
    num = math.sqrt(np.sum(top**2) + np.sum(bot**2))
    den = math.sqrt(np.sum(z1.values**2) + np.sum(z2.values**2))
    return num / den


def unstable_eigenvalue(pair, tol=1e-6, mu_tol=1e-8, maxiter=200, refine_steps=4, seed=1):
    """Largest real eigenvalue of the block problem in the even-even sector.

    From L+ z1 = lambda z2, L- z2 = -lambda z1 one gets L- L+ z1 = -lambda^2 z1.
    With z1 = L- w on the complement of phi, where L- is positive, this is
    the symmetric pencil (L- L+ L-) w = mu L- w, mu = -lambda^2, solved by
    LOBPCG with the cubed resolvent as preconditioner.  Returns None when the
    smallest mu is at least -mu_tol.
    """
    real = _Realization(pair, EVEN_EVEN)
    n = real.n
    q = real.to_vec(pair.phi)
    q /= np.linalg.norm(q)
    Lp = real.operator("plus")
    Lm = real.operator("minus")

    def P(x):
        return x - q * (q @ x)

    big = 1e3

    def A_mv(x):
        y = Lm.matvec(P(x))
        return P(Lm.matvec(Lp.matvec(y))) + big * q * (q @ x)

    def B_mv(x):
        return P(Lm.matvec(P(x))) + q * (q @ x)

    def T_mv(x):
        return real._R(real._R(real._R(x)))

    def op(f):
        return LinearOperator((n, n), matvec=f, dtype=float,
                              matmat=lambda X: np.column_stack([f(X[:, j]) for j in range(X.shape[1])]))

    A, B, T = op(A_mv), op(B_mv), op(T_mv)
    X = np.column_stack([P(c) for c in real.random_block(3, seed=seed).T])
    # LOBPCG locates mu; its absolute tolerance is not reachable at the scale
    # of the cubic operator, so the vector is polished by inverse iteration
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        mu_all, X = lobpcg(A, X, B=B, M=T, largest=False, tol=1e-12, maxiter=maxiter,
                           verbosityLevel=0)
    j = int(np.argmin(mu_all))
    mu = float(mu_all[j])
    if mu >= -mu_tol:
        return None
    w = X[:, j]
    res = math.inf
    for _ in range(refine_steps):
        sigma = float(w @ A_mv(w)) / float(w @ B_mv(w))
        shifted = op(lambda x: A_mv(x) - sigma * B_mv(x))
        w_new, _ = minres(shifted, B_mv(w), M=T, rtol=1e-12, maxiter=2000)
        w = P(w_new)
        w /= math.sqrt(float(w @ B_mv(w)))
        mu = float(w @ A_mv(w))
        if mu >= -mu_tol:
            return None
        lam_u = math.sqrt(-mu)
        z1 = real.to_field(Lm.matvec(w))
        z1 = RealField(z1.grid, z1.values / np.linalg.norm(z1.values))
        z2 = RealField(z1.grid, apply_Lplus(pair, z1).values / lam_u)
        res = block_residual(pair, lam_u, z1, z2)
        log.debug("inverse iteration: mu %.12g, block residual %.2e", mu, res)
        if res <= tol:
            return UnstableMode(lam_u, z1, z2, res, mu)
    raise NonConvergenceError(
        f"unstable mode block residual {res:.2e} exceeds {tol:g}", residual=res)
