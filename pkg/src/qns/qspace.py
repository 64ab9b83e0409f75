"""Coefficient model of quantum Euclidean space in frequency variables.

An element is stored as its Weyl coefficient array f on the symmetric
lattice {k * spacing : k in {-K..K}^d}; it stands for the band-limited
operator  w * sum_k f(xi_k) lambda(xi_k),  where lambda satisfies the Weyl
relation  lambda(t) lambda(s) = exp(i (t, theta s)) lambda(s) lambda(t).
Products are twisted convolutions with kernel phase exp(i/2 (xi, theta eta))
and Galerkin truncation (contributions leaving the band are dropped), the
trace reads the zero-frequency coefficient with no cell weight, and Schatten
norms are traces of *-powers.  All operations are pure: elements are
immutable and results are new objects.
"""

import numpy as np

from . import backend

_ANTISYM_MSG = "theta must be exactly antisymmetric with zero diagonal"


class ThetaMatrix:
    """Real antisymmetric deformation matrix (exact antisymmetry required)."""

    def __init__(self, entries):
        arr = np.array(entries, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("theta must be a square matrix")
        if not np.isfinite(arr).all():
            raise ValueError("theta entries must be finite")
        # tolerance 0: floating inputs are either antisymmetric or rejected
        if np.any(arr != -arr.T) or np.any(np.diag(arr) != 0.0):
            raise ValueError(_ANTISYM_MSG)
        arr.flags.writeable = False
        self._arr = arr

    @classmethod
    def zero(cls, d):
        return cls(np.zeros((d, d)))

    @classmethod
    def planar(cls, s, d=2):
        """Block parameterization s * J with J = [[0, 1], [-1, 0]] (d = 2)."""
        if d != 2:
            raise ValueError("planar parameterization is defined for d = 2")
        return cls([[0.0, float(s)], [-float(s), 0.0]])

    @property
    def d(self):
        return self._arr.shape[0]

    @property
    def is_zero(self):
        return not np.any(self._arr)

    def as_array(self):
        return self._arr

    def scaled(self, factor):
        return ThetaMatrix(self._arr * float(factor))

    def __eq__(self, other):
        return (
            isinstance(other, ThetaMatrix)
            and self._arr.shape == other._arr.shape
            and bool(np.all(self._arr == other._arr))
        )

    def __hash__(self):
        return hash((self._arr.shape, self._arr.tobytes()))

    def __repr__(self):
        return "ThetaMatrix(%s)" % (self._arr.tolist(),)


class FrequencyGrid:
    """Symmetric frequency lattice: M = 2K+1 nodes per axis, spacing 2 pi / L."""

    def __init__(self, d, K, L):
        if int(d) != d or d < 1:
            raise ValueError("d must be a positive integer")
        if int(K) != K or K < 1:
            raise ValueError("K must be a positive integer")
        if not (L > 0):
            raise ValueError("L must be positive")
        self.d = int(d)
        self.K = int(K)
        self.L = float(L)
        self.M = 2 * self.K + 1
        self.spacing = 2.0 * np.pi / self.L
        self.weight = self.spacing ** self.d
        self.shape = (self.M,) * self.d
        self.size = self.M ** self.d
        self._cache = {}

    def k_axis(self):
        return np.arange(-self.K, self.K + 1)

    def xi_axis(self):
        return self.k_axis() * self.spacing

    def x_axis(self):
        # spatial sample points n L / M, n = 0..M-1 (period L)
        return np.arange(self.M) * (self.L / self.M)

    def x_axis_centered(self):
        # same nodes wrapped into [-L/2, L/2), matching the periodic sampling
        x = self.x_axis()
        return np.where(x < self.L / 2, x, x - self.L)

    def xi_mesh(self):
        if "xi_mesh" not in self._cache:
            axes = np.meshgrid(*([self.xi_axis()] * self.d), indexing="ij")
            self._cache["xi_mesh"] = np.stack(axes)
        return self._cache["xi_mesh"]

    def xi_abs2(self):
        if "xi_abs2" not in self._cache:
            self._cache["xi_abs2"] = np.sum(self.xi_mesh() ** 2, axis=0)
        return self._cache["xi_abs2"]

    def center(self):
        return (self.K,) * self.d

    def index_of(self, k):
        k = tuple(int(v) for v in k)
        if len(k) != self.d or any(abs(v) > self.K for v in k):
            raise ValueError("mode %r outside the band" % (k,))
        return tuple(v + self.K for v in k)

    def __eq__(self, other):
        return (
            isinstance(other, FrequencyGrid)
            and (self.d, self.K, self.L) == (other.d, other.K, other.L)
        )

    def __hash__(self):
        return hash((self.d, self.K, self.L))

    def __repr__(self):
        return "FrequencyGrid(d=%d, K=%d, L=%g)" % (self.d, self.K, self.L)


def _freeze(arr):
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.flags.writeable = False
    return arr


class QElement:
    """Immutable band-limited element of the theta-deformed algebra."""

    def __init__(self, grid, theta, coeffs):
        if theta.d != grid.d:
            raise ValueError("theta dimension %d != grid dimension %d" % (theta.d, grid.d))
        coeffs = np.asarray(coeffs)
        if coeffs.shape != grid.shape:
            raise ValueError("coefficient shape %r != grid shape %r" % (coeffs.shape, grid.shape))
        self.grid = grid
        self.theta = theta
        self.coeffs = _freeze(coeffs)

    @classmethod
    def zeros(cls, grid, theta):
        return cls(grid, theta, np.zeros(grid.shape))

    def _with(self, coeffs):
        return QElement(self.grid, self.theta, coeffs)

    def __add__(self, other):
        _require_compat(self, other)
        return self._with(self.coeffs + other.coeffs)

    def __sub__(self, other):
        _require_compat(self, other)
        return self._with(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, QElement):
            raise TypeError("use twisted_convolution for element products")
        return self._with(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self._with(-self.coeffs)

    def __repr__(self):
        return "QElement(%r, theta=%r)" % (self.grid, self.theta)


class SymbolField:
    """Spatial samples of a symbol on the uniform lattice n L / M."""

    def __init__(self, grid, values):
        values = np.asarray(values)
        if values.shape != grid.shape:
            raise ValueError("symbol shape %r != grid shape %r" % (values.shape, grid.shape))
        self.grid = grid
        self.values = _freeze(values)

    def __sub__(self, other):
        if self.grid != other.grid:
            raise ValueError("symbol grids differ")
        return SymbolField(self.grid, self.values - other.values)

    def __add__(self, other):
        if self.grid != other.grid:
            raise ValueError("symbol grids differ")
        return SymbolField(self.grid, self.values + other.values)

    def __mul__(self, scalar):
        return SymbolField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def l2_norm(self):
        # Riemann L2 norm over one period
        w = (self.grid.L / self.grid.M) ** self.grid.d
        return float(np.sqrt(w * np.sum(np.abs(self.values) ** 2)))


def _require_compat(x, y):
    if x.grid != y.grid:
        raise ValueError("elements live on different grids: %r vs %r" % (x.grid, y.grid))
    if x.theta != y.theta:
        raise ValueError("elements carry different theta matrices")


def single_mode(grid, theta, k, value):
    """Element value * delta_{xi_k}; value = 1/weight gives the unitary lambda(xi_k)."""
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    coeffs[grid.index_of(k)] = value
    return QElement(grid, theta, coeffs)


def identity_element(grid, theta):
    return single_mode(grid, theta, (0,) * grid.d, 1.0 / grid.weight)


def twisted_convolution(x, y):
    """Product of the represented operators, as a coefficient array.

    (x * y)(xi) = w * sum_eta exp(i/2 (xi, theta eta)) x(xi - eta) y(eta),
    with out-of-band x-indices dropped (Galerkin truncation).
    """
    _require_compat(x, y)
    g = x.grid
    out = backend.twisted_convolve(
        x.coeffs, y.coeffs, g.K, g.spacing, x.theta.as_array(), g.weight
    )
    return x._with(out)


def adjoint(x):
    """Coefficients of the operator adjoint: conj(f(-xi))."""
    rev = (slice(None, None, -1),) * x.grid.d
    return x._with(np.conj(x.coeffs[rev]))


def adjoint_defect(x):
    """Max deviation from self-adjointness, relative to the coefficient scale."""
    scale = float(np.max(np.abs(x.coeffs)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(adjoint(x).coeffs - x.coeffs))) / scale


def trace(x):
    """tau(x) = f(0); no cell-volume weight."""
    return complex(x.coeffs[x.grid.center()])


def trace_product(x, y):
    """tau(x * y) evaluated without forming the product: w sum f(-eta) g(eta)."""
    _require_compat(x, y)
    rev = (slice(None, None, -1),) * x.grid.d
    return complex(x.grid.weight * np.sum(x.coeffs[rev] * y.coeffs))


def l2_inner(x, y):
    """Hilbert-Schmidt pairing tau(x^adj * y) = w sum conj(f) g."""
    _require_compat(x, y)
    return complex(x.grid.weight * np.sum(np.conj(x.coeffs) * y.coeffs))


def coeff_lp_norm(x, p):
    """Lp norm of the coefficient function under the lattice measure."""
    a = np.abs(x.coeffs)
    if p == np.inf:
        return float(a.max())
    if not p >= 1:
        raise ValueError("p must be >= 1 or inf")
    return float((x.grid.weight * np.sum(a ** p)) ** (1.0 / p))


def _power(y, n):
    # binary exponentiation in the twisted algebra; n >= 1
    result = None
    base = y
    while n:
        if n & 1:
            result = base if result is None else twisted_convolution(result, base)
        n >>= 1
        if n:
            base = twisted_convolution(base, base)
    return result


def schatten_norm(x, p):
    """Schatten p-norm; p = 2 is the coefficient L2 norm, even p via *-powers.

    ||x||_p^p = tau((x^adj x)^{p/2}); the final trace pairs the two power
    halves directly, so p = 2^k costs k-1 products (repeated squaring).
    Odd or non-integer p is rejected: no spectral factorization is available
    for the truncated model.
    """
    if p == 2:
        return float(np.sqrt(x.grid.weight * np.sum(np.abs(x.coeffs) ** 2)))
    if p != int(p) or int(p) < 2 or int(p) % 2:
        raise ValueError("only even integer Schatten orders are supported, got %r" % (p,))
    m = int(p) // 2
    y = twisted_convolution(adjoint(x), x)
    a = m // 2
    b = m - a
    if a == 0:
        val = trace(y)
    else:
        ya = _power(y, a)
        yb = ya if b == a else _power(y, b)
        val = trace_product(ya, yb)
    # the exact value is real nonnegative; clamp the roundoff residue
    return float(max(val.real, 0.0) ** (1.0 / int(p)))


def fourier_multiplier(x, m):
    """Apply a frequency multiplier; m is an array over the grid or a callable
    receiving the stacked xi mesh (shape (d,) + grid.shape)."""
    if callable(m):
        m = m(x.grid.xi_mesh())
    m = np.asarray(m)
    if m.shape != x.grid.shape:
        raise ValueError("multiplier shape %r != grid shape %r" % (m.shape, x.grid.shape))
    return x._with(x.coeffs * m)


def partial_derivative(x, axis):
    """d_j x, realized as the multiplier i xi_j."""
    if not 0 <= axis < x.grid.d:
        raise ValueError("axis %d out of range for d = %d" % (axis, x.grid.d))
    return x._with(x.coeffs * (1j * x.grid.xi_mesh()[axis]))


def laplacian(x):
    return x._with(x.coeffs * (-x.grid.xi_abs2()))


def dilation(x, eps):
    """Parabolic dilation onto the eps^{-2} theta algebra.

    Realized as the trace-scaled isomorphism lambda(xi) -> lambda'(eps xi):
    node k keeps its index but moves to eps * xi_k (grid spacing scales by
    eps, i.e. L -> L/eps), theta scales by eps^{-2}, and coefficients scale
    by eps^{-d} -- the coefficient function eps^{-d} f(xi/eps) of the symbol
    phi(eps x).  Index-wise the twisted-product phases are unchanged, so
    ||dilation(x, eps)||_p = eps^{-d/p} ||x||_p holds exactly for every even p.
    """
    eps = float(eps)
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = x.grid
    if eps == 1.0:
        return x
    new_grid = FrequencyGrid(g.d, g.K, g.L / eps)
    new_theta = x.theta.scaled(eps ** -2)
    return QElement(new_grid, new_theta, x.coeffs * eps ** (-g.d))


def from_symbol(sym, theta):
    """Lift a symbol: coefficients are the Riemann Fourier transform samples
    (L/M)^d sum_n phi(x_n) exp(-i x_n . xi_k)."""
    g = sym.grid
    scale = (g.L / g.M) ** g.d
    coeffs = scale * np.fft.fftshift(np.fft.fftn(sym.values))
    return QElement(g, theta, coeffs)


def to_symbol(x):
    """Inverse of from_symbol: phi(x_n) = (2 pi)^{-d} w sum_k f(xi_k) e^{i x_n xi_k}."""
    g = x.grid
    scale = (g.M / g.L) ** g.d
    values = scale * np.fft.ifftn(np.fft.ifftshift(x.coeffs))
    return SymbolField(g, values)


def edge_mass(x):
    """Fraction of squared coefficient mass on the outermost index shell."""
    a2 = np.abs(x.coeffs) ** 2
    total = float(a2.sum())
    if total == 0.0:
        return 0.0
    core = a2[(slice(1, -1),) * x.grid.d]
    return float((total - core.sum()) / total)


def _bump_start(grid, theta):
    # deterministic start vector for the power iteration: a centered Gaussian
    # bump keeps its mass in-band under moderate shifts
    sigma = max(grid.spacing, grid.K * grid.spacing / 4.0)
    coeffs = np.exp(-grid.xi_abs2() / (2.0 * sigma ** 2))
    return QElement(grid, theta, coeffs)


def opnorm_estimate(x, iters=30, return_history=False):
    """Lower estimate of the operator norm by power iteration on v -> x * v.

    Estimates are Rayleigh quotients of the positive map v -> x^adj * (x * v)
    and are monotone nondecreasing in the iteration count.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    v = _bump_start(x.grid, x.theta)
    history = []
    est = 0.0
    for _ in range(iters):
        nv = schatten_norm(v, 2)
        if nv == 0.0:
            break
        u = twisted_convolution(x, v)
        est = schatten_norm(u, 2) / nv
        history.append(est)
        v = twisted_convolution(adjoint(x), u) * (1.0 / nv)
    if return_history:
        return est, history
    return est
