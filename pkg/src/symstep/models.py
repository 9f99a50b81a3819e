"""Phase-space state, separable Hamiltonians, and the built-in potentials.

A system is described by H(p, q) = sum_i p_i^2 / (2 m_i) + V(q) with a
constant, strictly positive diagonal mass vector m and a smooth potential V
supplying an analytic gradient and Hessian.  Four potentials ship with the
package:

====================  ============================================  =========
name                  V(q)                                          dimension
====================  ============================================  =========
``free``              0                                             any d
``harmonic``          (omega^2 / 2) |q|^2                           any d
``kepler``            -1 / |q|                                      2
``lj-cluster``        sum_{i<j} 4 eps [(sig/r_ij)^12 - (sig/r_ij)^6]  3N
====================  ============================================  =========

Evaluating ``kepler`` or ``lj-cluster`` at a configuration with a zero
inter-particle distance raises :class:`SingularityError`; evaluations never
return non-finite numbers.  Custom potentials can subclass
:class:`PotentialModel` and override ``_value``/``_gradient``/``_hessian``
(such models take the generic integration path rather than the compiled
kernels).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


class SingularityError(ValueError):
    """Potential evaluated at (or through) a singular configuration."""


def _as_vector(x, name):
    v = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Position/momentum pair (q, p), both finite vectors of dimension d."""

    q: np.ndarray
    p: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, PhaseState):
            return NotImplemented
        return (np.array_equal(self.q, other.q)
                and np.array_equal(self.p, other.p))

    def __post_init__(self):
        # copy so freezing the arrays below cannot lock a caller's buffer
        q = _as_vector(self.q, "q").copy()
        p = _as_vector(self.p, "p").copy()
        if q.size != p.size:
            raise ValueError(f"q and p dimensions differ: {q.size} vs {p.size}")
        if q.size < 1:
            raise ValueError("phase state needs dimension >= 1")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("phase state components must be finite")
        q.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dimension(self):
        return self.q.size


@dataclass(frozen=True)
class EnergyValue:
    total: float
    kinetic: float
    potential: float


@dataclass(frozen=True)
class DerivativeReport:
    """Worst-case relative finite-difference errors, see validate_derivatives."""

    gradient_error: float
    hessian_error: float


class PotentialModel:
    """A named potential with dimension, diagonal mass, and parameters.

    ``kind`` >= 0 marks a built-in model that the compiled kernels can
    evaluate (``kernel_params`` is its flat parameter vector); kind = -1
    models are evaluated through the Python ``_value``/``_gradient``/
    ``_hessian`` hooks only.
    """

    kind = -1

    def __init__(self, name, dimension, mass=None, parameters=None):
        dimension = int(dimension)
        if dimension < 1:
            raise ValueError("model dimension must be >= 1")
        if mass is None:
            mass = np.ones(dimension)
        else:
            m = np.asarray(mass, dtype=np.float64)
            mass = np.full(dimension, float(m)) if m.ndim == 0 else _as_vector(m, "mass")
        if mass.size != dimension:
            raise ValueError(f"mass has length {mass.size}, model dimension is {dimension}")
        if not np.all(np.isfinite(mass)) or np.any(mass <= 0.0):
            raise ValueError("mass entries must be finite and strictly positive")
        self.name = str(name)
        self.dimension = dimension
        self.mass = mass
        self.parameters = dict(parameters or {})
        self.kernel_params = np.zeros(0)

    def __repr__(self):
        return f"PotentialModel({self.name!r}, d={self.dimension})"

    # -- hooks for python-level models ------------------------------------
    def _value(self, q):
        raise NotImplementedError

    def _gradient(self, q):
        raise NotImplementedError

    def _hessian(self, q):
        raise NotImplementedError

    # -- validated public evaluations --------------------------------------
    def _check(self, q):
        v = _as_vector(q, "q")
        if v.size != self.dimension:
            raise ValueError(
                f"dimension mismatch: model {self.name!r} has d={self.dimension}, "
                f"got vector of length {v.size}")
        return v

    def value(self, q):
        q = self._check(q)
        if self.kind >= 0:
            out = kernels.model_value(self.kind, self.kernel_params, q)
        else:
            out = float(self._value(q))
        if not np.isfinite(out):
            raise SingularityError(
                f"potential {self.name!r} is singular (or overflows) at q={q}")
        return float(out)

    def gradient(self, q):
        q = self._check(q)
        if self.kind >= 0:
            out = kernels.model_gradient(self.kind, self.kernel_params, q)
        else:
            out = _as_vector(self._gradient(q), "gradient")
        if not np.all(np.isfinite(out)):
            raise SingularityError(
                f"gradient of {self.name!r} is singular (or overflows) at q={q}")
        return out

    def hessian(self, q):
        q = self._check(q)
        if self.kind >= 0:
            out = kernels.model_hessian(self.kind, self.kernel_params, q)
        else:
            out = np.ascontiguousarray(np.asarray(self._hessian(q), dtype=np.float64))
        if out.shape != (self.dimension, self.dimension):
            raise ValueError(f"hessian has shape {out.shape}")
        if not np.all(np.isfinite(out)):
            raise SingularityError(
                f"hessian of {self.name!r} is singular (or overflows) at q={q}")
        return out


class _BuiltinModel(PotentialModel):
    def __init__(self, name, dimension, kind, kernel_params, mass=None, parameters=None):
        super().__init__(name, dimension, mass=mass, parameters=parameters)
        self.kind = int(kind)
        self.kernel_params = np.ascontiguousarray(np.asarray(kernel_params, dtype=np.float64))


def make_model(name, dimension=None, mass=None, **parameters):
    """Construct a built-in model by name.

    free/harmonic need an explicit ``dimension``; kepler is fixed at d=2;
    lj-cluster needs dimension = 3N for N >= 2 particles.  Parameters:
    ``omega`` (harmonic, default 1.0), ``epsilon``/``sigma`` (lj-cluster,
    default 1.0 each, reduced units).
    """
    key = str(name).strip().lower()
    if key == "free":
        if dimension is None:
            raise ValueError("free model needs a dimension")
        if parameters:
            raise ValueError(f"free model takes no parameters, got {sorted(parameters)}")
        return _BuiltinModel("free", dimension, kernels.KIND_FREE, [], mass=mass)
    if key == "harmonic":
        if dimension is None:
            raise ValueError("harmonic model needs a dimension")
        omega = float(parameters.pop("omega", 1.0))
        if parameters:
            raise ValueError(f"unknown harmonic parameters {sorted(parameters)}")
        if omega <= 0:
            raise ValueError("omega must be > 0")
        return _BuiltinModel("harmonic", dimension, kernels.KIND_HARMONIC,
                             [omega], mass=mass, parameters={"omega": omega})
    if key == "kepler":
        if dimension not in (None, 2):
            raise ValueError("kepler model is planar: dimension must be 2")
        if parameters:
            raise ValueError(f"kepler model takes no parameters, got {sorted(parameters)}")
        return _BuiltinModel("kepler", 2, kernels.KIND_KEPLER, [], mass=mass)
    if key in ("lj-cluster", "lj"):
        if dimension is None:
            raise ValueError("lj-cluster model needs a dimension (3N)")
        if dimension % 3 != 0 or dimension < 6:
            raise ValueError("lj-cluster dimension must be 3N with N >= 2")
        epsilon = float(parameters.pop("epsilon", 1.0))
        sigma = float(parameters.pop("sigma", 1.0))
        if parameters:
            raise ValueError(f"unknown lj-cluster parameters {sorted(parameters)}")
        if epsilon <= 0 or sigma <= 0:
            raise ValueError("epsilon and sigma must be > 0")
        return _BuiltinModel("lj-cluster", dimension, kernels.KIND_LJ,
                             [epsilon, sigma], mass=mass,
                             parameters={"epsilon": epsilon, "sigma": sigma})
    raise ValueError(f"unknown model {name!r} "
                     "(choose free, harmonic, kepler, lj-cluster)")


MODEL_NAMES = ("free", "harmonic", "kepler", "lj-cluster")


def potential_value(model, q):
    """V(q)."""
    return model.value(q)


def potential_gradient(model, q):
    """Analytic gradient of V at q."""
    return model.gradient(q)


def potential_hessian(model, q):
    """Analytic Hessian of V at q (symmetric d x d)."""
    return model.hessian(q)


def hamiltonian_energy(model, s):
    """Total/kinetic/potential energy of a phase state.

    kinetic = sum p_i^2 / (2 m_i), potential = V(q), total = their sum.
    """
    if s.dimension != model.dimension:
        raise ValueError(f"state dimension {s.dimension} != model dimension {model.dimension}")
    kinetic = float(0.5 * np.sum(s.p * s.p / model.mass))
    potential = model.value(s.q)
    return EnergyValue(kinetic + potential, kinetic, potential)


def validate_derivatives(model, q, fd_step=1e-5):
    """Compare analytic derivatives with central finite differences.

    The gradient is checked against differences of the value and the Hessian
    against differences of the gradient; each result is a worst-case relative
    error ||analytic - fd||_inf / (1 + ||fd||_inf).  A singular configuration
    anywhere in the difference stencil raises SingularityError.
    """
    fd_step = float(fd_step)
    if fd_step <= 0:
        raise ValueError("fd_step must be > 0")
    q = _as_vector(q, "q")
    d = model.dimension
    ga = model.gradient(q)
    Ha = model.hessian(q)
    g_fd = np.empty(d)
    H_fd = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = fd_step
        g_fd[i] = (model.value(q + e) - model.value(q - e)) / (2 * fd_step)
        H_fd[:, i] = (model.gradient(q + e) - model.gradient(q - e)) / (2 * fd_step)
    g_err = np.max(np.abs(ga - g_fd)) / (1.0 + np.max(np.abs(g_fd)))
    h_err = np.max(np.abs(Ha - H_fd)) / (1.0 + np.max(np.abs(H_fd)))
    return DerivativeReport(float(g_err), float(h_err))
