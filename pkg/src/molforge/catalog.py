"""Catalog of the 52 parametric equation families.

Each family is a declarative :class:`EquationSpec`: right-hand side / flux,
nominal parameter values, domain, class label, initial-condition generator and
the input-sentence template. The catalog is immutable after import.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import IndexOutOfRange, SlotMismatch

N_GRID = 128          # spatial points for PDE / conservation-law grids
N_FRAMES = 32         # saved time frames, t=0 included
DEFAULT_HORIZON = 5.0


class EqClass(str, Enum):
    ODE1D = "ODE1D"
    ODE2D = "ODE2D"
    ODE3D = "ODE3D"
    PDE = "PDE"
    CONSERVATION = "ConservationLaw"


class RhsKind(str, Enum):
    ODE_RHS = "OdeRhs"
    PDE_OPERATOR = "PdeOperator"
    CONSERVATION_FLUX = "ConservationFlux"


class FluxForm(str, Enum):
    HALF_U2 = "Half_u2"
    LINEAR = "Linear"
    CUBIC_THIRD = "Cubic_third"
    SINE = "Sine"
    COSINE = "Cosine"


class ICFamily(str, Enum):
    SINE_MIXTURE = "SineMixture"
    STEP_FUNCTION = "StepFunction"
    GAUSSIAN_BUMP = "GaussianBump"


FLUX_FUNCS: dict[FluxForm, tuple[Callable, Callable]] = {
    # (f, f')
    FluxForm.HALF_U2: (lambda u: 0.5 * u * u, lambda u: u),
    FluxForm.LINEAR: (lambda u: u, lambda u: np.ones_like(u)),
    FluxForm.CUBIC_THIRD: (lambda u: u ** 3 / 3.0, lambda u: u * u),
    FluxForm.SINE: (np.sin, np.cos),
    FluxForm.COSINE: (np.cos, lambda u: -np.sin(u)),
}


@dataclass(frozen=True)
class EquationSpec:
    index: int
    cls: EqClass
    name: str
    state_dim: int
    nominal_params: tuple[tuple[str, float], ...]
    rhs_kind: RhsKind
    sentence_template: str
    flux_form: Optional[FluxForm] = None
    # Conservation laws: u_t = -q1 (f(u))_x + nu u_xx.
    # viscosity_coeff None -> nu = q2/pi from sampled params; 0.0 -> inviscid;
    # 1.0 -> unit coefficient as printed for the inviscid cubic/sine/cosine rows.
    viscosity_coeff: Optional[float] = None
    time_horizon: float = DEFAULT_HORIZON
    ic_family: ICFamily = ICFamily.SINE_MIXTURE
    text_template_group: str = ""
    domain_length: float = 2.0
    ic_offset: float = 0.0
    ic_scale: float = 1.0
    ode_ic_low: tuple[float, ...] = ()
    ode_ic_high: tuple[float, ...] = ()
    step_label: Optional[str] = None      # "shock" | "rarefaction" for 35-52
    base_index: Optional[int] = None      # underlying 25-33 family for 35-52

    @property
    def is_ode(self) -> bool:
        return self.cls in (EqClass.ODE1D, EqClass.ODE2D, EqClass.ODE3D)

    @property
    def param_symbols(self) -> tuple[str, ...]:
        return tuple(sym for sym, _ in self.nominal_params)


@dataclass(frozen=True)
class ParameterSet:
    values: tuple[tuple[str, float], ...]
    relative_range: float
    seed_path: str

    def as_dict(self) -> dict[str, float]:
        return dict(self.values)

    def as_array(self) -> np.ndarray:
        return np.array([v for _, v in self.values], dtype=np.float64)


@dataclass(frozen=True)
class InitialCondition:
    kind: ICFamily
    values: np.ndarray               # state vector (ODE) or 128-point grid (PDE)
    descriptor_params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


@dataclass(frozen=True)
class SentenceWithSlots:
    text: str
    n_coeff_slots: int
    n_ic_slots: int

    @property
    def n_slots(self) -> int:
        return self.n_coeff_slots + self.n_ic_slots


# ---------------------------------------------------------------------------
# ODE right-hand sides (t, state, params) -> dstate/dt

def _rhs_1(t, u, p):
    return p["a"] * math.sin(2 * math.pi * t) * u


def _rhs_2(t, u, p):
    return p["a"] * math.exp(-t) + p["b"] + 0.0 * u


def _rhs_3(t, u, p):
    return p["a"] * t * t * np.cos(u) + p["b"] * u


def _rhs_4(t, u, p):
    return p["a"] * math.sin(math.exp(-0.5 * t) * math.sin(3 * t)) + p["b"] * u


def _rhs_5(t, u, p):
    return p["a"] * t * np.sin(u)


def _rhs_sir(t, u, p):
    s, i, r = u
    beta, gamma = p["beta"], p["gamma"]
    return np.array([-beta * s * i, beta * s * i - gamma * i, gamma * i])


# Fixed (non-sampled) coefficients of the inhibitory/recovery channels; the
# source material only randomizes [alpha, beta, gamma, delta].
NEURAL_EPS = 0.5
NEURAL_THETA = 0.2
NEURAL_PHI = 0.1


def _rhs_neural(t, u, p):
    e, i, h = u
    de = p["alpha"] * e - p["beta"] * e * i - p["gamma"] * e + 0.01 * math.sin(t)
    di = p["delta"] * e - NEURAL_EPS * i
    dh = NEURAL_THETA * i - NEURAL_PHI * h
    return np.array([de, di, dh])


def _rhs_vdp(t, u, p):
    x, y = u
    return np.array([y, p["mu"] * (1 - x * x) * y - x])


def _rhs_lv(t, u, p):
    x, y = u
    return np.array([p["alpha"] * x - p["beta"] * x * y,
                     p["delta"] * x * y - p["gamma"] * y])


def _rhs_fhn(t, u, p):
    v, w = u
    return np.array([v - v ** 3 / 3 - w + p["I"],
                     (v + p["a"] - p["b"] * w) / p["tau"]])


def _rhs_brusselator(t, u, p):
    x, y = u
    return np.array([p["A"] + x * x * y - (p["B"] + 1) * x,
                     p["B"] * x - x * x * y])


def _rhs_duffing(t, u, p):
    x, y = u
    return np.array([y, -p["delta"] * y - p["alpha"] * x - p["beta"] * x ** 3])


ODE_RHS: dict[int, Callable] = {
    1: _rhs_1, 2: _rhs_2, 3: _rhs_3, 4: _rhs_4, 5: _rhs_5,
    6: _rhs_sir, 7: _rhs_neural, 8: _rhs_vdp, 9: _rhs_lv,
    10: _rhs_fhn, 11: _rhs_brusselator, 12: _rhs_duffing,
}


# ---------------------------------------------------------------------------
# Catalog construction

def _ode(index, cls, name, params, rhs_template, low, high, group):
    dim = {EqClass.ODE1D: 1, EqClass.ODE2D: 2, EqClass.ODE3D: 3}[cls]
    return EquationSpec(
        index=index, cls=cls, name=name, state_dim=dim,
        nominal_params=tuple(params), rhs_kind=RhsKind.ODE_RHS,
        sentence_template=rhs_template, ode_ic_low=tuple(low),
        ode_ic_high=tuple(high), text_template_group=group,
    )


def _pde(index, name, params, template, *, horizon=DEFAULT_HORIZON,
         ic=ICFamily.SINE_MIXTURE, length=2.0, offset=0.0, scale=1.0, group=""):
    return EquationSpec(
        index=index, cls=EqClass.PDE, name=name, state_dim=1,
        nominal_params=tuple(params), rhs_kind=RhsKind.PDE_OPERATOR,
        sentence_template=template, time_horizon=horizon, ic_family=ic,
        domain_length=length, ic_offset=offset, ic_scale=scale,
        text_template_group=group or name.lower().replace(" ", "_"),
    )


_FLUX_TEXT = {
    FluxForm.HALF_U2: "u^2 / 2",
    FluxForm.LINEAR: "u",
    FluxForm.CUBIC_THIRD: "u^3 / 3",
    FluxForm.SINE: "sin(u)",
    FluxForm.COSINE: "cos(u)",
}


def _conservation(index, name, flux, viscosity, *, ic=ICFamily.SINE_MIXTURE,
                  step_label=None, base_index=None, group=""):
    ftext = _FLUX_TEXT[flux]
    if viscosity is None:
        params = (("q1", 1.0), ("q2", 0.01))
        template = ("The equation is u_t = - q1 ( f(u) )_x + ( q2 / pi ) u_xx "
                    f"where f(u) = {ftext} with coefficients [ q1 , q2 ] = "
                    "{coeffs} and initial condition u = {ic} .")
    elif viscosity == 0.0:
        params = (("k", 1.0),)
        template = ("The equation is u_t = - k ( f(u) )_x where f(u) = "
                    f"{ftext} with coefficient k = " + "{coeffs} and initial "
                    "condition u = {ic} .")
    else:
        params = (("k", 1.0),)
        template = ("The equation is u_t = - k ( f(u) )_x + u_xx where f(u) = "
                    f"{ftext} with coefficient k = " + "{coeffs} and initial "
                    "condition u = {ic} .")
    return EquationSpec(
        index=index, cls=EqClass.CONSERVATION, name=name, state_dim=1,
        nominal_params=params, rhs_kind=RhsKind.CONSERVATION_FLUX,
        sentence_template=template, flux_form=flux, viscosity_coeff=viscosity,
        ic_family=ic, step_label=step_label, base_index=base_index,
        text_template_group=group or name.lower().replace(" ", "_"),
    )


def _build_catalog() -> dict[int, EquationSpec]:
    entries: list[EquationSpec] = []

    entries += [
        _ode(1, EqClass.ODE1D, "sinusoidally forced growth",
             [("a", 1.0)],
             "The ODE is u_t = a sin(2 pi t) u with coefficient a = {coeffs} "
             "and initial data u = {ic} .",
             [-2.0], [2.0], "ode1d_sine_growth"),
        _ode(2, EqClass.ODE1D, "decaying source with constant forcing",
             [("a", 1.0), ("b", 2.0)],
             "The ODE is u_t = a exp(-t) + b with coefficients [ a , b ] = "
             "{coeffs} and initial data u = {ic} .",
             [-2.0], [2.0], "ode1d_decaying_source"),
        _ode(3, EqClass.ODE1D, "quadratic-time cosine feedback",
             [("a", 1.0), ("b", 0.3)],
             "The ODE is u_t = a t^2 cos(u) + b u with coefficients "
             "[ a , b ] = {coeffs} and initial data u = {ic} .",
             [-2.0], [2.0], "ode1d_t2_cosine"),
        _ode(4, EqClass.ODE1D, "damped oscillatory forcing with linear growth",
             [("a", 2.0), ("b", 0.5)],
             "The ODE is u_t = a sin(exp(-0.5 t) sin(3 t)) + b u with "
             "coefficients [ a , b ] = {coeffs} and initial data u = {ic} .",
             [-2.0], [2.0], "ode1d_damped_oscillatory"),
        _ode(5, EqClass.ODE1D, "time-ramped pendulum drift",
             [("a", 1.5)],
             "The ODE is u_t = a t sin(u) with coefficient a = {coeffs} "
             "and initial data u = {ic} .",
             [-2.0], [2.0], "ode1d_t_sine"),
        _ode(6, EqClass.ODE3D, "SIR epidemic model",
             [("beta", 0.3), ("gamma", 0.1)],
             "The SIR system is S_t = - beta S I , I_t = beta S I - gamma I , "
             "R_t = gamma I . The parameters are [ beta , gamma ] = {coeffs} "
             "and the initial data is [ S , I , R ] = {ic} .",
             [0.4, 0.05, 0.0], [0.9, 0.3, 0.2], "sir"),
        _ode(7, EqClass.ODE3D, "neural excitation dynamics",
             [("alpha", 0.2), ("beta", 0.1), ("gamma", 0.05), ("delta", 0.5)],
             "The Neural Dynamics system is E_t = alpha E - beta E I - gamma E "
             "+ 0.01 sin(t) , I_t = delta E - eps I , H_t = theta I - phi H . "
             "The parameters are [ alpha , beta , gamma , delta ] = {coeffs} "
             "and the initial data is [ E , I , H ] = {ic} .",
             [0.1, 0.1, 0.1], [1.0, 1.0, 1.0], "neural"),
        _ode(8, EqClass.ODE2D, "Van der Pol oscillator",
             [("mu", 2.0)],
             "The Van der Pol system is x_t = y , y_t = mu (1 - x^2) y - x . "
             "The parameter is mu = {coeffs} and the initial data is "
             "[ x , y ] = {ic} .",
             [-2.0, -2.0], [2.0, 2.0], "van_der_pol"),
        _ode(9, EqClass.ODE2D, "Lotka-Volterra predator-prey system",
             [("alpha", 1.5), ("beta", 1.0), ("gamma", 3.0), ("delta", 1.0)],
             "The Lotka-Volterra system is x_t = alpha x - beta x y , "
             "y_t = delta x y - gamma y . The parameters are "
             "[ alpha , beta , gamma , delta ] = {coeffs} and the initial "
             "data is [ x , y ] = {ic} .",
             [0.5, 0.5], [2.0, 2.0], "lotka_volterra"),
        _ode(10, EqClass.ODE2D, "FitzHugh-Nagumo neuron model",
             [("I", 0.0), ("a", 0.7), ("b", 0.8), ("tau", 0.8)],
             "The FitzHugh-Nagumo system is v_t = v - v^3 / 3 - w + I , "
             "w_t = ( v + a - b w ) / tau . The parameters are "
             "[ I , a , b , tau ] = {coeffs} and the initial data is "
             "[ v , w ] = {ic} .",
             [-1.0, -1.0], [1.0, 1.0], "fitzhugh_nagumo"),
        _ode(11, EqClass.ODE2D, "Brusselator reaction system",
             [("A", 2.0), ("B", 4.0)],
             "The Brusselator system is x_t = A + x^2 y - ( B + 1 ) x , "
             "y_t = B x - x^2 y . The parameters are [ A , B ] = {coeffs} "
             "and the initial data is [ x , y ] = {ic} .",
             [0.5, 0.5], [3.0, 3.0], "brusselator"),
        _ode(12, EqClass.ODE2D, "Duffing oscillator",
             [("alpha", 1.0), ("beta", 0.2), ("delta", 0.3)],
             "The Duffing system is x_t = y , y_t = - delta y - alpha x "
             "- beta x^3 . The parameters are [ alpha , beta , delta ] = "
             "{coeffs} and the initial data is [ x , y ] = {ic} .",
             [-2.0, -2.0], [2.0, 2.0], "duffing"),
    ]

    entries += [
        _pde(13, "heat equation", [("c1", 3e-3)],
             "The equation is u_t = c1 u_xx where c1 = {coeffs} and "
             "u(x,0) = {ic} ."),
        _pde(14, "porous medium equation", [("m", 3.0)],
             "The equation is u_t = ( u^m )_xx with exponent m = {coeffs} "
             "and u(x,0) = {ic} .",
             horizon=0.1, ic=ICFamily.GAUSSIAN_BUMP),
        _pde(15, "Klein-Gordon equation", [("q1", 1.0), ("q2", 0.1)],
             "The equation is u_tt + q2^2 q1^4 u = q1^2 u_xx with "
             "coefficients [ q1 , q2 ] = {coeffs} and u(x,0) = {ic} .",
             horizon=1.0),
        _pde(16, "Sine-Gordon equation", [("q", 1.0)],
             "The equation is u_tt + q sin(u) = u_xx with coefficient "
             "q = {coeffs} and u(x,0) = {ic} .",
             horizon=1.0),
        _pde(17, "Cahn-Hilliard equation", [("q", 0.01)],
             "The equation is u_t + q^2 u_xxxx + 6 ( u u_x )_x = 0 with "
             "coefficient q = {coeffs} and u(x,0) = {ic} .",
             horizon=0.5, offset=-0.7, scale=0.3),
        _pde(18, "Korteweg-de Vries equation", [("q", 0.022)],
             "The equation is u_t + q^2 u_xxx + u u_x = 0 with coefficient "
             "q = {coeffs} and u(x,0) = {ic} .",
             horizon=1.0),
        _pde(19, "advection equation", [("q", 0.5)],
             "The equation is u_t + q u_x = 0 where q = {coeffs} and "
             "u(x,0) = {ic} ."),
        _pde(20, "wave equation", [("q", 0.5)],
             "The equation is u_tt = q u_xx where q = {coeffs} and "
             "u(x,0) = {ic} .",
             horizon=1.0),
        _pde(21, "diffusion-reaction equation with logistic reaction",
             [("q1", 3e-3), ("q2", 1.0)],
             "The equation is u_t = q1 u_xx + q2 R(u) where R(u) = u (1 - u) "
             "with coefficients [ q1 , q2 ] = {coeffs} and u(x,0) = {ic} .",
             offset=0.5, scale=0.25),
        _pde(22, "diffusion-reaction equation with linear reaction",
             [("q1", 3e-3), ("q2", 0.1)],
             "The equation is u_t = q1 u_xx + q2 R(u) where R(u) = u with "
             "coefficients [ q1 , q2 ] = {coeffs} and u(x,0) = {ic} ."),
        _pde(23, "diffusion-reaction equation with bistable reaction",
             [("q1", 3e-3), ("q2", 1.0)],
             "The equation is u_t = q1 u_xx + q2 R(u) where R(u) = u^2 (1 - u) "
             "with coefficients [ q1 , q2 ] = {coeffs} and u(x,0) = {ic} .",
             offset=0.5, scale=0.25),
        _pde(24, "diffusion-reaction equation with square logistic reaction",
             [("q1", 3e-3), ("q2", 1.0)],
             "The equation is u_t = q1 u_xx + q2 R(u) where R(u) = "
             "u^2 (1 - u)^2 with coefficients [ q1 , q2 ] = {coeffs} and "
             "u(x,0) = {ic} .",
             offset=0.5, scale=0.25),
        _pde(34, "Fokker-Planck equation", [("eta", 1e-3)],
             "The equation is the Fokker-Planck equation u_t = D u_xx - "
             "( D / ( kB T ) ) ( U_x u )_x with a cosine potential , fluid "
             "viscosity eta = {coeffs} and u(x,0) = {ic} .",
             horizon=0.1, ic=ICFamily.GAUSSIAN_BUMP, length=1.0),
    ]

    base_cons = [
        (25, "Burgers equation", FluxForm.HALF_U2, None),
        (26, "inviscid Burgers equation", FluxForm.HALF_U2, 0.0),
        (27, "conservation law with linear flux", FluxForm.LINEAR, None),
        (28, "conservation law with cubic flux", FluxForm.CUBIC_THIRD, None),
        (29, "inviscid conservation law with cubic flux", FluxForm.CUBIC_THIRD, 1.0),
        (30, "conservation law with sine flux", FluxForm.SINE, None),
        (31, "inviscid conservation law with sine flux", FluxForm.SINE, 1.0),
        (32, "conservation law with cosine flux", FluxForm.COSINE, None),
        (33, "inviscid conservation law with cosine flux", FluxForm.COSINE, 1.0),
    ]
    for idx, name, flux, visc in base_cons:
        entries.append(_conservation(idx, name, flux, visc))
    for offset, label in ((10, "shock"), (19, "rarefaction")):
        for idx, name, flux, visc in base_cons:
            entries.append(_conservation(
                idx + offset, f"{name} with {'one shock' if label == 'shock' else 'rarefaction'}",
                flux, visc, ic=ICFamily.STEP_FUNCTION, step_label=label,
                base_index=idx,
                group=f"cons_{label}_{flux.value.lower()}_{idx}"))

    catalog = {spec.index: spec for spec in entries}
    assert len(catalog) == 52 and sorted(catalog) == list(range(1, 53))
    return catalog


CATALOG: dict[int, EquationSpec] = _build_catalog()


def get_equation(index: int) -> EquationSpec:
    """Return the immutable catalog entry for ``index`` (1..52)."""
    if not isinstance(index, (int, np.integer)) or not 1 <= int(index) <= 52:
        raise IndexOutOfRange(f"equation index must be in 1..52, got {index!r}")
    return CATALOG[int(index)]


def family_class(index: int) -> EqClass:
    return get_equation(index).cls


# ---------------------------------------------------------------------------
# Sampling

PORUOUS_MEDIUM_EXPONENTS = (2, 3, 4)


def sample_parameters(spec: EquationSpec, relative_range: float,
                      rng: np.random.Generator,
                      variant: int | None = None) -> ParameterSet:
    """Draw each parameter uniformly from [Q(1-r), Q(1+r)].

    Family 14's exponent m is a discrete sub-variant: ``variant`` selects it
    round-robin (builder convention); without it the exponent is drawn
    uniformly from {2, 3, 4}.
    """
    if not 0.0 < relative_range <= 0.5:
        raise ValueError(f"relative_range must be in (0, 0.5], got {relative_range}")
    values = []
    for sym, q in spec.nominal_params:
        if spec.index == 14 and sym == "m":
            if variant is None:
                m = PORUOUS_MEDIUM_EXPONENTS[rng.integers(0, 3)]
            else:
                m = PORUOUS_MEDIUM_EXPONENTS[variant % 3]
            values.append((sym, float(m)))
        else:
            lo, hi = q * (1 - relative_range), q * (1 + relative_range)
            if lo > hi:
                lo, hi = hi, lo
            values.append((sym, float(rng.uniform(lo, hi))))
    return ParameterSet(values=tuple(values), relative_range=relative_range,
                        seed_path=f"family{spec.index}")


def space_grid(spec: EquationSpec, n: int = N_GRID) -> np.ndarray:
    return np.arange(n) * (spec.domain_length / n)


def classify_riemann(flux: FluxForm, u_left: float, u_right: float) -> str:
    """Characteristic-speed label of a single jump under flux f.

    Returns "shock" when f'(uL) > s > f'(uR) with the Rankine-Hugoniot speed
    s = (f(uR)-f(uL))/(uR-uL), "rarefaction" when f'(uL) < f'(uR), and
    "contact" in the degenerate linear-flux case f'(uL) = f'(uR).
    """
    f, fp = FLUX_FUNCS[flux]
    if u_left == u_right:
        return "contact"
    s = (float(f(u_right)) - float(f(u_left))) / (u_right - u_left)
    cl, cr = float(fp(np.float64(u_left))), float(fp(np.float64(u_right)))
    if cl > s > cr:
        return "shock"
    if cl < cr:
        return "rarefaction"
    return "contact"


STEP_MIN_JUMP = 0.2


def sample_initial_condition(spec: EquationSpec,
                             rng: np.random.Generator) -> InitialCondition:
    """Draw an initial condition from the family's generator."""
    if spec.is_ode:
        lo = np.array(spec.ode_ic_low)
        hi = np.array(spec.ode_ic_high)
        vec = rng.uniform(lo, hi)
        return InitialCondition(kind=spec.ic_family, values=vec,
                                descriptor_params=tuple(vec))

    x = space_grid(spec)
    L = spec.domain_length
    if spec.ic_family is ICFamily.SINE_MIXTURE:
        amps = rng.uniform(-0.5, 0.5, size=3)
        phases = rng.uniform(0.0, 2 * math.pi, size=3)
        u0 = np.zeros(N_GRID)
        for k in range(3):
            u0 += amps[k] * np.sin(2 * math.pi * (k + 1) * x / L + phases[k])
        u0 = spec.ic_offset + spec.ic_scale * u0
        return InitialCondition(kind=spec.ic_family, values=u0,
                                descriptor_params=tuple(amps) + tuple(phases))

    if spec.ic_family is ICFamily.GAUSSIAN_BUMP:
        center = rng.uniform(0.25 * L, 0.75 * L)
        width = rng.uniform(0.10 * L, 0.20 * L)
        amp = rng.uniform(0.5, 1.0)
        base = rng.uniform(0.2, 0.5)
        d = np.abs(x - center)
        d = np.minimum(d, L - d)
        u0 = base + amp * np.exp(-(d / width) ** 2)
        return InitialCondition(kind=spec.ic_family, values=u0,
                                descriptor_params=(center, width, amp, base))

    # Step function, resampled until the jump matches the family label.
    assert spec.step_label in ("shock", "rarefaction")
    is_linear = spec.flux_form is FluxForm.LINEAR
    for _ in range(1000):
        u_left, u_right = rng.uniform(0.0, 1.5, size=2)
        jump_at = rng.uniform(0.5, 1.5)
        if abs(u_left - u_right) < STEP_MIN_JUMP:
            continue
        if is_linear:
            # Linear flux carries only contact discontinuities; keep the jump
            # orientation of the convex-flux analogue.
            ok = (u_left > u_right) if spec.step_label == "shock" else (u_left < u_right)
        else:
            ok = classify_riemann(spec.flux_form, u_left, u_right) == spec.step_label
        if ok:
            u0 = np.where(x < jump_at, u_left, u_right)
            return InitialCondition(kind=spec.ic_family, values=u0,
                                    descriptor_params=(u_left, u_right, jump_at))
    raise RuntimeError(f"could not sample a {spec.step_label} step for family {spec.index}")


# ---------------------------------------------------------------------------
# Sentence rendering

NUM_PLACEHOLDER = "<num>"
PATCH_WIDTH = 8


def ic_patch_count(spec: EquationSpec, patch_width: int = PATCH_WIDTH) -> int:
    n = spec.state_dim if spec.is_ode else N_GRID
    return -(-n // patch_width)


def render_input_sentence(spec: EquationSpec, params: ParameterSet,
                          ic: InitialCondition,
                          patch_width: int = PATCH_WIDTH) -> SentenceWithSlots:
    """Render the multimodal input sentence with one ``<num>`` per numeric token.

    Coefficient slots come first (one per parameter), then the IC payload
    chunked into patches of ``patch_width`` values.
    """
    if len(params.values) != len(spec.nominal_params):
        raise SlotMismatch(
            f"family {spec.index} expects {len(spec.nominal_params)} parameters, "
            f"got {len(params.values)}")
    n_coeff = len(params.values)
    n_ic = -(-len(ic.values) // patch_width)
    text = spec.sentence_template.format(
        coeffs=" ".join([NUM_PLACEHOLDER] * n_coeff),
        ic=" ".join([NUM_PLACEHOLDER] * n_ic),
    )
    return SentenceWithSlots(text=text, n_coeff_slots=n_coeff, n_ic_slots=n_ic)


def catalog_json() -> list[dict]:
    """Serializable dump of the catalog, one object per family."""
    out = []
    for idx in range(1, 53):
        spec = CATALOG[idx]
        out.append({
            "index": spec.index,
            "class": spec.cls.value,
            "name": spec.name,
            "state_dim": spec.state_dim,
            "nominal_params": [[s, v] for s, v in spec.nominal_params],
            "rhs_kind": spec.rhs_kind.value,
            "flux_form": spec.flux_form.value if spec.flux_form else None,
            "viscosity_coeff": spec.viscosity_coeff,
            "time_horizon": spec.time_horizon,
            "ic_family": spec.ic_family.value,
            "domain_length": spec.domain_length,
            "step_label": spec.step_label,
            "base_index": spec.base_index,
            "text_template_group": spec.text_template_group,
        })
    return out
