"""Coefficient maps to the Oseen-Frank and Ericksen-Leslie limits, and
sharp-interface targets used by the verification runs."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .profile import ProfileSolution, surface_tension


@dataclass(frozen=True)
class OseenFrankConstants:
    k1: float
    k2: float
    k3: float
    k4: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LeslieCoefficients:
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    alpha6: float

    def as_tuple(self) -> tuple:
        return (self.alpha1, self.alpha2, self.alpha3, self.alpha4, self.alpha5, self.alpha6)

    def as_dict(self) -> dict:
        return asdict(self)

    def parodi_residual(self) -> float:
        """``(alpha2 + alpha3) - (alpha6 - alpha5)``."""
        return (self.alpha2 + self.alpha3) - (self.alpha6 - self.alpha5)


def oseen_frank(L1: float, L2: float, L3: float, s_plus: float) -> OseenFrankConstants:
    s2 = s_plus * s_plus
    k13 = (2.0 * L1 + L2 + L3) * s2
    return OseenFrankConstants(k13, 2.0 * L1 * s2, k13, L3 * s2)


def leslie(xi: float, s_plus: float) -> LeslieCoefficients:
    s = s_plus
    shear = xi * s * (2.0 + s) / 3.0
    stretch = xi * xi * s * (4.0 - s) / 3.0
    return LeslieCoefficients(
        alpha1=-2.0 * xi * xi * s * s * (3.0 - 2.0 * s) * (1.0 + 2.0 * s) / 3.0,
        alpha2=-s * s - shear,
        alpha3=s * s - shear,
        alpha4=1.0 + 4.0 * xi * xi * (1.0 - s) ** 2 / 9.0,
        alpha5=stretch + shear,
        alpha6=stretch - shear,
    )


def predicted_jumps(profile: ProfileSolution, kappa: float, xi: float = 0.0) -> dict:
    """Leading-order pressure and velocity jumps across a curved interface.

    ``kappa`` enters as the level-set quantity ``lap(phi)`` with ``phi > 0`` on
    the nematic side, so ``p_minus1_jump = -sigma * kappa``.  For a nematic
    disk of radius R, ``lap(phi) = -1/R`` and the nematic pressure is higher by
    ``sigma / R``.  The jumps are nematic side minus isotropic side; the
    ``eps^-1`` pressure carries ``p_minus1_jump``.  ``v_jump`` is 0 for the
    corotational model and ``None`` (no prediction) otherwise.
    """
    sigma = surface_tension(profile)
    return {
        "p_minus2_jump": 0.0,
        "p_minus1_jump": -sigma * kappa if kappa != 0 else 0.0,
        "v_jump": 0.0 if xi == 0 else None,
        "sigma": sigma,
    }


def limit_systems_doc(xi: float = 0.0, s_plus: float = 1.0) -> dict:
    """The sharp-interface limit systems with coefficients filled in."""
    a = leslie(xi, s_plus)
    terms = [
        (a.alpha3, "nN"),
        (a.alpha2, "Nn"),
        (a.alpha4, "D^(0)"),
        (a.alpha1, "(nn):D^(0) nn"),
        (a.alpha5, "D^(0).n n"),
        (a.alpha6, "n n.D^(0)"),
    ]
    stress_terms = [{"coefficient": c, "term": t} for c, t in terms if c != 0]
    return {
        "nematic_region": {
            "momentum": "v_t + v.grad v = -grad p + div(sigma^L + sigma^E)",
            "incompressibility": "div v = 0",
            "director": "n×(−Δn + N − D·n) = 0" if xi == 0 else
            f"n×(−{s_plus:g} Δn + {s_plus:g} N − {xi * (2 + s_plus) / 3:.6g} D·n) = 0",
            "N": "N = n_t + v.grad n - Omega n",
            "sigma_L": stress_terms,
            "sigma_E": "-2 grad n ⊙ grad n",
            "leslie": a.as_dict(),
        },
        "isotropic_region": {
            "momentum": "v_t + v.grad v = -grad p + div D^(0)",
            "incompressibility": "div v = 0",
            "stress": ["D^(0)"],
        },
        "interface": {
            "motion": "phi_t = lap(phi) - v.grad(phi)",
            "velocity_jump": "[v] = 0" if xi == 0 else "not continuous in general",
            "pressure_jumps": {
                "p^(-2)": "0",
                "p^(-1)": "-(2/3) lap(phi) int |s'|^2 dz",
                "p^(0)": "[<sigma^L, nu⊗nu>]",
            },
            "director": "nu.grad n = 0",
        },
        "oseen_frank_flow": "(2 s_+^2 n_t + h) × n = 0",
    }
