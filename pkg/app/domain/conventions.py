"""Enumerations and the fixed sign/normalization record."""

from __future__ import annotations

from enum import Enum


class OrderingMode(str, Enum):
    """Fiberwise ordering families."""

    WEYL = "weyl"
    MU = "mu"


class Command(str, Enum):
    """Commands understood by the CLI and the run endpoint."""

    BUILD = "build"
    VERIFY = "verify"
    EQUIV = "equiv"
    SPECTRUM = "spectrum"
    MASLOV = "maslov"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"


class OutputFormat(str, Enum):
    JSON = "json"
    TEXT = "text"


DEFAULT_COMMAND: Command = Command.VERIFY

# Every sign and normalization the engines fix, echoed verbatim in reports.
CONVENTIONS: dict[str, str] = {
    "symplectic_form": "omega = dq^dp, omega_{ij} = [[0, I], [-I, 0]] on x = (q, p)",
    "poisson_matrix": "pi = -omega^{-1}, {f,g} = pi^{ij} d_i f d_j g, {q,p} = 1",
    "fiber_product": "a o b = sum_k (1/k!) (lambda/2i)^k mu^{ij}.. d^k a d^k b; Weyl mode mu = pi",
    "bracket_normalization": "(i/lambda)[f,g]_star = {f,g}; antisymmetric part of star_1 is (1/2i){,} (printed form (i/2){,} uses the opposite bracket sign)",
    "standard_ordering": "mu^{pq} = 2 pi^{pq}, mu^{qq'} = pi^{qq'}, mu^{.p} = 0; Darboux: a o b = sum (i lambda)^k/k! d_p^k a d_q^k b (printed (lambda/2i) d_p(x)d_q normalization differs)",
    "delta": "delta = dx^i ^ d/dy^i; delta^{-1} = (1/(s+p)) y^i iota_i",
    "curvature": "R_hat = 1/2 omega_{ak} R^k_{c mi} y^a y^c dx^m^dx^i, R = exp(lambda S) R_hat, D^2 = -(i/lambda) ad R",
    "gamma_equation": "delta gamma = D gamma + (i/lambda) gamma o gamma - R + Omega, delta^{-1} gamma = s",
    "fedosov_derivation": "nabla_F = -delta + D + (i/lambda) ad gamma",
    "class_shift": "order lambda^{k+1} difference = (1/2i) Omega_k(Xf, Xg), (Xf)^i = pi^{il} d_l f",
    "hkr": "beta = (pi^T)^{-1} B pi^{-1}; class form = 2i beta",
    "hochschild": "bC = -[C, mu_0]; residual_n = sum_{i=1}^{n-1} [star_i, star_{n-i}] - 2 b star_n",
    "quotient_action": "p_j . phi = i lambda d phi/dq^j (printed normalization -2 lambda X)",
    "equivalence": "S_alpha = 1 + lambda^{k-1} alpha.X, alpha.X = alpha_j pi^{jc} d_c",
    "maslov_gauge": "mu = -2 (i/2pi) closed integral tr(g^{-1} dg)",
    "maslov_weight": "A(E)/(2 pi lambda) - c_mu mu + kappa in Z, default c_mu = 1/4",
}

__all__ = [
    "CONVENTIONS",
    "Command",
    "DEFAULT_COMMAND",
    "OrderingMode",
    "OutputFormat",
    "Verdict",
]
