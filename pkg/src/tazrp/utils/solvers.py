"""
Outils d'algèbre linéaire: résolutions creuses et recollement d'ensembles.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, MatrixRankWarning, gmres, spilu, spsolve

from ..config import get_settings
from ..exceptions import ZRPOverlapError, ZRPSolverError

logger = logging.getLogger(__name__)


# -----------------------------------------------------
#   RÉSOLUTION LINÉAIRE
# -----------------------------------------------------

def solve_linear(A, b, settings=None):
    """
    Résout ``A x = b`` pour une matrice creuse carrée.

    Factorisation directe jusqu'à ``direct_solver_max`` inconnues, GMRES
    préconditionné par ILU au-delà.

    Args:
        A: Matrice creuse (n, n)
        b: Second membre (n,)
        settings: Réglages (optionnel, ``get_settings()`` par défaut)

    Returns:
        np.ndarray: Solution x

    Raises:
        ZRPSolverError: Si le système est singulier ou si GMRES ne converge pas
    """
    settings = settings or get_settings()
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)

    A = sp.csc_matrix(A)
    if n <= settings.direct_solver_max:
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                x = spsolve(A, b)
            except (MatrixRankWarning, RuntimeError) as e:
                raise ZRPSolverError(
                    "Système linéaire singulier",
                    {"size": n, "error": str(e)}
                ) from e
        x = np.atleast_1d(np.asarray(x, dtype=float))
        method = "direct"
    else:
        try:
            ilu = spilu(A, drop_tol=1e-6, fill_factor=20)
        except RuntimeError as e:
            raise ZRPSolverError(
                "Échec de la factorisation ILU",
                {"size": n, "error": str(e)}
            ) from e
        preconditioner = LinearOperator(A.shape, ilu.solve)
        x, info = gmres(A, b, rtol=settings.iterative_rtol,
                        maxiter=settings.iterative_maxiter, M=preconditioner)
        if info != 0:
            raise ZRPSolverError(
                "GMRES n'a pas convergé",
                {"size": n, "info": info, "rtol": settings.iterative_rtol}
            )
        method = "gmres"

    if not np.all(np.isfinite(x)):
        raise ZRPSolverError(
            "Solution non finie (système singulier ?)",
            {"size": n}
        )
    residual = float(np.max(np.abs(A @ x - b))) if n else 0.0
    logger.debug("solve_linear: n=%d méthode=%s résidu=%.3e", n, method, residual)
    return x


# -----------------------------------------------------
#   RECOLLEMENT (GLUING)
# -----------------------------------------------------

@dataclass(frozen=True)
class Reduction:
    """
    Paramétrisation affine ``H = P z + h0`` des fonctions contraintes.

    Chaque état libre reçoit une colonne de P, chaque ensemble « constante
    libre » est contracté en une seule colonne, les ensembles à valeur fixée
    n'ont pas de colonne et contribuent à ``h0``.
    """
    P: sp.csr_matrix
    h0: np.ndarray
    set_columns: tuple
    has_fixed: bool

    @property
    def size(self):
        return self.P.shape[1]


def build_reduction(size, constraints):
    """
    Construit la paramétrisation recollée.

    Args:
        size: Nombre d'états
        constraints: Liste de couples ``(indices, valeur)``; ``valeur=None``
            signifie « constante libre sur l'ensemble »

    Returns:
        Reduction

    Raises:
        ZRPOverlapError: Si deux ensembles contraints se recouvrent
    """
    owner = np.full(size, -1, dtype=np.int64)
    h0 = np.zeros(size)
    has_fixed = False
    for k, (indices, value) in enumerate(constraints):
        indices = np.asarray(indices, dtype=np.int64)
        if np.any(owner[indices] >= 0):
            raise ZRPOverlapError(
                "Les ensembles contraints doivent être disjoints",
                {"constraint": k}
            )
        owner[indices] = k
        if value is not None:
            h0[indices] = float(value)
            has_fixed = has_fixed or len(indices) > 0

    free_states = np.flatnonzero(owner < 0)
    rows = [free_states]
    cols = [np.arange(len(free_states))]
    next_col = len(free_states)
    set_columns = []
    for k, (indices, value) in enumerate(constraints):
        indices = np.asarray(indices, dtype=np.int64)
        if value is None and len(indices) > 0:
            rows.append(indices)
            cols.append(np.full(len(indices), next_col))
            set_columns.append(next_col)
            next_col += 1
        else:
            set_columns.append(None)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, next_col))
    return Reduction(P=P, h0=h0, set_columns=tuple(set_columns), has_fixed=has_fixed)


def maximize_quadratic(K, b, reduction, settings=None):
    """
    Maximise ``2 bᵀH − Hᵀ K H`` sur les fonctions ``H = P z + h0``.

    K est symétrique semi-définie positive, de noyau les constantes. Sans
    valeur fixée, la jauge additive est fixée en annulant la première colonne
    d'ensemble libre (ou le premier état libre).

    Returns:
        tuple: (valeur, H, colonne de jauge ou None)
    """
    P, h0 = reduction.P, reduction.h0
    gauge = None
    if reduction.size == 0:
        H = h0.copy()
    else:
        c = P.T @ (b - K @ h0)
        Kr = sp.csr_matrix(P.T @ K @ P)
        keep = np.arange(reduction.size)
        if not reduction.has_fixed:
            set_cols = [col for col in reduction.set_columns if col is not None]
            gauge = set_cols[0] if set_cols else 0
            keep = keep[keep != gauge]
        z = np.zeros(reduction.size)
        if len(keep):
            z[keep] = solve_linear(Kr[keep][:, keep], c[keep], settings)
        H = P @ z + h0
    value = float(2.0 * (b @ H) - H @ (K @ H))
    return value, H, gauge
