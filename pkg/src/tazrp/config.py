"""
Paramètres globaux du laboratoire.

Les valeurs par défaut peuvent être surchargées par des variables
d'environnement ``TAZRP_<NOM>`` (ex. ``TAZRP_MAX_STATES=200000``).
"""

import logging
import os
from functools import lru_cache

from pydantic import BaseModel, Field, ValidationError

from .exceptions import ZRPDomainError

logger = logging.getLogger(__name__)

ENV_PREFIX = "TAZRP_"


class LabSettings(BaseModel):
    """Réglages numériques partagés par tous les modules."""

    # 5e6 états × 8 octets × ~10 vecteurs denses ≈ 400 Mo
    max_states: int = Field(default=5_000_000, gt=0)
    direct_solver_max: int = Field(default=50_000, gt=0)
    iterative_rtol: float = Field(default=1e-11, gt=0)
    iterative_maxiter: int = Field(default=5_000, gt=0)
    h1_exact_max: int = Field(default=1_000, gt=0)
    gamma_series_terms: int = Field(default=1_000_000, gt=0)

    model_config = {"frozen": True}


def _env_overrides():
    overrides = {}
    for name in LabSettings.model_fields:
        raw = os.environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            overrides[name] = raw
    return overrides


@lru_cache(maxsize=1)
def get_settings() -> LabSettings:
    """
    Retourne les réglages actifs (valeurs par défaut + environnement).

    Raises:
        ZRPDomainError: Si une variable d'environnement est invalide
    """
    overrides = _env_overrides()
    try:
        settings = LabSettings(**overrides)
    except ValidationError as e:
        raise ZRPDomainError(
            "Variable d'environnement TAZRP_* invalide",
            {"overrides": overrides, "error": str(e)}
        ) from e
    if overrides:
        logger.info("réglages surchargés par l'environnement: %s", overrides)
    return settings
