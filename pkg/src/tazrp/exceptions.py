"""
Exceptions personnalisées pour tazrp.
"""


class ZRPError(Exception):
    """Exception de base pour toutes les erreurs du laboratoire."""

    def __init__(self, message: str, details: dict = None):
        """
        Initialise une exception ZRP.

        Args:
            message: Message d'erreur principal
            details: Dictionnaire optionnel avec des détails supplémentaires
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self):
        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            return f"{self.message} ({details_str})"
        return self.message


class ZRPDomainError(ZRPError):
    """Exception levée lorsqu'un paramètre sort de son domaine de validité."""
    pass


class ZRPDimensionError(ZRPDomainError):
    """Exception levée lorsqu'un vecteur n'a pas la dimension |E_N|."""
    pass


class ZRPOverlapError(ZRPDomainError):
    """Exception levée lorsque des ensembles qui doivent être disjoints se recouvrent."""
    pass


class ZRPDivergenceError(ZRPDomainError):
    """Exception levée lorsqu'une série diverge (Γ(α) pour α ≤ 1, etc.)."""
    pass


class ZRPSizeError(ZRPError):
    """Exception levée lorsque |E_N| dépasse la limite d'énumération."""
    pass


class ZRPSolverError(ZRPError):
    """Exception levée lorsqu'une résolution linéaire échoue."""
    pass


class ZRPSimulationError(ZRPError):
    """Exception levée lorsqu'une trajectoire ne permet pas le calcul demandé."""
    pass


class ZRPFileError(ZRPError):
    """Exception levée lors d'erreurs de lecture/écriture d'artefacts."""
    pass
