"""
Manifestes d'exécution: paramètres, graine, version et checksums des sorties.
"""

import csv
import io
import logging
import math
import os
from typing import Any, Dict, Optional

from pydantic import BaseModel, ValidationError

from . import __version__
from .exceptions import ZRPFileError
from .utils.serialization import dumps_json, loads_json, read_artifact, sha256_hex

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = "tazrp.manifest/1"
REPLAY_RTOL = 1e-8
REPLAY_ATOL = 1e-12


class RunManifest(BaseModel):
    """
    Trace reproductible d'une commande.

    ``outputs`` associe un nom de sortie (``main``, ``trajectory``…) à un
    couple {chemin, sha256}; le chemin vaut ``-`` pour la sortie standard.
    """
    schema_version: str = MANIFEST_SCHEMA
    subcommand: str
    parameters: Dict[str, Any]
    seed: Optional[int] = None
    tool_version: str = __version__
    outputs: Dict[str, Dict[str, str]] = {}

    def to_dict(self):
        return self.model_dump()


def build_manifest(subcommand, parameters, outputs, paths=None, seed=None):
    """
    Construit le manifeste d'une exécution.

    Args:
        subcommand: Nom de la sous-commande
        parameters: Paramètres effectifs (JSON-compatibles)
        outputs: Dictionnaire {nom: octets écrits (non compressés)}
        paths: Dictionnaire {nom: chemin} (``-`` pour stdout)
        seed: Graine éventuelle
    """
    paths = paths or {}
    return RunManifest(
        subcommand=subcommand,
        parameters=dict(parameters),
        seed=seed,
        outputs={
            name: {"path": str(paths.get(name, "-")), "sha256": sha256_hex(data)}
            for name, data in outputs.items()
        },
    )


def manifest_path_for(out_path):
    return f"{out_path}.manifest.json"


def write_manifest(manifest, path):
    """Écrit le manifeste en JSON déterministe et retourne les octets."""
    data = dumps_json(manifest.to_dict())
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise ZRPFileError(
            f"Impossible d'écrire le manifeste: {path}",
            {"path": str(path), "error": str(e)}
        ) from e
    return data


def load_manifest(path):
    """
    Charge un manifeste.

    Raises:
        ZRPFileError: Si le fichier est absent ou invalide
    """
    raw = read_artifact(path)
    try:
        return RunManifest(**loads_json(raw))
    except (ValueError, ValidationError) as e:
        raise ZRPFileError(
            f"Manifeste invalide: {path}",
            {"path": str(path), "error": str(e)}
        ) from e


# -----------------------------------------------------
#   COMPARAISON À TOLÉRANCE
# -----------------------------------------------------

def _close(a, b, rtol):
    if isinstance(a, bool) or isinstance(b, bool):
        return a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if math.isnan(a) and math.isnan(b):
            return True
        return math.isclose(a, b, rel_tol=rtol, abs_tol=REPLAY_ATOL)
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_close(a[k], b[k], rtol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_close(x, y, rtol) for x, y in zip(a, b))
    return a == b


def _parse_cell(text):
    try:
        return float(text)
    except ValueError:
        return text


def _csv_records(data):
    lines = data.decode("utf-8").splitlines()
    reader = csv.reader(io.StringIO("\n".join(l for l in lines if not l.startswith("#"))))
    return [[_parse_cell(c) for c in row] for row in reader]


def outputs_close(old, new, rtol=REPLAY_RTOL):
    """Compare deux sorties JSON ou CSV à tolérance relative ``rtol``."""
    try:
        return _close(loads_json(old), loads_json(new), rtol)
    except ValueError:
        return _close(_csv_records(old), _csv_records(new), rtol)


def replay(manifest, producers, rtol=REPLAY_RTOL):
    """
    Rejoue un manifeste et compare les sorties.

    Args:
        manifest: RunManifest
        producers: Dictionnaire {sous-commande: fonction(params) -> {nom: octets}}
        rtol: Tolérance relative pour les sorties numériques non identiques

    Returns:
        dict: {nom: "identical" | "within_tolerance" | "mismatch" | "missing"}
    """
    if manifest.subcommand not in producers:
        raise ZRPFileError(
            f"Sous-commande non rejouable: {manifest.subcommand}",
            {"known": sorted(producers)}
        )
    if manifest.tool_version != __version__:
        logger.warning("manifeste produit par la version %s (version courante %s)",
                       manifest.tool_version, __version__)
    outputs = producers[manifest.subcommand](dict(manifest.parameters))
    verdict = {}
    for name, recorded in manifest.outputs.items():
        data = outputs.get(name)
        if data is None:
            verdict[name] = "missing"
        elif sha256_hex(data) == recorded["sha256"]:
            verdict[name] = "identical"
        elif recorded["path"] != "-" and os.path.isfile(recorded["path"]):
            old = read_artifact(recorded["path"])
            verdict[name] = "within_tolerance" if outputs_close(old, data, rtol) else "mismatch"
        else:
            verdict[name] = "mismatch"
    return verdict
