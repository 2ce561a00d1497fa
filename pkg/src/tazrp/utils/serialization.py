"""
Sérialisation des artefacts: JSON (orjson), CSV avec en-tête de schéma,
empreintes SHA-256 et compression zstd selon l'extension du fichier.
"""

import csv
import hashlib
import io
import os

import numpy as np
import orjson
import zstandard as zstd

from ..exceptions import ZRPFileError

ZSTD = zstd.ZstdCompressor(level=7)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS


# -----------------------------------------------------
#   JSON / CSV
# -----------------------------------------------------

def _default(obj):
    # types que orjson ne sait pas sérialiser seul
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"Type non sérialisable: {type(obj).__name__}")


def dumps_json(obj) -> bytes:
    """
    Sérialise un objet en JSON déterministe (clés triées, indentation 2).

    Args:
        obj: Dictionnaire, liste ou objet exposant ``to_dict()``

    Returns:
        bytes: Document JSON terminé par un saut de ligne
    """
    return orjson.dumps(obj, default=_default, option=JSON_OPTIONS) + b"\n"


def loads_json(data: bytes):
    """Désérialise un document JSON."""
    return orjson.loads(data)


def format_cell(value) -> str:
    """Formate une cellule CSV sans dépendance à la locale ('.' décimal)."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_bytes(header, rows, schema: str = None, footer_lines=()) -> bytes:
    """
    Construit un document CSV.

    Args:
        header: Noms des colonnes
        rows: Itérable de séquences de valeurs
        schema: Version de schéma écrite en commentaire de tête (``# schema: ...``)
        footer_lines: Lignes de commentaire ajoutées en fin de document

    Returns:
        bytes: CSV encodé en UTF-8
    """
    buffer = io.StringIO()
    if schema:
        buffer.write(f"# schema: {schema}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    for line in footer_lines:
        buffer.write(f"# {line}\n")
    return buffer.getvalue().encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# -----------------------------------------------------
#   WRAPPER FICHIER
# -----------------------------------------------------

def write_artifact(path, data: bytes) -> bytes:
    """
    Écrit un artefact sur disque, compressé en zstd si le chemin finit par ``.zst``.

    Args:
        path: Chemin de destination
        data: Contenu brut

    Returns:
        bytes: Les octets effectivement écrits (pour le calcul des checksums)

    Raises:
        ZRPFileError: Si le fichier ne peut pas être écrit
    """
    path = str(path)
    payload = ZSTD.compress(data) if path.endswith(".zst") else data
    try:
        dest_dir = os.path.dirname(path)
        if dest_dir and not os.path.exists(dest_dir):
            os.makedirs(dest_dir, exist_ok=True)
        with open(path, "wb") as f:
            f.write(payload)
    except OSError as e:
        raise ZRPFileError(
            f"Impossible d'écrire le fichier: {path}",
            {"path": path, "error": str(e)}
        ) from e
    return payload


def read_artifact(path) -> bytes:
    """
    Lit un artefact, en le décompressant si le chemin finit par ``.zst``.

    Raises:
        ZRPFileError: Si le fichier n'existe pas ou ne peut pas être lu
    """
    path = str(path)
    if not os.path.isfile(path):
        raise ZRPFileError(
            f"Le fichier n'existe pas: {path}",
            {"path": path}
        )
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise ZRPFileError(
            f"Impossible de lire le fichier: {path}",
            {"path": path, "error": str(e)}
        ) from e
    if path.endswith(".zst"):
        try:
            return zstd.ZstdDecompressor().decompress(data)
        except zstd.ZstdError as e:
            raise ZRPFileError(
                f"Erreur lors de la décompression: {path}",
                {"path": path, "error": str(e)}
            ) from e
    return data
