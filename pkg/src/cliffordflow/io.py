"""File formats: backbone PDB subset, run configuration and weights.

Weights binary layout (all integers little-endian)::

    magic      8 bytes   b"CFWEIGHT"
    version    uint32
    cfg hash   64 bytes  ASCII hex sha256 of the canonical config JSON
    count      uint32
    per tensor:
      name_len uint16, name (UTF-8), ndim uint8, dims uint32 * ndim,
      data     float64 little-endian, C order

The JSON debug form holds the same header and tensors; floats are written
with ``repr`` precision so the round trip is bit-exact.
"""
from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .cfa import CfaConfig, NetworkWeights
from .motors import IDEAL_BACKBONE, Frames, backbone_from_frames, frames_from_backbone
from .nn import flatten, load_into

BACKBONE_ATOMS = ("N", "CA", "C")
PathLike = Union[str, Path]


class PdbFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BackboneChain:
    atoms: np.ndarray  # (N, 3, 3): residue, (N, CA, C), xyz in Angstrom
    residue_numbers: tuple = ()

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64).reshape(-1, 3, 3)
        numbers = tuple(int(n) for n in self.residue_numbers) or tuple(range(1, len(atoms) + 1))
        if len(numbers) != len(atoms):
            raise ValueError("residue_numbers length does not match atoms")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "residue_numbers", numbers)

    def __len__(self):
        return self.atoms.shape[0]

    def frames(self) -> Frames:
        return frames_from_backbone(self.atoms)

    @classmethod
    def from_frames(cls, frames: Frames, ideal: np.ndarray = IDEAL_BACKBONE) -> "BackboneChain":
        return cls(backbone_from_frames(frames, ideal))


def _field(line: str, lo: int, hi: int) -> str:
    return line[lo:hi] if len(line) >= hi else line[lo:].ljust(hi - lo)


def parse_pdb_backbone(text: str) -> BackboneChain:
    """Read N, CA and C of a single-chain PDB. Other atoms and records are ignored."""
    residues: dict[tuple[int, str], dict[str, np.ndarray]] = {}
    chains = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("ENDMDL"):
            break
        if not line.startswith("ATOM  "):
            continue
        try:
            name = _field(line, 12, 16).strip()
            chain = _field(line, 21, 22)
            resseq = int(_field(line, 22, 26))
            icode = _field(line, 26, 27).strip()
            xyz = np.array([float(_field(line, a, a + 8)) for a in (30, 38, 46)])
        except ValueError as exc:
            raise PdbFormatError(f"line {lineno}: malformed ATOM record ({exc})") from None
        if name not in BACKBONE_ATOMS:
            continue
        if not np.all(np.isfinite(xyz)):
            raise PdbFormatError(f"line {lineno}: non-finite coordinate")
        chains.add(chain)
        if len(chains) > 1:
            raise PdbFormatError(f"line {lineno}: more than one chain ({', '.join(sorted(chains))})")
        slot = residues.setdefault((resseq, icode), {})
        if name in slot:
            raise PdbFormatError(f"line {lineno}: duplicate atom {name} in residue {resseq}{icode}")
        slot[name] = xyz
    keys = sorted(residues)
    atoms = np.zeros((len(keys), 3, 3))
    for r, key in enumerate(keys):
        for a, name in enumerate(BACKBONE_ATOMS):
            if name not in residues[key]:
                raise PdbFormatError(f"residue {key[0]}{key[1]}: missing backbone atom {name}")
            atoms[r, a] = residues[key][name]
    return BackboneChain(atoms, tuple(k[0] for k in keys))


def write_pdb_backbone(chain: BackboneChain, remark: str = "backbone written by cliffordflow") -> str:
    atoms = np.asarray(chain.atoms, dtype=np.float64)
    if not np.all(np.isfinite(atoms)):
        raise ValueError("cannot write non-finite coordinates")
    if atoms.size and (atoms.max() > 9999.999 or atoms.min() < -999.999):
        raise ValueError("coordinates exceed the PDB %8.3f column range")
    lines = [f"REMARK   1 {remark}"[:80]]
    serial = 1
    for r, number in enumerate(chain.residue_numbers):
        for a, name in enumerate(BACKBONE_ATOMS):
            x, y, z = atoms[r, a]
            lines.append(
                f"ATOM  {serial:5d} {name:^4s} ALA A{number:4d}    "
                f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}          {name[0]:>2s}"
            )
            serial += 1
    lines.append("END")
    return "\n".join(lines) + "\n"


def read_pdb(path: PathLike) -> BackboneChain:
    return parse_pdb_backbone(Path(path).read_text())


def write_pdb(path: PathLike, chain: BackboneChain) -> None:
    Path(path).write_text(write_pdb_backbone(chain))


@dataclass(frozen=True)
class RunConfig:
    model: CfaConfig = field(default_factory=CfaConfig)
    ideal_backbone: tuple = tuple(map(tuple, IDEAL_BACKBONE.tolist()))
    n_steps: int = 200
    seed: int = 0
    rot_loss_weight: float = 1.0
    trans_loss_weight: float = 1.0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        ideal = np.asarray(self.ideal_backbone, dtype=np.float64)
        if ideal.shape != (3, 3) or np.any(ideal[1] != 0.0):
            raise ValueError("ideal_backbone must be 3x3 (N, CA, C) with CA at the origin")
        if self.rot_loss_weight < 0 or self.trans_loss_weight < 0:
            raise ValueError("loss weights must be non-negative")

    @property
    def ideal(self) -> np.ndarray:
        return np.asarray(self.ideal_backbone, dtype=np.float64)

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out.update(
            ideal_backbone=[list(r) for r in self.ideal_backbone],
            n_steps=self.n_steps,
            seed=self.seed,
            rot_loss_weight=self.rot_loss_weight,
            trans_loss_weight=self.trans_loss_weight,
        )
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        model_keys = {f.name for f in dataclasses.fields(CfaConfig)}
        run_keys = {f.name for f in dataclasses.fields(cls)} - {"model"}
        unknown = set(data) - model_keys - run_keys
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        model = CfaConfig(**{k: data.pop(k) for k in list(data) if k in model_keys})
        if "ideal_backbone" in data:
            data["ideal_backbone"] = tuple(tuple(float(v) for v in row) for row in data["ideal_backbone"])
        return cls(model=model, **data)


def load_config(path: PathLike) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


def save_config(path: PathLike, config: RunConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


MAGIC = b"CFWEIGHT"
FORMAT_VERSION = 1


class WeightsFormatError(ValueError):
    pass


def encode_weights(weights: NetworkWeights, cfg: CfaConfig) -> bytes:
    tensors = flatten(weights)
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), cfg.digest().encode("ascii"), struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_weights(blob: bytes) -> tuple[str, dict[str, np.ndarray]]:
    """Return ``(config hash, tensors)`` from the binary form."""
    view = memoryview(blob)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise WeightsFormatError("weights file is truncated")
        out = view[pos:pos + n]
        pos += n
        return out

    if bytes(take(len(MAGIC))) != MAGIC:
        raise WeightsFormatError("not a cliffordflow weights file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != FORMAT_VERSION:
        raise WeightsFormatError(f"unsupported weights format version {version}")
    digest = bytes(take(64)).decode("ascii")
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = math.prod(shape)
        data = np.frombuffer(take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
        if name in tensors:
            raise WeightsFormatError(f"tensor {name!r} appears twice")
        tensors[name] = data
    if pos != len(view):
        raise WeightsFormatError("trailing bytes after the last tensor")
    return digest, tensors


def weights_to_json(weights: NetworkWeights, cfg: CfaConfig) -> str:
    doc = {
        "format": MAGIC.decode("ascii"),
        "version": FORMAT_VERSION,
        "config_hash": cfg.digest(),
        "tensors": {
            name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
            for name, arr in flatten(weights).items()
        },
    }
    return json.dumps(doc)


def weights_from_json(text: str) -> tuple[str, dict[str, np.ndarray]]:
    doc = json.loads(text)
    if doc.get("format") != MAGIC.decode("ascii"):
        raise WeightsFormatError("not a cliffordflow JSON weights document")
    if doc.get("version") != FORMAT_VERSION:
        raise WeightsFormatError(f"unsupported weights format version {doc.get('version')}")
    tensors = {}
    for name, entry in doc["tensors"].items():
        tensors[name] = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
    return doc["config_hash"], tensors


def build_weights(digest: str, tensors: dict[str, np.ndarray], cfg: CfaConfig) -> NetworkWeights:
    """Check the header against ``cfg`` and fill a weights tree of the right shapes."""
    if digest != cfg.digest():
        raise WeightsFormatError("weights were saved for a different model configuration")
    template = NetworkWeights.template(cfg)
    expected = set(flatten(template))
    extra = set(tensors) - expected
    if extra:
        raise WeightsFormatError(f"unexpected tensors in weights file: {', '.join(sorted(extra)[:5])}")
    try:
        return load_into(template, tensors)
    except (KeyError, ValueError) as exc:
        raise WeightsFormatError(str(exc).strip("'\"")) from None


def save_weights(path: PathLike, weights: NetworkWeights, cfg: CfaConfig) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(weights_to_json(weights, cfg))
    else:
        path.write_bytes(encode_weights(weights, cfg))


def load_weights(path: PathLike, cfg: CfaConfig) -> NetworkWeights:
    blob = Path(path).read_bytes()
    if blob.startswith(MAGIC):
        digest, tensors = decode_weights(blob)
    else:
        digest, tensors = weights_from_json(blob.decode("utf-8"))
    return build_weights(digest, tensors, cfg)
