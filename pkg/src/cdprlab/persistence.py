"""Policy files: a JSON text header followed by little-endian float64 parameters.

Layout::

    cdprlab-policy <version> <header bytes>\\n
    <JSON header>\\n
    <n_params * 8 bytes of '<f8'>

Writes go to a temporary file in the target directory and are renamed into
place, so a failed save never leaves a partial file behind.
"""
import json
import os
import tempfile
from typing import NamedTuple

import numpy as np

from .errors import FormatVersionMismatch, HeaderMismatch, PolicyFileError, TruncatedPayload
from .neural import DeterministicPolicy, MlpSpec, Policy, RunningNorm, head_from_description

MAGIC = "cdprlab-policy"
FORMAT_VERSION = 1


class LoadedPolicy(NamedTuple):
    policy: object
    header: dict


def atomic_write(path, data):
    """Write ``data`` (bytes) to ``path`` via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(policy, meta):
    spec = policy.spec
    if isinstance(policy, DeterministicPolicy):
        kind, action = "deterministic", {"kind": "tanh", "act_dim": spec.output_dim}
    else:
        kind, action = "stochastic", policy.head.describe()
    header = {
        "format_version": FORMAT_VERSION,
        "policy": kind,
        "obs_dim": spec.input_dim,
        "action": action,
        "mlp": {"input_dim": spec.input_dim, "output_dim": spec.output_dim,
                "hidden": list(spec.hidden), "activation": spec.activation},
        "n_params": int(policy.n_params),
        "normalizer": policy.normalizer.state(),
    }
    header.update(meta or {})
    return header


def encode_policy(policy, meta=None):
    """Bytes of a policy file.  ``meta`` adds keys such as seed, budget, config."""
    text = json.dumps(_header(policy, meta), indent=1, sort_keys=True) + "\n"
    body = text.encode("utf-8")
    first = f"{MAGIC} {FORMAT_VERSION} {len(body)}\n".encode("ascii")
    payload = np.asarray(policy.params, dtype="<f8").tobytes()
    return first + body + payload


def save_policy(path, policy, meta=None):
    atomic_write(path, encode_policy(policy, meta))


def decode_policy(data, source="<bytes>"):
    newline = data.find(b"\n")
    if newline < 0:
        raise PolicyFileError(f"{source}: missing header line")
    try:
        magic, version, n_header = data[:newline].decode("ascii").split()
        version, n_header = int(version), int(n_header)
    except ValueError:
        raise PolicyFileError(f"{source}: malformed first line {data[:newline][:60]!r}") from None
    if magic != MAGIC:
        raise PolicyFileError(f"{source}: not a policy file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"{source}: format version {version}, this build reads "
                                    f"{FORMAT_VERSION}")
    start = newline + 1
    if len(data) < start + n_header:
        raise TruncatedPayload(f"{source}: header needs {n_header} bytes, found "
                               f"{len(data) - start}")
    try:
        header = json.loads(data[start:start + n_header].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PolicyFileError(f"{source}: unreadable header: {exc}") from None
    if header.get("format_version") != version:
        raise FormatVersionMismatch(f"{source}: header says version "
                                    f"{header.get('format_version')}, first line {version}")

    payload = data[start + n_header:]
    n_params = int(header["n_params"])
    if len(payload) != 8 * n_params:
        raise TruncatedPayload(f"{source}: expected {n_params} parameters "
                               f"({8 * n_params} bytes), found {len(payload) / 8:g} "
                               f"({len(payload)} bytes)")
    params = np.frombuffer(payload, dtype="<f8").astype(float)
    return LoadedPolicy(_build(header, params, source), header)


def _build(header, params, source):
    m = header["mlp"]
    spec = MlpSpec(m["input_dim"], m["output_dim"], tuple(m["hidden"]), m["activation"])
    obs_dim = header["obs_dim"]
    norm = RunningNorm.from_state(header["normalizer"])
    if spec.input_dim != obs_dim or norm.dim != obs_dim:
        raise HeaderMismatch(f"{source}: obs_dim {obs_dim} but network takes "
                             f"{spec.input_dim} inputs and normaliser has {norm.dim}")
    norm.frozen = True
    if header["policy"] == "deterministic":
        expected = spec.n_params
    else:
        head = head_from_description(header["action"])
        if head.net_output_dim != spec.output_dim:
            raise HeaderMismatch(f"{source}: head expects {head.net_output_dim} network "
                                 f"outputs, network has {spec.output_dim}")
        expected = spec.n_params + head.n_params
    if expected != len(params):
        raise HeaderMismatch(f"{source}: architecture needs {expected} parameters, "
                             f"header declares {len(params)}")
    if header["policy"] == "deterministic":
        return DeterministicPolicy(spec, params, norm)
    return Policy(spec, head, params, norm)


def load_policy(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise PolicyFileError(f"cannot read policy file {path}: {exc.strerror}") from exc
    try:
        return decode_policy(data, str(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PolicyFileError):
            raise
        raise PolicyFileError(f"{path}: inconsistent header: {exc}") from None
