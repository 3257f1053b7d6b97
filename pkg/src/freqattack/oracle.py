"""Black-box query interface: every call returns a class-probability
vector and bills exactly one query.

Three oracle kinds share the interface (``classes``, ``input_shape``,
``queries``, ``query(x)``): the in-process builtin model, a remote HTTP
server, and a remote child process speaking newline-delimited JSON.
Remote transports use the same JSON messages:

    request:  {"id": str, "shape": [H, W, C], "pixels": [H*W*C floats]}
    response: {"id": str, "probs": [K floats]}
    error:    {"id": str, "error": str}

HTTP additionally serves GET /meta -> {"classes": K, "input_shape": [H, W, C]}.
A failed query raises and does NOT increment the counter.
"""

import json
import queue
import subprocess
import threading
from dataclasses import dataclass

import numpy as np
import requests

from .whitebox import forward, load_checkpoint

PROB_SUM_TOL = 1e-6


class OracleError(Exception):
    """Base class for all oracle failures."""


class OracleTransportError(OracleError):
    """Connection or I/O failure talking to a remote oracle."""


class OracleTimeoutError(OracleTransportError):
    """The remote oracle did not answer within query_timeout."""


class MalformedResponseError(OracleError):
    """Response was not a valid probability message."""


class WrongClassCountError(OracleError):
    """Response carried a probability vector of the wrong length."""


class RemoteModelError(OracleError):
    """The server answered with an explicit error message."""


@dataclass(frozen=True)
class OracleSpec:
    kind: str  # "builtin" | "remote-http" | "remote-stdio"
    target: str  # checkpoint dir, base URL, or command line
    classes: int | None = None
    query_timeout: float = 10.0

    def __post_init__(self):
        if self.kind not in ("builtin", "remote-http", "remote-stdio"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.classes is not None and self.classes < 2:
            raise ValueError("classes must be >= 2")


def predicted_label(probs):
    """Argmax class index; ties break to the lowest index."""
    probs = np.asarray(probs)
    if probs.size == 0:
        raise ValueError("empty probability vector")
    return int(np.argmax(probs))


def _validate_probs(raw, classes, context):
    try:
        probs = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise MalformedResponseError(f"{context}: probs not numeric") from exc
    if probs.ndim != 1:
        raise MalformedResponseError(f"{context}: probs not a flat vector")
    if classes is not None and probs.shape[0] != classes:
        raise WrongClassCountError(
            f"{context}: got {probs.shape[0]} classes, expected {classes}"
        )
    if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
        raise MalformedResponseError(f"{context}: probabilities must be finite and >= 0")
    if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOL:
        raise MalformedResponseError(f"{context}: probabilities sum to {probs.sum()}")
    return probs


class BuiltinOracle:
    """In-process oracle around a builtin-model checkpoint (or model)."""

    kind = "builtin"

    def __init__(self, model):
        self.model = model
        self.classes = model.num_classes
        self.input_shape = tuple(model.input_shape)
        self.queries = 0

    def query(self, x):
        probs = forward(self.model, x)
        self.queries += 1
        return probs


class HttpOracle:
    """Client for the remote-http transport."""

    kind = "remote-http"

    def __init__(self, base_url, timeout=10.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        self._next_id = 0
        self.queries = 0
        meta = self._get_meta()
        try:
            self.classes = int(meta["classes"])
            self.input_shape = tuple(int(v) for v in meta["input_shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"/meta response invalid: {meta!r}") from exc

    def _get_meta(self):
        try:
            resp = self._session.get(self.base_url + "/meta", timeout=self.timeout)
        except requests.Timeout as exc:
            raise OracleTimeoutError("timeout fetching /meta") from exc
        except requests.RequestException as exc:
            raise OracleTransportError(f"transport failure fetching /meta: {exc}") from exc
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponseError("/meta is not JSON") from exc

    def query(self, x):
        x = np.asarray(x, dtype=np.float64)
        if tuple(x.shape) != self.input_shape:
            raise ValueError(f"input shape {x.shape} != server input {self.input_shape}")
        self._next_id += 1
        req_id = str(self._next_id)
        body = {"id": req_id, "shape": list(x.shape), "pixels": x.ravel().tolist()}
        try:
            resp = self._session.post(
                self.base_url + "/query", json=body, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise OracleTimeoutError(f"query {req_id} timed out") from exc
        except requests.RequestException as exc:
            raise OracleTransportError(f"query {req_id} transport failure: {exc}") from exc
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedResponseError(f"query {req_id}: body not JSON") from exc
        probs = _parse_response(payload, req_id, self.classes)
        self.queries += 1
        return probs


def _parse_response(payload, req_id, classes):
    if not isinstance(payload, dict):
        raise MalformedResponseError(f"query {req_id}: response not an object")
    if payload.get("error") is not None:
        raise RemoteModelError(f"query {req_id}: server error: {payload['error']}")
    if payload.get("id") != req_id:
        raise MalformedResponseError(
            f"query {req_id}: response id {payload.get('id')!r} does not match"
        )
    if "probs" not in payload:
        raise MalformedResponseError(f"query {req_id}: response missing probs")
    return _validate_probs(payload["probs"], classes, f"query {req_id}")


class StdioOracle:
    """Client for the remote-stdio transport: one JSON request per line to
    a child process, responses read back in request order."""

    kind = "remote-stdio"

    def __init__(self, command, classes, input_shape=None, timeout=10.0):
        self.classes = int(classes)
        self.input_shape = tuple(input_shape) if input_shape is not None else None
        self.timeout = timeout
        self.queries = 0
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise OracleTransportError(f"cannot start {command!r}: {exc}") from exc
        self._lines = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def close(self):
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def query(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.input_shape is not None and tuple(x.shape) != self.input_shape:
            raise ValueError(f"input shape {x.shape} != server input {self.input_shape}")
        self._next_id += 1
        req_id = str(self._next_id)
        body = {"id": req_id, "shape": list(x.shape), "pixels": x.ravel().tolist()}
        try:
            self._proc.stdin.write(json.dumps(body) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise OracleTransportError(f"query {req_id}: worker pipe broken: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise OracleTimeoutError(f"query {req_id} timed out") from None
        if line is None:
            raise OracleTransportError(f"query {req_id}: worker exited")
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(f"query {req_id}: line not JSON") from exc
        probs = _parse_response(payload, req_id, self.classes)
        self.queries += 1
        return probs


def make_oracle(spec):
    """Instantiate an oracle from an OracleSpec."""
    if spec.kind == "builtin":
        return BuiltinOracle(load_checkpoint(spec.target))
    if spec.kind == "remote-http":
        return HttpOracle(spec.target, timeout=spec.query_timeout)
    if spec.kind == "remote-stdio":
        if spec.classes is None:
            raise ValueError("remote-stdio oracle needs an explicit class count")
        import shlex

        return StdioOracle(
            shlex.split(spec.target),
            classes=spec.classes,
            input_shape=None,
            timeout=spec.query_timeout,
        )
    raise ValueError(f"unknown oracle kind {spec.kind!r}")
