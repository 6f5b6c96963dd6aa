"""Prediction + explanation query interface with exact query accounting.

:class:`LocalOracle` answers in-process; :func:`serve` exposes the same
oracle over HTTP/JSON and :class:`RemoteOracle` is the matching client.
Responses carry only a label (and, for ``/explain``, the explanation terms);
no probabilities or tree internals ever leave the service.

Wire protocol::

    POST /predict  {"features": [...]} -> {"label": int, "queries_used": int}
    POST /explain  {"features": [...]} -> {"label": int, "terms": [...], "queries_used": int}
    GET  /stats                        -> {"queries": int}
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .data import DatasetSchema
from .exceptions import (ProtocolError, ServiceError, TransportError,
                         ValidationError)
from .explain import Discretizer, ExplainerConfig, Explanation, explain
from .tree import DecisionTree

log = logging.getLogger(__name__)

PER_CALL = "per_call"
PER_INTERNAL = "per_internal_prediction"
PRICING_ALIASES = {"per_call": PER_CALL, "per_internal": PER_INTERNAL,
                   "per_internal_prediction": PER_INTERNAL}


def normalize_pricing(pricing: str) -> str:
    try:
        return PRICING_ALIASES[pricing]
    except KeyError:
        raise ValidationError(f"unknown pricing mode {pricing!r}") from None


def explanation_seed(base_seed: int, sample) -> int:
    """Seed for the explainer derived from ``base_seed`` and the sample's content.

    Identical queries therefore receive identical explanations.
    """
    x = np.asarray(sample, dtype=np.float64) + 0.0
    digest = hashlib.blake2b(x.tobytes(), digest_size=8).digest()
    seq = np.random.SeedSequence([int(base_seed) % 2**63, int.from_bytes(digest, "little")])
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8080
    pricing: str = PER_CALL
    explainer: ExplainerConfig = field(default_factory=ExplainerConfig)
    model_path: str = ""

    def __post_init__(self):
        if not 1 <= int(self.port) <= 65535:
            raise ValidationError(f"port must be in [1, 65535], got {self.port}")
        object.__setattr__(self, "pricing", normalize_pricing(self.pricing))


class LocalOracle:
    """In-process query oracle over a fitted tree.

    ``predict`` bills one query. ``explain`` bills one query under
    ``per_call`` pricing or ``num_perturbations + 1`` under
    ``per_internal_prediction``. Invalid samples are rejected unbilled.
    """

    def __init__(self, model: DecisionTree, discretizer: Discretizer,
                 explainer_config: ExplainerConfig = ExplainerConfig(), pricing: str = PER_CALL):
        self.model = model
        self.discretizer = discretizer
        self.explainer_config = explainer_config.resolve(model.schema.feature_count)
        self.pricing = normalize_pricing(pricing)
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def schema(self) -> DatasetSchema:
        return self.model.schema

    @property
    def explain_cost(self) -> int:
        return 1 if self.pricing == PER_CALL else self.explainer_config.num_perturbations + 1

    def _bill(self, n: int) -> int:
        with self._lock:
            self._queries += n
            return self._queries

    def predict(self, sample) -> int:
        return self.predict_counted(sample)[0]

    def predict_counted(self, sample):
        x = self.schema.validate_sample(sample)
        label = self.model.predict(x)
        return label, self._bill(1)

    def explain(self, sample) -> Explanation:
        return self.explain_counted(sample)[0]

    def explain_counted(self, sample):
        x = self.schema.validate_sample(sample)
        cfg = replace(self.explainer_config,
                      rng_seed=explanation_seed(self.explainer_config.rng_seed, x))
        exp = explain(self.model.predict_batch, x, self.discretizer, cfg)
        return exp, self._bill(self.explain_cost)

    def queries_used(self) -> int:
        with self._lock:
            return self._queries


def local_oracle(model, discretizer, explainer_config=ExplainerConfig(), pricing=PER_CALL):
    return LocalOracle(model, discretizer, explainer_config, pricing)


def _make_handler(oracle: LocalOracle):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

        def _send(self, status, doc):
            body = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _features(self):
            length = int(self.headers.get("Content-Length") or 0)
            try:
                doc = json.loads(self.rfile.read(length) or b"null")
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise ValidationError(f"invalid JSON body: {exc}") from exc
            if not isinstance(doc, dict) or not isinstance(doc.get("features"), list):
                raise ValidationError('body must be {"features": [number, ...]}')
            feats = doc["features"]
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in feats):
                raise ValidationError("features must all be numbers")
            return feats

        def do_POST(self):
            try:
                if self.path == "/predict":
                    label, used = oracle.predict_counted(self._features())
                    self._send(200, {"label": label, "queries_used": used})
                elif self.path == "/explain":
                    exp, used = oracle.explain_counted(self._features())
                    doc = exp.to_dict()
                    doc["queries_used"] = used
                    self._send(200, doc)
                else:
                    self._send(404, {"error": f"no such endpoint {self.path}"})
            except ValidationError as exc:
                self._send(400, {"error": str(exc)})
            except Exception as exc:  # noqa: BLE001
                log.exception("request failed")
                self._send(500, {"error": str(exc)})

        def do_GET(self):
            if self.path == "/stats":
                self._send(200, {"queries": oracle.queries_used()})
            else:
                self._send(404, {"error": f"no such endpoint {self.path}"})

    return Handler


class ServiceHandle:
    """Running HTTP service. ``close()`` stops accepting and waits for in-flight requests."""

    def __init__(self, httpd: ThreadingHTTPServer, oracle: LocalOracle):
        self.httpd = httpd
        self.oracle = oracle
        self._thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    @property
    def url(self) -> str:
        host = self.httpd.server_address[0]
        return f"http://{host}:{self.port}"

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(model: DecisionTree, discretizer: Discretizer, config: ServiceConfig,
          host: str = "127.0.0.1") -> ServiceHandle:
    oracle = LocalOracle(model, discretizer, config.explainer, config.pricing)
    return serve_oracle(oracle, config.port, host)


def serve_oracle(oracle: LocalOracle, port: int, host: str = "127.0.0.1") -> ServiceHandle:
    try:
        httpd = ThreadingHTTPServer((host, port), _make_handler(oracle))
    except OSError as exc:
        raise ServiceError(f"cannot listen on {host}:{port}: {exc}") from exc
    httpd.daemon_threads = False
    httpd.block_on_close = True
    return ServiceHandle(httpd, oracle)


class RemoteOracle:
    """Client for a running service. ``queries_used`` reads the server's ``/stats``."""

    def __init__(self, base_url: str, timeout: float = 30.0, get_retries: int = 3):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.get_retries = get_retries

    def _request(self, method, path, doc=None):
        data = None if doc is None else json.dumps(doc).encode("utf-8")
        req = urllib.request.Request(self.base_url + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        attempts = self.get_retries if method == "GET" else 1
        for attempt in range(attempts):
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read())
            except urllib.error.HTTPError as exc:
                raise ProtocolError(exc.code, exc.read().decode("utf-8", "replace")) from exc
            except (urllib.error.URLError, ConnectionError, TimeoutError) as exc:
                if attempt + 1 == attempts:
                    raise TransportError(f"{method} {self.base_url}{path}: {exc}") from exc
                time.sleep(0.05 * 2**attempt)

    @staticmethod
    def _payload(sample):
        return {"features": [float(v) for v in np.asarray(sample, dtype=np.float64)]}

    def predict(self, sample) -> int:
        return int(self._request("POST", "/predict", self._payload(sample))["label"])

    def explain(self, sample) -> Explanation:
        return Explanation.from_dict(self._request("POST", "/explain", self._payload(sample)))

    def queries_used(self) -> int:
        return int(self._request("GET", "/stats")["queries"])


def remote_oracle(base_url: str) -> RemoteOracle:
    return RemoteOracle(base_url)
