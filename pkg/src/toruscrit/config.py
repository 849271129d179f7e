"""Experiment configuration: INI-style files, strict validation, content hashing.

Unknown sections or keys are hard errors (no silent typos); every run
resolves defaults into a flat dictionary that is echoed, hashed, and
embedded in all output files so results are self-describing and
re-checkable.
"""

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .amplitude import make_amplitude
from .critical import BoxIndicator, BumpTest, ZeroTest
from .errors import ConfigError

_SCHEMA = {
    "model": {
        "amplitude": ("str", "gaussian(1.0)"),
        "m": ("int", 1),
        "eps_trunc": ("float", 1e-12),
    },
    "study": {
        "R": ("floats", [8.0, 16.0, 32.0, 64.0]),
        "trials": ("int", 200),
        "master_seed": ("int", 20260810),
        "streams": ("int", 20),
    },
    "test_function": {
        "kind": ("str", "bump"),
        "center": ("floats", [0.5]),
        "r0": ("float", 0.25),
        "lower": ("floats", [0.0]),
        "upper": ("floats", [1.0]),
    },
    "mc": {
        "n_mc": ("int", 100_000),
        "quad_nodes": ("int", 64),
    },
    "run": {
        "threads": ("int", 0),
        "out": ("str", "results"),
    },
}


def _parse_value(kind, raw):
    if kind == "str":
        return str(raw).strip()
    if kind == "int":
        return int(str(raw).strip())
    if kind == "float":
        return float(str(raw).strip())
    if kind == "floats":
        if isinstance(raw, (list, tuple)):
            return [float(v) for v in raw]
        return [float(tok) for tok in str(raw).replace(",", " ").split()]
    raise ValueError(kind)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def defaults(cls):
        vals = {}
        for section, keys in _SCHEMA.items():
            for key, (_, default) in keys.items():
                vals[f"{section}.{key}"] = (
                    list(default) if isinstance(default, list) else default
                )
        return cls(vals)

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str  # keys are case-sensitive (R vs r0)
        with open(path) as fh:
            parser.read_file(fh)
        cfg = cls.defaults()
        problems = []
        for section in parser.sections():
            if section not in _SCHEMA:
                problems.append(f"unknown section [{section}]")
                continue
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    problems.append(f"unknown key {section}.{key}")
                    continue
                kind, _ = _SCHEMA[section][key]
                try:
                    cfg.values[f"{section}.{key}"] = _parse_value(kind, raw)
                except ValueError:
                    problems.append(f"unparseable value for {section}.{key}: {raw!r}")
        if problems:
            raise ConfigError(problems)
        cfg.validate()
        return cfg

    def override(self, **pairs):
        for dotted, value in pairs.items():
            dotted = dotted.replace("__", ".")
            if dotted not in self.values:
                raise ConfigError([f"unknown key {dotted}"])
            section, key = dotted.split(".", 1)
            kind, _ = _SCHEMA[section][key]
            self.values[dotted] = _parse_value(kind, value)
        return self

    def __getitem__(self, dotted):
        return self.values[dotted]

    # -- resolved objects ----------------------------------------------------

    def amplitude(self):
        return make_amplitude(self.values["model.amplitude"])

    @property
    def m(self):
        return self.values["model.m"]

    def bandwidths(self):
        return list(self.values["study.R"])

    def test_function(self):
        m = self.m
        kind = self.values["test_function.kind"].lower()
        if kind == "bump":
            center = _broadcast(self.values["test_function.center"], m)
            return BumpTest(center, self.values["test_function.r0"])
        if kind == "indicator":
            lower = _broadcast(self.values["test_function.lower"], m)
            upper = _broadcast(self.values["test_function.upper"], m)
            return BoxIndicator(lower, upper)
        if kind == "full":
            return BoxIndicator.full_torus(m)
        if kind == "zero":
            return ZeroTest()
        raise ConfigError([f"unknown test_function.kind {kind!r}"])

    def validate(self):
        problems = []
        v = self.values
        if v["model.m"] < 1:
            problems.append("model.m must be >= 1")
        if v["test_function.kind"].lower() == "bump" and not (
            0.0 < v["test_function.r0"] < 0.5
        ):
            problems.append("test_function.r0 must lie in (0, 1/2)")
        if v["study.trials"] < 2:
            problems.append("study.trials must be >= 2")
        if any(r <= 0 for r in v["study.R"]):
            problems.append("study.R entries must be positive")
        try:
            self.amplitude()
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError(problems)
        return self

    # -- provenance -----------------------------------------------------------

    def as_dict(self, science_only=False):
        items = sorted(self.values.items())
        if science_only:
            # worker count and output path are execution details: result
            # files must be byte-identical regardless of them
            items = [(k, v) for k, v in items if not k.startswith("run.")]
        return dict(items)

    def content_hash(self):
        blob = json.dumps(
            self.as_dict(science_only=True), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(blob.encode("utf8")).hexdigest()

    def threads(self):
        n = self.values["run.threads"]
        return n if n > 0 else (os.cpu_count() or 1)


def _broadcast(vals, m):
    vals = list(vals)
    if len(vals) == 1:
        return np.full(m, vals[0])
    if len(vals) != m:
        raise ConfigError([f"expected 1 or {m} components, got {len(vals)}"])
    return np.array(vals)
