"""Experiment configuration: key=value files, descriptor parsing and the validated ExperimentConfig.

Precedence is command-line flags > config file > defaults. Model and noise
descriptors use call syntax (`additive(base=scaled(c=1), noise=uniform(a=1))`)
and are parsed with `ast`, never evaluated.
"""
import ast
import csv
import math
from fractions import Fraction
from typing import List, Literal, Optional

from pydantic import BaseModel, ValidationError, field_validator, model_validator

from coboundary import CoeffSeq
from models.mds_models import AdditiveNoise, MultiplicativeNoise, PredictableScaleRademacher, ScaledRademacher
from op.distributions import DiscreteDist, NormalNoise, UniformNoise
from op.errors import ConfigError
from op.utils import parse_int_list

VERSION = "0.1.0"

SUBCOMMANDS = ("simulate", "rate-fit", "augment-demo", "linear-process", "lemma-check")
ESTIMATION_SUBCOMMANDS = ("simulate", "linear-process")
MIN_ESTIMATION_REPS = 100

DEFAULTS = {
    "model": "scaled(c=1)",
    "n_grid": [16, 32, 64, 128, 256, 512, 1024],
    "reps": 10000,
    "seed": 0,
    "delta_conf": 0.01,
    "out": "./out_dir",
    "plot": False,
    "mode": "Linf",
    "workers": 0,
    "coeffs": "0:1,1:1",
    "coeffs_file": None,
    "p": math.inf,
    "joints": 1000,
    "k_values": [1.0, 2.0, 3.0],
    "r_values": [1.0, 2.0, math.inf],
    "input": None,
}


# ---------------------------------------------------------------- key=value files

def read_kv(path):
    """Flat `key=value` lines; blank lines and `#` comments are skipped."""
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected key=value in {path}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _kv_value(value):
    if isinstance(value, (list, tuple)):
        return ",".join(_kv_value(v) for v in value)
    if isinstance(value, float):
        return "%.17g" % value
    if value is None:
        return ""
    return str(value)


def write_kv(path, mapping):
    with open(path, "w") as f:
        for key in sorted(mapping):
            f.write(f"{key}={_kv_value(mapping[key])}\n")
    return path


# ---------------------------------------------------------------- descriptors

def _literal(node, field):
    try:
        return ast.literal_eval(node)
    except ValueError:
        raise ConfigError(field, f"expected a literal, got {ast.dump(node)}")


def _call_args(node, names, field):
    params = {}
    for name, arg in zip(names, node.args):
        params[name] = arg
    for kw in node.keywords:
        if kw.arg not in names:
            raise ConfigError(field, f"unexpected argument {kw.arg!r} for {node.func.id}()")
        params[kw.arg] = kw.value
    return params


def _build_noise(node, field):
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ConfigError(field, "noise must be a call such as rademacher() or uniform(a=1)")
    name = node.func.id
    if name == "rademacher":
        args = _call_args(node, ("scale",), field)
        return DiscreteDist.rademacher(float(_literal(args.get("scale", ast.Constant(1.0)), field)))
    if name == "uniform":
        return UniformNoise(float(_literal(_call_args(node, ("a",), field)["a"], field)))
    if name == "normal":
        return NormalNoise(float(_literal(_call_args(node, ("s",), field)["s"], field)))
    if name == "point":
        args = _call_args(node, ("v",), field)
        return DiscreteDist.point_mass(float(_literal(args.get("v", ast.Constant(0.0)), field)))
    if name == "discrete":
        args = _call_args(node, ("values", "probs"), field)
        values, probs = _literal(args["values"], field), _literal(args["probs"], field)
        return DiscreteDist.from_atoms(zip(values, probs))
    raise ConfigError(field, f"unknown noise family {name!r}")


def _build_model(node, field):
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ConfigError(field, "model must be a call such as scaled(c=1)")
    name = node.func.id
    if name == "scaled":
        return ScaledRademacher(float(_literal(_call_args(node, ("c",), field)["c"], field)))
    if name == "predictable":
        args = _call_args(node, ("neg", "pos", "start"), field)
        start = _literal(args["start"], field) if "start" in args else None
        return PredictableScaleRademacher(float(_literal(args["neg"], field)),
                                          float(_literal(args["pos"], field)),
                                          None if start is None else float(start))
    if name in ("additive", "multiplicative"):
        args = _call_args(node, ("base", "noise", "M"), field)
        M = _literal(args["M"], field) if "M" in args else None
        cls = AdditiveNoise if name == "additive" else MultiplicativeNoise
        return cls(base=_build_model(args["base"], field), noise=_build_noise(args["noise"], field),
                   M=None if M is None else float(M))
    raise ConfigError(field, f"unknown model kind {name!r}")


def _parse_expr(text, field):
    try:
        return ast.parse(str(text).strip(), mode="eval").body
    except SyntaxError as e:
        raise ConfigError(field, f"cannot parse {text!r}: {e.msg}")


def parse_model(text, field="model"):
    """Model descriptor -> MdsModel; model errors are reported against `field`."""
    try:
        return _build_model(_parse_expr(text, field), field)
    except (KeyError, TypeError) as e:
        raise ConfigError(field, f"missing or malformed argument in {text!r} ({e})")
    except ConfigError:
        raise
    except (ValueError, NotImplementedError) as e:
        raise ConfigError(field, str(e))


def _rational(token):
    token = token.strip()
    try:
        return Fraction(token)
    except ValueError:
        return float(token)


def parse_coeffs(text, field="coeffs"):
    """'0:1,1:1' (index:value, rationals kept exact) or geometric(rho=..) / polynomial(s=..)."""
    text = str(text).strip()
    try:
        if "(" in text:
            node = _parse_expr(text, field)
            if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
                raise ConfigError(field, f"cannot parse {text!r}")
            params = {kw.arg: float(_literal(kw.value, field)) for kw in node.keywords}
            return CoeffSeq.named(node.func.id, **params)
        pairs = []
        for item in text.replace(";", ",").split(","):
            if not item.strip():
                continue
            j, v = item.split(":")
            pairs.append((int(j), _rational(v)))
        return CoeffSeq.finite(pairs)
    except ConfigError:
        raise
    except (ValueError, TypeError, NotImplementedError) as e:
        raise ConfigError(field, str(e))


def read_coeffs_file(path, field="coeffs_file"):
    """CSV column file of (index, value) rows; a non-numeric first row is a header."""
    pairs = []
    try:
        with open(path, newline="") as f:
            for row in csv.reader(f):
                if not row or not row[0].strip() or row[0].strip().startswith("#"):
                    continue
                try:
                    j = int(row[0])
                except ValueError:
                    if not pairs:
                        continue
                    raise
                pairs.append((j, _rational(row[1])))
        return CoeffSeq.finite(pairs)
    except (OSError, ValueError, IndexError) as e:
        raise ConfigError(field, str(e))


# ---------------------------------------------------------------- ExperimentConfig

def _real(value):
    if isinstance(value, str):
        value = value.strip().lower()
        return math.inf if value in ("inf", "infinity") else float(value)
    return value


class ExperimentConfig(BaseModel):
    subcommand: Literal["simulate", "rate-fit", "augment-demo", "linear-process", "lemma-check"]
    model: str = DEFAULTS["model"]
    n_grid: List[int] = DEFAULTS["n_grid"]
    reps: int = DEFAULTS["reps"]
    seed: int = DEFAULTS["seed"]
    delta_conf: float = DEFAULTS["delta_conf"]
    out: str = DEFAULTS["out"]
    plot: bool = DEFAULTS["plot"]
    mode: Literal["L1", "Linf"] = DEFAULTS["mode"]
    workers: int = DEFAULTS["workers"]
    coeffs: str = DEFAULTS["coeffs"]
    coeffs_file: Optional[str] = DEFAULTS["coeffs_file"]
    p: float = DEFAULTS["p"]
    joints: int = DEFAULTS["joints"]
    k_values: List[float] = DEFAULTS["k_values"]
    r_values: List[float] = DEFAULTS["r_values"]
    input: Optional[str] = DEFAULTS["input"]

    @field_validator("n_grid", mode="before")
    @classmethod
    def _split_grid(cls, value):
        return parse_int_list(value) if isinstance(value, (str, int)) else value

    @field_validator("k_values", "r_values", mode="before")
    @classmethod
    def _split_reals(cls, value):
        if isinstance(value, str):
            return [_real(tok) for tok in value.split(",") if tok.strip()]
        return [_real(v) for v in value]

    @field_validator("p", mode="before")
    @classmethod
    def _parse_p(cls, value):
        return _real(value)

    @field_validator("coeffs_file", "input", mode="before")
    @classmethod
    def _empty_is_none(cls, value):
        return None if value == "" else value

    @field_validator("n_grid")
    @classmethod
    def _check_grid(cls, value):
        if not value:
            raise ValueError("n_grid must be nonempty")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if value[0] < 1:
            raise ValueError("n_grid sizes must be positive")
        return value

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, value):
        if not 0 <= value < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return value

    @field_validator("delta_conf")
    @classmethod
    def _check_delta(cls, value):
        if not 0.0 < value < 1.0:
            raise ValueError("delta_conf must lie in (0, 1)")
        return value

    @field_validator("reps", "joints")
    @classmethod
    def _check_positive(cls, value):
        if value < 1:
            raise ValueError("must be positive")
        return value

    @field_validator("p")
    @classmethod
    def _check_p(cls, value):
        if not value >= 1:
            raise ValueError("p must be >= 1 or inf")
        return value

    @model_validator(mode="after")
    def _check_estimation_reps(self):
        if self.subcommand in ESTIMATION_SUBCOMMANDS and self.reps < MIN_ESTIMATION_REPS:
            raise ConfigError("reps", f"{self.subcommand} needs reps >= {MIN_ESTIMATION_REPS}, got {self.reps}")
        if self.subcommand == "rate-fit" and not self.input:
            raise ConfigError("input", "rate-fit needs --input pointing at a simulate CSV")
        return self

    def echo(self):
        """Full effective configuration, defaults included, in key=value form."""
        out = self.model_dump()
        out["version"] = VERSION
        out["log_base"] = "e"
        return out


def build_config(subcommand, file_values=None, flag_values=None):
    """Merge defaults < file < flags and validate; raises ConfigError naming the field."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    merged.pop("subcommand", None)
    merged.pop("version", None)
    merged.pop("log_base", None)
    unknown = sorted(set(merged) - set(ExperimentConfig.model_fields))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    try:
        return ExperimentConfig(subcommand=subcommand, **merged)
    except ValidationError as e:
        err = e.errors()[0]
        loc = err.get("loc") or ("config",)
        ctx = err.get("ctx") or {}
        cause = ctx.get("error")
        if isinstance(cause, ConfigError):
            raise ConfigError(cause.field, str(cause).split(": ", 1)[-1])
        raise ConfigError(str(loc[0]), err.get("msg", "invalid value"))
