"""Case configuration: wave-number strings, tolerance expressions and config files."""
from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"log": math.log, "ln": math.log, "log10": math.log10, "sqrt": math.sqrt,
          "exp": math.exp}
_CONSTS = {"pi": math.pi, "inf": math.inf, "e": math.e}


def _implicit_products(text: str) -> str:
    # "4m" -> "4*m", "1e3log(m)" -> "1e3*log(m)", "2(m+1)" -> "2*(m+1)"
    text = re.sub(r"(?<![A-Za-z_\d.])(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)"
                  r"(?![\d.]|[eE][+-]?\d)\s*(?=[A-Za-z_(])",
                  lambda mt: mt.group(1) + "*", text)
    return re.sub(r"\)\s*(?=[A-Za-z0-9(])", ")*", text)


def evaluate_expression(text, variables=None) -> float:
    """Evaluate an arithmetic expression such as ``"1+log(m)"`` or ``"4m"``.

    Only numbers, ``+ - * / **``, the names in ``variables``, ``pi``, ``e``,
    ``inf`` and the functions ``log`` (natural), ``log10``, ``sqrt`` and
    ``exp`` are allowed.
    """
    if isinstance(text, (int, float)):
        return float(text)
    variables = dict(variables or {})
    source = _implicit_products(str(text).strip().replace("^", "**"))
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name):
            if node.id in variables:
                return float(variables[node.id])
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported syntax in {text!r}")

    try:
        return float(ev(tree))
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ConfigError(f"cannot evaluate {text!r}: {exc}") from exc


def parse_kappa(text) -> float:
    """Wave number from a number or a multiple of pi such as ``"8pi"``."""
    value = evaluate_expression(text)
    if not value > 0 or math.isinf(value):
        raise ConfigError(f"kappa must be positive and finite, got {text!r}")
    return value


def parse_theta(text, m: int) -> float:
    value = evaluate_expression(text, {"m": m})
    if not value > 0:
        raise ConfigError(f"tolerance must be positive, got {text!r} = {value}")
    return value


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass
class CaseConfig:
    """One benchmark case; tolerances and kappa are kept as given and parsed on use."""

    kappa: str = "8pi"
    p: int = 28
    n: int = 4
    m: int = 2
    theta_f: str = "4m"
    theta_e: str = "1000"
    scaling: str = "deluxe"
    economic: bool = True
    eta: str | None = None
    levels: int = 2
    rtol: float = 1e-5
    coarse_rtol: float = 1e-2
    maxit: int = 100
    seed: int = 0
    threads: int = 1
    deterministic: bool = False
    flexible: bool = False

    def __post_init__(self):
        for name in ("p", "n", "m", "levels", "maxit", "threads", "seed"):
            try:
                value = int(getattr(self, name))
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must be an integer, got {getattr(self, name)!r}")
            if value < (0 if name == "seed" else 1):
                raise ConfigError(f"{name} must be a positive integer")
            setattr(self, name, value)
        if self.levels < 2:
            raise ConfigError("levels must be at least 2")
        # each extra level merges 2x2x2 subdomains
        if self.n % 2 ** (self.levels - 2):
            raise ConfigError(f"n={self.n} subdomains per axis cannot be merged "
                              f"into {self.levels} levels")
        self.economic = _parse_bool(self.economic)
        self.deterministic = _parse_bool(self.deterministic)
        self.flexible = _parse_bool(self.flexible)
        for name in ("rtol", "coarse_rtol"):
            try:
                value = float(getattr(self, name))
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must be a number, got {getattr(self, name)!r}")
            if not 0 < value < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
            setattr(self, name, value)
        if self.scaling not in ("deluxe", "multiplicity"):
            raise ConfigError(f"unknown scaling {self.scaling!r}")
        self.kappa = str(self.kappa)
        self.theta_f = str(self.theta_f)
        self.theta_e = str(self.theta_e)
        # fail early on malformed expressions
        self.kappa_value
        self.theta_values

    @property
    def kappa_value(self) -> float:
        return parse_kappa(self.kappa)

    @property
    def theta_values(self) -> tuple[float, float]:
        return parse_theta(self.theta_f, self.m), parse_theta(self.theta_e, self.m)

    @property
    def eta_value(self) -> float | None:
        if self.eta in (None, "", "h"):
            return None
        h = 1.0 / (self.n * self.m + self.n - 1)
        return evaluate_expression(self.eta, {"h": h})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment and dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in CaseConfig.field_names():
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out
