"""Declarative scenario files.

Line-oriented `key = value` documents; dotted keys form a tree, `[...]`
values are lists (nested brackets allowed), `#` starts a comment.
Expression values use the scenario expression language (see
expressions.py).  Example:

    domain.kind = disk
    domain.radius = 1
    resolution = 24
    refinements = 2
    drift = (x1^2 + x2^2)/2
    eigen.count = 12
    checks.theorem_1_1.k_list = [1, 2, 5]
    checks.theorem_1_2 = on
    output.csv = out/eigs.csv
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import expressions as ex
from .errors import ConfigError, ExprSyntaxError
from .mesh import DomainSpec

CHECK_NAMES = ("theorem_1_1", "theorem_1_2", "recursion", "yang_type",
               "theorem3", "lemma1")
OVERRIDE_FIELDS = ("eps", "delta", "H0", "C0", "T0", "eta0")
EIGEN_METHODS = ("auto", "dense", "shift_invert")


@dataclass
class CheckRequest:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    domain: DomainSpec
    resolution: int
    refinements: int
    chart_kind: str                 # identity | immersion | metric
    chart_immersion: list | None
    chart_metric: list | None
    tensor_kind: str                # identity | diagonal | full
    tensor_diagonal: list | None
    tensor_full: list | None
    drift: str | None
    eigen_count: int
    eigen_method: str
    eigen_tol: float
    eigen_shift: float
    checks: list
    overrides: dict
    output: dict

    @property
    def dim_n(self):
        return self.domain.dim_n


def _split_top_level(text):
    """Split on commas that are not nested in brackets or parentheses."""
    items, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 0:
            items.append(text[start:i].strip())
            start = i + 1
    tail = text[start:].strip()
    if tail or items:
        items.append(tail)
    return items


def _parse_value(text, path):
    text = text.strip()
    if not text:
        raise ConfigError(path, "empty value")
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(path, "unterminated list")
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(item, path) for item in _split_top_level(inner)]
    return text


def _lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value': {raw!r}")
        key, value = line.split("=", 1)
        yield lineno, key.strip(), value.strip()


def _to_int(value, path):
    try:
        return int(str(value))
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected an integer, got {value!r}")


def _to_float(value, path):
    try:
        return float(str(value))
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}")


def _to_flag(value, path):
    if str(value).lower() in ("on", "true", "yes", "1"):
        return True
    if str(value).lower() in ("off", "false", "no", "0"):
        return False
    raise ConfigError(path, f"expected on/off, got {value!r}")


def _to_int_list(value, path):
    if not isinstance(value, list):
        raise ConfigError(path, f"expected a list, got {value!r}")
    return [_to_int(v, path) for v in value]


def _expr_text(value, path, dim_n):
    if isinstance(value, list):
        raise ConfigError(path, "expected an expression, got a list")
    try:
        tree = ex.parse(str(value))
    except ExprSyntaxError as err:
        raise ConfigError(path, f"bad expression: {err}") from err
    allowed = {ex.VARIABLES[i] for i in range(dim_n)}
    extra = ex.free_variables(tree) - allowed
    if extra:
        raise ConfigError(path, f"variable {sorted(extra)[0]} is outside the "
                                f"{dim_n}-dimensional chart")
    return str(value)


def _expr_list(value, path, dim_n, length=None):
    if not isinstance(value, list) or (value and isinstance(value[0], list)):
        raise ConfigError(path, "expected a flat list of expressions")
    if length is not None and len(value) != length:
        raise ConfigError(path, f"expected {length} entries, got {len(value)}")
    return [_expr_text(v, f"{path}[{i}]", dim_n) for i, v in enumerate(value)]


def _expr_grid(value, path, dim_n):
    if not isinstance(value, list) or len(value) != dim_n or \
            any(not isinstance(row, list) or len(row) != dim_n for row in value):
        raise ConfigError(path, f"expected a {dim_n}x{dim_n} expression grid")
    return [[_expr_text(v, f"{path}[{i}][{j}]", dim_n)
             for j, v in enumerate(row)] for i, row in enumerate(value)]


def parse_scenario(text):
    """Parse and fully validate a scenario document.

    Raises ConfigError carrying the offending key path.
    """
    tree = {}
    for lineno, key, value in _lines(text):
        if key in tree:
            raise ConfigError(key, f"duplicate key (line {lineno})")
        tree[key] = _parse_value(value, key)

    def take(key, default=None):
        return tree.pop(key, default)

    kind = take("domain.kind")
    if kind is None:
        raise ConfigError("domain.kind", "required")
    params = {}
    for key in [k for k in tree if k.startswith("domain.")]:
        params[key.split(".", 1)[1]] = _to_float(tree.pop(key), key)
    domain = DomainSpec(str(kind), params)
    dim_n = domain.dim_n

    resolution = _to_int(take("resolution", 8), "resolution")
    if resolution < 2:
        raise ConfigError("resolution", "must be >= 2")
    refinements = _to_int(take("refinements", 1), "refinements")
    if refinements < 1:
        raise ConfigError("refinements", "must be >= 1")

    chart_kind = str(take("chart.kind", "identity"))
    chart_immersion = chart_metric = None
    if chart_kind == "identity":
        pass
    elif chart_kind == "immersion":
        comps = take("chart.immersion")
        if comps is None:
            raise ConfigError("chart.immersion", "required for chart.kind = immersion")
        chart_immersion = _expr_list(comps, "chart.immersion", dim_n)
        if len(chart_immersion) < dim_n:
            raise ConfigError("chart.immersion",
                              f"needs at least {dim_n} components")
    elif chart_kind == "metric":
        grid = take("chart.metric")
        if grid is None:
            raise ConfigError("chart.metric", "required for chart.kind = metric")
        chart_metric = _expr_grid(grid, "chart.metric", dim_n)
        for i in range(dim_n):
            for j in range(dim_n):
                if chart_metric[i][j] != chart_metric[j][i]:
                    raise ConfigError("chart.metric", "grid must be symmetric")
    else:
        raise ConfigError("chart.kind", f"unknown chart kind {chart_kind!r}")

    tensor_kind = str(take("tensor.kind", "identity"))
    tensor_diagonal = tensor_full = None
    if tensor_kind == "identity":
        pass
    elif tensor_kind == "diagonal":
        comps = take("tensor.diagonal")
        if comps is None:
            raise ConfigError("tensor.diagonal", "required for tensor.kind = diagonal")
        tensor_diagonal = _expr_list(comps, "tensor.diagonal", dim_n, dim_n)
    elif tensor_kind == "full":
        grid = take("tensor.full")
        if grid is None:
            raise ConfigError("tensor.full", "required for tensor.kind = full")
        tensor_full = _expr_grid(grid, "tensor.full", dim_n)
    else:
        raise ConfigError("tensor.kind", f"unknown tensor kind {tensor_kind!r}")

    drift = take("drift")
    if drift is not None:
        drift = _expr_text(drift, "drift", dim_n)

    checks = _parse_checks(tree, dim_n)

    overrides = {}
    for key in [k for k in tree if k.startswith("override.")]:
        name = key.split(".", 1)[1]
        if name not in OVERRIDE_FIELDS:
            raise ConfigError(key, "not a bound-constant field")
        overrides[name] = _to_float(tree.pop(key), key)

    needed = _required_count(checks, dim_n)
    raw_count = take("eigen.count")
    eigen_count = _to_int(raw_count, "eigen.count") if raw_count is not None \
        else max(needed, 6)
    if eigen_count < 1:
        raise ConfigError("eigen.count", "must be >= 1")
    if eigen_count < needed:
        raise ConfigError("eigen.count",
                          f"checks need at least {needed} eigenvalues")
    eigen_method = str(take("eigen.method", "auto"))
    if eigen_method not in EIGEN_METHODS:
        raise ConfigError("eigen.method", f"unknown method {eigen_method!r}")
    eigen_tol = _to_float(take("eigen.tol", 1e-8), "eigen.tol")
    if eigen_tol <= 0.0:
        raise ConfigError("eigen.tol", "must be positive")
    eigen_shift = _to_float(take("eigen.shift", 0.0), "eigen.shift")

    output = {}
    for key in [k for k in tree if k.startswith("output.")]:
        name = key.split(".", 1)[1]
        if name not in ("report", "csv", "matrices"):
            raise ConfigError(key, "unknown output target")
        output[name] = str(tree.pop(key))

    if tree:
        bad = sorted(tree)[0]
        raise ConfigError(bad, "unknown key")

    scenario = Scenario(domain=domain, resolution=resolution,
                        refinements=refinements, chart_kind=chart_kind,
                        chart_immersion=chart_immersion,
                        chart_metric=chart_metric, tensor_kind=tensor_kind,
                        tensor_diagonal=tensor_diagonal,
                        tensor_full=tensor_full, drift=drift,
                        eigen_count=eigen_count, eigen_method=eigen_method,
                        eigen_tol=eigen_tol, eigen_shift=eigen_shift,
                        checks=checks, overrides=overrides, output=output)
    _validate_shift_availability(scenario)
    return scenario


def _parse_checks(tree, dim_n):
    checks = []
    grouped = {}
    for key in [k for k in tree if k.startswith("checks.")]:
        parts = key.split(".")
        if len(parts) not in (2, 3) or parts[1] not in CHECK_NAMES:
            raise ConfigError(key, "unknown check")
        grouped.setdefault(parts[1], {})[parts[2] if len(parts) == 3 else ""] \
            = tree.pop(key)
    for name in CHECK_NAMES:
        if name not in grouped:
            continue
        params = grouped[name]
        base = f"checks.{name}"
        if name in ("theorem_1_1", "recursion", "yang_type"):
            k_list = params.pop("k_list", None)
            if k_list is None:
                raise ConfigError(f"{base}.k_list", "required")
            ks = _to_int_list(k_list, f"{base}.k_list")
            if any(k < 1 for k in ks):
                raise ConfigError(f"{base}.k_list", "entries must be >= 1")
            checks.append(CheckRequest(name, {"k_list": ks}))
        elif name == "theorem_1_2":
            flag = params.pop("", "on")
            if _to_flag(flag, base):
                checks.append(CheckRequest(name, {}))
        elif name == "theorem3":
            checks.append(_parse_theorem3(params, base, dim_n))
        elif name == "lemma1":
            f = params.pop("f", None)
            if f is None:
                raise ConfigError(f"{base}.f", "required")
            f = _expr_text(f, f"{base}.f", dim_n)
            k_list = params.pop("k_list", None)
            if k_list is None:
                raise ConfigError(f"{base}.k_list", "required")
            ks = _to_int_list(k_list, f"{base}.k_list")
            mode = str(params.pop("mode", "simple"))
            if mode not in ("simple", "full"):
                raise ConfigError(f"{base}.mode", f"unknown mode {mode!r}")
            checks.append(CheckRequest(name, {"f": f, "k_list": ks,
                                              "mode": mode}))
        if params:
            bad = sorted(params)[0]
            raise ConfigError(f"{base}.{bad}" if bad else base,
                              "unknown check parameter")
    return checks


def _parse_theorem3(params, base, dim_n):
    variant = params.pop("variant", None)
    if variant is None:
        raise ConfigError(f"{base}.variant", "required")
    variant = str(variant)
    if variant not in ("i", "ii", "iii"):
        raise ConfigError(f"{base}.variant", f"unknown variant {variant!r}")
    k_list = params.pop("k_list", None)
    if k_list is None:
        raise ConfigError(f"{base}.k_list", "required")
    ks = _to_int_list(k_list, f"{base}.k_list")
    out = {"variant": variant, "k_list": ks}
    if variant == "i":
        theta = params.pop("theta", None)
        if theta is None:
            raise ConfigError(f"{base}.theta", "required for variant i")
        out["fields"] = [_expr_text(theta, f"{base}.theta", dim_n)]
        a0 = params.pop("A0", None)
        if a0 is None:
            raise ConfigError(f"{base}.A0", "required for variant i")
        out["constant"] = _to_float(a0, f"{base}.A0")
        if out["constant"] < 0.0:
            raise ConfigError(f"{base}.A0", "must be nonnegative")
    elif variant == "ii":
        psi = params.pop("psi", None)
        if psi is None:
            raise ConfigError(f"{base}.psi", "required for variant ii")
        out["fields"] = [_expr_text(psi, f"{base}.psi", dim_n)]
        b0 = params.pop("B0", None)
        if b0 is None:
            raise ConfigError(f"{base}.B0", "required for variant ii")
        out["constant"] = _to_float(b0, f"{base}.B0")
    else:
        comps = params.pop("map", None)
        if comps is None:
            raise ConfigError(f"{base}.map", "required for variant iii")
        out["fields"] = _expr_list(comps, f"{base}.map", dim_n)
        gamma = params.pop("gamma", None)
        if gamma is None:
            raise ConfigError(f"{base}.gamma", "required for variant iii")
        out["constant"] = _to_float(gamma, f"{base}.gamma")
    return CheckRequest("theorem3", out)


def _required_count(checks, dim_n):
    needed = 1
    for check in checks:
        if check.name == "theorem_1_2":
            needed = max(needed, dim_n + 1)
        elif "k_list" in check.params:
            needed = max(needed, max(check.params["k_list"]) + 1)
    return needed


def _validate_shift_availability(scenario):
    needs_shift = any(c.name in ("theorem_1_1", "theorem_1_2", "recursion",
                                 "yang_type") for c in scenario.checks)
    intrinsic = scenario.chart_kind == "metric"
    if needs_shift and intrinsic and "H0" not in scenario.overrides:
        raise ConfigError(
            "override.H0",
            "shifted-spectrum checks on an intrinsic chart need an analytic "
            "mean-curvature bound; set override.H0")


def canonical_items(scenario):
    """Resolved scenario as deterministic (key, value-text) pairs."""
    items = [("domain.kind", scenario.domain.kind)]
    for key in sorted(scenario.domain.params):
        items.append((f"domain.{key}", _fmt(scenario.domain.params[key])))
    items.append(("resolution", str(scenario.resolution)))
    items.append(("refinements", str(scenario.refinements)))
    items.append(("chart.kind", scenario.chart_kind))
    if scenario.chart_immersion:
        items.append(("chart.immersion",
                      "[" + ", ".join(scenario.chart_immersion) + "]"))
    if scenario.chart_metric:
        rows = ["[" + ", ".join(row) + "]" for row in scenario.chart_metric]
        items.append(("chart.metric", "[" + ", ".join(rows) + "]"))
    items.append(("tensor.kind", scenario.tensor_kind))
    if scenario.tensor_diagonal:
        items.append(("tensor.diagonal",
                      "[" + ", ".join(scenario.tensor_diagonal) + "]"))
    if scenario.tensor_full:
        rows = ["[" + ", ".join(row) + "]" for row in scenario.tensor_full]
        items.append(("tensor.full", "[" + ", ".join(rows) + "]"))
    if scenario.drift is not None:
        items.append(("drift", scenario.drift))
    items.append(("eigen.count", str(scenario.eigen_count)))
    items.append(("eigen.method", scenario.eigen_method))
    items.append(("eigen.tol", _fmt(scenario.eigen_tol)))
    items.append(("eigen.shift", _fmt(scenario.eigen_shift)))
    for check in scenario.checks:
        base = f"checks.{check.name}"
        if check.name == "theorem_1_2":
            items.append((base, "on"))
            continue
        for key in sorted(check.params):
            value = check.params[key]
            if key == "k_list":
                items.append((f"{base}.k_list",
                              "[" + ", ".join(str(k) for k in value) + "]"))
            elif key == "fields":
                label = {"i": "theta", "ii": "psi",
                         "iii": "map"}[check.params["variant"]]
                if label == "map":
                    items.append((f"{base}.map", "[" + ", ".join(value) + "]"))
                else:
                    items.append((f"{base}.{label}", value[0]))
            elif key == "constant":
                label = {"i": "A0", "ii": "B0",
                         "iii": "gamma"}[check.params["variant"]]
                items.append((f"{base}.{label}", _fmt(value)))
            else:
                items.append((f"{base}.{key}", str(value)))
    for key in sorted(scenario.overrides):
        items.append((f"override.{key}", _fmt(scenario.overrides[key])))
    for key in sorted(scenario.output):
        items.append((f"output.{key}", scenario.output[key]))
    return items


def _fmt(v):
    return f"{float(v):.17g}"
