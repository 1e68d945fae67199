"""The metric definition file format and the built-in catalog.

Files are flat structured text: ``[section]`` headers followed by
``key = value`` lines; ``#`` starts a comment.  Expressions are quoted.
A complete example (the shipped Schwarzschild file is byte-identical in
structure):

    [metric]
    name = schwarzschild
    coordinates = t, r, theta, phi
    signature = -+++

    [parameters]
    m = 1.0

    [components]
    g_t_t = "-(1 - 2*m/r)"
    g_t_r = "1"
    g_theta_theta = "r^2"
    g_phi_phi = "r^2*sin(theta)^2"

    [points]
    p1 = 0, 3, 1.5708, 0

Components are keyed by coordinate names; giving one triangle is enough and
giving both triangles with different expressions is an error.  Unlisted
components are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .einstein import MetricSpec, spec_from_components
from .errors import MetricFileError, ParseError

_KNOWN_SECTIONS = {"metric", "parameters", "components", "conformal_factor", "points"}


def _read_sections(text, origin):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _KNOWN_SECTIONS:
                raise MetricFileError(f"{origin}:{lineno}: unknown section [{name}]")
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise MetricFileError(f"{origin}:{lineno}: content before any [section]")
        if "=" not in line:
            raise MetricFileError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise MetricFileError(f"{origin}:{lineno}: empty key")
        current.append((key, value, lineno))
    return sections


def _unquote(value, origin, lineno):
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    raise MetricFileError(f"{origin}:{lineno}: expressions must be quoted, got {value}")


def _parse_point(value, origin, lineno):
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 4:
        raise MetricFileError(f"{origin}:{lineno}: a point needs 4 coordinates")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise MetricFileError(f"{origin}:{lineno}: point components must be numbers") from None


@dataclass(frozen=True)
class MetricFile:
    """A loaded and validated metric definition."""

    name: str
    coordinates: tuple
    parameters: dict
    component_sources: dict  # (i, j) lower-triangular -> source text
    signature_hint: str = None
    conformal_factor_source: str = None
    sample_points: tuple = ()
    spec: MetricSpec = field(default=None, compare=False)

    def points_or(self, override):
        if override:
            return tuple(override)
        if not self.sample_points:
            raise MetricFileError(
                f"metric '{self.name}' ships no sample points; pass --points"
            )
        return self.sample_points


def parse_metric_text(text, origin="<string>", fallback_name=None):
    sections = _read_sections(text, origin)
    if "metric" not in sections:
        raise MetricFileError(f"{origin}: missing [metric] section")
    head = {key: (value, lineno) for key, value, lineno in sections["metric"]}
    name = head.get("name", (fallback_name, 0))[0]
    if not name:
        raise MetricFileError(f"{origin}: metric name missing")
    if "coordinates" not in head:
        raise MetricFileError(f"{origin}: [metric] must declare coordinates")
    coords = tuple(c.strip() for c in head["coordinates"][0].split(","))
    if len(coords) != 4 or len(set(coords)) != 4 or not all(coords):
        raise MetricFileError(f"{origin}: exactly 4 distinct coordinate names required")
    signature = head.get("signature", (None, 0))[0]

    parameters = {}
    for key, value, lineno in sections.get("parameters", []):
        try:
            parameters[key] = float(value)
        except ValueError:
            raise MetricFileError(f"{origin}:{lineno}: parameter {key} must be a number") from None

    index = {c: i for i, c in enumerate(coords)}
    components = {}
    for key, value, lineno in sections.get("components", []):
        if not key.startswith("g_"):
            raise MetricFileError(f"{origin}:{lineno}: component keys look like g_<c1>_<c2>")
        rest = key[2:]
        pair = None
        for split, ch in enumerate(rest):
            if ch == "_" and rest[:split] in index and rest[split + 1 :] in index:
                pair = (rest[:split], rest[split + 1 :])
                break
        if pair is None:
            raise MetricFileError(
                f"{origin}:{lineno}: cannot match '{key}' against the declared coordinates"
            )
        i, j = sorted((index[pair[0]], index[pair[1]]))
        source = _unquote(value, origin, lineno)
        if (i, j) in components and components[(i, j)] != source:
            raise MetricFileError(
                f"{origin}:{lineno}: component g[{i}][{j}] given twice with different expressions"
            )
        components[(i, j)] = source
    if not components:
        raise MetricFileError(f"{origin}: [components] section is empty or missing")

    factor = None
    for key, value, lineno in sections.get("conformal_factor", []):
        if key != "theta":
            raise MetricFileError(f"{origin}:{lineno}: conformal factor key must be 'theta'")
        factor = _unquote(value, origin, lineno)

    points = tuple(
        _parse_point(value, origin, lineno) for _, value, lineno in sections.get("points", [])
    )

    try:
        spec = spec_from_components(name, coords, components, parameters, factor)
    except ParseError as err:
        raise MetricFileError(f"{origin}: {err}") from err

    return MetricFile(
        name=name,
        coordinates=coords,
        parameters=parameters,
        component_sources=components,
        signature_hint=signature,
        conformal_factor_source=factor,
        sample_points=points,
        spec=spec,
    )


def load_metric(path):
    """Load and validate a metric definition file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise MetricFileError(f"cannot read {path}: {err}") from err
    return parse_metric_text(text, origin=str(path), fallback_name=path.stem)


def _catalog_dir():
    return resources.files("eincheck") / "catalog"


def catalog_names():
    names = sorted(
        entry.name[: -len(".metric")]
        for entry in _catalog_dir().iterdir()
        if entry.name.endswith(".metric")
    )
    return tuple(names)


def load_catalog_metric(name):
    entry = _catalog_dir() / f"{name}.metric"
    if not entry.is_file():
        known = ", ".join(catalog_names())
        raise MetricFileError(f"no catalog metric '{name}' (available: {known})")
    return parse_metric_text(entry.read_text(encoding="utf-8"), origin=f"catalog:{name}", fallback_name=name)


def catalog_conformal_factors():
    """Named conformal-factor expressions shipped with the catalog."""
    entry = _catalog_dir() / "conformal.factors"
    out = {}
    for key, value, lineno in _read_sections(
        entry.read_text(encoding="utf-8"), "catalog:conformal.factors"
    ).get("conformal_factor", []):
        out[key] = _unquote(value, "catalog:conformal.factors", lineno)
    return out
