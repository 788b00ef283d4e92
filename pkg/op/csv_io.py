"""CSV artifacts of the lab and the optional SVG rate plot.

Reals are written with 17 significant digits so every file re-reads to the
same float64 values.
"""
import csv

from op.errors import DomainError

SCHEMAS = {
    "simulate": ("n", "reps", "ks", "dkw_radius", "u_n", "v_n", "bound_ratio"),
    "rate-fit": ("form", "C", "b", "r2", "points", "log_base"),
    "augment-demo": ("path_id", "V2_before", "d", "k", "n_hat", "V2_after_residual"),
    "augment-plan": ("n", "mode", "u", "d", "v2", "n_hat", "v_hat2", "total_length"),
    "augment-tails": ("path_id", "j", "value"),
    "augment-residuals": ("bin_lo", "bin_hi", "count"),
    "linear-process": ("n", "reps", "ks_f", "ks_m", "g_norm", "p", "ratio"),
    "lemma-check": ("joint_id", "k", "r", "beta", "delta_x", "delta_xy", "bound", "slack", "violations"),
}

INT_FIELDS = {"n", "reps", "path_id", "k", "n_hat", "joint_id", "violations", "points", "j", "count", "total_length"}
STR_FIELDS = {"form", "log_base", "mode"}
# k is a real exponent in lemma-check rows
REAL_OVERRIDES = {"lemma-check": {"k"}}


def format_real(x):
    return "%.17g" % float(x)


def _kind(schema, name):
    if name in REAL_OVERRIDES.get(schema, ()):
        return float
    if name in INT_FIELDS:
        return int
    if name in STR_FIELDS:
        return str
    return float


def _format(schema, name, value):
    kind = _kind(schema, name)
    if kind is int:
        return str(int(value))
    if kind is str:
        return str(value)
    return format_real(value)


def write_rows(path, schema, rows):
    """Write dict rows under the named schema; extra keys are an error."""
    if schema not in SCHEMAS:
        raise DomainError(f"unknown csv schema {schema!r}")
    fields = SCHEMAS[schema]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({name: _format(schema, name, row[name]) for name in fields})
    return path


def read_rows(path, schema=None):
    """Read a lab CSV back into typed dict rows; the schema is inferred from the header if not given."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = tuple(reader.fieldnames or ())
        if schema is None:
            matches = [name for name, fields in SCHEMAS.items() if fields == header]
            if not matches:
                raise DomainError(f"{path}: header {header} matches no known schema")
            schema = matches[0]
        elif header != SCHEMAS[schema]:
            raise DomainError(f"{path}: header {header} does not match schema {schema!r}")
        return [{name: _kind(schema, name)(value) for name, value in row.items()} for row in reader]


def plot_rate(grid, fit, path, title=None):
    """log Δ̂ against log n with the fitted curve overlaid, as a self-contained SVG."""
    import numpy as np
    from matplotlib.figure import Figure

    ns = np.array([g[0] for g in grid], dtype=np.float64)
    ds = np.array([g[1] for g in grid], dtype=np.float64)
    fig = Figure(figsize=(6, 4))
    ax = fig.subplots()
    ax.plot(np.log(ns), np.log(ds), "o-", label="log Δ̂_n")
    if fit is not None:
        dense = np.geomspace(ns.min(), ns.max(), 64)
        ax.plot(np.log(dense), np.log(fit.predict(dense)), "--",
                label=f"{fit.model_form}: C={fit.C:.3g}, b={fit.b:.3f}")
    ax.set_xlabel("log n")
    ax.set_ylabel("log Δ̂_n")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path
