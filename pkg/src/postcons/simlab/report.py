"""CSV output, text summaries and plots."""

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from ..exceptions import DegenerateInputError

__all__ = ["COLUMNS", "write_csv", "read_csv", "format_rows", "emit_report", "summarize",
           "summary_text", "plot_masses"]

COLUMNS = ("scenario_id", "replication", "seed", "n", "target_mass", "log_target_mass",
           "bound_value", "domination_ok")

CSV_NAME = "trajectories.csv"
CERT_NAME = "certificate.txt"
CONFIG_NAME = "config.toml"
SUMMARY_NAME = "summary.txt"
PLOT_NAME = "mass_vs_n.svg"
PLOT_FLOOR = 1e-300


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_rows(rows):
    """CSV text for ``rows`` (header included), floats written with ``repr``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


_PARSERS = (str, int, int, int, float, float, float, lambda s: s == "true")


def read_csv(path):
    """Rows of a trajectory CSV as typed tuples.

    Raises
    ------
    DegenerateInputError
        If the header is not the expected one.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if tuple(header or ()) != COLUMNS:
            raise DegenerateInputError(f"{path}: unexpected header {header}")
        return [tuple(p(v) for p, v in zip(_PARSERS, row)) for row in rd]


def _atomic_write(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(rows, path):
    rows = list(rows)
    if not rows:
        raise DegenerateInputError("no rows to write")
    _atomic_write(path, format_rows(rows).encode("utf-8"))


def summarize(rows, threshold=0.05):
    """Per-``n`` quantiles of the target mass.

    The almost-sure statements are read as the fraction of replications
    whose mass is below ``threshold``; this is a convention of the
    harness, reported alongside the quantiles.
    """
    rows = list(rows)
    if not rows:
        raise DegenerateInputError("no rows to summarize")
    ns = sorted({r[3] for r in rows})
    out = []
    for n in ns:
        m = np.array([r[4] for r in rows if r[3] == n])
        ok = np.isfinite(m)
        mk = m[ok]
        b = [r[6] for r in rows if r[3] == n][0]
        q = np.quantile(mk, [0.1, 0.5, 0.9]) if mk.size else [np.nan] * 3
        out.append({
            "n": n, "replications": int(m.size), "breaches": int((~ok).sum()),
            "q10": float(q[0]), "median": float(q[1]), "q90": float(q[2]),
            "exact_zeros": int((mk == 0).sum()),
            "frac_below": float(np.mean(mk < threshold)) if mk.size else np.nan,
            "bound": float(b),
        })
    return out


def summary_text(rows, threshold=0.05):
    """Plain-text table of :func:`summarize`."""
    lines = [f"scenario_id: {rows[0][0]}",
             f"fraction column: replications with target mass < {threshold!r}",
             "n replications breaches q10 median q90 exact_zeros fraction bound"]
    for s in summarize(rows, threshold):
        lines.append(" ".join(repr(s[k]) if isinstance(s[k], float) else str(s[k]) for k in
                              ("n", "replications", "breaches", "q10", "median", "q90",
                               "exact_zeros", "frac_below", "bound")))
    return "\n".join(lines) + "\n"


def plot_masses(rows, path):
    """Median and 10-90% band of the target mass against ``n`` (log scale).

    Zeros are drawn at the floor ``1e-300``; their count is in the summary.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stats = summarize(rows)
    ns = np.array([s["n"] for s in stats])
    fl = lambda k: np.maximum([s[k] for s in stats], PLOT_FLOOR)  # noqa: E731
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(ns, fl("q10"), fl("q90"), alpha=0.3, label="10-90% band")
    ax.plot(ns, fl("median"), marker="o", label="median")
    b = np.array([s["bound"] for s in stats])
    if np.isfinite(b).any():
        ax.plot(ns, np.clip(b, PLOT_FLOOR, None), ls="--", color="k", label="certificate bound")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("posterior mass of target")
    ax.set_title(str(rows[0][0]))
    ax.legend()
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _atomic_write(path, buf.getvalue())


def emit_report(result, out_dir, svg=False, threshold=0.05):
    """Write the CSV, the config echo, the certificate and a summary.

    Parameters
    ----------
    result : ExperimentResult
    out_dir : path
    svg : bool
        Also draw :func:`plot_masses`.

    Returns
    -------
    dict
        Output name to path.

    Raises
    ------
    DegenerateInputError
        If the result holds no trajectories; nothing is written.
    OSError
        If ``out_dir`` cannot be written.
    """
    rows = list(result.rows())
    if not rows:
        raise DegenerateInputError("empty trajectory set")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / CSV_NAME, "summary": out / SUMMARY_NAME}
    write_csv(rows, paths["csv"])
    text = summary_text(rows, threshold)
    if result.notes:
        text += "".join(f"note: {n}\n" for n in result.notes)
    _atomic_write(paths["summary"], text.encode("utf-8"))
    if result.config.raw:
        paths["config"] = out / CONFIG_NAME
        _atomic_write(paths["config"], result.config.raw)
    if result.certificate is not None:
        paths["certificate"] = out / CERT_NAME
        _atomic_write(paths["certificate"], (result.certificate.to_text() + "\n").encode())
    if svg:
        paths["svg"] = out / PLOT_NAME
        plot_masses(rows, paths["svg"])
    return paths
