"""
Photoacoustic Toolkit - Reports

Plot-ready CSV files with a reproducibility header, atomic file writes, and
optional interactive HTML figures.
"""

from pathlib import Path
from typing import Dict, Iterable, Mapping, Tuple

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

CSV_FLOAT_FORMAT = "%.12g"


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------

def atomic_write_bytes(path, data: bytes) -> Path:
    """Write to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# CSV with header
# ---------------------------------------------------------------------------

def write_csv_report(df: pd.DataFrame, path, header: Iterable[str] = ()) -> Path:
    """
    Write ``df`` as CSV preceded by ``# key=value`` comment lines

    Args:
        df: Table to export
        path: Output file
        header: Lines such as ``RunConfig.echo()``; each is prefixed with '# '

    Returns:
        The written path
    """
    lines = "".join(f"# {line}\n" for line in header)
    body = df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, lines + body)


def read_csv_report(path) -> Tuple[Dict[str, str], pd.DataFrame]:
    """Inverse of ``write_csv_report``: header as a dict, body as a DataFrame."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Report not found: {path}")
    header = {}
    skip = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            skip += 1
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
    return header, pd.read_csv(path, skiprows=skip)


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def directivity_figure(df: pd.DataFrame) -> go.Figure:
    """Directivity in dB against incidence angle, one line per kappa."""
    fig = px.line(df, x="theta_deg", y="dB", color="kappa",
                  labels={"theta_deg": "Incidence angle (deg)", "dB": "V / p_inc (dB)"},
                  title="Sensor directivity")
    fig.update_layout(legend_title_text="kappa")
    return fig


def error_history_figure(histories: Mapping[str, pd.DataFrame]) -> go.Figure:
    """Relative error per iteration for each labelled Landweber run."""
    fig = go.Figure()
    for label, frame in histories.items():
        fig.add_trace(go.Scatter(
            x=frame["iteration"], y=frame["rel_error"],
            mode="lines+markers", name=label,
        ))
    fig.update_layout(
        title="Relative error versus iteration",
        xaxis_title="Iteration",
        yaxis_title="Relative error",
        yaxis_type="log",
    )
    return fig


def psd_figure(spectra: Mapping[str, pd.DataFrame]) -> go.Figure:
    """Log-log power spectral densities, one trace per label."""
    fig = go.Figure()
    for label, frame in spectra.items():
        positive = frame[frame["frequency"] > 0]
        fig.add_trace(go.Scatter(x=positive["frequency"], y=positive["power"], mode="lines", name=label))
    fig.update_layout(
        title="Power spectral density",
        xaxis_title="Frequency",
        yaxis_title="Power",
        xaxis_type="log",
        yaxis_type="log",
    )
    return fig


def write_figure_html(fig: go.Figure, path) -> Path:
    """Standalone HTML that loads plotly.js from the CDN."""
    return atomic_write_text(path, fig.to_html(include_plotlyjs="cdn", full_html=True))
