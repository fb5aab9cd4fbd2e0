"""
plotting.py - Sweep tables and static charts

Each sweep returns a pandas DataFrame; write_plot saves it as CSV (canonical)
and renders a line chart as SVG. SVG bytes are reproducible: the id salt is
fixed and no creation date is embedded.
"""
import logging
from enum import Enum
from pathlib import Path
from typing import Tuple, Union

import matplotlib
matplotlib.use('Agg')
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .exceptions import ConfigurationError, NoBarrierError  # noqa: E402
from .tunneling_core import MarketParams, transmission_coefficient, turning_point  # noqa: E402
from .verification_lab import BarrierSpec, integrate_wavefunction  # noqa: E402

logger = logging.getLogger(__name__)

SVG_RC = {'svg.hashsalt': 'tunnel-engine', 'svg.fonttype': 'none'}


class PlotKind(Enum):
    T_VS_K = "t-vs-k"
    T_VS_SIGMA = "t-vs-sigma"
    PSI_PROFILE = "psi-profile"


# (x column, y column, x label, y label, log x)
_AXES = {
    PlotKind.T_VS_K: ('k', 'T', 'range width K', 'transmission T', False),
    PlotKind.T_VS_SIGMA: ('sigma', 'T', 'implied volatility', 'transmission T', True),
    PlotKind.PSI_PROFILE: ('s', 'psi', 'price s', 'psi(s)', False),
}


def t_vs_k_sweep(params: MarketParams, points: int = 100) -> pd.DataFrame:
    """T and d for K = s* i / (points + 1), i = 1..points, all inside the barrier."""
    if points < 2:
        raise ConfigurationError(f"points must be >= 2, got {points}")
    s_star = turning_point(params)
    rows = []
    for i in range(1, points + 1):
        k = s_star * i / (points + 1)
        evaluation = transmission_coefficient(params, k)
        rows.append({'k': k, 'T': evaluation.T, 'd': evaluation.d})
    return pd.DataFrame(rows, columns=['k', 'T', 'd'])


def t_vs_sigma_sweep(r: float, K: float, sigma_max: float = 100.0, points: int = 200) -> pd.DataFrame:
    """
    T over implied vol at fixed r and K.

    sigma runs geometrically over (r K^2, sigma_max]; the lower end is the
    turning point, so every sample is in the tunneling regime. T tends to 1 at
    both ends with a dip in between.
    """
    if points < 2:
        raise ConfigurationError(f"points must be >= 2, got {points}")
    sigma_min = r * K * K
    if not sigma_max > sigma_min:
        raise ConfigurationError(
            f"sigma_max ({sigma_max}) must exceed the turning-point vol r*K^2 = {sigma_min}"
        )
    ratios = np.arange(1, points + 1) / points
    sigmas = sigma_min * (sigma_max / sigma_min) ** ratios
    rows = []
    for sigma in sigmas:
        params = MarketParams(r=r, sigma=float(sigma))
        try:
            evaluation = transmission_coefficient(params, K)
        except NoBarrierError:
            # sigma within rounding of r K^2
            continue
        rows.append({'sigma': float(sigma), 'lambda': evaluation.lambda_,
                     'T': evaluation.T, 'd': evaluation.d})
    return pd.DataFrame(rows, columns=['sigma', 'lambda', 'T', 'd'])


def psi_profile(spec: BarrierSpec, n_steps: int = 10000) -> pd.DataFrame:
    """Wavefunction samples from K up to s*, where psi = 1."""
    return integrate_wavefunction(spec, n_steps).to_frame()


def render_svg(frame: pd.DataFrame, kind: PlotKind, path: Union[str, Path], title: str = '') -> None:
    x_col, y_col, x_label, y_label, log_x = _AXES[kind]
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        ax.plot(frame[x_col].to_numpy(), frame[y_col].to_numpy(), color='tab:blue', linewidth=1.2)
        if log_x:
            ax.set_xscale('log')
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.set_title(title or kind.value)
        ax.grid(True, linewidth=0.3)
        fig.tight_layout()
        fig.savefig(path, format='svg', metadata={'Date': None})


def write_plot(frame: pd.DataFrame, kind: PlotKind, out_prefix: Union[str, Path],
               title: str = '') -> Tuple[Path, Path]:
    """
    Write `<out_prefix>.csv` and `<out_prefix>.svg`.

    Returns:
        (csv path, svg path)
    """
    prefix = Path(out_prefix)
    csv_path = prefix.with_name(prefix.name + '.csv')
    svg_path = prefix.with_name(prefix.name + '.svg')
    frame.to_csv(csv_path, index=False, lineterminator='\n')
    render_svg(frame, kind, svg_path, title)
    logger.info(f"Wrote {len(frame)} {kind.value} rows to {csv_path} and {svg_path}")
    return csv_path, svg_path
