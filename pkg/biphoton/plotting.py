"""
Minimal SVG figures for the --svg flag. Data tables are the contract;
these are convenience renderings.
"""

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .utils import logger  # noqa: E402

SVG_HASHSALT = 'biphoton'


def _save(fig, path: Path) -> Path:
    path = Path(path)
    with matplotlib.rc_context({'svg.hashsalt': SVG_HASHSALT, 'svg.fonttype': 'none'}):
        fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.info("svg_written", path=str(path))
    return path


def line_plot(df: pd.DataFrame, x: str, ys: Sequence[str], path: Path, title: str = '',
              group: Optional[str] = None) -> Path:
    """One line per column in `ys`, or per distinct `group` value when given"""
    fig, ax = plt.subplots(figsize=(6, 4))
    if group is None:
        for column in ys:
            ax.plot(df[x], df[column], label=column)
    else:
        for key, part in df.groupby(group, sort=True):
            for column in ys:
                ax.plot(part[x], part[column], label=f'{group}={key:g} {column}')
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.legend(fontsize='small')
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def heatmap(df: pd.DataFrame, x: str, y: str, z: str, path: Path, title: str = '') -> Path:
    """Rectangular long-format grid (x varies slowest) as an image"""
    xs = np.unique(df[x].to_numpy())
    ys = np.unique(df[y].to_numpy())
    grid = df[z].to_numpy().reshape(xs.size, ys.size)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    image = ax.imshow(grid.T, origin='lower', aspect='auto',
                      extent=(xs[0], xs[-1], ys[0], ys[-1]), cmap='viridis')
    fig.colorbar(image, ax=ax, label=z)
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.set_title(title)
    return _save(fig, path)
