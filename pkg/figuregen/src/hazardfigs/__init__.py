"""Figure rendering for federated deterioration-model experiment outputs."""

from .metrics import MetricsFrame, SchemaError, load_grid, load_summary, load_truth_beta
from .panels import render_heatmaps, render_learning_curves, render_scale_panels
from .style import apply_style, load_style

__version__ = "0.1.0"
