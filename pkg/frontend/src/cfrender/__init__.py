from .panels import PanelSpec, build_panel_figure, build_shots_figure, render_panels
from .reader import GREENS_COLUMNS, SHOTS_COLUMNS, SchemaError, SelectionError, read_table

__version__ = "0.1.0"
