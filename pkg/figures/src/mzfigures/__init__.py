from .render import FigureSpec, SchemaError, load_csv, render_figure, render_figures

__all__ = ["FigureSpec", "SchemaError", "load_csv", "render_figure", "render_figures"]
