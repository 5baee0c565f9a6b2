from .render import CsvFormatError, FigureSpec, load_meansq, load_paths, render_figure

__all__ = ["CsvFormatError", "FigureSpec", "load_meansq", "load_paths", "render_figure"]
__version__ = "0.1.0"
