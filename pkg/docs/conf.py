"""Sphinx configuration of the shapefit documentation."""

project = "shapefit-python"
author = "Shun Huang"
copyright = "2021, Shun Huang"

extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon"]
napoleon_numpy_docstring = True

exclude_patterns = ["_build"]
html_theme = "alabaster"
