# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import sphinx_pangeo_theme  # noqa: F401

import floquetlab

# -- Project information -----------------------------------------------------

project = "floquetlab"
copyright = "2026, the floquetlab developers"
author = "the floquetlab developers"

# The full version, including alpha/beta/rc tags
release = floquetlab.__version__
# The short X.Y version.
version = ".".join(release.split(".")[:2])


# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.intersphinx",
    "numpydoc",
    "IPython.sphinxext.ipython_directive",
    "IPython.sphinxext.ipython_console_highlighting",
    "sphinxcontrib.srclinks",
]

templates_path = ["_templates"]

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

intersphinx_mapping = {
    "numpy": ("https://numpy.org/doc/stable/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
    "dask": ("https://docs.dask.org/en/stable/", None),
}

# -- Options for HTML output -------------------------------------------------

html_theme = "pangeo"

html_sidebars = {
    "index": ["localtoc.html", "srclinks.html"],
    "**": ["localtoc.html", "srclinks.html"],
}

html_static_path = ["_static"]

html_show_sourcelink = True
srclink_src_path = "docs/"
