"""Reference external-detector worker.

Speaks the newline-delimited JSON detector protocol on stdin/stdout and
wraps a deliberately simple per-class mean-template matcher.  The point of
this package is the protocol boundary: it shows how a real detector (e.g. a
GPU-trained CNN service) plugs into the data-generation and training harness
without sharing any code with it.  The only inputs are JSONL dataset
manifests and the PNG images they reference.
"""

from .matcher import MeanTemplateMatcher
from .protocol import serve_protocol

__version__ = "0.1.0"

__all__ = ["MeanTemplateMatcher", "serve_protocol", "__version__"]
