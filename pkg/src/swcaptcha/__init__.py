"""Sine-wave speech audio CAPTCHA toolkit.

Pipeline: generate a clean spoken corpus, render each clip as a sparse
sine-wave surrogate, harden it with a randomized irreversible conversion,
package clips into option-based challenges, serve them over HTTP, and
measure automated solvers against the result.
"""

__version__ = "0.1.0"
