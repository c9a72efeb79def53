"""cinescore: a film-music production toolkit.

Pipeline stages: rhythm spotting from symbolic music, visual feature
analysis, rhythm-conditioned melody generation (pluggable backends),
multi-agent assessment and arrangement over mock or live language-model
backends, scheme-driven rendering to 48 kHz / 24-bit audio, and an
evaluation metric suite.
"""

__version__ = "0.1.0"
