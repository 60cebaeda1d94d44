"""Numerical verification library for the cotangent-path Lie rackoid of the standard Courant algebroid."""
from . import expr
from .integration import *  # noqa: F401,F403
from .kernel import *  # noqa: F401,F403
from .leibniz import *  # noqa: F401,F403
from .paths import *  # noqa: F401,F403
from .rack import *  # noqa: F401,F403
from .suites import SUITES, ConfigError, Report, SuiteConfig, convergence_study, run_suite
from .symplectic import *  # noqa: F401,F403

__version__ = "0.1.0"
