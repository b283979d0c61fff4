"""Configuration management package."""
from .settings import (RunConfig, GeometrySettings, BundleSettings, SolverSettings, OutputSettings,
                       load_config)

__all__ = ['RunConfig', 'GeometrySettings', 'BundleSettings', 'SolverSettings', 'OutputSettings',
           'load_config']
