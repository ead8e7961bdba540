"""
Start-up checks.
"""

from .dependency_validator import DependencyValidator
