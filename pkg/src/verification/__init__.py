"""
Property suite for the verify command.
"""

from .property_suite import PropertyResult, PropertyStatus, PropertySuite, saturating_initial_state
