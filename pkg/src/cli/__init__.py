"""
Command-line pipelines.
"""
