"""
CamoFlow Test Suite

Tests for every layer:
- Autodiff primitives against naive-loop oracles
- Network modules and their shape contracts
- Losses, metrics and file formats
- Training, evaluation, gradient checks and the CLI
"""
