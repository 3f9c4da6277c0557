# src/__init__.py
# This file makes the 'src' directory a Python package.