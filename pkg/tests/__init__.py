# tests/__init__.py

# This file intentionally left blank.  Add fixtures if needed.