__version__ = 'v0.3.1'
__version_date__ = '2026-10-17'
