"""Entity alignment with dangling-entity detection.

Builds alignment datasets that contain dangling entities, trains
embedding-based aligners jointly with a dangling detector, and evaluates
under the relaxed (ranking) and consolidated (abstention-aware) protocols.
"""

__version__ = "0.1.0"
FORMAT_VERSION = 1
