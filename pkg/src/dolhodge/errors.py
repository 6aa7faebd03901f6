"""Exceptions shared across the package, mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class RankJumpError(RuntimeError):
    """Local freeness fails: harmonic dimension jumps or no admissible
    spectral gap exists (CLI exit code 3)."""


class SolverError(RuntimeError):
    """An iterative solver failed to reach its tolerance (CLI exit code 4)."""
