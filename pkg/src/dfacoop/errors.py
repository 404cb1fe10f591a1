"""Exception types shared across the package.

Every exception carries a short ``code`` so the command-line front end can
report failures as a single machine-parsable line.
"""


class DfaCoopError(Exception):
    code = "error"


class InvalidDfaError(DfaCoopError, ValueError):
    code = "invalid-dfa"


class InvalidSymbolError(DfaCoopError, ValueError):
    code = "invalid-symbol"


class AlphabetMismatchError(DfaCoopError, ValueError):
    code = "alphabet-mismatch"


class InvalidLayoutError(DfaCoopError, ValueError):
    code = "invalid-layout"


class EpisodeOverError(DfaCoopError, RuntimeError):
    code = "episode-over"


class SamplerError(DfaCoopError, RuntimeError):
    code = "sampler-rejections"


class CapExceededError(DfaCoopError, RuntimeError):
    code = "cap-exceeded"


class ManifestMismatchError(DfaCoopError, ValueError):
    code = "manifest-mismatch"


class InvalidConfigError(DfaCoopError, ValueError):
    code = "invalid-config"


class InvalidActionError(DfaCoopError, ValueError):
    code = "invalid-action"
