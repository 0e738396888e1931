"""Exception types shared across the package."""


class FormatError(Exception):
    """A file or record does not conform to one of the documented formats.

    Raised for corrupt or unsupported image files, malformed manifests,
    malformed feature files and incompatible feature dimensions. Plain
    OSError is left untouched so callers can distinguish I/O failures
    (missing file, permissions) from content problems.
    """
