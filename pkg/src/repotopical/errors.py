"""Exception types shared across the toolkit."""


class RepotopicalError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RepotopicalError):
    """Bad inputs: malformed files, impossible configs, contract violations.

    The CLI maps these to exit code 2.
    """


class CrawlError(RepotopicalError):
    """Base class for crawler failures."""


class RetriableCrawlError(CrawlError):
    """Transient failure (network, rate limiting) that exhausted its retries."""


class FatalCrawlError(CrawlError):
    """Non-retriable failure such as bad credentials."""
