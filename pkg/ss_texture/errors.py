from __future__ import annotations

from pathlib import Path


class SSTextureError(Exception):
    """Root of every error raised by ss_texture."""


class InvalidArgumentError(SSTextureError, ValueError):
    pass


class UnsupportedOrderError(InvalidArgumentError):
    pass


class ConfigError(InvalidArgumentError):
    pass


class InsufficientDataError(SSTextureError, ValueError):
    pass


class SingularCovarianceError(SSTextureError, ArithmeticError):
    """
    The regularized class covariance of a QDC could not be factorized.

    `subset` is filled in by the pipeline so the message names the
    (derivative, scale) feature subset that failed.
    """

    def __init__(self, class_index: int, subset: str | None = None) -> None:
        self.class_index = class_index
        self.subset = subset
        super().__init__(self._message())

    def _message(self) -> str:
        where = f" in subset {self.subset}" if self.subset else ""
        return (
            f"covariance of class {self.class_index} is singular{where}; "
            "increase reg_eta/reg_lambda or set singular_retry_epsilon"
        )

    def with_subset(self, subset: str) -> "SingularCovarianceError":
        return SingularCovarianceError(self.class_index, subset)


class IngestionError(SSTextureError, OSError):
    def __init__(self, path: Path | str, reason: str) -> None:
        self.path = Path(path)
        super().__init__(f"cannot read {self.path}: {reason}")


class ExportError(SSTextureError, OSError):
    def __init__(self, path: Path | str, reason: str) -> None:
        self.path = Path(path)
        super().__init__(f"cannot write {self.path}: {reason}")
