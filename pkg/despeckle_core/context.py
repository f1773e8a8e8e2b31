from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator, Optional

# Label of the pipeline cell being processed, e.g. "sobi/n=25".
# default=None is safer than empty string for logic checks
_cell_label_ctx_var: ContextVar[Optional[str]] = ContextVar("cell_label", default=None)


def get_cell_label() -> Optional[str]:
    """
    Retrieve the label of the pipeline cell running in the current context.

    Usage:
        ```python
        logger.info(f"finished {get_cell_label()}")
        ```
    """
    return _cell_label_ctx_var.get()


def set_cell_label(label: str):
    """
    Internal use: Set the cell label for the current context.
    Returns a Token that can be used to reset the context.
    """
    return _cell_label_ctx_var.set(label)


def reset_cell_label(token):
    """
    Internal use: Reset the context to its previous state.
    """
    _cell_label_ctx_var.reset(token)


@contextmanager
def cell_context(label: str) -> Iterator[str]:
    """
    Tag every log record emitted inside the block with ``label``.

    Worker threads do not inherit the caller's context, so each job enters its own block.
    """
    token = set_cell_label(label)
    try:
        yield label
    finally:
        reset_cell_label(token)
