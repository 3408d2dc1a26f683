"""
ui — Terminal output for the monoreg CLI.

Colours, status lines, the levels table and the logging handler. Everything
here writes to stderr; machine-readable output never passes through it.
"""

import logging
import os
import sys

# ── Colour constants ─────────────────────────────────────────────────────

def _use_colour(stream=None):
    stream = stream or sys.stderr
    return bool(getattr(stream, "isatty", lambda: False)()) and not os.getenv("NO_COLOR")


if _use_colour():
    CYAN    = "\033[36m"
    BOLD    = "\033[1m"
    DIM     = "\033[2m"
    GREEN   = "\033[32m"
    YELLOW  = "\033[33m"
    RED     = "\033[31m"
    RESET   = "\033[0m"
else:
    CYAN = BOLD = DIM = GREEN = YELLOW = RED = RESET = ""

OK = "✓"
WARN = "⚠"
FAIL = "❌"


# ── Status lines ─────────────────────────────────────────────────────────

def _emit(text):
    print(text, file=sys.stderr)


def success(text):
    _emit(f"  {GREEN}{OK}{RESET} {text}")


def warn(text):
    _emit(f"  {YELLOW}{WARN}{RESET} {text}")


def error(text):
    _emit(f"{RED}{FAIL}{RESET} {text}")


def info(text):
    _emit(f"  {DIM}{text}{RESET}")


def heading(text):
    _emit(f"\n  {BOLD}{CYAN}{text}{RESET}\n")


def status(passed, text):
    (success if passed else warn)(text)


# ── Tables ───────────────────────────────────────────────────────────────

def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return OK if v else "·"
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def levels_table(records):
    """Print a convergence report's level records as an aligned table."""
    cols = ("level", "n_points", "len_G", "discretization_error", "bound", "successive_diff", "certified")
    titles = ("n", "points", "len_G", "disc err", "bound", "succ diff", "cert")
    rows = [[_fmt(getattr(r, c)) for c in cols] for r in records]
    widths = [max(len(t), *(len(row[i]) for row in rows)) for i, t in enumerate(titles)]
    _emit("  " + "  ".join(f"{BOLD}{t:>{w}}{RESET}" for t, w in zip(titles, widths)))
    for row in rows:
        _emit("  " + "  ".join(f"{v:>{w}}" for v, w in zip(row, widths)))


# ── Logging ──────────────────────────────────────────────────────────────

class _Handler(logging.Handler):
    _STYLE = {
        logging.DEBUG: (DIM, " "),
        logging.INFO: (CYAN, "▸"),
        logging.WARNING: (YELLOW, WARN),
        logging.ERROR: (RED, FAIL),
        logging.CRITICAL: (RED, FAIL),
    }

    def emit(self, record):
        try:
            colour, glyph = self._STYLE.get(record.levelno, ("", " "))
            name = record.name.rsplit(".", 1)[-1]
            print(f"  {colour}{glyph}{RESET} {DIM}{name}:{RESET} {record.getMessage()}", file=sys.stderr)
        except Exception:  # pragma: no cover
            self.handleError(record)


def setup_logging(verbose=0):
    """Route the library's log records to stderr; -v shows info, -vv debug."""
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    root = logging.getLogger("monoreg")
    for h in list(root.handlers):
        if isinstance(h, _Handler):
            root.removeHandler(h)
    root.addHandler(_Handler())
    root.setLevel(level)
