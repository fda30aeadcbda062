from __future__ import annotations

import getpass
import logging
import os
import sys
from pathlib import Path

PASSPHRASE_ENV = "PENROSE_KEY_PASSPHRASE"


def setup_logging(verbose: int) -> None:
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def read_passphrase(path: str | None, confirm: bool = False) -> bytes:
    """Passphrase from a file, the environment, or an interactive prompt."""
    if path:
        return Path(path).read_text().rstrip("\n").encode()
    env = os.environ.get(PASSPHRASE_ENV)
    if env is not None:
        return env.encode()
    if not sys.stdin.isatty():
        raise SystemExit(f"no passphrase: use --passphrase-file or set {PASSPHRASE_ENV}")
    first = getpass.getpass("key passphrase: ")
    if confirm and getpass.getpass("repeat passphrase: ") != first:
        raise SystemExit("passphrases differ")
    return first.encode()


def fail(msg: str, code: int = 2) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code
