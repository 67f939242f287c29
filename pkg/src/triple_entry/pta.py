"""Plain-text journal export and parser.

Block grammar (UTF-8, LF)::

    YYYY-MM-DD <memo>
      <account name>  <signed decimal amount> <UNIT>
      ...
    <blank line>

Debits print positive, credits negative. Amounts come from integer minor
units with two decimal places unless ``scales`` overrides the unit.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Mapping, Optional

from ._io import atomic_write
from .accounting import GeneralLedger, Posting, RoleMapping, Scope, post_all
from .errors import CorruptFile, IoFailure

DEFAULT_SCALE = 2

_DATE_LINE = re.compile(r"^(\d{4}-\d{2}-\d{2}) ?(.*)$")
_POSTING_LINE = re.compile(r"^  (\S(?:.*?\S)?)  (-?\d+(?:\.\d+)?) (\S+)$")


def format_amount(minor: int, scale: int = DEFAULT_SCALE) -> str:
    sign = "-" if minor < 0 else ""
    digits = str(abs(minor))
    if scale == 0:
        return sign + digits
    digits = digits.rjust(scale + 1, "0")
    return f"{sign}{digits[:-scale]}.{digits[-scale:]}"


def parse_amount(text: str, scale: int = DEFAULT_SCALE) -> int:
    value = Decimal(text) * (10**scale)
    if value != value.to_integral_value():
        raise ValueError(f"{text} has more than {scale} decimal places")
    return int(value)


def _date(ms: int) -> str:
    return dt.datetime.fromtimestamp(ms / 1000, tz=dt.timezone.utc).strftime("%Y-%m-%d")


def _block(gl: GeneralLedger, posting: Posting, scales: Mapping[str, int]) -> str:
    memo = " ".join(posting.memo.split())
    out = [f"{_date(posting.at)} {memo}".rstrip()]
    for line in posting.lines:
        name = gl.chart[line.account_code].name
        amount = format_amount(line.signed(), scales.get(line.unit, DEFAULT_SCALE))
        out.append(f"  {name}  {amount} {line.unit}")
    return "\n".join(out) + "\n\n"


def format_pta(
    gl: GeneralLedger,
    scope: Scope | str = Scope.ALL,
    scales: Optional[Mapping[str, int]] = None,
) -> str:
    scales = scales or {}
    postings = gl.glt + (gl.glr if Scope(scope) is Scope.ALL else [])
    return "".join(_block(gl, p, scales) for p in postings)


def export_pta(
    gl: GeneralLedger,
    path: str | Path,
    scope: Scope | str = Scope.ALL,
    scales: Optional[Mapping[str, int]] = None,
) -> str:
    text = format_pta(gl, scope, scales)
    atomic_write(path, text)
    return text


def export_journal_pta(
    journal,
    owner_alias: str,
    mapping: RoleMapping,
    path: str | Path,
    chart=None,
    scales: Optional[Mapping[str, int]] = None,
) -> str:
    """Export the owner's projected view of a journal without keeping a ledger."""
    gl = GeneralLedger(owner_alias) if chart is None else GeneralLedger(owner_alias, dict(chart))
    post_all(gl, journal, mapping)
    return export_pta(gl, path, Scope.GLT, scales)


@dataclass(frozen=True)
class PtaTransaction:
    date: str
    memo: str
    postings: tuple[tuple[str, int, str], ...]


def parse_pta(text: str, scales: Optional[Mapping[str, int]] = None) -> list[PtaTransaction]:
    scales = scales or {}
    txns: list[PtaTransaction] = []
    current: Optional[tuple[str, str]] = None
    postings: list[tuple[str, int, str]] = []
    offset = 0
    for line in text.split("\n"):
        if current is None:
            if line:
                m = _DATE_LINE.match(line)
                if not m:
                    raise CorruptFile(f"expected a date line, got {line!r}", offset)
                current = (m.group(1), m.group(2))
        elif line:
            m = _POSTING_LINE.match(line)
            if not m:
                raise CorruptFile(f"bad posting line {line!r}", offset)
            name, amount, unit = m.groups()
            try:
                minor = parse_amount(amount, scales.get(unit, DEFAULT_SCALE))
            except ValueError as exc:
                raise CorruptFile(str(exc), offset) from None
            postings.append((name, minor, unit))
        else:
            txns.append(PtaTransaction(current[0], current[1], tuple(postings)))
            current, postings = None, []
        offset += len(line.encode("utf-8")) + 1
    if current is not None:
        txns.append(PtaTransaction(current[0], current[1], tuple(postings)))
    return txns


def balances(txns: list[PtaTransaction]) -> dict[str, int]:
    out: dict[str, int] = {}
    for t in txns:
        for name, minor, _unit in t.postings:
            out[name] = out.get(name, 0) + minor
    return out


def read_pta(path: str | Path, scales: Optional[Mapping[str, int]] = None) -> list[PtaTransaction]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return parse_pta(text, scales)
