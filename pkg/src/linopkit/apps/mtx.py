"""Matrix Market reader for the coordinate/real subset.

Supported: ``%%MatrixMarket matrix coordinate real general`` and the
``symmetric`` variant, where each stored off-diagonal entry is mirrored.
Anything else (pattern, complex, integer, array, skew-symmetric, hermitian)
raises UnsupportedFormatError.  Malformed content raises ParseError with the
1-based line number.
"""

from __future__ import annotations

from ..container import MatrixData
from ..errors import ParseError, UnsupportedFormatError


def read_matrix_market(path) -> MatrixData:
    """Parse a Matrix Market file into an assembly buffer (0-based indices)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()

    if not lines:
        raise ParseError("empty file", line_number=1)
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket":
        raise ParseError(
            "expected header '%%MatrixMarket matrix coordinate real <symmetry>'",
            line_number=1,
        )
    obj, fmt, field, symmetry = (tok.lower() for tok in header[1:])
    if obj != "matrix":
        raise UnsupportedFormatError(f"unsupported object '{obj}'")
    if fmt != "coordinate":
        raise UnsupportedFormatError(f"unsupported format '{fmt}' (only coordinate)")
    if field != "real":
        raise UnsupportedFormatError(f"unsupported field '{field}' (only real)")
    if symmetry not in ("general", "symmetric"):
        raise UnsupportedFormatError(f"unsupported symmetry '{symmetry}'")

    size_line = None
    body_start = None
    for idx in range(1, len(lines)):
        stripped = lines[idx].strip()
        if not stripped or stripped.startswith("%"):
            continue
        size_line = (idx + 1, stripped)
        body_start = idx + 1
        break
    if size_line is None:
        raise ParseError("missing size line", line_number=len(lines))

    lineno, text = size_line
    parts = text.split()
    if len(parts) != 3:
        raise ParseError(f"size line needs 'rows cols nnz', got '{text}'", line_number=lineno)
    try:
        rows, cols, declared = (int(p) for p in parts)
    except ValueError:
        raise ParseError(f"size line needs three integers, got '{text}'", line_number=lineno)
    if rows < 0 or cols < 0 or declared < 0:
        raise ParseError("size entries must be non-negative", line_number=lineno)
    if symmetry == "symmetric" and rows != cols:
        raise ParseError("symmetric matrix must be square", line_number=lineno)

    data = MatrixData((rows, cols))
    seen = 0
    for idx in range(body_start, len(lines)):
        lineno = idx + 1
        stripped = lines[idx].strip()
        if not stripped or stripped.startswith("%"):
            continue
        if seen == declared:
            raise ParseError(
                f"more than the declared {declared} entries", line_number=lineno
            )
        parts = stripped.split()
        if len(parts) != 3:
            raise ParseError(f"entry needs 'row col value', got '{stripped}'", line_number=lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            value = float(parts[2])
        except ValueError:
            raise ParseError(f"could not parse entry '{stripped}'", line_number=lineno)
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise ParseError(
                f"index ({i}, {j}) outside 1..{rows} x 1..{cols}", line_number=lineno
            )
        data.add(i - 1, j - 1, value)
        if symmetry == "symmetric" and i != j:
            data.add(j - 1, i - 1, value)
        seen += 1
    if seen != declared:
        raise ParseError(
            f"expected {declared} entries, file ends after {seen}", line_number=len(lines)
        )
    return data
