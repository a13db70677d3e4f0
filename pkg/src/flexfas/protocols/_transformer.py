from dataclasses import dataclass
from typing import List, Tuple

from lark import Transformer, v_args


@dataclass(frozen=True)
class RawRow:
    line: int
    cells: Tuple[str, ...]


class TreeToRawRowsTransformer(Transformer):
    def manifest(self, items) -> List[RawRow]:  # noqa
        return [row for row in items if any(row.cells)]

    @v_args(meta=True)
    def line(self, meta, items) -> RawRow:  # noqa
        return RawRow(meta.line, tuple(items))

    def cell(self, items) -> str:  # noqa
        return items[0] if items else ''

    def VALUE(self, token) -> str:  # noqa
        return token.value.strip()
