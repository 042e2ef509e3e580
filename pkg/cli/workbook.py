# cli/workbook.py
from pathlib import Path
from typing import Dict

import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Font

SHEET_NAME_MAX = 31


def write_workbook(path: Path, tables: Dict[str, pd.DataFrame]) -> Path:
    """
    One sheet per table, header row in bold.

    Written fresh each time; cells hold plain values (NaN becomes empty).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    wb = Workbook()
    wb.remove(wb.active)
    for name, df in tables.items():
        ws = wb.create_sheet(title=name[:SHEET_NAME_MAX])
        ws.append([str(c) for c in df.columns])
        for cell in ws[1]:
            cell.font = Font(bold=True)
        for row in df.itertuples(index=False):
            ws.append([None if pd.isna(v) else (v.item() if hasattr(v, "item") else v) for v in row])

    wb.save(path)
    return path
