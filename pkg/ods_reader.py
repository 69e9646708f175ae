"""
Module for reading A-matrices and result tables from ODS spreadsheet files.
"""

import logging
from typing import Dict, List, Optional

from odf import opendocument, table, text

from pauli_algebra import BinaryMatrix, ParseError


class ODSReader:
    """
    Reads ODS workbooks sheet by sheet.
    """

    def __init__(self, file_path: str):
        """
        Initialize the ODS reader with a file path.

        Args:
            file_path: Path to the ODS file
        """
        self.file_path = file_path
        self.logger = logging.getLogger(__name__)

    def read_file(self) -> Dict[str, List[List[str]]]:
        """
        Read all sheets from the ODS file.

        Returns:
            Dictionary mapping sheet names to their cell text as 2D lists
        """
        self.logger.info(f"Reading ODS file: {self.file_path}")
        try:
            doc = opendocument.load(self.file_path)
        except Exception as e:
            raise ParseError(f"{self.file_path}: not a readable ODS workbook ({e})") from e

        sheets_data = {}
        for sheet in doc.spreadsheet.getElementsByType(table.Table):
            sheet_name = sheet.getAttribute('name')
            sheets_data[sheet_name] = self._extract_sheet_data(sheet)
            self.logger.debug(f"Extracted {len(sheets_data[sheet_name])} rows from sheet: {sheet_name}")
        return sheets_data

    def _extract_sheet_data(self, sheet: table.Table) -> List[List[str]]:
        rows_data = []
        for row in sheet.getElementsByType(table.TableRow):
            row_data = []
            for cell in row.getElementsByType(table.TableCell):
                cell_value = self._get_cell_value(cell)
                repeat = cell.getAttribute('numbercolumnsrepeated')
                row_data.extend([cell_value] * (int(repeat) if repeat else 1))
            # trailing repeated empty cells pad every row to the sheet width
            while row_data and not row_data[-1]:
                row_data.pop()
            if row_data:
                rows_data.append(row_data)
        return rows_data

    def _get_cell_value(self, cell: table.TableCell) -> str:
        value = cell.getAttribute('value')
        if value is not None:
            return str(value)
        parts = [str(element.firstChild) for element in cell.getElementsByType(text.P) if element.firstChild]
        return " ".join(parts).strip()

    def read_binary_matrix(self, sheet_name: Optional[str] = None) -> BinaryMatrix:
        """
        Read a 0/1 A-matrix from a sheet (the first one by default).

        Args:
            sheet_name: Sheet to read

        Returns:
            BinaryMatrix with one row per sheet row; missing cells count as 0
        """
        sheets = self.read_file()
        if not sheets:
            raise ParseError(f"{self.file_path}: workbook has no sheets")
        if sheet_name is None:
            sheet_name = next(iter(sheets))
        if sheet_name not in sheets:
            raise ParseError(f"{self.file_path}: no sheet named {sheet_name!r}")
        rows = sheets[sheet_name]
        if not rows:
            raise ParseError(f"{self.file_path}: sheet {sheet_name!r} is empty")
        width = max(len(row) for row in rows)
        entries = []
        for r, row in enumerate(rows, 1):
            parsed = []
            for c, cell in enumerate(row + [''] * (width - len(row)), 1):
                token = cell.strip()
                if token in ('', '0', '0.0'):
                    parsed.append(0)
                elif token in ('1', '1.0'):
                    parsed.append(1)
                else:
                    raise ParseError(f"{self.file_path}: cell ({r}, {c}) holds {cell!r}, expected 0 or 1")
            entries.append(parsed)
        self.logger.info(f"Loaded a {len(entries)}x{width} A-matrix from sheet {sheet_name!r}")
        return BinaryMatrix.from_rows(entries)

    def read_table(self, sheet_name: str) -> List[Dict[str, str]]:
        """
        Rows of a result sheet keyed by its header row.
        """
        rows = self.read_file().get(sheet_name)
        if not rows:
            raise ParseError(f"{self.file_path}: no data in sheet {sheet_name!r}")
        headers = rows[0]
        return [{h: (row[i] if i < len(row) else '') for i, h in enumerate(headers)} for row in rows[1:]]
