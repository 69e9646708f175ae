"""
Module for writing result tables and A-matrices to ODS spreadsheet files.
"""

import logging
from typing import Any, Dict, List, Sequence

import numpy as np
from odf.opendocument import OpenDocumentSpreadsheet
from odf.style import Style, TextProperties
from odf.table import Table, TableCell, TableRow
from odf.text import P

from pauli_algebra import BinaryMatrix


class ODSWriter:
    """
    Writes experiment tables to an ODS workbook, one sheet per table.
    """

    def __init__(self, output_path: str):
        """
        Initialize ODS writer.

        Args:
            output_path: Path to output ODS file
        """
        self.output_path = output_path
        self.logger = logging.getLogger(__name__)
        self.doc = OpenDocumentSpreadsheet()
        self._setup_styles()

    def _setup_styles(self) -> None:
        bold_style = Style(name="BoldHeader", family="table-cell")
        bold_style.addElement(TextProperties(fontweight="bold"))
        self.doc.styles.addElement(bold_style)
        self.bold_style = bold_style

    def write_results(self, tables: Dict[str, List[Dict[str, Any]]], metrics: Dict[str, Any]) -> None:
        """
        Write a Summary sheet of metrics followed by every result table.

        Args:
            tables: Table name -> rows
            metrics: Flat metric name -> value
        """
        self.logger.info(f"Writing {len(tables)} tables to ODS")
        summary = Table(name="Summary")
        self._add_row(summary, ["Metric", "Value"], is_header=True)
        for name in sorted(metrics):
            self._add_row(summary, [name, metrics[name]])
        self.doc.spreadsheet.addElement(summary)

        for name, rows in tables.items():
            self._create_table_sheet(self._sanitize_sheet_name(name), rows)

        self.doc.save(self.output_path)
        self.logger.info(f"ODS file saved to: {self.output_path}")

    def write_binary_matrix(self, matrix: BinaryMatrix, sheet_name: str = "A") -> None:
        """
        Save an A-matrix as a sheet of numeric 0/1 cells.
        """
        sheet = Table(name=self._sanitize_sheet_name(sheet_name))
        for row in matrix.entries:
            self._add_row(sheet, [int(v) for v in row])
        self.doc.spreadsheet.addElement(sheet)
        self.doc.save(self.output_path)
        self.logger.info(f"A-matrix ({matrix.rows}x{matrix.cols}) saved to: {self.output_path}")

    def _create_table_sheet(self, sheet_name: str, rows: Sequence[Dict[str, Any]]) -> None:
        sheet = Table(name=sheet_name)
        headers: List[str] = []
        for row in rows:
            headers.extend(k for k in row if k not in headers)
        self._add_row(sheet, headers, is_header=True)
        for row in rows:
            self._add_row(sheet, [row.get(h, '') for h in headers])
        self.doc.spreadsheet.addElement(sheet)

    def _add_row(self, sheet: Table, data: Sequence[Any], is_header: bool = False) -> None:
        row = TableRow()
        for value in data:
            if isinstance(value, bool) or value is None or isinstance(value, (list, tuple, dict)):
                cell = TableCell(valuetype="string")
                shown = '' if value is None else str(value)
            elif isinstance(value, (int, float, np.integer, np.floating)):
                value = value.item() if isinstance(value, (np.integer, np.floating)) else value
                cell = TableCell(valuetype="float", value=value)
                shown = repr(value)
            else:
                cell = TableCell(valuetype="string")
                shown = str(value)
            if is_header:
                cell.setAttribute('stylename', self.bold_style)
            cell.addElement(P(text=shown))
            row.addElement(cell)
        sheet.addElement(row)

    def _sanitize_sheet_name(self, name: str) -> str:
        """
        Replace characters ODS forbids in sheet names and cut to 31 characters.
        """
        sanitized = name
        for char in ['/', '\\', '?', '*', '[', ']', ':']:
            sanitized = sanitized.replace(char, '_')
        return sanitized[:31]
