"""
Module for generating run reports with summary tables and figures.
"""

import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np


class ReportGenerator:
    """
    Generates a markdown report for one experiment run, with figures for the tables that have them.
    """

    def __init__(self, output_dir: str = ".", base_filename: str = "subpen"):
        """
        Initialize report generator.

        Args:
            output_dir: Directory for output files
            base_filename: Base filename for the report
        """
        self.output_dir = Path(output_dir)
        self.base_filename = base_filename
        self.logger = logging.getLogger(__name__)
        self.figures_dir = self.output_dir / "figures"
        self.figures_dir.mkdir(parents=True, exist_ok=True)

    def generate_report(self, result: Dict[str, Any]) -> str:
        """
        Write the markdown report.

        Args:
            result: Serialized experiment result (kind, spec, metrics, tables, reports, expectations)

        Returns:
            Path to generated report file
        """
        self.logger.info("Generating run report")
        lines = []
        lines.extend(self._generate_header(result))
        lines.extend(self._generate_metrics(result.get('metrics', {})))
        lines.extend(self._generate_conditions(result.get('reports', [])))
        lines.extend(self._generate_expectations(result.get('expectations', [])))
        lines.extend(self._generate_figures(result.get('tables', {})))

        report_path = self.output_dir / f"{self.base_filename}_report.md"
        with open(report_path, 'w', encoding='utf-8') as f:
            f.write("\n".join(lines))
        self.logger.info(f"Report generated: {report_path}")
        return str(report_path)

    def _generate_header(self, result: Dict[str, Any]) -> List[str]:
        spec = result.get('spec', {})
        lines = [
            f"# {result.get('kind', 'experiment')} run",
            "",
            f"**Generated:** {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}",
            "",
        ]
        if spec.get('description'):
            lines.extend([spec['description'], ""])
        verdict = 'PASSED' if result.get('passed') else 'FAILED'
        lines.extend([
            f"- **Outcome:** {verdict}",
            f"- **Seed:** {spec.get('seed', 0)}",
            f"- **Wall time:** {result.get('wall_time', 0.0):.2f} s",
            "",
            "---",
            "",
        ])
        return lines

    def _generate_metrics(self, metrics: Dict[str, Any]) -> List[str]:
        if not metrics:
            return []
        lines = ["## Metrics", "", "| Metric | Value |", "|---|---|"]
        for name in sorted(metrics):
            lines.append(f"| {name} | {_fmt(metrics[name])} |")
        lines.extend(["", ""])
        return lines

    def _generate_conditions(self, reports: List[Dict[str, Any]]) -> List[str]:
        if not reports:
            return []
        lines = ["## Conditions", "", "| Condition | Satisfied | Residuals | Constant |", "|---|---|---|---|"]
        for report in reports:
            residuals = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(report.get('residuals', {}).items()))
            lines.append(f"| {report['condition']} | {'yes' if report['satisfied'] else 'no'} | "
                         f"{residuals} | {_fmt(report.get('constant'))} |")
        lines.extend(["", ""])
        return lines

    def _generate_expectations(self, expectations: List[Dict[str, Any]]) -> List[str]:
        if not expectations:
            return []
        lines = ["## Expectations", "", "| Metric | Value | Bound | Passed | Provenance |", "|---|---|---|---|---|"]
        for item in expectations:
            if 'target' in item:
                bound = f"{item['target']} +- {item.get('tolerance', 0)}"
            else:
                bound = " ".join(f"{k} {item[k]}" for k in ('min', 'max') if k in item)
            lines.append(f"| {item['metric']} | {_fmt(item.get('value'))} | {bound} | "
                         f"{'yes' if item.get('passed') else 'no'} | {item['provenance']} |")
        lines.extend(["", ""])
        return lines

    def _generate_figures(self, tables: Dict[str, List[Dict[str, Any]]]) -> List[str]:
        figures = [
            ('Gap scaling of the chain penalty', self._create_gap_chart(tables.get('gap_scan'))),
            ('Deviation and bounds versus penalty strength', self._create_sweep_chart(tables.get('sweep'))),
            ('Logical transfer fidelity versus penalty strength', self._create_fidelity_chart(tables.get('swap'))),
        ]
        lines = []
        for title, path in figures:
            if path:
                lines.extend([f"### {title}", "", f"![{title}]({path})", ""])
        if lines:
            lines = ["## Figures", ""] + lines
        return lines

    def _save(self, name: str) -> str:
        fig_path = self.figures_dir / f"{self.base_filename}_{name}.png"
        plt.tight_layout()
        plt.savefig(fig_path, dpi=150, bbox_inches='tight')
        plt.close()
        return f"figures/{fig_path.name}"

    def _create_gap_chart(self, rows: Optional[List[Dict[str, Any]]]) -> Optional[str]:
        """
        gap * (N + 1) against N; a flat line is the 1/(N+1) law.
        """
        if not rows:
            return None
        try:
            n_values = [row['N'] for row in rows]
            fig, ax = plt.subplots(figsize=(8, 5))
            ax.plot(n_values, [row['gap_times_n_plus_1'] for row in rows], 'o-', color='steelblue')
            ax.set_xlabel('N', fontsize=12)
            ax.set_ylabel('gap x (N+1)', fontsize=12)
            ax.grid(alpha=0.3)
            return self._save('gap_scan')
        except Exception as e:
            self.logger.warning(f"Failed to create gap chart: {e}")
            plt.close('all')
            return None

    def _create_sweep_chart(self, rows: Optional[List[Dict[str, Any]]]) -> Optional[str]:
        if not rows:
            return None
        points = [row for row in rows if row['E_p'] > 0]
        if not points:
            return None
        try:
            e_p = np.array([row['E_p'] for row in points])
            fig, ax = plt.subplots(figsize=(8, 5))
            for column, style in (('deviation', 'o-'), ('bound5a', 's--'), ('bound5b', '^--'), ('supK', 'x:')):
                values = np.array([row.get(column) or np.nan for row in points], dtype=float)
                if np.any(np.isfinite(values) & (values > 0)):
                    ax.loglog(e_p, values, style, label=column)
            ax.set_xlabel('E_p', fontsize=12)
            ax.legend()
            ax.grid(alpha=0.3, which='both')
            return self._save('sweep')
        except Exception as e:
            self.logger.warning(f"Failed to create sweep chart: {e}")
            plt.close('all')
            return None

    def _create_fidelity_chart(self, rows: Optional[List[Dict[str, Any]]]) -> Optional[str]:
        if not rows:
            return None
        try:
            fig, ax = plt.subplots(figsize=(8, 5))
            ax.plot([row['E_p'] for row in rows], [row['fidelity'] for row in rows], 'o-', color='darkgreen')
            ax.set_xscale('symlog', linthresh=max(1e-3, min((r['E_p'] for r in rows if r['E_p'] > 0), default=1.0)))
            ax.set_xlabel('E_p', fontsize=12)
            ax.set_ylabel('fidelity', fontsize=12)
            ax.grid(alpha=0.3)
            return self._save('swap')
        except Exception as e:
            self.logger.warning(f"Failed to create fidelity chart: {e}")
            plt.close('all')
            return None


def _fmt(value: Any) -> str:
    if value is None:
        return '-'
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    if isinstance(value, (int, np.integer)):
        return str(value)
    if isinstance(value, (float, np.floating)):
        if math.isinf(value) or math.isnan(value):
            return str(value)
        return f"{value:.6g}"
    return str(value)
