import io
import math
import logging
from typing import Dict, Optional

import numpy as np
import pandas as pd

from qspectral.consts import (BOUND_COLUMNS, LEDGER_COLUMNS, RESULT_COLUMNS, ROUNDOFF_FLOOR, SCHEMA_VERSION,
                              SWEEP_COLUMNS)


class RunReport:
    """A titled table of rows with a fixed column schema."""
    columns = None
    int_columns = ()
    kind = 'report'

    def __init__(self, title: str, table: pd.DataFrame):
        if self.columns is not None:
            missing = [c for c in self.columns if c not in table.columns]
            assert not missing, f'{self.kind} table lacks columns {missing}'
            table = table[self.columns]
        table = table.astype({c: 'Int64' for c in self.int_columns})
        self.title = title
        self.table = table.reset_index(drop=True)
        self.footer = []

    @classmethod
    def from_rows(cls, title, rows):
        return cls(title, pd.DataFrame(rows, columns=cls.columns))

    def __str__(self):
        return self.title

    def __repr__(self):
        return self.title

    def __len__(self):
        return len(self.table)

    def header(self):
        return f'# qspectral {self.kind} schema_version={SCHEMA_VERSION}'

    def to_csv(self, path=None) -> str:
        """
        UTF-8 CSV with LF line endings and a leading schema comment line. Returns the text and
        writes it to path when one is given.
        """
        buf = io.StringIO()
        buf.write(self.header() + '\n')
        self.table.to_csv(buf, index=False, lineterminator='\n')
        for line in self.footer:
            buf.write(f'# {line}\n')
        text = buf.getvalue()
        if path is not None:
            with open(path, 'w', encoding='utf-8', newline='\n') as f:
                f.write(text)
            logging.info(f'wrote {len(self.table)} rows to {path}')
        return text


class ResultTable(RunReport):
    """One row per (run, seed) of an estimation run."""
    columns = RESULT_COLUMNS
    int_columns = ('seed', 'd', 'n', 'N_or_m', 'q', 'sim_calls')
    kind = 'results'

    def success_count(self):
        return int(self.table['success'].sum())

    def failed_runs(self):
        """Rows whose run did not complete (no error value)."""
        return int(self.table['sim_calls'].isna().sum())


class BoundReport(RunReport):
    """Inequality checks: lhs, rhs and whether they hold; only asserted rows can fail a run."""
    columns = BOUND_COLUMNS
    kind = 'bounds'

    def asserted_failures(self) -> pd.DataFrame:
        t = self.table
        return t[t['asserted'] & ~t['holds']]

    def summary(self) -> Dict[str, int]:
        t = self.table
        return {'rows': len(t), 'holding': int(t['holds'].sum()),
                'asserted_failures': len(self.asserted_failures()),
                'flagged': int((~t['asserted'] & ~t['holds']).sum())}


class SweepReport(RunReport):
    columns = SWEEP_COLUMNS
    kind = 'sweep'

    def decay_slope(self, function=None) -> float:
        """Least-squares slope of log(measured) against N over rows above the round-off floor."""
        t = self.table
        if function is not None:
            t = t[t['function'] == function]
        t = t[t['above_roundoff']]
        if len(t) < 2:
            return math.nan
        slope, _ = np.polyfit(t['N'].astype(float), np.log(t['measured'].astype(float)), 1)
        return float(slope)


class LedgerReport(RunReport):
    """Counted simulated calls next to theoretical costs, with fitted log-log slopes."""
    columns = LEDGER_COLUMNS
    int_columns = ('d', 's', 'q', 'sim_calls')
    kind = 'ledger'

    def __init__(self, title: str, table: pd.DataFrame):
        super().__init__(title, table)
        self.slopes = {}

    def add_slope(self, name, xs, ys):
        slope = loglog_slope(xs, ys)
        self.slopes[name] = slope
        self.footer.append(f'slope {name} {slope:.6g}')
        logging.info(f'log-log slope of {name}: {slope:.4g}')
        return slope

    def rows_for(self, config_prefix) -> pd.DataFrame:
        return self.table[self.table['config'].str.startswith(config_prefix)]


def loglog_slope(xs, ys) -> float:
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    if len(xs) < 2:
        return math.nan
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def above_roundoff(measured) -> bool:
    return bool(measured > ROUNDOFF_FLOOR)


def result_row(run_id, seed, function, method, d, epsilon, rho, n=None, N_or_m=None, a=None, q=None,
               error_linf=math.nan, error_maxnorm=math.nan, success=False, sim_calls=None,
               theory_cost=math.nan, wall_ms=math.nan) -> dict:
    """Row of a ResultTable; missing values are NaN (integers) or empty."""
    return {'run_id': run_id, 'seed': seed, 'function': function, 'method': method, 'd': d,
            'n': n, 'N_or_m': N_or_m, 'a': a, 'q': q, 'epsilon': epsilon, 'rho': rho,
            'error_linf': error_linf, 'error_maxnorm': error_maxnorm, 'success': bool(success),
            'sim_calls': sim_calls, 'theory_cost': theory_cost, 'wall_ms': wall_ms}


def read_csv(path_or_buf, kind: Optional[type] = None) -> pd.DataFrame:
    """Reads a table written by RunReport.to_csv, skipping the comment lines."""
    table = pd.read_csv(path_or_buf, comment='#')
    if kind is not None and kind.columns is not None:
        assert list(table.columns) == list(kind.columns), f'unexpected columns {list(table.columns)}'
    return table
