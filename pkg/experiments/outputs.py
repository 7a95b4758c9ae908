"""
    Result files. Every file is written to a temporary sibling first and moved into
    place with os.replace, so a reader sees either the old or the new file.
"""
import json
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from physics.errors import OutputError

SUMMARY_NAME = 'summary.json'


def _plain(value):
    """ Converts numpy scalars/arrays and tuples into JSON-native values. """
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _atomic_write(path: Path, text: str):
    handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(handle, 'w', newline='') as temp_file:
            temp_file.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.remove(temp_name)
        raise


def table_to_csv(table: pd.DataFrame, metadata: Dict = None, precision: int = 9) -> str:
    header = ''.join(f'# {key}: {json.dumps(_plain(value))}\n' for key, value in (metadata or {}).items())
    return header + table.to_csv(index=False, float_format=f'%.{precision}g', lineterminator='\n')


def table_to_json(table: pd.DataFrame, metadata: Dict = None) -> str:
    document = {'metadata': _plain(metadata or {}),
                'columns': list(table.columns),
                'data': {column: _plain(table[column].to_numpy()) for column in table.columns}}
    return json.dumps(document, indent=1) + '\n'


def write_outputs(report, directory: Union[str, Path], output_format: str = 'csv', precision: int = 9) -> List[Path]:
    """
    Writes one file per report table and the JSON summary; returns the manifest of
    written paths, summary last. The summary lists the table files by name.
    """
    directory = Path(directory)
    if output_format not in ('csv', 'json'):
        raise ValueError(f'unknown output format {output_format!r}')
    manifest = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for name, table in report.tables.items():
            metadata = report.table_metadata.get(name, {})
            path = directory / f'{name}.{output_format}'
            if output_format == 'csv':
                _atomic_write(path, table_to_csv(table, metadata, precision=precision))
            else:
                _atomic_write(path, table_to_json(table, metadata))
            manifest.append(path)
        summary = report.summary(files=[p.name for p in manifest])
        summary_path = directory / SUMMARY_NAME
        _atomic_write(summary_path, json.dumps(_plain(summary), indent=1, sort_keys=True) + '\n')
        manifest.append(summary_path)
    except OSError as e:
        raise OutputError(f'could not write results to {directory}: {e}') from e
    return manifest
