"""File utilities for input validation and output bookkeeping."""

import json
import os
from pathlib import Path
from typing import Dict, List, Optional

from src.utils.errors import SchemaError


def get_file_info(file_path: str, expected_extensions: List[str] = None) -> Optional[Dict]:
    """
    Get information about a single file.

    Args:
        file_path: Path to the file
        expected_extensions: List of expected file extensions (e.g., ['.csv'])

    Returns:
        Dictionary with file information or None if invalid
    """
    file_path_obj = Path(file_path)

    if not file_path_obj.exists():
        print(f"File does not exist: {file_path}")
        return None

    if not file_path_obj.is_file():
        print(f"Path is not a file: {file_path}")
        return None

    if expected_extensions:
        if file_path_obj.suffix.lower() not in [ext.lower() for ext in expected_extensions]:
            print(f"File extension not in expected types {expected_extensions}: {file_path}")
            return None

    stat = file_path_obj.stat()
    return {
        'path': str(file_path_obj),
        'name': file_path_obj.name,
        'extension': file_path_obj.suffix,
        'size_bytes': stat.st_size,
        'size_mb': round(stat.st_size / (1024 * 1024), 2),
        'modified': stat.st_mtime,
        'is_readable': os.access(file_path, os.R_OK)
    }


def validate_input_file(file_path: Optional[str], expected_extensions: List[str] = None) -> Dict:
    """
    Check that an input file exists and is readable before any output is written.

    Args:
        file_path: Path to the input file
        expected_extensions: Accepted extensions

    Returns:
        File information dictionary
    """
    if not file_path:
        raise SchemaError("No input file given (--input)")
    file_info = get_file_info(file_path, expected_extensions)
    if file_info is None:
        raise SchemaError("Input file is missing or has the wrong type", path=str(file_path))
    if not file_info['is_readable']:
        raise SchemaError("Input file is not readable", path=str(file_path))
    return file_info


def write_json(data: Dict, file_path: Path) -> Path:
    """Write a JSON document, creating parent directories."""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2)
    return file_path


def print_outputs_summary(files: List[Path]):
    """
    Print the files a command wrote.

    Args:
        files: Written file paths
    """
    if not files:
        print("No output files written.")
        return

    print(f"\nWrote {len(files)} files:")
    print("-" * 80)
    print(f"{'#':<3} {'Name':<50} {'Size (KB)':<10}")
    print("-" * 80)
    for i, path in enumerate(files, 1):
        size_kb = round(Path(path).stat().st_size / 1024, 1) if Path(path).exists() else 0.0
        print(f"{i:<3} {Path(path).name:<50} {size_kb:<10}")
    print("-" * 80)
    print()
