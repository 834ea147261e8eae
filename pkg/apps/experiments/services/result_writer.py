"""결과 파일 저장

* CSV: 방식 x SNR 점 x 지표마다 한 행. 같은 설정이면 바이트 단위로 같은 내용
* JSON 매니페스트: 설정 사본, 합 전송률 정의, 전력 규약, 재샘플링 횟수, 실행 시간, 패키지 버전

모든 파일은 UTF-8, LF 줄바꿈으로 씁니다.
"""

import csv
import json
import logging
import math
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, List

import numpy as np

from apps.experiments.serializers.result_serializer import (
    CSV_COLUMNS,
    ResultRowSerializer,
    VerificationReportSerializer,
)
from apps.experiments.services.run_service import RunRecord
from apps.metrics.services.mi_service import MI_FORMULA

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

PACKAGES = ("numpy", "scipy", "django", "djangorestframework")

POWER_CONVENTIONS = {
    "noise": "gamma is computed at symbol power 1 with unit noise variance; SNR = P * gamma, P = 10^(snr_db/10)",
    "x_alamouti": "E tr(X X^H) = 3P per transmitter (beamformers scaled by sqrt(3/4))",
    "jash": "each transmitter beamformer scaled to ||v||_F^2 = 3/2",
    "jash_modified": "two JaSh alignment blocks (T = 6) combined by maximum ratio",
    "imac": "each mobile keeps the sqrt(3/4) scaling (block power 3P/2)",
    "ibc_alamouti": "||P||_F^2 = 1/2 per precoder; base-station block including padding carries 3P",
    "ibc_downlink_ia": "equal per-stream power 3P/4",
    "ber": "averaged over every desired stream at every receiver",
}


def _json_default(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, set)):
        return list(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {value.__class__.__name__} is not JSON serializable")


def _finite_or_none(value):
    """JSON 에는 NaN 이 없으므로 null 로 바꿈"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite_or_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(v) for v in value]
    return value


def _csv_cell(value) -> str:
    if value is None:
        return ""
    return str(value)


def package_versions() -> dict:
    versions = {"python": platform.python_version()}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def build_manifest(record: RunRecord) -> dict:
    """실행 매니페스트 dict"""
    config = record.config
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": record.run_id,
        "command": config.command,
        "config": config.to_dict(),
        "csv_columns": list(CSV_COLUMNS),
        "mi_formula": MI_FORMULA,
        "power_conventions": POWER_CONVENTIONS,
        "resample_counters": dict(record.resample_counters),
        "skipped": list(record.skipped),
        "verification": VerificationReportSerializer(record.reports, many=True).data,
        "failures": record.failures,
        "row_count": len(record.rows),
        "wall_clock_seconds": record.wall_clock_seconds,
        "package_versions": package_versions(),
    }


def _dump_json(data: dict) -> str:
    data = json.loads(json.dumps(data, default=_json_default))
    return json.dumps(_finite_or_none(data), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


class ResultWriter:
    """결과 파일 저장 서비스"""

    @staticmethod
    def file_stem(record: RunRecord) -> str:
        return f"{record.config.command}_seed{record.config.seed}"

    @staticmethod
    def write_csv(record: RunRecord, path: Path) -> Path:
        rows = ResultRowSerializer(record.rows, many=True).data
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_csv_cell(row[column]) for column in CSV_COLUMNS])
        return path

    @staticmethod
    def write_json(data: dict, path: Path) -> Path:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(_dump_json(data))
        return path

    @staticmethod
    def write(record: RunRecord, output_dir=None, output_format=None) -> List[Path]:
        """결과 파일 저장

        csv 형식은 CSV 와 매니페스트를, json 형식은 행을 포함한 매니페스트 하나를 씁니다.

        Raises:
            OSError: 출력 디렉토리를 만들 수 없거나 쓸 수 없는 경우
        """
        output_dir = Path(output_dir or record.config.output_dir)
        output_format = output_format or record.config.output_format
        output_dir.mkdir(parents=True, exist_ok=True)
        stem = ResultWriter.file_stem(record)
        manifest = build_manifest(record)

        if output_format == "csv":
            paths = [ResultWriter.write_csv(record, output_dir / f"{stem}.csv")]
            manifest["results_file"] = paths[0].name
        else:
            manifest["rows"] = ResultRowSerializer(record.rows, many=True).data
            paths = []
        paths.append(ResultWriter.write_json(manifest, output_dir / f"{stem}.manifest.json"))

        logger.info(f"Results written: run_id={record.run_id} files={[p.name for p in paths]} dir={output_dir}")
        return paths
