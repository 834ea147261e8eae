"""실험 설정 파싱

우선순위: 설정 기본값(settings.SIMULATION) < 설정 파일 < 명령행 플래그
"""

import copy
import json
import logging
import tomllib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
from django.conf import settings

from apps.common.exceptions import ConfigurationError
from apps.experiments.serializers.config_serializer import ExperimentConfigSerializer, flatten_errors, format_errors

logger = logging.getLogger(__name__)

# 명령행 옵션 이름 -> 설정 경로
FLAG_PATHS = {
    "schemes": "schemes",
    "constellation": "constellation",
    "snr_start": "snr.start_db",
    "snr_stop": "snr.stop_db",
    "snr_step": "snr.step_db",
    "target_errors": "trials.target_bit_errors",
    "max_trials": "trials.max_trials",
    "batch_size": "trials.batch_size",
    "mi_trials": "trials.mi_trials",
    "gamma_trials": "trials.gamma_trials",
    "verify_trials": "trials.verify_trials",
    "seed": "seed",
    "workers": "workers",
    "noise_variance": "noise_variance",
    "output_dir": "output.dir",
    "format": "output.format",
}


@dataclass(frozen=True)
class SnrGrid:
    start_db: float
    stop_db: float
    step_db: float

    def points(self) -> Tuple[float, ...]:
        """양 끝을 포함하는 SNR 점 (dB)"""
        count = int(np.floor((self.stop_db - self.start_db) / self.step_db + 1e-9)) + 1
        return tuple(round(self.start_db + k * self.step_db, 9) for k in range(count))


@dataclass(frozen=True)
class TrialPolicy:
    max_trials: int
    target_bit_errors: int
    batch_size: int
    mi_trials: int
    gamma_trials: int
    verify_trials: int


@dataclass(frozen=True)
class DiversityPolicy:
    ber_window_db: Tuple[float, float]
    eps_start: float
    eps_stop: float
    eps_points: int
    min_count: int


@dataclass(frozen=True)
class ExperimentConfig:
    """검증을 마친 실험 설정"""

    command: str
    schemes: Tuple[str, ...]
    constellation: str
    snr: SnrGrid
    trials: TrialPolicy
    diversity: DiversityPolicy
    seed: int
    workers: int
    noise_variance: float
    output_dir: Path
    output_format: str

    def to_dict(self) -> Dict[str, Any]:
        """매니페스트에 그대로 싣는 설정 사본"""
        data = asdict(self)
        data["schemes"] = list(self.schemes)
        data["diversity"]["ber_window_db"] = list(self.diversity.ber_window_db)
        data["output_dir"] = str(self.output_dir)
        data["snr"]["points"] = list(self.snr.points())
        return data


def default_config(command: str) -> Dict[str, Any]:
    """settings.SIMULATION 으로 채운 기본 설정 dict"""
    sim = settings.SIMULATION
    return {
        "command": command,
        "schemes": list(sim["SCHEMES"]),
        "constellation": sim["CONSTELLATION"],
        "snr": {
            "start_db": sim["SNR_START_DB"],
            "stop_db": sim["SNR_STOP_DB"],
            "step_db": sim["SNR_STEP_DB"],
        },
        "trials": {
            "max_trials": sim["MAX_TRIALS"],
            "target_bit_errors": sim["TARGET_BIT_ERRORS"],
            "batch_size": sim["BATCH_SIZE"],
            "mi_trials": sim["MI_TRIALS"],
            "gamma_trials": sim["GAMMA_TRIALS"],
            "verify_trials": sim["VERIFY_TRIALS"],
        },
        "diversity": {
            "ber_window_db": list(sim["BER_WINDOW_DB"]),
            "eps_start": sim["OUTAGE_EPS_START"],
            "eps_stop": sim["OUTAGE_EPS_STOP"],
            "eps_points": sim["OUTAGE_EPS_POINTS"],
            "min_count": sim["MIN_OUTAGE_COUNT"],
        },
        "seed": sim["SEED"],
        "workers": sim["WORKERS"],
        "noise_variance": sim["NOISE_VARIANCE"],
        "output": {"dir": str(sim["OUTPUT_DIR"]), "format": sim["OUTPUT_FORMAT"]},
    }


def load_config_file(path) -> Dict[str, Any]:
    """JSON(.json) 또는 TOML(.toml) 설정 파일 읽기

    Raises:
        ConfigurationError: 파일이 없거나, 확장자가 다르거나, 구문 오류가 있는 경우
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".json", ".toml"):
        raise ConfigurationError(
            f"config: 설정 파일은 .json 또는 .toml 이어야 합니다: {path.name}",
            errors={"config": [f"unsupported config file type '{suffix}'"]},
        )
    try:
        if suffix == ".toml":
            with open(path, "rb") as f:
                data = tomllib.load(f)
        else:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"config: 설정 파일을 찾을 수 없습니다: {path}", errors={"config": ["file not found"]})
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"config: 설정 파일을 해석할 수 없습니다: {e}", errors={"config": [str(e)]})

    if not isinstance(data, dict):
        raise ConfigurationError("config: 설정 파일의 최상위는 객체여야 합니다.", errors={"config": ["not a mapping"]})
    return data


def deep_merge(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """중첩 dict 병합 (override 가 이김)"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def flag_overrides(options: Mapping[str, Any]) -> Dict[str, Any]:
    """값이 주어진 명령행 옵션만 중첩 dict 로 변환"""
    nested: Dict[str, Any] = {}
    for option, path in FLAG_PATHS.items():
        value = options.get(option)
        if value is None:
            continue
        node = nested
        *parents, leaf = path.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return nested


class ConfigService:
    """실험 설정 생성 서비스"""

    @staticmethod
    def parse_config(
        command: Optional[str] = None,
        config_file=None,
        options: Optional[Mapping[str, Any]] = None,
    ) -> ExperimentConfig:
        """기본값, 설정 파일, 명령행 플래그를 병합해 검증된 설정 생성

        Args:
            command: 실행할 명령 (설정 파일의 command 보다 우선)
            config_file: .json / .toml 설정 파일 경로
            options: 명령행 옵션 (None 인 값은 무시)

        Raises:
            ConfigurationError: 파싱/검증 실패. 메시지는 "snr.step_db: ..." 처럼 필드 경로를 포함
        """
        file_data = load_config_file(config_file) if config_file else {}
        command = command or file_data.get("command") or "ber"
        merged = deep_merge(default_config(command), file_data)
        merged = deep_merge(merged, flag_overrides(options or {}))
        merged["command"] = command

        serializer = ExperimentConfigSerializer(data=merged)
        if not serializer.is_valid():
            errors = flatten_errors(serializer.errors)
            logger.warning(f"Config rejected: errors={errors}")
            raise ConfigurationError(format_errors(errors), errors=errors)

        data = serializer.validated_data
        config = ExperimentConfig(
            command=data["command"],
            schemes=tuple(data["schemes"]),
            constellation=data["constellation"],
            snr=SnrGrid(**data["snr"]),
            trials=TrialPolicy(**data["trials"]),
            diversity=DiversityPolicy(
                ber_window_db=tuple(data["diversity"]["ber_window_db"]),
                eps_start=data["diversity"]["eps_start"],
                eps_stop=data["diversity"]["eps_stop"],
                eps_points=data["diversity"]["eps_points"],
                min_count=data["diversity"]["min_count"],
            ),
            seed=data["seed"],
            workers=data["workers"],
            noise_variance=data["noise_variance"],
            output_dir=Path(data["output"]["dir"]),
            output_format=data["output"]["format"],
        )
        logger.info(
            f"Config parsed: command={config.command} schemes={list(config.schemes)} "
            f"constellation={config.constellation} seed={config.seed} workers={config.workers}"
        )
        return config
