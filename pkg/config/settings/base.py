"""
Django settings for config project.

The simulator uses Django for its settings layer, app registry, management
commands and test runner only: there is no database, middleware or URLconf.
"""

import os
from pathlib import Path

from decouple import config
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

env_path = BASE_DIR / ".envs" / f".{os.getenv('DJANGO_ENV', 'dev')}.env"
load_dotenv(dotenv_path=env_path)

SECRET_KEY = config("DJANGO_SECRET_KEY", default="ia-sim-local-only")

DEBUG = False

ALLOWED_HOSTS = []

# Application definition

PACKAGE = [
    "rest_framework",
]

LOCAL_APPS = [
    "apps.common",
    "apps.linalg",
    "apps.fading",
    "apps.xchannel",
    "apps.jash",
    "apps.cellular",
    "apps.metrics",
    "apps.experiments",
]

INSTALLED_APPS = PACKAGE + LOCAL_APPS

MIDDLEWARE = []

DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "ko-kr"

TIME_ZONE = "Asia/Seoul"

USE_I18N = True

USE_TZ = True


# REST Framework 설정 (설정 검증 serializer 만 사용)
REST_FRAMEWORK = {
    "UNAUTHENTICATED_USER": None,
}


# 시뮬레이션 기본값
SIMULATION = {
    "SEED": 0,
    "SCHEMES": ["x_alamouti"],
    "CONSTELLATION": "BPSK",
    "SNR_START_DB": 20.0,
    "SNR_STOP_DB": 40.0,
    "SNR_STEP_DB": 2.0,
    "TARGET_BIT_ERRORS": 200,
    "MAX_TRIALS": 10_000_000,
    "BATCH_SIZE": 20_000,
    "MI_TRIALS": 20_000,
    "GAMMA_TRIALS": 1_000_000,
    "VERIFY_TRIALS": 10_000,
    "BER_WINDOW_DB": (20.0, 32.0),
    "OUTAGE_EPS_START": 1e-3,
    "OUTAGE_EPS_STOP": 1e-1,
    "OUTAGE_EPS_POINTS": 9,
    "MIN_OUTAGE_COUNT": 100,
    "NOISE_VARIANCE": 1.0,
    "WORKERS": 1,
    "OUTPUT_DIR": config("IA_SIM_OUTPUT_DIR", default=str(BASE_DIR / "results")),
    "OUTPUT_FORMAT": "csv",
}
