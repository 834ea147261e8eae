import csv
import json
import logging
import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import pytest
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from apps.common.exceptions import ConfigurationError
from apps.common.logging import RunContextFilter
from apps.experiments.serializers.config_serializer import flatten_errors
from apps.experiments.serializers.result_serializer import CSV_COLUMNS
from apps.experiments.services.config_service import ConfigService, SnrGrid, flag_overrides
from apps.experiments.services.result_writer import SCHEMA_VERSION, ResultWriter, build_manifest
from apps.experiments.services.run_service import ResultRow, RunRecord, RunService, render_table
from apps.metrics.services.verification_service import VerificationReport

SMALL = dict(
    schemes=["x_alamouti"],
    constellation="BPSK",
    snr_start=10.0,
    snr_stop=12.0,
    snr_step=2.0,
    target_errors=20,
    max_trials=400,
    batch_size=200,
)


class _RecordCollector(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.DEBUG)
        self.records = []

    def emit(self, record):
        self.records.append(record)


def _write(directory, name, text):
    path = Path(directory) / name
    path.write_text(text, encoding="utf-8")
    return path


def _reports(passed=True):
    return [
        VerificationReport("x_interference_span", True, 1e-15, "max residual < 1e-10", {"trials": 10}),
        VerificationReport("phi_inverse_determinant", passed, 4.3, "mean > 1", {"halfwidth": 0.01}),
    ]


class ConfigServiceTestCase(SimpleTestCase):
    """설정 파싱 테스트"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_minimal_file_fills_defaults(self):
        """최소 설정 파일이면 기본값 채움 (seed 0, 20~40 dB 간격 2, 목표 오류 200)"""
        text = json.dumps({"command": "ber", "schemes": ["x_alamouti"], "constellation": "BPSK"})
        path = _write(self.tmp.name, "run.json", text)
        config = ConfigService.parse_config(config_file=path)
        self.assertEqual(config.command, "ber")
        self.assertEqual(config.seed, 0)
        self.assertEqual(config.snr.points(), tuple(float(s) for s in range(20, 41, 2)))
        self.assertEqual(config.trials.target_bit_errors, 200)
        self.assertEqual(config.output_format, "csv")

    def test_invalid_pairing_rejected(self):
        """IBC 방식 + QAM16 은 PSK 필요 메시지로 거부"""
        text = 'command = "ber"\nschemes = ["ibc_alamouti"]\nconstellation = "QAM16"\n'
        path = _write(self.tmp.name, "run.toml", text)
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config(config_file=path)
        self.assertIn("PSK", str(ctx.exception))
        self.assertIn("constellation", ctx.exception.errors)

    def test_flag_overrides_file(self):
        """--seed 7 이 파일의 seed 를 덮어씀"""
        path = _write(self.tmp.name, "run.toml", "seed = 3\n[snr]\nstart_db = 4\n")
        config = ConfigService.parse_config("ber", path, {"seed": 7})
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.snr.start_db, 4.0)

    def test_command_argument_wins(self):
        """명령행의 command 가 파일보다 우선"""
        path = _write(self.tmp.name, "run.json", '{"command": "mi"}')
        self.assertEqual(ConfigService.parse_config("verify", path).command, "verify")
        self.assertEqual(ConfigService.parse_config(config_file=path).command, "mi")

    def test_field_path_in_message(self):
        """검증 오류 메시지는 필드 경로 포함"""
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config("ber", options={"snr_step": 0.0})
        self.assertTrue(str(ctx.exception).startswith("snr.step_db: "))
        self.assertIn("snr.step_db", ctx.exception.errors)

    def test_empty_grid_rejected(self):
        """종료 SNR 이 시작보다 작으면 거부"""
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config("ber", options={"snr_start": 30.0, "snr_stop": 20.0})
        self.assertIn("snr.stop_db", ctx.exception.errors)

    def test_trial_policy_positive(self):
        """시행 수는 양수"""
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config("ber", options={"max_trials": 0})
        self.assertIn("trials.max_trials", ctx.exception.errors)

    def test_unknown_key_rejected(self):
        """오타 난 키는 경로와 함께 거부"""
        path = _write(self.tmp.name, "run.json", '{"trials": {"max_trial": 5}}')
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config("ber", path)
        self.assertIn("trials.max_trial", ctx.exception.errors)

    def test_unknown_scheme_index(self):
        """목록 안의 잘못된 방식은 인덱스 경로"""
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config("ber", options={"schemes": ["x_alamouti", "x_linear"]})
        self.assertIn("schemes.1", ctx.exception.errors)

    def test_unknown_constellation(self):
        """지원하지 않는 성상도"""
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config("ber", options={"constellation": "QAM64"})
        self.assertIn("constellation", ctx.exception.errors)

    def test_constellation_canonical_name(self):
        """성상도 이름은 대소문자 무관, 표준 이름으로 저장"""
        config = ConfigService.parse_config("ber", options={"schemes": ["ibc_alamouti"], "constellation": "psk16"})
        self.assertEqual(config.constellation, "PSK16")

    def test_bad_files(self):
        """확장자 오류, 구문 오류, 없는 파일은 모두 ConfigurationError"""
        yaml = _write(self.tmp.name, "run.yaml", "seed: 1\n")
        broken = _write(self.tmp.name, "run.json", "{seed: 1")
        listing = _write(self.tmp.name, "list.json", "[1, 2]")
        for path in (yaml, broken, listing, Path(self.tmp.name) / "missing.toml"):
            with self.assertRaises(ConfigurationError):
                ConfigService.parse_config("ber", path)

    def test_two_decade_eps_grid(self):
        """ε 격자가 두 자릿수 미만이면 거부"""
        path = _write(self.tmp.name, "run.json", '{"diversity": {"eps_start": 0.01, "eps_stop": 0.1}}')
        with self.assertRaises(ConfigurationError) as ctx:
            ConfigService.parse_config("diversity", path)
        self.assertIn("diversity.eps_stop", ctx.exception.errors)

    def test_output_dir_from_settings(self):
        """출력 디렉토리 기본값은 settings (환경 변수 IA_SIM_OUTPUT_DIR) 에서"""
        with override_settings(SIMULATION={**settings.SIMULATION, "OUTPUT_DIR": "/data/ia"}):
            self.assertEqual(str(ConfigService.parse_config("ber").output_dir), "/data/ia")
        config = ConfigService.parse_config("ber", options={"output_dir": self.tmp.name})
        self.assertEqual(str(config.output_dir), self.tmp.name)

    def test_snr_points(self):
        """SNR 격자는 양 끝 포함"""
        self.assertEqual(SnrGrid(20.0, 25.0, 2.0).points(), (20.0, 22.0, 24.0))
        self.assertEqual(SnrGrid(0.0, 0.3, 0.1).points(), (0.0, 0.1, 0.2, 0.3))
        self.assertEqual(SnrGrid(5.0, 5.0, 1.0).points(), (5.0,))

    def test_flag_overrides_skip_none(self):
        """값이 없는 옵션은 무시"""
        nested = flag_overrides({"seed": 3, "snr_stop": None, "format": "json", "verbosity": 1})
        self.assertEqual(nested, {"seed": 3, "output": {"format": "json"}})


class FlattenErrorsTestCase(SimpleTestCase):
    """serializer 오류 경로 펼침 테스트"""

    def test_nested(self):
        """중첩 dict 와 목록 인덱스"""
        detail = {"snr": {"step_db": ["양수"]}, "schemes": {1: ["잘못된 선택"]}, "non_field_errors": ["전체"]}
        flat = flatten_errors(detail)
        self.assertEqual(flat["snr.step_db"], ["양수"])
        self.assertEqual(flat["schemes.1"], ["잘못된 선택"])
        self.assertEqual(flat["non_field_errors"], ["전체"])

    def test_nested_non_field(self):
        """하위 serializer 의 전체 오류는 상위 경로에"""
        self.assertEqual(flatten_errors({"snr": {"non_field_errors": ["x"]}}), {"snr": ["x"]})


class RunServiceTestCase(SimpleTestCase):
    """실행 서비스 테스트"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _config(self, command="ber", **options):
        return ConfigService.parse_config(command, options={**SMALL, **options})

    def test_ber_rows(self):
        """방식 x SNR 점마다 한 행"""
        record = RunService.run(self._config(schemes=["x_alamouti", "jash"]))
        self.assertEqual(len(record.rows), 4)
        self.assertEqual({r.metric_name for r in record.rows}, {"ber"})
        self.assertEqual([r.snr_db for r in record.rows], [10.0, 12.0, 10.0, 12.0])
        self.assertTrue(all(r.seed == 0 and r.constellation == "BPSK" for r in record.rows))
        self.assertEqual(set(record.resample_counters), {"x_alamouti", "jash"})
        self.assertTrue(record.passed)

    def test_same_process_same_results(self):
        """같은 설정을 한 프로세스에서 두 번 실행해도 결과 동일"""
        config = self._config(schemes=["imac"])
        other = self._config(schemes=["jash"], seed=5)
        first = RunService.run(config)
        RunService.run(other)
        second = RunService.run(config)
        self.assertEqual(first.rows, second.rows)
        self.assertNotEqual(first.run_id, second.run_id)

    def test_mi_rows_with_dof(self):
        """합 전송률 행과 40~60 dB 자유도 행"""
        config = self._config("mi", schemes=["x_alamouti"], snr_start=40.0, snr_stop=60.0, snr_step=10.0, mi_trials=500)
        record = RunService.run(config)
        metrics = [r.metric_name for r in record.rows]
        self.assertEqual(metrics, ["sum_rate", "sum_rate", "sum_rate", "dof"])
        self.assertIsNone(record.rows[-1].snr_db)
        self.assertAlmostEqual(record.rows[-1].value, 8 / 3, delta=0.3)

    def test_mi_without_dof_window(self):
        """격자가 자유도 창을 덮지 않으면 자유도 행 생략"""
        record = RunService.run(self._config("mi", mi_trials=200))
        self.assertEqual([r.metric_name for r in record.rows], ["sum_rate", "sum_rate"])

    def test_diversity_rows(self):
        """불능 기울기와 BER 기울기 행"""
        path = Path(self.tmp.name) / "diversity.json"
        path.write_text(
            json.dumps({"diversity": {"ber_window_db": [0, 4], "eps_start": 0.1, "eps_stop": 10, "eps_points": 5}}),
            encoding="utf-8",
        )
        options = {**SMALL, "snr_start": 0.0, "snr_stop": 4.0, "gamma_trials": 20_000}
        record = RunService.run(ConfigService.parse_config("diversity", path, options))
        metrics = [r.metric_name for r in record.rows]
        self.assertIn("diversity_outage", metrics)
        self.assertIn("diversity_ber", metrics)
        self.assertEqual(metrics.count("ber"), 3)

    def test_diversity_skips_sparse_window(self):
        """BER 창과 겹치지 않는 격자는 건너뛰고 기록"""
        path = Path(self.tmp.name) / "diversity.json"
        path.write_text(json.dumps({"diversity": {"eps_start": 0.1, "eps_stop": 10}}), encoding="utf-8")
        record = RunService.run(ConfigService.parse_config("diversity", path, {**SMALL, "gamma_trials": 5_000}))
        self.assertEqual([s["metric"] for s in record.skipped], ["diversity_ber"])

    def test_verify_collects_reports(self):
        """검증 결과를 행과 실패 목록으로 정리"""
        with mock.patch(
            "apps.experiments.services.run_service.VerificationService.run_suite", return_value=_reports(False)
        ):
            record = RunService.run(self._config("verify"))
        self.assertEqual([r.metric_name for r in record.rows], ["x_interference_span", "phi_inverse_determinant"])
        self.assertEqual(record.rows[0].trials, 10)
        self.assertEqual(record.rows[1].ci_halfwidth, 0.01)
        self.assertEqual(record.failures, ["phi_inverse_determinant"])
        self.assertFalse(record.passed)

    def test_render_table(self):
        """결과 표 출력"""
        with mock.patch(
            "apps.experiments.services.run_service.VerificationService.run_suite", return_value=_reports(False)
        ):
            record = RunService.run(self._config("verify"))
        table = render_table(record)
        self.assertIn("PASS", table)
        self.assertIn("FAIL", table)
        self.assertIn("phi_inverse_determinant", table)

        table = render_table(RunService.run(self._config()))
        self.assertTrue(table.splitlines()[0].startswith("scheme"))
        self.assertEqual(len(table.splitlines()), 4)

    def test_log_lines_carry_run_id(self):
        """실행 중 로그에 run_id 가 붙고 verbose 형식에 출력"""
        config = self._config()
        handler = _RecordCollector()
        handler.addFilter(RunContextFilter())
        logger = logging.getLogger("apps.experiments")
        logger.addHandler(handler)
        self.addCleanup(logger.removeHandler, handler)

        record = RunService.run(config)

        self.assertTrue(handler.records)
        self.assertEqual({r.run_id for r in handler.records}, {record.run_id})
        verbose = settings.LOGGING["formatters"]["verbose"]
        line = logging.Formatter(verbose["format"], style=verbose["style"]).format(handler.records[0])
        self.assertIn(f" {record.run_id} ", line)


class ResultWriterTestCase(SimpleTestCase):
    """결과 파일 테스트"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _record(self, **options):
        return RunService.run(ConfigService.parse_config("ber", options={**SMALL, **options}))

    def test_csv_schema(self):
        """고정 열, UTF-8, LF 줄바꿈"""
        paths = ResultWriter.write(self._record(), self.tmp.name)
        raw = paths[0].read_bytes()
        self.assertNotIn(b"\r\n", raw)
        lines = raw.decode("utf-8").splitlines()
        self.assertEqual(lines[0], ",".join(CSV_COLUMNS))
        self.assertEqual(len(lines), 3)
        with open(paths[0], encoding="utf-8", newline="") as f:
            row = next(csv.DictReader(f))
        self.assertEqual(row["scheme"], "x_alamouti")
        self.assertEqual(float(row["snr_db"]), 10.0)
        self.assertEqual(row["seed"], "0")

    def test_manifest(self):
        """매니페스트에 설정 사본, 합 전송률 정의, 전력 규약, 버전"""
        paths = ResultWriter.write(self._record(seed=4), self.tmp.name)
        self.assertEqual([p.name for p in paths], ["ber_seed4.csv", "ber_seed4.manifest.json"])
        manifest = json.loads(paths[1].read_text(encoding="utf-8"))
        self.assertEqual(manifest["schema_version"], SCHEMA_VERSION)
        self.assertEqual(manifest["config"]["seed"], 4)
        self.assertEqual(manifest["config"]["snr"]["points"], [10.0, 12.0])
        self.assertIn("log2", manifest["mi_formula"])
        self.assertIn("x_alamouti", manifest["power_conventions"])
        self.assertIn("numpy", manifest["package_versions"])
        self.assertIn("x_alamouti", manifest["resample_counters"])
        self.assertEqual(manifest["results_file"], "ber_seed4.csv")
        self.assertGreaterEqual(manifest["wall_clock_seconds"], 0.0)

    def test_json_format(self):
        """json 형식은 행을 포함한 매니페스트 하나"""
        paths = ResultWriter.write(self._record(), self.tmp.name, "json")
        self.assertEqual(len(paths), 1)
        manifest = json.loads(paths[0].read_text(encoding="utf-8"))
        self.assertEqual(len(manifest["rows"]), 2)
        self.assertEqual(set(manifest["rows"][0]), set(CSV_COLUMNS))

    def test_nan_written_as_null(self):
        """NaN 통계량은 JSON 에서 null"""
        record = self._record()
        record.rows.append(ResultRow("-", "-", None, "lemma1_outage_slope", math.nan, None, 0, 0))
        record.reports.append(VerificationReport("lemma1_outage_slope", False, math.nan, "|d - 1| <= 0.1"))
        manifest = json.loads(ResultWriter.write(record, self.tmp.name, "json")[0].read_text(encoding="utf-8"))
        self.assertIsNone(manifest["rows"][-1]["value"])
        self.assertIsNone(manifest["verification"][0]["statistic"])
        self.assertEqual(manifest["failures"], ["lemma1_outage_slope"])

    def test_rerun_byte_identical(self):
        """같은 설정을 다시 실행하면 CSV 가 바이트 단위로 동일"""
        first = ResultWriter.write(self._record(), Path(self.tmp.name) / "a")[0].read_bytes()
        second = ResultWriter.write(self._record(), Path(self.tmp.name) / "b")[0].read_bytes()
        self.assertEqual(first, second)

    def test_manifest_without_reports(self):
        """검증이 없는 실행은 빈 verification"""
        record = RunRecord(run_id="ber-s0-test", config=ConfigService.parse_config("ber", options=SMALL))
        manifest = build_manifest(record)
        self.assertEqual(manifest["verification"], [])
        self.assertEqual(manifest["row_count"], 0)


class SimulateCommandTestCase(SimpleTestCase):
    """simulate 관리 명령 테스트"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _call(self, *args, **options):
        out = StringIO()
        call_command("simulate", *args, stdout=out, stderr=StringIO(), output_dir=self.tmp.name, **options)
        return out.getvalue()

    def test_ber_success(self):
        """BER 실행은 표를 출력하고 CSV 와 매니페스트 저장"""
        output = self._call("ber", **SMALL)
        self.assertIn("x_alamouti", output)
        self.assertIn("ber 완료", output)
        self.assertTrue((Path(self.tmp.name) / "ber_seed0.csv").exists())
        self.assertTrue((Path(self.tmp.name) / "ber_seed0.manifest.json").exists())

    def test_config_file_and_json_format(self):
        """설정 파일 + json 형식"""
        path = _write(self.tmp.name, "run.toml", 'schemes = ["imac"]\n[snr]\nstart_db = 10\nstop_db = 10\n')
        self._call("mi", config_file=str(path), mi_trials=100, format="json")
        manifest = json.loads((Path(self.tmp.name) / "mi_seed0.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["config"]["schemes"], ["imac"])
        self.assertEqual(manifest["rows"][0]["metric_name"], "sum_rate")

    def test_config_error_exit_code(self):
        """설정 오류는 종료 코드 2"""
        with self.assertRaises(CommandError) as ctx:
            self._call("ber", snr_step=0.0)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn("snr.step_db", str(ctx.exception))

    def test_pairing_error_exit_code(self):
        """PSK 전용 방식과 QAM16 조합은 종료 코드 2"""
        with self.assertRaises(CommandError) as ctx:
            self._call("ber", schemes=["ibc_alamouti"], constellation="QAM16")
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn("PSK", str(ctx.exception))

    def test_io_error_exit_code(self):
        """출력 경로가 파일이면 종료 코드 3"""
        blocker = _write(self.tmp.name, "blocker", "")
        out = StringIO()
        with self.assertRaises(CommandError) as ctx:
            call_command("simulate", "ber", stdout=out, output_dir=str(blocker / "results"), **SMALL)
        self.assertEqual(ctx.exception.returncode, 3)

    def test_verify_failure_exit_code(self):
        """검증 실패는 결과를 저장한 뒤 종료 코드 1"""
        with mock.patch(
            "apps.experiments.services.run_service.VerificationService.run_suite", return_value=_reports(False)
        ):
            with self.assertRaises(CommandError) as ctx:
                self._call("verify")
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("phi_inverse_determinant", str(ctx.exception))
        self.assertTrue((Path(self.tmp.name) / "verify_seed0.csv").exists())

    def test_verify_success(self):
        """모든 검증 통과면 정상 종료"""
        with mock.patch(
            "apps.experiments.services.run_service.VerificationService.run_suite", return_value=_reports(True)
        ):
            output = self._call("verify")
        self.assertIn("PASS", output)
        self.assertIn("verify 완료", output)

    @pytest.mark.slow
    def test_verify_suite_passes(self):
        """실제 검증 모음은 모두 통과"""
        output = self._call("verify", verify_trials=2_000, gamma_trials=200_000)
        self.assertNotIn("FAIL", output)

    @pytest.mark.slow
    def test_worker_count_does_not_change_csv(self):
        """작업자 수가 달라도 CSV 데이터 행은 바이트 단위로 동일"""
        options = {**SMALL, "schemes": ["x_alamouti", "ibc_alamouti"], "max_trials": 2_000, "target_errors": 50}
        results = []
        for workers in (1, 3):
            target = Path(self.tmp.name) / f"w{workers}"
            call_command("simulate", "ber", stdout=StringIO(), output_dir=str(target), workers=workers, **options)
            results.append((target / "ber_seed0.csv").read_bytes())
        self.assertEqual(results[0], results[1])
