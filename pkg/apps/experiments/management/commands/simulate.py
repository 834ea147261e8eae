import logging

from django.core.management.base import BaseCommand, CommandError

from apps.common.exceptions import VerificationFailed
from apps.common.responses import CommandResult
from apps.experiments.serializers.config_serializer import COMMANDS, OUTPUT_FORMATS
from apps.experiments.services.config_service import ConfigService
from apps.experiments.services.result_writer import ResultWriter
from apps.experiments.services.run_service import RunService, render_table
from apps.metrics.services.schemes import SCHEMES

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = (
        "Alamouti 기반 간섭 정렬 방식의 Monte Carlo 시뮬레이션을 실행합니다. "
        "종료 코드: 0 성공, 1 검증 실패/예상치 못한 오류, 2 설정 오류, 3 입출력 오류"
    )

    def add_arguments(self, parser):
        parser.add_argument("experiment", choices=COMMANDS, help="실행할 실험 (ber, mi, diversity, verify)")
        parser.add_argument("--config", dest="config_file", help="JSON(.json) 또는 TOML(.toml) 설정 파일")
        parser.add_argument("--schemes", nargs="+", choices=sorted(SCHEMES), help="실행할 방식 목록")
        parser.add_argument("--constellation", help="BPSK, QPSK, PSK16, QAM16")
        parser.add_argument("--snr-start", dest="snr_start", type=float, help="시작 SNR (dB)")
        parser.add_argument("--snr-stop", dest="snr_stop", type=float, help="종료 SNR (dB, 포함)")
        parser.add_argument("--snr-step", dest="snr_step", type=float, help="SNR 간격 (dB)")
        parser.add_argument("--target-errors", dest="target_errors", type=int, help="SNR 점당 목표 비트 오류 수")
        parser.add_argument("--max-trials", dest="max_trials", type=int, help="SNR 점당 최대 시행 수")
        parser.add_argument("--batch-size", dest="batch_size", type=int, help="작업 하나의 시행 수")
        parser.add_argument("--mi-trials", dest="mi_trials", type=int, help="합 전송률 채널 표본 수")
        parser.add_argument("--gamma-trials", dest="gamma_trials", type=int, help="불능 기울기/기댓값 표본 수")
        parser.add_argument("--verify-trials", dest="verify_trials", type=int, help="구조 검증 실현값 수")
        parser.add_argument("--seed", type=int, help="마스터 시드")
        parser.add_argument("--workers", type=int, help="작업자 프로세스 수")
        parser.add_argument("--noise-variance", dest="noise_variance", type=float, help="잡음 분산 (0 이면 무잡음)")
        parser.add_argument("--output-dir", dest="output_dir", help="결과 디렉토리 (환경 변수 IA_SIM_OUTPUT_DIR)")
        parser.add_argument("--format", choices=OUTPUT_FORMATS, help="결과 형식")

    def handle(self, *args, **options):
        result = self.execute_experiment(options)
        if not result.ok:
            raise CommandError(result.message, returncode=result.exit_code)
        self.stdout.write(self.style.SUCCESS(result.message))

    @CommandResult.handle
    def execute_experiment(self, options) -> CommandResult:
        config = ConfigService.parse_config(options["experiment"], options.get("config_file"), options)
        record = RunService.run(config)
        self.stdout.write(render_table(record))
        paths = ResultWriter.write(record)
        if not record.passed:
            raise VerificationFailed(record.failures)
        return CommandResult.success(
            message=f"{config.command} 완료: {len(record.rows)}행, {', '.join(str(p) for p in paths)}",
            data={"run_id": record.run_id, "files": [str(p) for p in paths]},
        )
