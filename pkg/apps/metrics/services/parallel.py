"""배치 작업 분배

작업 단위는 (방식, SNR 점, 배치 인덱스) 이고 배치마다 자기 하위 스트림을 씁니다. 결과는 입력
순서대로 돌아오므로 작업자 수가 달라도 합산 결과가 같습니다.
"""

import logging
from multiprocessing import Pool
from typing import Callable, Iterator, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_tasks(func: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """작업 목록을 순서대로 실행

    Args:
        func: 모듈 최상위 함수 (프로세스 간 전달 가능해야 함)
        tasks: 작업 인자 목록
        workers: 1 이하이면 현재 프로세스에서 실행

    Returns:
        tasks 와 같은 순서의 결과 목록
    """
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]

    with Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(func, tasks, chunksize=1)


def waves(start: int, stop: int, width: int) -> Iterator[range]:
    """[start, stop) 배치 인덱스를 width 개씩 나눈 구간"""
    width = max(1, width)
    for first in range(start, stop, width):
        yield range(first, min(first + width, stop))
