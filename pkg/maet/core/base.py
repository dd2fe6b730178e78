import logging
import time
from abc import ABC, abstractmethod
from typing import Any, Optional

from .errors import StageError
from .models import PipelineConfig

logger = logging.getLogger(__name__)


class BaseStage(ABC):
    """Base class for the pipeline stages.

    A stage loads its inputs (in-memory objects or files written by an
    earlier stage), transforms them and returns its output. `process`
    ties the two together and tags any failure with the stage name.
    """

    name: str = "stage"

    def __init__(self, config: Optional[PipelineConfig] = None, name: Optional[str] = None):
        self.config = config or PipelineConfig()
        if name is not None:
            self.name = name
        self._inputs: Any = None
        self._output: Any = None
        self.elapsed: float = 0.0

    @abstractmethod
    def load_data(self, source: Any) -> Any:
        """Load stage inputs from `source`."""
        pass

    @abstractmethod
    def transform_data(self) -> Any:
        """Run the stage on the loaded inputs."""
        pass

    def process(self, source: Any) -> Any:
        """Load, transform and return the stage output."""
        logger.info(f"Stage '{self.name}' started (n={self.config.n})")
        start = time.perf_counter()
        try:
            self._inputs = self.load_data(source)
            self._output = self.transform_data()
        except StageError:
            raise
        except Exception as e:
            logger.error(f"Stage '{self.name}' failed: {e}")
            raise StageError(self.name, e) from e
        self.elapsed = time.perf_counter() - start
        logger.info(f"Stage '{self.name}' finished in {self.elapsed:.2f}s")
        return self._output

    @property
    def output(self) -> Any:
        return self._output
