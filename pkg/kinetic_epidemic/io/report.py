"""Run report and its JSON form."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union


@dataclass
class RunReport:
    scenario: str
    wall_time: float = 0.0
    steps: int = 0
    final_time: float = 0.0
    manifest: List[str] = field(default_factory=list)
    conservation_drift: Dict[str, float] = field(default_factory=dict)
    fallbacks: int = 0
    undefined_r0_times: List[float] = field(default_factory=list)
    initial_r0: Optional[float] = None
    regional_r0: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def read_report(path: Union[str, Path]) -> RunReport:
    return RunReport(**json.loads(Path(path).read_text(encoding="utf-8")))
